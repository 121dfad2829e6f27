//! Random superposition codebooks and Monte Carlo checks of the resolvability,
//! decoding-error and secrecy bounds.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cq::{join, refs, CQState, Roles, SideInfoSetup};
use crate::divergence::{divergence_to_markov, divergence_to_product, sandwiched_renyi_op};
use crate::error::{Error, Result};
use crate::exponents::{assemble, renyi_quantities};
use crate::hyptest::{build_tests, TestPair};
use crate::pinching::{build_conditional_pinching, build_e_chain, PinchingConstants};
use crate::qmat::{c, fidelity_op, hermitian_part, eigh, max_eigenvalue, min_eigenvalue, purified_distance_op, trace_re, CMatrix};
use crate::rates::RateAllocation;

pub const DEFAULT_WORD_BUDGET: u128 = 1 << 16;
pub const MAX_POVM_ELEMENTS: usize = 1 << 12;
pub const MAX_BOB_DIM: usize = 16;
pub const POVM_TOL: f64 = 1e-9;

/// Integer rates: 2^R messages, 2^r u-words, 2^{R1} v-words per (message, u-word).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CodeRates {
    #[serde(rename = "R")]
    pub big_r: u32,
    #[serde(rename = "R1")]
    pub r1: u32,
    pub r: u32,
}

impl CodeRates {
    pub fn new(big_r: u32, r1: u32, r: u32) -> Self {
        CodeRates { big_r, r1, r }
    }

    pub fn total_words(&self) -> u128 {
        1u128.checked_shl(self.big_r + self.r1 + self.r).unwrap_or(u128::MAX)
    }

    pub fn allocation(&self) -> RateAllocation {
        RateAllocation { big_r: self.big_r as f64, r1: self.r1 as f64, r: self.r as f64, slack: (0.0, 0.0, 0.0) }
    }
}

/// Joint pmf of (U, V) with U and V flattened to single indices.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPmf {
    pub nu: usize,
    pub nv: usize,
    /// p[u·nv + v]
    pub p: Vec<f64>,
}

impl JointPmf {
    pub fn from_state(s: &CQState, u: &[&str], v: &[&str]) -> Result<Self> {
        let nu = s.marginal(u, &[])?.num_tuples();
        let joint = s.marginal(&join(u, v), &[])?;
        Ok(JointPmf { nu, nv: joint.num_tuples() / nu, p: joint.pmf().to_vec() })
    }

    pub fn p_u(&self) -> Vec<f64> {
        (0..self.nu).map(|u| self.p[u * self.nv..(u + 1) * self.nv].iter().sum()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Codebook {
    pub rates: CodeRates,
    pub seed: u64,
    pub trial: u64,
    u_words: Vec<usize>,
    /// Flattened (m, i, j).
    v_words: Vec<usize>,
}

impl Codebook {
    pub fn from_words(rates: CodeRates, u_words: Vec<usize>, v_words: Vec<usize>) -> Result<Self> {
        let nu = 1usize << rates.r;
        let nv = nu << (rates.big_r + rates.r1);
        if u_words.len() != nu || v_words.len() != nv {
            return Err(Error::InvalidArgument(format!(
                "expected {nu} u-words and {nv} v-words, got {} and {}",
                u_words.len(),
                v_words.len()
            )));
        }
        Ok(Codebook { rates, seed: 0, trial: 0, u_words, v_words })
    }

    pub fn messages(&self) -> usize {
        1 << self.rates.big_r
    }

    pub fn u_count(&self) -> usize {
        1 << self.rates.r
    }

    pub fn bin_size(&self) -> usize {
        1 << self.rates.r1
    }

    pub fn u_words(&self) -> &[usize] {
        &self.u_words
    }

    pub fn u(&self, i: usize) -> usize {
        self.u_words[i]
    }

    pub fn v(&self, m: usize, i: usize, j: usize) -> usize {
        self.v_words[(m * self.u_count() + i) * self.bin_size() + j]
    }

    /// Joint (u, v) indices of the codewords of message m.
    pub fn message_words(&self, m: usize, nv: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.u_count()).flat_map(move |i| (0..self.bin_size()).map(move |j| self.u(i) * nv + self.v(m, i, j)))
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-trial generator on lane 0 (u-words) or 1 (v-words).
pub fn trial_rng(seed: u64, trial: u64, lane: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(trial)));
    rng.set_stream(lane);
    rng
}

pub fn sample_codebook(p: &JointPmf, rates: CodeRates, seed: u64, trial: u64, budget: u128) -> Result<Codebook> {
    let needed = rates.total_words();
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let pu = p.p_u();
    let du = WeightedIndex::new(&pu).map_err(|e| Error::BadPmf(e.to_string()))?;
    let dv: Vec<Option<WeightedIndex<f64>>> = (0..p.nu)
        .map(|u| (pu[u] > 0.0).then(|| WeightedIndex::new(&p.p[u * p.nv..(u + 1) * p.nv]).ok()).flatten())
        .collect();
    let mut ru = trial_rng(seed, trial, 0);
    let mut rv = trial_rng(seed, trial, 1);
    let nu = 1usize << rates.r;
    let u_words: Vec<usize> = (0..nu).map(|_| du.sample(&mut ru)).collect();
    let (nm, nb) = (1usize << rates.big_r, 1usize << rates.r1);
    let mut v_words = Vec::with_capacity(nm * nu * nb);
    for _ in 0..nm {
        for &u in &u_words {
            let d = dv[u].as_ref().ok_or_else(|| Error::BadPmf(format!("p(v|u={u}) undefined")))?;
            for _ in 0..nb {
                v_words.push(d.sample(&mut rv));
            }
        }
    }
    Ok(Codebook { rates, seed, trial, u_words, v_words })
}

/// Summary of a Monte Carlo experiment. `pass` means the analytic bound is at
/// least the empirical mean minus three standard errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub quantity: String,
    pub trials: usize,
    pub empirical_mean: f64,
    pub std_error: f64,
    pub half_width: f64,
    pub analytic_bound: f64,
    pub per_trial: Vec<f64>,
    pub extra_columns: Vec<(String, Vec<f64>)>,
    pub pass: bool,
}

impl TrialResult {
    pub fn new(quantity: &str, per_trial: Vec<f64>, analytic_bound: f64, extra_columns: Vec<(String, Vec<f64>)>) -> Self {
        let n = per_trial.len();
        let mean = per_trial.iter().sum::<f64>() / n as f64;
        let var = if n > 1 { per_trial.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
        let se = (var / n as f64).sqrt();
        TrialResult {
            quantity: quantity.to_string(),
            trials: n,
            empirical_mean: mean,
            std_error: se,
            half_width: 3.0 * se,
            analytic_bound,
            per_trial,
            extra_columns,
            pass: mean - 3.0 * se <= analytic_bound,
        }
    }
}

fn check_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    Ok(())
}

fn average(states: impl Iterator<Item = CMatrix>, d: usize) -> CMatrix {
    let mut acc = CMatrix::zeros(d, d);
    let mut n = 0usize;
    for m in states {
        acc += m;
        n += 1;
    }
    acc / c(n as f64, 0.0)
}

/// E_C[2^{αD(τ_{X|C}‖ρ_X)}] for τ_{X|C} = 2^{−(R+r)} Σ_{i,j} ρ_{X|U(i),V(i,j)}, with
/// 2^r outer words and 2^R inner words per outer word.
#[allow(clippy::too_many_arguments)]
pub fn resolvability_experiment(
    s: &CQState,
    u: &[&str],
    v: &[&str],
    x: &[&str],
    r: u32,
    big_r: u32,
    alpha: f64,
    trials: usize,
    seed: u64,
    cluster_tol: f64,
) -> Result<TrialResult> {
    check_trials(trials)?;
    let uv = join(u, v);
    let joint = s.marginal(&uv, x)?;
    let pmf = JointPmf::from_state(s, u, v)?;
    let rho = joint.average_state();
    let d = rho.nrows();
    let rates = CodeRates::new(0, big_r, r);
    let rows: Vec<(f64, f64)> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let cb = sample_codebook(&pmf, rates, seed, t, DEFAULT_WORD_BUDGET)?;
            let tau = average(cb.message_words(0, pmf.nv).map(|k| joint.conditional(k).clone()), d);
            let div = sandwiched_renyi_op(&tau, &rho, 1.0 + alpha)?;
            Ok(((alpha * div).exp2(), div))
        })
        .collect::<Result<_>>()?;
    let chain = build_e_chain(s, u, x, cluster_tol)?;
    let d_u = divergence_to_product(s, u, x, 1.0 + alpha)?;
    let d_uv = divergence_to_product(s, &uv, x, 1.0 + alpha)?;
    let bound = 1.0
        + (chain.v1 as f64 / (r as f64).exp2()).powf(alpha) * (alpha * d_u).exp2()
        + (chain.v2 as f64 / ((big_r + r) as f64).exp2()).powf(alpha) * (alpha * d_uv).exp2();
    let (vals, divs): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
    Ok(TrialResult::new("2^(alpha*D)", vals, bound, vec![("divergence".into(), divs)]))
}

/// E_C[2^{αD(τ_{X|C}‖ρ_{X|U'})}] with U' ~ p_U and 2^{R1} words V(j) ~ p_{V|U'}.
#[allow(clippy::too_many_arguments)]
pub fn conditional_resolvability_experiment(
    s: &CQState,
    u: &[&str],
    v: &[&str],
    x: &[&str],
    r1: u32,
    alpha: f64,
    trials: usize,
    seed: u64,
    cluster_tol: f64,
) -> Result<TrialResult> {
    check_trials(trials)?;
    let joint = s.marginal(&join(u, v), x)?;
    let given_u = s.marginal(u, x)?;
    let pmf = JointPmf::from_state(s, u, v)?;
    let d = joint.quantum().total_dim();
    let rates = CodeRates::new(0, r1, 0);
    let rows: Vec<(f64, f64, f64)> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let cb = sample_codebook(&pmf, rates, seed, t, DEFAULT_WORD_BUDGET)?;
            let tau = average(cb.message_words(0, pmf.nv).map(|k| joint.conditional(k).clone()), d);
            let div = sandwiched_renyi_op(&tau, given_u.conditional(cb.u(0)), 1.0 + alpha)?;
            Ok(((alpha * div).exp2(), div, cb.u(0) as f64))
        })
        .collect::<Result<_>>()?;
    let v5 = build_conditional_pinching(s, u, x, cluster_tol)?.max_len() as f64;
    let d_m = divergence_to_markov(s, v, u, x, 1.0 + alpha)?;
    let bound = 1.0 + v5.powf(alpha) * (-alpha * r1 as f64).exp2() * (alpha * d_m).exp2();
    let mut vals = Vec::with_capacity(trials);
    let mut divs = Vec::with_capacity(trials);
    let mut us = Vec::with_capacity(trials);
    for (a, b, c) in rows {
        vals.push(a);
        divs.push(b);
        us.push(c);
    }
    Ok(TrialResult::new("2^(alpha*D)", vals, bound, vec![("divergence".into(), divs), ("u".into(), us)]))
}

/// Everything the decoder and secrecy evaluations need for one setup and rate
/// triple: the per-(u,v) output states and the tests Π_{uv}.
#[derive(Debug, Clone)]
pub struct DecodeContext {
    pub rates: CodeRates,
    pub roles: Roles,
    pub pmf: JointPmf,
    pub state: CQState,
    bob: Vec<CMatrix>,
    side: Vec<CMatrix>,
    eve: Vec<CMatrix>,
    rho_s: CMatrix,
    pub tests: TestPair,
}

impl DecodeContext {
    pub fn new(setup: &SideInfoSetup, roles: &Roles, rates: CodeRates, cluster_tol: f64) -> Result<Self> {
        Self::from_rate_state(setup.rate_state()?, roles, rates, cluster_tol)
    }

    /// `state` is over (U, V; B, E, S) as produced by [`SideInfoSetup::rate_state`].
    pub fn from_rate_state(state: CQState, roles: &Roles, rates: CodeRates, cluster_tol: f64) -> Result<Self> {
        let count = rates.total_words();
        if count > MAX_POVM_ELEMENTS as u128 {
            return Err(Error::DimensionBudget(format!("{count} POVM elements, limit {MAX_POVM_ELEMENTS}")));
        }
        let (u, v, b) = (refs(&roles.u), refs(&roles.v), refs(&roles.b));
        let uv = join(&u, &v);
        let bob = state.marginal(&uv, &b)?;
        let db = bob.quantum().total_dim();
        if db > MAX_BOB_DIM {
            return Err(Error::DimensionBudget(format!("receiver dimension {db}, limit {MAX_BOB_DIM}")));
        }
        let side = state.marginal(&uv, &refs(&roles.s))?;
        let eve = state.marginal(&uv, &refs(&roles.e))?;
        let chain = build_e_chain(&state, &u, &b, cluster_tol)?;
        let m1 = ((rates.big_r + rates.r1 + rates.r) as f64).exp2();
        let m2 = ((rates.big_r + rates.r1) as f64).exp2();
        let tests = build_tests(&state, &u, &v, &b, m1, m2, &chain)?;
        Ok(DecodeContext {
            rates,
            roles: roles.clone(),
            pmf: JointPmf::from_state(&state, &u, &v)?,
            rho_s: side.average_state(),
            bob: bob.conditionals().to_vec(),
            side: side.conditionals().to_vec(),
            eve: eve.conditionals().to_vec(),
            state,
            tests,
        })
    }

    pub fn sample(&self, seed: u64, trial: u64) -> Result<Codebook> {
        sample_codebook(&self.pmf, self.rates, seed, trial, DEFAULT_WORD_BUDGET)
    }

    fn check_codebook(&self, cb: &Codebook) -> Result<()> {
        if cb.rates != self.rates {
            return Err(Error::InvalidArgument("codebook rates differ from the decoder's".into()));
        }
        if cb.u_words.iter().any(|&u| u >= self.pmf.nu) || cb.v_words.iter().any(|&v| v >= self.pmf.nv) {
            return Err(Error::InvalidArgument("codeword symbol outside the alphabet".into()));
        }
        Ok(())
    }

    /// Square-root-measurement error of one codebook against the averaged
    /// received states, plus the side-information correction.
    pub fn decode(&self, cb: &Codebook) -> Result<DecodeOutcome> {
        self.check_codebook(cb)?;
        let nv = self.pmf.nv;
        let db = self.bob[0].nrows();
        let mut total = CMatrix::zeros(db, db);
        for m in 0..cb.messages() {
            for k in cb.message_words(m, nv) {
                total += &self.tests.pi[k];
            }
        }
        // the γ are O(1) projectors, so an absolute cut keeps round-off out of the inverse
        let inv_root = eigh(&hermitian_part(&total))?.map(|x| if x > POVM_TOL { x.powf(-0.5) } else { 0.0 });
        let mut povm_min = f64::INFINITY;
        let mut povm_sum = CMatrix::zeros(db, db);
        let (mut err, mut corr) = (Vec::new(), Vec::new());
        for m in 0..cb.messages() {
            let mut correct = CMatrix::zeros(db, db);
            for k in cb.message_words(m, nv) {
                let beta = hermitian_part(&(&inv_root * &self.tests.pi[k] * &inv_root));
                povm_min = povm_min.min(min_eigenvalue(&beta)?);
                correct += &beta;
            }
            povm_sum += &correct;
            let theta = average(cb.message_words(m, nv).map(|k| self.bob[k].clone()), db);
            let tau_s = average(cb.message_words(m, nv).map(|k| self.side[k].clone()), self.rho_s.nrows());
            err.push(1.0 - trace_re(&(&correct * &theta)));
            corr.push(purified_distance_op(&tau_s, &self.rho_s)?.powi(2));
        }
        let n = err.len() as f64;
        let error = err.iter().sum::<f64>() / n;
        let correction = corr.iter().sum::<f64>() / n;
        let povm_max_sum = max_eigenvalue(&hermitian_part(&povm_sum))?;
        Ok(DecodeOutcome {
            error,
            correction,
            total: 2.0 * error + 2.0 * correction,
            error_m1: err[0],
            total_m1: 2.0 * err[0] + 2.0 * corr[0],
            povm_min_eig: povm_min,
            povm_max_sum_eig: povm_max_sum,
            povm_valid: povm_min >= -POVM_TOL && povm_max_sum <= 1.0 + POVM_TOL,
        })
    }

    /// P(ρ_ME, ρ_M ⊗ ρ_E) for uniform messages, with ρ_{E|m} the average of the
    /// eavesdropper states over the message's codewords.
    pub fn secrecy(&self, cb: &Codebook) -> Result<f64> {
        self.check_codebook(cb)?;
        let de = self.eve[0].nrows();
        let per: Vec<CMatrix> = (0..cb.messages()).map(|m| average(cb.message_words(m, self.pmf.nv).map(|k| self.eve[k].clone()), de)).collect();
        let rho_e = average(per.iter().cloned(), de);
        let mut f = 0.0;
        for r in &per {
            f += fidelity_op(r, &rho_e)?;
        }
        f /= per.len() as f64;
        Ok((1.0 - f * f).max(0.0).sqrt())
    }

    fn bound_over(&self, alphas: &[f64], pick: impl Fn(&crate::exponents::ExponentReport) -> f64 + Sync, cluster_tol: f64) -> Result<(f64, f64)> {
        let consts = PinchingConstants::measure(&self.state, &self.roles, cluster_tol)?;
        let alloc = self.rates.allocation();
        let vals: Vec<f64> = alphas
            .par_iter()
            .map(|&a| Ok(pick(&assemble(renyi_quantities(&self.state, &self.roles, a)?, consts, alloc))))
            .collect::<Result<_>>()?;
        let mut best = (alphas[0], vals[0]);
        for (a, v) in alphas.iter().zip(&vals) {
            if *v < best.1 {
                best = (*a, *v);
            }
        }
        Ok(best)
    }

    /// Random-code average error bound minimized over `alphas`, as (α, value).
    pub fn error_bound(&self, alphas: &[f64], cluster_tol: f64) -> Result<(f64, f64)> {
        self.bound_over(alphas, |r| r.average_error_bound, cluster_tol)
    }

    /// Random-code bound on E[P²] minimized over `alphas`.
    pub fn secrecy_bound(&self, alphas: &[f64], cluster_tol: f64) -> Result<(f64, f64)> {
        self.bound_over(alphas, |r| r.average_secrecy_bound_sq, cluster_tol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecodeOutcome {
    /// Average over messages of Tr[(I − Σ_{ij} β(m,i,j)) Θ̂(m)].
    pub error: f64,
    /// Average over messages of P(τ_{S|m}, ρ_S)².
    pub correction: f64,
    pub total: f64,
    pub error_m1: f64,
    pub total_m1: f64,
    pub povm_min_eig: f64,
    pub povm_max_sum_eig: f64,
    pub povm_valid: bool,
}

/// α values for the decoding bound; the I_{1−α} minimizer needs 1 − α ≥ 1/2.
pub fn decode_alpha_grid() -> Vec<f64> {
    (1..=10).map(|k| k as f64 * 0.05).collect()
}

pub fn secrecy_alpha_grid() -> Vec<f64> {
    (1..=19).map(|k| k as f64 * 0.05).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecodeBatch {
    pub result: TrialResult,
    pub bound_alpha: f64,
    pub outcomes: Vec<DecodeOutcome>,
    pub all_povms_valid: bool,
}

pub fn decode_experiment(ctx: &DecodeContext, trials: usize, seed: u64, cluster_tol: f64) -> Result<DecodeBatch> {
    check_trials(trials)?;
    let outcomes: Vec<DecodeOutcome> = (0..trials as u64).into_par_iter().map(|t| ctx.decode(&ctx.sample(seed, t)?)).collect::<Result<_>>()?;
    let (alpha, bound) = ctx.error_bound(&decode_alpha_grid(), cluster_tol)?;
    let col = |f: fn(&DecodeOutcome) -> f64| outcomes.iter().map(f).collect::<Vec<f64>>();
    let extra = vec![
        ("error".to_string(), col(|o| o.error)),
        ("correction".to_string(), col(|o| o.correction)),
        ("total_m1".to_string(), col(|o| o.total_m1)),
        ("povm_min_eig".to_string(), col(|o| o.povm_min_eig)),
        ("povm_max_sum_eig".to_string(), col(|o| o.povm_max_sum_eig)),
    ];
    Ok(DecodeBatch {
        result: TrialResult::new("error_plus_correction", col(|o| o.total), bound, extra),
        bound_alpha: alpha,
        all_povms_valid: outcomes.iter().all(|o| o.povm_valid),
        outcomes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SecrecyBatch {
    pub result: TrialResult,
    pub bound_alpha: f64,
    pub distances: Vec<f64>,
}

/// Squared secrecy distance per codebook against the averaged bound on E[P²].
/// Uses the same codebooks as [`decode_experiment`] for equal seeds.
pub fn secrecy_experiment(ctx: &DecodeContext, trials: usize, seed: u64, cluster_tol: f64) -> Result<SecrecyBatch> {
    check_trials(trials)?;
    let distances: Vec<f64> = (0..trials as u64).into_par_iter().map(|t| ctx.secrecy(&ctx.sample(seed, t)?)).collect::<Result<_>>()?;
    let (alpha, bound) = ctx.secrecy_bound(&secrecy_alpha_grid(), cluster_tol)?;
    let sq = distances.iter().map(|d| d * d).collect();
    Ok(SecrecyBatch {
        result: TrialResult::new("secrecy_distance_sq", sq, bound, vec![("distance".into(), distances.clone())]),
        bound_alpha: alpha,
        distances,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpurgationReport {
    pub beta: f64,
    pub threshold: f64,
    pub mean_error: f64,
    pub mean_secrecy: f64,
    pub good: usize,
    pub total: usize,
    pub fraction: f64,
    pub pass: bool,
}

/// Fraction of codebooks with error ≤ (1+β)·mean and secrecy ≤ (1+β)·mean,
/// compared with the Markov/union guarantee (β−1)/(β+1).
pub fn expurgation_check(errors: &[f64], secrecy: &[f64], beta: f64) -> Result<ExpurgationReport> {
    if errors.len() != secrecy.len() || errors.is_empty() {
        return Err(Error::InvalidArgument("need equally many nonempty error and secrecy samples".into()));
    }
    if beta <= 1.0 {
        return Err(Error::InvalidArgument(format!("β = {beta} must exceed 1")));
    }
    let n = errors.len();
    let me = errors.iter().sum::<f64>() / n as f64;
    let ms = secrecy.iter().sum::<f64>() / n as f64;
    let good = errors.iter().zip(secrecy).filter(|(e, s)| **e <= (1.0 + beta) * me && **s <= (1.0 + beta) * ms).count();
    let threshold = (beta - 1.0) / (beta + 1.0);
    let fraction = good as f64 / n as f64;
    Ok(ExpurgationReport { beta, threshold, mean_error: me, mean_secrecy: ms, good, total: n, fraction, pass: fraction >= threshold })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cq::QuantumChannel;
    use crate::qmat::{diag, identity, kron, RegisterLayout};
    use crate::random::{random_density, random_probability};

    fn layout(regs: &[(&str, usize)]) -> RegisterLayout {
        RegisterLayout::new(regs.iter().map(|(n, d)| (n.to_string(), *d))).unwrap()
    }

    fn random_cq(seed: u64, x: &str) -> CQState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CQState::new(layout(&[("U", 2), ("V", 2)]), random_probability(&mut rng, 4), (0..4).map(|_| Some(random_density(&mut rng, 2, 2))).collect(), layout(&[(x, 2)])).unwrap()
    }

    #[test]
    fn sampling_basics() {
        let p = JointPmf { nu: 2, nv: 2, p: vec![0.0, 0.0, 0.3, 0.7] };
        let cb = sample_codebook(&p, CodeRates::new(1, 2, 3), 9, 0, DEFAULT_WORD_BUDGET).unwrap();
        assert!(cb.u_words().iter().all(|&u| u == 1));
        assert_eq!(cb.v_words.len(), 2 * 8 * 4);
        let one = sample_codebook(&p, CodeRates::new(2, 0, 0), 9, 0, DEFAULT_WORD_BUDGET).unwrap();
        assert_eq!(one.u_count(), 1);
        let again = sample_codebook(&p, CodeRates::new(1, 2, 3), 9, 0, DEFAULT_WORD_BUDGET).unwrap();
        assert_eq!(cb, again);
        assert!(matches!(sample_codebook(&p, CodeRates::new(9, 4, 4), 9, 0, DEFAULT_WORD_BUDGET), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn u_frequencies_binomial() {
        let p = JointPmf { nu: 2, nv: 1, p: vec![0.5, 0.5] };
        // 1024 words per codebook; count ones across 20 codebooks
        for t in 0..20 {
            let cb = sample_codebook(&p, CodeRates::new(0, 0, 10), 3, t, DEFAULT_WORD_BUDGET).unwrap();
            let ones = cb.u_words().iter().filter(|&&u| u == 1).count() as f64;
            let sd = (1024.0f64 * 0.25).sqrt();
            assert!((ones - 512.0).abs() <= 4.0 * sd, "{ones}");
        }
    }

    #[test]
    fn v_words_follow_conditional() {
        let p = JointPmf { nu: 2, nv: 2, p: vec![0.45, 0.05, 0.1, 0.4] };
        let cb = sample_codebook(&p, CodeRates::new(0, 10, 1), 4, 0, DEFAULT_WORD_BUDGET).unwrap();
        for i in 0..2 {
            let u = cb.u(i);
            let pv1 = p.p[u * 2 + 1] / (p.p[u * 2] + p.p[u * 2 + 1]);
            let ones = (0..1024).filter(|&j| cb.v(0, i, j) == 1).count() as f64;
            let sd = (1024.0 * pv1 * (1.0 - pv1)).sqrt();
            assert!((ones - 1024.0 * pv1).abs() <= 4.0 * sd);
        }
    }

    #[test]
    fn trivial_alphabets_give_zero_divergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = CQState::new(layout(&[("U", 1), ("V", 1)]), vec![1.0], vec![Some(random_density(&mut rng, 2, 2))], layout(&[("S", 2)])).unwrap();
        let r = resolvability_experiment(&s, &["U"], &["V"], &["S"], 2, 2, 0.5, 5, 1, 1e-9).unwrap();
        assert!(r.extra_columns[0].1.iter().all(|d| d.abs() < 1e-10));
    }

    #[test]
    fn full_enumeration_is_exact() {
        // dyadic pmf; a codebook containing each pair with the right multiplicity
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pmf = vec![0.25, 0.25, 0.375, 0.125];
        let conds: Vec<CMatrix> = (0..4).map(|_| random_density(&mut rng, 2, 2)).collect();
        let s = CQState::new(layout(&[("U", 2), ("V", 2)]), pmf, conds.iter().cloned().map(Some).collect(), layout(&[("S", 2)])).unwrap();
        // U: 0 half of the time; given U=0, V uniform; given U=1, V=0 w.p. 3/4
        let u_words = vec![0, 0, 1, 1];
        let v_words = vec![0, 1, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 1, 0, 1];
        let cb = Codebook::from_words(CodeRates::new(0, 2, 2), u_words, v_words).unwrap();
        let tau = average(cb.message_words(0, 2).map(|k| conds[k].clone()), 2);
        let rho = s.marginal(&[], &["S"]).unwrap().average_state();
        // the multiset above has per-u frequencies (1/2,1/2) and (1/2,1/2): fix u=1 counts
        let exact = (&tau - &rho).norm() < 1e-12;
        let counts: Vec<usize> = (0..4).map(|k| cb.message_words(0, 2).filter(|&x| x == k).count()).collect();
        assert_eq!(exact, counts == vec![4, 4, 6, 2]);
        let u_words = vec![0, 0, 1, 1];
        let v_words = vec![0, 1, 0, 1, 0, 1, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1];
        let cb = Codebook::from_words(CodeRates::new(0, 2, 2), u_words, v_words).unwrap();
        let tau = average(cb.message_words(0, 2).map(|k| conds[k].clone()), 2);
        assert!((&tau - &rho).norm() < 1e-12);
        assert!(sandwiched_renyi_op(&tau, &rho, 1.5).unwrap().abs() < 1e-10);
    }

    #[test]
    fn resolvability_bound_holds() {
        let s = random_cq(3, "S");
        let r = resolvability_experiment(&s, &["U"], &["V"], &["S"], 3, 3, 0.5, 200, 11, 1e-9).unwrap();
        assert!(r.pass, "{} ± {} vs {}", r.empirical_mean, r.half_width, r.analytic_bound);
        let lo = resolvability_experiment(&s, &["U"], &["V"], &["S"], 1, 1, 0.5, 200, 11, 1e-9).unwrap();
        assert!(r.empirical_mean <= lo.empirical_mean + lo.half_width + r.half_width);
    }

    #[test]
    fn conditional_resolvability() {
        let s = random_cq(4, "E");
        let r = conditional_resolvability_experiment(&s, &["U"], &["V"], &["E"], 4, 0.3, 200, 12, 1e-9).unwrap();
        assert!(r.pass);
        // one word: the divergence of the drawn conditional
        let one = conditional_resolvability_experiment(&s, &["U"], &["V"], &["E"], 0, 0.3, 3, 12, 1e-9).unwrap();
        let joint = s.marginal(&["U", "V"], &["E"]).unwrap();
        let given = s.marginal(&["U"], &["E"]).unwrap();
        let pmf = JointPmf::from_state(&s, &["U"], &["V"]).unwrap();
        for t in 0..3 {
            let cb = sample_codebook(&pmf, CodeRates::new(0, 0, 0), 12, t, DEFAULT_WORD_BUDGET).unwrap();
            let k = cb.u(0) * 2 + cb.v(0, 0, 0);
            let d = sandwiched_renyi_op(joint.conditional(k), given.conditional(cb.u(0)), 1.3).unwrap();
            assert!((one.extra_columns[0].1[t as usize] - d).abs() < 1e-12);
        }
        // V independent of E given U
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (a, b) = (random_density(&mut rng, 2, 2), random_density(&mut rng, 2, 2));
        let ind = CQState::new(layout(&[("U", 2), ("V", 2)]), random_probability(&mut rng, 4), vec![Some(a.clone()), Some(a), Some(b.clone()), Some(b)], layout(&[("E", 2)])).unwrap();
        let z = conditional_resolvability_experiment(&ind, &["U"], &["V"], &["E"], 2, 0.3, 10, 1, 1e-9).unwrap();
        assert!(z.extra_columns[0].1.iter().all(|d| d.abs() < 1e-10));
    }

    fn copy_state() -> CQState {
        // V uniform bit, B a noiseless copy, no U, E or S content
        CQState::new(layout(&[("V", 2)]), vec![0.5, 0.5], vec![Some(diag(&[1.0, 0.0])), Some(diag(&[0.0, 1.0]))], layout(&[("B", 2)])).unwrap()
    }

    fn copy_roles() -> Roles {
        Roles { u: vec![], v: vec!["V".into()], b: vec!["B".into()], e: vec![], s: vec![] }
    }

    #[test]
    fn noiseless_distinct_codewords_decode_exactly() {
        let ctx = DecodeContext::from_rate_state(copy_state(), &copy_roles(), CodeRates::new(1, 0, 0), 1e-9).unwrap();
        let cb = Codebook::from_words(CodeRates::new(1, 0, 0), vec![0], vec![0, 1]).unwrap();
        let o = ctx.decode(&cb).unwrap();
        assert!(o.error.abs() < 1e-12 && o.correction.abs() < 1e-12 && o.povm_valid);
        assert!(ctx.secrecy(&cb).unwrap().abs() < 1e-12);
    }

    #[test]
    fn single_codeword_uses_test_projector() {
        let s = random_cq(6, "B");
        let roles = Roles { e: vec![], s: vec![], ..Roles::default() };
        let ctx = DecodeContext::from_rate_state(s.clone(), &roles, CodeRates::new(0, 0, 0), 1e-9).unwrap();
        for t in 0..4 {
            let cb = ctx.sample(7, t).unwrap();
            let k = cb.u(0) * 2 + cb.v(0, 0, 0);
            let pi = &ctx.tests.pi[k];
            let expect = 1.0 - trace_re(&(pi * s.marginal(&["U", "V"], &["B"]).unwrap().conditional(k)));
            let o = ctx.decode(&cb).unwrap();
            assert!((o.error - expect).abs() < 1e-9, "{} vs {expect}", o.error);
            assert!(ctx.secrecy(&cb).unwrap().abs() < 1e-12);
        }
    }

    /// Qubit encoder with side information: ρ_{AS|uv} = |ψ_uv⟩⟨ψ_uv| ⊗ ρ_{S|u},
    /// channel CNOT(S→A) then depolarizing noise on the A output, E receives S.
    fn qubit_setup() -> SideInfoSetup {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let psi = |u: usize, v: usize| -> CMatrix {
            let vec = if u == 0 {
                if v == 0 { [1.0, 0.0] } else { [0.0, 1.0] }
            } else if v == 0 {
                [h, h]
            } else {
                [h, -h]
            };
            CMatrix::from_fn(2, 2, |a, b| c(vec[a] * vec[b], 0.0))
        };
        let rs = [diag(&[0.8, 0.2]), diag(&[0.4, 0.6])];
        let conds = (0..4).map(|k| Some(kron(&psi(k / 2, k % 2), &rs[k / 2]))).collect();
        let state = CQState::new(layout(&[("U", 2), ("V", 2)]), vec![0.25; 4], conds, layout(&[("A", 2), ("S", 2)])).unwrap();
        let mut cnot = CMatrix::zeros(4, 4);
        // basis |a s⟩ -> |a⊕s, s⟩
        for a in 0..2 {
            for s in 0..2 {
                cnot[(((a ^ s) << 1) | s, (a << 1) | s)] = c(1.0, 0.0);
            }
        }
        let p: f64 = 0.1;
        let paulis = [identity(2), CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]), CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)]), diag(&[1.0, -1.0])];
        let w = [1.0 - 3.0 * p / 4.0, p / 4.0, p / 4.0, p / 4.0];
        let kraus = (0..4).map(|k| kron(&paulis[k], &identity(2)) * &cnot * c(w[k].sqrt(), 0.0)).collect();
        let ch = QuantumChannel::new(kraus, layout(&[("A", 2), ("S", 2)]), layout(&[("B", 2), ("E", 2)])).unwrap();
        SideInfoSetup::new(state, ch, vec!["S".into()]).unwrap()
    }

    #[test]
    fn qubit_decoder_and_expurgation() {
        let ctx = DecodeContext::new(&qubit_setup(), &Roles::default(), CodeRates::new(1, 1, 1), 1e-9).unwrap();
        assert!(ctx.tests.defect().unwrap() < 1e-8);
        let dec = decode_experiment(&ctx, 40, 21, 1e-9).unwrap();
        assert!(dec.all_povms_valid);
        assert!(dec.result.pass);
        let sec = secrecy_experiment(&ctx, 40, 21, 1e-9).unwrap();
        assert!(sec.result.pass);
        let errs: Vec<f64> = dec.outcomes.iter().map(|o| o.total).collect();
        let rep = expurgation_check(&errs, &sec.distances, 1.1).unwrap();
        assert!((rep.threshold - 1.0 / 21.0).abs() < 1e-15);
        assert!(rep.pass);
        // same seed, same batch
        assert_eq!(decode_experiment(&ctx, 40, 21, 1e-9).unwrap(), dec);
        assert!(matches!(
            DecodeContext::new(&qubit_setup(), &Roles::default(), CodeRates::new(6, 4, 3), 1e-9),
            Err(Error::DimensionBudget(_))
        ));
    }

    #[test]
    fn single_message_is_perfectly_secret() {
        let ctx = DecodeContext::new(&qubit_setup(), &Roles::default(), CodeRates::new(0, 1, 1), 1e-9).unwrap();
        let cb = ctx.sample(1, 0).unwrap();
        assert!(ctx.secrecy(&cb).unwrap() < 1e-7);
    }

    #[test]
    fn expurgation_arithmetic() {
        let rep = expurgation_check(&[0.2; 5], &[0.1; 5], 1.1).unwrap();
        assert_eq!(rep.fraction, 1.0);
        assert!((rep.threshold - 0.047_619_047_619_047_616).abs() < 1e-15);
        assert!(expurgation_check(&[0.1], &[], 1.1).is_err());
    }
}
