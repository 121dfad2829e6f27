//! Sandwiched Rényi divergences, Rényi (conditional) mutual information and
//! the von Neumann information quantities of a cq state.

use serde::Serialize;

use crate::cq::{join, refs, CQState, Roles};
use crate::error::{Error, Result};
use crate::qmat::{
    c, eigh, hermitian_part, pow_from_eig, trace_norm, trace_re, CMatrix, DensityMatrix,
};

/// Trace of ρ outside supp σ above which D_t (t > 1) is infinite.
const SUPPORT_LEAK_TOL: f64 = 1e-11;
pub const MAX_ITERATIONS: usize = 1000;
const VALUE_TOL: f64 = 1e-10;
const RESIDUAL_TOL: f64 = 1e-7;

/// Rényi order t > 0, t ≠ 1; α = t − 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RenyiOrder {
    t: f64,
}

impl RenyiOrder {
    pub fn new(t: f64) -> Result<Self> {
        if !(t.is_finite() && t > 0.0) || t == 1.0 {
            return Err(Error::UnsupportedOrder(t));
        }
        Ok(Self { t })
    }

    /// Order 1 + α.
    pub fn plus(alpha: f64) -> Result<Self> {
        Self::new(1.0 + alpha)
    }

    /// Order 1 − α.
    pub fn minus(alpha: f64) -> Result<Self> {
        Self::new(1.0 - alpha)
    }

    pub fn t(self) -> f64 {
        self.t
    }

    pub fn alpha(self) -> f64 {
        self.t - 1.0
    }
}

/// Q_t(ρ‖σ) = Tr[(σ^γ ρ σ^γ)^t], γ = (1−t)/(2t), with σ-powers on the support.
/// Returns +∞ for t > 1 when ρ leaves the support of σ.
pub fn sandwiched_q(rho: &CMatrix, sigma: &CMatrix, t: f64) -> Result<f64> {
    let es = eigh(sigma)?;
    sandwiched_q_with(rho, &es, t)
}

fn sandwiched_q_with(rho: &CMatrix, sigma: &crate::qmat::HermitianEig, t: f64) -> Result<f64> {
    if t > 1.0 {
        let supp = pow_from_eig(sigma, 0.0);
        let inside = trace_re(&(&supp * rho));
        if trace_re(rho) - inside > SUPPORT_LEAK_TOL {
            return Ok(f64::INFINITY);
        }
    }
    let g = (1.0 - t) / (2.0 * t);
    // singular values of ρ^{1/2} σ^γ keep small eigenvalues of the sandwich accurate
    let s = pow_from_eig(sigma, g);
    let root = eigh(&hermitian_part(rho))?.map(|x| x.max(0.0).sqrt());
    let sv = (root * s).singular_values();
    Ok(sv.iter().filter(|&&x| x > 0.0).map(|&x| x.powf(2.0 * t)).sum())
}

fn q_to_divergence(q: f64, t: f64) -> f64 {
    if q.is_infinite() {
        return f64::INFINITY;
    }
    if q <= 0.0 {
        // only reachable for t < 1 (orthogonal supports)
        return f64::INFINITY;
    }
    q.log2() / (t - 1.0)
}

/// D_t(ρ‖σ) of raw matrices, in bits.
pub fn sandwiched_renyi_op(rho: &CMatrix, sigma: &CMatrix, t: f64) -> Result<f64> {
    let order = RenyiOrder::new(t)?;
    if rho.shape() != sigma.shape() {
        return Err(Error::LayoutMismatch("ρ and σ differ in dimension".into()));
    }
    Ok(q_to_divergence(sandwiched_q(rho, sigma, order.t())?, order.t()))
}

/// Sandwiched Rényi divergence D_t(ρ‖σ) in bits.
pub fn sandwiched_renyi(rho: &DensityMatrix, sigma: &DensityMatrix, t: f64) -> Result<f64> {
    if rho.layout() != sigma.layout() {
        return Err(Error::LayoutMismatch(format!(
            "{:?} vs {:?}",
            rho.layout().names(),
            sigma.layout().names()
        )));
    }
    sandwiched_renyi_op(rho.matrix(), sigma.matrix(), t)
}

/// D_t between two cq states with the same classical alphabet, computed block
/// by block: Q = Σ_x p_x^t q_x^{1−t} Q_t(ρ_x‖σ_x).
pub fn cq_sandwiched_renyi(rho: &CQState, sigma: &CQState, t: f64) -> Result<f64> {
    let order = RenyiOrder::new(t)?;
    Ok(q_to_divergence(cq_q(rho, sigma, order.t())?, order.t()))
}

pub(crate) fn cq_q(rho: &CQState, sigma: &CQState, t: f64) -> Result<f64> {
    if rho.classical().dims() != sigma.classical().dims()
        || rho.quantum().total_dim() != sigma.quantum().total_dim()
    {
        return Err(Error::LayoutMismatch("cq states have different shapes".into()));
    }
    let mut q = 0.0;
    for k in 0..rho.num_tuples() {
        let (p, w) = (rho.pmf()[k], sigma.pmf()[k]);
        if p == 0.0 {
            continue;
        }
        if w == 0.0 {
            if t > 1.0 {
                return Ok(f64::INFINITY);
            }
            continue;
        }
        let qk = sandwiched_q(rho.conditional(k), sigma.conditional(k), t)?;
        if qk.is_infinite() {
            return Ok(f64::INFINITY);
        }
        q += p.powf(t) * w.powf(1.0 - t) * qk;
    }
    Ok(q)
}

/// ρ_C ⊗ ρ_X as a cq state with the classical alphabet of `cls`.
pub fn product_of_marginals(s: &CQState, cls: &[&str], x: &[&str]) -> Result<CQState> {
    let joint = s.marginal(cls, x)?;
    let avg = joint.average_state();
    joint.map_conditionals(joint.quantum().clone(), |_| Ok(avg.clone()))
}

/// D_t(ρ_{CX} ‖ ρ_C ⊗ ρ_X).
pub fn divergence_to_product(s: &CQState, cls: &[&str], x: &[&str], t: f64) -> Result<f64> {
    let joint = s.marginal(cls, x)?;
    cq_sandwiched_renyi(&joint, &product_of_marginals(s, cls, x)?, t)
}

/// D_t(ρ_{UVX} ‖ ρ_{V−U−X}).
pub fn divergence_to_markov(s: &CQState, v: &[&str], u: &[&str], x: &[&str], t: f64) -> Result<f64> {
    let joint = s.marginal(&join(u, v), x)?;
    cq_sandwiched_renyi(&joint, &s.markov_cq(v, u, x)?, t)
}

/// Outcome of the minimization over σ in a Rényi (conditional) mutual information.
#[derive(Debug, Clone, PartialEq)]
pub struct CMIResult {
    pub value: f64,
    /// One σ_{X|u} per value of the conditioning register (a single entry when
    /// there is none).
    pub minimizer: Vec<DensityMatrix>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

struct FixedPoint {
    sigma: CMatrix,
    q: f64,
    iterations: usize,
    residual: f64,
    converged: bool,
}

fn normalized(m: CMatrix) -> CMatrix {
    let t = trace_re(&m);
    hermitian_part(&m) / c(t, 0.0)
}

fn weighted_q(weights: &[f64], states: &[&CMatrix], sigma: &CMatrix, t: f64) -> Result<f64> {
    let es = eigh(sigma)?;
    let mut q = 0.0;
    for (w, r) in weights.iter().zip(states) {
        if *w > 0.0 {
            q += w * sandwiched_q_with(r, &es, t)?;
        }
    }
    Ok(q)
}

/// Optimizes Σ_x w_x Q_t(ρ_x‖σ) over states σ (minimum for t > 1, maximum for
/// t < 1) by the fixed-point map σ ↦ Σ_x w_x (σ^γ ρ_x σ^γ)^t / Tr.
fn optimize_sigma(weights: &[f64], states: &[&CMatrix], t: f64) -> Result<FixedPoint> {
    let d = states[0].nrows();
    let mut mix = CMatrix::zeros(d, d);
    for (w, r) in weights.iter().zip(states) {
        mix += *r * c(*w, 0.0);
    }
    let mut sigma = normalized(mix);
    let better = |new: f64, old: f64| {
        let slack = 1e-15 * old.abs();
        if t > 1.0 {
            new <= old + slack
        } else {
            new >= old - slack
        }
    };
    let mut q = weighted_q(weights, states, &sigma, t)?;
    let g = (1.0 - t) / (2.0 * t);
    let mut residual = f64::INFINITY;
    for it in 1..=MAX_ITERATIONS {
        let es = eigh(&sigma)?;
        let s = pow_from_eig(&es, g);
        let mut next = CMatrix::zeros(d, d);
        for (w, r) in weights.iter().zip(states) {
            if *w > 0.0 {
                let m = hermitian_part(&(&s * *r * &s));
                next += crate::qmat::mat_pow(&m, t)? * c(*w, 0.0);
            }
        }
        let next = normalized(next);
        residual = trace_norm(&(&next - &sigma));
        if residual <= 1e-13 {
            return Ok(FixedPoint { sigma, q, iterations: it, residual, converged: true });
        }
        let mut lam = (1.0 / t).min(1.0);
        let (cand, qc) = loop {
            let cand = &sigma * c(1.0 - lam, 0.0) + &next * c(lam, 0.0);
            let qc = weighted_q(weights, states, &cand, t)?;
            if better(qc, q) {
                break (Some(cand), qc);
            }
            lam *= 0.5;
            if lam < 1e-6 {
                break (None, q);
            }
        };
        let Some(cand) = cand else {
            let converged = residual <= RESIDUAL_TOL;
            return Ok(FixedPoint { sigma, q, iterations: it, residual, converged });
        };
        let dval = ((qc.log2() - q.log2()) / (t - 1.0)).abs();
        sigma = cand;
        q = qc;
        if dval <= VALUE_TOL && residual <= RESIDUAL_TOL {
            return Ok(FixedPoint { sigma, q, iterations: it, residual, converged: true });
        }
    }
    Ok(FixedPoint { sigma, q, iterations: MAX_ITERATIONS, residual, converged: false })
}

/// I_t(C;X) = min_σ D_t(ρ_{CX}‖ρ_C ⊗ σ_X), by fixed-point iteration. The
/// iteration is only known to find the optimum for t >= 1/2; results for
/// smaller orders carry `converged` as computed but no optimality guarantee.
pub fn renyi_mutual_info(s: &CQState, cls: &[&str], x: &[&str], t: f64) -> Result<CMIResult> {
    let order = RenyiOrder::new(t)?;
    let joint = s.marginal(cls, x)?;
    let states: Vec<&CMatrix> = joint.conditionals().iter().collect();
    let fp = optimize_sigma(joint.pmf(), &states, order.t())?;
    Ok(CMIResult {
        value: q_to_divergence(fp.q, order.t()),
        minimizer: vec![DensityMatrix::new_unchecked(joint.quantum().clone(), fp.sigma)],
        iterations: fp.iterations,
        residual: fp.residual,
        converged: fp.converged,
    })
}

/// I_t(V;X|U) = min over σ_{X|u} of D_t(ρ_{UVX} ‖ Σ_u p(u)|u⟩⟨u| ⊗ ρ_{V|u} ⊗ σ_{X|u}).
/// Requires t >= 1/2.
pub fn renyi_cond_mutual_info(s: &CQState, v: &[&str], x: &[&str], u: &[&str], t: f64) -> Result<CMIResult> {
    if t < 0.5 {
        return Err(Error::UnsupportedOrder(t));
    }
    renyi_cond_mutual_info_unchecked(s, v, x, u, t)
}

/// As [`renyi_cond_mutual_info`] without the order restriction. Below t = 1/2
/// the returned value is that of a feasible σ, hence an upper bound on the
/// minimum.
pub fn renyi_cond_mutual_info_unchecked(
    s: &CQState,
    v: &[&str],
    x: &[&str],
    u: &[&str],
    t: f64,
) -> Result<CMIResult> {
    let order = RenyiOrder::new(t)?;
    let t = order.t();
    let joint = s.marginal(&join(u, v), x)?;
    let nu = s.marginal(u, &[])?;
    let nv = joint.num_tuples() / nu.num_tuples();
    let mut q_total = 0.0;
    let mut minimizer = Vec::with_capacity(nu.num_tuples());
    let (mut iterations, mut residual, mut converged) = (0, 0.0f64, true);
    for ku in 0..nu.num_tuples() {
        let pu = nu.pmf()[ku];
        let rows = ku * nv..(ku + 1) * nv;
        let states: Vec<&CMatrix> = rows.clone().map(|k| joint.conditional(k)).collect();
        if pu == 0.0 {
            let d = joint.quantum().total_dim();
            minimizer.push(DensityMatrix::maximally_mixed(joint.quantum().clone()));
            debug_assert_eq!(states[0].nrows(), d);
            continue;
        }
        let w: Vec<f64> = rows.map(|k| joint.pmf()[k] / pu).collect();
        let fp = optimize_sigma(&w, &states, t)?;
        q_total += pu * fp.q;
        iterations = iterations.max(fp.iterations);
        residual = residual.max(fp.residual);
        converged &= fp.converged;
        minimizer.push(DensityMatrix::new_unchecked(joint.quantum().clone(), fp.sigma));
    }
    Ok(CMIResult { value: q_to_divergence(q_total, t), minimizer, iterations, residual, converged })
}

/// D_t(ρ_{UVX} ‖ Σ_u p(u)|u⟩⟨u| ⊗ ρ_{V|u} ⊗ σ_{X|u}) for a given family σ_{X|u}.
pub fn cmi_objective(s: &CQState, v: &[&str], x: &[&str], u: &[&str], sigma: &[CMatrix], t: f64) -> Result<f64> {
    let joint = s.marginal(&join(u, v), x)?;
    let nu = s.marginal(u, &[])?.num_tuples();
    if sigma.len() != nu {
        return Err(Error::InvalidArgument(format!("{} σ-states for {nu} values of U", sigma.len())));
    }
    let nv = joint.num_tuples() / nu;
    let conds: Vec<CMatrix> = (0..joint.num_tuples()).map(|k| sigma[k / nv].clone()).collect();
    let reference = CQState::from_parts(joint.classical().clone(), joint.pmf().to_vec(), conds, joint.quantum().clone());
    cq_sandwiched_renyi(&joint, &reference, t)
}

/// The von Neumann mutual informations entering the rate formulas, in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VonNeumannTable {
    pub i_v_b_given_u: f64,
    pub i_v_e_given_u: f64,
    pub i_v_s_given_u: f64,
    pub i_uv_b: f64,
    pub i_uv_s: f64,
    pub i_u_b: f64,
    pub i_u_s: f64,
}

pub fn von_neumann_quantities(s: &CQState, roles: &Roles) -> Result<VonNeumannTable> {
    let (u, v, b, e, sr) = (refs(&roles.u), refs(&roles.v), refs(&roles.b), refs(&roles.e), refs(&roles.s));
    let uv = join(&u, &v);
    Ok(VonNeumannTable {
        i_v_b_given_u: s.mutual_information(&v, &b, &u)?,
        i_v_e_given_u: s.mutual_information(&v, &e, &u)?,
        i_v_s_given_u: s.mutual_information(&v, &sr, &u)?,
        i_uv_b: s.mutual_information(&uv, &b, &[])?,
        i_uv_s: s.mutual_information(&uv, &sr, &[])?,
        i_u_b: s.mutual_information(&u, &b, &[])?,
        i_u_s: s.mutual_information(&u, &sr, &[])?,
    })
}
