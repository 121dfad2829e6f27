//! Pinched hypothesis tests between ρ_UVX, ρ_UV ⊗ ρ_X and ρ_{V−U−X}, their
//! error bounds, and the single-system comparison with the optimal test.

use serde::Serialize;

use crate::cq::{join, CQState};
use crate::divergence::{cmi_objective, divergence_to_product, renyi_cond_mutual_info_unchecked, sandwiched_renyi_op};
use crate::error::{Error, Result};
use crate::pinching::{build_e_chain, EChain, PinchingMap};
use crate::qmat::{c, eigh, hermitian_part, identity, mat_pow, min_eigenvalue, trace_re, CMatrix, RegisterLayout};

/// Eigenvalues of A − B at or above −GEQ_TOL · scale count as nonnegative.
pub const GEQ_TOL: f64 = 1e-12;

/// {A ≥ B}: projector onto the eigenspaces of A − B with nonnegative eigenvalue.
pub fn geq_projector(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let e = eigh(&hermitian_part(&(a - b)))?;
    let scale = e.eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let cut = -GEQ_TOL * scale;
    Ok(e.map(|x| if x >= cut { 1.0 } else { 0.0 }))
}

/// Block-diagonal tests over the classical tuples of (U, V).
#[derive(Debug, Clone, PartialEq)]
pub struct TestPair {
    pub classical: RegisterLayout,
    pub pi1: Vec<CMatrix>,
    pub pi2: Vec<CMatrix>,
    pub pi: Vec<CMatrix>,
    pub m1: f64,
    pub m2: f64,
}

impl TestPair {
    /// Largest violation among Π1Π2 = Π2Π1, Π² = Π, Π ≤ Π1, Π ≤ Π2.
    pub fn defect(&self) -> Result<f64> {
        let mut worst = 0.0f64;
        for k in 0..self.pi.len() {
            let (a, b, p) = (&self.pi1[k], &self.pi2[k], &self.pi[k]);
            worst = worst.max(crate::qmat::commutator_norm(a, b));
            worst = worst.max((p * p - p).norm());
            worst = worst.max(-min_eigenvalue(&hermitian_part(&(a - p)))?);
            worst = worst.max(-min_eigenvalue(&hermitian_part(&(b - p)))?);
        }
        Ok(worst)
    }
}

/// Π1 = {E2(ρ_UVX) ≥ M1 ρ_UV ⊗ ρ_X}, Π2 = {E2(ρ_UVX) ≥ M2 E1(ρ_{V−U−X})}, Π = Π1 Π2,
/// evaluated per (u, v) block. Zero-weight blocks give identity projectors.
pub fn build_tests(s: &CQState, u: &[&str], v: &[&str], x: &[&str], m1: f64, m2: f64, chain: &EChain) -> Result<TestPair> {
    if !(m1 > 0.0 && m2 > 0.0) {
        return Err(Error::InvalidArgument(format!("thresholds must be positive, got {m1}, {m2}")));
    }
    let joint = s.marginal(&join(u, v), x)?;
    let given_u = s.marginal(u, x)?;
    let nv = joint.num_tuples() / given_u.num_tuples();
    let rho_x = given_u.average_state();
    let d = rho_x.nrows();
    let e1_cond: Vec<CMatrix> = given_u.conditionals().iter().map(|r| chain.e1.apply(r)).collect();
    let (mut pi1, mut pi2, mut pi) = (Vec::new(), Vec::new(), Vec::new());
    for k in 0..joint.num_tuples() {
        if joint.pmf()[k] == 0.0 {
            pi1.push(identity(d));
            pi2.push(identity(d));
            pi.push(identity(d));
            continue;
        }
        let ku = k / nv;
        let pinched = chain.e2.maps[ku].apply(joint.conditional(k));
        let a = geq_projector(&pinched, &(&rho_x * c(m1, 0.0)))?;
        let b = geq_projector(&pinched, &(&e1_cond[ku] * c(m2, 0.0)))?;
        pi.push(hermitian_part(&(&a * &b)));
        pi1.push(a);
        pi2.push(b);
    }
    Ok(TestPair { classical: joint.classical().clone(), pi1, pi2, pi, m1, m2 })
}

/// One α of the test-error bound check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestBoundRow {
    pub alpha: f64,
    /// D_{1−α}(ρ_UVX ‖ ρ_UV ⊗ ρ_X)
    pub d_product: f64,
    /// Value used for I_{1−α}[V;X|U]: the smaller of the fixed-point value and
    /// the divergence at σ_{X|u} = E1(ρ_{X|u}).
    pub i_conditional: f64,
    pub i_fixed_point: f64,
    pub fixed_point_converged: bool,
    pub rhs: [f64; 4],
    /// rhs − trace; nonnegative when the inequality holds.
    pub slack: [f64; 4],
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestBoundReport {
    pub m1: f64,
    pub m2: f64,
    pub v2: usize,
    /// Tr[Π1 (ρ_UV⊗ρ_X)], Tr[Π2 ρ_{V−U−X}], Tr[(I−Π1) ρ_UVX], Tr[(I−Π2) ρ_UVX].
    pub traces: [f64; 4],
    pub test_defect: f64,
    pub rows: Vec<TestBoundRow>,
    pub all_hold: bool,
}

pub const TEST_BOUND_SLACK: f64 = -1e-8;

#[allow(clippy::too_many_arguments)]
pub fn test_bounds_check(
    s: &CQState,
    u: &[&str],
    v: &[&str],
    x: &[&str],
    m1: f64,
    m2: f64,
    alphas: &[f64],
    cluster_tol: f64,
) -> Result<TestBoundReport> {
    let chain = build_e_chain(s, u, x, cluster_tol)?;
    let tests = build_tests(s, u, v, x, m1, m2, &chain)?;
    let joint = s.marginal(&join(u, v), x)?;
    let given_u = s.marginal(u, x)?;
    let nv = joint.num_tuples() / given_u.num_tuples();
    let rho_x = given_u.average_state();
    let mut traces = [0.0; 4];
    for k in 0..joint.num_tuples() {
        let p = joint.pmf()[k];
        if p == 0.0 {
            continue;
        }
        let r = joint.conditional(k);
        let ru = given_u.conditional(k / nv);
        traces[0] += p * trace_re(&(&tests.pi1[k] * &rho_x));
        traces[1] += p * trace_re(&(&tests.pi2[k] * ru));
        traces[2] += p * (1.0 - trace_re(&(&tests.pi1[k] * r)));
        traces[3] += p * (1.0 - trace_re(&(&tests.pi2[k] * r)));
    }
    let e1_cond: Vec<CMatrix> = given_u.conditionals().iter().map(|r| chain.e1.apply(r)).collect();
    let v2 = chain.v2 as f64;
    let mut rows = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidArgument(format!("α = {alpha} outside (0,1)")));
        }
        let t = 1.0 - alpha;
        let d_product = divergence_to_product(s, &join(u, v), x, t)?;
        let fp = renyi_cond_mutual_info_unchecked(s, v, x, u, t)?;
        let at_e1 = cmi_objective(s, v, x, u, &e1_cond, t)?;
        let i_conditional = fp.value.min(at_e1);
        let va = v2.powf(alpha);
        let rhs = [
            va * m1.powf(-(1.0 - alpha)) * (-alpha * d_product).exp2(),
            va * m2.powf(-(1.0 - alpha)) * (-alpha * i_conditional).exp2(),
            va * m1.powf(alpha) * (-alpha * d_product).exp2(),
            va * m2.powf(alpha) * (-alpha * i_conditional).exp2(),
        ];
        let slack = [rhs[0] - traces[0], rhs[1] - traces[1], rhs[2] - traces[2], rhs[3] - traces[3]];
        let holds = slack.iter().all(|&x| x >= TEST_BOUND_SLACK);
        rows.push(TestBoundRow {
            alpha,
            d_product,
            i_conditional,
            i_fixed_point: fp.value,
            fixed_point_converged: fp.converged,
            rhs,
            slack,
            holds,
        });
    }
    let all_hold = rows.iter().all(|r| r.holds);
    Ok(TestBoundReport { m1, m2, v2: chain.v2, traces, test_defect: tests.defect()?, rows, all_hold })
}

/// Petz divergence D_{1−α}(ρ‖σ) = −(1/α) log Tr ρ^{1−α} σ^α.
pub fn petz_renyi_minus(rho: &CMatrix, sigma: &CMatrix, alpha: f64) -> Result<f64> {
    let q = trace_re(&(mat_pow(rho, 1.0 - alpha)? * mat_pow(sigma, alpha)?));
    Ok(if q > 0.0 { -q.log2() / alpha } else { f64::INFINITY })
}

/// D̂_{1−α}(ρ‖σ) = −(1/α) log Tr ρ σ^{α/2} ρ^{−α} σ^{α/2}, with ρ^{−α} on the
/// support of ρ. Its monotonicity under channels is not established, so it is
/// only reported for comparison.
pub fn hat_renyi_minus(rho: &CMatrix, sigma: &CMatrix, alpha: f64) -> Result<f64> {
    let sh = mat_pow(sigma, alpha / 2.0)?;
    let q = trace_re(&(rho * &sh * mat_pow(rho, -alpha)? * &sh));
    Ok(if q > 0.0 { -q.log2() / alpha } else { f64::INFINITY })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingleSystemComparison {
    pub m: f64,
    pub alpha: f64,
    pub v_sigma: usize,
    /// (Tr Π_σ σ, Tr (I−Π_σ) ρ) for Π_σ = {E_σ(ρ) ≥ Mσ}.
    pub pinched_errors: (f64, f64),
    /// (Tr Π σ, Tr (I−Π) ρ) for Π = {ρ ≥ Mσ}.
    pub optimal_errors: (f64, f64),
    pub d_sandwiched: f64,
    pub d_petz: f64,
    pub d_hat: f64,
    /// Right-hand sides (type I, type II) with the sandwiched, Petz and D̂ quantities.
    pub pinched_bounds: (f64, f64),
    pub optimal_bounds: (f64, f64),
    pub hat_bounds: (f64, f64),
    pub petz_dominates: bool,
    pub warning: &'static str,
}

pub fn single_system_comparison(rho: &CMatrix, sigma: &CMatrix, m: f64, alpha: f64, cluster_tol: f64) -> Result<SingleSystemComparison> {
    if !(alpha > 0.0 && alpha < 1.0) || !(m > 0.0) {
        return Err(Error::InvalidArgument(format!("need α in (0,1) and M > 0, got {alpha}, {m}")));
    }
    let e = PinchingMap::from_operator(sigma, cluster_tol)?;
    let ms = sigma * c(m, 0.0);
    let pi_s = geq_projector(&e.apply(rho), &ms)?;
    let pi = geq_projector(rho, &ms)?;
    let d_sandwiched = sandwiched_renyi_op(rho, sigma, 1.0 - alpha)?;
    let d_petz = petz_renyi_minus(rho, sigma, alpha)?;
    let d_hat = hat_renyi_minus(rho, sigma, alpha)?;
    let v = e.len() as f64;
    let bounds = |pre: f64, d: f64| {
        (pre * m.powf(-(1.0 - alpha)) * (-alpha * d).exp2(), pre * m.powf(alpha) * (-alpha * d).exp2())
    };
    Ok(SingleSystemComparison {
        m,
        alpha,
        v_sigma: e.len(),
        pinched_errors: (trace_re(&(&pi_s * sigma)), 1.0 - trace_re(&(&pi_s * rho))),
        optimal_errors: (trace_re(&(&pi * sigma)), 1.0 - trace_re(&(&pi * rho))),
        d_sandwiched,
        d_petz,
        d_hat,
        pinched_bounds: bounds(v.powf(alpha), d_sandwiched),
        optimal_bounds: bounds(1.0, d_petz),
        hat_bounds: bounds(v.powf(alpha), d_hat),
        petz_dominates: d_petz >= d_sandwiched - 1e-9,
        warning: "D-hat is shown for comparison only; its data-processing inequality is not established",
    })
}
