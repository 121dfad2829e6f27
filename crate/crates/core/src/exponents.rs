//! Single-shot error and secrecy bounds of the superposition wiretap code,
//! their asymptotic exponents, and the choice of α.

use rayon::prelude::*;
use serde::Serialize;

use crate::cq::{join, refs, CQState, Roles};
use crate::divergence::{divergence_to_markov, divergence_to_product, renyi_cond_mutual_info_unchecked};
use crate::error::{Error, Result};
use crate::pinching::PinchingConstants;
use crate::rates::RateAllocation;

/// The five Rényi quantities entering the bounds at one α.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RenyiQuantities {
    pub alpha: f64,
    /// D_{1−α}(ρ_UVB ‖ ρ_UV ⊗ ρ_B)
    pub d_uvb: f64,
    /// I_{1−α}[V;B|U]
    pub i_vb_given_u: f64,
    pub i_converged: bool,
    /// D_{1+α}(ρ_US ‖ ρ_U ⊗ ρ_S)
    pub d_us: f64,
    /// D_{1+α}(ρ_UVS ‖ ρ_UV ⊗ ρ_S)
    pub d_uvs: f64,
    /// D_{1+α}(ρ_UVE ‖ ρ_{V−U−E})
    pub d_uve: f64,
    /// Set when 1 − α < 1/2, where the I_{1−α} minimizer has no optimality guarantee.
    pub order_below_half: bool,
}

pub fn renyi_quantities(s: &CQState, roles: &Roles, alpha: f64) -> Result<RenyiQuantities> {
    check_alpha(alpha)?;
    let (u, v, b, e, sr) = (refs(&roles.u), refs(&roles.v), refs(&roles.b), refs(&roles.e), refs(&roles.s));
    let uv = join(&u, &v);
    let i = renyi_cond_mutual_info_unchecked(s, &v, &b, &u, 1.0 - alpha)?;
    if !i.converged {
        log::warn!("I_{{1-α}} fixed point did not converge at α = {alpha} (residual {:.3e})", i.residual);
    }
    Ok(RenyiQuantities {
        alpha,
        d_uvb: divergence_to_product(s, &uv, &b, 1.0 - alpha)?,
        i_vb_given_u: i.value,
        i_converged: i.converged,
        d_us: divergence_to_product(s, &u, &sr, 1.0 + alpha)?,
        d_uvs: divergence_to_product(s, &uv, &sr, 1.0 + alpha)?,
        d_uve: divergence_to_markov(s, &v, &u, &e, 1.0 + alpha)?,
        order_below_half: 1.0 - alpha < 0.5,
    })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("α = {alpha} outside (0,1)")))
    }
}

/// Numerical coefficients of the two bound families.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coefficients {
    pub average_error: (f64, f64),
    pub average_secrecy: f64,
    pub expurgated_error: (f64, f64),
    pub expurgated_secrecy: f64,
    pub beta: f64,
    /// 42 = 20·(1+β)
    pub error_scaling_consistent: bool,
    pub note: &'static str,
}

pub const BETA: f64 = 1.1;

pub fn coefficients() -> Coefficients {
    Coefficients {
        average_error: (20.0, 2.0),
        average_secrecy: 8.0,
        expurgated_error: (42.0, 5.0),
        expurgated_secrecy: 20.0,
        beta: BETA,
        error_scaling_consistent: (42.0f64 - 20.0 * (1.0 + BETA)).abs() < 1e-12,
        note: "the S-term coefficient 5 of the expurgated error bound is used as stated; (1+β)·2 = 4.2",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentReport {
    pub alpha: f64,
    pub rates: RateAllocation,
    pub constants: PinchingConstants,
    pub quantities: RenyiQuantities,
    /// v2^α 2^{α(R+R1+r−D_{1−α})}, v2^α 2^{α(R+R1−I_{1−α})},
    /// (v3/2^r)^α 2^{αD_{1+α}(US)}, (v4/2^{R1+r})^α 2^{αD_{1+α}(UVS)}
    pub error_terms: [f64; 4],
    /// The two S-terms followed by v5^α 2^{−αR1} 2^{αD_{1+α}(UVE‖V−U−E)}
    pub secrecy_terms: [f64; 3],
    /// Expurgated-code bound on the error probability.
    pub error_bound: f64,
    /// Expurgated-code bound on the squared purified distance.
    pub secrecy_bound_sq: f64,
    /// Random-code average error bound.
    pub average_error_bound: f64,
    /// Random-code bound on E[P²].
    pub average_secrecy_bound_sq: f64,
    pub coefficients: Coefficients,
}

fn terms(q: &RenyiQuantities, c: &PinchingConstants, a: &RateAllocation) -> ([f64; 4], [f64; 3]) {
    let al = q.alpha;
    let t1 = c.v2.powf(al) * (al * (a.big_r + a.r1 + a.r - q.d_uvb)).exp2();
    let t2 = c.v2.powf(al) * (al * (a.big_r + a.r1 - q.i_vb_given_u)).exp2();
    let t3 = (c.v3 / a.r.exp2()).powf(al) * (al * q.d_us).exp2();
    let t4 = (c.v4 / (a.r1 + a.r).exp2()).powf(al) * (al * q.d_uvs).exp2();
    let t5 = c.v5.powf(al) * (-al * a.r1).exp2() * (al * q.d_uve).exp2();
    ([t1, t2, t3, t4], [t3, t4, t5])
}

pub fn single_shot_bounds_with(
    s: &CQState,
    roles: &Roles,
    alloc: &RateAllocation,
    alpha: f64,
    constants: PinchingConstants,
) -> Result<ExponentReport> {
    let q = renyi_quantities(s, roles, alpha)?;
    Ok(assemble(q, constants, *alloc))
}

pub fn single_shot_bounds(s: &CQState, roles: &Roles, alloc: &RateAllocation, alpha: f64, cluster_tol: f64) -> Result<ExponentReport> {
    let c = PinchingConstants::measure(s, roles, cluster_tol)?;
    single_shot_bounds_with(s, roles, alloc, alpha, c)
}

/// Bounds from precomputed quantities.
pub fn assemble(q: RenyiQuantities, constants: PinchingConstants, alloc: RateAllocation) -> ExponentReport {
    let (et, st) = terms(&q, &constants, &alloc);
    let k = coefficients();
    let a = q.alpha;
    let clip = |x: f64| if x.is_nan() { f64::INFINITY } else { x.max(0.0) };
    ExponentReport {
        alpha: a,
        rates: alloc,
        constants,
        quantities: q,
        error_terms: et,
        secrecy_terms: st,
        error_bound: clip(k.expurgated_error.0 * (et[0] + et[1]) + k.expurgated_error.1 / a * (et[2] + et[3])),
        secrecy_bound_sq: clip(k.expurgated_secrecy * ((st[0] + st[1]) / a + st[2] / a)),
        average_error_bound: clip(k.average_error.0 * (et[0] + et[1]) + k.average_error.1 / a * (et[2] + et[3])),
        average_secrecy_bound_sq: clip(k.average_secrecy / a * (st[0] + st[1]) + k.average_secrecy / a * st[2]),
        coefficients: k,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticExponents {
    pub alpha: f64,
    pub error_exp: f64,
    pub secrecy_exp: f64,
    pub error_terms: [f64; 4],
    pub secrecy_terms: [f64; 3],
    pub order_below_half: bool,
}

pub fn exponents_from(q: &RenyiQuantities, a: &RateAllocation) -> AsymptoticExponents {
    let al = q.alpha;
    let e = [
        al * (q.d_uvb - (a.big_r + a.r1 + a.r)),
        al * (q.i_vb_given_u - (a.big_r + a.r1)),
        al * (a.r - q.d_us),
        al * (a.r1 + a.r - q.d_uvs),
    ];
    let s = [e[2], e[3], al * (a.r1 - q.d_uve)];
    AsymptoticExponents {
        alpha: al,
        error_exp: e.iter().copied().fold(f64::INFINITY, f64::min),
        secrecy_exp: s.iter().copied().fold(f64::INFINITY, f64::min),
        error_terms: e,
        secrecy_terms: s,
        order_below_half: q.order_below_half,
    }
}

pub fn asymptotic_exponents(s: &CQState, roles: &Roles, alloc: &RateAllocation, alpha: f64) -> Result<AsymptoticExponents> {
    Ok(exponents_from(&renyi_quantities(s, roles, alpha)?, alloc))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    Error,
    Secrecy,
    MinOfBoth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaChoice {
    pub alpha: f64,
    pub value: f64,
    pub grid_alpha: f64,
    pub grid_value: f64,
}

pub const ALPHA_GRID_POINTS: usize = 64;

/// Maximizes `f` over (0,1): a 64-point scan at (k+½)/64 followed by
/// golden-section search on the bracket around the best grid point. The result
/// never falls below the grid maximum.
pub fn maximize_over_alpha(f: impl Fn(f64) -> Result<f64> + Sync) -> Result<AlphaChoice> {
    let n = ALPHA_GRID_POINTS;
    let grid: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5) / n as f64).collect();
    let vals: Vec<f64> = grid.par_iter().map(|&a| f(a)).collect::<Result<_>>()?;
    let mut best = 0;
    for k in 1..n {
        if vals[k] > vals[best] {
            best = k;
        }
    }
    let lo0 = if best == 0 { 1e-9 } else { grid[best - 1] };
    let hi0 = if best == n - 1 { 1.0 - 1e-9 } else { grid[best + 1] };
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (lo0, hi0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    while hi - lo > 1e-10 {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2)?;
        }
    }
    let (xr, fr) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    let (alpha, value) = if fr > vals[best] { (xr, fr) } else { (grid[best], vals[best]) };
    Ok(AlphaChoice { alpha, value, grid_alpha: grid[best], grid_value: vals[best] })
}

/// Best α for the chosen exponent. Exponent lower bounds are trivially 0, so
/// the reported value is clipped at 0.
pub fn optimize_alpha(s: &CQState, roles: &Roles, alloc: &RateAllocation, objective: Objective) -> Result<AlphaChoice> {
    let pick = |e: AsymptoticExponents| match objective {
        Objective::Error => e.error_exp,
        Objective::Secrecy => e.secrecy_exp,
        Objective::MinOfBoth => e.error_exp.min(e.secrecy_exp),
    };
    let mut c = maximize_over_alpha(|a| Ok(pick(asymptotic_exponents(s, roles, alloc, a)?)))?;
    if c.value <= 0.0 {
        c.value = 0.0;
        c.grid_value = c.grid_value.max(0.0);
    }
    Ok(c)
}
