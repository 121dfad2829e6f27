//! Achievable-rate expressions, rate allocation, the erasure-extension argument
//! relating the two rate expressions, and single-letter reductions.

use rayon::prelude::*;
use serde::Serialize;

use crate::cq::{power_names, solve_erasure_epsilon, CQState, QuantumChannel, Roles, SideInfoSetup};
use crate::divergence::{von_neumann_quantities, VonNeumannTable};
use crate::error::{Error, Result};
use crate::qmat::{diag, RegisterLayout};

/// Tolerance on I[U;B] − I[U;S] ≥ 0.
pub const S2_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatePoint {
    pub r_a: f64,
    pub r_alt: f64,
    /// I[V;B|U] − I[V;E|U], I[UV;B] − I[UV;S], I[UV;B] − I[U;S] − I[V;E|U]
    pub components: [f64; 3],
    pub alt_components: [f64; 2],
    pub s2_member: bool,
    pub table: VonNeumannTable,
}

impl RatePoint {
    pub fn from_table(q: VonNeumannTable) -> Self {
        let c0 = q.i_v_b_given_u - q.i_v_e_given_u;
        let c1 = q.i_uv_b - q.i_uv_s;
        let c2 = q.i_uv_b - q.i_u_s - q.i_v_e_given_u;
        RatePoint {
            r_a: c0.min(c1).min(c2),
            r_alt: c0.min(c1),
            components: [c0, c1, c2],
            alt_components: [c0, c1],
            s2_member: q.i_u_b - q.i_u_s >= -S2_TOL,
            table: q,
        }
    }
}

pub fn rate_point(s: &CQState, roles: &Roles) -> Result<RatePoint> {
    Ok(RatePoint::from_table(von_neumann_quantities(s, roles)?))
}

/// Code rates (R, R1, r) in bits. `slack` holds the ε's used by
/// [`allocate_rates`], or zeros for explicitly chosen rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateAllocation {
    #[serde(rename = "R")]
    pub big_r: f64,
    #[serde(rename = "R1")]
    pub r1: f64,
    pub r: f64,
    pub slack: (f64, f64, f64),
}

impl RateAllocation {
    pub fn explicit(big_r: f64, r1: f64, r: f64) -> Result<Self> {
        if [big_r, r1, r].iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidArgument(format!("rates must be finite and nonnegative, got ({big_r}, {r1}, {r})")));
        }
        Ok(RateAllocation { big_r, r1, r, slack: (0.0, 0.0, 0.0) })
    }

    /// Margins of the five strict constraints, positive when satisfied:
    /// I[UV;B] − (R+R1+r), I[V;B|U] − (R+R1), R1+r − I[UV;S], r − I[U;S], R1 − I[V;E|U].
    pub fn constraint_margins(&self, q: &VonNeumannTable) -> [f64; 5] {
        [
            q.i_uv_b - (self.big_r + self.r1 + self.r),
            q.i_v_b_given_u - (self.big_r + self.r1),
            self.r1 + self.r - q.i_uv_s,
            self.r - q.i_u_s,
            self.r1 - q.i_v_e_given_u,
        ]
    }
}

pub fn allocate_rates(q: &VonNeumannTable, eps1: f64, eps2: f64, eps3: f64) -> Result<RateAllocation> {
    if !(eps1 > 0.0 && eps2 > 0.0 && eps3 > 0.0) {
        return Err(Error::InvalidArgument(format!("slacks must be positive, got ({eps1}, {eps2}, {eps3})")));
    }
    let r1 = q.i_v_e_given_u + eps1;
    let r = q.i_u_s.max(q.i_uv_s - q.i_v_e_given_u) + eps2;
    let big_r = (q.i_uv_b - (r1 + r)).min(q.i_v_b_given_u - r1) - eps3;
    if big_r <= 0.0 {
        return Err(Error::InfeasibleRates(format!("R = {big_r:.6e} with R1 = {r1:.6e}, r = {r:.6e}")));
    }
    let alloc = RateAllocation { big_r, r1, r, slack: (eps1, eps2, eps3) };
    let margins = alloc.constraint_margins(q);
    if let Some(k) = margins.iter().position(|&m| m <= 0.0) {
        return Err(Error::InfeasibleRates(format!("constraint {} has margin {:.3e}", k + 1, margins[k])));
    }
    Ok(alloc)
}

/// One sampled input state of a rate family.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilySample {
    pub params: Vec<f64>,
    /// State over (U, V; B, E, S) as produced by [`SideInfoSetup::rate_state`].
    pub state: CQState,
}

/// Binary Gel'fand-Pinsker wiretap family with classical channel
/// B = A ⊕ S ⊕ N_B, E = A ⊕ N_E and encoder U = S ⊕ Bern(a), V = U ⊕ Bern(b),
/// A = V ⊕ S. The side information S ~ Bern(p_s) is fixed by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryGpWiretap {
    pub p_s: f64,
    pub noise_b: f64,
    pub noise_e: f64,
}

impl BinaryGpWiretap {
    pub fn channel(&self) -> Result<QuantumChannel> {
        let input = RegisterLayout::new([("A".to_string(), 2), ("S".to_string(), 2)])?;
        let output = RegisterLayout::new([("B".to_string(), 2), ("E".to_string(), 2)])?;
        let mut w = vec![vec![0.0; 4]; 4];
        for a in 0..2 {
            for s in 0..2 {
                for nb in 0..2 {
                    for ne in 0..2 {
                        let pb = if nb == 1 { self.noise_b } else { 1.0 - self.noise_b };
                        let pe = if ne == 1 { self.noise_e } else { 1.0 - self.noise_e };
                        let (b, e) = (a ^ s ^ nb, a ^ ne);
                        w[a * 2 + s][b * 2 + e] += pb * pe;
                    }
                }
            }
        }
        QuantumChannel::classical(&w, input, output)
    }

    /// Encoder state ρ_{UVAS} at parameters (a, b).
    pub fn encoder_state(&self, a: f64, b: f64) -> Result<CQState> {
        let bern = |x: usize, p: f64| if x == 1 { p } else { 1.0 - p };
        let mut pmf = vec![0.0; 4];
        let mut cond = vec![vec![0.0; 4]; 4];
        for s in 0..2 {
            for u in 0..2 {
                for v in 0..2 {
                    let w = bern(s, self.p_s) * bern(u ^ s, a) * bern(v ^ u, b);
                    pmf[u * 2 + v] += w;
                    cond[u * 2 + v][(v ^ s) * 2 + s] += w;
                }
            }
        }
        let conds = (0..4)
            .map(|k| {
                if pmf[k] > 0.0 {
                    Some(diag(&cond[k].iter().map(|x| x / pmf[k]).collect::<Vec<_>>()))
                } else {
                    None
                }
            })
            .collect();
        let classical = RegisterLayout::new([("U".to_string(), 2), ("V".to_string(), 2)])?;
        let quantum = RegisterLayout::new([("A".to_string(), 2), ("S".to_string(), 2)])?;
        CQState::new(classical, pmf, conds, quantum)
    }

    pub fn sample(&self, a: f64, b: f64) -> Result<FamilySample> {
        let setup = SideInfoSetup::new(self.encoder_state(a, b)?, self.channel()?, vec!["S".into()])?;
        Ok(FamilySample { params: vec![a, b], state: setup.rate_state()? })
    }

    /// (a, b) on the grid {0, step, 2·step, …} ∩ [0, 1]².
    pub fn grid(&self, step: f64) -> Result<Vec<FamilySample>> {
        if !(step > 0.0 && step <= 1.0) {
            return Err(Error::InvalidArgument(format!("grid step {step} outside (0,1]")));
        }
        let n = (1.0 / step + 1e-9).floor() as usize;
        let axis: Vec<f64> = (0..=n).map(|i| (i as f64 * step).min(1.0)).collect();
        let pts: Vec<(f64, f64)> = axis.iter().flat_map(|&a| axis.iter().map(move |&b| (a, b))).collect();
        pts.par_iter().map(|&(a, b)| self.sample(a, b)).collect()
    }
}

/// Result of extending one sample with U' = (U, Ṽ).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErasureCheck {
    pub params: Vec<f64>,
    pub eps: f64,
    pub r_a: f64,
    /// I[U';B] − I[U';S]
    pub mm1: f64,
    /// I[U'V';B] − I[U'V';S]
    pub ab: f64,
    /// I[V';B|U'] − I[V';E|U']
    pub ab2: f64,
    /// |I[V';B|U'] − I[V';E|U'] − ε(I[V;B|U] − I[V;E|U])|
    pub e_scaling_defect: f64,
    /// |I[V';B|U'] − I[V';S|U'] − ε(I[V;B|U] − I[V;S|U])|
    pub s_scaling_defect: f64,
    pub extended: RatePoint,
    pub holds: bool,
}

pub const ERASURE_TOL: f64 = 1e-7;

pub fn erasure_check(sample: &FamilySample, roles: &Roles) -> Result<ErasureCheck> {
    let s = &sample.state;
    let before = rate_point(s, roles)?;
    let eps = solve_erasure_epsilon(s, roles)?;
    let ext = s.erasure_extend(&roles.u[0], &roles.v[0], eps)?;
    let extended = rate_point(&ext, roles)?;
    let q = extended.table;
    let q0 = before.table;
    let mm1 = q.i_u_b - q.i_u_s;
    let ab = q.i_uv_b - q.i_uv_s;
    let ab2 = q.i_v_b_given_u - q.i_v_e_given_u;
    let e_scaling_defect = (ab2 - eps * (q0.i_v_b_given_u - q0.i_v_e_given_u)).abs();
    let s_scaling_defect = (q.i_v_b_given_u - q.i_v_s_given_u - eps * (q0.i_v_b_given_u - q0.i_v_s_given_u)).abs();
    let holds = mm1.abs() <= 1e-8
        && ab >= before.r_a - ERASURE_TOL
        && ab2 >= before.r_a - ERASURE_TOL
        && e_scaling_defect <= 1e-8
        && s_scaling_defect <= 1e-8;
    Ok(ErasureCheck {
        params: sample.params.clone(),
        eps,
        r_a: before.r_a,
        mm1,
        ab,
        ab2,
        e_scaling_defect,
        s_scaling_defect,
        extended,
        holds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub samples: usize,
    pub s2_grid_points: usize,
    pub max_s1_r_a: f64,
    pub argmax_s1: Vec<f64>,
    /// Max of R_alt over grid points in S₂ together with the erasure
    /// extensions of the violating points.
    pub max_s2_r_alt: f64,
    pub max_s2_r_alt_grid_only: f64,
    pub gap: f64,
    /// One entry per S₂-violating sample with R_a > 0.
    pub erasure_checks: Vec<ErasureCheck>,
    pub checks_hold: bool,
}

pub fn region_equivalence(samples: &[FamilySample], roles: &Roles) -> Result<EquivalenceReport> {
    if samples.is_empty() {
        return Err(Error::EmptyFeasibleSet);
    }
    let points: Vec<RatePoint> = samples.par_iter().map(|x| rate_point(&x.state, roles)).collect::<Result<_>>()?;
    let mut best = 0;
    for (k, p) in points.iter().enumerate() {
        if p.r_a > points[best].r_a {
            best = k;
        }
    }
    let grid_s2 = points.iter().filter(|p| p.s2_member).map(|p| p.r_alt).fold(f64::NEG_INFINITY, f64::max);
    let violating: Vec<usize> = (0..points.len()).filter(|&k| !points[k].s2_member && points[k].r_a > 0.0).collect();
    let erasure_checks: Vec<ErasureCheck> =
        violating.par_iter().map(|&k| erasure_check(&samples[k], roles)).collect::<Result<_>>()?;
    let ext_max = erasure_checks.iter().filter(|c| c.extended.s2_member).map(|c| c.extended.r_alt).fold(f64::NEG_INFINITY, f64::max);
    let max_s2 = grid_s2.max(ext_max);
    if max_s2 == f64::NEG_INFINITY {
        return Err(Error::EmptyFeasibleSet);
    }
    Ok(EquivalenceReport {
        samples: samples.len(),
        s2_grid_points: points.iter().filter(|p| p.s2_member).count(),
        max_s1_r_a: points[best].r_a,
        argmax_s1: samples[best].params.clone(),
        max_s2_r_alt: max_s2,
        max_s2_r_alt_grid_only: grid_s2,
        gap: (points[best].r_a - max_s2).abs(),
        checks_hold: erasure_checks.iter().all(|c| c.holds),
        erasure_checks,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reduction {
    /// U, S, E trivial: Holevo-type rate.
    PointToPoint,
    /// U, S trivial: wiretap rate.
    Wiretap,
    /// E trivial, V the channel input label.
    GelfandPinsker,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReductionResult {
    pub reduction: Reduction,
    pub k: usize,
    /// (1/k) · max of R_alt over the admissible candidates.
    pub value: f64,
    pub argmax: usize,
    pub admissible: usize,
}

/// Evaluates R_alt per channel use over `family`, each member being an input
/// ensemble for `channel`^{⊗k} (classical labels on the `roles.u`/`roles.v`
/// registers, quantum inputs matching the tensor-power layout). Output and
/// side-information roles name the single-copy registers.
pub fn special_case_rate(
    reduction: Reduction,
    channel: &QuantumChannel,
    family: &[CQState],
    roles: &Roles,
    side_info: &[String],
    k: usize,
) -> Result<ReductionResult> {
    if !(1..=3).contains(&k) {
        return Err(Error::InvalidArgument(format!("block length {k} outside 1..=3")));
    }
    let ch = channel.tensor_power(k)?;
    let s_names = power_names(side_info, k);
    let mut r = Roles {
        u: roles.u.clone(),
        v: roles.v.clone(),
        b: power_names(&roles.b, k),
        e: power_names(&roles.e, k),
        s: s_names.clone(),
    };
    match reduction {
        Reduction::PointToPoint => {
            r.u.clear();
            r.e.clear();
            r.s.clear();
        }
        Reduction::Wiretap => {
            r.u.clear();
            r.s.clear();
        }
        Reduction::GelfandPinsker => r.e.clear(),
    }
    let vals: Vec<Option<f64>> = family
        .par_iter()
        .map(|st| {
            let setup = SideInfoSetup::new(st.clone(), ch.clone(), s_names.clone())?;
            let p = rate_point(&setup.rate_state()?, &r)?;
            Ok(p.s2_member.then_some(p.r_alt))
        })
        .collect::<Result<_>>()?;
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in vals.iter().enumerate() {
        if let Some(v) = *v {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
    }
    let (argmax, value) = best.ok_or(Error::EmptyFeasibleSet)?;
    Ok(ReductionResult { reduction, k, value: value / k as f64, argmax, admissible: vals.iter().flatten().count() })
}
