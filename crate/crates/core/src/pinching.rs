//! Pinching maps built from spectral decompositions, the E1..E5 chain of a cq
//! state and the component counts v1..v5.

use serde::Serialize;

use crate::cq::{join, refs, CQState, Roles};
use crate::error::{Error, Result};
use crate::qmat::{c, eigh, identity, CMatrix, DensityMatrix};

pub const DEFAULT_CLUSTER_TOL: f64 = 1e-9;

/// Family of mutually orthogonal projectors summing to the identity, stored
/// as orthonormal bases of their ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct PinchingMap {
    dim: usize,
    bases: Vec<CMatrix>,
}

/// Groups ascending eigenvalues into clusters separated by relative gaps
/// larger than `tol * scale`. Returns index ranges.
fn clusters(values: &[f64], tol: f64, scale: f64) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for k in 1..=values.len() {
        if k == values.len() || values[k] - values[k - 1] > tol * scale {
            out.push(start..k);
            start = k;
        }
    }
    out
}

impl PinchingMap {
    /// Single projector (the identity map).
    pub fn trivial(dim: usize) -> Self {
        Self { dim, bases: vec![identity(dim)] }
    }

    /// One projector per eigenvalue cluster of the Hermitian operator `sigma`.
    pub fn from_operator(sigma: &CMatrix, cluster_tol: f64) -> Result<Self> {
        Self::trivial(sigma.nrows()).refine(sigma, cluster_tol)
    }

    /// Splits every projector P of `self` by the spectral decomposition of
    /// P σ P restricted to its range. When σ commutes with every P this is the
    /// common refinement of `self` and the spectral projectors of σ.
    pub fn refine(&self, sigma: &CMatrix, cluster_tol: f64) -> Result<Self> {
        if sigma.nrows() != self.dim {
            return Err(Error::LayoutMismatch(format!(
                "operator dimension {} vs pinching dimension {}",
                sigma.nrows(),
                self.dim
            )));
        }
        let mut parts = Vec::with_capacity(self.bases.len());
        let mut scale = 0.0f64;
        for w in &self.bases {
            let m = crate::qmat::hermitian_part(&(w.adjoint() * sigma * w));
            let e = eigh(&m)?;
            scale = scale.max(e.eigenvalues.iter().fold(0.0, |a: f64, x| a.max(x.abs())));
            parts.push((w, e));
        }
        let scale = scale.max(f64::MIN_POSITIVE);
        let mut bases = Vec::new();
        for (w, e) in parts {
            for r in clusters(&e.eigenvalues, cluster_tol, scale) {
                let sub = e.eigenvectors.columns(r.start, r.len()).into_owned();
                bases.push(w * sub);
            }
        }
        Ok(Self { dim: self.dim, bases })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of projectors.
    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }

    pub fn projectors(&self) -> Vec<CMatrix> {
        self.bases.iter().map(|w| w * w.adjoint()).collect()
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.bases.iter().map(|w| w.ncols()).collect()
    }

    /// Σ_i P_i ρ P_i.
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for w in &self.bases {
            out += w * (w.adjoint() * rho * w) * w.adjoint();
        }
        out
    }

    /// Largest deviation from P_i P_j = δ_ij P_i and Σ P_i = I.
    pub fn validity_defect(&self) -> f64 {
        let ps = self.projectors();
        let mut worst = 0.0f64;
        let mut sum = CMatrix::zeros(self.dim, self.dim);
        for (i, a) in ps.iter().enumerate() {
            sum += a;
            for (j, b) in ps.iter().enumerate() {
                let target = if i == j { a.clone() } else { CMatrix::zeros(self.dim, self.dim) };
                worst = worst.max((a * b - target).norm());
            }
        }
        worst.max((sum - identity(self.dim)).norm())
    }
}

/// Pinching with respect to the spectral decomposition of σ.
pub fn pinching_from_state(sigma: &DensityMatrix, cluster_tol: f64) -> Result<PinchingMap> {
    PinchingMap::from_operator(sigma.matrix(), cluster_tol)
}

pub fn apply_pinching(e: &PinchingMap, rho: &DensityMatrix) -> Result<DensityMatrix> {
    if rho.dim() != e.dim() {
        return Err(Error::LayoutMismatch(format!("state dimension {} vs pinching {}", rho.dim(), e.dim())));
    }
    Ok(DensityMatrix::new_unchecked(rho.layout().clone(), e.apply(rho.matrix())))
}

/// One pinching map per value of a classical register.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalPinching {
    pub maps: Vec<PinchingMap>,
}

impl ConditionalPinching {
    pub fn max_len(&self) -> usize {
        self.maps.iter().map(PinchingMap::len).max().unwrap_or(1)
    }
}

/// E1 from ρ_X and E_{2|u} from E1(ρ_{X|u}), refined inside E1's projectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EChain {
    pub e1: PinchingMap,
    pub e2: ConditionalPinching,
    pub v1: usize,
    pub v2: usize,
}

pub fn build_e_chain(s: &CQState, u: &[&str], x: &[&str], cluster_tol: f64) -> Result<EChain> {
    let given_u = s.marginal(u, x)?;
    let rho_x = given_u.average_state();
    let e1 = PinchingMap::from_operator(&rho_x, cluster_tol)?;
    let maps = given_u
        .conditionals()
        .iter()
        .map(|r| e1.refine(&e1.apply(r), cluster_tol))
        .collect::<Result<Vec<_>>>()?;
    let e2 = ConditionalPinching { maps };
    let (v1, v2) = (e1.len(), e2.max_len());
    Ok(EChain { e1, e2, v1, v2 })
}

/// E_{|u} from the spectral decomposition of ρ_{X|u} (the map used for Eve).
pub fn build_conditional_pinching(s: &CQState, u: &[&str], x: &[&str], cluster_tol: f64) -> Result<ConditionalPinching> {
    let given_u = s.marginal(u, x)?;
    let maps = given_u
        .conditionals()
        .iter()
        .map(|r| PinchingMap::from_operator(r, cluster_tol))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConditionalPinching { maps })
}

/// Component counts of the pinching maps used by the code construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PinchingConstants {
    pub v1: f64,
    pub v2: f64,
    pub v3: f64,
    pub v4: f64,
    pub v5: f64,
}

impl PinchingConstants {
    /// Measured cluster counts on a (U,V;B,E,S) state.
    pub fn measure(s: &CQState, roles: &Roles, cluster_tol: f64) -> Result<Self> {
        let u = refs(&roles.u);
        let b = build_e_chain(s, &u, &refs(&roles.b), cluster_tol)?;
        let sc = build_e_chain(s, &u, &refs(&roles.s), cluster_tol)?;
        let e = build_conditional_pinching(s, &u, &refs(&roles.e), cluster_tol)?;
        Ok(Self {
            v1: b.v1 as f64,
            v2: b.v2 as f64,
            v3: sc.v1 as f64,
            v4: sc.v2 as f64,
            v5: e.max_len() as f64,
        })
    }

    /// Component-count bounds for n-fold i.i.d. states: the v1/v2 formulas
    /// with d_B for (v1, v2), d_S for (v3, v4) and d_E for v5.
    pub fn iid_bounds(n: u32, d_u: u32, d_b: u32, d_s: u32, d_e: u32) -> Self {
        let b = iid_component_bounds(n, d_u, d_b);
        let s = iid_component_bounds(n, d_u, d_s);
        let e = iid_component_bounds(n, d_u, d_e);
        Self {
            v1: b.log2_v1.exp2(),
            v2: b.log2_v2.exp2(),
            v3: s.log2_v1.exp2(),
            v4: s.log2_v2.exp2(),
            v5: e.log2_v2.exp2(),
        }
    }
}

/// Bounds (n+1)^{d_B−1} and (n+1)^{d_U(d_B+2)(d_B−1)/2} on the number of
/// distinct eigenvalues of n-fold i.i.d. states and their conditional pinchings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComponentBounds {
    /// Exact values when they fit in 128 bits.
    pub v1: Option<u128>,
    pub v2: Option<u128>,
    pub log2_v1: f64,
    pub log2_v2: f64,
    pub exponent_v1: u64,
    pub exponent_v2: u64,
}

pub fn iid_component_bounds(n: u32, d_u: u32, d_b: u32) -> ComponentBounds {
    let base = n as u128 + 1;
    let e1 = d_b.saturating_sub(1) as u64;
    let db = d_b as u64;
    let e2 = d_u as u64 * (db + 2) * db.saturating_sub(1) / 2;
    let pow = |e: u64| u32::try_from(e).ok().and_then(|e| base.checked_pow(e));
    let lb = (base as f64).log2();
    ComponentBounds {
        v1: pow(e1),
        v2: pow(e2),
        log2_v1: e1 as f64 * lb,
        log2_v2: e2 as f64 * lb,
        exponent_v1: e1,
        exponent_v2: e2,
    }
}

/// Largest commutator norm among E1(ρ_{V−U−X}), E2(ρ_{UVX}) and ρ_UV ⊗ ρ_X.
pub fn commutator_defect(s: &CQState, u: &[&str], v: &[&str], x: &[&str], chain: &EChain) -> Result<f64> {
    let joint = s.marginal(&join(u, v), x)?;
    let given_u = s.marginal(u, x)?;
    let nv = joint.num_tuples() / given_u.num_tuples();
    if chain.e2.maps.len() != given_u.num_tuples() || chain.e1.dim() != joint.quantum().total_dim() {
        return Err(Error::LayoutMismatch("pinching chain does not match the state".into()));
    }
    let rho_x = given_u.average_state();
    let mut worst = 0.0f64;
    for k in 0..joint.num_tuples() {
        let p = joint.pmf()[k];
        if p == 0.0 {
            continue;
        }
        let ku = k / nv;
        let a = chain.e1.apply(given_u.conditional(ku)) * c(p, 0.0);
        let b = chain.e2.maps[ku].apply(joint.conditional(k)) * c(p, 0.0);
        let r = &rho_x * c(p, 0.0);
        for (m1, m2) in [(&a, &b), (&a, &r), (&b, &r)] {
            worst = worst.max(crate::qmat::commutator_norm(m1, m2));
        }
    }
    Ok(worst)
}

/// True iff the three operators of [`commutator_defect`] commute within 1e-8.
pub fn commutation_check(s: &CQState, u: &[&str], v: &[&str], x: &[&str], cluster_tol: f64) -> Result<bool> {
    let chain = build_e_chain(s, u, x, cluster_tol)?;
    Ok(commutator_defect(s, u, v, x, &chain)? <= 1e-8)
}
