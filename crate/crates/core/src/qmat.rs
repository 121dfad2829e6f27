//! Dense complex linear algebra on small multi-register Hilbert spaces.

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

/// Relative tolerance for Hermiticity, PSD and trace checks.
pub const STATE_TOL: f64 = 1e-10;
/// Eigenvalues at or below `RANK_TOL * max eigenvalue` are treated as zero.
pub const RANK_TOL: f64 = 1e-12;
/// Eigenvalue gap (relative) under which eigenvectors are treated as one cluster
/// and canonicalized.
const DEGENERACY_TOL: f64 = 1e-10;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// One named tensor factor.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Register {
    pub name: String,
    pub dim: usize,
}

/// Ordered list of registers; flattening is row-major in declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RegisterLayout {
    registers: Vec<Register>,
}

impl RegisterLayout {
    pub fn new<S: Into<String>>(regs: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let registers: Vec<Register> = regs
            .into_iter()
            .map(|(n, d)| Register { name: n.into(), dim: d })
            .collect();
        for (i, r) in registers.iter().enumerate() {
            if r.dim == 0 {
                return Err(Error::BadLayout(format!("register `{}` has dimension 0", r.name)));
            }
            if r.name.is_empty() {
                return Err(Error::BadLayout("empty register name".into()));
            }
            if registers[..i].iter().any(|o| o.name == r.name) {
                return Err(Error::BadLayout(format!("duplicate register `{}`", r.name)));
            }
        }
        Ok(Self { registers })
    }

    /// Layout with no registers (total dimension 1).
    pub fn empty() -> Self {
        Self { registers: Vec::new() }
    }

    pub fn registers(&self) -> &[Register] {
        &self.registers
    }

    pub fn names(&self) -> Vec<&str> {
        self.registers.iter().map(|r| r.name.as_str()).collect()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.registers.iter().map(|r| r.dim).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.registers.iter().map(|r| r.dim).product()
    }

    pub fn len(&self) -> usize {
        self.registers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.registers.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.registers
            .iter()
            .position(|r| r.name == name)
            .ok_or_else(|| Error::UnknownRegister(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.registers.iter().any(|r| r.name == name)
    }

    pub fn dim_of(&self, name: &str) -> Result<usize> {
        Ok(self.registers[self.index_of(name)?].dim)
    }

    /// Row-major flattening of per-register digits.
    pub fn flatten(&self, digits: &[usize]) -> usize {
        debug_assert_eq!(digits.len(), self.registers.len());
        digits
            .iter()
            .zip(&self.registers)
            .fold(0, |acc, (&d, r)| acc * r.dim + d)
    }

    pub fn unflatten(&self, mut index: usize) -> Vec<usize> {
        let mut digits = vec![0; self.registers.len()];
        for (k, r) in self.registers.iter().enumerate().rev() {
            digits[k] = index % r.dim;
            index /= r.dim;
        }
        digits
    }

    /// Concatenation; names must stay unique.
    pub fn concat(&self, other: &RegisterLayout) -> Result<Self> {
        Self::new(
            self.registers
                .iter()
                .chain(&other.registers)
                .map(|r| (r.name.clone(), r.dim)),
        )
    }

    /// Every register renamed to `{name}{suffix}`.
    pub fn with_suffix(&self, suffix: &str) -> Self {
        Self {
            registers: self
                .registers
                .iter()
                .map(|r| Register { name: format!("{}{}", r.name, suffix), dim: r.dim })
                .collect(),
        }
    }

    /// Sub-layout of the named registers, kept in the original order.
    pub fn restrict(&self, names: &[&str]) -> Result<Self> {
        for n in names {
            self.index_of(n)?;
        }
        Ok(Self {
            registers: self
                .registers
                .iter()
                .filter(|r| names.contains(&r.name.as_str()))
                .cloned()
                .collect(),
        })
    }
}

/// Unit-trace positive semidefinite matrix over a register layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    layout: RegisterLayout,
    data: CMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, positivity and unit trace.
    pub fn new(layout: RegisterLayout, data: CMatrix) -> Result<Self> {
        let d = layout.total_dim();
        if data.nrows() != d || data.ncols() != d {
            return Err(Error::LayoutMismatch(format!(
                "matrix is {}x{}, layout dimension is {d}",
                data.nrows(),
                data.ncols()
            )));
        }
        validate_state(&data)?;
        Ok(Self { layout, data: hermitian_part(&data) })
    }

    /// Skips validation; the caller guarantees the invariants.
    pub fn new_unchecked(layout: RegisterLayout, data: CMatrix) -> Self {
        debug_assert_eq!(layout.total_dim(), data.nrows());
        Self { layout, data }
    }

    pub fn maximally_mixed(layout: RegisterLayout) -> Self {
        let d = layout.total_dim();
        let data = identity(d) * c(1.0 / d as f64, 0.0);
        Self { layout, data }
    }

    pub fn pure(layout: RegisterLayout, psi: &[C64]) -> Result<Self> {
        let v = nalgebra::DVector::from_column_slice(psi);
        let n = v.norm();
        if n == 0.0 {
            return Err(Error::NotDensityMatrix("zero vector".into()));
        }
        let v = v / c(n, 0.0);
        Self::new(layout, &v * v.adjoint())
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> CMatrix {
        self.data
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn tensor(&self, other: &DensityMatrix) -> Result<DensityMatrix> {
        Ok(DensityMatrix {
            layout: self.layout.concat(&other.layout)?,
            data: kron(&self.data, &other.data),
        })
    }
}

/// Checks that `m` is Hermitian, PSD and has unit trace within `STATE_TOL`.
pub fn validate_state(m: &CMatrix) -> Result<()> {
    check_hermitian(m)?;
    let tr = trace_re(m);
    if (tr - 1.0).abs() > STATE_TOL {
        return Err(Error::NotDensityMatrix(format!("trace is {tr}")));
    }
    let eig = eigh(m)?;
    let lmax = eig.eigenvalues.last().copied().unwrap_or(0.0).max(0.0);
    let lmin = eig.eigenvalues.first().copied().unwrap_or(0.0);
    if lmin < -STATE_TOL * lmax.max(1.0) {
        return Err(Error::NotDensityMatrix(format!("negative eigenvalue {lmin:.3e}")));
    }
    Ok(())
}

fn check_hermitian(m: &CMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::LayoutMismatch(format!("{}x{} matrix is not square", m.nrows(), m.ncols())));
    }
    let n = m.nrows();
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    let scale = m.norm();
    if !(dev <= STATE_TOL * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::NotHermitian { deviation: dev, scale });
    }
    Ok(())
}

/// Ascending eigenvalues with orthonormal eigenvector columns.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianEig {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl HermitianEig {
    /// V f(diag λ) V†.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.eigenvalues.len();
        let mut scaled = self.eigenvectors.clone();
        for k in 0..n {
            let w = f(self.eigenvalues[k]);
            for i in 0..n {
                scaled[(i, k)] *= w;
            }
        }
        &scaled * self.eigenvectors.adjoint()
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.map(|x| x)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }
}

/// Hermitian eigendecomposition. Eigenvectors of (numerically) degenerate
/// eigenvalues are replaced by a canonical basis of their joint eigenspace, so
/// downstream spectral projectors do not depend on solver internals.
pub fn eigh(h: &CMatrix) -> Result<HermitianEig> {
    check_hermitian(h)?;
    let n = h.nrows();
    if n == 0 {
        return Ok(HermitianEig { eigenvalues: vec![], eigenvectors: CMatrix::zeros(0, 0) });
    }
    let sym = hermitian_part(h);
    let se = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| se.eigenvalues[k]).collect();
    let mut vecs = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &se.eigenvectors.column(src));
    }
    let scale = eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && eigenvalues[end] - eigenvalues[end - 1] <= DEGENERACY_TOL * scale {
            end += 1;
        }
        if end - start > 1 {
            let block = vecs.columns(start, end - start).into_owned();
            let basis = canonical_basis(&block);
            for k in 0..(end - start) {
                vecs.set_column(start + k, &basis.column(k));
            }
        }
        start = end;
    }
    Ok(HermitianEig { eigenvalues, eigenvectors: vecs })
}

/// Canonical orthonormal basis of the column space of `v` (orthonormal
/// columns): pivoted Gram-Schmidt on the columns of the projector V V†.
fn canonical_basis(v: &CMatrix) -> CMatrix {
    let (n, k) = v.shape();
    let p = v * v.adjoint();
    let mut out = CMatrix::zeros(n, k);
    let mut residuals: Vec<nalgebra::DVector<C64>> = (0..n).map(|j| p.column(j).into_owned()).collect();
    for q in 0..k {
        let mut best = 0;
        let mut best_norm = -1.0;
        for (j, r) in residuals.iter().enumerate() {
            let nr = r.norm();
            if nr > best_norm * (1.0 + 1e-12) {
                best = j;
                best_norm = nr;
            }
        }
        let mut col = residuals[best].clone() / c(best_norm, 0.0);
        let phase = col[best];
        if phase.norm() > 0.0 {
            col *= phase.conj() / c(phase.norm(), 0.0);
        }
        for r in residuals.iter_mut() {
            let proj = col.dotc(r);
            *r -= &col * proj;
        }
        out.set_column(q, &col);
    }
    out
}

/// Applies `f` to the spectrum of a Hermitian matrix.
pub fn mat_fn(a: &CMatrix, f: impl Fn(f64) -> f64) -> Result<CMatrix> {
    Ok(eigh(a)?.map(f))
}

/// Pseudo-power of a PSD matrix: eigenvalues at or below the rank tolerance
/// map to zero (also for p <= 0), small negative eigenvalues are clamped.
pub fn mat_pow(a: &CMatrix, p: f64) -> Result<CMatrix> {
    let eig = eigh(a)?;
    Ok(pow_from_eig(&eig, p))
}

pub fn pow_from_eig(eig: &HermitianEig, p: f64) -> CMatrix {
    let lmax = eig.max_eigenvalue().max(0.0);
    let cut = RANK_TOL * lmax;
    if eig.min_eigenvalue() < -STATE_TOL * lmax.max(1.0) {
        log::debug!("mat_pow: clamping eigenvalue {:.3e}", eig.min_eigenvalue());
    }
    eig.map(|x| if x > cut && x > 0.0 { x.powf(p) } else { 0.0 })
}

/// Projector onto the support (eigenvalues above the rank tolerance).
pub fn support_projector(a: &CMatrix) -> Result<CMatrix> {
    mat_pow(a, 0.0)
}

pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

pub fn dagger(a: &CMatrix) -> CMatrix {
    a.adjoint()
}

pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * c(0.5, 0.0)
}

pub fn trace_re(a: &CMatrix) -> f64 {
    a.diagonal().iter().map(|z| z.re).sum()
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Diagonal matrix with real entries.
pub fn diag(values: &[f64]) -> CMatrix {
    let n = values.len();
    let mut m = CMatrix::zeros(n, n);
    for (i, &v) in values.iter().enumerate() {
        m[(i, i)] = c(v, 0.0);
    }
    m
}

/// Block-diagonal embedding of square blocks.
pub fn block_diag(blocks: &[CMatrix]) -> CMatrix {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut m = CMatrix::zeros(n, n);
    let mut off = 0;
    for b in blocks {
        let k = b.nrows();
        m.view_mut((off, off), (k, k)).copy_from(b);
        off += k;
    }
    m
}

pub fn min_eigenvalue(h: &CMatrix) -> Result<f64> {
    Ok(eigh(h)?.min_eigenvalue())
}

pub fn max_eigenvalue(h: &CMatrix) -> Result<f64> {
    Ok(eigh(h)?.max_eigenvalue())
}

/// Sum of singular values.
pub fn trace_norm(x: &CMatrix) -> f64 {
    if x.nrows() == 0 {
        return 0.0;
    }
    x.clone().svd(false, false).singular_values.iter().sum()
}

/// Largest singular value.
pub fn operator_norm(x: &CMatrix) -> f64 {
    if x.nrows() == 0 {
        return 0.0;
    }
    x.clone().svd(false, false).singular_values.iter().fold(0.0, |m: f64, &s| m.max(s))
}

/// Von Neumann entropy in bits.
pub fn von_neumann_entropy(rho: &CMatrix) -> Result<f64> {
    let eig = eigh(rho)?;
    Ok(eig
        .eigenvalues
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| -x * x.log2())
        .sum())
}

/// Shannon entropy in bits.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum()
}

/// Partial trace of a raw operator, keeping `keep` in layout order.
pub fn partial_trace_op(
    op: &CMatrix,
    layout: &RegisterLayout,
    keep: &[&str],
) -> Result<(CMatrix, RegisterLayout)> {
    let kept = layout.restrict(keep)?;
    let d = layout.total_dim();
    if op.nrows() != d || op.ncols() != d {
        return Err(Error::LayoutMismatch(format!(
            "operator is {}x{}, layout dimension is {d}",
            op.nrows(),
            op.ncols()
        )));
    }
    if kept.len() == layout.len() {
        return Ok((op.clone(), kept));
    }
    let keep_mask: Vec<bool> = layout.registers().iter().map(|r| keep.contains(&r.name.as_str())).collect();
    let traced = RegisterLayout {
        registers: layout
            .registers()
            .iter()
            .zip(&keep_mask)
            .filter(|(_, &k)| !k)
            .map(|(r, _)| r.clone())
            .collect(),
    };
    let dk = kept.total_dim();
    let dt = traced.total_dim();
    // full index of (kept digit index, traced digit index)
    let mut full = vec![0usize; dk * dt];
    for full_idx in 0..d {
        let digits = layout.unflatten(full_idx);
        let (mut kd, mut td) = (Vec::new(), Vec::new());
        for (dig, &k) in digits.iter().zip(&keep_mask) {
            if k {
                kd.push(*dig);
            } else {
                td.push(*dig);
            }
        }
        full[kept.flatten(&kd) * dt + traced.flatten(&td)] = full_idx;
    }
    let mut out = CMatrix::zeros(dk, dk);
    for i in 0..dk {
        for j in 0..dk {
            let mut acc = c(0.0, 0.0);
            for t in 0..dt {
                acc += op[(full[i * dt + t], full[j * dt + t])];
            }
            out[(i, j)] = acc;
        }
    }
    Ok((out, kept))
}

pub fn partial_trace(rho: &DensityMatrix, keep: &[&str]) -> Result<DensityMatrix> {
    let (m, l) = partial_trace_op(&rho.data, &rho.layout, keep)?;
    Ok(DensityMatrix::new_unchecked(l, m))
}

/// Fidelity ‖√ρ √σ‖₁ of raw PSD matrices, clamped to [0,1].
pub fn fidelity_op(rho: &CMatrix, sigma: &CMatrix) -> Result<f64> {
    let s = mat_pow(sigma, 0.5)?;
    let inner = hermitian_part(&(&s * rho * &s));
    let eig = eigh(&inner)?;
    let f: f64 = eig.eigenvalues.iter().map(|&x| x.max(0.0).sqrt()).sum();
    Ok(f.clamp(0.0, 1.0))
}

pub fn purified_distance_op(rho: &CMatrix, sigma: &CMatrix) -> Result<f64> {
    let f = fidelity_op(rho, sigma)?;
    Ok((1.0 - f * f).max(0.0).sqrt())
}

fn same_layout(a: &DensityMatrix, b: &DensityMatrix) -> Result<()> {
    if a.layout != b.layout {
        return Err(Error::LayoutMismatch(format!("{:?} vs {:?}", a.layout.names(), b.layout.names())));
    }
    Ok(())
}

pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    same_layout(rho, sigma)?;
    fidelity_op(&rho.data, &sigma.data)
}

pub fn purified_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    same_layout(rho, sigma)?;
    purified_distance_op(&rho.data, &sigma.data)
}

/// Frobenius norm of the commutator [a, b].
pub fn commutator_norm(a: &CMatrix, b: &CMatrix) -> f64 {
    (a * b - b * a).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_density, random_hermitian, random_pure};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn layout_flatten_round_trip() {
        let l = RegisterLayout::new([("A", 2), ("B", 3), ("C", 4)]).unwrap();
        assert_eq!(l.total_dim(), 24);
        for i in 0..24 {
            assert_eq!(l.flatten(&l.unflatten(i)), i);
        }
        assert_eq!(l.flatten(&[1, 2, 3]), 23);
        assert!(RegisterLayout::new([("A", 2), ("A", 2)]).is_err());
        assert!(RegisterLayout::new([("A", 0)]).is_err());
    }

    #[test]
    fn eigh_identity_and_pauli_z() {
        let e = eigh(&identity(4)).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0; 4]);
        let z = diag(&[1.0, -1.0]);
        let e = eigh(&z).unwrap();
        assert!((e.eigenvalues[0] + 1.0).abs() < 1e-15 && (e.eigenvalues[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eigh_rejects_non_hermitian() {
        let mut m = identity(2);
        m[(0, 1)] = c(1.0, 0.0);
        assert!(matches!(eigh(&m), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn eigh_random_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let h = random_hermitian(&mut rng, 6);
            let e = eigh(&h).unwrap();
            assert!(e.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
            assert!(close(&e.reconstruct(), &h, 1e-9 * h.norm()));
            let vv = e.eigenvectors.adjoint() * &e.eigenvectors;
            assert!(close(&vv, &identity(6), 1e-10));
        }
    }

    #[test]
    fn eigh_degenerate_basis_is_canonical() {
        // Same operator written in two different bases yields identical eigenvectors.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = crate::random::random_unitary(&mut rng, 4);
        let h = &u * diag(&[0.1, 0.3, 0.3, 0.3]) * u.adjoint();
        let h = hermitian_part(&h);
        let e1 = eigh(&h).unwrap();
        let e2 = eigh(&hermitian_part(&(h.clone() * c(1.0, 0.0)))).unwrap();
        assert_eq!(e1, e2);
        let p: CMatrix = e1.eigenvectors.columns(1, 3) * e1.eigenvectors.columns(1, 3).adjoint();
        let p_true = &u.columns(1, 3) * u.columns(1, 3).adjoint();
        assert!(close(&p, &p_true, 1e-9));
    }

    #[test]
    fn mat_pow_examples() {
        assert!(close(&mat_pow(&identity(3), 0.37).unwrap(), &identity(3), 1e-14));
        assert!(close(&mat_pow(&diag(&[4.0, 9.0]), 0.5).unwrap(), &diag(&[2.0, 3.0]), 1e-12));
        let v = nalgebra::DVector::from_vec(vec![c(0.6, 0.0), c(0.0, 0.8)]);
        let p = &v * v.adjoint();
        assert!(close(&mat_pow(&p, -1.0).unwrap(), &p, 1e-12));
    }

    #[test]
    fn partial_trace_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let la = RegisterLayout::new([("A", 2)]).unwrap();
        let lb = RegisterLayout::new([("B", 3)]).unwrap();
        let ra = DensityMatrix::new(la, random_density(&mut rng, 2, 2)).unwrap();
        let rb = DensityMatrix::new(lb, random_density(&mut rng, 3, 3)).unwrap();
        let ab = ra.tensor(&rb).unwrap();
        let back = partial_trace(&ab, &["A"]).unwrap();
        assert!(close(back.matrix(), ra.matrix(), 1e-14));
        let back = partial_trace(&ab, &["B"]).unwrap();
        assert!(close(back.matrix(), rb.matrix(), 1e-14));

        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = DensityMatrix::pure(
            RegisterLayout::new([("X", 2), ("Y", 2)]).unwrap(),
            &[c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)],
        )
        .unwrap();
        let half = partial_trace(&bell, &["X"]).unwrap();
        assert!(close(half.matrix(), &(identity(2) * c(0.5, 0.0)), 1e-14));
    }

    #[test]
    fn partial_trace_two_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let l = RegisterLayout::new([("A", 2), ("B", 3), ("C", 2)]).unwrap();
        let rho = DensityMatrix::new(l, random_density(&mut rng, 12, 12)).unwrap();
        let one = partial_trace(&rho, &["A"]).unwrap();
        let ac = partial_trace(&rho, &["A", "C"]).unwrap();
        let two = partial_trace(&ac, &["A"]).unwrap();
        assert!(close(one.matrix(), two.matrix(), 1e-13));
        // independent oracle: explicit index sum
        let m = rho.matrix();
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = c(0.0, 0.0);
                for b in 0..3 {
                    for cc in 0..2 {
                        acc += m[(i * 6 + b * 2 + cc, j * 6 + b * 2 + cc)];
                    }
                }
                assert!((acc - one.matrix()[(i, j)]).norm() < 1e-13);
            }
        }
        assert!(matches!(partial_trace(&rho, &["Z"]), Err(Error::UnknownRegister(_))));
    }

    #[test]
    fn fidelity_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let l = RegisterLayout::new([("A", 3)]).unwrap();
        let r = DensityMatrix::new(l.clone(), random_density(&mut rng, 3, 3)).unwrap();
        assert!((fidelity(&r, &r).unwrap() - 1.0).abs() < 1e-9);
        assert!(purified_distance(&r, &r).unwrap() < 1e-4);
        let e0 = DensityMatrix::pure(l.clone(), &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        let e1 = DensityMatrix::pure(l.clone(), &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!(fidelity(&e0, &e1).unwrap() < 1e-12);
        assert!((purified_distance(&e0, &e1).unwrap() - 1.0).abs() < 1e-12);
        for _ in 0..20 {
            let a = random_pure(&mut rng, 3);
            let b = random_pure(&mut rng, 3);
            let overlap = a.dotc(&b).norm();
            let ra = DensityMatrix::new(l.clone(), &a * a.adjoint()).unwrap();
            let rb = DensityMatrix::new(l.clone(), &b * b.adjoint()).unwrap();
            assert!((fidelity(&ra, &rb).unwrap() - overlap).abs() < 1e-7);
        }
        let other = DensityMatrix::maximally_mixed(RegisterLayout::new([("B", 3)]).unwrap());
        assert!(matches!(fidelity(&r, &other), Err(Error::LayoutMismatch(_))));
    }

    #[test]
    fn trace_norm_examples() {
        assert!((trace_norm(&diag(&[1.0, -1.0])) - 2.0).abs() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let r = random_density(&mut rng, 3, 3);
        assert!(trace_norm(&(&r - &r)) < 1e-15);
        for _ in 0..20 {
            let h = random_hermitian(&mut rng, 5);
            let oracle: f64 = eigh(&h).unwrap().eigenvalues.iter().map(|x| x.abs()).sum();
            assert!((trace_norm(&h) - oracle).abs() < 1e-10);
        }
    }

    #[test]
    fn density_validation() {
        let l = RegisterLayout::new([("A", 2)]).unwrap();
        assert!(DensityMatrix::new(l.clone(), diag(&[0.5, 0.4])).is_err());
        assert!(DensityMatrix::new(l.clone(), diag(&[1.2, -0.2])).is_err());
        assert!(DensityMatrix::new(l, diag(&[0.5, 0.5])).is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn pow_composes(seed in any::<u64>(), p in -1.5f64..1.5, q in -1.5f64..1.5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_density(&mut rng, 4, 3);
            let lhs = mat_pow(&mat_pow(&a, p).unwrap(), q).unwrap();
            let rhs = mat_pow(&a, p * q).unwrap();
            // the support of a^p equals the support of a when p != 0
            prop_assume!(p.abs() > 1e-3);
            prop_assert!((lhs - rhs).norm() < 1e-8 * (1.0 + mat_pow(&a, p*q).unwrap().norm()));
        }

        #[test]
        fn purified_distance_vs_trace_norm(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = random_density(&mut rng, 3, 3);
            let s = random_density(&mut rng, 3, 2);
            let p = purified_distance_op(&r, &s).unwrap();
            prop_assert!(p <= (2.0 * trace_norm(&(&r - &s))).sqrt() + 1e-12);
        }

        #[test]
        fn purified_distance_triangle(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = random_density(&mut rng, 3, 3);
            let s = random_density(&mut rng, 3, 3);
            let t = random_density(&mut rng, 3, 2);
            let lhs = purified_distance_op(&r, &s).unwrap();
            let rhs = purified_distance_op(&r, &t).unwrap() + purified_distance_op(&t, &s).unwrap();
            prop_assert!(lhs <= rhs + 1e-9);
        }

        #[test]
        fn fidelity_symmetric(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = random_density(&mut rng, 3, 2);
            let s = random_density(&mut rng, 3, 3);
            prop_assert!((fidelity_op(&r, &s).unwrap() - fidelity_op(&s, &r).unwrap()).abs() < 1e-7);
        }

        #[test]
        fn hayashi_nagaoka(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // 0 < S < I and T >= 0
            let e = eigh(&random_hermitian(&mut rng, 3)).unwrap();
            let lo = e.min_eigenvalue();
            let hi = e.max_eigenvalue();
            let s = e.map(|x| 0.05 + 0.9 * (x - lo) / (hi - lo).max(1e-12));
            let t = random_density(&mut rng, 3, 2) * c(2.0, 0.0);
            let st = &s + &t;
            let w = mat_pow(&st, -0.5).unwrap();
            let lhs = (identity(3) * c(2.0, 0.0) - &s * c(2.0, 0.0)) + &t * c(4.0, 0.0);
            let rhs = identity(3) - &w * &s * &w;
            prop_assert!(min_eigenvalue(&hermitian_part(&(lhs - rhs))).unwrap() >= -1e-8);
        }

        #[test]
        fn acceptance_probability_continuity(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let e = eigh(&random_hermitian(&mut rng, 3)).unwrap();
            let lo = e.min_eigenvalue();
            let hi = e.max_eigenvalue();
            let lam = e.map(|x| (x - lo) / (hi - lo).max(1e-12));
            let r = random_density(&mut rng, 3, 3);
            let s = random_density(&mut rng, 3, 2);
            let a = trace_re(&(&lam * &r)).max(0.0).sqrt();
            let b = trace_re(&(&lam * &s)).max(0.0).sqrt();
            prop_assert!((a - b).abs() <= purified_distance_op(&r, &s).unwrap() + 1e-9);
        }
    }
}
