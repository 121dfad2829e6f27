//! Random states, unitaries and channels for tests and experiments.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::qmat::{c, hermitian_part, trace_re, CMatrix, C64};

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    c(re, im)
}

pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Random density matrix of dimension `d` and rank at most `rank` (G G† / Tr).
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, d: usize, rank: usize) -> CMatrix {
    let g = ginibre(rng, d, rank.max(1));
    let m = hermitian_part(&(&g * g.adjoint()));
    let t = trace_re(&m);
    m / c(t, 0.0)
}

/// Random diagonal density matrix.
pub fn random_diagonal_density<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CMatrix {
    crate::qmat::diag(&random_probability(rng, d))
}

pub fn random_pure<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DVector<C64> {
    let v = DVector::from_fn(d, |_, _| gaussian(rng));
    let n = v.norm();
    v / c(n, 0.0)
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CMatrix {
    hermitian_part(&ginibre(rng, d, d))
}

/// Haar-random unitary via QR with phase correction.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CMatrix {
    let qr = ginibre(rng, d, d).qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..d {
        let z = r[(k, k)];
        let ph = if z.norm() > 0.0 { z / c(z.norm(), 0.0) } else { c(1.0, 0.0) };
        for i in 0..d {
            q[(i, k)] *= ph;
        }
    }
    q
}

/// Random CPTP map d_in -> d_out with `n` Kraus operators, cut from a random isometry.
pub fn random_kraus<R: Rng + ?Sized>(rng: &mut R, d_in: usize, d_out: usize, n: usize) -> Vec<CMatrix> {
    let big = d_out * n;
    assert!(big >= d_in, "need d_out * n >= d_in for an isometry");
    let u = random_unitary(rng, big);
    let v = u.columns(0, d_in).into_owned();
    (0..n).map(|k| v.rows(k * d_out, d_out).into_owned()).collect()
}

/// Random probability vector (flat Dirichlet).
pub fn random_probability<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}
