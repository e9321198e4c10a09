//! Shared helpers for unit tests.

pub use crate::rng::DeterministicRng as Rng;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::tensor::{CTensor3, Tensor3};

pub fn rand_tensor(rng: &mut Rng, n1: usize, n2: usize, n3: usize) -> Tensor3 {
    Tensor3::from_fn(n1, n2, n3, |_, _, _| rng.normal())
}

pub fn rand_ctensor(rng: &mut Rng, n1: usize, n2: usize, n3: usize) -> CTensor3 {
    CTensor3::from_fn(n1, n2, n3, |_, _, _| Complex64::new(rng.normal(), rng.normal()))
}

pub fn rand_matrix(rng: &mut Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.normal())
}

pub fn rand_cmatrix(rng: &mut Rng, rows: usize, cols: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(rows, cols, |_, _| Complex64::new(rng.normal(), rng.normal()))
}

/// Random Hermitian positive semi-definite matrix G Gᴴ (+ jitter·I).
pub fn rand_hpsd(rng: &mut Rng, d: usize, jitter: f64) -> DMatrix<Complex64> {
    let g = rand_cmatrix(rng, d, d);
    &g * g.adjoint() + DMatrix::identity(d, d).map(|v: f64| Complex64::new(v * jitter, 0.0))
}
