#![allow(dead_code)]

//! Helpers shared by the integration suites.

use nalgebra::DMatrix;
use num_complex::Complex64;

use tldakit::rng::DeterministicRng;
use tldakit::tensor::Tensor3;

pub fn rand_tensor(rng: &mut DeterministicRng, n1: usize, n2: usize, n3: usize) -> Tensor3 {
    Tensor3::from_fn(n1, n2, n3, |_, _, _| rng.normal())
}

pub fn rand_cmatrix(rng: &mut DeterministicRng, rows: usize, cols: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(rows, cols, |_, _| Complex64::new(rng.normal(), rng.normal()))
}

/// Random Hermitian PSD matrix `G Gᴴ + jitter I`.
pub fn rand_hpsd(rng: &mut DeterministicRng, d: usize, jitter: f64) -> DMatrix<Complex64> {
    let g = rand_cmatrix(rng, d, d);
    &g * g.adjoint() + DMatrix::identity(d, d).map(|v: f64| Complex64::new(v * jitter, 0.0))
}

pub fn kron_with_identity(m: &DMatrix<Complex64>, n: usize) -> DMatrix<Complex64> {
    m.kronecker(&DMatrix::<Complex64>::identity(n, n))
}
