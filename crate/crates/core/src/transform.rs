//! Invertible mode-3 linear transforms and the `*_L` tensor-tensor product.
//!
//! A transform is an invertible `n3 x n3` matrix `M` applied along mode 3:
//! `L(A) = A x_3 M`. In the transform domain the `*_L` product of two tensors
//! is the face-wise product of their images, so
//! `A *_L B = L^{-1}(L(A) . L(B))` costs one forward transform per operand,
//! `n3` independent matrix products, and one inverse transform.
//!
//! Two named constructions are provided: the DFT (t-product) and a DCT-based
//! transform (c-product) assembled as `M = W^{-1} C (I + Z)` from the
//! orthonormal DCT-II matrix `C`, `W = diag` of its first column, and the
//! upshift `Z`. Any user-supplied invertible `M` is accepted as well.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tensor::{CTensor3, Tensor3};

/// Absolute imaginary-residual tolerance applied when an inverse transform is
/// expected to produce a real tensor.
pub const DEFAULT_IMAG_TOL: f64 = 1e-8;

/// Residual bound for `‖M·M⁻¹ − I‖_∞` when validating custom transforms.
const INVERTIBILITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransformKind {
    /// DFT along mode 3; the `*_L` product is the t-product.
    Dft,
    /// DCT-based transform along mode 3; the `*_L` product is the c-product.
    Dct,
    Custom(String),
}

impl TransformKind {
    pub fn name(&self) -> &str {
        match self {
            TransformKind::Dft => "dft",
            TransformKind::Dct => "dct",
            TransformKind::Custom(name) => name,
        }
    }
}

/// An invertible mode-3 transform: the matrix `M`, its inverse, and symmetry
/// metadata used by the trainers.
#[derive(Debug, Clone)]
pub struct LinearTransform {
    kind: TransformKind,
    size: usize,
    m: DMatrix<Complex64>,
    m_inv: DMatrix<Complex64>,
    /// True when `M` maps real tubes to real tubes (e.g. the DCT-based M).
    real_to_real: bool,
    /// True when real input yields conjugate-symmetric slices: transformed
    /// slice `i` equals the conjugate of slice `n3 - i + 2` for `i = 2..n3`
    /// (1-based). Holds for the DFT.
    conjugate_symmetric: bool,
}

impl LinearTransform {
    /// DFT transform (t-product): `M[i, j] = exp(-2 pi i (i-1)(j-1) / n3)`,
    /// `M⁻¹ = conj(M) / n3`.
    ///
    /// Roots of unity are tabulated for the first half circle and mirrored by
    /// conjugation, so the conjugate-symmetry relation between the rows is
    /// exact in floating point.
    pub fn dft(n3: usize) -> Result<Self> {
        if n3 == 0 {
            return Err(Error::invalid("transform size must be at least 1"));
        }
        let mut roots = vec![Complex64::new(1.0, 0.0); n3];
        for (r, root) in roots.iter_mut().enumerate().take(n3 / 2 + 1).skip(1) {
            let theta = -std::f64::consts::TAU * r as f64 / n3 as f64;
            *root = Complex64::new(theta.cos(), theta.sin());
        }
        for r in n3 / 2 + 1..n3 {
            roots[r] = roots[n3 - r].conj();
        }
        let m = DMatrix::from_fn(n3, n3, |i, j| roots[(i * j) % n3]);
        let m_inv = m.map(|v| v.conj() / n3 as f64);
        Ok(LinearTransform {
            kind: TransformKind::Dft,
            size: n3,
            m,
            m_inv,
            real_to_real: n3 == 1,
            conjugate_symmetric: true,
        })
    }

    /// DCT-based transform (c-product): `M = W⁻¹ C (I + Z)` with `C` the
    /// orthonormal DCT-II matrix (first row scaled so `C Cᵀ = I`),
    /// `W = diag(C e₁)` and `Z` the upshift with ones on the superdiagonal.
    /// All-real, so `M⁻¹ = (I + Z)⁻¹ Cᵀ W` in closed form.
    pub fn dct(n3: usize) -> Result<Self> {
        if n3 == 0 {
            return Err(Error::invalid("transform size must be at least 1"));
        }
        let c = dct_ii_orthonormal(n3);
        // M[i][j] = (C[i][j] + C[i][j-1]) / C[i][0]
        let m_real = DMatrix::from_fn(n3, n3, |i, j| {
            let v = c[(i, j)] + if j > 0 { c[(i, j - 1)] } else { 0.0 };
            v / c[(i, 0)]
        });
        // (I + Z)^{-1}[i][j] = (-1)^(j-i) for j >= i.
        let mut minv_real = DMatrix::zeros(n3, n3);
        for i in 0..n3 {
            for j in 0..n3 {
                let mut acc = 0.0;
                for r in i..n3 {
                    let sign = if (r - i) % 2 == 0 { 1.0 } else { -1.0 };
                    acc += sign * c[(j, r)] * c[(j, 0)];
                }
                minv_real[(i, j)] = acc;
            }
        }
        Ok(LinearTransform {
            kind: TransformKind::Dct,
            size: n3,
            m: m_real.map(|v| Complex64::new(v, 0.0)),
            m_inv: minv_real.map(|v| Complex64::new(v, 0.0)),
            real_to_real: true,
            conjugate_symmetric: false,
        })
    }

    /// Any invertible `M`. Invertibility is validated by inverting `M` and
    /// checking `‖M·M⁻¹ − I‖_∞ < 1e-10`.
    pub fn custom(name: impl Into<String>, m: DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::invalid(format!(
                "transform matrix must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let n3 = m.nrows();
        let m_inv = m
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Singular("transform matrix is not invertible".into()))?;
        let residual = (&m * &m_inv - DMatrix::<Complex64>::identity(n3, n3))
            .map(|v| v.norm())
            .max();
        if residual >= INVERTIBILITY_TOL {
            return Err(Error::Singular(format!(
                "transform matrix is numerically singular: ‖M·M⁻¹ − I‖_∞ = {residual:.3e}"
            )));
        }
        let real_to_real = m.iter().all(|v| v.im == 0.0);
        Ok(LinearTransform {
            kind: TransformKind::Custom(name.into()),
            size: n3,
            m,
            m_inv,
            real_to_real,
            conjugate_symmetric: false,
        })
    }

    pub fn kind(&self) -> &TransformKind {
        &self.kind
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.m
    }

    pub fn matrix_inv(&self) -> &DMatrix<Complex64> {
        &self.m_inv
    }

    pub fn real_to_real(&self) -> bool {
        self.real_to_real
    }

    pub fn conjugate_symmetric(&self) -> bool {
        self.conjugate_symmetric
    }

    fn check_size(&self, n3: usize) -> Result<()> {
        if n3 != self.size {
            return Err(Error::dims(format!(
                "tensor has n3={n3} but the transform expects {}",
                self.size
            )));
        }
        Ok(())
    }

    /// Forward transform `L(A) = A x_3 M`.
    pub fn forward(&self, t: &Tensor3) -> Result<CTensor3> {
        self.check_size(t.dims().2)?;
        Ok(mode3_combine_real(t, &self.m))
    }

    /// Forward transform of a complex tensor.
    pub fn forward_c(&self, t: &CTensor3) -> Result<CTensor3> {
        self.check_size(t.dims().2)?;
        Ok(mode3_combine(t, &self.m))
    }

    /// Inverse transform `L⁻¹(Ã) = Ã x_3 M⁻¹`.
    pub fn inverse(&self, t: &CTensor3) -> Result<CTensor3> {
        self.check_size(t.dims().2)?;
        Ok(mode3_combine(t, &self.m_inv))
    }

    /// Inverse transform of data known to represent a real tensor. The
    /// imaginary residual must stay below `imag_tol` (absolute); it is then
    /// truncated away.
    pub fn inverse_real(&self, t: &CTensor3, imag_tol: f64) -> Result<Tensor3> {
        let inv = self.inverse(t)?;
        let residual = inv.max_imag();
        if residual > imag_tol {
            return Err(Error::NumericalConsistency(format!(
                "imaginary residual {residual:.3e} after inverse transform exceeds {imag_tol:.3e}"
            )));
        }
        Ok(inv.real_part())
    }

    /// The `*_L` product `A *_L B = L⁻¹(L(A) . L(B))` with the default
    /// imaginary-residual tolerance.
    pub fn product(&self, a: &Tensor3, b: &Tensor3) -> Result<Tensor3> {
        self.product_tol(a, b, DEFAULT_IMAG_TOL)
    }

    pub fn product_tol(&self, a: &Tensor3, b: &Tensor3, imag_tol: f64) -> Result<Tensor3> {
        let fa = self.forward(a)?;
        let fb = self.forward(b)?;
        let fc = fa.facewise(&fb)?;
        self.inverse_real(&fc, imag_tol)
    }

    /// The identity element of `*_L`: the tensor whose transform has every
    /// frontal slice equal to `I_n`.
    ///
    /// For the DFT and DCT constructions the first column of `M` is exactly
    /// all ones, so the identity is `I_n` in slice 1 and zero elsewhere; for
    /// custom transforms the tube `M⁻¹·1` is materialized numerically.
    pub fn identity_tensor(&self, n: usize) -> Tensor3 {
        let n3 = self.size;
        let first_col_ones = (0..n3).all(|i| self.m[(i, 0)] == Complex64::new(1.0, 0.0));
        let mut t = Tensor3::zeros(n, n, n3);
        if first_col_ones {
            for i in 0..n {
                t.set(i, i, 0, 1.0);
            }
            return t;
        }
        let ones = nalgebra::DVector::from_element(n3, Complex64::new(1.0, 0.0));
        let tube = &self.m_inv * ones;
        for k in 0..n3 {
            for i in 0..n {
                t.set(i, i, k, tube[k].re);
            }
        }
        t
    }

    /// Tensor hermitian transpose: the tensor whose transform-domain slices
    /// are the conjugate transposes of the input's transform-domain slices.
    pub fn hermitian_transpose(&self, a: &Tensor3) -> Result<Tensor3> {
        let fa = self.forward(a)?;
        let (n1, n2, n3) = fa.dims();
        let mut ft = CTensor3::zeros(n2, n1, n3);
        for k in 0..n3 {
            ft.set_frontal_slice(k, &fa.frontal_slice(k).adjoint());
        }
        self.inverse_real(&ft, DEFAULT_IMAG_TOL)
    }
}

/// A tensor together with its transform-domain image.
#[derive(Debug, Clone)]
pub struct TransformedPair {
    pub original: Tensor3,
    pub transformed: CTensor3,
    pub transform: LinearTransform,
}

impl TransformedPair {
    pub fn new(original: Tensor3, transform: &LinearTransform) -> Result<Self> {
        let transformed = transform.forward(&original)?;
        Ok(TransformedPair {
            original,
            transformed,
            transform: transform.clone(),
        })
    }

    /// Inverse-transform the image; recovers the original up to rounding.
    pub fn recover(&self) -> Result<Tensor3> {
        self.transform
            .inverse_real(&self.transformed, DEFAULT_IMAG_TOL)
    }
}

/// Orthonormal DCT-II matrix: `C[i][j] = sqrt((2 - d_{i0}) / n) *
/// cos(i (2j + 1) pi / (2n))` with 0-based indices.
fn dct_ii_orthonormal(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        let scale = if i == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        scale * ((i as f64) * (2 * j + 1) as f64 * std::f64::consts::PI / (2.0 * n as f64)).cos()
    })
}

/// Mode-3 product with a complex matrix, written as linear combinations of
/// the contiguous frontal-slice slabs.
fn mode3_combine(t: &CTensor3, m: &DMatrix<Complex64>) -> CTensor3 {
    let (n1, n2, n3) = t.dims();
    let slab = n1 * n2;
    // buf is already in the canonical linearization: slice-major slabs.
    let mut buf = vec![Complex64::new(0.0, 0.0); slab * n3];
    for k_out in 0..n3 {
        let dst = &mut buf[k_out * slab..(k_out + 1) * slab];
        for k_in in 0..n3 {
            let w = m[(k_out, k_in)];
            if w == Complex64::new(0.0, 0.0) {
                continue;
            }
            let src = &t.data()[k_in * slab..(k_in + 1) * slab];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += w * s;
            }
        }
    }
    CTensor3::from_vec(n1, n2, n3, buf).expect("dims preserved")
}

fn mode3_combine_real(t: &Tensor3, m: &DMatrix<Complex64>) -> CTensor3 {
    mode3_combine(&t.to_complex(), m)
}
