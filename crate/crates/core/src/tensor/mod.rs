//! Dense third-order tensors and their basic algebra.
//!
//! A [`Tensor3`] is an `n1 x n2 x n3` array of `f64` stored in a fixed
//! canonical linearization: frontal-slice major (mode-3 index outermost) and
//! column-major within each slice, so element `(i, j, k)` lives at
//! `i + j*n1 + k*n1*n2`. Frontal slices are therefore contiguous, and the
//! TNS3 file payload is exactly this buffer. [`CTensor3`] is the complex
//! counterpart used for transform-domain images.
//!
//! Unfoldings use the cyclic fiber ordering: the columns of the mode-k
//! unfolding enumerate the remaining modes with mode k+1 (wrapping) varying
//! fastest. `fold` is the exact inverse.

mod block;
mod io;

pub use block::{bcirc, bdiag, mat_th, tensor_from_bdiag, BlockMatrix};
pub use io::{read_tns3, read_tns3_real, write_tns3, Tns3Payload};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense real third-order tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    n1: usize,
    n2: usize,
    n3: usize,
    data: Vec<f64>,
}

/// Dense complex third-order tensor with the same addressing as [`Tensor3`].
#[derive(Debug, Clone, PartialEq)]
pub struct CTensor3 {
    n1: usize,
    n2: usize,
    n3: usize,
    data: Vec<Complex64>,
}

fn check_dims(n1: usize, n2: usize, n3: usize) -> Result<()> {
    if n1 == 0 || n2 == 0 || n3 == 0 {
        return Err(Error::invalid(format!(
            "tensor dimensions must be positive, got {n1}x{n2}x{n3}"
        )));
    }
    Ok(())
}

/// Column index of the (remaining-mode) fiber in the mode-k unfolding.
///
/// Cyclic ordering: for mode 1 the pair (j, k) maps to j + k*n2, for mode 2
/// the pair (k, i) maps to k + i*n3, for mode 3 the pair (i, j) maps to
/// i + j*n1. All indices 0-based.
#[inline]
fn unfold_col(mode: usize, i: usize, j: usize, k: usize, dims: (usize, usize, usize)) -> usize {
    let (n1, n2, n3) = dims;
    let _ = n1;
    match mode {
        1 => j + k * n2,
        2 => k + i * n3,
        3 => i + j * dims.0,
        _ => unreachable!(),
    }
}

macro_rules! tensor_common {
    ($name:ident, $scalar:ty, $zero:expr) => {
        impl $name {
            pub fn zeros(n1: usize, n2: usize, n3: usize) -> Self {
                check_dims(n1, n2, n3).expect("tensor dimensions must be positive");
                Self {
                    n1,
                    n2,
                    n3,
                    data: vec![$zero; n1 * n2 * n3],
                }
            }

            /// Build from the canonical linearization buffer.
            pub fn from_vec(n1: usize, n2: usize, n3: usize, data: Vec<$scalar>) -> Result<Self> {
                check_dims(n1, n2, n3)?;
                if data.len() != n1 * n2 * n3 {
                    return Err(Error::dims(format!(
                        "payload length {} does not match {n1}x{n2}x{n3}",
                        data.len()
                    )));
                }
                Ok(Self { n1, n2, n3, data })
            }

            pub fn from_fn(
                n1: usize,
                n2: usize,
                n3: usize,
                mut f: impl FnMut(usize, usize, usize) -> $scalar,
            ) -> Self {
                let mut t = Self::zeros(n1, n2, n3);
                for k in 0..n3 {
                    for j in 0..n2 {
                        for i in 0..n1 {
                            t.data[i + j * n1 + k * n1 * n2] = f(i, j, k);
                        }
                    }
                }
                t
            }

            pub fn dims(&self) -> (usize, usize, usize) {
                (self.n1, self.n2, self.n3)
            }

            pub fn data(&self) -> &[$scalar] {
                &self.data
            }

            #[inline]
            pub fn get(&self, i: usize, j: usize, k: usize) -> $scalar {
                self.data[i + j * self.n1 + k * self.n1 * self.n2]
            }

            #[inline]
            pub fn set(&mut self, i: usize, j: usize, k: usize, v: $scalar) {
                self.data[i + j * self.n1 + k * self.n1 * self.n2] = v;
            }

            /// Frontal slice `A^(k)` as an `n1 x n2` matrix.
            pub fn frontal_slice(&self, k: usize) -> DMatrix<$scalar> {
                assert!(k < self.n3, "slice index {k} out of range (n3={})", self.n3);
                let len = self.n1 * self.n2;
                DMatrix::from_column_slice(self.n1, self.n2, &self.data[k * len..(k + 1) * len])
            }

            pub fn set_frontal_slice(&mut self, k: usize, m: &DMatrix<$scalar>) {
                assert!(k < self.n3, "slice index {k} out of range (n3={})", self.n3);
                assert_eq!((m.nrows(), m.ncols()), (self.n1, self.n2));
                let len = self.n1 * self.n2;
                self.data[k * len..(k + 1) * len].copy_from_slice(m.as_slice());
            }

            /// Lateral slice `j` as an `n1 x 1 x n3` tensor (one sample).
            pub fn lateral_slice(&self, j: usize) -> Self {
                assert!(j < self.n2, "lateral index {j} out of range (n2={})", self.n2);
                Self::from_fn(self.n1, 1, self.n3, |i, _, k| self.get(i, j, k))
            }

            pub fn set_lateral_slice(&mut self, j: usize, s: &Self) {
                assert_eq!((s.n1, s.n2, s.n3), (self.n1, 1, self.n3));
                for k in 0..self.n3 {
                    for i in 0..self.n1 {
                        self.set(i, j, k, s.get(i, 0, k));
                    }
                }
            }

            /// Lateral slice `j` flattened to an `n1 x n3` matrix
            /// (row i, column k = tube entry).
            pub fn lateral_matrix(&self, j: usize) -> DMatrix<$scalar> {
                assert!(j < self.n2, "lateral index {j} out of range (n2={})", self.n2);
                DMatrix::from_fn(self.n1, self.n3, |i, k| self.get(i, j, k))
            }

            /// Tube fiber at `(i, j)`.
            pub fn tube(&self, i: usize, j: usize) -> Vec<$scalar> {
                (0..self.n3).map(|k| self.get(i, j, k)).collect()
            }

            /// Mode-k matricization. Columns are mode-k fibers in the cyclic
            /// fiber ordering documented at the module level.
            pub fn unfold(&self, mode: usize) -> Result<DMatrix<$scalar>> {
                let (n1, n2, n3) = self.dims();
                let (rows, cols) = match mode {
                    1 => (n1, n2 * n3),
                    2 => (n2, n1 * n3),
                    3 => (n3, n1 * n2),
                    _ => return Err(Error::invalid(format!("mode must be 1, 2 or 3, got {mode}"))),
                };
                let mut m = DMatrix::from_element(rows, cols, $zero);
                for k in 0..n3 {
                    for j in 0..n2 {
                        for i in 0..n1 {
                            let v = self.get(i, j, k);
                            let c = unfold_col(mode, i, j, k, (n1, n2, n3));
                            let r = match mode {
                                1 => i,
                                2 => j,
                                _ => k,
                            };
                            m[(r, c)] = v;
                        }
                    }
                }
                Ok(m)
            }

            /// Inverse of [`unfold`](Self::unfold) for the given target dims.
            pub fn fold(
                m: &DMatrix<$scalar>,
                mode: usize,
                dims: (usize, usize, usize),
            ) -> Result<Self> {
                let (n1, n2, n3) = dims;
                check_dims(n1, n2, n3)?;
                let expect = match mode {
                    1 => (n1, n2 * n3),
                    2 => (n2, n1 * n3),
                    3 => (n3, n1 * n2),
                    _ => return Err(Error::invalid(format!("mode must be 1, 2 or 3, got {mode}"))),
                };
                if (m.nrows(), m.ncols()) != expect {
                    return Err(Error::dims(format!(
                        "matrix {}x{} cannot fold to {n1}x{n2}x{n3} along mode {mode}",
                        m.nrows(),
                        m.ncols()
                    )));
                }
                let mut t = Self::zeros(n1, n2, n3);
                for k in 0..n3 {
                    for j in 0..n2 {
                        for i in 0..n1 {
                            let c = unfold_col(mode, i, j, k, (n1, n2, n3));
                            let r = match mode {
                                1 => i,
                                2 => j,
                                _ => k,
                            };
                            t.set(i, j, k, m[(r, c)]);
                        }
                    }
                }
                Ok(t)
            }

            /// k-mode product: contract mode `mode` with the rows of `u`,
            /// so `unfold(result, mode) = u * unfold(self, mode)`.
            pub fn mode_product(&self, u: &DMatrix<$scalar>, mode: usize) -> Result<Self> {
                let nk = match mode {
                    1 => self.n1,
                    2 => self.n2,
                    3 => self.n3,
                    _ => return Err(Error::invalid(format!("mode must be 1, 2 or 3, got {mode}"))),
                };
                if u.ncols() != nk {
                    return Err(Error::dims(format!(
                        "matrix has {} columns but mode-{mode} dimension is {nk}",
                        u.ncols()
                    )));
                }
                let unfolded = self.unfold(mode)?;
                let product = u * unfolded;
                let dims = match mode {
                    1 => (u.nrows(), self.n2, self.n3),
                    2 => (self.n1, u.nrows(), self.n3),
                    _ => (self.n1, self.n2, u.nrows()),
                };
                Self::fold(&product, mode, dims)
            }

            pub fn scale(&self, s: $scalar) -> Self {
                Self {
                    n1: self.n1,
                    n2: self.n2,
                    n3: self.n3,
                    data: self.data.iter().map(|&v| v * s).collect(),
                }
            }

            pub fn add(&self, other: &Self) -> Result<Self> {
                if self.dims() != other.dims() {
                    return Err(Error::dims(format!(
                        "cannot add {:?} and {:?}",
                        self.dims(),
                        other.dims()
                    )));
                }
                Ok(Self {
                    n1: self.n1,
                    n2: self.n2,
                    n3: self.n3,
                    data: self
                        .data
                        .iter()
                        .zip(&other.data)
                        .map(|(&a, &b)| a + b)
                        .collect(),
                })
            }

            pub fn sub(&self, other: &Self) -> Result<Self> {
                if self.dims() != other.dims() {
                    return Err(Error::dims(format!(
                        "cannot subtract {:?} and {:?}",
                        self.dims(),
                        other.dims()
                    )));
                }
                Ok(Self {
                    n1: self.n1,
                    n2: self.n2,
                    n3: self.n3,
                    data: self
                        .data
                        .iter()
                        .zip(&other.data)
                        .map(|(&a, &b)| a - b)
                        .collect(),
                })
            }
        }
    };
}

tensor_common!(Tensor3, f64, 0.0);
tensor_common!(CTensor3, Complex64, Complex64::new(0.0, 0.0));

impl Tensor3 {
    /// Frobenius norm: sqrt of the sum of squared entries. Equal to the
    /// Frobenius norm of any unfolding.
    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn to_complex(&self) -> CTensor3 {
        CTensor3 {
            n1: self.n1,
            n2: self.n2,
            n3: self.n3,
            data: self.data.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    /// Elementwise maximum absolute difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dims(), other.dims());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl CTensor3 {
    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn real_part(&self) -> Tensor3 {
        Tensor3 {
            n1: self.n1,
            n2: self.n2,
            n3: self.n3,
            data: self.data.iter().map(|v| v.re).collect(),
        }
    }

    pub fn imag_part(&self) -> Tensor3 {
        Tensor3 {
            n1: self.n1,
            n2: self.n2,
            n3: self.n3,
            data: self.data.iter().map(|v| v.im).collect(),
        }
    }

    /// Largest absolute imaginary part over all entries.
    pub fn max_imag(&self) -> f64 {
        self.data.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    /// Face-wise product: slice i of the result is `A^(i) * B^(i)`.
    pub fn facewise(&self, other: &CTensor3) -> Result<CTensor3> {
        if self.n3 != other.n3 {
            return Err(Error::dims(format!(
                "face-wise product needs matching n3, got {} and {}",
                self.n3, other.n3
            )));
        }
        if self.n2 != other.n1 {
            return Err(Error::dims(format!(
                "face-wise product inner dims disagree: {} vs {}",
                self.n2, other.n1
            )));
        }
        let mut out = CTensor3::zeros(self.n1, other.n2, self.n3);
        for k in 0..self.n3 {
            let prod = self.frontal_slice(k) * other.frontal_slice(k);
            out.set_frontal_slice(k, &prod);
        }
        Ok(out)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dims(), other.dims());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}
