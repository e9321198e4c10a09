//! Structured block matrices built from frontal slices.
//!
//! These are the matrix-algebra images of a third-order tensor: `bcirc` for
//! the DFT-diagonalized product, [`mat_th`] for the cosine-transform product,
//! and `bdiag` for transform-domain tensors. At desk scale they serve as
//! oracles for the transform-domain identities, so they are stored dense.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{CTensor3, Tensor3};
use crate::error::{Error, Result};

/// Dense block matrix with uniform block dimensions.
#[derive(Debug, Clone)]
pub struct BlockMatrix {
    pub block_rows: usize,
    pub block_cols: usize,
    /// (rows, cols) of each block.
    pub block_dims: (usize, usize),
    pub entries: DMatrix<Complex64>,
}

impl BlockMatrix {
    fn zeros(block_rows: usize, block_cols: usize, r: usize, c: usize) -> Self {
        BlockMatrix {
            block_rows,
            block_cols,
            block_dims: (r, c),
            entries: DMatrix::from_element(block_rows * r, block_cols * c, Complex64::new(0.0, 0.0)),
        }
    }

    fn add_block(&mut self, p: usize, q: usize, m: &DMatrix<f64>, weight: f64) {
        let (r, c) = self.block_dims;
        for jj in 0..c {
            for ii in 0..r {
                self.entries[(p * r + ii, q * c + jj)] += Complex64::new(weight * m[(ii, jj)], 0.0);
            }
        }
    }

    fn set_block_complex(&mut self, p: usize, q: usize, m: &DMatrix<Complex64>) {
        let (r, c) = self.block_dims;
        for jj in 0..c {
            for ii in 0..r {
                self.entries[(p * r + ii, q * c + jj)] = m[(ii, jj)];
            }
        }
    }

    pub fn block(&self, p: usize, q: usize) -> DMatrix<Complex64> {
        let (r, c) = self.block_dims;
        self.entries.view((p * r, q * c), (r, c)).into_owned()
    }
}

/// Block circulant matrix: block `(i, j)` is the frontal slice
/// `A^(1 + ((i - j) mod n3))` (1-based), so the first block column stacks
/// `A^(1) ... A^(n3)` top to bottom.
pub fn bcirc(t: &Tensor3) -> BlockMatrix {
    let (n1, n2, n3) = t.dims();
    let slices: Vec<_> = (0..n3).map(|k| t.frontal_slice(k)).collect();
    let mut b = BlockMatrix::zeros(n3, n3, n1, n2);
    for p in 0..n3 {
        for q in 0..n3 {
            let s = (n3 + p - q) % n3;
            b.add_block(p, q, &slices[s], 1.0);
        }
    }
    b
}

/// Structured block matrix block-diagonalized by the mode-3 cosine transform
/// (`(M ⊗ I) mat_th(A) (M^{-1} ⊗ I) = bdiag(L(A))` for the DCT-based M).
///
/// Concretely: a symmetric block-Toeplitz part with block `(i, j)` equal to
/// `A^(|i-j|+1)`, plus the block-Hankel part whose anti-diagonal `d = i + j`
/// (1-based) carries `A^(d)` for `d <= n3`, zero at `d = n3 + 1`, and
/// `A^(2 n3 - d + 2)` beyond, the whole sum conjugated by the unit upper
/// bidiagonal `I + Z` (`Z` the upshift) that enters the transform definition.
pub fn mat_th(t: &Tensor3) -> BlockMatrix {
    let (n1, n2, n3) = t.dims();
    let slices: Vec<_> = (0..n3).map(|k| t.frontal_slice(k)).collect();

    // Toeplitz-plus-Hankel coefficient of slice s at block (p, q), 0-based.
    let th_coeff = |p: usize, q: usize, s: usize| -> f64 {
        let mut w = 0.0;
        if p.abs_diff(q) == s {
            w += 1.0;
        }
        // Hankel: anti-diagonal index d = p + q + 2 in 1-based terms.
        let d = p + q + 2;
        if d <= n3 && s == d - 1 {
            w += 1.0;
        }
        if d >= n3 + 2 && s + 1 == 2 * n3 - d + 2 {
            w += 1.0;
        }
        w
    };

    // Conjugation by S = I + Z: S[r][q] = 1 iff q == r or q == r + 1;
    // S^{-1}[p][r] = (-1)^(r - p) for r >= p.
    let mut b = BlockMatrix::zeros(n3, n3, n1, n2);
    #[allow(clippy::needless_range_loop)]
    for p in 0..n3 {
        for q in 0..n3 {
            for s in 0..n3 {
                let mut w = 0.0;
                for r in p..n3 {
                    let sign = if (r - p) % 2 == 0 { 1.0 } else { -1.0 };
                    let mut inner = th_coeff(r, q, s);
                    if q > 0 {
                        inner += th_coeff(r, q - 1, s);
                    }
                    w += sign * inner;
                }
                if w != 0.0 {
                    b.add_block(p, q, &slices[s], w);
                }
            }
        }
    }
    b
}

/// Block diagonal matrix of a (transform-domain) tensor. Off-diagonal blocks
/// are exactly zero.
pub fn bdiag(t: &CTensor3) -> BlockMatrix {
    let (n1, n2, n3) = t.dims();
    let mut b = BlockMatrix::zeros(n3, n3, n1, n2);
    for k in 0..n3 {
        let s = t.frontal_slice(k);
        b.set_block_complex(k, k, &s);
    }
    b
}

/// Inverse of [`bdiag`]: re-assemble the tensor from the diagonal blocks.
pub fn tensor_from_bdiag(b: &BlockMatrix, dims: (usize, usize, usize)) -> Result<CTensor3> {
    let (n1, n2, n3) = dims;
    if b.block_dims != (n1, n2) || b.block_rows != n3 || b.block_cols != n3 {
        return Err(Error::dims(format!(
            "block matrix {}x{} blocks of {:?} does not match tensor dims {dims:?}",
            b.block_rows, b.block_cols, b.block_dims
        )));
    }
    let mut t = CTensor3::zeros(n1, n2, n3);
    for k in 0..n3 {
        t.set_frontal_slice(k, &b.block(k, k));
    }
    Ok(t)
}
