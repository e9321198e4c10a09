//! Transform-domain multilinear discriminant analysis for third-order
//! tensors.
//!
//! The crate is organized around a tensor-tensor product parameterized by an
//! invertible mode-3 linear transform (DFT, DCT-based, or user supplied). In
//! the transform domain the product reduces to independent per-slice matrix
//! products, which turns tensor discriminant analysis into a family of
//! independent matrix trace-ratio / ratio-trace problems:
//!
//! - [`tensor`]: dense third-order tensors, unfoldings, k-mode and face-wise
//!   products, structured block matrices, the TNS3 file format.
//! - [`transform`]: invertible mode-3 transforms and the `*_L` product.
//! - [`discriminant`]: scatter matrices and the two matrix-level solvers
//!   (Newton trace-ratio iteration, regularized generalized eigenproblem).
//! - [`tlda`]: training, projection, classification and evaluation of the
//!   transform-domain tensor LDA.
//! - [`mda`]: the alternating k-mode multilinear discriminant baseline.
//! - [`data`]: synthetic data, dataset files, splits and folds.

pub mod error;
pub mod rng;
pub mod tensor;
pub mod transform;
pub mod discriminant;
pub mod data;
pub mod tlda;
pub mod mda;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
pub use tensor::{CTensor3, Tensor3};
pub use transform::LinearTransform;
