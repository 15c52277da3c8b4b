//! Adaptive anisotropic total variation (A²TV) on 2-D scalar grids.
//!
//! The crate provides the discrete calculus (`grid`), anisotropy tensor
//! construction (`tensor`), ROF solvers and gradient flows (`solver`),
//! the nonlinear spectral transform (`spectral`), synthetic shape
//! rasterization with measured geometry (`shapes`), eigenfunction
//! diagnostics (`eigen`) and two guided-regularization applications
//! (`apps`).
//!
//! All computations use unit pixel spacing and 64-bit floats. Values are
//! immutable once constructed; every public operation is a pure function
//! of its inputs and safe to call concurrently.

pub mod agrd;
pub mod apps;
pub mod eigen;
pub mod error;
pub mod grid;
pub mod shapes;
pub mod solver;
pub mod spectral;
pub mod tensor;

pub use error::{AnisoError, Result};
pub use grid::{ScalarGrid, TensorField, VectorField};
