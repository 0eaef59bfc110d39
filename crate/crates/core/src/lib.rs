//! Extraction of metric and skewness tensors from two-point potentials, and
//! recovery of potentials from those tensors through a Hamilton–Jacobi
//! principal function.

pub mod diff;
pub mod error;
pub mod geometry;
pub mod hj;
pub mod jet;
pub mod models;
pub mod potential;
pub mod sampling;
pub mod tensor;

pub use diff::{
    derivative_table, mixed_partial, Analytic, BlackBox, DerivativeTable, DiffConfig, DiffMethod,
    PotentialExpr, Slot, SlotPattern, TwoPointFunction,
};
pub use error::{Error, Result};
pub use jet::{Jet, Scalar};
pub use tensor::{DenseTensor, Matrix, Point, SymTensor};
