//! Iterative regularisation of linear inverse problems in variable exponent
//! Lebesgue sequence spaces `ℓ^(pₙ)`.
//!
//! The crate is organised bottom-up:
//!
//! * [`varexp`]: modular functions, the Luxemburg norm, duality maps and the
//!   componentwise modular derivatives with their inverses.
//! * [`operators`]: dense matrices and a matched parallel-beam Radon projector,
//!   view-interleaved subset partitions and power-method norm estimation.
//! * [`solvers`]: Landweber, dual Landweber, modular gradient descent and
//!   their stochastic (subset) counterparts, plus the run loop and its log.
//! * [`exponents`]: pilot reconstructions and interpolated exponent maps.
//! * [`experiments`]: phantoms, noise models and image-quality metrics.
//! * [`io`]: CSV and 16-bit PGM readers and writers.

pub mod error;
pub mod experiments;
pub mod exponents;
pub mod io;
pub mod operators;
pub mod solvers;
pub mod varexp;

pub use error::{Error, Result};
pub use operators::{Geometry, LinearOperator, OperatorKind, PartitionedProblem, Subset, SubsetPartition};
pub use varexp::{DualElement, ExponentMap, Signal};
