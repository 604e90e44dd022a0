//! Worst-case low-rank approximation across multiple domains.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod completion;
pub mod datagen;
pub mod error;
pub mod evaluation;
pub mod linalg;
pub mod losses;
pub mod preprocess;
mod optim;
pub mod rng;
pub mod scalar;
pub mod solvers;

pub use error::{Error, Result};
pub use losses::LossKind;
pub use rng::Seed;
pub use scalar::Real;

pub type CovarianceMatrix = linalg::CovarianceMatrix<f64>;
pub type Frame = linalg::Frame<f64>;
pub type Spectrum = linalg::Spectrum<f64>;
pub type DomainSpec = losses::DomainSpec<f64>;
pub type DomainCollection = losses::DomainCollection<f64>;
pub type FitResult = solvers::FitResult<f64>;
