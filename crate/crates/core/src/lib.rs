//! Smoothing spline ANOVA regression for large samples.
//!
//! The crate fits penalized least-squares models in tensor-product
//! reproducing kernel spaces using a random subset of kernel basis functions,
//! and selects smoothing parameters by generalized cross-validation (full
//! iterative or skip), by a fixed order-based rate, or by fitting GCV on small
//! subsamples and extrapolating the smoothing parameter to the full sample
//! size.

pub mod data;
pub mod error;
pub mod kernel;
pub mod pipeline;
pub mod asp;
pub mod bench;
pub mod gcv;
pub mod solver;

pub use data::Dataset;
pub use error::{Error, Result};
pub use kernel::{enumerate_terms, AnovaTerm, Effect, ModelSpec, PredictorDomain, SubspaceLabel};
pub use asp::{AspConfig, Method, SelectionResult};
pub use pipeline::{select_and_fit, RunConfig, RunOutput};
pub use solver::{FitResult, SmoothingParams};
