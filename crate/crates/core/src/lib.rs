//! Consistency auditing for repeated runs of a stochastic model.
//!
//! Inputs are document × run grids of labels, values or embeddings. The crate
//! computes inter-run agreement metrics, builds aggregated synthetic runs,
//! compares model consistency with human annotators, and simulates how
//! run-to-run variation in a regressor carries into OLS inference.
//!
//! Numeric kernels are generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix them to `f64`.

pub mod aggregation;
pub mod categorical;
pub mod continuous;
pub mod error;
pub mod human;
pub mod rng;
pub mod run_matrix;
pub mod scalar;
pub mod simulation;
pub mod stats;
pub mod text;

pub use error::{AuditError, Result};
pub use run_matrix::{CategoricalRunMatrix, LabelId, LabelScheme, RunPair};
pub use scalar::Scalar;

pub type ContinuousMatrix = run_matrix::ContinuousRunMatrix<f64>;
pub type EmbeddingSet = run_matrix::EmbeddingRunSet<f64>;
pub type Stats = stats::DistributionStats<f64>;
pub type ContinuousSummary = continuous::ContinuousSummary<f64>;
pub type ContinuousCurvePoint = aggregation::ContinuousCurvePoint<f64>;
pub type SimilaritySummary = text::SimilaritySummary<f64>;
pub type RegressionResult = simulation::ols::RegressionResult<f64>;
