//! Density estimation and the Weibull speed-reduction model.

mod density;
mod weibull;

use thiserror::Error;

pub use density::{density_level, local_densities, local_density, DEFAULT_DENSITY_RADIUS_CM};
pub use weibull::{
    fit_weibull_mle, reduction_from_uniform, sample_reduction, scale_mle_for_shape, weibull_pdf,
    WeibullParams, WeibullTable, DEFAULT_REDUCTION_CAP, DENSITY_LEVELS, SHAPE_RESIDUAL_TOL,
};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("invalid Weibull parameters a={a}, b={b} (both must be positive)")]
    InvalidParams { a: f64, b: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate sample")]
    DegenerateSample,
    #[error("shape equation did not converge")]
    NoConvergence,
    #[error("failed to read {path}: {message}")]
    Io { path: String, message: String },
    #[error("failed to parse {path}: {message}")]
    Parse { path: String, message: String },
}
