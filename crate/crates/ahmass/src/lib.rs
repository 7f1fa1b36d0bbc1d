//! Numerical laboratory for rotationally symmetric asymptotically hyperbolic
//! metrics: local mass functionals on annuli, the normalized Ricci-DeTurck
//! flow that mollifies rough metrics, the auxiliary parabolic cutoff
//! profiles whose drift the mass estimates rely on, and radial heat kernels
//! with Gaussian-bound fits.
//!
//! Everything is reduced to one radial dimension on the ball model: metrics
//! are carried as two frame profiles (alpha, beta) on a radial grid, and all
//! integrals, flows and kernels close on those profiles. See the individual
//! modules for the reductions and their cross-checks.

pub mod curvature;
pub mod cutoffs;
pub mod flow;
pub mod heatkernel;
pub mod hypgeom;
pub mod massfun;
pub mod metrics;
pub mod numerics;

use thiserror::Error as ThisError;

/// Unified error type for the laboratory.
#[derive(Debug, ThisError)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("grid/stencil error: {0}")]
    Grid(String),
    #[error("ordering error: {0}")]
    Ordering(String),
    #[error("regularity error: {0}")]
    Regularity(String),
    #[error("metric positivity error: {0}")]
    Positivity(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("normalization error: {0}")]
    Normalization(String),
    #[error("instability at t = {t}: {detail}")]
    Instability { t: f64, detail: String },
    #[error("sampling error: {0}")]
    Sampling(String),
    #[error("fit failure: {0}")]
    FitFailure(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
