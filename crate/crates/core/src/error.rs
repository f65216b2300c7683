//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CoreError>;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("mesh construction failed: {0}")]
    MeshConstruction(String),

    #[error("point ({x}, {y}) lies outside the meshed domain")]
    OutsideDomain { x: f64, y: f64 },

    #[error("point ({x}, {y}) is within {dist:.3e} of the boundary; need at least {margin:.3e} for a reliable gradient patch")]
    TooNearBoundary { x: f64, y: f64, dist: f64, margin: f64 },

    #[error("mesh file is malformed: {0}")]
    MeshFormat(String),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("coincident evaluation point and source in Green function")]
    CoincidentPoints,

    #[error("green evaluator has no mesh backing; numeric mode requires one")]
    NoNumericBacking,

    #[error("rho2 = {rho2} is outside the coercive range [0, {limit}); pass the supercritical override to proceed anyway")]
    SupercriticalRho { rho2: f64, limit: f64 },

    #[error("mean field iteration lost coercivity (energy fell below {floor:.3e}); rho2 = {rho2} is likely past the variational range")]
    CoercivityLoss { rho2: f64, floor: f64 },

    #[error("mean field Newton failed to converge: {0}")]
    MeanFieldDiverged(String),

    #[error("configuration invalid: {0}")]
    InvalidConfiguration(String),

    #[error("descent escaped the admissible configuration set: {0}")]
    EscapedConfigurationSet(String),

    #[error("critical point search stalled: {0}")]
    SearchStalled(String),

    #[error("Newton left the convergence basin: {0}")]
    BasinEscape(String),

    #[error("coupled Newton stalled: {0}")]
    NewtonStalled(String),

    #[error("continuation aborted at the first ladder rung: {0}")]
    FirstRungDiverged(String),

    #[error("scaling fit needs at least {need} samples spanning {decades} decades; got {got}")]
    InsufficientSamples { need: usize, decades: f64, got: usize },
}
