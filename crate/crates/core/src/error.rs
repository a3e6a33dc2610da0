use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// |H| at or below the reduction tolerance; the special frame is undefined.
    #[error("degenerate mean curvature: |H| = {norm_h:e}")]
    DegenerateMeanCurvature { norm_h: f64 },

    #[error("umbilic point: |Å|² + 2γ|K⊥| vanishes")]
    UmbilicPoint,

    #[error("shape tensor is not symmetric in its tangent indices (normal direction {normal})")]
    AsymmetricTensor { normal: usize },

    #[error("pinching constant k = {k} must exceed 1/2")]
    InvalidK { k: f64 },

    #[error("grid resolution {grid} is below the minimum of {min} per axis")]
    ResolutionTooCoarse { grid: usize, min: usize },

    #[error("threshold bracket invalid: k_low non-positive = {low_ok}, k_high positive = {high_ok}")]
    BracketInvalid { low_ok: bool, high_ok: bool },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("rank-deficient jet fit at vertex {vertex}")]
    DegenerateNeighborhood { vertex: usize },

    #[error("non-manifold mesh: {0}")]
    NonManifoldMesh(String),

    #[error("time step rejected after {halvings} halvings")]
    StepTooLarge { halvings: u32 },

    #[error("no blowup detected: last snapshot max|A|² = {last_max_a2:e}, need ≥ {required:e}")]
    NoBlowupDetected { last_max_a2: f64, required: f64 },

    #[error("insufficient dynamic range: {samples} samples spanning {decades:.2} decades")]
    InsufficientDynamicRange { samples: usize, decades: f64 },

    #[error("ε_Z = {eps_z:e} is not positive")]
    EpsilonZNotPositive { eps_z: f64 },

    #[error("numerical failure at step {step}: {message}")]
    Numerical { step: usize, message: String },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
