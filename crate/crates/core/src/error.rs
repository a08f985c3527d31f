use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LabError {
    #[error("point outside the phase domain: {0}")]
    Domain(String),
    #[error("jet order {0} is not supported (maximum 4)")]
    UnsupportedOrder(usize),
    #[error("degenerate phase: Gauss map norm {0:e} below threshold")]
    Degenerate(f64),
    #[error("singular H2 matrix: Frobenius norm {0:e}")]
    SingularH2(f64),
    #[error("curve trace failed at t = {t}: {reason}")]
    Trace { t: f64, reason: String },
    #[error("ill-conditioned Newton Jacobian (condition number {0:e})")]
    IllConditioned(f64),
    #[error("map is not a diffeomorphism: Jacobian determinant {0:e}")]
    NotDiffeomorphism(f64),
    #[error("invalid straightening anchor: {0}")]
    InvalidAnchor(String),
    #[error("inconsistent (A, B, c) data: residual {0:e}")]
    InconsistentData(f64),
    #[error("cannot extract (A, B, c): {0}")]
    Extraction(String),
    #[error("ambiguous cubic root at s = {0}")]
    AmbiguousRoot(f64),
    #[error("pencil parameter s = {0} hits the pole s = t0")]
    Pole(f64),
    #[error("child tube at distance {distance} lies outside the parent ball of radius {rho}")]
    Containment { distance: f64, rho: f64 },
    #[error("grid too coarse: voxel size {voxel} against tube radius {delta}")]
    Resolution { voxel: f64, delta: f64 },
    #[error("tubes have different radii ({0} vs {1})")]
    MismatchedDelta(f64, f64),
    #[error("invalid configuration: {0}")]
    Config(String),
}
