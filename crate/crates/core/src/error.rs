use thiserror::Error;

pub type Result<T> = std::result::Result<T, LtmError>;

#[derive(Debug, Error)]
pub enum LtmError {
    #[error("invalid shear parameter alpha = {alpha}: {reason}")]
    InvalidAlpha { alpha: f64, reason: &'static str },

    /// The construction is only derived for 2 < alpha < 3.
    #[error("alpha = {alpha} lies outside the strict window (2, 3) required by {what}")]
    ExtendedDomain { alpha: f64, what: &'static str },

    #[error("point ({x}, {y}) is not in {region}")]
    OutsideDomain { x: f64, y: f64, region: &'static str },

    /// An orbit came within the ambiguity band of a region boundary, so the
    /// per-step Jacobian is not determined.
    #[error("orbit is singular at step {step}: ({x}, {y}) lies on a region boundary")]
    SingularOrbit { step: usize, x: f64, y: f64 },

    #[error("invalid index {k} for {family}")]
    InvalidIndex { family: &'static str, k: i64 },

    #[error("degenerate segment: endpoints coincide at ({x}, {y})")]
    DegenerateSegment { x: f64, y: f64 },

    #[error("polygon is not convex or has zero area")]
    InvalidPolygon,

    #[error("orbit of the period-4 point does not follow the expected cell pattern at step {step}: expected {expected}, found {found}")]
    OrbitPatternMismatch {
        step: usize,
        expected: String,
        found: String,
    },

    #[error("no sign change for {id} on [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    NoBracket {
        id: &'static str,
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("construction failed: {0}")]
    ConstructionFailure(String),

    #[error("k_max = {k_max} is too small to close the partition (need at least 5)")]
    PartitionTooSmall { k_max: u32 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
