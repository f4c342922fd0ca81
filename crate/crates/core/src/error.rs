use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: group index {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("expected {expected} coordinates, got {got}")]
    CoordinateCount { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("{0}")]
    Invalid(String),

    #[error("kernel is singular at the identity")]
    SingularKernel,

    #[error("basis vectors are linearly dependent (vector {index})")]
    DependentBasis { index: usize },

    #[error("basis is not isotropic: A(u{i}, u{j}) = {value}")]
    NonIsotropic { i: usize, j: usize, value: f64 },

    #[error("minimizer did not converge: achieved {achieved:e}, target {target:e}")]
    NonConvergence { achieved: f64, target: f64 },

    #[error("contraction check failed at iteration {iteration}: update ratio {ratio} exceeds {bound}")]
    NotContracting { iteration: usize, ratio: f64, bound: f64 },

    #[error("atom cap exceeded: {requested} atoms requested, cap is {cap}")]
    AtomCap { requested: u128, cap: usize },

    #[error("radius {radius:e} is below the resolution floor {floor:e}")]
    BelowResolution { radius: f64, floor: f64 },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::InvalidParameter { name, value, reason }
    }
}
