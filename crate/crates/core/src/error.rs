use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid too large: {requested} product nodes exceeds budget of {budget}")]
    SizeBudget { requested: u128, budget: u128 },

    #[error("field contains a non-finite value at index {index}")]
    NotFinite { index: usize },

    #[error("not a probability density: {0}")]
    NotADensity(String),

    #[error("per-axis marginals disagree by {defect:.3e} (tolerance {tol:.3e})")]
    Symmetry { defect: f64, tol: f64 },

    #[error("reallocation did not converge: residual {residual:.3e} after {iterations} iterations (tolerance {tol:.3e})")]
    Convergence {
        iterations: usize,
        residual: f64,
        tol: f64,
    },

    #[error("kernel unresolvable on the grid: width {width:.3e} < {floor:.3e}")]
    Resolution { width: f64, floor: f64 },

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("smoothed density below floor ({value:.3e} < {floor:.3e}) where the regularized plan carries mass")]
    DivisionFloor { value: f64, floor: f64 },

    #[error("convolution leaked mass {leakage:.3e} past the box (limit {limit:.3e}); enlarge the box or shrink epsilon")]
    Leakage { leakage: f64, limit: f64 },

    #[error("diagonal schedule incomplete: level {failed_level:.3e} admits no start index; achieved levels {achieved:?}")]
    ScheduleIncomplete {
        failed_level: f64,
        achieved: Vec<f64>,
    },

    #[error("subsequence selection exhausted: deepest achieved level {deepest}; {reason}")]
    Truncation { deepest: usize, reason: String },

    #[error("value {value} outside [-1, 1] beyond clamp tolerance")]
    Range { value: f64 },

    #[error("perturbation amplitude too large: sqrt-density dips to {min:.3e}; reduce alpha0")]
    Amplitude { min: f64 },

    #[error("mass {mass:.3e} outside the safe core exceeds {limit:.3e}; target not supported well inside the box")]
    Support { mass: f64, limit: f64 },

    #[error("mass defect {defect:.3e} after correction exceeds {limit:.3e}")]
    MassDefect { defect: f64, limit: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("field file error: {0}")]
    FieldFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
