use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A scenario or sample input violates one of its invariants. The first
    /// field names the offending key path.
    #[error("invalid input at `{path}`: {reason}")]
    InvalidInput { path: String, reason: String },

    /// The fundamental diagram is degenerate (`u_bar * rho_bar <= f_bar`).
    #[error("degenerate fundamental diagram: u_bar * rho_bar = {product} must exceed f_bar = {f_bar}")]
    DegenerateDiagram { product: f64, f_bar: f64 },

    /// No speed of the grid satisfies the incident capacity and jam bounds.
    #[error("edge {edge}: no admissible speed limit in the grid")]
    NoAdmissibleSpeed { edge: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// The LP engine gave up (iteration cap, lost precision, residual check).
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("model build failed: {0}")]
    ModelBuild(String),

    #[error("brute force refused: {count} profiles exceed the cap of {cap}")]
    EnumerationCap { count: u128, cap: u128 },

    #[error("no admissible speed profile has a finite certificate")]
    NoValidProfile,

    #[error("config parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code: 2 for bad input, 3 for an infeasible scenario,
    /// 4 for solver trouble.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NoAdmissibleSpeed { .. } | Error::NoValidProfile => 3,
            Error::Numerical(_) | Error::ModelBuild(_) => 4,
            _ => 2,
        }
    }

    pub(crate) fn invalid(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidInput {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
