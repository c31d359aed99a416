use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

/// Pipeline stage tag attached to errors raised inside `identify_channel`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Spectrum,
    Peaks,
    Matching,
    Projection,
    Astatism,
    OrderSelection,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Spectrum => "spectrum",
            Stage::Peaks => "peak detection",
            Stage::Matching => "frequency matching",
            Stage::Projection => "projection",
            Stage::Astatism => "astatism detection",
            Stage::OrderSelection => "order selection",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("omega_max {omega_max} is not below the sampling limit {nyquist}")]
    Aliasing { omega_max: f64, nyquist: f64 },

    #[error("plant polynomial vanishes at omega = {omega}")]
    SingularPlant { omega: f64 },

    #[error("coupling tone at {omega} rad/s coincides with an independent input tone")]
    AmbiguousCoupling { omega: f64 },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("cannot classify astatism for W = {re} {im:+}j")]
    UnclassifiableAstatism { re: f64, im: f64 },

    #[error("rank-deficient equation system at order {order}")]
    DegenerateFit { order: usize },

    #[error("{equations} real equations cannot determine {unknowns} unknowns")]
    Underdetermined { equations: usize, unknowns: usize },

    #[error("no candidate order meets the fit tolerance (residuals: {})", format_residuals(.residuals))]
    NoConsistentModel { residuals: Vec<(usize, f64)> },

    #[error("input and output share no frequencies")]
    NoCommonFrequencies,

    #[error("{stage}: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn format_residuals(residuals: &[(usize, f64)]) -> String {
    residuals
        .iter()
        .map(|(g, r)| format!("g={g}: {r:.3e}"))
        .collect::<Vec<_>>()
        .join(", ")
}

impl Error {
    pub(crate) fn at(self, stage: Stage) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost error, with stage tags stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
