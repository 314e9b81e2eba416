use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid control basis: m={m} must satisfy 1 <= m <= p={p}")]
    InvalidBasis { m: usize, p: usize },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("integration blew up; last finite state at t={last_valid_t}")]
    BlowUp { last_valid_t: f64 },

    #[error("particle ensemble diverged at t={t}")]
    Divergence { t: f64 },

    #[error("{what} is not symmetric positive definite")]
    NotPositiveDefinite { what: &'static str },

    #[error("terminal ensemble covariance is singular (numerical rank {rank} of {dim}); increase the particle count or the jitter")]
    SingularCovariance { rank: usize, dim: usize },

    #[error("snapshot data has rank {achievable}, below the requested reduced dimension {requested}")]
    RankDeficient { achievable: usize, requested: usize },

    #[error("matrix logarithm inadmissible (eigenvalue {re}+{im}i on the closed negative real axis); refit with a smaller dt")]
    LogInadmissible { re: f64, im: f64 },

    #[error("Riccati solution escaped to infinity at t={t}")]
    FiniteEscape { t: f64 },

    #[error("Riccati iteration did not converge within horizon {horizon}")]
    NoConvergence { horizon: f64 },

    #[error("closed loop is not Hurwitz (max real eigenvalue {max_real})")]
    NotHurwitz { max_real: f64 },

    #[error("({pair}) fails the Kalman rank test: rank {rank} < {dim}")]
    RankTest {
        pair: &'static str,
        rank: usize,
        dim: usize,
    },

    #[error("input matrix is column-rank deficient; dependent columns {columns:?}")]
    PseudoInverse { columns: Vec<usize> },

    #[error("simulator does not disclose its input map b(x)")]
    InputMapHidden,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short stable identifier used in the CLI's one-line error output.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidBasis { .. } => "invalid-basis",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::Config(_) => "config",
            Error::BlowUp { .. } => "blow-up",
            Error::Divergence { .. } => "divergence",
            Error::NotPositiveDefinite { .. } => "not-positive-definite",
            Error::SingularCovariance { .. } => "singular-covariance",
            Error::RankDeficient { .. } => "rank-deficient",
            Error::LogInadmissible { .. } => "log-inadmissible",
            Error::FiniteEscape { .. } => "finite-escape",
            Error::NoConvergence { .. } => "no-convergence",
            Error::NotHurwitz { .. } => "not-hurwitz",
            Error::RankTest { .. } => "rank-test",
            Error::PseudoInverse { .. } => "pseudo-inverse",
            Error::InputMapHidden => "input-map-hidden",
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
        }
    }
}

pub(crate) fn check_dim(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { context, expected, got })
    }
}
