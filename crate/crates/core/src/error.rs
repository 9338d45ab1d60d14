use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("zero polynomial has no well-defined roots")]
    ZeroPolynomial,

    #[error("zero on the unit circle at |z| = {modulus:.3e}; factor it out first")]
    OnCircleZero { modulus: f64 },

    #[error("determinant has a zero in the closed unit disc (|z| = {modulus:.6})")]
    NotMinimumPhase { modulus: f64 },

    #[error("no causal left inverse found (residual energy {residual:.3e})")]
    NotCausallyInvertible { residual: f64 },

    #[error("transfer function is rank deficient almost everywhere")]
    RankDeficient,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid model spec: {0}")]
    Spec(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("bandwidth {bandwidth} must be below T/4 for T = {len}")]
    Bandwidth { bandwidth: usize, len: usize },

    #[error("every filter row is zero: no common component")]
    NoCommonComponent,

    #[error("only {found} linearly independent rows available, q = {q} required")]
    RankDeficientPanel { found: usize, q: usize },

    #[error("block cannot be repaired: {0}")]
    Irreparable(String),

    #[error("routing error: {0}")]
    Routing(String),

    #[error("panel covariance is degenerate")]
    DegeneratePanel,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("ill-conditioned regression: {0}")]
    Conditioning(String),

    #[error("delta is zero, the idiosyncratic bound is undefined")]
    BoundUndefined,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
