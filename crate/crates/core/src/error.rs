use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected d={expected}, found d={found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("analytic limit profile not available for variant {0}")]
    UnsupportedAnalytic(&'static str),

    #[error("field has no analytic covariance (empirical-only): {0}")]
    EmpiricalOnly(&'static str),

    #[error("field has no identifiable row limit: {0}")]
    NoLimit(String),

    #[error("restricted sets are not disjoint ({0} common points)")]
    NotDisjoint(usize),

    #[error("missing H(k) for lag {0:?} in covariance support")]
    MissingLag(Vec<i64>),

    #[error("degenerate limit: sigma^2 = {0} must be > 0")]
    Degenerate(f64),

    #[error("budget exceeded: {requested} sampled values > limit {limit}")]
    Budget { requested: u128, limit: u128 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by user-supplied configuration rather than
    /// resource limits or I/O.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch { .. }
                | Error::InvalidSpec(_)
                | Error::InvalidArgument(_)
                | Error::UnsupportedAnalytic(_)
                | Error::EmpiricalOnly(_)
                | Error::NoLimit(_)
                | Error::NotDisjoint(_)
                | Error::MissingLag(_)
                | Error::Degenerate(_)
                | Error::Json(_)
        )
    }
}
