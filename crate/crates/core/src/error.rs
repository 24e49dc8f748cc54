use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid demand model: {0}")]
    InvalidDemand(String),

    #[error("price {price} outside [{lo}, {hi}]")]
    PriceOutOfRange { price: f64, lo: f64, hi: f64 },

    #[error("invalid feasible box: {0}")]
    InvalidBox(String),

    #[error("unstable system: lambda={lambda} >= mu={mu}")]
    Unstable { lambda: f64, mu: f64 },

    #[error("interval [{t0}, {t1}] outside cycle [0, {duration}]")]
    IntervalOutOfRange { t0: f64, t1: f64, duration: f64 },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("unknown preset `{name}`; available: {available}")]
    UnknownPreset { name: String, available: String },

    #[error("replication with seed {seed} failed: {source}")]
    Replication {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
