use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("integration step too large for {variable} at t = {time:e} s (relative change {relative_change:.3})")]
    StepSize { variable: &'static str, time: f64, relative_change: f64 },

    #[error("diffusion matrix not positive semidefinite at t = {time:e} s")]
    Diffusion { time: f64 },

    #[error("digitizer model error: {0}")]
    Model(String),

    #[error("codes never observed in calibration (or below the sample threshold): {missing:?}")]
    MissingCodes { missing: Vec<u32> },

    #[error("stream too short: {len} samples, need at least {required}")]
    StreamTooShort { len: usize, required: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("autocorrelation outside the perturbative regime: |ac[{lag}]| = {value:e} >= ac[0]/2 = {half:e}")]
    NonPerturbative { lag: usize, value: f64, half: f64 },

    #[error("impulse response recovery did not converge (residual {residual:e} after order {order})")]
    NonConvergent { residual: f64, order: usize },

    #[error("singular linear system (condition estimate {condition:e})")]
    Singular { condition: f64 },

    #[error("quadrature did not converge: achieved error {achieved:e}, requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("inconsistent bit depths: {0}")]
    BitDepth(String),

    #[error("linear program error: {0}")]
    Lp(String),

    #[error("extractor output length {requested} exceeds the admissible maximum {max}")]
    OutputTooLong { requested: u64, max: u64 },

    #[error("format error: {0}")]
    Format(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
        /// Manifest of the artifacts written before the failure.
        partial_manifest: Option<std::path::PathBuf>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}
