use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised across the simulator and analysis chain.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("loop layout has no fiber segments")]
    EmptyLayout,

    #[error("loss point at {position_km} km lies outside the loop [0, {length_km}] km")]
    LossPointOutOfRange { position_km: f64, length_km: f64 },

    #[error("time grid covers {covered_s:e} s but the round-trip horizon needs {required_s:e} s")]
    GridTooShort { covered_s: f64, required_s: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("pattern is not periodic on its grid: {0}")]
    NonPeriodic(String),

    #[error("pulse width {width_s:e} s cannot be resolved on a grid with dt = {dt_s:e} s")]
    UnresolvableWidth { width_s: f64, dt_s: f64 },

    #[error("burst design infeasible: {0}")]
    InfeasibleBurst(String),

    #[error("bandwidth {bandwidth_hz:e} Hz exceeds the grid Nyquist frequency {nyquist_hz:e} Hz")]
    BandwidthAboveNyquist { bandwidth_hz: f64, nyquist_hz: f64 },

    #[error("per-sample detection probability {max_probability:e} exceeds 0.1; refine the grid")]
    GridTooCoarse { max_probability: f64 },

    #[error("zero fringe amplitude (I_max = I_min)")]
    ZeroFringe,

    #[error("phase jump of {jump_rad:.3} rad at sample {index} exceeds pi/2")]
    PhaseJump { index: usize, jump_rad: f64 },

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("fit did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("span {span_s:e} s is too short for a resolution bandwidth of {rbw_hz} Hz")]
    SpanTooShort { span_s: f64, rbw_hz: f64 },

    #[error("dark/dead-time correction produced negative rates in {fraction:.1}% of bins")]
    InvalidCorrection { fraction: f64 },

    #[error("no significant burst periodicity found (peak power {peak:.2}, threshold {threshold:.2})")]
    NoPeak { peak: f64, threshold: f64 },

    #[error("no events inside the detection windows")]
    EmptyWindows,

    #[error("scenario parse error at line {line}, column {column} (field `{path}`): {message}")]
    ScenarioParse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("scenario field `{field}` is invalid: {reason}")]
    ScenarioInvalid { field: String, reason: String },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
