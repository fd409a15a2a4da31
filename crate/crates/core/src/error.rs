use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("exponent must be a finite real >= 1, got {0}")]
    InvalidExponent(f64),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shift {shift} is not an integer multiple of the grid step {step}")]
    NonAlignedShift { shift: f64, step: f64 },

    #[error("frequency {frequency} is at or above the grid Nyquist bound {limit}")]
    AliasedFrequency { frequency: f64, limit: f64 },

    #[error("functions are defined on different grids")]
    GridMismatch,

    #[error("grid cells do not align with the integer cut points")]
    NonAlignedGrid,

    #[error("grid step 2^-{have} is too coarse, 2^-{need} is required")]
    GridTooCoarse { need: u32, have: u32 },

    #[error("support [{lo}, {hi}) lies outside the grid span [{start}, {end})")]
    SupportOutOfRange { lo: f64, hi: f64, start: f64, end: f64 },

    #[error("grid span [{start}, {end}) does not cover the window support [{lo}, {hi})")]
    GridTooSmall { lo: f64, hi: f64, start: f64, end: f64 },

    #[error("function is identically zero")]
    ZeroFunction,

    #[error("point (t = {t}, s = {s}) is not part of the system")]
    UnknownPoint { t: f64, s: f64 },

    #[error("invalid Haar index: {0}")]
    InvalidHaarIndex(String),

    #[error("infeasible block plan: {0}")]
    InfeasiblePlan(String),

    #[error("point set supplies {found} admissible translates, {needed} required")]
    InsufficientSpread { needed: usize, found: usize },

    #[error("disjointness certificate failed: {0}")]
    DisjointnessViolated(String),

    #[error("Neumann iteration did not reach tolerance in {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("{n} functions exceed the exact-enumeration limit of {max}")]
    TooManyFunctions { n: usize, max: usize },

    #[error("frequencies are not lacunary: {0}")]
    NotLacunary(String),

    #[error("intervals [{a_lo}, {a_hi}) and [{b_lo}, {b_hi}) overlap")]
    OverlappingIntervals { a_lo: f64, a_hi: f64, b_lo: f64, b_hi: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
