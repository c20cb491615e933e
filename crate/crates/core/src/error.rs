use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("m_I = {m_i} is outside the nuclear manifold of I = {nuclear_i}")]
    InvalidNuclearProjection { m_i: f64, nuclear_i: f64 },

    #[error("degenerate point: gap and bias both vanish (m_I = {m_i}, B = {field} T)")]
    DegeneratePoint { m_i: f64, field: f64 },

    #[error("temperature must be positive, got {0} K")]
    NonPositiveTemperature(f64),

    #[error("populations invalid: {0}")]
    InvalidPopulations(String),

    #[error("{0} requires Boltzmann populations")]
    RequiresBoltzmann(&'static str),

    #[error("heat capacity vanishes at B = {field} T, T = {temperature} K")]
    ZeroHeatCapacity { field: f64, temperature: f64 },

    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("no peaks found above prominence {0}")]
    NoPeaks(f64),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("{path}: {reason}")]
    Io { path: String, reason: String },

    #[error("{path}:{line}: {reason}")]
    Config {
        path: String,
        line: usize,
        reason: String,
    },

    #[error("{path}:{line}: {reason}")]
    Csv {
        path: String,
        line: usize,
        reason: String,
    },
}
