use thiserror::Error;

/// Errors raised by the analytics, optimizers and simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid system parameters: {0}")]
    InvalidParams(String),

    #[error("invalid belief distribution: {0}")]
    InvalidBelief(String),

    /// An effective arrival rate reached the service rate, so the waiting time is infinite.
    #[error("unstable regime: effective rate {rate} is not below service rate {mu}")]
    UnstableRegime { rate: f64, mu: f64 },

    #[error("operation requires exponential service (s2 = 2/mu^2), got s2 = {s2}")]
    NotMM1 { s2: f64 },

    #[error("threshold {xi} lies beyond the belief support (lambda_max = {lambda_max})")]
    OutOfSupport { xi: f64, lambda_max: f64 },

    #[error("no joining: zero surplus at an empty queue")]
    NoJoin,

    /// The P-vs-S difference does not change sign on the bracket. `identical` is set when it is
    /// zero throughout (degenerate belief).
    #[error("no crossing on [{lo}, {hi}] (identical = {identical})")]
    NoCrossing { lo: f64, hi: f64, identical: bool },

    #[error("objective is not unimodal: local maxima at p = {first:?} and p = {second:?}")]
    NonUnimodal { first: (f64, f64), second: (f64, f64) },

    #[error("root not bracketed on [{lo}, {hi}]")]
    NotBracketed { lo: f64, hi: f64 },

    #[error("fee {p} outside [0, {max}]")]
    FeeOutOfRange { p: f64, max: f64 },

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error("simulated utilization {utilization:.4} is saturated")]
    UnstableEffective { utilization: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors that mean "the inputs are wrong" rather than "the numerics failed".
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParams(_)
                | Error::InvalidBelief(_)
                | Error::NotMM1 { .. }
                | Error::OutOfSupport { .. }
                | Error::FeeOutOfRange { .. }
                | Error::InvalidConfig(_)
        )
    }
}
