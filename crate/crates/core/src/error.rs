use thiserror::Error;

/// Errors raised by the computational modules.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("mass {0} outside [1, 2]")]
    InvalidMass(f64),
    #[error("duplicate mode {0}")]
    DuplicateMode(i64),
    #[error("mode set is not admissible: {witness} and {} both present", -witness)]
    NotAdmissible { witness: i64 },
    #[error("mode {0} belongs to the tangential set")]
    TangentialMode(i64),
    #[error("cutoff mismatch: {left} vs {right}")]
    CutoffMismatch { left: i64, right: i64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("numeric overflow: {0}")]
    Overflow(String),
    #[error("non-finite value at m = {at}")]
    NonFinite { at: f64 },
    #[error("near-resonant quadruple {quad:?}: divisor {value:.3e} below gate {gate:.1e}")]
    GammaGate { quad: [i64; 4], value: f64, gate: f64 },
    #[error("blow-up at t = {time}: norm grew by factor {growth:.3}")]
    BlowUp { time: f64, growth: f64 },
    #[error("phase fit for mode {mode} incoherent: residual {rms:.3} rad")]
    PhaseIncoherence { mode: i64, rms: f64 },
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
