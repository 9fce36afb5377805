//! Error type shared across the simulator modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("lopsidedness {ell} incompatible with {n} peripheral spins (parity or range)")]
    BadLopsidedness { n: u32, ell: i32 },
    #[error("gate {0} requires an odd number of peripheral spins; got an even count")]
    EvenPeripheralCount(String),
    #[error("oracle limited to 4 peripheral spins; got {0}")]
    OracleTooLarge(u32),
    #[error("dwell {dwell_s} s violates Nyquist for span {span_hz} Hz")]
    NyquistViolation { dwell_s: f64, span_hz: f64 },
    #[error("peak integration windows overlap or are under-resolved: {0}")]
    WindowConfig(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;
