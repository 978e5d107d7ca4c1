//! Simulator for uplink cloud radio access networks in which remote radio
//! heads compress their received signals before forwarding them over
//! capacity-limited fronthaul links, and a central unit jointly recovers a
//! sparse multi-user transmit vector from the aggregated compressed
//! measurements.
//!
//! The crate is organised as a pipeline:
//!
//! * [`scenario`] — cell geometry, large/small-scale channel draws, sparse
//!   transmit signals, and per-radio-head received signals.
//! * [`compression`] — random-phase fronthaul compression matrices and a
//!   uniform scalar quantizer for the compressed samples.
//! * [`recovery`] — the proposed three-step recovery algorithm
//!   (basis pursuit → greedy support detection → zero forcing) together with
//!   linear MMSE and orthogonal-matching-pursuit baselines.
//! * [`analysis`] — sum-capacity evaluation of the recovered streams,
//!   brute-force restricted-isometry estimation, and closed-form
//!   performance/probability bound evaluators.
//! * [`pipeline`] — glue that turns a trial configuration plus a seed tree
//!   into a ready-to-solve measurement system.
//! * [`harness`] — Monte Carlo experiment driver, CSV/JSON emission, TOML
//!   configuration parsing, and the command-line entry point.
//!
//! Supporting utilities live in [`rng`] (deterministic seed derivation) and
//! [`linalg`] (complex pseudoinverse, Hermitian spectral norm, incremental
//! orthonormal bases).
//!
//! Every random quantity is drawn from named ChaCha streams derived from a
//! single master seed, so any experiment is exactly reproducible and all
//! schemes within a trial observe identical channel, signal, and noise
//! realizations.

pub mod analysis;
pub mod compression;
pub mod harness;
pub mod linalg;
pub mod pipeline;
pub mod recovery;
pub mod rng;
pub mod scenario;

/// Complex scalar used throughout the simulator.
pub type C64 = num_complex::Complex<f64>;

/// Crate-wide error type.
///
/// `Config` and `Domain` describe invalid user input (rejected before any
/// computation runs); the remaining variants describe runtime failures.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid configuration value or malformed configuration file.
    #[error("configuration error: {0}")]
    Config(String),

    /// Incompatible matrix/vector dimensions passed to an operation.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Argument outside the mathematical domain of a closed-form evaluator.
    #[error("domain error: {0}")]
    Domain(String),

    /// Iterative solver exhausted its iteration budget without reaching the
    /// requested tolerance; the affected trial must be discarded.
    #[error("solver failed to converge: {0}")]
    SolverDiverged(String),

    /// Exhaustive restricted-isometry search would exceed the support-count
    /// guard; use the sampled estimator instead.
    #[error("support enumeration too large: {0}")]
    TooManySupports(String),

    /// Filesystem or serialization failure while emitting results.
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
