use thiserror::Error;

use crate::config::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {}", join(.0))]
    InvalidConfig(Vec<Violation>),

    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },

    #[error("cannot parse: {0}")]
    Parse(String),

    #[error("event at t={event} scheduled before clock t={clock}")]
    PastEvent { event: f64, clock: f64 },

    #[error("rate must be positive, got {0}")]
    NonPositiveRate(f64),

    #[error("releasing an empty pool in cell {cell}")]
    EmptyPoolRelease { cell: usize },

    #[error("call {call} is not queued in class {class}")]
    NotQueued { call: u64, class: crate::CallClass },

    #[error("invalid probability vector: {0}")]
    InvalidDistribution(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("outside the analytic validity domain: {0}")]
    OutsideDomain(String),

    #[error("empty action lattice for C={channels}, stride {stride}")]
    EmptyLattice { channels: u32, stride: u32 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("controller state mismatch: {0}")]
    StateMismatch(String),
}

fn join(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}
