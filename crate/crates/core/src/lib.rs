//! Discrete-event simulation of four-class channel reservation in a ring of
//! cellular base stations.
//!
//! Each cell splits its channels into dedicated pools for real-time and
//! non-real-time originating and handoff calls, plus a shared overflow pool.
//! A pluggable controller revisits the split at every control tick using the
//! blocking, dropping and handoff-latency measured in the window that just
//! ended. Closed-form Erlang-B and M/M/c/K oracles in [`analytic`] check the
//! simulator and give the optimum the learning controllers are measured
//! against.
//!
//! The oracles and the learning maths are generic over [`numeric::Scalar`];
//! the aliases below name the instantiations used in practice.

pub mod analytic;
pub mod channels;
pub mod config;
pub mod controllers;
pub mod error;
pub mod kernel;
pub mod metrics;
pub mod numeric;
pub mod sim;
pub mod traffic;

pub use config::{
    validate_config, validate_reservation, Call, CallClass, ControllerKind, HandoffMode, NetworkConfig,
    ReservationVector, RewardScale, Violation,
};
pub use controllers::{cost, ActionSet, ControllerState, CostWeights, ReservationController, TrainingState};
pub use error::{Error, Result};
pub use metrics::{blocking_probability, dropping_probability, mean_handoff_latency, system_load, MetricsWindow};
pub use numeric::{Real, Scalar};
pub use sim::{simulate, RunOutput, SimOptions, WindowRecord};

/// Exact rational used to reproduce hand-derived oracle values.
pub type Exact = num_rational::Ratio<i64>;

pub type Mlp32 = controllers::Mlp<f32>;
pub type Mlp64 = controllers::Mlp<f64>;
pub type Automaton64 = controllers::LearningAutomaton<f64>;
pub type ExactAutomaton = controllers::LearningAutomaton<Exact>;
pub type ExactCostWeights = CostWeights<Exact>;
