//! Periodic reservation policies.
//!
//! At every control tick each cell's controller is shown the window that
//! just closed, told what that window cost, and asked for the reservation of
//! the next window.

mod automaton;
mod mlp;
mod neural;

use serde::{Deserialize, Serialize};

pub use automaton::{la_update, reward_from_cost, LaController, LearningAutomaton};
pub use mlp::{softmax, Mlp};
pub use neural::{features, NeuralController, FEATURE_COUNT};

use crate::analytic::{optimum_for_config, partition_lattice};
use crate::config::{validate_reservation, CallClass, ControllerKind, NetworkConfig, ReservationVector};
use crate::error::{Error, Result};
use crate::kernel::{stream_for, Purpose, StreamKey};
use crate::metrics::{class_loss_probability, mean_handoff_latency, MetricsWindow};
use crate::numeric::Scalar;

/// Weights of the window cost. Defaults penalise handoff dropping above
/// blocking, and real-time above non-real-time traffic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostWeights<T = f64> {
    pub w_b_rt: T,
    pub w_b_nrt: T,
    pub w_d_rt: T,
    pub w_d_nrt: T,
    pub w_l: T,
    /// Latency at which the latency term saturates, in seconds.
    pub l_ref: T,
}

impl Default for CostWeights<f64> {
    fn default() -> Self {
        CostWeights { w_b_rt: 1.0, w_b_nrt: 1.0, w_d_rt: 10.0, w_d_nrt: 5.0, w_l: 1.0, l_ref: 1.0 }
    }
}

impl<T: Scalar> CostWeights<T> {
    pub fn class_weight(&self, class: CallClass) -> T {
        match class {
            CallClass::RtO => self.w_b_rt,
            CallClass::NrtO => self.w_b_nrt,
            CallClass::RtH => self.w_d_rt,
            CallClass::NrtH => self.w_d_nrt,
        }
    }

    /// `w_l · min(latency / l_ref, 1)`.
    pub fn latency_term(&self, latency: T) -> T {
        self.w_l * (latency / self.l_ref).min_of(T::one())
    }

    pub fn is_valid(&self) -> bool {
        let z = T::zero();
        [self.w_b_rt, self.w_b_nrt, self.w_d_rt, self.w_d_nrt, self.w_l].iter().all(|&w| w >= z)
            && self.l_ref > z
    }
}

/// Weighted window cost; undefined probabilities and latency contribute 0.
pub fn cost(w: &MetricsWindow, weights: &CostWeights, delta: f64) -> f64 {
    let mut j = 0.0;
    for class in CallClass::ALL {
        if let Some(p) = class_loss_probability(w, class) {
            j += weights.class_weight(class) * p;
        }
    }
    if let Some(latency) = mean_handoff_latency(w, delta) {
        j += weights.latency_term(latency);
    }
    j
}

/// Candidate reservations of the learning controllers: every four-way split
/// of `C` into multiples of the stride (with the remainder left shared when
/// the stride does not divide `C`), plus the equal split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSet {
    actions: Vec<ReservationVector>,
}

impl ActionSet {
    pub fn lattice(channels: u32, stride: u32) -> Result<Self> {
        if stride == 0 {
            return Err(Error::EmptyLattice { channels, stride });
        }
        let used = channels - channels % stride;
        let mut actions = partition_lattice(used, stride);
        actions.push(ReservationVector::equal_split(channels));
        actions.sort();
        actions.dedup();
        Ok(ActionSet { actions })
    }

    pub fn for_config(cfg: &NetworkConfig) -> Result<Self> {
        Self::lattice(cfg.channels_per_cell, cfg.action_stride())
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn get(&self, i: usize) -> ReservationVector {
        self.actions[i]
    }

    pub fn as_slice(&self) -> &[ReservationVector] {
        &self.actions
    }

    pub fn position(&self, rv: &ReservationVector) -> Option<usize> {
        self.actions.binary_search(rv).ok()
    }
}

/// Persistable learned state of one cell's controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControllerState {
    La {
        probabilities: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        running_cost: Option<f64>,
    },
    Neural { network: Mlp<f64>, baseline: Option<f64> },
}

/// Warm-start file written by training runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingState {
    pub controller: ControllerKind,
    pub episodes_completed: u64,
    pub actions: Vec<ReservationVector>,
    pub cells: Vec<ControllerState>,
}

impl TrainingState {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("state serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

pub trait ReservationController: Send {
    fn kind(&self) -> ControllerKind;

    /// Reservation for the next window.
    fn decide(&mut self, window: &MetricsWindow, current: ReservationVector, cfg: &NetworkConfig)
        -> ReservationVector;

    /// Cost of the window produced by the previous decision.
    fn notify_reward(&mut self, cost: f64);

    fn state(&self) -> Option<ControllerState> {
        None
    }
}

/// Keeps one configured vector forever.
#[derive(Debug, Clone)]
pub struct StaticController {
    reservation: ReservationVector,
}

impl StaticController {
    pub fn new(reservation: ReservationVector, channels: u32) -> Result<Self> {
        validate_reservation(&reservation, channels).map_err(|v| Error::InvalidConfig(vec![v]))?;
        Ok(StaticController { reservation })
    }
}

impl ReservationController for StaticController {
    fn kind(&self) -> ControllerKind {
        ControllerKind::Static
    }

    fn decide(&mut self, _: &MetricsWindow, _: ReservationVector, _: &NetworkConfig) -> ReservationVector {
        self.reservation
    }

    fn notify_reward(&mut self, _: f64) {}
}

/// Applies the analytic optimum of the configured loads from the first tick on.
#[derive(Debug, Clone)]
pub struct OracleController {
    optimum: ReservationVector,
    cost: f64,
}

impl OracleController {
    pub fn new(cfg: &NetworkConfig) -> Result<Self> {
        let (optimum, cost) = optimum_for_config(cfg)?;
        Ok(OracleController { optimum, cost })
    }

    pub fn optimum(&self) -> (ReservationVector, f64) {
        (self.optimum, self.cost)
    }
}

impl ReservationController for OracleController {
    fn kind(&self) -> ControllerKind {
        ControllerKind::Oracle
    }

    fn decide(&mut self, _: &MetricsWindow, _: ReservationVector, _: &NetworkConfig) -> ReservationVector {
        self.optimum
    }

    fn notify_reward(&mut self, _: f64) {}
}

/// Reservation in force from t = 0. The oracle starts at its optimum.
pub fn initial_reservation(cfg: &NetworkConfig) -> Result<ReservationVector> {
    match cfg.controller.kind {
        ControllerKind::Oracle => Ok(OracleController::new(cfg)?.optimum),
        _ => Ok(cfg.controller.reservation),
    }
}

/// One controller per cell, optionally warm-started from a training state.
pub fn build_controllers(
    cfg: &NetworkConfig,
    warm: Option<&TrainingState>,
) -> Result<Vec<Box<dyn ReservationController>>> {
    let kind = cfg.controller.kind;
    if let Some(state) = warm {
        if state.controller != kind {
            return Err(Error::StateMismatch(format!(
                "state holds a {} controller, config asks for {kind}",
                state.controller
            )));
        }
        if state.cells.len() != cfg.num_cells {
            return Err(Error::StateMismatch(format!(
                "state has {} cells, config has {}",
                state.cells.len(),
                cfg.num_cells
            )));
        }
    }
    let oracle = match kind {
        ControllerKind::Oracle => Some(OracleController::new(cfg)?),
        _ => None,
    };
    let actions = match kind {
        ControllerKind::La | ControllerKind::Neural => {
            let actions = ActionSet::for_config(cfg)?;
            if let Some(state) = warm {
                if state.actions != actions.as_slice() {
                    return Err(Error::StateMismatch("action set differs from the config's".into()));
                }
            }
            Some(actions)
        }
        _ => None,
    };

    let mut out: Vec<Box<dyn ReservationController>> = Vec::with_capacity(cfg.num_cells);
    for cell in 0..cfg.num_cells {
        let rng = stream_for(cfg.seed, StreamKey::new(cell, None, Purpose::Controller));
        let restored = warm.map(|s| &s.cells[cell]);
        let ctl: Box<dyn ReservationController> = match kind {
            ControllerKind::Static => {
                Box::new(StaticController::new(cfg.controller.reservation, cfg.channels_per_cell)?)
            }
            ControllerKind::Oracle => Box::new(oracle.clone().expect("built above")),
            ControllerKind::La => {
                let actions = actions.clone().expect("built above");
                let mut la = LaController::new(actions, cfg.controller.la, rng)?;
                if let Some(state) = restored {
                    la.restore(state)?;
                }
                Box::new(la)
            }
            ControllerKind::Neural => {
                let actions = actions.clone().expect("built above");
                let mut nn = NeuralController::new(actions, cfg.controller.neural, cfg.controller.weights, rng);
                if let Some(state) = restored {
                    nn.restore(state)?;
                }
                Box::new(nn)
            }
        };
        out.push(ctl);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window(class: CallClass, arrived: u64, refused: u64) -> MetricsWindow {
        let mut w = MetricsWindow::new(0.0, 1.0);
        let t = w.class_mut(class);
        t.arrived = arrived;
        t.refused = refused;
        t.admitted = arrived - refused;
        w
    }

    #[test]
    fn cost_cases() {
        let weights = CostWeights::default();
        assert_eq!(cost(&MetricsWindow::new(0.0, 1.0), &weights, 0.1), 0.0);

        let unit_nrt = CostWeights { w_b_nrt: 1.0, ..weights };
        assert!((cost(&window(CallClass::NrtO, 10, 1), &unit_nrt, 0.0) - 0.1).abs() < 1e-12);

        // one admitted handoff with zero wait contributes w_l·δ as latency; keep δ=0
        let mut w = window(CallClass::RtH, 50, 1);
        w.handoff_waits = vec![0.0; 49];
        assert!((cost(&w, &weights, 0.0) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn latency_term_saturates() {
        let weights = CostWeights::default();
        let mut w = MetricsWindow::new(0.0, 1.0);
        w.handoff_waits = vec![5.0];
        assert_eq!(cost(&w, &weights, 0.1), 1.0);
    }

    #[test]
    fn action_set_contains_equal_split() {
        let a = ActionSet::lattice(60, 5).unwrap();
        assert_eq!(a.len(), 455);
        assert!(a.position(&ReservationVector::new(15, 15, 15, 15)).is_some());
        let odd = ActionSet::lattice(13, 2).unwrap();
        assert!(!odd.is_empty());
        assert!(odd.as_slice().iter().all(|rv| validate_reservation(rv, 13).is_ok()));
        assert!(odd.position(&ReservationVector::equal_split(13)).is_some());
        assert!(ActionSet::lattice(4, 0).is_err());
    }

    #[test]
    fn static_ignores_window() {
        let cfg = NetworkConfig::default();
        let mut s = StaticController::new(ReservationVector::new(15, 15, 15, 15), 60).unwrap();
        let a = s.decide(&window(CallClass::RtO, 10, 3), ReservationVector::default(), &cfg);
        let b = s.decide(&MetricsWindow::new(0.0, 2.0), a, &cfg);
        assert_eq!(a, ReservationVector::new(15, 15, 15, 15));
        assert_eq!(a, b);
        assert!(StaticController::new(ReservationVector::new(61, 0, 0, 0), 60).is_err());
    }

    fn toy(rates: [f64; 4]) -> NetworkConfig {
        let mut cfg = NetworkConfig {
            num_cells: 1,
            channels_per_cell: 4,
            arrival_rates: rates,
            mean_call_duration: 1.0,
            signaling_delay: 0.0,
            ..Default::default()
        };
        cfg.controller.kind = ControllerKind::Oracle;
        cfg.controller.weights = CostWeights { w_b_rt: 1.0, w_b_nrt: 1.0, w_d_rt: 1.0, w_d_nrt: 1.0, w_l: 0.0, l_ref: 1.0 };
        cfg
    }

    #[test]
    fn oracle_symmetric_toy() {
        let o = OracleController::new(&toy([1.0, 1.0, 0.0, 0.0])).unwrap();
        let (rv, c) = o.optimum();
        assert_eq!(rv, ReservationVector::new(2, 2, 0, 0));
        assert!((c - 0.4).abs() < 1e-12);
    }

    #[test]
    fn oracle_starves_silent_class() {
        let o = OracleController::new(&toy([1.0, 2.0, 0.0, 0.5])).unwrap();
        assert_eq!(o.optimum().0.pool(CallClass::RtH), 0);
    }

    #[test]
    fn oracle_refuses_queues() {
        let mut cfg = toy([1.0, 1.0, 0.0, 0.0]);
        cfg.queue_capacity = [1, 0, 0, 0];
        assert!(OracleController::new(&cfg).is_err());
        assert!(build_controllers(&cfg, None).is_err());
    }
}
