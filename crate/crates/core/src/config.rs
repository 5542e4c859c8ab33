//! Domain types and configuration shared by every other module.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::controllers::CostWeights;
use crate::error::{Error, Result};

/// The four admission classes. Array-valued config fields (rates, queue
/// capacities, renege deadlines) are indexed in this order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CallClass {
    #[serde(rename = "RT_O")]
    RtO,
    #[serde(rename = "NRT_O")]
    NrtO,
    #[serde(rename = "RT_H")]
    RtH,
    #[serde(rename = "NRT_H")]
    NrtH,
}

impl CallClass {
    pub const ALL: [CallClass; 4] = [CallClass::RtO, CallClass::NrtO, CallClass::RtH, CallClass::NrtH];

    /// Order in which queues compete for a freed shared channel.
    pub const PROMOTION_ORDER: [CallClass; 4] =
        [CallClass::RtH, CallClass::NrtH, CallClass::RtO, CallClass::NrtO];

    pub const fn index(self) -> usize {
        match self {
            CallClass::RtO => 0,
            CallClass::NrtO => 1,
            CallClass::RtH => 2,
            CallClass::NrtH => 3,
        }
    }

    pub const fn is_handoff(self) -> bool {
        matches!(self, CallClass::RtH | CallClass::NrtH)
    }

    pub const fn is_real_time(self) -> bool {
        matches!(self, CallClass::RtO | CallClass::RtH)
    }

    /// Class a call takes when it crosses into a neighbouring cell.
    pub const fn on_handoff(self) -> CallClass {
        match self {
            CallClass::RtO | CallClass::RtH => CallClass::RtH,
            CallClass::NrtO | CallClass::NrtH => CallClass::NrtH,
        }
    }

    pub const fn label(self) -> &'static str {
        match self {
            CallClass::RtO => "RT_O",
            CallClass::NrtO => "NRT_O",
            CallClass::RtH => "RT_H",
            CallClass::NrtH => "NRT_H",
        }
    }
}

impl fmt::Display for CallClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Dedicated pool sizes of one cell. Whatever is left of the cell's
/// channels forms the shared overflow pool.
///
/// `noc` serves NRT_O, `roc` RT_O, `nhc` NRT_H and `rhc` RT_H.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct ReservationVector {
    pub noc: u32,
    pub roc: u32,
    pub nhc: u32,
    pub rhc: u32,
}

impl ReservationVector {
    pub const fn new(noc: u32, roc: u32, nhc: u32, rhc: u32) -> Self {
        ReservationVector { noc, roc, nhc, rhc }
    }

    pub const fn equal_split(channels: u32) -> Self {
        let q = channels / 4;
        ReservationVector::new(q, q, q, q)
    }

    pub const fn pool(&self, class: CallClass) -> u32 {
        match class {
            CallClass::NrtO => self.noc,
            CallClass::RtO => self.roc,
            CallClass::NrtH => self.nhc,
            CallClass::RtH => self.rhc,
        }
    }

    pub fn set_pool(&mut self, class: CallClass, size: u32) {
        match class {
            CallClass::NrtO => self.noc = size,
            CallClass::RtO => self.roc = size,
            CallClass::NrtH => self.nhc = size,
            CallClass::RtH => self.rhc = size,
        }
    }

    pub fn total(&self) -> u64 {
        self.noc as u64 + self.roc as u64 + self.nhc as u64 + self.rhc as u64
    }

    /// Size of the shared pool, or `None` when the reservation overflows.
    pub fn shared(&self, channels: u32) -> Option<u32> {
        (channels as u64).checked_sub(self.total()).map(|s| s as u32)
    }

    pub fn as_array(&self) -> [u32; 4] {
        [self.noc, self.roc, self.nhc, self.rhc]
    }
}

impl fmt::Display for ReservationVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{},{})", self.noc, self.roc, self.nhc, self.rhc)
    }
}

/// Checks that the pools fit into `channels`; returns the shared pool size.
pub fn validate_reservation(rv: &ReservationVector, channels: u32) -> std::result::Result<u32, Violation> {
    rv.shared(channels).ok_or_else(|| {
        Violation::new(
            "reservation",
            format!("sum exceeds C: {} > {}", rv.total(), channels),
        )
    })
}

/// One admission-seeking call.
#[derive(Debug, Clone, PartialEq)]
pub struct Call {
    pub id: u64,
    pub class: CallClass,
    pub cell: usize,
    pub created_at: f64,
    pub total_duration: f64,
    pub remaining_duration: f64,
    pub handoff_requested_at: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HandoffMode {
    /// Handoff calls arrive as independent Poisson streams.
    #[default]
    Exogenous,
    /// Handoffs emerge from exponential dwell times with mean `d / v`.
    Mobility,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    #[default]
    Static,
    La,
    Neural,
    Oracle,
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ControllerKind::Static => "static",
            ControllerKind::La => "la",
            ControllerKind::Neural => "neural",
            ControllerKind::Oracle => "oracle",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaParams {
    pub learning_rate: f64,
    /// Cost that maps to zero reward when `reward_scale` is `fixed`.
    pub j_scale: f64,
    pub reward_scale: RewardScale,
    /// Decay of the running mean cost used by `running_mean`.
    pub scale_decay: f64,
}

impl Default for LaParams {
    fn default() -> Self {
        LaParams { learning_rate: 0.1, j_scale: 1.0, reward_scale: RewardScale::RunningMean, scale_decay: 0.9 }
    }
}

/// How a window cost is turned into an automaton reward `max(0, 1 − J/scale)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardScale {
    /// `scale = j_scale`.
    Fixed,
    /// `scale` is an exponential moving average of the costs seen so far,
    /// so only windows cheaper than recent experience are rewarded.
    RunningMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeuralParams {
    pub hidden_units: usize,
    pub learning_rate: f64,
    pub baseline_decay: f64,
    /// Half-width of the uniform initialisation of the hidden layer.
    pub init_scale: f64,
}

impl Default for NeuralParams {
    fn default() -> Self {
        NeuralParams { hidden_units: 16, learning_rate: 0.01, baseline_decay: 0.9, init_scale: 0.1 }
    }
}

/// Which reservation policy runs at each control tick, and its knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    pub kind: ControllerKind,
    /// Reservation in force from t = 0; also the vector the static policy keeps.
    pub reservation: ReservationVector,
    pub weights: CostWeights,
    /// Lattice stride of the action set; `None` means `ceil(C / 12)`.
    pub stride: Option<u32>,
    /// Control windows per training episode.
    pub windows_per_episode: u32,
    pub la: LaParams,
    pub neural: NeuralParams,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            kind: ControllerKind::Static,
            reservation: ReservationVector::new(15, 15, 15, 15),
            weights: CostWeights::default(),
            stride: None,
            windows_per_episode: 10,
            la: LaParams::default(),
            neural: NeuralParams::default(),
        }
    }
}

/// Full description of one simulated network. Rates are network-wide per
/// class, indexed in [`CallClass::ALL`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub num_cells: usize,
    pub channels_per_cell: u32,
    pub arrival_rates: [f64; 4],
    pub mean_call_duration: f64,
    pub velocity: f64,
    pub cell_diameter: f64,
    pub handoff_mode: HandoffMode,
    pub queue_capacity: [u32; 4],
    /// `null` disables reneging for that class.
    pub renege_deadline: [Option<f64>; 4],
    pub signaling_delay: f64,
    pub control_period: f64,
    pub load_multiplier: f64,
    pub seed: u64,
    pub sim_duration: f64,
    pub warmup: f64,
    pub controller: ControllerConfig,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            num_cells: 15,
            channels_per_cell: 60,
            arrival_rates: [12.0, 20.0, 5.0, 10.0],
            mean_call_duration: 10.0,
            velocity: 20.0,
            cell_diameter: 1000.0,
            handoff_mode: HandoffMode::Exogenous,
            queue_capacity: [0; 4],
            renege_deadline: [Some(2.0), Some(10.0), Some(2.0), Some(10.0)],
            signaling_delay: 0.1,
            control_period: 60.0,
            load_multiplier: 1.0,
            seed: 1,
            sim_duration: 3600.0,
            warmup: 200.0,
            controller: ControllerConfig::default(),
        }
    }
}

impl NetworkConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json_str(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Arrival rate of one class in one cell, after load scaling.
    pub fn per_cell_rate(&self, class: CallClass) -> f64 {
        self.arrival_rates[class.index()] * self.load_multiplier / self.num_cells as f64
    }

    /// Offered Erlangs of each class in one cell.
    pub fn per_cell_offered_load(&self) -> [f64; 4] {
        CallClass::ALL.map(|k| self.per_cell_rate(k) * self.mean_call_duration)
    }

    pub fn mean_dwell(&self) -> f64 {
        self.cell_diameter / self.velocity
    }

    pub fn is_pure_loss(&self) -> bool {
        self.queue_capacity.iter().all(|&q| q == 0)
    }

    /// Lattice stride of the controllers' action set.
    pub fn action_stride(&self) -> u32 {
        self.controller
            .stride
            .unwrap_or_else(|| self.channels_per_cell.div_ceil(12).max(1))
    }
}

/// A broken configuration rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: &'static str,
    pub rule: String,
}

impl Violation {
    pub fn new(field: &'static str, rule: impl Into<String>) -> Self {
        Violation { field, rule: rule.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

fn finite_and(x: f64, ok: impl Fn(f64) -> bool) -> bool {
    x.is_finite() && ok(x)
}

/// Lists every broken rule of `cfg`; an empty list means the config is usable.
pub fn validate_config(cfg: &NetworkConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut check = |ok: bool, field: &'static str, rule: &str| {
        if !ok {
            out.push(Violation::new(field, rule));
        }
    };

    check(cfg.num_cells >= 1, "num_cells", "num_cells ≥ 1");
    check(cfg.channels_per_cell >= 1, "channels_per_cell", "channels_per_cell ≥ 1");
    check(
        cfg.arrival_rates.iter().all(|&r| finite_and(r, |r| r >= 0.0)),
        "arrival_rates",
        "all rates ≥ 0",
    );
    check(finite_and(cfg.mean_call_duration, |x| x > 0.0), "mean_call_duration", "mean_call_duration > 0");
    check(finite_and(cfg.velocity, |x| x > 0.0), "velocity", "velocity > 0");
    check(finite_and(cfg.cell_diameter, |x| x > 0.0), "cell_diameter", "cell_diameter > 0");
    check(
        cfg.renege_deadline.iter().flatten().all(|&d| finite_and(d, |d| d > 0.0)),
        "renege_deadline",
        "renege deadlines > 0",
    );
    check(finite_and(cfg.signaling_delay, |x| x >= 0.0), "signaling_delay", "signaling_delay ≥ 0");
    check(finite_and(cfg.control_period, |x| x > 0.0), "control_period", "control_period > 0");
    check(finite_and(cfg.load_multiplier, |x| x >= 0.0), "load_multiplier", "load_multiplier ≥ 0");
    check(finite_and(cfg.warmup, |x| x >= 0.0), "warmup", "warmup ≥ 0");
    check(
        cfg.sim_duration.is_finite() && cfg.sim_duration > cfg.warmup,
        "sim_duration",
        "sim_duration > warmup",
    );

    let ctl = &cfg.controller;
    let reservation = if cfg.channels_per_cell >= 1 {
        validate_reservation(&ctl.reservation, cfg.channels_per_cell).err()
    } else {
        None
    };
    if let Some(g) = ctl.stride {
        check(g >= 1, "controller.stride", "stride ≥ 1");
    }
    check(ctl.windows_per_episode >= 1, "controller.windows_per_episode", "windows_per_episode ≥ 1");
    check(
        ctl.weights.is_valid(),
        "controller.weights",
        "cost weights ≥ 0 and l_ref > 0",
    );
    check(
        ctl.la.learning_rate > 0.0 && ctl.la.learning_rate < 1.0,
        "controller.la.learning_rate",
        "0 < learning_rate < 1",
    );
    check(finite_and(ctl.la.j_scale, |x| x > 0.0), "controller.la.j_scale", "j_scale > 0");
    check(finite_and(ctl.la.scale_decay, |x| (0.0..1.0).contains(&x)), "controller.la.scale_decay", "0 ≤ scale_decay < 1");
    check(ctl.neural.hidden_units >= 1, "controller.neural.hidden_units", "hidden_units ≥ 1");
    check(
        finite_and(ctl.neural.learning_rate, |x| x > 0.0),
        "controller.neural.learning_rate",
        "learning_rate > 0",
    );
    check(
        (0.0..1.0).contains(&ctl.neural.baseline_decay),
        "controller.neural.baseline_decay",
        "0 ≤ baseline_decay < 1",
    );
    check(
        finite_and(ctl.neural.init_scale, |x| x >= 0.0),
        "controller.neural.init_scale",
        "init_scale ≥ 0",
    );
    out.extend(reservation);
    out
}

/// Like [`validate_config`] but as a `Result`, for callers that just need to stop.
pub fn ensure_valid(cfg: &NetworkConfig) -> Result<()> {
    let violations = validate_config(cfg);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(violations))
    }
}
