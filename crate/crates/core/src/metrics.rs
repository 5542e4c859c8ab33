//! Windowed counters and the derived performance measures.
//!
//! Calls are attributed to the window in which they arrive at a cell. An
//! outcome (admission, refusal, reneging) is counted in that window only if
//! it happens before the window closes; calls still waiting at the close are
//! reported as `still_queued`. Each window therefore satisfies
//! `arrived = admitted + refused + reneged + still_queued` exactly.

use serde::{Deserialize, Serialize};

use crate::config::{CallClass, NetworkConfig};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassTally {
    pub arrived: u64,
    pub admitted: u64,
    pub refused: u64,
    pub reneged: u64,
}

impl ClassTally {
    pub fn lost(&self) -> u64 {
        self.refused + self.reneged
    }

    pub fn resolved(&self) -> u64 {
        self.admitted + self.refused + self.reneged
    }

    pub fn merge(&mut self, other: &ClassTally) {
        self.arrived += other.arrived;
        self.admitted += other.admitted;
        self.refused += other.refused;
        self.reneged += other.reneged;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsWindow {
    pub start: f64,
    pub end: f64,
    pub classes: [ClassTally; 4],
    /// Calls of this window's cohort still waiting when it closed.
    pub still_queued: [u64; 4],
    /// Request-to-grant wait of each admitted handoff, without signalling delay.
    pub handoff_waits: Vec<f64>,
    /// Dwell expiries observed (mobility mode).
    pub handoff_requests: u64,
    /// Integral of busy channels over the window, in channel-seconds.
    pub busy_channel_seconds: f64,
}

impl MetricsWindow {
    pub fn new(start: f64, end: f64) -> Self {
        MetricsWindow {
            start,
            end,
            classes: [ClassTally::default(); 4],
            still_queued: [0; 4],
            handoff_waits: Vec::new(),
            handoff_requests: 0,
            busy_channel_seconds: 0.0,
        }
    }

    pub fn class(&self, class: CallClass) -> &ClassTally {
        &self.classes[class.index()]
    }

    pub fn class_mut(&mut self, class: CallClass) -> &mut ClassTally {
        &mut self.classes[class.index()]
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    /// Whether every class satisfies the cohort identity.
    pub fn is_conserved(&self) -> bool {
        CallClass::ALL
            .iter()
            .all(|&k| self.class(k).arrived == self.class(k).resolved() + self.still_queued[k.index()])
    }

    /// Commutative merge of another window's counters; the span becomes the union.
    pub fn merge(&mut self, other: &MetricsWindow) {
        self.start = self.start.min(other.start);
        self.end = self.end.max(other.end);
        for k in 0..4 {
            self.classes[k].merge(&other.classes[k]);
            self.still_queued[k] += other.still_queued[k];
        }
        self.handoff_waits.extend_from_slice(&other.handoff_waits);
        self.handoff_requests += other.handoff_requests;
        self.busy_channel_seconds += other.busy_channel_seconds;
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Lost fraction of one class (blocking or dropping depending on the class).
pub fn class_loss_probability(w: &MetricsWindow, class: CallClass) -> Option<f64> {
    let t = w.class(class);
    ratio(t.lost(), t.arrived)
}

fn loss_over(w: &MetricsWindow, classes: [CallClass; 2]) -> Option<f64> {
    let (lost, arrived) = classes
        .iter()
        .fold((0, 0), |(l, a), &k| (l + w.class(k).lost(), a + w.class(k).arrived));
    ratio(lost, arrived)
}

/// Fraction of originating arrivals refused or reneged.
pub fn blocking_probability(w: &MetricsWindow) -> Option<f64> {
    loss_over(w, [CallClass::RtO, CallClass::NrtO])
}

/// Fraction of handoff arrivals refused or reneged.
pub fn dropping_probability(w: &MetricsWindow) -> Option<f64> {
    loss_over(w, [CallClass::RtH, CallClass::NrtH])
}

/// Mean of (grant time − request time + `delta`) over admitted handoffs.
pub fn mean_handoff_latency(w: &MetricsWindow, delta: f64) -> Option<f64> {
    if w.handoff_waits.is_empty() {
        return None;
    }
    let sum: f64 = w.handoff_waits.iter().sum();
    Some(sum / w.handoff_waits.len() as f64 + delta)
}

/// Dwell-driven handoff requests per admitted originating call.
pub fn handoffs_per_call(w: &MetricsWindow) -> Option<f64> {
    let admitted = w.class(CallClass::RtO).admitted + w.class(CallClass::NrtO).admitted;
    ratio(w.handoff_requests, admitted)
}

/// Offered Erlangs per channel in one cell.
pub fn system_load(cfg: &NetworkConfig) -> f64 {
    let per_cell: f64 = cfg.arrival_rates.iter().sum::<f64>() * cfg.load_multiplier / cfg.num_cells as f64;
    per_cell * cfg.mean_call_duration / cfg.channels_per_cell as f64
}

/// Mean and sample standard deviation of the defined values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

impl MeanSd {
    pub fn standard_error(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            self.sd / (self.n as f64).sqrt()
        }
    }
}

pub fn mean_sd<I: IntoIterator<Item = Option<f64>>>(values: I) -> Option<MeanSd> {
    let xs: Vec<f64> = values.into_iter().flatten().collect();
    if xs.is_empty() {
        return None;
    }
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Some(MeanSd { mean, sd, n })
}
