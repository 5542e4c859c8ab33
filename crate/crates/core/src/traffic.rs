//! Arrival processes, holding times, dwell times and handoff targets.

use rand::Rng;

use crate::config::{Call, CallClass, HandoffMode, NetworkConfig};
use crate::error::{Error, Result};
use crate::kernel::exp_sample;

/// Poisson arrival source of one class in one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficSource {
    pub cell: usize,
    pub class: CallClass,
    pub rate: f64,
}

impl TrafficSource {
    pub fn new(cell: usize, class: CallClass, rate: f64) -> Self {
        TrafficSource { cell, class, rate }
    }

    /// Every source active under `cfg`. Handoff classes only have their
    /// own arrival process in exogenous mode.
    pub fn all(cfg: &NetworkConfig) -> Vec<TrafficSource> {
        let mut out = Vec::new();
        for cell in 0..cfg.num_cells {
            for class in CallClass::ALL {
                if class.is_handoff() && cfg.handoff_mode == HandoffMode::Mobility {
                    continue;
                }
                out.push(TrafficSource::new(cell, class, cfg.per_cell_rate(class)));
            }
        }
        out
    }

    /// Time to the next arrival, or `None` for a silent source.
    pub fn next_interarrival<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<f64> {
        if self.rate > 0.0 {
            exp_sample(rng, self.rate).ok()
        } else {
            None
        }
    }
}

/// Hands out calls with strictly increasing ids.
#[derive(Debug, Clone)]
pub struct CallFactory {
    next_id: u64,
    service_rate: f64,
}

impl CallFactory {
    pub fn new(mean_call_duration: f64) -> Result<Self> {
        if !(mean_call_duration > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "mean call duration must be positive, got {mean_call_duration}"
            )));
        }
        Ok(CallFactory { next_id: 0, service_rate: 1.0 / mean_call_duration })
    }

    pub fn draw_call<R: Rng + ?Sized>(&mut self, class: CallClass, cell: usize, now: f64, rng: &mut R) -> Call {
        let id = self.next_id;
        self.next_id += 1;
        let duration = exp_sample(rng, self.service_rate).expect("service rate checked at construction");
        Call {
            id,
            class,
            cell,
            created_at: now,
            total_duration: duration,
            remaining_duration: duration,
            handoff_requested_at: class.is_handoff().then_some(now),
        }
    }

    pub fn issued(&self) -> u64 {
        self.next_id
    }
}

/// Time spent in one cell before crossing into a neighbour.
pub fn draw_dwell<R: Rng + ?Sized>(cfg: &NetworkConfig, rng: &mut R) -> Result<f64> {
    if !(cfg.velocity > 0.0) || !(cfg.cell_diameter > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "dwell needs positive velocity and diameter, got v={} d={}",
            cfg.velocity, cfg.cell_diameter
        )));
    }
    exp_sample(rng, cfg.velocity / cfg.cell_diameter)
}

/// One of the two ring neighbours of `cell`, uniformly; `None` for a single cell.
pub fn handoff_target<R: Rng + ?Sized>(cell: usize, num_cells: usize, rng: &mut R) -> Option<usize> {
    if num_cells < 2 {
        return None;
    }
    Some(if rng.gen::<bool>() {
        (cell + 1) % num_cells
    } else {
        (cell + num_cells - 1) % num_cells
    })
}
