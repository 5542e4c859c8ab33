use std::path::Path;

use cellres_core::analytic::{cost_for_config, optimum_for_config};
use cellres_core::{NetworkConfig, ReservationVector};
use serde::Serialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Optimum {
    pub reservation: ReservationVector,
    pub cost: f64,
    pub stride: u32,
    /// Cost of the equal split, when it lies on the lattice.
    pub equal_split_cost: Option<f64>,
}

pub fn optimum(cfg: &NetworkConfig) -> CliResult<Optimum> {
    cellres_core::config::ensure_valid(cfg)?;
    let (reservation, cost) = optimum_for_config(cfg)?;
    let stride = cfg.action_stride();
    let equal = ReservationVector::equal_split(cfg.channels_per_cell);
    let on_lattice = equal.total() == cfg.channels_per_cell as u64 && equal.as_array().iter().all(|p| p % stride == 0);
    let equal_split_cost = if on_lattice { Some(cost_for_config(cfg, &equal)?) } else { None };
    Ok(Optimum { reservation, cost, stride, equal_split_cost })
}

pub fn cmd_optimize(cfg: &NetworkConfig, out: Option<&Path>) -> CliResult<Optimum> {
    let best = optimum(cfg)?;
    let json = serde_json::to_string_pretty(&best).map_err(|e| CliError::Failed(e.to_string()))?;
    println!("{json}");
    if let Some(path) = out {
        std::fs::write(path, json + "\n").map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(best)
}
