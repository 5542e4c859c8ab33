use std::path::Path;

use cellres_core::metrics::class_loss_probability;
use cellres_core::{mean_handoff_latency, simulate, CallClass, NetworkConfig, RunOutput, SimOptions};

use crate::error::{CliError, CliResult};
use crate::format::{csv_bytes, emit, num, opt};

pub const RUN_HEADER: [&str; 19] = [
    "window",
    "cell",
    "start_s",
    "end_s",
    "noc",
    "roc",
    "nhc",
    "rhc",
    "arrivals_rt_o",
    "arrivals_nrt_o",
    "arrivals_rt_h",
    "arrivals_nrt_h",
    "pb_rt",
    "pb_nrt",
    "pd_rt",
    "pd_nrt",
    "latency_mean_s",
    "handoff_requests",
    "cost",
];

/// Simulates once and fails on any broken invariant.
pub fn checked_simulation(cfg: &NetworkConfig, opts: &SimOptions) -> CliResult<RunOutput> {
    let out = simulate(cfg, opts)?;
    if let Some(v) = out.invariant_violations.first() {
        return Err(CliError::Failed(format!("channel invariant broken (seed {}): {v}", cfg.seed)));
    }
    if !out.conservation_holds() {
        return Err(CliError::Failed(format!("call conservation broken (seed {})", cfg.seed)));
    }
    Ok(out)
}

pub fn window_rows(cfg: &NetworkConfig, out: &RunOutput) -> Vec<Vec<String>> {
    out.windows
        .iter()
        .map(|r| {
            let w = &r.window;
            let loss = |k| opt(class_loss_probability(w, k));
            let mut row = vec![r.index.to_string(), r.cell.to_string(), num(w.start), num(w.end)];
            row.extend(r.reservation.as_array().iter().map(|p| p.to_string()));
            row.extend(CallClass::ALL.iter().map(|&k| w.class(k).arrived.to_string()));
            row.extend([
                loss(CallClass::RtO),
                loss(CallClass::NrtO),
                loss(CallClass::RtH),
                loss(CallClass::NrtH),
                opt(mean_handoff_latency(w, cfg.signaling_delay)),
                w.handoff_requests.to_string(),
                num(r.cost),
            ]);
            row
        })
        .collect()
}

pub fn run_csv(cfg: &NetworkConfig) -> CliResult<Vec<u8>> {
    let out = checked_simulation(cfg, &SimOptions::default())?;
    csv_bytes(&RUN_HEADER, &window_rows(cfg, &out))
}

pub fn cmd_run(cfg: &NetworkConfig, out: Option<&Path>) -> CliResult<()> {
    emit(out, &run_csv(cfg)?)
}
