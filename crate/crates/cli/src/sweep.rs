//! Replicated parameter sweeps and the figure series derived from them.

use std::path::{Path, PathBuf};

use cellres_core::metrics::{class_loss_probability, handoffs_per_call, mean_sd, MeanSd};
use cellres_core::config::ensure_valid;
use cellres_core::{mean_handoff_latency, system_load, CallClass, NetworkConfig, SimOptions};
use clap::ValueEnum;
use rayon::prelude::*;

use crate::error::{CliError, CliResult};
use crate::format::{csv_bytes, num, sibling};
use crate::run::checked_simulation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum SweepVariable {
    LoadMultiplier,
    Velocity,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::LoadMultiplier => "load_multiplier",
            SweepVariable::Velocity => "velocity",
        }
    }

    fn apply(self, cfg: &mut NetworkConfig, value: f64) {
        match self {
            SweepVariable::LoadMultiplier => cfg.load_multiplier = value,
            SweepVariable::Velocity => cfg.velocity = value,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub replications: u32,
    pub base: NetworkConfig,
    pub out: PathBuf,
}

pub const METRICS: [&str; 7] = ["pb_rt", "pb_nrt", "pd_rt", "pd_nrt", "latency_mean_s", "load", "handoff_rate"];

pub fn sweep_header() -> Vec<String> {
    let mut h: Vec<String> = ["variable", "value", "replication"].map(String::from).to_vec();
    h.extend(METRICS.iter().map(|m| m.to_string()));
    h.extend(METRICS.iter().map(|m| format!("{m}_sd")));
    h
}

/// Metrics of one replication, in [`METRICS`] order.
pub type Sample = [Option<f64>; 7];

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub spec_variable: SweepVariable,
    pub values: Vec<f64>,
    /// `samples[v][r]` for value `v` and replication `r`.
    pub samples: Vec<Vec<Sample>>,
    pub configs: Vec<NetworkConfig>,
}

impl SweepResult {
    pub fn summary(&self, value: usize, metric: usize) -> Option<MeanSd> {
        mean_sd(self.samples[value].iter().map(|s| s[metric]))
    }
}

impl SweepSpec {
    pub fn check(&self) -> CliResult<()> {
        if self.values.is_empty() {
            return Err(CliError::Usage("--values needs at least one value".into()));
        }
        if self.values.iter().any(|v| !v.is_finite()) || self.values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::Usage("--values must be finite and strictly increasing".into()));
        }
        if self.replications == 0 {
            return Err(CliError::Usage("--replications must be at least 1".into()));
        }
        for cfg in self.point_configs() {
            ensure_valid(&cfg)?;
        }
        Ok(())
    }

    fn point_configs(&self) -> Vec<NetworkConfig> {
        self.values
            .iter()
            .map(|&v| {
                let mut cfg = self.base.clone();
                self.variable.apply(&mut cfg, v);
                cfg
            })
            .collect()
    }

    /// Runs every (value, replication) pair; replication `r` uses seed `seed + r`.
    pub fn execute(&self) -> CliResult<SweepResult> {
        self.check()?;
        let configs = self.point_configs();
        let jobs: Vec<(usize, u32)> =
            (0..configs.len()).flat_map(|v| (0..self.replications).map(move |r| (v, r))).collect();
        let results: Vec<CliResult<Sample>> = jobs
            .par_iter()
            .map(|&(v, r)| {
                let mut cfg = configs[v].clone();
                cfg.seed = cfg.seed.wrapping_add(r as u64);
                let out = checked_simulation(&cfg, &SimOptions::default())?;
                let s = &out.summary;
                Ok([
                    class_loss_probability(s, CallClass::RtO),
                    class_loss_probability(s, CallClass::NrtO),
                    class_loss_probability(s, CallClass::RtH),
                    class_loss_probability(s, CallClass::NrtH),
                    mean_handoff_latency(s, cfg.signaling_delay),
                    Some(system_load(&cfg)),
                    handoffs_per_call(s),
                ])
            })
            .collect();
        let mut samples = vec![Vec::with_capacity(self.replications as usize); configs.len()];
        for ((v, _), res) in jobs.into_iter().zip(results) {
            samples[v].push(res?);
        }
        Ok(SweepResult { spec_variable: self.variable, values: self.values.clone(), samples, configs })
    }
}

fn cell(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Data rows per (value, replication), each value followed by its `mean` row.
pub fn sweep_csv(res: &SweepResult) -> CliResult<Vec<u8>> {
    let header = sweep_header();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let name = res.spec_variable.name();
    let mut rows = Vec::new();
    for (v, &value) in res.values.iter().enumerate() {
        for (r, sample) in res.samples[v].iter().enumerate() {
            let mut row = vec![name.to_string(), num(value), r.to_string()];
            row.extend(sample.iter().map(|&x| cell(x)));
            row.extend(std::iter::repeat_n(String::new(), METRICS.len()));
            rows.push(row);
        }
        let stats: Vec<Option<MeanSd>> = (0..METRICS.len()).map(|m| res.summary(v, m)).collect();
        let mut row = vec![name.to_string(), num(value), "mean".to_string()];
        row.extend(stats.iter().map(|s| cell(s.map(|s| s.mean))));
        row.extend(stats.iter().map(|s| cell(s.map(|s| s.sd))));
        rows.push(row);
    }
    csv_bytes(&header, &rows)
}

/// Half-width of a normal-approximation 95% interval of the mean.
fn ci95(s: &MeanSd) -> f64 {
    1.96 * s.standard_error()
}

fn stat_cells(s: Option<MeanSd>) -> [String; 3] {
    match s {
        Some(s) => [num(s.mean), num(s.sd), num(ci95(&s))],
        None => Default::default(),
    }
}

/// Probability-vs-load series for two classes (blocking or dropping).
fn load_series(res: &SweepResult, metrics: [usize; 2], labels: [&str; 2]) -> CliResult<Vec<u8>> {
    let mut header = vec!["variable".to_string(), "value".into(), "load".into()];
    for l in labels {
        header.extend([format!("{l}_mean"), format!("{l}_sd"), format!("{l}_ci95")]);
    }
    header.push("replications".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = (0..res.values.len())
        .map(|v| {
            let mut row = vec![res.spec_variable.name().to_string(), num(res.values[v]), num(system_load(&res.configs[v]))];
            for m in metrics {
                row.extend(stat_cells(res.summary(v, m)));
            }
            row.push(res.samples[v].len().to_string());
            row
        })
        .collect::<Vec<_>>();
    csv_bytes(&header, &rows)
}

pub const FIG6_HEADER: [&str; 7] =
    ["variable", "value", "velocity_mps", "latency_mean_s", "latency_sd_s", "latency_ci95_s", "replications"];

fn latency_series(res: &SweepResult) -> CliResult<Vec<u8>> {
    let rows = (0..res.values.len())
        .map(|v| {
            let mut row = vec![res.spec_variable.name().to_string(), num(res.values[v]), num(res.configs[v].velocity)];
            row.extend(stat_cells(res.summary(v, 4)));
            row.push(res.samples[v].len().to_string());
            row
        })
        .collect::<Vec<_>>();
    csv_bytes(&FIG6_HEADER, &rows)
}

/// The three figure files written beside the sweep CSV.
pub fn figure_paths(out: &Path) -> [PathBuf; 3] {
    [sibling(out, "fig4_blocking"), sibling(out, "fig5_dropping"), sibling(out, "fig6_latency")]
}

pub fn cmd_sweep(spec: &SweepSpec) -> CliResult<SweepResult> {
    let res = spec.execute()?;
    let [fig4, fig5, fig6] = figure_paths(&spec.out);
    let write = |path: &Path, bytes: Vec<u8>| {
        std::fs::write(path, bytes).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
    };
    write(&spec.out, sweep_csv(&res)?)?;
    write(&fig4, load_series(&res, [0, 1], ["pb_rt", "pb_nrt"])?)?;
    write(&fig5, load_series(&res, [2, 3], ["pd_rt", "pd_nrt"])?)?;
    write(&fig6, latency_series(&res)?)?;
    Ok(res)
}
