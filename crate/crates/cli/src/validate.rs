//! Simulator-versus-closed-form checks.

use cellres_core::analytic::{erlang_b, mmck_blocking};
use cellres_core::channels::OccupancyFault;
use cellres_core::config::ensure_valid;
use cellres_core::metrics::mean_sd;
use cellres_core::{CallClass, ControllerKind, HandoffMode, NetworkConfig, ReservationVector, SimOptions};
use rayon::prelude::*;

use crate::error::{CliError, CliResult};
use crate::run::checked_simulation;

/// Absolute tolerance on every blocking comparison.
pub const ABS_TOLERANCE: f64 = 0.01;
/// Allowed distance in cross-replication standard errors.
pub const SE_TOLERANCE: f64 = 3.0;
/// Fewer post-warmup arrivals than this per class is not a test.
pub const MIN_ARRIVALS: u64 = 100_000;

/// Fifteen cells of 60 channels split (15,15,15,15), offered 10, 12, 9
/// and 11 Erlangs per class per cell, no queues.
pub fn erlang_config() -> NetworkConfig {
    let mut cfg = NetworkConfig {
        num_cells: 15,
        channels_per_cell: 60,
        arrival_rates: [15.0, 18.0, 13.5, 16.5],
        mean_call_duration: 10.0,
        handoff_mode: HandoffMode::Exogenous,
        queue_capacity: [0; 4],
        sim_duration: 1100.0,
        warmup: 100.0,
        control_period: 100.0,
        seed: 1,
        ..Default::default()
    };
    cfg.controller.kind = ControllerKind::Static;
    cfg.controller.reservation = ReservationVector::new(15, 15, 15, 15);
    cfg
}

/// One server, one waiting place, offered one Erlang of RT_O traffic.
pub fn mmck_config() -> NetworkConfig {
    let mut cfg = NetworkConfig {
        num_cells: 1,
        channels_per_cell: 1,
        arrival_rates: [1.0, 0.0, 0.0, 0.0],
        mean_call_duration: 1.0,
        queue_capacity: [1, 0, 0, 0],
        renege_deadline: [None; 4],
        sim_duration: 110_100.0,
        warmup: 100.0,
        control_period: 10_000.0,
        seed: 1,
        ..Default::default()
    };
    cfg.controller.kind = ControllerKind::Static;
    cfg.controller.reservation = ReservationVector::new(0, 1, 0, 0);
    cfg
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub label: String,
    pub simulated: f64,
    pub analytic: f64,
    /// Cross-replication standard error, when there is more than one replication.
    pub standard_error: Option<f64>,
    pub arrivals: u64,
}

impl Comparison {
    pub fn abs_diff(&self) -> f64 {
        (self.simulated - self.analytic).abs()
    }

    pub fn passes(&self) -> bool {
        let within_se = match self.standard_error {
            Some(se) if se > 0.0 => self.abs_diff() <= SE_TOLERANCE * se,
            _ => true,
        };
        self.abs_diff() <= ABS_TOLERANCE && within_se
    }

    pub fn line(&self) -> String {
        let se = self.standard_error.map_or("-".to_string(), |s| format!("{s:.5}"));
        format!(
            "{:<12} simulated {:.5}  analytic {:.5}  |diff| {:.5}  se {se}  arrivals {}  {}",
            self.label,
            self.simulated,
            self.analytic,
            self.abs_diff(),
            self.arrivals,
            if self.passes() { "ok" } else { "FAIL" }
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub comparisons: Vec<Comparison>,
}

impl ValidationReport {
    pub fn failures(&self) -> Vec<&Comparison> {
        self.comparisons.iter().filter(|c| !c.passes()).collect()
    }

    pub fn text(&self) -> String {
        self.comparisons.iter().map(|c| c.line() + "\n").collect()
    }
}

fn options(fault: bool) -> SimOptions {
    SimOptions { fault: fault.then_some(OccupancyFault::DedicatedOffByOne), ..Default::default() }
}

/// Per-class blocking of `cfg` over `replications` seeds against Erlang-B of each pool.
pub fn erlang_comparisons(cfg: &NetworkConfig, replications: u32, fault: bool) -> CliResult<Vec<Comparison>> {
    ensure_valid(cfg)?;
    if cfg.handoff_mode != HandoffMode::Exogenous || !cfg.is_pure_loss() {
        return Err(CliError::Usage("Erlang-B validation needs an exogenous, pure-loss configuration".into()));
    }
    if cfg.controller.kind != ControllerKind::Static {
        return Err(CliError::Usage("Erlang-B validation needs the static controller".into()));
    }
    let rv = cfg.controller.reservation;
    if rv.total() != cfg.channels_per_cell as u64 {
        return Err(CliError::Usage(format!(
            "Erlang-B validation needs an empty shared pool; {rv} leaves channels unassigned"
        )));
    }
    if replications == 0 {
        return Err(CliError::Usage("--replications must be at least 1".into()));
    }
    let opts = options(fault);
    let runs = (0..replications)
        .into_par_iter()
        .map(|r| {
            let mut c = cfg.clone();
            c.seed = cfg.seed.wrapping_add(r as u64);
            checked_simulation(&c, &opts).map(|o| o.summary)
        })
        .collect::<CliResult<Vec<_>>>()?;

    let loads = cfg.per_cell_offered_load();
    let mut out = Vec::new();
    for class in CallClass::ALL {
        let rho = loads[class.index()];
        if rho <= 0.0 {
            continue;
        }
        let arrivals: u64 = runs.iter().map(|s| s.class(class).arrived).sum();
        if arrivals < MIN_ARRIVALS {
            return Err(CliError::Usage(format!(
                "insufficient samples: {} saw {arrivals} arrivals after warmup, need {MIN_ARRIVALS}",
                class.label()
            )));
        }
        let lost: u64 = runs.iter().map(|s| s.class(class).lost()).sum();
        let per_rep = mean_sd(runs.iter().map(|s| {
            let t = s.class(class);
            (t.arrived > 0).then(|| t.lost() as f64 / t.arrived as f64)
        }));
        out.push(Comparison {
            label: class.label().to_string(),
            simulated: lost as f64 / arrivals as f64,
            analytic: erlang_b(rv.pool(class), rho)?,
            standard_error: per_rep.filter(|s| s.n > 1).map(|s| s.standard_error()),
            arrivals,
        });
    }
    Ok(out)
}

/// Blocking of the single-server, one-waiting-place system against M/M/1/2.
pub fn mmck_comparison(seed: u64, fault: bool) -> CliResult<Comparison> {
    let mut cfg = mmck_config();
    cfg.seed = seed;
    let out = checked_simulation(&cfg, &options(fault))?;
    let t = out.summary.class(CallClass::RtO);
    if t.arrived < MIN_ARRIVALS {
        return Err(CliError::Usage(format!("insufficient samples: {} arrivals", t.arrived)));
    }
    Ok(Comparison {
        label: "M/M/1/2".into(),
        simulated: t.refused as f64 / t.arrived as f64,
        analytic: mmck_blocking(1, 2, 1.0)?,
        standard_error: None,
        arrivals: t.arrived,
    })
}

pub fn validation_report(cfg: &NetworkConfig, replications: u32, fault: bool) -> CliResult<ValidationReport> {
    let mut comparisons = erlang_comparisons(cfg, replications, fault)?;
    comparisons.push(mmck_comparison(cfg.seed, fault)?);
    Ok(ValidationReport { comparisons })
}

/// Prints the report; fails naming every class out of tolerance.
pub fn cmd_validate(cfg: &NetworkConfig, replications: u32, fault: bool) -> CliResult<ValidationReport> {
    let report = validation_report(cfg, replications, fault)?;
    print!("{}", report.text());
    let failed: Vec<&str> = report.failures().iter().map(|c| c.label.as_str()).collect();
    if failed.is_empty() {
        Ok(report)
    } else {
        Err(CliError::Failed(format!("outside tolerance: {}", failed.join(", "))))
    }
}
