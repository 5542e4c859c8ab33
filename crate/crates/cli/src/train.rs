//! Episode-based training of the learning controllers.
//!
//! An episode is `windows_per_episode` consecutive control windows. A call to
//! [`train`] simulates all requested episodes back to back in one run after
//! the configured warmup, so `sim_duration` in the config is ignored.

use std::path::Path;

use cellres_core::{ControllerKind, NetworkConfig, SimOptions, TrainingState};

use crate::error::{CliError, CliResult};
use crate::format::{csv_bytes, emit, num};
use crate::run::checked_simulation;

pub const CURVE_HEADER: [&str; 2] = ["episode", "mean_cost"];

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingOutcome {
    /// `(episode number, mean window cost over all cells)`, numbered from 1
    /// and continuing across resumed runs.
    pub curve: Vec<(u64, f64)>,
    pub state: TrainingState,
}

/// Runs `episodes` more episodes, continuing from `resume` when given.
///
/// A resumed run draws from seed `seed + episodes already completed`, so it
/// does not replay the traffic the state was trained on.
pub fn train(cfg: &NetworkConfig, episodes: u64, resume: Option<TrainingState>) -> CliResult<TrainingOutcome> {
    if !matches!(cfg.controller.kind, ControllerKind::La | ControllerKind::Neural) {
        return Err(CliError::Usage(format!(
            "training needs controller kind la or neural, config has {:?}",
            cfg.controller.kind
        )));
    }
    if episodes == 0 {
        return Err(CliError::Usage("--episodes must be at least 1".into()));
    }
    let done = match &resume {
        Some(s) if s.controller != cfg.controller.kind => {
            return Err(CliError::Usage(format!(
                "state file holds a {:?} controller, config asks for {:?}",
                s.controller, cfg.controller.kind
            )))
        }
        Some(s) => s.episodes_completed,
        None => 0,
    };
    let w = cfg.controller.windows_per_episode.max(1) as u64;
    let mut run_cfg = cfg.clone();
    run_cfg.seed = cfg.seed.wrapping_add(done);
    run_cfg.sim_duration = cfg.warmup + (episodes * w) as f64 * cfg.control_period;

    let out = checked_simulation(&run_cfg, &SimOptions { warm_start: resume, ..Default::default() })?;
    let costs = out.mean_window_costs();
    let curve = costs
        .chunks(w as usize)
        .enumerate()
        .map(|(i, c)| (done + i as u64 + 1, c.iter().sum::<f64>() / c.len() as f64))
        .collect();
    let mut state = out.final_state.ok_or_else(|| CliError::Failed("learning controller left no state".into()))?;
    state.episodes_completed = done + episodes;
    Ok(TrainingOutcome { curve, state })
}

pub fn read_state(path: &Path) -> CliResult<TrainingState> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    TrainingState::from_json(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn curve_csv(curve: &[(u64, f64)]) -> CliResult<Vec<u8>> {
    let rows: Vec<Vec<String>> = curve.iter().map(|&(e, c)| vec![e.to_string(), num(c)]).collect();
    csv_bytes(&CURVE_HEADER, &rows)
}

/// Resumes from `state` if that file exists, then overwrites it with the
/// new state. The curve goes to `out`, or stdout.
pub fn cmd_train(cfg: &NetworkConfig, episodes: u64, state: Option<&Path>, out: Option<&Path>) -> CliResult<TrainingOutcome> {
    let resume = match state {
        Some(p) if p.exists() => Some(read_state(p)?),
        _ => None,
    };
    let outcome = train(cfg, episodes, resume)?;
    emit(out, &curve_csv(&outcome.curve)?)?;
    if let Some(p) = state {
        std::fs::write(p, outcome.state.to_json() + "\n")
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", p.display())))?;
    }
    Ok(outcome)
}
