//! The event loop: wires traffic, channel pools, metrics windows and the
//! per-cell controllers onto one kernel.

use std::collections::HashMap;

use crate::channels::{Admission, CellState, OccupancyFault, Pool, Promotion};
use crate::config::{ensure_valid, Call, CallClass, ControllerKind, HandoffMode, NetworkConfig, ReservationVector};
use crate::controllers::{self, build_controllers, initial_reservation, ActionSet, ReservationController, TrainingState};
use crate::error::{Error, Result};
use crate::kernel::{mix64, EventKind, EventQueue, Purpose, RandomStreams, StreamKey};
use crate::metrics::{ClassTally, MetricsWindow};
use crate::traffic::{draw_dwell, handoff_target, CallFactory, TrafficSource};

#[derive(Debug, Clone, Default)]
pub struct SimOptions {
    /// Deliberately broken admission logic, for harness sensitivity checks.
    pub fault: Option<OccupancyFault>,
    /// Learned controller state to start from.
    pub warm_start: Option<TrainingState>,
}

/// A closed control window of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowRecord {
    pub index: usize,
    pub cell: usize,
    pub reservation: ReservationVector,
    pub cost: f64,
    pub window: MetricsWindow,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub windows: Vec<WindowRecord>,
    /// Network-wide counters of every call arriving after warmup, whatever
    /// time its outcome happened.
    pub summary: MetricsWindow,
    /// Counters per cell and class over the whole run, warmup included.
    pub cell_totals: Vec<[ClassTally; 4]>,
    /// Queue lengths per cell and class when the run stopped.
    pub queued_at_end: Vec<[u64; 4]>,
    /// Most channels ever busy at once, per cell.
    pub max_busy: Vec<u32>,
    /// Invariant breaches seen at event boundaries; empty for a sound run.
    pub invariant_violations: Vec<String>,
    pub events_processed: u64,
    /// Order-sensitive digest of every processed event.
    pub trace_digest: u64,
    pub final_state: Option<TrainingState>,
}

impl RunOutput {
    /// Whether `arrived = admitted + refused + reneged + queued` for every cell and class.
    pub fn conservation_holds(&self) -> bool {
        self.cell_totals.iter().zip(&self.queued_at_end).all(|(tallies, queued)| {
            CallClass::ALL
                .iter()
                .all(|k| tallies[k.index()].arrived == tallies[k.index()].resolved() + queued[k.index()])
        })
    }

    /// Per-cell window costs, for learning curves.
    pub fn window_costs(&self, cell: usize) -> Vec<f64> {
        self.windows.iter().filter(|w| w.cell == cell).map(|w| w.cost).collect()
    }

    /// Mean cost over all cells for each window index, in order.
    pub fn mean_window_costs(&self) -> Vec<f64> {
        let mut sums: Vec<(f64, usize)> = Vec::new();
        for w in &self.windows {
            if sums.len() <= w.index {
                sums.resize(w.index + 1, (0.0, 0));
            }
            sums[w.index].0 += w.cost;
            sums[w.index].1 += 1;
        }
        sums.into_iter().map(|(s, n)| s / n as f64).collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct Cohort {
    window: Option<usize>,
    counted: bool,
}

#[derive(Debug)]
struct ActiveCall {
    call: Call,
    pool: Option<Pool>,
    service_started: f64,
    epoch: u32,
    cohort: Cohort,
}

#[derive(Clone, Copy)]
enum Outcome {
    Admitted,
    Refused,
    Reneged,
}

struct Simulation<'a> {
    cfg: &'a NetworkConfig,
    queue: EventQueue,
    streams: RandomStreams,
    factory: CallFactory,
    cells: Vec<CellState>,
    controllers: Vec<Box<dyn ReservationController>>,
    calls: HashMap<u64, ActiveCall>,
    sources: HashMap<(usize, CallClass), TrafficSource>,

    window_index: Option<usize>,
    open: Vec<MetricsWindow>,
    open_rv: Vec<ReservationVector>,
    open_queued: Vec<[u64; 4]>,
    last_busy_update: Vec<f64>,
    records: Vec<WindowRecord>,
    summary: MetricsWindow,
    cell_totals: Vec<[ClassTally; 4]>,
    max_busy: Vec<u32>,
    violations: Vec<String>,
    events: u64,
    digest: u64,
}

/// Runs one replication of `cfg`.
pub fn simulate(cfg: &NetworkConfig, opts: &SimOptions) -> Result<RunOutput> {
    ensure_valid(cfg)?;
    Simulation::new(cfg, opts)?.run()
}

impl<'a> Simulation<'a> {
    fn new(cfg: &'a NetworkConfig, opts: &SimOptions) -> Result<Self> {
        let rv = initial_reservation(cfg)?;
        let cells = (0..cfg.num_cells)
            .map(|c| Ok(CellState::new(c, cfg.channels_per_cell, rv, cfg.queue_capacity)?.with_fault(opts.fault)))
            .collect::<Result<Vec<_>>>()?;
        let controllers = build_controllers(cfg, opts.warm_start.as_ref())?;
        let sources = TrafficSource::all(cfg).into_iter().map(|s| ((s.cell, s.class), s)).collect();
        let n = cfg.num_cells;
        Ok(Simulation {
            cfg,
            queue: EventQueue::new(),
            streams: RandomStreams::new(cfg.seed),
            factory: CallFactory::new(cfg.mean_call_duration)?,
            cells,
            controllers,
            calls: HashMap::new(),
            sources,
            window_index: None,
            open: vec![MetricsWindow::new(0.0, 0.0); n],
            open_rv: vec![rv; n],
            open_queued: vec![[0; 4]; n],
            last_busy_update: vec![0.0; n],
            records: Vec::new(),
            summary: MetricsWindow::new(cfg.warmup, cfg.sim_duration),
            cell_totals: vec![[ClassTally::default(); 4]; n],
            max_busy: vec![0; n],
            violations: Vec::new(),
            events: 0,
            digest: 0,
        })
    }

    fn run(mut self) -> Result<RunOutput> {
        let mut keys: Vec<(usize, CallClass)> = self.sources.keys().copied().collect();
        keys.sort();
        for (cell, class) in keys {
            self.schedule_arrival(cell, class)?;
        }
        self.queue.schedule(self.cfg.warmup, EventKind::ControlTick)?;

        while let Some(t) = self.queue.peek_time() {
            if t > self.cfg.sim_duration {
                break;
            }
            let event = self.queue.pop_next().expect("peeked");
            self.events += 1;
            self.digest = mix64(self.digest ^ event.time.to_bits() ^ mix64(event.seq));
            match event.kind {
                EventKind::Arrival { cell, class } => self.on_arrival(cell, class, event.time)?,
                EventKind::ServiceEnd { call } => self.on_service_end(call, event.time)?,
                EventKind::HandoffRequest { call } => self.on_handoff_request(call, event.time)?,
                EventKind::Renege { call, cell, class, epoch } => self.on_renege(call, cell, class, epoch)?,
                EventKind::ControlTick => self.on_tick(event.time)?,
            }
        }

        let end = self.cfg.sim_duration;
        if self.window_index.is_some() && self.open.first().is_some_and(|w| w.start < end) {
            self.close_windows(end);
        }
        self.finish()
    }

    fn finish(mut self) -> Result<RunOutput> {
        for active in self.calls.values() {
            if active.pool.is_none() && active.cohort.counted {
                self.summary.still_queued[active.call.class.index()] += 1;
            }
        }
        let queued_at_end = self
            .cells
            .iter()
            .map(|c| CallClass::ALL.map(|k| c.queue_len(k) as u64))
            .collect();
        let final_state = match self.cfg.controller.kind {
            ControllerKind::La | ControllerKind::Neural => Some(TrainingState {
                controller: self.cfg.controller.kind,
                episodes_completed: 0,
                actions: ActionSet::for_config(self.cfg)?.as_slice().to_vec(),
                cells: self.controllers.iter().map(|c| c.state().expect("learning controller")).collect(),
            }),
            _ => None,
        };
        Ok(RunOutput {
            windows: self.records,
            summary: self.summary,
            cell_totals: self.cell_totals,
            queued_at_end,
            max_busy: self.max_busy,
            invariant_violations: self.violations,
            events_processed: self.events,
            trace_digest: self.digest,
            final_state,
        })
    }

    fn schedule_arrival(&mut self, cell: usize, class: CallClass) -> Result<()> {
        let src = self.sources[&(cell, class)];
        let rng = self.streams.get(StreamKey::new(cell, Some(class), Purpose::Interarrival));
        if let Some(dt) = src.next_interarrival(rng) {
            self.queue.schedule(self.queue.clock() + dt, EventKind::Arrival { cell, class })?;
        }
        Ok(())
    }

    fn cohort_at(&self, now: f64) -> Cohort {
        let counted = now >= self.cfg.warmup;
        Cohort { window: if counted { self.window_index } else { None }, counted }
    }

    fn record(&mut self, cell: usize, class: CallClass, cohort: Cohort, outcome: Outcome) {
        fn bump(t: &mut ClassTally, o: Outcome) {
            match o {
                Outcome::Admitted => t.admitted += 1,
                Outcome::Refused => t.refused += 1,
                Outcome::Reneged => t.reneged += 1,
            }
        }
        bump(&mut self.cell_totals[cell][class.index()], outcome);
        if cohort.counted {
            bump(self.summary.class_mut(class), outcome);
        }
        if cohort.window.is_some() && cohort.window == self.window_index {
            bump(self.open[cell].class_mut(class), outcome);
        }
    }

    fn record_arrival(&mut self, cell: usize, class: CallClass, cohort: Cohort) {
        self.cell_totals[cell][class.index()].arrived += 1;
        if cohort.counted {
            self.summary.class_mut(class).arrived += 1;
        }
        if cohort.window.is_some() && cohort.window == self.window_index {
            self.open[cell].class_mut(class).arrived += 1;
        }
    }

    fn in_open_window(&self, cohort: Cohort) -> bool {
        cohort.window.is_some() && cohort.window == self.window_index
    }

    /// Accumulates busy channel-seconds of `cell` up to `now`.
    fn advance_busy(&mut self, cell: usize, now: f64) {
        let from = self.last_busy_update[cell];
        if now <= from {
            return;
        }
        let busy = self.cells[cell].total_busy() as f64;
        let lo = from.max(self.cfg.warmup);
        if now > lo {
            self.summary.busy_channel_seconds += busy * (now - lo);
            if self.window_index.is_some() {
                let w = &mut self.open[cell];
                let lo = from.max(w.start);
                if now > lo {
                    w.busy_channel_seconds += busy * (now - lo);
                }
            }
        }
        self.last_busy_update[cell] = now;
    }

    fn after_change(&mut self, cell: usize) {
        let state = &self.cells[cell];
        self.max_busy[cell] = self.max_busy[cell].max(state.total_busy());
        if let Err(msg) = state.check_invariants() {
            self.violations.push(format!("t={}: {msg}", self.queue.clock()));
        }
    }

    fn on_arrival(&mut self, cell: usize, class: CallClass, now: f64) -> Result<()> {
        self.schedule_arrival(cell, class)?;
        let rng = self.streams.get(StreamKey::new(cell, Some(class), Purpose::Duration));
        let call = self.factory.draw_call(class, cell, now, rng);
        self.attempt_admission(call, 0, now)
    }

    /// `epoch` counts the call's earlier stays in queues, so deadlines left
    /// over from those stays are recognised as stale.
    fn attempt_admission(&mut self, call: Call, epoch: u32, now: f64) -> Result<()> {
        let (cell, class, id) = (call.cell, call.class, call.id);
        let cohort = self.cohort_at(now);
        self.record_arrival(cell, class, cohort);
        self.advance_busy(cell, now);
        let outcome = self.cells[cell].try_admit(id, class, now);
        let mut active = ActiveCall { call, pool: None, service_started: now, epoch, cohort };
        match outcome {
            Admission::Admitted(pool) => {
                self.calls.insert(id, active);
                self.start_service(id, pool, now)?;
            }
            Admission::Queued => {
                active.epoch = epoch + 1;
                let epoch = active.epoch;
                self.calls.insert(id, active);
                if self.in_open_window(cohort) {
                    self.open_queued[cell][class.index()] += 1;
                }
                if let Some(deadline) = self.cfg.renege_deadline[class.index()] {
                    self.queue.schedule(now + deadline, EventKind::Renege { call: id, cell, class, epoch })?;
                }
            }
            Admission::Refused => {
                self.calls.remove(&id);
                self.record(cell, class, cohort, Outcome::Refused);
            }
        }
        self.after_change(cell);
        Ok(())
    }

    /// Grants a channel to a call (fresh admission or promotion) and
    /// schedules whatever ends its stay in the cell.
    fn start_service(&mut self, id: u64, pool: Pool, now: f64) -> Result<()> {
        let active = self.calls.get_mut(&id).expect("started call is tracked");
        active.pool = Some(pool);
        active.service_started = now;
        let (cell, class, cohort) = (active.call.cell, active.call.class, active.cohort);
        let remaining = active.call.remaining_duration;
        let requested = active.call.handoff_requested_at;

        self.record(cell, class, cohort, Outcome::Admitted);
        if let Some(at) = requested {
            let wait = now - at;
            if cohort.counted {
                self.summary.handoff_waits.push(wait);
            }
            if self.in_open_window(cohort) {
                self.open[cell].handoff_waits.push(wait);
            }
        }

        let dwell = if self.cfg.handoff_mode == HandoffMode::Mobility && self.cfg.num_cells >= 2 {
            let rng = self.streams.get(StreamKey::new(cell, Some(class), Purpose::Dwell));
            Some(draw_dwell(self.cfg, rng)?)
        } else {
            None
        };
        match dwell {
            Some(d) if d < remaining => self.queue.schedule(now + d, EventKind::HandoffRequest { call: id })?,
            _ => self.queue.schedule(now + remaining, EventKind::ServiceEnd { call: id })?,
        };
        Ok(())
    }

    fn handle_promotions(&mut self, cell: usize, promotions: Vec<Promotion>, now: f64) -> Result<()> {
        for p in promotions {
            let active = self.calls.get(&p.call).expect("queued call is tracked");
            let cohort = active.cohort;
            if self.in_open_window(cohort) {
                self.open_queued[cell][p.class.index()] -= 1;
            }
            self.start_service(p.call, p.pool, now)?;
        }
        Ok(())
    }

    fn release(&mut self, cell: usize, pool: Pool, now: f64) -> Result<()> {
        self.advance_busy(cell, now);
        let promoted = self.cells[cell].release(pool, now)?;
        self.handle_promotions(cell, promoted.into_iter().collect(), now)?;
        self.after_change(cell);
        Ok(())
    }

    fn on_service_end(&mut self, id: u64, now: f64) -> Result<()> {
        let active = self.calls.remove(&id).expect("service end of a tracked call");
        let pool = active.pool.expect("service end of a call in service");
        self.release(active.call.cell, pool, now)
    }

    fn on_handoff_request(&mut self, id: u64, now: f64) -> Result<()> {
        let mut active = self.calls.remove(&id).expect("handoff of a tracked call");
        let pool = active.pool.expect("handoff of a call in service");
        let from = active.call.cell;
        self.release(from, pool, now)?;
        if now >= self.cfg.warmup {
            self.summary.handoff_requests += 1;
            if self.window_index.is_some() {
                self.open[from].handoff_requests += 1;
            }
        }

        let rng = self.streams.get(StreamKey::new(from, None, Purpose::HandoffTarget));
        let target = handoff_target(from, self.cfg.num_cells, rng).expect("mobility handoffs need ≥ 2 cells");
        let call = &mut active.call;
        call.remaining_duration = (call.remaining_duration - (now - active.service_started)).max(0.0);
        call.class = call.class.on_handoff();
        call.cell = target;
        call.handoff_requested_at = Some(now);
        self.attempt_admission(active.call, active.epoch, now)
    }

    fn on_renege(&mut self, id: u64, cell: usize, class: CallClass, epoch: u32) -> Result<()> {
        let live = self
            .calls
            .get(&id)
            .is_some_and(|a| a.pool.is_none() && a.epoch == epoch && a.call.cell == cell && a.call.class == class);
        if !live {
            return Ok(());
        }
        let active = self.calls.remove(&id).expect("checked above");
        self.cells[cell].renege(id, class)?;
        if self.in_open_window(active.cohort) {
            self.open_queued[cell][class.index()] -= 1;
        }
        self.record(cell, class, active.cohort, Outcome::Reneged);
        self.after_change(cell);
        Ok(())
    }

    /// Closes every cell's window at `now` and reports its cost to the
    /// controller. Returns the closed windows in cell order.
    fn close_windows(&mut self, now: f64) -> Vec<MetricsWindow> {
        let index = self.window_index.expect("a window is open");
        let mut closed = Vec::with_capacity(self.cfg.num_cells);
        for cell in 0..self.cfg.num_cells {
            self.advance_busy(cell, now);
            let mut window = std::mem::replace(&mut self.open[cell], MetricsWindow::new(now, now));
            window.end = now;
            window.still_queued = std::mem::take(&mut self.open_queued[cell]);
            let cost = controllers::cost(&window, &self.cfg.controller.weights, self.cfg.signaling_delay);
            self.controllers[cell].notify_reward(cost);
            self.records.push(WindowRecord { index, cell, reservation: self.open_rv[cell], cost, window: window.clone() });
            closed.push(window);
        }
        closed
    }

    fn apply_decision(&mut self, cell: usize, window: &MetricsWindow, now: f64) -> Result<()> {
        let current = self.cells[cell].reservation();
        let next = self.controllers[cell].decide(window, current, self.cfg);
        crate::config::validate_reservation(&next, self.cfg.channels_per_cell)
            .map_err(|v| Error::InvalidConfig(vec![v]))?;
        self.advance_busy(cell, now);
        let promoted = self.cells[cell].apply_reservation(next, now)?;
        self.handle_promotions(cell, promoted, now)?;
        self.after_change(cell);
        self.open_rv[cell] = next;
        Ok(())
    }

    fn on_tick(&mut self, now: f64) -> Result<()> {
        let (closed, next_index) = match self.window_index {
            // warmup ends: controllers pick the first window's reservation
            None => (vec![MetricsWindow::new(0.0, now); self.cfg.num_cells], 0),
            Some(i) => (self.close_windows(now), i + 1),
        };
        self.window_index = Some(next_index);
        for (cell, window) in closed.iter().enumerate() {
            self.advance_busy(cell, now);
            self.open[cell] = MetricsWindow::new(now, now);
            self.apply_decision(cell, window, now)?;
        }
        let next = self.cfg.warmup + (next_index + 1) as f64 * self.cfg.control_period;
        if next < self.cfg.sim_duration {
            self.queue.schedule(next, EventKind::ControlTick)?;
        }
        Ok(())
    }
}
