//! Per-cell channel pools, admission, queueing with reneging, and promotion
//! of queued calls when channels free up.
//!
//! A cell's `C` channels are split into one dedicated pool per class, sized
//! by the [`ReservationVector`], plus a shared pool holding the remainder.
//! An arriving call tries its dedicated pool, then the shared pool, then its
//! class queue. A freed dedicated channel goes only to its own class; a
//! freed shared channel goes to the head of the first non-empty queue in
//! [`CallClass::PROMOTION_ORDER`].

use std::collections::VecDeque;

use crate::config::{CallClass, ReservationVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pool {
    Dedicated(CallClass),
    Shared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admission {
    Admitted(Pool),
    Queued,
    /// Blocked for originating classes, dropped for handoff classes.
    Refused,
}

/// A queued call that has just been granted a channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Promotion {
    pub call: u64,
    pub class: CallClass,
    pub pool: Pool,
    pub wait: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Waiting {
    call: u64,
    since: f64,
}

/// Deliberate admission bugs, used to prove the oracle harness notices them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OccupancyFault {
    /// Dedicated pools admit one call fewer than their size.
    DedicatedOffByOne,
}

#[derive(Debug, Clone)]
pub struct CellState {
    pub cell: usize,
    channels: u32,
    rv: ReservationVector,
    shared: u32,
    busy: [u32; 4],
    shared_busy: u32,
    queues: [VecDeque<Waiting>; 4],
    queue_capacity: [u32; 4],
    fault: Option<OccupancyFault>,
}

impl CellState {
    pub fn new(cell: usize, channels: u32, rv: ReservationVector, queue_capacity: [u32; 4]) -> Result<Self> {
        let shared = crate::config::validate_reservation(&rv, channels)
            .map_err(|v| Error::InvalidConfig(vec![v]))?;
        Ok(CellState {
            cell,
            channels,
            rv,
            shared,
            busy: [0; 4],
            shared_busy: 0,
            queues: Default::default(),
            queue_capacity,
            fault: None,
        })
    }

    pub fn with_fault(mut self, fault: Option<OccupancyFault>) -> Self {
        self.fault = fault;
        self
    }

    pub fn reservation(&self) -> ReservationVector {
        self.rv
    }

    pub fn channels(&self) -> u32 {
        self.channels
    }

    pub fn shared_size(&self) -> u32 {
        self.shared
    }

    pub fn busy(&self, class: CallClass) -> u32 {
        self.busy[class.index()]
    }

    pub fn shared_busy(&self) -> u32 {
        self.shared_busy
    }

    pub fn total_busy(&self) -> u32 {
        self.busy.iter().sum::<u32>() + self.shared_busy
    }

    pub fn queue_len(&self, class: CallClass) -> usize {
        self.queues[class.index()].len()
    }

    pub fn is_queued(&self, call: u64, class: CallClass) -> bool {
        self.queues[class.index()].iter().any(|w| w.call == call)
    }

    fn dedicated_limit(&self, class: CallClass) -> u32 {
        let size = self.rv.pool(class);
        match self.fault {
            Some(OccupancyFault::DedicatedOffByOne) => size.saturating_sub(1),
            None => size,
        }
    }

    fn has_physical_room(&self) -> bool {
        self.total_busy() < self.channels
    }

    fn dedicated_free(&self, class: CallClass) -> bool {
        self.busy[class.index()] < self.dedicated_limit(class) && self.has_physical_room()
    }

    fn shared_free(&self) -> bool {
        self.shared_busy < self.shared && self.has_physical_room()
    }

    fn occupy(&mut self, pool: Pool) {
        match pool {
            Pool::Dedicated(k) => self.busy[k.index()] += 1,
            Pool::Shared => self.shared_busy += 1,
        }
    }

    fn free_pool_for(&self, class: CallClass) -> Option<Pool> {
        if self.dedicated_free(class) {
            Some(Pool::Dedicated(class))
        } else if self.shared_free() {
            Some(Pool::Shared)
        } else {
            None
        }
    }

    pub fn try_admit(&mut self, call: u64, class: CallClass, now: f64) -> Admission {
        if let Some(pool) = self.free_pool_for(class) {
            self.occupy(pool);
            return Admission::Admitted(pool);
        }
        let k = class.index();
        if (self.queues[k].len() as u64) < self.queue_capacity[k] as u64 {
            self.queues[k].push_back(Waiting { call, since: now });
            Admission::Queued
        } else {
            Admission::Refused
        }
    }

    /// Frees one channel of `pool` and hands it to an eligible queued call, if any.
    pub fn release(&mut self, pool: Pool, now: f64) -> Result<Option<Promotion>> {
        let slot = match pool {
            Pool::Dedicated(k) => &mut self.busy[k.index()],
            Pool::Shared => &mut self.shared_busy,
        };
        if *slot == 0 {
            return Err(Error::EmptyPoolRelease { cell: self.cell });
        }
        *slot -= 1;

        let candidate = match pool {
            Pool::Dedicated(k) if self.dedicated_free(k) => Some(k),
            Pool::Dedicated(_) => None,
            Pool::Shared if self.shared_free() => CallClass::PROMOTION_ORDER
                .into_iter()
                .find(|k| !self.queues[k.index()].is_empty()),
            Pool::Shared => None,
        };
        if let Some(class) = candidate {
            return Ok(self.promote(class, pool, now));
        }
        // After a pool shrank below its occupancy the freed channel may only
        // be usable through another pool.
        Ok(self.fill_one(now))
    }

    fn fill_one(&mut self, now: f64) -> Option<Promotion> {
        CallClass::PROMOTION_ORDER.into_iter().find_map(|class| {
            if self.queues[class.index()].is_empty() {
                return None;
            }
            let pool = self.free_pool_for(class)?;
            self.promote(class, pool, now)
        })
    }

    fn promote(&mut self, class: CallClass, pool: Pool, now: f64) -> Option<Promotion> {
        let w = self.queues[class.index()].pop_front()?;
        self.occupy(pool);
        Some(Promotion { call: w.call, class, pool, wait: now - w.since })
    }

    /// Removes a queued call whose deadline expired.
    pub fn renege(&mut self, call: u64, class: CallClass) -> Result<()> {
        let q = &mut self.queues[class.index()];
        let pos = q.iter().position(|w| w.call == call).ok_or(Error::NotQueued { call, class })?;
        q.remove(pos);
        Ok(())
    }

    /// Installs a new reservation. In-service calls are never preempted: a
    /// shrunk pool drains as its calls finish. Queued calls that now fit are
    /// promoted, in promotion order.
    pub fn apply_reservation(&mut self, rv: ReservationVector, now: f64) -> Result<Vec<Promotion>> {
        self.shared = crate::config::validate_reservation(&rv, self.channels)
            .map_err(|v| Error::InvalidConfig(vec![v]))?;
        self.rv = rv;
        Ok(std::iter::from_fn(|| self.fill_one(now)).collect())
    }

    /// Invariants that hold at every event boundary, including right after a
    /// pool has shrunk below its occupancy.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        if self.total_busy() > self.channels {
            return Err(format!(
                "cell {}: {} busy channels exceed C={}",
                self.cell,
                self.total_busy(),
                self.channels
            ));
        }
        for class in CallClass::ALL {
            let k = class.index();
            if self.queues[k].len() as u64 > self.queue_capacity[k] as u64 {
                return Err(format!("cell {}: {class} queue over capacity", self.cell));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(rv: ReservationVector, channels: u32, queues: [u32; 4]) -> CellState {
        CellState::new(0, channels, rv, queues).unwrap()
    }

    #[test]
    fn dedicated_pool_first() {
        let mut c = cell(ReservationVector::new(1, 1, 1, 1), 6, [0; 4]);
        assert_eq!(c.try_admit(1, CallClass::RtO, 0.0), Admission::Admitted(Pool::Dedicated(CallClass::RtO)));
        assert_eq!(c.busy(CallClass::RtO), 1);
        assert_eq!(c.try_admit(2, CallClass::RtO, 0.0), Admission::Admitted(Pool::Shared));
        assert_eq!(c.shared_busy(), 1);
    }

    #[test]
    fn pure_loss_refuses_when_full() {
        let mut c = cell(ReservationVector::new(0, 1, 0, 0), 1, [0; 4]);
        c.try_admit(1, CallClass::RtO, 0.0);
        assert_eq!(c.try_admit(2, CallClass::RtO, 0.0), Admission::Refused);
        assert_eq!(c.try_admit(3, CallClass::NrtO, 0.0), Admission::Refused);
    }

    #[test]
    fn full_pool_with_queue_space_enqueues() {
        let mut c = cell(ReservationVector::new(0, 1, 0, 0), 1, [1, 0, 0, 0]);
        c.try_admit(1, CallClass::RtO, 0.0);
        assert_eq!(c.try_admit(2, CallClass::RtO, 0.5), Admission::Queued);
        assert_eq!(c.try_admit(3, CallClass::RtO, 0.6), Admission::Refused);
        assert_eq!(c.queue_len(CallClass::RtO), 1);
    }

    #[test]
    fn release_without_waiters_just_decrements() {
        let mut c = cell(ReservationVector::new(1, 1, 1, 1), 4, [0; 4]);
        c.try_admit(1, CallClass::NrtO, 0.0);
        assert_eq!(c.release(Pool::Dedicated(CallClass::NrtO), 1.0).unwrap(), None);
        assert_eq!(c.total_busy(), 0);
    }

    #[test]
    fn shared_channel_goes_to_real_time_handoff_first() {
        let mut c = cell(ReservationVector::new(0, 0, 0, 0), 1, [1, 1, 1, 1]);
        assert_eq!(c.try_admit(1, CallClass::NrtO, 0.0), Admission::Admitted(Pool::Shared));
        assert_eq!(c.try_admit(2, CallClass::NrtO, 1.0), Admission::Queued);
        assert_eq!(c.try_admit(3, CallClass::RtH, 2.0), Admission::Queued);
        let p = c.release(Pool::Shared, 3.5).unwrap().unwrap();
        assert_eq!(p.call, 3);
        assert_eq!(p.class, CallClass::RtH);
        assert_eq!(p.pool, Pool::Shared);
        assert!((p.wait - 1.5).abs() < 1e-12);
        assert_eq!(c.shared_busy(), 1);
    }

    #[test]
    fn dedicated_channel_is_exclusive() {
        let mut c = cell(ReservationVector::new(1, 0, 0, 0), 1, [0, 0, 1, 0]);
        c.try_admit(1, CallClass::NrtO, 0.0);
        assert_eq!(c.try_admit(2, CallClass::RtH, 0.0), Admission::Queued);
        assert_eq!(c.release(Pool::Dedicated(CallClass::NrtO), 1.0).unwrap(), None);
        assert_eq!(c.queue_len(CallClass::RtH), 1);
    }

    #[test]
    fn empty_release_is_an_error() {
        let mut c = cell(ReservationVector::new(1, 1, 1, 1), 4, [0; 4]);
        assert!(c.release(Pool::Shared, 0.0).is_err());
        assert!(c.release(Pool::Dedicated(CallClass::RtH), 0.0).is_err());
    }

    #[test]
    fn renege_removes_or_fails() {
        let mut c = cell(ReservationVector::new(0, 0, 0, 0), 0, [0, 0, 2, 0]);
        assert_eq!(c.try_admit(7, CallClass::RtH, 0.0), Admission::Queued);
        assert!(c.is_queued(7, CallClass::RtH));
        c.renege(7, CallClass::RtH).unwrap();
        assert_eq!(c.queue_len(CallClass::RtH), 0);
        assert!(matches!(c.renege(7, CallClass::RtH), Err(Error::NotQueued { .. })));
    }

    #[test]
    fn shrinking_never_exceeds_physical_channels() {
        let mut c = cell(ReservationVector::new(4, 0, 0, 0), 4, [0; 4]);
        for id in 0..4 {
            c.try_admit(id, CallClass::NrtO, 0.0);
        }
        c.apply_reservation(ReservationVector::new(0, 4, 0, 0), 1.0).unwrap();
        assert_eq!(c.try_admit(9, CallClass::RtO, 1.0), Admission::Refused);
        assert!(c.check_invariants().is_ok());
        assert_eq!(c.release(Pool::Dedicated(CallClass::NrtO), 2.0).unwrap(), None);
        assert_eq!(c.try_admit(10, CallClass::RtO, 2.0), Admission::Admitted(Pool::Dedicated(CallClass::RtO)));
        assert_eq!(c.total_busy(), 4);
    }

    #[test]
    fn growing_pool_drains_queue() {
        let mut c = cell(ReservationVector::new(0, 0, 0, 0), 2, [0, 0, 0, 2]);
        c.try_admit(1, CallClass::NrtH, 0.0);
        c.try_admit(2, CallClass::NrtH, 0.0);
        // two shared channels: both admitted; third queues
        assert_eq!(c.try_admit(3, CallClass::NrtH, 0.0), Admission::Queued);
        let p = c.apply_reservation(ReservationVector::new(0, 0, 2, 0), 1.0).unwrap();
        assert!(p.is_empty());
        let p = c.release(Pool::Shared, 2.0).unwrap().unwrap();
        assert_eq!(p.pool, Pool::Dedicated(CallClass::NrtH));
        assert_eq!(c.queue_len(CallClass::NrtH), 0);

        let mut c = cell(ReservationVector::new(0, 0, 0, 0), 1, [0, 0, 0, 1]);
        c.try_admit(1, CallClass::NrtH, 0.0);
        c.try_admit(2, CallClass::NrtH, 0.0);
        c.release(Pool::Shared, 0.5).unwrap();
        c.try_admit(3, CallClass::NrtH, 0.7);
        c.try_admit(4, CallClass::NrtH, 0.8);
        assert_eq!(c.queue_len(CallClass::NrtH), 1);
        let p = c.apply_reservation(ReservationVector::new(0, 0, 0, 0), 1.0).unwrap();
        assert!(p.is_empty());
    }

    #[test]
    fn off_by_one_fault_shrinks_dedicated_pools() {
        let mut c = cell(ReservationVector::new(0, 2, 0, 0), 2, [0; 4]).with_fault(Some(OccupancyFault::DedicatedOffByOne));
        assert!(matches!(c.try_admit(1, CallClass::RtO, 0.0), Admission::Admitted(_)));
        assert_eq!(c.try_admit(2, CallClass::RtO, 0.0), Admission::Refused);
    }
}
