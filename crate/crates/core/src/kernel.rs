//! Event queue, simulation clock and seeded random streams.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::CallClass;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    /// A fresh arrival from the traffic source of `(cell, class)`.
    Arrival { cell: usize, class: CallClass },
    ServiceEnd { call: u64 },
    /// Dwell expiry of an in-service call (mobility mode).
    HandoffRequest { call: u64 },
    /// Deadline of a queued call. `epoch` identifies the queueing episode so
    /// that deadlines from an earlier stay in some queue are ignored.
    Renege { call: u64, cell: usize, class: CallClass, epoch: u32 },
    ControlTick,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub seq: u64,
    pub kind: EventKind,
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time.total_cmp(&other.time).then(self.seq.cmp(&other.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Future event set ordered by `(time, seq)`; equal times pop in insertion order.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<Event>>,
    clock: f64,
    next_seq: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Inserts an event and returns its sequence number.
    pub fn schedule(&mut self, time: f64, kind: EventKind) -> Result<u64> {
        if time.is_nan() || time < self.clock {
            return Err(Error::PastEvent { event: time, clock: self.clock });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(Event { time, seq, kind }));
        Ok(seq)
    }

    pub fn pop_next(&mut self) -> Option<Event> {
        let Reverse(event) = self.heap.pop()?;
        self.clock = event.time;
        Some(event)
    }

    pub fn peek_time(&self) -> Option<f64> {
        self.heap.peek().map(|Reverse(e)| e.time)
    }
}

pub type Stream = ChaCha8Rng;

/// What a random stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Interarrival = 1,
    Duration = 2,
    Dwell = 3,
    HandoffTarget = 4,
    Controller = 5,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub cell: usize,
    pub class: Option<CallClass>,
    pub purpose: Purpose,
}

impl StreamKey {
    pub fn new(cell: usize, class: Option<CallClass>, purpose: Purpose) -> Self {
        StreamKey { cell, class, purpose }
    }

    fn tag(&self) -> u64 {
        let class = self.class.map_or(0, |c| c.index() as u64 + 1);
        ((self.cell as u64) << 16) ^ (class << 8) ^ self.purpose as u64
    }
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one named stream; depends only on the master seed and the key.
pub fn stream_seed(master: u64, key: StreamKey) -> u64 {
    mix64(mix64(master) ^ mix64(key.tag()))
}

pub fn stream_for(master: u64, key: StreamKey) -> Stream {
    Stream::seed_from_u64(stream_seed(master, key))
}

/// Lazily created streams, one per `(cell, class, purpose)`.
#[derive(Debug)]
pub struct RandomStreams {
    master: u64,
    streams: HashMap<StreamKey, Stream>,
}

impl RandomStreams {
    pub fn new(master: u64) -> Self {
        RandomStreams { master, streams: HashMap::new() }
    }

    pub fn get(&mut self, key: StreamKey) -> &mut Stream {
        let master = self.master;
        self.streams.entry(key).or_insert_with(|| stream_for(master, key))
    }
}

/// Uniform draw in (0, 1].
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.gen::<f64>()
}

/// Exponential variate with the given rate (per second).
pub fn exp_sample<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> Result<f64> {
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(Error::NonPositiveRate(rate));
    }
    Ok(-open_unit(rng).ln() / rate)
}
