//! Deterministic discrete-event core: simulation clock, totally ordered event
//! queue, and seeded random streams.
//!
//! Events are ordered by `(fire_at, seq)` where `seq` is a monotone insertion
//! counter. The FIFO tie-break makes dispatch order independent of heap
//! internals, so identical inputs replay identically on any platform.
//!
//! A kernel instance is strictly single-threaded. Event handlers may call
//! [`Kernel::schedule`] and [`Kernel::cancel`] but must not re-enter
//! [`Kernel::run`]; re-entry is detected and rejected.

mod rng;

pub use rng::{fnv1a64, RandomStream, RngError, RNG_ALGORITHM};

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::fmt;

use thiserror::Error;

/// Simulation time in seconds. Starts at zero and never decreases in a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, PartialOrd)]
pub struct SimTime(pub f64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0.0);

    pub fn secs(self) -> f64 {
        self.0
    }

    pub fn total_cmp(&self, other: &SimTime) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl std::ops::Add<f64> for SimTime {
    type Output = SimTime;
    fn add(self, delay: f64) -> SimTime {
        SimTime(self.0 + delay)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}", self.0)
    }
}

pub type EventSeq = u64;

/// Handle returned by [`Kernel::schedule`]; allows later cancellation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct EventHandle(EventSeq);

/// A scheduled action: fire time, insertion counter, and payload.
#[derive(Clone, Debug)]
pub struct SimEvent<K> {
    pub fire_at: SimTime,
    pub seq: EventSeq,
    pub kind: K,
}

struct Entry<K> {
    fire_at: SimTime,
    seq: EventSeq,
    kind: K,
}

// BinaryHeap is a max-heap; reverse the comparison to pop the earliest
// (fire_at, seq) first.
impl<K> Ord for Entry<K> {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .fire_at
            .total_cmp(&self.fire_at)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl<K> PartialOrd for Entry<K> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<K> PartialEq for Entry<K> {
    fn eq(&self, other: &Self) -> bool {
        self.seq == other.seq
    }
}

impl<K> Eq for Entry<K> {}

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("clock violation: event scheduled at t={requested:.6} behind clock t={now:.6}")]
    ClockViolation { requested: f64, now: f64 },
    #[error("event fire time must be finite, got {requested}")]
    NonFiniteTime { requested: f64 },
    #[error("handler fault at t={time:.6} on event #{seq} ({kind}): {detail}")]
    HandlerFault {
        time: f64,
        seq: EventSeq,
        kind: String,
        detail: String,
    },
    #[error("run() re-entered from an event handler")]
    ReentrantRun,
}

/// Consumer of dispatched events. Receives the kernel back so it can
/// schedule or cancel follow-up events.
pub trait EventHandler<K> {
    fn handle(&mut self, kernel: &mut Kernel<K>, event: SimEvent<K>) -> Result<(), String>;
}

/// Single-threaded discrete-event kernel.
pub struct Kernel<K> {
    queue: BinaryHeap<Entry<K>>,
    pending: HashSet<EventSeq>,
    cancelled: HashSet<EventSeq>,
    now: SimTime,
    next_seq: EventSeq,
    dispatched: u64,
    running: bool,
}

impl<K: fmt::Debug> Default for Kernel<K> {
    fn default() -> Self {
        Self::new()
    }
}

impl<K: fmt::Debug> Kernel<K> {
    pub fn new() -> Self {
        Kernel {
            queue: BinaryHeap::new(),
            pending: HashSet::new(),
            cancelled: HashSet::new(),
            now: SimTime::ZERO,
            next_seq: 0,
            dispatched: 0,
            running: false,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Total events dispatched so far.
    pub fn dispatched(&self) -> u64 {
        self.dispatched
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    /// Enqueue an event. Scheduling in the past is a clock violation.
    pub fn schedule(&mut self, fire_at: SimTime, kind: K) -> Result<EventHandle, KernelError> {
        if !fire_at.0.is_finite() {
            return Err(KernelError::NonFiniteTime {
                requested: fire_at.0,
            });
        }
        if fire_at.total_cmp(&self.now) == Ordering::Less {
            return Err(KernelError::ClockViolation {
                requested: fire_at.0,
                now: self.now.0,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.pending.insert(seq);
        self.queue.push(Entry { fire_at, seq, kind });
        Ok(EventHandle(seq))
    }

    /// Enqueue `delay` seconds after the current clock.
    pub fn schedule_in(&mut self, delay: f64, kind: K) -> Result<EventHandle, KernelError> {
        self.schedule(self.now + delay, kind)
    }

    /// Returns true iff the event had not yet fired; a cancelled event never
    /// dispatches. Idempotent: cancelling twice returns false the second time.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        if self.pending.remove(&handle.0) {
            self.cancelled.insert(handle.0);
            true
        } else {
            false
        }
    }

    /// Dispatch all events with `fire_at <= until` in `(fire_at, seq)` order,
    /// advancing the clock to each fire time and finally to `until`.
    /// Returns the number of events dispatched by this call.
    pub fn run<H: EventHandler<K>>(
        &mut self,
        until: SimTime,
        handler: &mut H,
    ) -> Result<u64, KernelError> {
        if self.running {
            return Err(KernelError::ReentrantRun);
        }
        self.running = true;
        let result = self.run_loop(until, handler);
        self.running = false;
        result
    }

    fn run_loop<H: EventHandler<K>>(
        &mut self,
        until: SimTime,
        handler: &mut H,
    ) -> Result<u64, KernelError> {
        let mut count = 0u64;
        loop {
            match self.queue.peek() {
                Some(top) if top.fire_at.total_cmp(&until) != Ordering::Greater => {}
                _ => break,
            }
            let entry = self.queue.pop().expect("peeked entry vanished");
            if self.cancelled.remove(&entry.seq) {
                continue;
            }
            self.pending.remove(&entry.seq);
            debug_assert!(entry.fire_at.total_cmp(&self.now) != Ordering::Less);
            self.now = entry.fire_at;
            self.dispatched += 1;
            count += 1;
            let event = SimEvent {
                fire_at: entry.fire_at,
                seq: entry.seq,
                kind: entry.kind,
            };
            let kind_desc = format!("{:?}", event.kind);
            if let Err(detail) = handler.handle(self, event) {
                return Err(KernelError::HandlerFault {
                    time: self.now.0,
                    seq: self.dispatched,
                    kind: kind_desc,
                    detail,
                });
            }
        }
        if until.total_cmp(&self.now) == Ordering::Greater {
            self.now = until;
        }
        Ok(count)
    }
}
