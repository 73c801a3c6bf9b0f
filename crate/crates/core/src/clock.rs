//! Time sources. All timestamps are milliseconds since the Unix epoch and
//! never go backwards.

use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

pub trait Clock: Send {
    fn now_ms(&mut self) -> i64;
}

/// Wall clock, clamped so readings are nondecreasing.
#[derive(Debug, Default)]
pub struct SystemClock {
    last: i64,
}

impl Clock for SystemClock {
    fn now_ms(&mut self) -> i64 {
        let now = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as i64)
            .unwrap_or(0);
        self.last = self.last.max(now);
        self.last
    }
}

/// Deterministic clock: every reading advances by a fixed step. Clones share
/// the same time, so a driver can jump it forward with [`ManualClock::advance_to`]
/// while a runner owns another handle.
#[derive(Debug, Clone)]
pub struct ManualClock {
    now: Arc<AtomicI64>,
    step: i64,
}

impl ManualClock {
    pub fn new(start: i64, step: i64) -> Self {
        Self {
            now: Arc::new(AtomicI64::new(start)),
            step,
        }
    }

    /// Moves the clock to `t` unless it is already past it.
    pub fn advance_to(&self, t: i64) {
        self.now.fetch_max(t, Ordering::SeqCst);
    }

    pub fn peek(&self) -> i64 {
        self.now.load(Ordering::SeqCst)
    }
}

impl Clock for ManualClock {
    fn now_ms(&mut self) -> i64 {
        self.now.fetch_add(self.step, Ordering::SeqCst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manual_clock_steps_and_jumps() {
        let mut clock = ManualClock::new(100, 10);
        let handle = clock.clone();
        assert_eq!(clock.now_ms(), 100);
        assert_eq!(clock.now_ms(), 110);
        handle.advance_to(500);
        assert_eq!(clock.now_ms(), 500);
        handle.advance_to(0);
        assert_eq!(clock.now_ms(), 510);
    }

    #[test]
    fn system_clock_is_monotone() {
        let mut clock = SystemClock::default();
        let a = clock.now_ms();
        let b = clock.now_ms();
        assert!(b >= a);
    }
}
