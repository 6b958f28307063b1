//! Wall-clock measurement for kernels.

use std::time::{Duration, Instant};

/// Monotonic stopwatch with nanosecond resolution.
#[derive(Debug, Clone, Copy)]
pub struct Stopwatch(Instant);

impl Stopwatch {
    pub fn start() -> Self {
        Stopwatch(Instant::now())
    }

    /// Time since [`Stopwatch::start`], never less than one nanosecond so
    /// derived rates stay finite.
    pub fn elapsed(&self) -> Duration {
        self.0.elapsed().max(Duration::from_nanos(1))
    }
}

/// Throughput in work units per second. Zero work is a zero rate.
pub fn rate(work: u64, elapsed: Duration) -> f64 {
    if work == 0 {
        return 0.0;
    }
    work as f64 / elapsed.as_secs_f64()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_is_work_over_seconds() {
        assert_eq!(rate(16_384, Duration::from_secs(2)), 8192.0);
        assert_eq!(rate(0, Duration::from_secs(2)), 0.0);
    }

    #[test]
    fn stopwatch_is_positive() {
        let sw = Stopwatch::start();
        assert!(sw.elapsed() > Duration::ZERO);
    }
}
