use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::{Duration, Instant};

pub trait Clock: Send + Sync {
    /// Time since an arbitrary fixed origin.
    fn now(&self) -> Duration;
    fn sleep(&self, d: Duration);
}

pub struct SystemClock {
    origin: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        Self { origin: Instant::now() }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Clock that only moves when someone sleeps on it.
#[derive(Default)]
pub struct VirtualClock {
    now: Mutex<Duration>,
}

impl VirtualClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn advance(&self, d: Duration) {
        *self.now.lock().unwrap() += d;
    }
}

impl Clock for VirtualClock {
    fn now(&self) -> Duration {
        *self.now.lock().unwrap()
    }

    fn sleep(&self, d: Duration) {
        self.advance(d);
    }
}

struct Window {
    limit: usize,
    span: Duration,
    log: VecDeque<Duration>,
}

/// Sliding-log limiter over several windows. A request is admitted only
/// when every window holds fewer than `limit` admissions in the last `span`.
pub struct RateLimiter {
    windows: Mutex<Vec<Window>>,
}

impl RateLimiter {
    /// `limits` as `(max requests, window length)` pairs.
    pub fn new(limits: &[(usize, Duration)]) -> Self {
        let windows = limits.iter().map(|&(limit, span)| Window { limit, span, log: VecDeque::new() }).collect();
        Self { windows: Mutex::new(windows) }
    }

    /// Admit now, or report how long to wait before trying again.
    pub fn try_acquire(&self, now: Duration) -> Result<(), Duration> {
        let mut windows = self.windows.lock().unwrap();
        let mut wait = Duration::ZERO;
        for w in windows.iter_mut() {
            while w.log.front().is_some_and(|&t| t + w.span <= now) {
                w.log.pop_front();
            }
            if w.log.len() >= w.limit {
                let oldest = w.log[w.log.len() - w.limit];
                wait = wait.max(oldest + w.span - now);
            }
        }
        if wait > Duration::ZERO {
            return Err(wait);
        }
        for w in windows.iter_mut() {
            w.log.push_back(now);
        }
        Ok(())
    }

    /// Block on `clock` until admitted; returns the admission time.
    pub fn acquire(&self, clock: &dyn Clock) -> Duration {
        loop {
            let now = clock.now();
            match self.try_acquire(now) {
                Ok(()) => return now,
                Err(wait) => clock.sleep(wait),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_window_blocks() {
        let rl = RateLimiter::new(&[(2, Duration::from_secs(1))]);
        assert!(rl.try_acquire(Duration::ZERO).is_ok());
        assert!(rl.try_acquire(Duration::from_millis(100)).is_ok());
        assert_eq!(rl.try_acquire(Duration::from_millis(200)), Err(Duration::from_millis(800)));
        assert!(rl.try_acquire(Duration::from_millis(1000)).is_ok());
    }

    #[test]
    fn virtual_clock_sleeps_forward() {
        let clock = VirtualClock::new();
        let rl = RateLimiter::new(&[(20, Duration::from_secs(1)), (100, Duration::from_secs(120))]);
        let times: Vec<Duration> = (0..101).map(|_| rl.acquire(&clock)).collect();
        assert_eq!(times[99], Duration::from_secs(4));
        assert_eq!(times[100], Duration::from_secs(120));
    }
}
