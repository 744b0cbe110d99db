use std::collections::VecDeque;
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

/// Sliding-window limiter: at most `limit` grants in any window of length
/// `window`. Shared between worker threads.
#[derive(Debug)]
pub struct RateLimiter {
    limit: usize,
    window: Duration,
    granted: Mutex<VecDeque<Instant>>,
}

impl RateLimiter {
    /// `limit` is clamped to at least one.
    pub fn new(limit: u32, window: Duration) -> Self {
        Self { limit: limit.max(1) as usize, window, granted: Mutex::new(VecDeque::new()) }
    }

    pub fn per_second(limit: u32) -> Self {
        Self::new(limit, Duration::from_secs(1))
    }

    /// Blocks until a request may be dispatched and returns the grant time.
    pub fn acquire(&self) -> Instant {
        loop {
            let wait = {
                let mut granted = self.granted.lock().expect("rate limiter lock poisoned");
                let now = Instant::now();
                while granted.front().is_some_and(|t| now.duration_since(*t) >= self.window) {
                    granted.pop_front();
                }
                if granted.len() < self.limit {
                    granted.push_back(now);
                    return now;
                }
                // oldest grant leaves the window at front + window
                (*granted.front().expect("non-empty window") + self.window).saturating_duration_since(now)
            };
            thread::sleep(wait.max(Duration::from_micros(100)));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    #[test]
    fn no_window_exceeds_the_limit() {
        let limiter = Arc::new(RateLimiter::new(4, Duration::from_millis(200)));
        let grants = Arc::new(Mutex::new(Vec::new()));
        thread::scope(|s| {
            for _ in 0..3 {
                let limiter = limiter.clone();
                let grants = grants.clone();
                s.spawn(move || {
                    for _ in 0..5 {
                        let t = limiter.acquire();
                        grants.lock().unwrap().push(t);
                    }
                });
            }
        });
        let mut grants = grants.lock().unwrap().clone();
        grants.sort();
        assert_eq!(grants.len(), 15);
        for i in 0..grants.len() - 4 {
            assert!(grants[i + 4].duration_since(grants[i]) >= Duration::from_millis(200));
        }
    }
}
