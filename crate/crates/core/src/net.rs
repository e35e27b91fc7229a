//! Shared plumbing for remote providers: bounded concurrency, retry with
//! exponential backoff, and a JSON-over-HTTP POST helper.
//!
//! Auth material is read from the environment by callers and passed through
//! here; it is never written into error messages or logs.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

/// Retry schedule for transient failures. Attempt n (1-based) sleeps
/// `base_delay * 2^(n-1)` before retrying, capped at `max_delay`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_millis(250),
            max_delay: Duration::from_secs(4),
        }
    }
}

impl RetryPolicy {
    pub fn no_delay(max_attempts: u32) -> Self {
        RetryPolicy {
            max_attempts,
            base_delay: Duration::ZERO,
            max_delay: Duration::ZERO,
        }
    }

    fn delay_before(&self, next_attempt: u32) -> Duration {
        let factor = 1u32 << (next_attempt - 2).min(16);
        (self.base_delay * factor).min(self.max_delay)
    }
}

/// Transport-level failure. `retryable` distinguishes transient conditions
/// (connection errors, 429, 5xx) from protocol errors that will not heal.
#[derive(Debug, Clone)]
pub struct HttpError {
    pub retryable: bool,
    pub message: String,
}

/// Outcome of a retry loop that never produced a success.
#[derive(Debug, Clone)]
pub struct RetryExhausted {
    pub attempts: u32,
    pub last: HttpError,
}

/// Run `op` under `policy`. Retryable errors are retried with backoff until
/// attempts run out; a non-retryable error aborts immediately.
pub fn with_retry<T>(
    policy: &RetryPolicy,
    mut op: impl FnMut() -> Result<T, HttpError>,
) -> Result<T, RetryExhausted> {
    assert!(policy.max_attempts >= 1);
    let mut attempt = 0;
    loop {
        attempt += 1;
        match op() {
            Ok(value) => return Ok(value),
            Err(err) if err.retryable && attempt < policy.max_attempts => {
                std::thread::sleep(policy.delay_before(attempt + 1));
            }
            Err(err) => {
                return Err(RetryExhausted {
                    attempts: attempt,
                    last: err,
                })
            }
        }
    }
}

/// Counting semaphore bounding in-flight remote requests.
pub struct Semaphore {
    permits: Mutex<usize>,
    available: Condvar,
}

impl Semaphore {
    pub fn new(permits: usize) -> Self {
        assert!(permits >= 1, "at least one permit required");
        Semaphore {
            permits: Mutex::new(permits),
            available: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut permits = self.permits.lock().unwrap();
        while *permits == 0 {
            permits = self.available.wait(permits).unwrap();
        }
        *permits -= 1;
        SemaphoreGuard { semaphore: self }
    }
}

pub struct SemaphoreGuard<'a> {
    semaphore: &'a Semaphore,
}

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        let mut permits = self.semaphore.permits.lock().unwrap();
        *permits += 1;
        self.semaphore.available.notify_one();
    }
}

/// POST `body` as JSON to `url`, optionally with a bearer token, and parse
/// the JSON response. Maps connection failures, 429 and 5xx to retryable
/// errors; other non-2xx statuses and malformed bodies are terminal.
pub fn post_json(
    client: &reqwest::blocking::Client,
    url: &str,
    bearer: Option<&str>,
    body: &serde_json::Value,
) -> Result<serde_json::Value, HttpError> {
    let mut request = client.post(url).json(body);
    if let Some(token) = bearer {
        request = request.bearer_auth(token);
    }
    let response = request.send().map_err(|e| HttpError {
        retryable: true,
        // reqwest error display includes the URL, not the auth header.
        message: format!("request to {url} failed: {e}"),
    })?;
    let status = response.status();
    let text = response.text().map_err(|e| HttpError {
        retryable: true,
        message: format!("reading response body from {url} failed: {e}"),
    })?;
    if !status.is_success() {
        let retryable = status.as_u16() == 429 || status.is_server_error();
        return Err(HttpError {
            retryable,
            message: format!("{url} returned {status}: {}", truncate(&text, 300)),
        });
    }
    serde_json::from_str(&text).map_err(|e| HttpError {
        retryable: false,
        message: format!("{url} returned non-JSON body ({e}): {}", truncate(&text, 300)),
    })
}

fn truncate(s: &str, max: usize) -> &str {
    match s.char_indices().nth(max) {
        Some((idx, _)) => &s[..idx],
        None => s,
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU32, Ordering};

    #[test]
    fn retry_stops_after_max_attempts() {
        let calls = AtomicU32::new(0);
        let result: Result<(), _> = with_retry(&RetryPolicy::no_delay(3), || {
            calls.fetch_add(1, Ordering::Relaxed);
            Err(HttpError {
                retryable: true,
                message: "down".into(),
            })
        });
        let err = result.unwrap_err();
        assert_eq!(err.attempts, 3);
        assert_eq!(calls.load(Ordering::Relaxed), 3);
    }

    #[test]
    fn non_retryable_error_aborts_immediately() {
        let calls = AtomicU32::new(0);
        let result: Result<(), _> = with_retry(&RetryPolicy::no_delay(5), || {
            calls.fetch_add(1, Ordering::Relaxed);
            Err(HttpError {
                retryable: false,
                message: "bad request".into(),
            })
        });
        assert_eq!(result.unwrap_err().attempts, 1);
        assert_eq!(calls.load(Ordering::Relaxed), 1);
    }

    #[test]
    fn retry_returns_first_success() {
        let calls = AtomicU32::new(0);
        let result = with_retry(&RetryPolicy::no_delay(5), || {
            if calls.fetch_add(1, Ordering::Relaxed) < 2 {
                Err(HttpError {
                    retryable: true,
                    message: "flaky".into(),
                })
            } else {
                Ok(42)
            }
        });
        assert_eq!(result.unwrap(), 42);
        assert_eq!(calls.load(Ordering::Relaxed), 3);
    }

    #[test]
    fn backoff_delays_double_and_cap() {
        let policy = RetryPolicy {
            max_attempts: 10,
            base_delay: Duration::from_millis(100),
            max_delay: Duration::from_millis(350),
        };
        assert_eq!(policy.delay_before(2), Duration::from_millis(100));
        assert_eq!(policy.delay_before(3), Duration::from_millis(200));
        assert_eq!(policy.delay_before(4), Duration::from_millis(350));
        assert_eq!(policy.delay_before(5), Duration::from_millis(350));
    }

    #[test]
    fn semaphore_bounds_concurrency() {
        use std::sync::Arc;
        let semaphore = Arc::new(Semaphore::new(2));
        let active = Arc::new(AtomicU32::new(0));
        let peak = Arc::new(AtomicU32::new(0));
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let semaphore = Arc::clone(&semaphore);
                let active = Arc::clone(&active);
                let peak = Arc::clone(&peak);
                std::thread::spawn(move || {
                    let _guard = semaphore.acquire();
                    let now = active.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(now, Ordering::SeqCst);
                    std::thread::sleep(Duration::from_millis(10));
                    active.fetch_sub(1, Ordering::SeqCst);
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert!(peak.load(Ordering::SeqCst) <= 2);
    }
}
