use std::time::Duration;

use async_trait::async_trait;

use super::{Backend, BackendError, LanguageModel, LmRequest, LmResponse};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

struct Retrying {
    inner: Backend,
    policy: RetryPolicy,
}

/// Retries transient failures with exponential backoff
/// (`base_delay`, `2 * base_delay`, ...). Anything else propagates at once.
pub fn with_retry(inner: Backend, policy: RetryPolicy) -> Result<Backend, BackendError> {
    if policy.max_attempts == 0 {
        return Err(BackendError::Config("max_attempts must be >= 1".into()));
    }
    Ok(std::sync::Arc::new(Retrying { inner, policy }))
}

#[async_trait]
impl LanguageModel for Retrying {
    async fn complete(&self, request: &LmRequest) -> Result<LmResponse, BackendError> {
        let mut attempt = 1;
        loop {
            match self.inner.complete(request).await {
                Ok(r) => return Ok(r),
                Err(e) if e.is_transient() && attempt < self.policy.max_attempts => {
                    let delay = self.policy.base_delay * 2u32.saturating_pow(attempt - 1);
                    tracing::warn!(tag = %request.tag, attempt, error = %e, "transient failure, retrying");
                    tokio::time::sleep(delay).await;
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm_backend::Sampling;
    use std::sync::atomic::{AtomicU32, Ordering};
    use std::sync::Arc;

    struct Flaky {
        fail_first: u32,
        error: BackendError,
        calls: AtomicU32,
    }

    #[async_trait]
    impl LanguageModel for Flaky {
        async fn complete(&self, _: &LmRequest) -> Result<LmResponse, BackendError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.fail_first {
                Err(self.error.clone())
            } else {
                Ok(LmResponse::text("ok"))
            }
        }
    }

    fn flaky(fail_first: u32, error: BackendError) -> Arc<Flaky> {
        Arc::new(Flaky {
            fail_first,
            error,
            calls: AtomicU32::new(0),
        })
    }

    fn policy(n: u32) -> RetryPolicy {
        RetryPolicy {
            max_attempts: n,
            base_delay: Duration::from_millis(1),
        }
    }

    fn req() -> LmRequest {
        LmRequest::single("t", "", "x", Sampling::GENERAL)
    }

    #[tokio::test]
    async fn two_failures_then_success() {
        let stub = flaky(2, BackendError::Status { status: 503, body: String::new() });
        let wrapped = with_retry(stub.clone(), policy(3)).unwrap();
        assert_eq!(wrapped.complete(&req()).await.unwrap().text, "ok");
        assert_eq!(stub.calls.load(Ordering::SeqCst), 3);
    }

    #[tokio::test]
    async fn single_attempt_is_unwrapped_behaviour() {
        let stub = flaky(1, BackendError::Network("down".into()));
        let wrapped = with_retry(stub.clone(), policy(1)).unwrap();
        assert_eq!(
            wrapped.complete(&req()).await.unwrap_err(),
            BackendError::Network("down".into())
        );
        assert_eq!(stub.calls.load(Ordering::SeqCst), 1);
    }

    #[tokio::test]
    async fn unauthorized_propagates_immediately() {
        let stub = flaky(5, BackendError::Status { status: 401, body: "no".into() });
        let wrapped = with_retry(stub.clone(), policy(4)).unwrap();
        assert!(wrapped.complete(&req()).await.is_err());
        assert_eq!(stub.calls.load(Ordering::SeqCst), 1);
    }

    #[tokio::test]
    async fn exhausted_attempts_return_last_error() {
        let stub = flaky(10, BackendError::Status { status: 429, body: "slow".into() });
        let wrapped = with_retry(stub.clone(), policy(3)).unwrap();
        let err = wrapped.complete(&req()).await.unwrap_err();
        assert_eq!(err, BackendError::Status { status: 429, body: "slow".into() });
        assert_eq!(stub.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn zero_attempts_rejected() {
        let stub = flaky(0, BackendError::Network(String::new()));
        assert!(with_retry(stub, policy(0)).is_err());
    }
}
