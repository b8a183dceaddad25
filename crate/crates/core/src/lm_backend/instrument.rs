use std::collections::BTreeMap;
use std::sync::Mutex;

use async_trait::async_trait;

use super::{Backend, BackendError, LanguageModel, LmRequest, LmResponse};

#[derive(Debug, Clone, PartialEq)]
pub struct CallRecord {
    pub request: LmRequest,
    pub response: Option<String>,
}

/// Pass-through wrapper that logs every request in call order.
pub struct Instrumented {
    inner: Backend,
    log: Mutex<Vec<CallRecord>>,
}

impl Instrumented {
    pub fn new(inner: Backend) -> Self {
        Self {
            inner,
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn calls(&self) -> Vec<CallRecord> {
        self.log.lock().expect("call log poisoned").clone()
    }

    pub fn tags(&self) -> Vec<String> {
        self.log
            .lock()
            .expect("call log poisoned")
            .iter()
            .map(|c| c.request.tag.clone())
            .collect()
    }

    pub fn counts(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for c in self.log.lock().expect("call log poisoned").iter() {
            *out.entry(c.request.tag.clone()).or_insert(0) += 1;
        }
        out
    }

    pub fn len(&self) -> usize {
        self.log.lock().expect("call log poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        self.log.lock().expect("call log poisoned").clear();
    }
}

#[async_trait]
impl LanguageModel for Instrumented {
    async fn complete(&self, request: &LmRequest) -> Result<LmResponse, BackendError> {
        let result = self.inner.complete(request).await;
        self.log.lock().expect("call log poisoned").push(CallRecord {
            request: request.clone(),
            response: result.as_ref().ok().map(|r| r.text.clone()),
        });
        result
    }
}
