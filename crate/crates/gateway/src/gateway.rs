use std::sync::atomic::{AtomicU64, Ordering};

use chrono::Utc;
use log::debug;
use serde::{Deserialize, Serialize};

use eci_core::PromptRequest;

use crate::backend::{BackendKind, BackendSpec, Route};
use crate::cache::{cache_key, CacheEntry, ResponseCache};
use crate::error::GatewayError;
use crate::http::{ChatClient, RetryPolicy};

/// Snapshot of the query counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatewayStats {
    pub queries: u64,
    pub cache_hits: u64,
    pub network_calls: u64,
    pub scripted_answers: u64,
    pub failures: u64,
}

#[derive(Default)]
struct Counters {
    queries: AtomicU64,
    cache_hits: AtomicU64,
    network_calls: AtomicU64,
    scripted_answers: AtomicU64,
    failures: AtomicU64,
}

fn bump(c: &AtomicU64, by: u64) {
    c.fetch_add(by, Ordering::Relaxed);
}

/// Cache-first access to one backend. Shareable across threads.
pub struct Gateway {
    spec: BackendSpec,
    cache: Option<ResponseCache>,
    client: Option<ChatClient>,
    counters: Counters,
}

impl Gateway {
    pub fn new(spec: BackendSpec, policy: RetryPolicy) -> Result<Self, GatewayError> {
        spec.validate()?;
        let cache = spec.cache_dir.as_deref().map(ResponseCache::open).transpose()?;
        let client = match spec.kind {
            BackendKind::Http => {
                let api_key = match &spec.api_key_env {
                    Some(var) => Some(std::env::var(var).map_err(|_| {
                        GatewayError::Spec(format!("environment variable `{var}` is not set"))
                    })?),
                    None => None,
                };
                let endpoint = spec.endpoint.as_deref().expect("validated");
                Some(ChatClient::new(endpoint, api_key, policy)?)
            }
            _ => None,
        };
        Ok(Gateway {
            spec,
            cache,
            client,
            counters: Counters::default(),
        })
    }

    pub fn spec(&self) -> &BackendSpec {
        &self.spec
    }

    pub fn cache(&self) -> Option<&ResponseCache> {
        self.cache.as_ref()
    }

    pub fn stats(&self) -> GatewayStats {
        let c = &self.counters;
        GatewayStats {
            queries: c.queries.load(Ordering::Relaxed),
            cache_hits: c.cache_hits.load(Ordering::Relaxed),
            network_calls: c.network_calls.load(Ordering::Relaxed),
            scripted_answers: c.scripted_answers.load(Ordering::Relaxed),
            failures: c.failures.load(Ordering::Relaxed),
        }
    }

    pub fn key_for(&self, prompt: &str, round: u32) -> String {
        cache_key(&self.spec.model, self.spec.temperature, self.spec.top_p, prompt, round)
    }

    /// Raw response text for a rendered sub-task prompt.
    pub fn query(&self, request: &PromptRequest, round: u32) -> Result<String, GatewayError> {
        self.query_route(Route {
            tag: request.task.as_str(),
            event1: &request.event1,
            event2: &request.event2,
            prompt: &request.rendered,
            round,
        })
    }

    /// Raw response text for any prompt. `route.tag` and the event names are
    /// only used to pick scripted responses.
    pub fn query_route(&self, route: Route) -> Result<String, GatewayError> {
        bump(&self.counters.queries, 1);
        let out = self.answer(&route);
        if out.is_err() {
            bump(&self.counters.failures, 1);
        }
        out
    }

    fn answer(&self, route: &Route) -> Result<String, GatewayError> {
        if route.round < 1 {
            return Err(GatewayError::Spec("round indices start at 1".into()));
        }
        let key = self.key_for(route.prompt, route.round);
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.get(&key)? {
                bump(&self.counters.cache_hits, 1);
                return Ok(hit.raw_response);
            }
        }
        let text = match self.spec.kind {
            BackendKind::Replay => return Err(GatewayError::CacheMiss { key }),
            BackendKind::Scripted => {
                let table = self.spec.script.as_ref().expect("validated");
                let text = table.lookup(route).ok_or_else(|| GatewayError::ScriptMiss {
                    task: route.tag.to_string(),
                    event1: route.event1.to_string(),
                    event2: route.event2.to_string(),
                })?;
                bump(&self.counters.scripted_answers, 1);
                text.to_string()
            }
            BackendKind::Http => {
                let client = self.client.as_ref().expect("built for http");
                let (text, attempts) =
                    client.complete(&self.spec.model, route.prompt, self.spec.temperature, self.spec.top_p)?;
                bump(&self.counters.network_calls, attempts as u64);
                debug!("{} round {} answered after {attempts} attempt(s)", route.tag, route.round);
                text
            }
        };
        match &self.cache {
            Some(cache) => {
                let stored = cache.put(CacheEntry {
                    key,
                    raw_response: text,
                    created_at: Utc::now(),
                })?;
                Ok(stored.raw_response)
            }
            None => Ok(text),
        }
    }
}
