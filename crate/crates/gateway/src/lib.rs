//! LLM access for evidence gathering: HTTP, replay and scripted backends
//! behind one content-addressed response cache.

pub mod backend;
pub mod cache;
pub mod error;
pub mod evidence;
pub mod gateway;
pub mod http;

pub use backend::{BackendKind, BackendSpec, Route, ScriptRule, ScriptTable, SCRIPTED_MODEL};
pub use cache::{cache_key, CacheEntry, CacheSummary, ResponseCache};
pub use error::GatewayError;
pub use evidence::{average_triples, gather_evidence};
pub use gateway::{Gateway, GatewayStats};
pub use http::{completions_url, ChatClient, RetryPolicy};
