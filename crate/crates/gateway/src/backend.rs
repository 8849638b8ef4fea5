use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::GatewayError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    /// OpenAI-style chat-completion endpoint.
    Http,
    /// Cache only; a miss is an error.
    Replay,
    /// In-memory response table.
    Scripted,
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "http" => Ok(BackendKind::Http),
            "replay" => Ok(BackendKind::Replay),
            "scripted" => Ok(BackendKind::Scripted),
            other => Err(format!("unknown backend `{other}` (expected http, replay or scripted)")),
        }
    }
}

/// Which backend to talk to and with which sampling parameters. Only the
/// *name* of the API-key variable is stored, never the key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendSpec {
    pub kind: BackendKind,
    pub endpoint: Option<String>,
    pub model: String,
    pub api_key_env: Option<String>,
    pub temperature: f64,
    pub top_p: f64,
    pub cache_dir: Option<PathBuf>,
    #[serde(skip)]
    pub script: Option<ScriptTable>,
}

pub const SCRIPTED_MODEL: &str = "scripted";

impl BackendSpec {
    pub fn http(endpoint: &str, model: &str, api_key_env: Option<&str>) -> Self {
        BackendSpec {
            kind: BackendKind::Http,
            endpoint: Some(endpoint.to_string()),
            model: model.to_string(),
            api_key_env: api_key_env.map(str::to_string),
            temperature: 0.1,
            top_p: 0.7,
            cache_dir: None,
            script: None,
        }
    }

    pub fn replay(cache_dir: PathBuf, model: &str) -> Self {
        BackendSpec {
            kind: BackendKind::Replay,
            endpoint: None,
            model: model.to_string(),
            api_key_env: None,
            temperature: 0.1,
            top_p: 0.7,
            cache_dir: Some(cache_dir),
            script: None,
        }
    }

    pub fn scripted(table: ScriptTable) -> Self {
        BackendSpec {
            kind: BackendKind::Scripted,
            endpoint: None,
            model: SCRIPTED_MODEL.to_string(),
            api_key_env: None,
            temperature: 0.1,
            top_p: 0.7,
            cache_dir: None,
            script: Some(table),
        }
    }

    pub fn with_sampling(mut self, temperature: f64, top_p: f64) -> Self {
        self.temperature = temperature;
        self.top_p = top_p;
        self
    }

    pub fn with_cache(mut self, dir: Option<PathBuf>) -> Self {
        self.cache_dir = dir;
        self
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        let bad = |m: &str| Err(GatewayError::Spec(m.to_string()));
        if self.model.trim().is_empty() {
            return bad("model name is empty");
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return bad("temperature must be a non-negative number");
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return bad("top_p must lie in (0, 1]");
        }
        match self.kind {
            BackendKind::Http if self.endpoint.as_deref().is_none_or(|e| e.trim().is_empty()) => {
                bad("http backend needs an endpoint")
            }
            BackendKind::Replay if self.cache_dir.is_none() => bad("replay backend needs a cache directory"),
            BackendKind::Scripted if self.script.is_none() => bad("scripted backend needs a response table"),
            _ => Ok(()),
        }
    }
}

/// What a scripted lookup is matched against.
#[derive(Debug, Clone, Copy)]
pub struct Route<'a> {
    pub tag: &'a str,
    pub event1: &'a str,
    pub event2: &'a str,
    pub prompt: &'a str,
    pub round: u32,
}

/// One scripted response. Absent fields match anything.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event1: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event2: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub round: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    pub response: String,
}

impl ScriptRule {
    pub fn new(response: &str) -> Self {
        ScriptRule {
            task: None,
            event1: None,
            event2: None,
            round: None,
            prompt: None,
            response: response.to_string(),
        }
    }

    pub fn task(mut self, task: &str) -> Self {
        self.task = Some(task.to_string());
        self
    }

    pub fn events(mut self, event1: &str, event2: &str) -> Self {
        self.event1 = Some(event1.to_string());
        self.event2 = Some(event2.to_string());
        self
    }

    pub fn round(mut self, round: u32) -> Self {
        self.round = Some(round);
        self
    }

    pub fn prompt(mut self, prompt: &str) -> Self {
        self.prompt = Some(prompt.to_string());
        self
    }

    fn specificity(&self, route: &Route) -> Option<usize> {
        fn field(want: &Option<String>, got: &str) -> Option<usize> {
            match want {
                None => Some(0),
                Some(w) if w == got => Some(1),
                Some(_) => None,
            }
        }
        let round = match self.round {
            None => 0,
            Some(r) if r == route.round => 1,
            Some(_) => return None,
        };
        Some(
            field(&self.task, route.tag)?
                + field(&self.event1, route.event1)?
                + field(&self.event2, route.event2)?
                + field(&self.prompt, route.prompt)?
                + round,
        )
    }
}

/// Ordered rule list. The matching rule with the most fixed fields wins;
/// among equals the earliest one.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScriptTable {
    pub rules: Vec<ScriptRule>,
}

impl ScriptTable {
    pub fn new(rules: Vec<ScriptRule>) -> Self {
        ScriptTable { rules }
    }

    /// One JSON rule per line; blank lines and `#` comments are skipped.
    pub fn from_jsonl(text: &str) -> Result<Self, (usize, String)> {
        let rules = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| (i + 1, e.to_string())))
            .collect::<Result<_, _>>()?;
        Ok(ScriptTable { rules })
    }

    pub fn lookup(&self, route: &Route) -> Option<&str> {
        let mut best: Option<(usize, &ScriptRule)> = None;
        for rule in &self.rules {
            if let Some(s) = rule.specificity(route) {
                if best.is_none_or(|(b, _)| s > b) {
                    best = Some((s, rule));
                }
            }
        }
        best.map(|(_, r)| r.response.as_str())
    }
}
