//! Minimal chat-completion client.
//!
//! Request body:
//! `{"model": M, "messages": [{"role": "user", "content": PROMPT}], "temperature": T, "top_p": P}`
//! posted to `<endpoint>/chat/completions` with `Authorization: Bearer <key>`
//! when a key is configured. The answer is `choices[0].message.content`
//! (`choices[0].text` is accepted as well).

use std::thread;
use std::time::Duration;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::GatewayError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    /// Extra attempts after the first one.
    pub retries: u32,
    pub timeout: Duration,
    /// Pause before retry `k` is `backoff * 2^(k-1)`.
    pub backoff: Duration,
}

impl RetryPolicy {
    pub fn from_config(config: &eci_core::MefaConfig) -> Self {
        RetryPolicy {
            retries: config.retries,
            timeout: Duration::from_secs(config.timeout_seconds as u64),
            backoff: Duration::from_millis(500),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage; 1],
    temperature: f64,
    top_p: f64,
}

#[derive(Deserialize)]
struct ChatResponse {
    #[serde(default)]
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Option<ChatMessage>,
    text: Option<String>,
}

/// `endpoint` with `/chat/completions` appended unless already present.
pub fn completions_url(endpoint: &str) -> String {
    let base = endpoint.trim_end_matches('/');
    if base.ends_with("/chat/completions") {
        base.to_string()
    } else {
        format!("{base}/chat/completions")
    }
}

fn error_message(body: &str) -> String {
    let from_json = serde_json::from_str::<serde_json::Value>(body).ok().and_then(|v| {
        v.pointer("/error/message")
            .or_else(|| v.get("error"))
            .or_else(|| v.get("message"))
            .and_then(|m| m.as_str().map(str::to_string))
    });
    from_json.unwrap_or_else(|| body.chars().take(300).collect())
}

enum Failure {
    Retryable(GatewayError),
    Final(GatewayError),
}

pub struct ChatClient {
    client: reqwest::blocking::Client,
    url: String,
    api_key: Option<String>,
    policy: RetryPolicy,
}

impl ChatClient {
    pub fn new(endpoint: &str, api_key: Option<String>, policy: RetryPolicy) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(policy.timeout)
            .build()
            .map_err(|e| GatewayError::Spec(format!("cannot build http client: {e}")))?;
        Ok(ChatClient {
            client,
            url: completions_url(endpoint),
            api_key,
            policy,
        })
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    fn attempt(&self, body: &str) -> Result<String, Failure> {
        let mut req = self
            .client
            .post(&self.url)
            .header("content-type", "application/json")
            .body(body.to_string());
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let transport = |e: reqwest::Error| {
            Failure::Retryable(GatewayError::Transport {
                attempts: 1,
                message: e.to_string(),
            })
        };
        let resp = req.send().map_err(transport)?;
        let status = resp.status();
        let text = resp.text().map_err(transport)?;
        if !status.is_success() {
            let err = GatewayError::Backend {
                status: status.as_u16(),
                message: error_message(&text),
            };
            return Err(if status.as_u16() == 429 || status.is_server_error() {
                Failure::Retryable(err)
            } else {
                Failure::Final(err)
            });
        }
        let parsed: ChatResponse = serde_json::from_str(&text).map_err(|e| {
            Failure::Final(GatewayError::Backend {
                status: status.as_u16(),
                message: format!("malformed completion body: {e}"),
            })
        })?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.map(|m| m.content).or(c.text))
            .ok_or_else(|| {
                Failure::Final(GatewayError::Backend {
                    status: status.as_u16(),
                    message: "completion has no choices".into(),
                })
            })
    }

    /// Sends one prompt, retrying connection failures, timeouts, 429 and 5xx
    /// answers up to `policy.retries` times. Returns the text and the number
    /// of attempts made.
    pub fn complete(
        &self,
        model: &str,
        prompt: &str,
        temperature: f64,
        top_p: f64,
    ) -> Result<(String, u32), GatewayError> {
        let body = serde_json::to_string(&ChatRequest {
            model,
            messages: [ChatMessage {
                role: "user".into(),
                content: prompt.to_string(),
            }],
            temperature,
            top_p,
        })
        .expect("request serializes");
        let total = self.policy.retries + 1;
        let mut last = None;
        for attempt in 1..=total {
            if attempt > 1 {
                thread::sleep(self.policy.backoff * 2u32.saturating_pow(attempt - 2));
            }
            match self.attempt(&body) {
                Ok(text) => return Ok((text, attempt)),
                Err(Failure::Final(e)) => return Err(e),
                Err(Failure::Retryable(e)) => {
                    warn!("attempt {attempt}/{total} to {} failed: {e}", self.url);
                    last = Some(e);
                }
            }
        }
        Err(match last.expect("at least one attempt") {
            GatewayError::Transport { message, .. } => GatewayError::Transport {
                attempts: total,
                message,
            },
            other => other,
        })
    }
}
