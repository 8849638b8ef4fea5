//! Hyperparameters for scoring, fusion, decision and the LLM backend.
//!
//! The on-disk form is a flat `key=value` text file whose keys are the field
//! names of [`MefaConfig`]. Blank lines and lines starting with `#` are
//! ignored; vectors are comma separated.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

pub const DEFAULT_W1: [f64; 9] = [1.0, -1.0, 0.5, 1.0, 0.0, -0.5, 1.0, 0.0, -0.5];
pub const DEFAULT_W2: [f64; 9] = [-1.0, 1.0, 0.5, 0.0, 1.0, -0.5, 0.0, 1.0, -0.5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MefaConfig {
    /// Dependency weight factor.
    pub beta: f64,
    /// Causal clue bonus.
    pub delta: f64,
    /// Decision threshold before distance decay.
    pub theta: f64,
    /// Fuzzy measure weight on subset size.
    pub a: f64,
    /// Fuzzy measure weight on summed confidence.
    pub b: f64,
    /// Synergy strength.
    pub alpha: f64,
    /// Maximum effective sentence distance for threshold decay.
    pub max_distance: u32,
    /// Forward direction weights, identity order.
    pub w1: [f64; 9],
    /// Reverse direction weights, identity order.
    pub w2: [f64; 9],
    pub rounds: u32,
    /// Lower clamp for the exponentially weighted baseline.
    pub epsilon: f64,
    pub concurrency_limit: u32,
    pub retries: u32,
    pub timeout_seconds: u32,
    pub temperature: f64,
    pub top_p: f64,
}

impl Default for MefaConfig {
    fn default() -> Self {
        MefaConfig {
            beta: 0.1,
            delta: 0.6,
            theta: 0.6,
            a: 0.5,
            b: 0.4,
            alpha: 0.3,
            max_distance: 10,
            w1: DEFAULT_W1,
            w2: DEFAULT_W2,
            rounds: 1,
            epsilon: 1e-6,
            concurrency_limit: 4,
            retries: 2,
            timeout_seconds: 60,
            temperature: 0.1,
            top_p: 0.7,
        }
    }
}

const KEYS: [&str; 16] = [
    "beta",
    "delta",
    "theta",
    "a",
    "b",
    "alpha",
    "max_distance",
    "w1",
    "w2",
    "rounds",
    "epsilon",
    "concurrency_limit",
    "retries",
    "timeout_seconds",
    "temperature",
    "top_p",
];

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::InvalidValue {
        key: key.to_string(),
        reason: reason.into(),
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .trim()
        .parse()
        .map_err(|_| invalid(key, format!("cannot parse `{}`", value.trim())))
}

fn parse_vec9(key: &str, value: &str) -> Result<[f64; 9], ConfigError> {
    let parts: Vec<f64> = value
        .trim()
        .trim_start_matches('[')
        .trim_end_matches(']')
        .split(',')
        .map(|p| parse_num::<f64>(key, p))
        .collect::<Result<_, _>>()?;
    parts
        .try_into()
        .map_err(|v: Vec<f64>| invalid(key, format!("expected 9 entries, got {}", v.len())))
}

impl MefaConfig {
    /// Assigns one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "beta" => self.beta = parse_num(key, value)?,
            "delta" => self.delta = parse_num(key, value)?,
            "theta" => self.theta = parse_num(key, value)?,
            "a" => self.a = parse_num(key, value)?,
            "b" => self.b = parse_num(key, value)?,
            "alpha" => self.alpha = parse_num(key, value)?,
            "max_distance" => self.max_distance = parse_num(key, value)?,
            "w1" => self.w1 = parse_vec9(key, value)?,
            "w2" => self.w2 = parse_vec9(key, value)?,
            "rounds" => self.rounds = parse_num(key, value)?,
            "epsilon" => self.epsilon = parse_num(key, value)?,
            "concurrency_limit" => self.concurrency_limit = parse_num(key, value)?,
            "retries" => self.retries = parse_num(key, value)?,
            "timeout_seconds" => self.timeout_seconds = parse_num(key, value)?,
            "temperature" => self.temperature = parse_num(key, value)?,
            "top_p" => self.top_p = parse_num(key, value)?,
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Parses `key=value` text on top of the defaults, then validates.
    pub fn from_kv_str(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = MefaConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax(i + 1))?;
            cfg.set(key.trim(), value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Renders every field as `key=value`, one per line, in a fixed order.
    pub fn to_kv_string(&self) -> String {
        let vec = |v: &[f64; 9]| {
            v.iter()
                .map(|x| format!("{x:?}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut out = String::new();
        for key in KEYS {
            let value = match key {
                "beta" => format!("{:?}", self.beta),
                "delta" => format!("{:?}", self.delta),
                "theta" => format!("{:?}", self.theta),
                "a" => format!("{:?}", self.a),
                "b" => format!("{:?}", self.b),
                "alpha" => format!("{:?}", self.alpha),
                "max_distance" => self.max_distance.to_string(),
                "w1" => vec(&self.w1),
                "w2" => vec(&self.w2),
                "rounds" => self.rounds.to_string(),
                "epsilon" => format!("{:?}", self.epsilon),
                "concurrency_limit" => self.concurrency_limit.to_string(),
                "retries" => self.retries.to_string(),
                "timeout_seconds" => self.timeout_seconds.to_string(),
                "temperature" => format!("{:?}", self.temperature),
                "top_p" => format!("{:?}", self.top_p),
                _ => unreachable!(),
            };
            let _ = writeln!(out, "{key}={value}");
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let non_negative = [
            ("beta", self.beta),
            ("delta", self.delta),
            ("a", self.a),
            ("b", self.b),
            ("alpha", self.alpha),
        ];
        for (key, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(key, "must be a non-negative real"));
            }
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(invalid("theta", "must lie in (0, 1]"));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(invalid("epsilon", "must be positive"));
        }
        let positive = [
            ("max_distance", self.max_distance),
            ("rounds", self.rounds),
            ("concurrency_limit", self.concurrency_limit),
            ("retries", self.retries),
            ("timeout_seconds", self.timeout_seconds),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(invalid(key, "must be a positive integer"));
            }
        }
        if self.w1.iter().chain(&self.w2).any(|w| !w.is_finite()) {
            return Err(invalid("w1/w2", "weights must be finite"));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(invalid("temperature", "must be a non-negative real"));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(invalid("top_p", "must lie in (0, 1]"));
        }
        Ok(())
    }
}
