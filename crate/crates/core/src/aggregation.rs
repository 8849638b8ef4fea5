//! Evidence fusion.
//!
//! The primary aggregator is a Choquet integral over a capped additive fuzzy
//! measure, augmented with a pairwise synergy term:
//!
//! ```text
//! f(x) = sum_i x_(i) * [ mu(S_i) - mu(S_(i+1)) + alpha * sum_{j<k in S_i} x_j x_k ]
//! mu(S) = min(1, a*|S| + b * sum_{j in S} u_j)
//! ```
//!
//! where `x_(1) <= ... <= x_(n)` is the direction-weighted evidence sorted
//! ascending (ties by lower identity index), `S_i` is the tail set
//! `{(i), ..., (n)}` and `u_j` is the raw, unweighted confidence of identity
//! `j`. Direction weights are applied to the identity-ordered vector before
//! sorting.
//!
//! Three entropy-weighted baselines (weighted average, exponentially weighted
//! average, Einstein sum) and the unanimity rule are provided for comparison.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::MefaConfig;
use crate::domain::{EvidenceBundle, ProbTriple, Verdict};
use crate::error::{ConfigError, DomainError};
use crate::scoring::directional_scores;

const MEASURE_SLACK: f64 = 1e-12;

/// Capped additive fuzzy measure of `subset` (identity indices into
/// `confidences`).
pub fn fuzzy_measure(subset: &[usize], a: f64, b: f64, confidences: &[f64]) -> f64 {
    if subset.is_empty() {
        return 0.0;
    }
    let conf: f64 = subset.iter().map(|&j| confidences[j]).sum();
    (a * subset.len() as f64 + b * conf).min(1.0)
}

/// Identity indices sorted by ascending value, ties broken by lower index.
pub fn ascending_order(values: &[f64]) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..values.len()).collect();
    perm.sort_by(|&i, &j| {
        values[i]
            .partial_cmp(&values[j])
            .unwrap_or(Ordering::Equal)
            .then(i.cmp(&j))
    });
    perm
}

/// Synergy-augmented Choquet integral of `weighted` against the measure built
/// from `confidences`. Works for any length.
///
/// Fails when `a*n + b*sum(confidences) < 1`, i.e. the measure of the full set
/// would not reach one.
pub fn choquet_integral(
    weighted: &[f64],
    confidences: &[f64],
    a: f64,
    b: f64,
    alpha: f64,
) -> Result<f64, ConfigError> {
    assert_eq!(weighted.len(), confidences.len(), "length mismatch");
    let n = weighted.len();
    let confidence_sum: f64 = confidences.iter().sum();
    let full = a * n as f64 + b * confidence_sum;
    if n > 0 && full < 1.0 - MEASURE_SLACK {
        return Err(ConfigError::MeasureBelowOne {
            n,
            confidence_sum,
            value: full,
        });
    }

    let order = ascending_order(weighted);
    // Walk the sorted vector from the top so each tail set grows by one.
    let mut total = 0.0;
    let mut tail_conf = 0.0;
    let mut tail_sum = 0.0;
    let mut tail_pairs = 0.0;
    let mut mu_next = 0.0;
    for (pos, &id) in order.iter().enumerate().rev() {
        let x = weighted[id];
        tail_pairs += x * tail_sum;
        tail_sum += x;
        tail_conf += confidences[id];
        let size = (n - pos) as f64;
        let mu = (a * size + b * tail_conf).min(1.0);
        total += x * (mu - mu_next + alpha * tail_pairs);
        mu_next = mu;
    }
    Ok(total)
}

/// The nine main-task confidences with a direction weighting applied.
#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceVector9 {
    pub raw: [f64; 9],
    pub weighted: [f64; 9],
    /// `perm[i]` is the identity at sorted position `i`.
    pub perm: [usize; 9],
}

impl EvidenceVector9 {
    pub fn new(raw: [f64; 9], direction_w: &[f64; 9]) -> Self {
        let weighted: [f64; 9] = std::array::from_fn(|i| raw[i] * direction_w[i]);
        let perm: [usize; 9] = ascending_order(&weighted).try_into().unwrap();
        EvidenceVector9 { raw, weighted, perm }
    }

    pub fn sorted(&self) -> [f64; 9] {
        self.perm.map(|i| self.weighted[i])
    }
}

/// Fuses nine identity-ordered confidences for one direction.
pub fn choquet_fuse(
    raw: &[f64; 9],
    direction_w: &[f64; 9],
    config: &MefaConfig,
) -> Result<f64, ConfigError> {
    let ev = EvidenceVector9::new(*raw, direction_w);
    choquet_integral(&ev.weighted, &ev.raw, config.a, config.b, config.alpha)
}

/// Shannon-entropy share of each distribution, `0 ln 0 = 0`.
///
/// High-entropy (less certain) sources receive the larger share. Falls back to
/// uniform weights when every distribution is deterministic.
pub fn entropy_weights(distributions: [&ProbTriple; 3]) -> [f64; 3] {
    let entropy = |p: &ProbTriple| -> f64 {
        -p.0.iter()
            .filter(|&&x| x > 0.0)
            .map(|&x| x * x.ln())
            .sum::<f64>()
    };
    let h = distributions.map(entropy);
    let total: f64 = h.iter().sum();
    if total <= 0.0 {
        return [1.0 / 3.0; 3];
    }
    h.map(|x| x / total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AggregatorChoice {
    Choquet,
    WeightedAverage,
    ExpWeightedAverage,
    Einstein,
}

impl AggregatorChoice {
    pub const ALL: [AggregatorChoice; 4] = [
        AggregatorChoice::Choquet,
        AggregatorChoice::WeightedAverage,
        AggregatorChoice::ExpWeightedAverage,
        AggregatorChoice::Einstein,
    ];

    pub fn token(&self) -> &'static str {
        match self {
            AggregatorChoice::Choquet => "choquet",
            AggregatorChoice::WeightedAverage => "wavg",
            AggregatorChoice::ExpWeightedAverage => "expavg",
            AggregatorChoice::Einstein => "einstein",
        }
    }
}

impl fmt::Display for AggregatorChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for AggregatorChoice {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AggregatorChoice::ALL
            .into_iter()
            .find(|c| c.token() == s.to_ascii_lowercase())
            .ok_or_else(|| DomainError::UnknownToken(s.to_string()))
    }
}

/// One of the three entropy-weighted baselines over three source scores.
///
/// # Panics
///
/// When called with [`AggregatorChoice::Choquet`].
pub fn baseline_fuse(choice: AggregatorChoice, s: [f64; 3], w: [f64; 3], epsilon: f64) -> f64 {
    match choice {
        AggregatorChoice::WeightedAverage => s.iter().zip(w).map(|(s, w)| s * w).sum(),
        AggregatorChoice::ExpWeightedAverage => s
            .iter()
            .zip(w)
            .map(|(s, w)| s.max(epsilon).powf(w))
            .product(),
        AggregatorChoice::Einstein => {
            let sum: f64 = s.iter().zip(w).map(|(s, w)| s * w).sum();
            let prod: f64 = s.iter().zip(w).map(|(s, w)| s * w).product();
            sum / (1.0 + prod)
        }
        AggregatorChoice::Choquet => panic!("baseline_fuse does not handle the Choquet aggregator"),
    }
}

/// Fused evidence `(forward, reverse)` for a validated bundle.
pub fn fuse_directions(
    choice: AggregatorChoice,
    bundle: &EvidenceBundle,
    config: &MefaConfig,
) -> Result<(f64, f64), ConfigError> {
    match choice {
        AggregatorChoice::Choquet => {
            let raw = bundle.evidence_vector();
            Ok((
                choquet_fuse(&raw, &config.w1, config)?,
                choquet_fuse(&raw, &config.w2, config)?,
            ))
        }
        baseline => {
            let s = directional_scores(bundle);
            // Sources in the order temporality, sufficiency, necessity.
            let w = entropy_weights([&bundle.t, &bundle.u, &bundle.n]);
            Ok((
                baseline_fuse(baseline, [s.s_temp, s.s_suf, s.s_nec], w, config.epsilon),
                baseline_fuse(
                    baseline,
                    [s.s_temp_rev, s.s_suf_rev, s.s_nec_rev],
                    w,
                    config.epsilon,
                ),
            ))
        }
    }
}

/// Unanimity rule: causality only when the most likely answer of every main
/// sub-task points the same way. SIMULTANEOUS is temporally consistent with
/// both directions. A shared maximum counts as no answer.
pub fn meda_decide(bundle: &EvidenceBundle) -> Verdict {
    let (Some(t), Some(n), Some(u)) = (bundle.t.argmax(), bundle.n.argmax(), bundle.u.argmax())
    else {
        return Verdict::NoCausality;
    };
    match (t, n, u) {
        (0 | 2, 0, 0) => Verdict::Forward,
        (1 | 2, 1, 1) => Verdict::Reverse,
        _ => Verdict::NoCausality,
    }
}
