//! Directional evidence scores and the auxiliary factors that scale them.
//!
//! Scores are not probabilities: an intra-sentence score is `w_d * f + A` and
//! can exceed 1.

use serde::{Deserialize, Serialize};

use crate::config::MefaConfig;
use crate::domain::{DependencyLevel, EvidenceBundle};

/// Forward and reverse scores derived from the three main sub-tasks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionalScores {
    pub s_temp: f64,
    pub s_temp_rev: f64,
    pub s_nec: f64,
    pub s_nec_rev: f64,
    pub s_suf: f64,
    pub s_suf_rev: f64,
}

pub fn directional_scores(bundle: &EvidenceBundle) -> DirectionalScores {
    let [bef, aft, sim] = bundle.t.0;
    let [nec, nec_rev, nec_none] = bundle.n.0;
    let [suf, suf_rev, suf_none] = bundle.u.0;
    DirectionalScores {
        s_temp: bef + sim - aft,
        s_temp_rev: aft + sim - bef,
        s_nec: nec - nec_none,
        s_nec_rev: nec_rev - nec_none,
        s_suf: suf - suf_none,
        s_suf_rev: suf_rev - suf_none,
    }
}

pub fn dependency_weight(level: DependencyLevel, beta: f64) -> f64 {
    match level {
        DependencyLevel::Strong => 1.0,
        DependencyLevel::Medium => 2.0 * beta,
        DependencyLevel::Weak => beta,
        DependencyLevel::None => 0.5 * beta,
    }
}

fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Whether `clue` occurs in `context` as a contiguous run of whole tokens,
/// ignoring case.
pub fn clue_occurs(clue: &str, context_tokens: &[String]) -> bool {
    let needle = tokens(clue);
    !needle.is_empty() && context_tokens.windows(needle.len()).any(|w| w == needle.as_slice())
}

/// `delta` when at least one clue was returned and every clue actually occurs
/// in the context; zero otherwise.
pub fn clue_term(clues: &[String], context: &str, delta: f64) -> f64 {
    if clues.is_empty() {
        return 0.0;
    }
    let ctx = tokens(context);
    if clues.iter().all(|c| clue_occurs(c, &ctx)) {
        delta
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Intra,
    Inter,
}

/// Dependency weight `w_d`, clue term `A` and coreference factor `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuxFactors {
    pub w_d: f64,
    pub clue: f64,
    pub coref: f64,
}

pub fn aux_factors(bundle: &EvidenceBundle, context: &str, config: &MefaConfig) -> AuxFactors {
    AuxFactors {
        w_d: dependency_weight(bundle.d, config.beta),
        clue: clue_term(&bundle.clues, context, config.delta),
        coref: if bundle.coref { 1.0 } else { 0.0 },
    }
}

/// Combines the fused evidence of both directions into `(s_cause, s_causedby)`.
///
/// Intra-sentence pairs use `w_d * f + A`; inter-sentence pairs use
/// `(1 - c) * w_d * f`.
pub fn pair_scores(aux: &AuxFactors, fused_fwd: f64, fused_rev: f64, scope: Scope) -> (f64, f64) {
    match scope {
        Scope::Intra => (aux.w_d * fused_fwd + aux.clue, aux.w_d * fused_rev + aux.clue),
        Scope::Inter => {
            let k = (1.0 - aux.coref) * aux.w_d;
            (k * fused_fwd, k * fused_rev)
        }
    }
}
