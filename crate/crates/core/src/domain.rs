//! Shared, validated data types: documents, event mentions, evidence bundles
//! and causal decisions.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::DomainError;

/// Tolerance used when checking that a probability triple sums to one.
pub const SUM_TOLERANCE: f64 = 1e-6;

/// An annotated event trigger inside a document.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EventMention {
    pub id: String,
    pub trigger: String,
    pub sentence_index: usize,
    /// Character offsets `(start, end)` of the trigger within its sentence.
    pub char_span: Option<(usize, usize)>,
}

/// A directed gold causal relation `cause -> effect`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Relation {
    pub cause: String,
    pub effect: String,
}

/// A pre-annotated document in the canonical corpus format.
///
/// Serializes to one line of the line-delimited corpus file with the keys
/// `id`, `sentences`, `events` and `relations`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub sentences: Vec<String>,
    pub events: Vec<EventMention>,
    #[serde(rename = "relations", default)]
    pub gold_relations: Vec<Relation>,
}

impl Document {
    /// Checks the structural invariants of a document.
    pub fn validate(&self) -> Result<(), DomainError> {
        let mut seen = HashSet::new();
        for ev in &self.events {
            if !seen.insert(ev.id.as_str()) {
                return Err(DomainError::DuplicateEvent(ev.id.clone()));
            }
            if ev.sentence_index >= self.sentences.len() {
                return Err(DomainError::SentenceOutOfRange {
                    event: ev.id.clone(),
                    index: ev.sentence_index,
                    count: self.sentences.len(),
                });
            }
            if let Some((start, end)) = ev.char_span {
                if start >= end {
                    return Err(DomainError::EmptySpan(ev.id.clone()));
                }
            }
        }
        for rel in &self.gold_relations {
            for end in [&rel.cause, &rel.effect] {
                if !seen.contains(end.as_str()) {
                    return Err(DomainError::UnknownEvent(end.clone()));
                }
            }
            if rel.cause == rel.effect {
                return Err(DomainError::SelfRelation(rel.cause.clone()));
            }
        }
        Ok(())
    }

    pub fn event(&self, id: &str) -> Option<&EventMention> {
        self.events.iter().find(|e| e.id == id)
    }

    /// Canonical single-line JSON form.
    pub fn to_json_line(&self) -> String {
        // Serialization of plain strings, integers and vectors cannot fail.
        serde_json::to_string(self).expect("document serialization")
    }
}

/// A distribution over the three candidate relations of one main sub-task.
///
/// Entry semantics depend on the task: temporality is `(BEFORE, AFTER,
/// SIMULTANEOUS)`, necessity `(PRECONDITION, REV_PRECONDITION, NONE)` and
/// sufficiency `(SUFFICIENCY, REV_SUFFICIENCY, NONE)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbTriple(pub [f64; 3]);

impl ProbTriple {
    pub const UNIFORM: ProbTriple = ProbTriple([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);

    pub fn new(p1: f64, p2: f64, p3: f64) -> Self {
        ProbTriple([p1, p2, p3])
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn is_normalized(&self) -> bool {
        self.0.iter().all(|p| (0.0..=1.0).contains(p)) && (self.sum() - 1.0).abs() <= SUM_TOLERANCE
    }

    /// Clamps negative (and non-finite) entries to zero and rescales to unit
    /// sum. A triple with no mass left becomes uniform; the returned flag is
    /// `true` in that case.
    ///
    /// Triples that are already within `1e-12` of unit sum are returned
    /// untouched, which makes repeated normalization a no-op.
    pub fn normalized(&self) -> (ProbTriple, bool) {
        let clamped = self.0.map(|p| if p.is_finite() && p > 0.0 { p } else { 0.0 });
        let sum: f64 = clamped.iter().sum();
        if sum <= 0.0 {
            return (ProbTriple::UNIFORM, true);
        }
        if clamped.iter().all(|p| *p <= 1.0) && (sum - 1.0).abs() <= 1e-12 {
            return (ProbTriple(clamped), false);
        }
        (ProbTriple(clamped.map(|p| p / sum)), false)
    }

    /// Index of the strictly largest entry; `None` when the maximum is shared.
    pub fn argmax(&self) -> Option<usize> {
        let mut best = 0;
        for i in 1..3 {
            if self.0[i] > self.0[best] {
                best = i;
            }
        }
        let ties = self.0.iter().filter(|p| **p == self.0[best]).count();
        (ties == 1).then_some(best)
    }
}

/// Strength of the semantic dependency between two events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DependencyLevel {
    Strong,
    Medium,
    Weak,
    None,
}

impl DependencyLevel {
    pub const ALL: [DependencyLevel; 4] = [
        DependencyLevel::Strong,
        DependencyLevel::Medium,
        DependencyLevel::Weak,
        DependencyLevel::None,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            DependencyLevel::Strong => "strong",
            DependencyLevel::Medium => "medium",
            DependencyLevel::Weak => "weak",
            DependencyLevel::None => "none",
        }
    }
}

/// Marks which sub-task answers were replaced by a fallback value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegradedFlags {
    pub temporality: bool,
    pub necessity: bool,
    pub sufficiency: bool,
    pub dependency: bool,
    pub causal_clue: bool,
    pub coreference: bool,
}

impl DegradedFlags {
    pub fn count(&self) -> usize {
        [
            self.temporality,
            self.necessity,
            self.sufficiency,
            self.dependency,
            self.causal_clue,
            self.coreference,
        ]
        .iter()
        .filter(|f| **f)
        .count()
    }
}

/// Everything the six sub-tasks reported for one ordered event pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceBundle {
    /// Temporality: BEFORE, AFTER, SIMULTANEOUS.
    pub t: ProbTriple,
    /// Necessity: PRECONDITION, REV_PRECONDITION, NONE.
    pub n: ProbTriple,
    /// Sufficiency: SUFFICIENCY, REV_SUFFICIENCY, NONE.
    pub u: ProbTriple,
    pub d: DependencyLevel,
    pub clues: Vec<String>,
    pub coref: bool,
    pub rounds_used: u32,
    pub degraded: DegradedFlags,
}

impl EvidenceBundle {
    /// The nine main-task confidences in identity order
    /// `[t_bef, t_aft, t_sim, n_nec, n_rev, n_none, u_suf, u_rev, u_none]`.
    pub fn evidence_vector(&self) -> [f64; 9] {
        let mut out = [0.0; 9];
        out[..3].copy_from_slice(&self.t.0);
        out[3..6].copy_from_slice(&self.n.0);
        out[6..].copy_from_slice(&self.u.0);
        out
    }
}

/// Renormalizes all three triples and drops blank clue strings.
///
/// Never fails; a triple with no usable mass becomes uniform and its degraded
/// flag is set.
pub fn validate_bundle(bundle: EvidenceBundle) -> EvidenceBundle {
    let mut out = bundle;
    let (t, t_bad) = out.t.normalized();
    let (n, n_bad) = out.n.normalized();
    let (u, u_bad) = out.u.normalized();
    out.t = t;
    out.n = n;
    out.u = u;
    out.degraded.temporality |= t_bad;
    out.degraded.necessity |= n_bad;
    out.degraded.sufficiency |= u_bad;
    out.clues = out
        .clues
        .into_iter()
        .map(|c| c.trim().to_string())
        .filter(|c| !c.is_empty())
        .collect();
    out.rounds_used = out.rounds_used.max(1);
    out
}

/// Three-way outcome for an ordered pair `(e_i, e_j)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    /// `e_i -> e_j`
    Forward,
    /// `e_j -> e_i`
    Reverse,
    #[serde(rename = "none")]
    NoCausality,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Forward => "forward",
            Verdict::Reverse => "reverse",
            Verdict::NoCausality => "none",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Verdict {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "forward" => Ok(Verdict::Forward),
            "reverse" => Ok(Verdict::Reverse),
            "none" => Ok(Verdict::NoCausality),
            other => Err(DomainError::UnknownToken(other.to_string())),
        }
    }
}

/// Decision for one ordered pair together with the scores behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalDecision {
    pub pair: (String, String),
    pub verdict: Verdict,
    pub s_cause: f64,
    pub s_causedby: f64,
    pub threshold_used: f64,
}

impl CausalDecision {
    /// The directed edge `(cause, effect)` asserted by this decision, if any.
    pub fn directed_edge(&self) -> Option<(&str, &str)> {
        let (a, b) = (&self.pair.0, &self.pair.1);
        match self.verdict {
            Verdict::Forward => Some((a, b)),
            Verdict::Reverse => Some((b, a)),
            Verdict::NoCausality => None,
        }
    }

    /// Score carried by the asserted edge.
    pub fn edge_score(&self) -> f64 {
        match self.verdict {
            Verdict::Reverse => self.s_causedby,
            _ => self.s_cause,
        }
    }
}

/// A directed, scored causal edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalEdge {
    pub cause: String,
    pub effect: String,
    pub score: f64,
}

/// Document-level causal graph with coreference clusters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CausalGraph {
    pub nodes: Vec<String>,
    pub edges: Vec<CausalEdge>,
    pub coref_clusters: Vec<Vec<String>>,
}
