//! Zero-shot event causality identification from decomposed LLM evidence.
//!
//! Six sub-task answers (temporality, necessity, sufficiency, dependency,
//! causal clues, coreference) are turned into directional scores, fused with
//! a synergy-augmented Choquet integral and thresholded into directed causal
//! decisions.

pub mod aggregation;
pub mod config;
pub mod decision;
pub mod domain;
pub mod error;
pub mod evalbench;
pub mod prompts;
pub mod scoring;

pub use aggregation::{
    baseline_fuse, choquet_fuse, choquet_integral, entropy_weights, fuse_directions,
    fuzzy_measure, meda_decide, AggregatorChoice, EvidenceVector9,
};
pub use config::MefaConfig;
pub use decision::{assemble_graph, decayed_threshold, determine, PairScope};
pub use domain::{
    validate_bundle, CausalDecision, CausalEdge, CausalGraph, DegradedFlags, DependencyLevel,
    Document, EventMention, EvidenceBundle, ProbTriple, Relation, Verdict,
};
pub use error::{ConfigError, CorpusError, DomainError, PromptError};
pub use prompts::{fallback_answer, parse, Answer, PromptRequest, SubTask, TemplateSet};
pub use scoring::{
    aux_factors, clue_term, dependency_weight, directional_scores, pair_scores, AuxFactors,
    DirectionalScores, Scope,
};
