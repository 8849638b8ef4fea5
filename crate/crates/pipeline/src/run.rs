//! Evidence gathering over all candidate pairs followed by a sequential
//! scoring and decision pass.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use eci_core::decision::{coref_pair_set, PairScope};
use eci_core::evalbench::{document_order, enumerate_pairs, PredictionRecord, ScopeSelection};
use eci_core::prompts::pair_context;
use eci_core::{
    assemble_graph, aux_factors, decayed_threshold, determine, fuse_directions, meda_decide,
    pair_scores, AggregatorChoice, CausalDecision, CausalGraph, ConfigError, Document, DomainError,
    EventMention, EvidenceBundle, MefaConfig, TemplateSet, Verdict,
};
use eci_gateway::{gather_evidence, Gateway, GatewayError};

/// Fusion operator, or the unanimity baseline which bypasses scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregator {
    Fused(AggregatorChoice),
    Meda,
}

impl Default for Aggregator {
    fn default() -> Self {
        Aggregator::Fused(AggregatorChoice::Choquet)
    }
}

impl fmt::Display for Aggregator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Aggregator::Fused(c) => f.write_str(c.token()),
            Aggregator::Meda => f.write_str("meda"),
        }
    }
}

impl FromStr for Aggregator {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("meda") {
            Ok(Aggregator::Meda)
        } else {
            s.parse().map(Aggregator::Fused)
        }
    }
}

/// One candidate pair, as indices into the corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairJob {
    pub doc: usize,
    pub first: usize,
    pub second: usize,
    pub scope: PairScope,
}

impl PairJob {
    pub fn events<'a>(&self, docs: &'a [Document]) -> (&'a EventMention, &'a EventMention) {
        let d = &docs[self.doc];
        (&d.events[self.first], &d.events[self.second])
    }

    pub fn label(&self, docs: &[Document]) -> String {
        let (a, b) = self.events(docs);
        format!("{}:{}-{}", docs[self.doc].id, a.id, b.id)
    }
}

/// All candidate pairs of the corpus in output order: by document, then by
/// document order of the pair.
pub fn plan_jobs(docs: &[Document], selection: ScopeSelection) -> Vec<PairJob> {
    let mut jobs = Vec::new();
    for (di, doc) in docs.iter().enumerate() {
        let index = |e: &EventMention| doc.events.iter().position(|x| x.id == e.id).expect("own event");
        for p in enumerate_pairs(doc, selection) {
            jobs.push(PairJob {
                doc: di,
                first: index(p.first),
                second: index(p.second),
                scope: p.scope,
            });
        }
    }
    jobs
}

/// Pairs whose evidence could not be gathered, by job index.
#[derive(Debug)]
pub struct GatherFailure {
    pub completed: usize,
    pub failures: Vec<(usize, GatewayError)>,
}

/// Gathers evidence for every job with at most `config.concurrency_limit`
/// pairs in flight. Results are stored by job index, so the outcome does not
/// depend on scheduling. With `keep_going` every job is attempted and all
/// failures are reported; otherwise no new job starts after the first one.
pub fn gather_all(
    gateway: &Gateway,
    templates: &TemplateSet,
    docs: &[Document],
    jobs: &[PairJob],
    config: &MefaConfig,
    keep_going: bool,
) -> Result<Vec<EvidenceBundle>, GatherFailure> {
    let slots: Vec<Mutex<Option<Result<EvidenceBundle, GatewayError>>>> =
        jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let workers = (config.concurrency_limit.max(1) as usize).min(jobs.len().max(1));
    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(job) = jobs.get(i) else { break };
                let result = gather_evidence(gateway, templates, &docs[job.doc], job.events(docs), config);
                if let Err(e) = &result {
                    warn!("{}: {e}", job.label(docs));
                    if !keep_going {
                        stop.store(true, Ordering::SeqCst);
                    }
                }
                *slots[i].lock().unwrap() = Some(result);
            });
        }
    });
    let mut bundles = Vec::with_capacity(jobs.len());
    let mut failures = Vec::new();
    for (i, slot) in slots.into_iter().enumerate() {
        match slot.into_inner().unwrap() {
            Some(Ok(b)) => bundles.push(b),
            Some(Err(e)) => failures.push((i, e)),
            None => {}
        }
    }
    if failures.is_empty() {
        Ok(bundles)
    } else {
        Err(GatherFailure {
            completed: bundles.len(),
            failures,
        })
    }
}

/// Scores and decides one ordered pair from its evidence.
pub fn decide_pair(
    doc: &Document,
    job: &PairJob,
    bundle: &EvidenceBundle,
    config: &MefaConfig,
    aggregator: Aggregator,
) -> Result<CausalDecision, ConfigError> {
    let (a, b) = (&doc.events[job.first], &doc.events[job.second]);
    let pair = (a.id.clone(), b.id.clone());
    let choice = match aggregator {
        Aggregator::Meda => {
            let verdict = meda_decide(bundle);
            let (s_cause, s_causedby) = match verdict {
                Verdict::Forward => (1.0, 0.0),
                Verdict::Reverse => (0.0, 1.0),
                Verdict::NoCausality => (0.0, 0.0),
            };
            return Ok(CausalDecision {
                pair,
                verdict,
                s_cause,
                s_causedby,
                threshold_used: 1.0,
            });
        }
        Aggregator::Fused(c) => c,
    };
    let context = pair_context(doc, a, b);
    let aux = aux_factors(bundle, &context, config);
    let (fwd, rev) = fuse_directions(choice, bundle, config)?;
    let (s_cause, s_causedby) = pair_scores(&aux, fwd, rev, job.scope.scope);
    let threshold = decayed_threshold(config.theta, job.scope.distance, config.max_distance)?;
    Ok(CausalDecision {
        pair,
        verdict: determine(s_cause, s_causedby, threshold),
        s_cause,
        s_causedby,
        threshold_used: threshold,
    })
}

pub fn decide_all(
    docs: &[Document],
    jobs: &[PairJob],
    bundles: &[EvidenceBundle],
    config: &MefaConfig,
    aggregator: Aggregator,
) -> Result<Vec<CausalDecision>, ConfigError> {
    jobs.iter()
        .zip(bundles)
        .map(|(job, b)| decide_pair(&docs[job.doc], job, b, config, aggregator))
        .collect()
}

/// One causal graph per document, nodes in document order.
pub fn build_graphs(
    docs: &[Document],
    jobs: &[PairJob],
    bundles: &[EvidenceBundle],
    decisions: &[CausalDecision],
) -> Vec<CausalGraph> {
    docs.iter()
        .enumerate()
        .map(|(di, doc)| {
            let nodes: Vec<String> = document_order(doc).into_iter().map(|e| e.id.clone()).collect();
            let mut mine = Vec::new();
            let mut coref = Vec::new();
            for ((job, b), d) in jobs.iter().zip(bundles).zip(decisions) {
                if job.doc != di {
                    continue;
                }
                mine.push(d.clone());
                if b.coref {
                    coref.push((d.pair.0.as_str(), d.pair.1.as_str()));
                }
            }
            assemble_graph(&nodes, &mine, &coref_pair_set(coref))
        })
        .collect()
}

/// Everything a completed run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub jobs: Vec<PairJob>,
    pub bundles: Vec<EvidenceBundle>,
    pub decisions: Vec<CausalDecision>,
    pub graphs: Vec<CausalGraph>,
}

impl RunOutput {
    pub fn predictions(&self, docs: &[Document]) -> Vec<PredictionRecord> {
        self.jobs
            .iter()
            .zip(&self.decisions)
            .map(|(job, d)| PredictionRecord::new(&docs[job.doc].id, d))
            .collect()
    }

    pub fn parse_fallbacks(&self) -> usize {
        self.bundles.iter().map(|b| b.degraded.count()).sum()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("evidence gathering stopped after {completed} of {total} pairs: {source}")]
    Gather {
        completed: usize,
        total: usize,
        pair: String,
        #[source]
        source: GatewayError,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Gathers evidence for every pair admitted by `selection`, then scores,
/// decides and assembles graphs in a single deterministic pass.
pub fn run_pipeline(
    docs: &[Document],
    gateway: &Gateway,
    templates: &TemplateSet,
    config: &MefaConfig,
    aggregator: Aggregator,
    selection: ScopeSelection,
) -> Result<RunOutput, RunError> {
    config.validate()?;
    let jobs = plan_jobs(docs, selection);
    info!("{} candidate pairs in {} documents", jobs.len(), docs.len());
    let bundles = gather_all(gateway, templates, docs, &jobs, config, false).map_err(|f| {
        let (i, source) = f.failures.into_iter().next().expect("non-empty failures");
        RunError::Gather {
            completed: f.completed,
            total: jobs.len(),
            pair: jobs[i].label(docs),
            source,
        }
    })?;
    let decisions = decide_all(docs, &jobs, &bundles, config, aggregator)?;
    let graphs = build_graphs(docs, &jobs, &bundles, &decisions);
    Ok(RunOutput {
        jobs,
        bundles,
        decisions,
        graphs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceRecord {
    pub doc_id: String,
    pub first: String,
    pub second: String,
    pub distance: usize,
    pub bundle: EvidenceBundle,
}

pub fn evidence_records(docs: &[Document], output: &RunOutput) -> Vec<EvidenceRecord> {
    output
        .jobs
        .iter()
        .zip(&output.bundles)
        .map(|(job, b)| {
            let (x, y) = job.events(docs);
            EvidenceRecord {
                doc_id: docs[job.doc].id.clone(),
                first: x.id.clone(),
                second: y.id.clone(),
                distance: job.scope.distance,
                bundle: b.clone(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregator_tokens() {
        for t in ["choquet", "wavg", "expavg", "einstein", "meda"] {
            assert_eq!(t.parse::<Aggregator>().unwrap().to_string(), t);
        }
        assert!("mean".parse::<Aggregator>().is_err());
    }
}
