use log::warn;

use eci_core::{
    fallback_answer, parse, validate_bundle, Answer, DegradedFlags, DependencyLevel, Document,
    EventMention, EvidenceBundle, MefaConfig, ProbTriple, SubTask, TemplateSet,
};

use crate::error::GatewayError;
use crate::gateway::Gateway;

/// Entry-wise mean of the triples, renormalized. `None` when empty.
pub fn average_triples(triples: &[ProbTriple]) -> Option<ProbTriple> {
    if triples.is_empty() {
        return None;
    }
    let mut acc = [0.0; 3];
    for t in triples {
        for (a, v) in acc.iter_mut().zip(t.0) {
            *a += v;
        }
    }
    let n = triples.len() as f64;
    Some(ProbTriple(acc.map(|a| a / n)).normalized().0)
}

fn parsed_or_fallback(task: SubTask, raw: &str) -> (Answer, bool) {
    match parse(task, raw) {
        Ok(a) => (a, false),
        Err(e) => {
            warn!("{task}: {e}; using fallback");
            (fallback_answer(task), true)
        }
    }
}

/// Queries all six sub-tasks for the ordered pair and assembles a validated
/// bundle.
///
/// Each main task is asked `config.rounds` times and the parsed triples are
/// averaged; rounds that cannot be parsed are left out of the mean. If no
/// round parses, the triple is uniform and flagged degraded. Auxiliary tasks
/// are asked once. Gateway errors propagate, parse errors never do.
pub fn gather_evidence(
    gateway: &Gateway,
    templates: &TemplateSet,
    doc: &Document,
    pair: (&EventMention, &EventMention),
    config: &MefaConfig,
) -> Result<EvidenceBundle, GatewayError> {
    let rounds = config.rounds.max(1);
    let mut triples = [ProbTriple::UNIFORM; 3];
    let mut degraded = DegradedFlags::default();
    for (slot, task) in SubTask::MAIN.into_iter().enumerate() {
        let request = templates.render(task, doc, pair)?;
        let mut valid = Vec::with_capacity(rounds as usize);
        let mut flagged = false;
        for round in 1..=rounds {
            let raw = gateway.query(&request, round)?;
            match parse(task, &raw) {
                Ok(Answer::Triple { triple, degraded }) => {
                    flagged |= degraded;
                    valid.push(triple);
                }
                Ok(other) => unreachable!("main task parsed as {other:?}"),
                Err(e) => warn!("{task} round {round} on ({}, {}): {e}", pair.0.id, pair.1.id),
            }
        }
        triples[slot] = match average_triples(&valid) {
            Some(t) => t,
            None => {
                flagged = true;
                ProbTriple::UNIFORM
            }
        };
        match task {
            SubTask::Temporality => degraded.temporality = flagged,
            SubTask::Necessity => degraded.necessity = flagged,
            _ => degraded.sufficiency = flagged,
        }
    }

    let mut d = DependencyLevel::None;
    let mut clues = Vec::new();
    let mut coref = false;
    for task in SubTask::AUXILIARY {
        let request = templates.render(task, doc, pair)?;
        let raw = gateway.query(&request, 1)?;
        let (answer, failed) = parsed_or_fallback(task, &raw);
        match answer {
            Answer::Dependency(level) => {
                d = level;
                degraded.dependency = failed;
            }
            Answer::Clues(c) => {
                clues = c;
                degraded.causal_clue = failed;
            }
            Answer::Coreference(b) => {
                coref = b;
                degraded.coreference = failed;
            }
            Answer::Triple { .. } => unreachable!("auxiliary task parsed as a triple"),
        }
    }

    Ok(validate_bundle(EvidenceBundle {
        t: triples[0],
        n: triples[1],
        u: triples[2],
        d,
        clues,
        coref,
        rounds_used: rounds,
        degraded,
    }))
}
