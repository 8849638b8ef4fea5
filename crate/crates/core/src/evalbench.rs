//! Corpus loading, pair enumeration and existence/direction metrics.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::decision::PairScope;
use crate::domain::{CausalDecision, Document, EventMention, Relation, Verdict};
use crate::error::{CorpusError, DomainError};
use crate::scoring::Scope;

/// Reads a line-delimited corpus. Blank lines are skipped; any malformed or
/// invalid document aborts with the offending line number.
pub fn load_corpus(path: &Path) -> Result<Vec<Document>, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_corpus(&text).map_err(|(line, message)| CorpusError::Line {
        path: path.display().to_string(),
        line,
        message,
    })
}

/// Parses corpus text; errors carry the 1-based line number.
pub fn parse_corpus(text: &str) -> Result<Vec<Document>, (usize, String)> {
    let mut docs = Vec::new();
    let mut ids = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(line).map_err(|e| (i + 1, e.to_string()))?;
        doc.validate().map_err(|e| (i + 1, e.to_string()))?;
        if !ids.insert(doc.id.clone()) {
            return Err((i + 1, format!("duplicate document id `{}`", doc.id)));
        }
        docs.push(doc);
    }
    Ok(docs)
}

/// Canonical corpus text: one JSON document per line, trailing newline.
pub fn corpus_to_string(docs: &[Document]) -> String {
    docs.iter().map(|d| d.to_json_line() + "\n").collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScopeSelection {
    Intra,
    Inter,
    Both,
}

impl ScopeSelection {
    pub fn admits(&self, scope: Scope) -> bool {
        matches!(
            (self, scope),
            (ScopeSelection::Both, _)
                | (ScopeSelection::Intra, Scope::Intra)
                | (ScopeSelection::Inter, Scope::Inter)
        )
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ScopeSelection::Intra => "intra",
            ScopeSelection::Inter => "inter",
            ScopeSelection::Both => "both",
        }
    }
}

impl fmt::Display for ScopeSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScopeSelection {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "intra" => Ok(ScopeSelection::Intra),
            "inter" => Ok(ScopeSelection::Inter),
            "both" => Ok(ScopeSelection::Both),
            other => Err(DomainError::UnknownToken(other.to_string())),
        }
    }
}

/// An ordered candidate pair; `first` precedes `second` in the document.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventPair<'a> {
    pub first: &'a EventMention,
    pub second: &'a EventMention,
    pub scope: PairScope,
}

/// Events in document order: by sentence, then character offset, then the
/// order they are listed in.
pub fn document_order(doc: &Document) -> Vec<&EventMention> {
    let mut events: Vec<&EventMention> = doc.events.iter().collect();
    events.sort_by_key(|e| (e.sentence_index, e.char_span.map(|s| s.0)));
    events
}

/// Every unordered event pair once, oriented in document order.
pub fn enumerate_pairs(doc: &Document, selection: ScopeSelection) -> Vec<EventPair<'_>> {
    let events = document_order(doc);
    let mut out = Vec::new();
    for (i, first) in events.iter().enumerate() {
        for second in &events[i + 1..] {
            let scope = PairScope::between(first.sentence_index, second.sentence_index);
            if selection.admits(scope.scope) {
                out.push(EventPair {
                    first,
                    second,
                    scope,
                });
            }
        }
    }
    out
}

/// Gold relations of `doc` whose endpoints fall in the selected scope.
pub fn gold_in_scope(doc: &Document, selection: ScopeSelection) -> Vec<&Relation> {
    let sentence: HashMap<&str, usize> = doc
        .events
        .iter()
        .map(|e| (e.id.as_str(), e.sentence_index))
        .collect();
    doc.gold_relations
        .iter()
        .filter(|r| {
            let scope = PairScope::between(sentence[r.cause.as_str()], sentence[r.effect.as_str()]);
            selection.admits(scope.scope)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EvalMode {
    /// Existence: direction is ignored.
    EI,
    /// Direction must match.
    DI,
}

impl FromStr for EvalMode {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ei" => Ok(EvalMode::EI),
            "di" => Ok(EvalMode::DI),
            other => Err(DomainError::UnknownToken(other.to_string())),
        }
    }
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalMode::EI => "EI",
            EvalMode::DI => "DI",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mode: EvalMode,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl MetricsReport {
    pub fn from_counts(mode: EvalMode, tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        MetricsReport {
            mode,
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
        }
    }
}

fn key((a, b): (String, String), mode: EvalMode) -> (String, String) {
    match mode {
        EvalMode::EI if b < a => (b, a),
        _ => (a, b),
    }
}

/// Scores directed gold pairs against predicted decisions. Both sides are
/// reduced to sets, unordered for [`EvalMode::EI`]; `NoCausality` verdicts
/// are ignored.
pub fn evaluate<G, P>(gold: G, pred: P, mode: EvalMode) -> MetricsReport
where
    G: IntoIterator<Item = (String, String)>,
    P: IntoIterator<Item = (String, String)>,
{
    let gold: BTreeSet<_> = gold.into_iter().map(|p| key(p, mode)).collect();
    let pred: BTreeSet<_> = pred.into_iter().map(|p| key(p, mode)).collect();
    let tp = pred.intersection(&gold).count();
    MetricsReport::from_counts(mode, tp, pred.len() - tp, gold.len() - tp)
}

/// Convenience form of [`evaluate`] over decisions.
pub fn evaluate_decisions(
    gold: &[(String, String)],
    pred: &[CausalDecision],
    mode: EvalMode,
) -> MetricsReport {
    evaluate(gold.iter().cloned(), directed_edges(pred), mode)
}

fn directed_edges(pred: &[CausalDecision]) -> Vec<(String, String)> {
    pred.iter()
        .filter_map(|d| d.directed_edge())
        .map(|(c, e)| (c.to_string(), e.to_string()))
        .collect()
}

/// One line of the prediction file. `cause`/`effect` name the ordered pair
/// under test (`e_i`, `e_j`); `verdict` states which way, if any, causality
/// was found and the scores refer to `e_i -> e_j` and `e_j -> e_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub doc_id: String,
    pub cause: String,
    pub effect: String,
    pub verdict: Verdict,
    pub s_cause: f64,
    pub s_causedby: f64,
    pub threshold_used: f64,
}

impl PredictionRecord {
    pub fn new(doc_id: &str, d: &CausalDecision) -> Self {
        PredictionRecord {
            doc_id: doc_id.to_string(),
            cause: d.pair.0.clone(),
            effect: d.pair.1.clone(),
            verdict: d.verdict,
            s_cause: d.s_cause,
            s_causedby: d.s_causedby,
            threshold_used: d.threshold_used,
        }
    }

    pub fn decision(&self) -> CausalDecision {
        CausalDecision {
            pair: (self.cause.clone(), self.effect.clone()),
            verdict: self.verdict,
            s_cause: self.s_cause,
            s_causedby: self.s_causedby,
            threshold_used: self.threshold_used,
        }
    }
}

pub fn predictions_to_string(records: &[PredictionRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("record serialization") + "\n")
        .collect()
}

pub fn parse_predictions(text: &str) -> Result<Vec<PredictionRecord>, (usize, String)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| (i + 1, e.to_string())))
        .collect()
}

/// Joins a document id and an event id so pairs from different documents
/// never collide.
fn scoped(doc: &str, event: &str) -> String {
    format!("{doc}\u{1f}{event}")
}

/// Corpus-level metrics. Gold relations are restricted to `selection`;
/// predictions for unknown documents still count as false positives.
pub fn evaluate_corpus(
    docs: &[Document],
    predictions: &[PredictionRecord],
    selection: ScopeSelection,
    mode: EvalMode,
) -> MetricsReport {
    let gold = docs.iter().flat_map(|d| {
        gold_in_scope(d, selection)
            .into_iter()
            .map(|r| (scoped(&d.id, &r.cause), scoped(&d.id, &r.effect)))
    });
    let pred = predictions.iter().filter_map(|r| {
        r.decision()
            .directed_edge()
            .map(|(c, e)| (scoped(&r.doc_id, c), scoped(&r.doc_id, e)))
    });
    evaluate(gold, pred, mode)
}

#[derive(Debug, Deserialize)]
struct MavenMention {
    trigger_word: String,
    sent_id: usize,
}

#[derive(Debug, Deserialize)]
struct MavenEvent {
    id: String,
    mention: Vec<MavenMention>,
}

#[derive(Debug, Deserialize)]
struct MavenDoc {
    id: String,
    sentences: Vec<String>,
    #[serde(default)]
    events: Vec<MavenEvent>,
    #[serde(default)]
    causal_relations: HashMap<String, Vec<(String, String)>>,
}

/// Converts one MAVEN-ERE style JSON line into a canonical document.
///
/// Each event is represented by its first mention under the event id; its
/// char span is the first occurrence of the trigger in its sentence. `CAUSE`
/// and `PRECONDITION` links become gold relations, other relation types and
/// links to unknown ids are dropped.
pub fn convert_maven_line(line: &str) -> Result<Document, String> {
    let src: MavenDoc = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let mut events = Vec::new();
    for ev in &src.events {
        let Some(m) = ev.mention.first() else {
            continue;
        };
        let span = src
            .sentences
            .get(m.sent_id)
            .filter(|_| !m.trigger_word.is_empty())
            .and_then(|s| s.find(&m.trigger_word).map(|b| s[..b].chars().count()))
            .map(|start| (start, start + m.trigger_word.chars().count()));
        events.push(EventMention {
            id: ev.id.clone(),
            trigger: m.trigger_word.clone(),
            sentence_index: m.sent_id,
            char_span: span,
        });
    }
    let known: BTreeSet<&str> = events.iter().map(|e| e.id.as_str()).collect();
    let mut relations = BTreeSet::new();
    for kind in ["CAUSE", "PRECONDITION"] {
        for (c, e) in src.causal_relations.get(kind).into_iter().flatten() {
            if c != e && known.contains(c.as_str()) && known.contains(e.as_str()) {
                relations.insert(Relation {
                    cause: c.clone(),
                    effect: e.clone(),
                });
            }
        }
    }
    let doc = Document {
        id: src.id,
        sentences: src.sentences,
        events,
        gold_relations: relations.into_iter().collect(),
    };
    doc.validate().map_err(|e| e.to_string())?;
    Ok(doc)
}
