//! Sub-task prompt rendering and response parsing.
//!
//! Main sub-tasks ask the model for a confidence on every candidate relation
//! (`LABEL: confidence` lines); auxiliary sub-tasks ask for a bare answer.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::domain::{DependencyLevel, Document, EventMention, ProbTriple};
use crate::error::{DomainError, PromptError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubTask {
    Temporality,
    Necessity,
    Sufficiency,
    Dependency,
    CausalClue,
    Coreference,
}

impl SubTask {
    pub const ALL: [SubTask; 6] = [
        SubTask::Temporality,
        SubTask::Necessity,
        SubTask::Sufficiency,
        SubTask::Dependency,
        SubTask::CausalClue,
        SubTask::Coreference,
    ];

    pub const MAIN: [SubTask; 3] = [SubTask::Temporality, SubTask::Necessity, SubTask::Sufficiency];

    pub const AUXILIARY: [SubTask; 3] = [SubTask::Dependency, SubTask::CausalClue, SubTask::Coreference];

    /// Main sub-tasks return a distribution; auxiliary ones a single answer.
    pub fn is_main(&self) -> bool {
        matches!(
            self,
            SubTask::Temporality | SubTask::Necessity | SubTask::Sufficiency
        )
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SubTask::Temporality => "temporality",
            SubTask::Necessity => "necessity",
            SubTask::Sufficiency => "sufficiency",
            SubTask::Dependency => "dependency",
            SubTask::CausalClue => "causal_clue",
            SubTask::Coreference => "coreference",
        }
    }

    fn index(&self) -> usize {
        SubTask::ALL.iter().position(|t| t == self).unwrap()
    }
}

impl fmt::Display for SubTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SubTask {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SubTask::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| DomainError::UnknownToken(s.to_string()))
    }
}

/// A fully rendered prompt for one sub-task and event pair.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PromptRequest {
    pub task: SubTask,
    pub context: String,
    pub event1: String,
    pub event2: String,
    pub rendered: String,
}

const PLACEHOLDERS: [&str; 3] = ["context", "event1", "event2"];

/// The six sub-task templates plus the version tag they were loaded under.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    pub version: String,
    texts: [String; 6],
}

impl Default for TemplateSet {
    fn default() -> Self {
        TemplateSet {
            version: "v1".to_string(),
            texts: [
                include_str!("../templates/v1/temporality.txt").to_string(),
                include_str!("../templates/v1/necessity.txt").to_string(),
                include_str!("../templates/v1/sufficiency.txt").to_string(),
                include_str!("../templates/v1/dependency.txt").to_string(),
                include_str!("../templates/v1/causal_clue.txt").to_string(),
                include_str!("../templates/v1/coreference.txt").to_string(),
            ],
        }
    }
}

impl TemplateSet {
    /// Loads `<task>.txt` for every sub-task from `dir`. The directory name is
    /// used as the version tag.
    pub fn from_dir(dir: &Path) -> Result<Self, PromptError> {
        let mut texts: [String; 6] = Default::default();
        for task in SubTask::ALL {
            let path = dir.join(format!("{}.txt", task.as_str()));
            let text = std::fs::read_to_string(&path).map_err(|e| PromptError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            for ph in PLACEHOLDERS {
                if !text.contains(&format!("{{{ph}}}")) {
                    return Err(PromptError::MissingPlaceholder {
                        name: task.as_str().to_string(),
                        placeholder: ph.to_string(),
                    });
                }
            }
            texts[task.index()] = text;
        }
        let version = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| dir.display().to_string());
        Ok(TemplateSet { version, texts })
    }

    pub fn template(&self, task: SubTask) -> &str {
        &self.texts[task.index()]
    }

    /// Renders the prompt for `task` on the ordered pair `(first, second)`.
    pub fn render(
        &self,
        task: SubTask,
        doc: &Document,
        pair: (&EventMention, &EventMention),
    ) -> Result<PromptRequest, PromptError> {
        for ev in [pair.0, pair.1] {
            if doc.event(&ev.id) != Some(ev) {
                return Err(PromptError::EventNotFound(ev.id.clone()));
            }
        }
        let context = pair_context(doc, pair.0, pair.1);
        let rendered = fill(
            self.template(task),
            &[
                ("context", context.as_str()),
                ("event1", pair.0.trigger.as_str()),
                ("event2", pair.1.trigger.as_str()),
            ],
        );
        Ok(PromptRequest {
            task,
            context,
            event1: pair.0.trigger.clone(),
            event2: pair.1.trigger.clone(),
            rendered,
        })
    }
}

/// The containing sentence for intra-sentence pairs, otherwise every sentence
/// from the first event's through the second's, joined by single spaces.
pub fn pair_context(doc: &Document, e1: &EventMention, e2: &EventMention) -> String {
    let lo = e1.sentence_index.min(e2.sentence_index);
    let hi = e1.sentence_index.max(e2.sentence_index);
    doc.sentences[lo..=hi].join(" ")
}

/// Single-pass `{name}` substitution. Unknown placeholders are left as is and
/// substituted values are never re-scanned.
pub fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let tail = &rest[open + 1..];
        let hit = tail.find('}').and_then(|close| {
            let name = &tail[..close];
            values
                .iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| (close, *v))
        });
        match hit {
            Some((close, value)) => {
                out.push_str(value);
                rest = &tail[close + 1..];
            }
            None => {
                out.push('{');
                rest = tail;
            }
        }
    }
    out.push_str(rest);
    out
}

/// A parsed sub-task answer.
#[derive(Debug, Clone, PartialEq)]
pub enum Answer {
    /// Main-task distribution; `degraded` marks a fallback to uniform.
    Triple { triple: ProbTriple, degraded: bool },
    Dependency(DependencyLevel),
    Clues(Vec<String>),
    Coreference(bool),
}

const NUMBER: &str = r#"[\s\]\)\*"'`]*(?:confidence\s*)?[:=(]\s*[\[\*"'`]*\s*(-?(?:\d+(?:\.\d*)?|\.\d+))\s*(%)?"#;

fn label_regex(labels: &str) -> Regex {
    Regex::new(&format!(r"(?i)\b({labels})\b{NUMBER}")).unwrap()
}

static TEMPORALITY_RE: LazyLock<Regex> =
    LazyLock::new(|| label_regex(r"before|after|simultaneous|vague"));
static NECESSITY_RE: LazyLock<Regex> = LazyLock::new(|| {
    label_regex(r"rev(?:erse)?[_\s-]?precondition|no[_\s-]?precondition|precondition|none")
});
static SUFFICIENCY_RE: LazyLock<Regex> = LazyLock::new(|| {
    label_regex(r"rev(?:erse)?[_\s-]?sufficiency|no[_\s-]?sufficiency|sufficiency|none")
});
static DEPENDENCY_LABEL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\bdependency(?:\s+level)?\s*:").unwrap());
static DEPENDENCY_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(strong|medium|weak|none)\b").unwrap());
static CLUE_LABEL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(?:causal\s+)?clue(?:\s+word)?s?\s*:").unwrap());
static COREF_LABEL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\bcoreference\s*:").unwrap());
static YES_NO_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(yes|no|true|false)\b").unwrap());

/// Slot a recognized label fills: 0..=2 for the triple, 3 for VAGUE.
fn slot(task: SubTask, label: &str) -> usize {
    let l = label.to_ascii_lowercase();
    match task {
        SubTask::Temporality => match l.as_str() {
            "before" => 0,
            "after" => 1,
            "simultaneous" => 2,
            _ => 3,
        },
        _ if l.starts_with("rev") => 1,
        _ if l.starts_with("no") => 2,
        _ => 0,
    }
}

fn parse_triple(task: SubTask, raw: &str) -> Result<Answer, PromptError> {
    let re = match task {
        SubTask::Temporality => &*TEMPORALITY_RE,
        SubTask::Necessity => &*NECESSITY_RE,
        _ => &*SUFFICIENCY_RE,
    };
    // Later mentions override earlier ones: answers follow the explanation.
    let mut values: [Option<f64>; 4] = [None; 4];
    for cap in re.captures_iter(raw) {
        let Ok(mut v) = cap[2].parse::<f64>() else {
            continue;
        };
        if cap.get(3).is_some() {
            v /= 100.0;
        }
        values[slot(task, &cap[1])] = Some(v);
    }
    if values.iter().all(Option::is_none) {
        return Err(PromptError::ParseFailure);
    }
    let main = [0, 1, 2].map(|i| values[i].unwrap_or(0.0));
    if let Some(vague) = values[3] {
        let best = main.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if vague > 0.0 && vague >= best || values[..3].iter().all(Option::is_none) {
            return Ok(Answer::Triple {
                triple: ProbTriple::UNIFORM,
                degraded: true,
            });
        }
    }
    let (triple, degraded) = ProbTriple(main).normalized();
    Ok(Answer::Triple { triple, degraded })
}

/// Text following the last match of `label`, or the whole response.
fn after_last_label<'a>(label: &Regex, raw: &'a str) -> &'a str {
    label
        .find_iter(raw)
        .last()
        .map(|m| &raw[m.end()..])
        .unwrap_or(raw)
}

fn parse_dependency(raw: &str) -> Result<Answer, PromptError> {
    let scope = after_last_label(&DEPENDENCY_LABEL_RE, raw);
    let level = DEPENDENCY_RE
        .captures(scope)
        .map(|c| c[1].to_ascii_lowercase())
        .ok_or(PromptError::ParseFailure)?;
    Ok(Answer::Dependency(match level.as_str() {
        "strong" => DependencyLevel::Strong,
        "medium" => DependencyLevel::Medium,
        "weak" => DependencyLevel::Weak,
        _ => DependencyLevel::None,
    }))
}

fn is_none_token(s: &str) -> bool {
    matches!(
        s.to_ascii_lowercase().as_str(),
        "none" | "n/a" | "na" | "null" | "nil" | "no clues" | "no clue" | "empty"
    )
}

static FIELD_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*[A-Za-z][A-Za-z ]*:").unwrap());

/// Lines belonging to the answer field that starts right after `start`.
fn field_block(rest: &str) -> String {
    let mut lines = Vec::new();
    for (i, line) in rest.lines().enumerate() {
        let t = line.trim();
        if i > 0 && FIELD_RE.is_match(line) {
            break;
        }
        if t.is_empty() {
            if lines.is_empty() {
                continue;
            }
            break;
        }
        lines.push(t);
    }
    lines.join("\n")
}

fn parse_clues(raw: &str) -> Result<Answer, PromptError> {
    let payload = match CLUE_LABEL_RE.find_iter(raw).last() {
        Some(m) => field_block(&raw[m.end()..]),
        None => {
            let t = raw.trim();
            if t.starts_with('[') || is_none_token(t.trim_end_matches('.')) {
                t.to_string()
            } else {
                return Err(PromptError::ParseFailure);
            }
        }
    };
    let clues = payload
        .split([',', ';', '\n'])
        .map(|c| {
            c.trim_matches(|ch: char| {
                ch.is_whitespace() || "[]()\"'`*.-•“”‘’".contains(ch)
            })
        })
        .filter(|c| !c.is_empty() && !is_none_token(c))
        .map(str::to_string)
        .collect();
    Ok(Answer::Clues(clues))
}

fn parse_coreference(raw: &str) -> Result<Answer, PromptError> {
    let scope = after_last_label(&COREF_LABEL_RE, raw);
    let word = YES_NO_RE
        .captures(scope)
        .map(|c| c[1].to_ascii_lowercase())
        .ok_or(PromptError::ParseFailure)?;
    Ok(Answer::Coreference(matches!(word.as_str(), "yes" | "true")))
}

/// Parses a raw model response for `task`.
///
/// Main tasks scan case-insensitively for `LABEL: number` (also `LABEL (number)`
/// and percentages), default missing labels to zero and renormalize. A
/// response dominated by VAGUE becomes the uniform triple with `degraded` set.
pub fn parse(task: SubTask, raw: &str) -> Result<Answer, PromptError> {
    if raw.trim().is_empty() {
        return Err(PromptError::ParseFailure);
    }
    match task {
        SubTask::Temporality | SubTask::Necessity | SubTask::Sufficiency => {
            parse_triple(task, raw)
        }
        SubTask::Dependency => parse_dependency(raw),
        SubTask::CausalClue => parse_clues(raw),
        SubTask::Coreference => parse_coreference(raw),
    }
}

/// The answer substituted when a response cannot be parsed: a uniform,
/// degraded triple for main tasks, `none` dependency, no clues and no
/// coreference.
pub fn fallback_answer(task: SubTask) -> Answer {
    match task {
        SubTask::Temporality | SubTask::Necessity | SubTask::Sufficiency => Answer::Triple {
            triple: ProbTriple::UNIFORM,
            degraded: true,
        },
        SubTask::Dependency => Answer::Dependency(DependencyLevel::None),
        SubTask::CausalClue => Answer::Clues(Vec::new()),
        SubTask::Coreference => Answer::Coreference(false),
    }
}
