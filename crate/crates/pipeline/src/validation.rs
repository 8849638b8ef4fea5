//! Synthetic validation documents from marked seed sentences: the original,
//! an implicit rewrite and an expansion, optionally enriched with extra
//! unlabeled event mentions.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{LazyLock, Mutex};
use std::thread;

use log::warn;
use regex::Regex;
use serde::{Deserialize, Serialize};

use eci_core::prompts::fill;
use eci_core::{Document, EventMention, Relation};
use eci_gateway::{Gateway, GatewayError, Route};

/// Sampling temperature for generation requests.
pub const VALIDATION_TEMPERATURE: f64 = 0.7;

const OPEN: &str = "[EVENT]";
const CLOSE: &str = "[/EVENT]";

const REWRITE: &str = include_str!("../templates/validation/rewrite.txt");
const EXPAND: &str = include_str!("../templates/validation/expand.txt");
const EXTRACT: &str = include_str!("../templates/validation/extract.txt");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seed {
    pub cause: String,
    pub effect: String,
    pub sentence: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenModes {
    pub rewrite: bool,
    pub expand: bool,
    pub extract: bool,
}

impl GenModes {
    pub const ALL: GenModes = GenModes {
        rewrite: true,
        expand: true,
        extract: true,
    };
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ValidationError {
    #[error("seed {line}: {message}")]
    Input { line: usize, message: String },
}

/// Text with the markers removed and the character span of every marked
/// mention, in order of appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct Marked {
    pub text: String,
    pub spans: Vec<(usize, usize)>,
}

impl Marked {
    pub fn trigger(&self, i: usize) -> String {
        let (s, e) = self.spans[i];
        self.text.chars().skip(s).take(e - s).collect()
    }
}

pub fn strip_markers(text: &str) -> Result<Marked, String> {
    let mut out = String::with_capacity(text.len());
    let mut chars = 0usize;
    let mut spans = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find(OPEN) {
        let before = &rest[..open];
        if before.contains(CLOSE) {
            return Err(format!("`{CLOSE}` without a matching `{OPEN}`"));
        }
        out.push_str(before);
        chars += before.chars().count();
        let inner_and_tail = &rest[open + OPEN.len()..];
        let close = inner_and_tail
            .find(CLOSE)
            .ok_or_else(|| format!("`{OPEN}` without a matching `{CLOSE}`"))?;
        let inner = &inner_and_tail[..close];
        if inner.contains(OPEN) {
            return Err("nested event markers".into());
        }
        if inner.trim().is_empty() {
            return Err("empty event marker".into());
        }
        let lead = inner.chars().take_while(|c| c.is_whitespace()).count();
        let len = inner.trim().chars().count();
        spans.push((chars + lead, chars + lead + len));
        out.push_str(inner);
        chars += inner.chars().count();
        rest = &inner_and_tail[close + CLOSE.len()..];
    }
    if rest.contains(CLOSE) {
        return Err(format!("`{CLOSE}` without a matching `{OPEN}`"));
    }
    out.push_str(rest);
    Ok(Marked { text: out, spans })
}

/// Character ranges of the sentences of `text`, split after `.`, `!` or `?`
/// followed by whitespace, with surrounding whitespace trimmed.
pub fn split_sentences(text: &str) -> Vec<(usize, usize)> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut start = 0;
    let push = |s: usize, e: usize, out: &mut Vec<(usize, usize)>| {
        let mut s = s;
        let mut e = e;
        while s < e && chars[s].is_whitespace() {
            s += 1;
        }
        while e > s && chars[e - 1].is_whitespace() {
            e -= 1;
        }
        if s < e {
            out.push((s, e));
        }
    };
    for i in 0..chars.len() {
        if matches!(chars[i], '.' | '!' | '?') && chars.get(i + 1).is_some_and(|c| c.is_whitespace()) {
            push(start, i + 1, &mut out);
            start = i + 1;
        }
    }
    push(start, chars.len(), &mut out);
    out
}

fn slice(chars: &[char], (s, e): (usize, usize)) -> String {
    chars[s..e].iter().collect()
}

/// Builds a document from marked text. The mention equal to `cause` (or the
/// one left over once `effect` is found) becomes the cause, likewise for the
/// effect; further marked mentions are unlabeled events.
pub fn marked_document(id: &str, marked_text: &str, cause: &str, effect: &str) -> Result<Document, String> {
    let marked = strip_markers(marked_text)?;
    if marked.spans.len() < 2 {
        return Err(format!("expected two marked events, found {}", marked.spans.len()));
    }
    let triggers: Vec<String> = (0..marked.spans.len()).map(|i| marked.trigger(i)).collect();
    let find = |word: &str, skip: Option<usize>| {
        triggers
            .iter()
            .enumerate()
            .position(|(i, t)| Some(i) != skip && t.eq_ignore_ascii_case(word.trim()))
    };
    let ci = find(cause, None);
    let ei = find(effect, ci);
    let (ci, ei) = match (ci, ei) {
        (Some(c), Some(e)) => (c, e),
        (Some(c), None) if triggers.len() == 2 => (c, 1 - c),
        (None, Some(e)) if triggers.len() == 2 => (1 - e, e),
        _ => return Err(format!("cannot tell which marked mention is `{cause}` and which is `{effect}`")),
    };

    let chars: Vec<char> = marked.text.chars().collect();
    let sentences = split_sentences(&marked.text);
    let mut events = Vec::new();
    for (i, &(s, e)) in marked.spans.iter().enumerate() {
        let (si, &(ss, _)) = sentences
            .iter()
            .enumerate()
            .find(|(_, (ss, se))| *ss <= s && e <= *se)
            .ok_or_else(|| format!("marked mention `{}` crosses a sentence boundary", triggers[i]))?;
        events.push(EventMention {
            id: format!("e{}", i + 1),
            trigger: triggers[i].clone(),
            sentence_index: si,
            char_span: Some((s - ss, e - ss)),
        });
    }
    let doc = Document {
        id: id.to_string(),
        sentences: sentences.iter().map(|&r| slice(&chars, r)).collect(),
        gold_relations: vec![Relation {
            cause: events[ci].id.clone(),
            effect: events[ei].id.clone(),
        }],
        events,
    };
    doc.validate().map_err(|e| e.to_string())?;
    Ok(doc)
}

/// Marked text of a document: sentences joined by spaces with every labeled
/// or unlabeled event wrapped in markers.
pub fn marked_text(doc: &Document) -> String {
    let mut out = Vec::new();
    for (si, sentence) in doc.sentences.iter().enumerate() {
        let chars: Vec<char> = sentence.chars().collect();
        let mut spans: Vec<(usize, usize)> = doc
            .events
            .iter()
            .filter(|e| e.sentence_index == si)
            .filter_map(|e| e.char_span)
            .collect();
        spans.sort();
        let mut s = String::new();
        let mut at = 0;
        for (a, b) in spans {
            if a < at || b > chars.len() {
                continue;
            }
            s.extend(&chars[at..a]);
            s.push_str(OPEN);
            s.extend(&chars[a..b]);
            s.push_str(CLOSE);
            at = b;
        }
        s.extend(&chars[at..]);
        out.push(s);
    }
    out.join(" ")
}

/// Text after the last `label:` in `raw`, or all of `raw` without one.
pub fn labeled_field(raw: &str, label: &str) -> String {
    let re = Regex::new(&format!(r"(?i){}\s*:", regex::escape(label))).expect("label regex");
    let body = match re.find_iter(raw).last() {
        Some(m) => &raw[m.end()..],
        None => raw,
    };
    body.trim().trim_matches(|c| c == '"' || c == '*').trim().to_string()
}

static PAIR_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"\[\s*["']?([^\[\],"']+?)["']?\s*,\s*(\d+)\s*\]"#).unwrap());

/// Mentions listed by the extraction step, with their sentence index when
/// given. Accepts `[[mention, idx], ...]` and flat `[a, b, c]` lists.
pub fn parse_mentions(raw: &str) -> Vec<(String, Option<usize>)> {
    let body = labeled_field(raw, "Annotated Event Mentions");
    let pairs: Vec<(String, Option<usize>)> = PAIR_RE
        .captures_iter(&body)
        .map(|c| (c[1].trim().to_string(), c[2].parse().ok()))
        .collect();
    if !pairs.is_empty() {
        return pairs;
    }
    let inner = match (body.find('['), body.rfind(']')) {
        (Some(a), Some(b)) if a < b => &body[a + 1..b],
        _ => return Vec::new(),
    };
    inner
        .split(',')
        .map(|s| s.trim().trim_matches(|c| c == '"' || c == '\'' || c == '[' || c == ']').trim())
        .filter(|s| !s.is_empty())
        .map(|s| (s.to_string(), None))
        .collect()
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\''
}

/// First whole-word, case-insensitive occurrence of `word` in `sentence`
/// that does not overlap `taken`, as a character span.
fn locate(sentence: &str, word: &str, taken: &[(usize, usize)]) -> Option<(usize, usize)> {
    let hay: Vec<char> = sentence.chars().flat_map(char::to_lowercase).collect();
    let needle: Vec<char> = word.chars().flat_map(char::to_lowercase).collect();
    if needle.is_empty() || hay.len() != sentence.chars().count() || needle.len() > hay.len() {
        return None;
    }
    (0..=hay.len() - needle.len()).map(|s| (s, s + needle.len())).find(|&(s, e)| {
        hay[s..e] == needle[..]
            && (s == 0 || !is_word_char(hay[s - 1]))
            && (e == hay.len() || !is_word_char(hay[e]))
            && taken.iter().all(|&(a, b)| e <= a || b <= s)
    })
}

/// Adds extracted mentions as unlabeled events `x1, x2, ...`. Mentions that
/// cannot be found, or only overlap existing events, are skipped.
pub fn add_mentions(doc: &mut Document, mentions: &[(String, Option<usize>)]) -> usize {
    let mut added = 0;
    for (word, hint) in mentions {
        let candidates: Vec<usize> = match hint {
            Some(i) if *i < doc.sentences.len() => vec![*i],
            _ => (0..doc.sentences.len()).collect(),
        };
        for si in candidates {
            let taken: Vec<(usize, usize)> = doc
                .events
                .iter()
                .filter(|e| e.sentence_index == si)
                .filter_map(|e| e.char_span)
                .collect();
            if let Some(span) = locate(&doc.sentences[si], word, &taken) {
                added += 1;
                let trigger: String = doc.sentences[si].chars().skip(span.0).take(span.1 - span.0).collect();
                doc.events.push(EventMention {
                    id: format!("x{added}"),
                    trigger,
                    sentence_index: si,
                    char_span: Some(span),
                });
                break;
            }
        }
    }
    added
}

/// Seed lines in `{cause, effect, sentence}` form. Blank lines are skipped.
pub fn parse_seeds(text: &str) -> Result<Vec<(usize, Seed)>, ValidationError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map(|s| (i + 1, s))
                .map_err(|e| ValidationError::Input {
                    line: i + 1,
                    message: e.to_string(),
                })
        })
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct GenerationReport {
    pub documents: Vec<Document>,
    /// `(seed line, reason)` for seeds dropped because the backend failed.
    pub skipped_seeds: Vec<(usize, String)>,
    /// `(document id, reason)` for variants whose output was unusable.
    pub skipped_variants: Vec<(String, String)>,
}

fn ask(gateway: &Gateway, tag: &str, template: &str, seed: &Seed, text: &str) -> Result<String, GatewayError> {
    let prompt = fill(
        template,
        &[("sentence", text), ("cause", seed.cause.as_str()), ("effect", seed.effect.as_str())],
    );
    gateway.query_route(Route {
        tag,
        event1: &seed.cause,
        event2: &seed.effect,
        prompt: &prompt,
        round: 1,
    })
}

type SeedOutcome = Result<(Vec<Document>, Vec<(String, String)>), GatewayError>;

fn generate_one(gateway: &Gateway, line: usize, seed: &Seed, original: Document, modes: GenModes) -> SeedOutcome {
    let mut docs = vec![original];
    let mut skipped = Vec::new();
    let variants = [
        (modes.rewrite, "rewrite", REWRITE, "Rewritten Sentence"),
        (modes.expand, "expand", EXPAND, "Expanded Sentences"),
    ];
    for (on, tag, template, label) in variants {
        if !on {
            continue;
        }
        let id = format!("seed-{line}-{tag}");
        let raw = ask(gateway, tag, template, seed, &seed.sentence)?;
        match marked_document(&id, &labeled_field(&raw, label), &seed.cause, &seed.effect) {
            Ok(d) => docs.push(d),
            Err(e) => {
                warn!("{id}: unusable output: {e}");
                skipped.push((id, e));
            }
        }
    }
    if modes.extract {
        for doc in &mut docs {
            let raw = ask(gateway, "extract", EXTRACT, seed, &marked_text(doc))?;
            add_mentions(doc, &parse_mentions(&raw));
        }
    }
    Ok((docs, skipped))
}

/// Generates validation documents for every seed. Marker problems in any
/// seed are reported before the backend is contacted. A seed whose requests
/// fail is skipped with a warning; the rest of the batch continues. At most
/// `concurrency` seeds are processed at once and output order follows the
/// seed order.
pub fn generate_validation(
    seeds: &[(usize, Seed)],
    gateway: &Gateway,
    modes: GenModes,
    concurrency: usize,
) -> Result<GenerationReport, ValidationError> {
    let originals: Vec<Document> = seeds
        .iter()
        .map(|(line, s)| {
            marked_document(&format!("seed-{line}-original"), &s.sentence, &s.cause, &s.effect)
                .map_err(|message| ValidationError::Input { line: *line, message })
        })
        .collect::<Result<_, _>>()?;

    let slots: Vec<Mutex<Option<SeedOutcome>>> = seeds.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    thread::scope(|s| {
        for _ in 0..concurrency.clamp(1, seeds.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((line, seed)) = seeds.get(i) else { break };
                let out = generate_one(gateway, *line, seed, originals[i].clone(), modes);
                *slots[i].lock().unwrap() = Some(out);
            });
        }
    });

    let mut report = GenerationReport::default();
    for ((line, _), slot) in seeds.iter().zip(slots) {
        match slot.into_inner().unwrap().expect("every seed processed") {
            Ok((docs, skipped)) => {
                report.documents.extend(docs);
                report.skipped_variants.extend(skipped);
            }
            Err(e) => {
                warn!("seed {line} skipped: {e}");
                report.skipped_seeds.push((*line, e.to_string()));
            }
        }
    }
    Ok(report)
}
