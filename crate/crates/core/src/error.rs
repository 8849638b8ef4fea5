use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DomainError {
    #[error("duplicate event id `{0}`")]
    DuplicateEvent(String),
    #[error("event `{event}` has sentence_index {index} but the document has {count} sentences")]
    SentenceOutOfRange {
        event: String,
        index: usize,
        count: usize,
    },
    #[error("event `{0}` has an empty or inverted char_span")]
    EmptySpan(String),
    #[error("relation references unknown event `{0}`")]
    UnknownEvent(String),
    #[error("relation links event `{0}` to itself")]
    SelfRelation(String),
    #[error("unknown token `{0}`")]
    UnknownToken(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("invalid value for `{key}`: {reason}")]
    InvalidValue { key: String, reason: String },
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("line {0}: expected `key=value`")]
    Syntax(usize),
    #[error(
        "fuzzy measure cannot reach 1 on the full evidence set: a*{n} + b*{confidence_sum} = {value} < 1"
    )]
    MeasureBelowOne {
        n: usize,
        confidence_sum: f64,
        value: f64,
    },
}

#[derive(Debug, Error, PartialEq)]
pub enum PromptError {
    #[error("event `{0}` not found in document")]
    EventNotFound(String),
    #[error("no recognizable answer in response")]
    ParseFailure,
    #[error("template `{name}` is missing placeholder {{{placeholder}}}")]
    MissingPlaceholder { name: String, placeholder: String },
    #[error("failed to read template {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: line {line}: {message}")]
    Line {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
