//! Error types shared across the crate.

use thiserror::Error;

/// Violations of domain-type invariants (codes, utterances, state, profiles).
#[derive(Debug, Error, PartialEq)]
pub enum CoreError {
    #[error("unknown MI code token `{0}`")]
    UnknownCode(String),
    #[error("subtype `{subtype}` is not legal for category `{category}`")]
    IllegalSubtype { category: String, subtype: String },
    #[error("code side `{code_side}` does not match speaker `{speaker}`")]
    SideMismatch { speaker: String, code_side: String },
    #[error("utterance text is empty after trimming")]
    EmptyText,
    #[error("out-of-order turn_index: expected {expected}, got {got}")]
    OutOfOrderTurn { expected: usize, got: usize },
    #[error("{0}")]
    InvalidProfile(String),
    #[error("{0}")]
    InvalidInstrument(String),
    #[error("story is {words} words, over the {cap}-word cap")]
    StoryTooLong { words: usize, cap: usize },
    #[error("{0}")]
    InvalidRecord(String),
}

/// Failures while computing lexical or strategy metrics.
#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("session has no tokens")]
    EmptySession,
    #[error("session has no bigrams (every utterance is shorter than two tokens)")]
    NoBigrams,
    #[error("self-BLEU needs at least two non-empty utterances, found {0}")]
    TooFewUtterances(usize),
    #[error("scorer was fitted on an empty corpus")]
    EmptyCorpus,
    #[error("no therapist codes to score")]
    NoCodes,
    #[error("reflection has no content tokens after stopword removal")]
    NoContentTokens,
    #[error("no reflection pairs to score")]
    NoPairs,
    #[error("no questions to score")]
    NoQuestions,
    #[error("reflection/question ratio is undefined with zero questions")]
    ZeroQuestions,
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

/// Failures in embedding providers or vector arithmetic.
#[derive(Debug, Error, PartialEq)]
pub enum EmbedError {
    #[error("cannot embed an empty batch")]
    EmptyBatch,
    #[error("embedding has zero norm")]
    ZeroNorm,
    #[error("embedding dimensions differ within one batch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("embedding provider error: {0}")]
    Provider(String),
}

/// Failures in the agreement/correlation statistics.
#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("rating vectors differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} paired observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },
    #[error("values must be finite")]
    NonFinite,
    #[error("rating {value} is not an integer in [{min}, {max}]")]
    OutOfRange { value: f64, min: i64, max: i64 },
    #[error("correlation is undefined: {0} has zero variance")]
    ZeroVariance(&'static str),
    #[error("paired differences have zero variance")]
    DegenerateTest,
}
