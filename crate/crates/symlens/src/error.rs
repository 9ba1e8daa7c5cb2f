//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("unresolved reference `{0}`")]
    UnresolvedRef(String),
    #[error("string does not match the expression")]
    NoParse,
    #[error("ambiguous parse of {input:?} ({count} distinct parses)")]
    AmbiguousParse { input: String, count: usize },
    #[error("empty-language subterm inside a nonempty expression")]
    EmptySubterm,
    #[error("the whole expression denotes the empty language")]
    WholeLanguageEmpty,
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("rewrite pattern does not match at the given path")]
    PatternMismatch,
    #[error("rewrite path addresses no subterm")]
    BadPath,
    #[error("type mismatch at {location}: expected {expected}, got {got}")]
    TypeMismatch {
        location: String,
        expected: String,
        got: String,
    },
    #[error("default string {0:?} is not in the language of its expression")]
    DefaultNotInLanguage(String),
    #[error("operand fails the bounded unambiguity check: witness {0:?}")]
    UnambiguityViolation(String),
    #[error("unresolved lens reference `{0}`")]
    UnresolvedLibRef(String),
    #[error("entropy bounds are undefined for lenses containing composition")]
    ComposePresent,
    #[error("create table misses {side} sequence {index}")]
    CreateTableGap { side: &'static str, index: usize },
    #[error("invalid normal-form lens: {0}")]
    InvalidDnfLens(String),
    #[error("atom mapping is not realizable as a composition-free lens: {0}")]
    UnrealizableMapping(String),
    #[error("library lens `{0}` needs an explicit cost annotation (it contains composition)")]
    MissingCostAnnotation(String),
    #[error("no satisfying lens was found within the search limits")]
    NoLens,
    #[error("example {left:?} / {right:?} does not parse: {side}")]
    BadExample {
        left: String,
        right: String,
        side: String,
    },
    #[error("{0}")]
    Other(String),
}

pub type Result<T> = std::result::Result<T, Error>;
