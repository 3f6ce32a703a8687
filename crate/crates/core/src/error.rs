use std::fmt;

use thiserror::Error;

/// A position in a source text, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Location {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{location}: {message}")]
pub struct SyntaxError {
    pub location: Location,
    pub message: String,
}

impl SyntaxError {
    pub fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        SyntaxError {
            location: Location { line, column },
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("syntax error at {0}")]
    Syntax(#[from] SyntaxError),
    #[error("undeclared variable `{0}`")]
    UndeclaredVariable(String),
    #[error("variable `{0}` declared twice")]
    DuplicateVariable(String),
    #[error("unsupported feature: {0}")]
    Unsupported(String),
    #[error("invalid declaration: {0}")]
    InvalidDeclaration(String),

    #[error("value {value} assigned to `{var}` is outside its range [{lo}, {hi})")]
    RangeViolation { var: String, value: i64, lo: i64, hi: i64 },
    #[error("enumeration cap exceeded: {needed} states needed, cap is {cap}")]
    CapExceeded { needed: u128, cap: u128 },
    #[error("conditioning on an event of probability zero")]
    ConditioningOnImpossible,
    #[error("program is not deterministic: {0}")]
    NotDeterministic(String),

    #[error("variable `{0}` is not part of the decision-diagram order")]
    UnknownVariable(String),
    #[error("decision diagrams belong to different stores")]
    StoreMismatch,
    #[error("no weight entry for variable `{0}`")]
    MissingWeight(String),
    #[error("variable mapping is not injective")]
    NonInjectiveMapping,

    #[error("flip parameter {0} is outside [0, 1]")]
    ParameterRange(String),
    #[error("flip site {0} has a symbolic parameter `{1}` with no value")]
    UnboundParameter(usize, String),
    #[error("program mixes `*` and `flip`")]
    MixedMode,
    #[error("non-deterministic choice `*` is not allowed here")]
    UnexpectedStar,
    #[error("`flip` is not allowed in a non-deterministic program")]
    UnexpectedFlip,
    #[error("`choose` must be desugared before probabilistic evaluation")]
    UnexpectedChoose,
    #[error("parallel assignment assigns `{0}` twice")]
    DuplicateTarget(String),

    #[error("too many predicates: {0} (limit {1})")]
    TooManyPredicates(usize, usize),
    #[error("duplicate predicate label `{0}`")]
    DuplicateLabel(String),
    #[error("predicate `{0}` has no matching Boolean variable in the abstraction")]
    MissingPredicateVariable(String),
    #[error("event is not expressible over the predicates")]
    NotExpressible,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("concretization distribution is not strongly compatible: {0}")]
    IncompatibleConcretization(String),
    #[error("unknown program point `{0}`")]
    UnknownPoint(String),
}

pub type Result<T> = std::result::Result<T, Error>;
