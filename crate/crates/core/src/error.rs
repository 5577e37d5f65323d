use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("dyadic index {index} is out of range at level {level}")]
    IndexOutOfRange { level: u32, index: u64 },
    #[error("dyadic level {0} exceeds the supported maximum of 64")]
    LevelOverflow(u64),
    #[error("code is too large to materialize: {0}")]
    CodeTooLarge(String),
    #[error("malformed code: {0}")]
    MalformedCode(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("density takes the negative value {0}")]
    NegativeDensity(String),
    #[error("name is relative to a different measure than the one supplied")]
    ContextMismatch,
    #[error("malformed En-name: nonzero entry {value} repeated at positions {first} and {second}")]
    MalformedName { value: u64, first: usize, second: usize },
    #[error("name ended before approximant {0}")]
    NameExhausted(usize),
    #[error("search budget exhausted at level {level} after {stages} stages")]
    SearchBudgetExhausted { level: usize, stages: usize },
    #[error("single-application discipline violated: {0} applied twice")]
    DisciplineViolation(&'static str),
    #[error("certified EC modulus contradicted: {0} was enumerated after being answered 0")]
    ContractViolation(u64),
    #[error("certificate failure: {0}")]
    Certificate(String),
}
