use crate::model::{ParseError, Violation};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("unsupported composition: {0}")]
    UnsupportedComposition(String),
    #[error("not expressible as a QF_NRA query: {0}")]
    NotExpressible(String),
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("label sets differ: {left:?} vs {right:?}")]
    LabelMismatch { left: Vec<String>, right: Vec<String> },
    #[error("invalid model: {}", join(.0))]
    InvalidModel(Vec<Violation>),
    #[error("invalid scheduler: {0}")]
    InvalidScheduler(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("path enumeration exceeded {0} path pairs")]
    PathExplosion(usize),
}

fn join(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
