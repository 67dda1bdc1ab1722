//! Generators for benchmark families and counterexample models.
//!
//! Each constructor builds a validated model together with the property text
//! it is meant to be checked against, and — where the answer is forced by the
//! construction itself — the expected verdict.

pub mod figures;
pub mod hampath;
pub mod rt;
pub mod ts;
pub mod vn;

use crate::model::Mdp;
use crate::verdict::Verdict;
use thiserror::Error;

/// Which decision procedure an expectation applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    /// The main checker, quantifying over unrestricted schedulers.
    Pipeline,
    /// The memoryless-deterministic enumeration oracle.
    MdOracle,
}

impl Engine {
    pub fn as_str(&self) -> &'static str {
        match self {
            Engine::Pipeline => "pipeline",
            Engine::MdOracle => "md-oracle",
        }
    }
}

/// An expected verdict and why it is known.
#[derive(Debug, Clone)]
pub struct Expected {
    pub engine: Engine,
    pub verdict: Verdict,
    pub source: String,
}

/// A generated model, its property, and any verdicts forced by construction.
#[derive(Debug, Clone)]
pub struct GeneratedInstance {
    pub name: String,
    pub mdp: Mdp,
    pub property: String,
    pub expected: Vec<Expected>,
    pub notes: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("bias probabilities must satisfy 0 < lo <= hi < 1, got {lo} and {hi}")]
    BadBias { lo: String, hi: String },
    #[error("word length must be at least 1")]
    BadWordLength,
    #[error("tolerance must be nonnegative, got {0}")]
    NegativeEpsilon(String),
    #[error("grid side must be at least 2, got {0}")]
    GridTooSmall(usize),
    #[error("janitor must start on a grid cell other than the robot's start, got ({0}, {1})")]
    BadJanitorStart(usize, usize),
    #[error("move success probability must be in (0, 1], got {0}")]
    BadMoveProbability(String),
    #[error("initial counter values must differ")]
    EqualCounters,
    #[error("graph has no vertices")]
    EmptyGraph,
    #[error("unknown start vertex {0:?}")]
    UnknownVertex(String),
    #[error("graph line {line}: expected an edge 'U V' or a lone vertex name, got {text:?}")]
    MalformedGraphLine { line: usize, text: String },
}
