//! Decide relational reachability properties of Markov decision processes.
//!
//! A property compares a weighted sum of reachability probabilities, each
//! under its own scheduler variable and initial state, against a threshold —
//! existentially or universally over schedulers. Checking proceeds in four
//! stages: split the query into (scheduler variable, initial state)
//! combinations, unfold each against its target sets so collecting a target
//! pays its coefficient as a one-off reward, quotient away maximal end
//! components, and optimize expected total reward exactly (policy iteration
//! over rationals) or with certified interval bounds. Verdicts are `Holds`,
//! `Violated`, or — only in approximate mode — `Inconclusive`, and exact runs
//! can synthesize a replayable scheduler witness.

pub mod check;
pub mod dtmc;
pub mod gen;
pub mod linear;
pub mod mec;
pub mod model;
pub mod model_io;
pub mod oracle;
pub mod pipeline;
pub mod property;
pub mod rational;
pub mod solver;
pub mod verdict;

pub use check::{dump_unfoldings, report_json, run_check, CheckConfig, RunReport};
pub use model::{Mdp, MdScheduler};
pub use property::{parse_query, NormalizedQuery, Query};
pub use rational::{fmt_rat, parse_rat, Rat};
pub use solver::{Bounds, Mode};
pub use verdict::{Verdict, Witness};
