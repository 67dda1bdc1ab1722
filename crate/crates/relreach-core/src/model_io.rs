//! JSON encoding of models.
//!
//! ```json
//! {
//!   "num_states": 2,
//!   "states": [
//!     { "actions": [ { "name": "a", "transitions": [[1, "1/2"], [0, "0.5"]] } ] },
//!     { "actions": [ { "name": "loop", "transitions": [[1, "1"]] } ] }
//!   ],
//!   "labels": { "goal": [1], "init": [0] }
//! }
//! ```
//!
//! Probabilities are strings (`"p/q"` or decimal), parsed exactly. Encoding is
//! deterministic: states in order, labels sorted by name, label members sorted.

use crate::model::{Action, Mdp, ModelError};
use crate::rational::{fmt_rat, parse_rat, RatParseError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("model JSON is not valid: {0}")]
    Json(#[from] serde_json::Error),
    #[error("num_states is {declared} but {actual} states are listed")]
    NumStatesMismatch { declared: usize, actual: usize },
    #[error("state {state} action {action:?}: {source}")]
    BadProbability {
        state: usize,
        action: String,
        source: RatParseError,
    },
    #[error(transparent)]
    Invalid(#[from] ModelError),
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    num_states: usize,
    states: Vec<StateFile>,
    labels: BTreeMap<String, Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct StateFile {
    actions: Vec<ActionFile>,
}

#[derive(Serialize, Deserialize)]
struct ActionFile {
    name: String,
    transitions: Vec<(usize, String)>,
}

impl Mdp {
    /// Parses and validates a model. Any defect is an error here; a model
    /// obtained from this function is safe to hand to the solvers.
    pub fn from_json(text: &str) -> Result<Mdp, ModelIoError> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.num_states != file.states.len() {
            return Err(ModelIoError::NumStatesMismatch {
                declared: file.num_states,
                actual: file.states.len(),
            });
        }
        let mut actions = Vec::with_capacity(file.states.len());
        for (s, state) in file.states.into_iter().enumerate() {
            let mut acts = Vec::with_capacity(state.actions.len());
            for action in state.actions {
                let mut transitions = Vec::with_capacity(action.transitions.len());
                for (succ, prob) in action.transitions {
                    let p = parse_rat(&prob).map_err(|source| ModelIoError::BadProbability {
                        state: s,
                        action: action.name.clone(),
                        source,
                    })?;
                    transitions.push((succ, p));
                }
                acts.push(Action {
                    name: action.name,
                    transitions,
                });
            }
            actions.push(acts);
        }
        let labels = file
            .labels
            .into_iter()
            .map(|(name, states)| (name, states.into_iter().collect()))
            .collect();
        let mdp = Mdp { actions, labels };
        mdp.validate()?;
        Ok(mdp)
    }

    /// Deterministic pretty-printed encoding; `from_json` inverts it.
    pub fn to_json(&self) -> String {
        let file = ModelFile {
            num_states: self.num_states(),
            states: self
                .actions
                .iter()
                .map(|acts| StateFile {
                    actions: acts
                        .iter()
                        .map(|act| ActionFile {
                            name: act.name.clone(),
                            transitions: act
                                .transitions
                                .iter()
                                .map(|(succ, p)| (*succ, fmt_rat(p)))
                                .collect(),
                        })
                        .collect(),
                })
                .collect(),
            labels: self
                .labels
                .iter()
                .map(|(name, states)| (name.clone(), states.iter().copied().collect()))
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("model serialization cannot fail")
    }
}
