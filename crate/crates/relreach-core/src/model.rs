//! MDP and DTMC representations.
//!
//! States are dense indices `0..num_states`. Actions are per-state lists in
//! file order; an action holds a sparse probability row. Labels map names to
//! state sets. Everything is exact rationals.

use crate::rational::{fmt_rat, rat_one, Rat};
use num::{Signed, Zero};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Action {
    pub name: String,
    /// Sparse row: (successor, probability), no duplicate successors.
    pub transitions: Vec<(usize, Rat)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mdp {
    /// Enabled actions per state, in file order. Every state has at least one.
    pub actions: Vec<Vec<Action>>,
    pub labels: BTreeMap<String, BTreeSet<usize>>,
}

/// Memoryless deterministic scheduler: one enabled-action index per state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MdScheduler {
    pub choice: Vec<usize>,
}

/// Markov chain as sparse rows; same well-formedness rules as MDP rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dtmc {
    pub rows: Vec<Vec<(usize, Rat)>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelDefect {
    #[error("state {state} has no enabled action")]
    NoEnabledAction { state: usize },
    #[error("state {state} action {action:?}: row sum {sum} != 1")]
    RowSum {
        state: usize,
        action: String,
        sum: String,
    },
    #[error("state {state} action {action:?}: probability {prob} for successor {succ} is outside (0, 1]")]
    ProbOutOfRange {
        state: usize,
        action: String,
        succ: usize,
        prob: String,
    },
    #[error("state {state} action {action:?}: duplicate successor {succ}")]
    DuplicateSuccessor {
        state: usize,
        action: String,
        succ: usize,
    },
    #[error("state {state} action {action:?}: successor {succ} out of range (num_states = {num_states})")]
    SuccessorOutOfRange {
        state: usize,
        action: String,
        succ: usize,
        num_states: usize,
    },
    #[error("label {label:?}: state {state} out of range (num_states = {num_states})")]
    LabelOutOfRange {
        label: String,
        state: usize,
        num_states: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("model is not well-formed:{}", .defects.iter().map(|d| format!("\n  {d}")).collect::<String>())]
pub struct ModelError {
    pub defects: Vec<ModelDefect>,
}

impl Mdp {
    pub fn num_states(&self) -> usize {
        self.actions.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.actions
            .iter()
            .flatten()
            .map(|a| a.transitions.len())
            .sum()
    }

    pub fn states_with_label(&self, label: &str) -> Option<&BTreeSet<usize>> {
        self.labels.get(label)
    }

    /// Checks every well-formedness rule and reports all defects at once:
    /// rows sum to one, probabilities lie in (0, 1], no duplicate successors,
    /// indices in range, every state has an enabled action.
    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.num_states();
        let mut defects = Vec::new();
        for (s, acts) in self.actions.iter().enumerate() {
            if acts.is_empty() {
                defects.push(ModelDefect::NoEnabledAction { state: s });
            }
            for act in acts {
                let mut sum = Rat::zero();
                let mut seen = BTreeSet::new();
                for (succ, prob) in &act.transitions {
                    if *succ >= n {
                        defects.push(ModelDefect::SuccessorOutOfRange {
                            state: s,
                            action: act.name.clone(),
                            succ: *succ,
                            num_states: n,
                        });
                    }
                    if !seen.insert(*succ) {
                        defects.push(ModelDefect::DuplicateSuccessor {
                            state: s,
                            action: act.name.clone(),
                            succ: *succ,
                        });
                    }
                    if !prob.is_positive() || *prob > rat_one() {
                        defects.push(ModelDefect::ProbOutOfRange {
                            state: s,
                            action: act.name.clone(),
                            succ: *succ,
                            prob: fmt_rat(prob),
                        });
                    }
                    sum += prob;
                }
                if sum != rat_one() {
                    defects.push(ModelDefect::RowSum {
                        state: s,
                        action: act.name.clone(),
                        sum: fmt_rat(&sum),
                    });
                }
            }
        }
        for (label, states) in &self.labels {
            for &s in states {
                if s >= n {
                    defects.push(ModelDefect::LabelOutOfRange {
                        label: label.clone(),
                        state: s,
                        num_states: n,
                    });
                }
            }
        }
        if defects.is_empty() {
            Ok(())
        } else {
            Err(ModelError { defects })
        }
    }

    /// States reachable from `init` under arbitrary action choice.
    pub fn reachable_from(&self, init: &[usize]) -> Vec<bool> {
        let mut seen = vec![false; self.num_states()];
        let mut queue: VecDeque<usize> = VecDeque::new();
        for &s in init {
            if !seen[s] {
                seen[s] = true;
                queue.push_back(s);
            }
        }
        while let Some(s) = queue.pop_front() {
            for act in &self.actions[s] {
                for &(succ, _) in &act.transitions {
                    if !seen[succ] {
                        seen[succ] = true;
                        queue.push_back(succ);
                    }
                }
            }
        }
        seen
    }

    /// Restricts to the states reachable from `init`, remapping indices and
    /// labels. Returns the sub-MDP and the remapping `old -> Some(new)`.
    /// Applying the restriction twice gives the same model (old indices
    /// permute densely in ascending order, so the second pass is identity).
    pub fn reachable_restriction(&self, init: &[usize]) -> (Mdp, Vec<Option<usize>>) {
        let seen = self.reachable_from(init);
        let mut remap = vec![None; self.num_states()];
        let mut next = 0usize;
        for (s, &keep) in seen.iter().enumerate() {
            if keep {
                remap[s] = Some(next);
                next += 1;
            }
        }
        let actions = self
            .actions
            .iter()
            .enumerate()
            .filter(|(s, _)| seen[*s])
            .map(|(_, acts)| {
                acts.iter()
                    .map(|act| Action {
                        name: act.name.clone(),
                        transitions: act
                            .transitions
                            .iter()
                            .map(|(succ, p)| (remap[*succ].expect("successor of a reachable state is reachable"), p.clone()))
                            .collect(),
                    })
                    .collect()
            })
            .collect();
        let labels = self
            .labels
            .iter()
            .map(|(name, states)| {
                let mapped = states.iter().filter_map(|&s| remap[s]).collect();
                (name.clone(), mapped)
            })
            .collect();
        (Mdp { actions, labels }, remap)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScheduleError {
    #[error("scheduler assigns state {state} action index {index}, but only {enabled} actions are enabled")]
    ChoiceOutOfRange {
        state: usize,
        index: usize,
        enabled: usize,
    },
    #[error("scheduler covers {got} states, model has {want}")]
    WrongLength { got: usize, want: usize },
}

/// Markov chain induced by a memoryless deterministic scheduler.
pub fn induce_dtmc(mdp: &Mdp, sched: &MdScheduler) -> Result<Dtmc, ScheduleError> {
    if sched.choice.len() != mdp.num_states() {
        return Err(ScheduleError::WrongLength {
            got: sched.choice.len(),
            want: mdp.num_states(),
        });
    }
    let mut rows = Vec::with_capacity(mdp.num_states());
    for (s, &idx) in sched.choice.iter().enumerate() {
        let acts = &mdp.actions[s];
        let act = acts.get(idx).ok_or(ScheduleError::ChoiceOutOfRange {
            state: s,
            index: idx,
            enabled: acts.len(),
        })?;
        rows.push(act.transitions.clone());
    }
    Ok(Dtmc { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn two_state_chain() -> Mdp {
        // 0 --a--> 1 with prob 1; 1 absorbing.
        Mdp {
            actions: vec![
                vec![Action {
                    name: "a".into(),
                    transitions: vec![(1, rat(1, 1))],
                }],
                vec![Action {
                    name: "loop".into(),
                    transitions: vec![(1, rat(1, 1))],
                }],
            ],
            labels: BTreeMap::from([("goal".into(), BTreeSet::from([1]))]),
        }
    }

    #[test]
    fn validates_clean_model() {
        assert!(two_state_chain().validate().is_ok());
    }

    #[test]
    fn reports_row_sum_with_state_and_action() {
        let mut m = two_state_chain();
        m.actions[0][0].transitions = vec![(1, rat(9, 10))];
        let err = m.validate().unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("state 0"), "{msg}");
        assert!(msg.contains("row sum 9/10 != 1"), "{msg}");
    }

    #[test]
    fn reports_all_defects_not_just_first() {
        let m = Mdp {
            actions: vec![
                vec![Action {
                    name: "a".into(),
                    transitions: vec![(0, rat(1, 2)), (0, rat(1, 2))],
                }],
                vec![],
            ],
            labels: BTreeMap::from([("x".into(), BTreeSet::from([9]))]),
        };
        let err = m.validate().unwrap_err();
        assert_eq!(err.defects.len(), 3, "{err}");
        assert!(err
            .defects
            .iter()
            .any(|d| matches!(d, ModelDefect::DuplicateSuccessor { succ: 0, .. })));
        assert!(err
            .defects
            .iter()
            .any(|d| matches!(d, ModelDefect::NoEnabledAction { state: 1 })));
        assert!(err
            .defects
            .iter()
            .any(|d| matches!(d, ModelDefect::LabelOutOfRange { state: 9, .. })));
    }

    #[test]
    fn rejects_zero_and_oversized_probabilities() {
        let m = Mdp {
            actions: vec![vec![Action {
                name: "a".into(),
                transitions: vec![(0, rat(0, 1)), (0, rat(2, 1))],
            }]],
            labels: BTreeMap::new(),
        };
        let err = m.validate().unwrap_err();
        let ranges = err
            .defects
            .iter()
            .filter(|d| matches!(d, ModelDefect::ProbOutOfRange { .. }))
            .count();
        assert_eq!(ranges, 2);
    }

    #[test]
    fn restriction_drops_unreachable_and_is_idempotent() {
        // 0 -> 1, state 2 unreachable from 0.
        let m = Mdp {
            actions: vec![
                vec![Action {
                    name: "a".into(),
                    transitions: vec![(1, rat(1, 1))],
                }],
                vec![Action {
                    name: "b".into(),
                    transitions: vec![(1, rat(1, 1))],
                }],
                vec![Action {
                    name: "c".into(),
                    transitions: vec![(0, rat(1, 1))],
                }],
            ],
            labels: BTreeMap::from([("all".into(), BTreeSet::from([0, 1, 2]))]),
        };
        let (restricted, remap) = m.reachable_restriction(&[0]);
        assert_eq!(restricted.num_states(), 2);
        assert_eq!(remap, vec![Some(0), Some(1), None]);
        assert_eq!(restricted.labels["all"], BTreeSet::from([0, 1]));
        let (again, remap2) = restricted.reachable_restriction(&[0]);
        assert_eq!(again, restricted);
        assert_eq!(remap2, vec![Some(0), Some(1)]);
    }

    #[test]
    fn induce_checks_choice_bounds() {
        let m = two_state_chain();
        let bad = MdScheduler { choice: vec![1, 0] };
        assert!(matches!(
            induce_dtmc(&m, &bad),
            Err(ScheduleError::ChoiceOutOfRange { state: 0, index: 1, enabled: 1 })
        ));
        let good = MdScheduler { choice: vec![0, 0] };
        let dtmc = induce_dtmc(&m, &good).unwrap();
        assert_eq!(dtmc.rows[0], vec![(1, rat(1, 1))]);
    }
}
