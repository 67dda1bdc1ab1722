//! Reduction of a relational query to per-combination reward problems.
//!
//! A combination is one (initial state, scheduler variable) pair occurring in
//! the query; its terms are mutually dependent (same scheduler, same runs),
//! while distinct combinations can be optimized independently because their
//! runs either use different scheduler variables or start in different states
//! and so never share a history.
//!
//! For each combination the model is unfolded with a memory of which target
//! sets the run has already touched. Collecting coefficient `q_T` as reward
//! on first touch of `T` turns the weighted sum of reachability probabilities
//! into an expected total reward, which memoryless deterministic schedulers
//! on the unfolding optimize.

use crate::model::{Action, Mdp};
use crate::property::NormalizedQuery;
use crate::rational::Rat;
use num::Zero;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use thiserror::Error;

/// Unfolding memory is a bitmask over the combination's target sets.
pub const MAX_TARGETS: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PipelineError {
    #[error("combination over state {state} has {count} distinct target sets, the unfolding supports at most {MAX_TARGETS}")]
    TooManyTargets { state: usize, count: usize },
}

/// All terms sharing one scheduler variable and one initial state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Combination {
    /// Scheduler variable index in the query.
    pub sched: usize,
    pub sched_name: String,
    /// Initial state in the base model.
    pub state: usize,
    /// Indices of the query terms this combination covers.
    pub term_indices: Vec<usize>,
    /// Distinct target sets with aggregated coefficients, in first-occurrence
    /// order. Terms naming the same set of states are merged.
    pub targets: Vec<(BTreeSet<usize>, Rat)>,
}

/// Splits the query's terms into combinations, in order of first occurrence.
pub fn combinations(query: &NormalizedQuery) -> Vec<Combination> {
    let mut order: Vec<(usize, usize)> = Vec::new();
    let mut by_key: BTreeMap<(usize, usize), Combination> = BTreeMap::new();
    for (i, term) in query.terms.iter().enumerate() {
        let key = (term.sched, term.state);
        let comb = by_key.entry(key).or_insert_with(|| {
            order.push(key);
            Combination {
                sched: term.sched,
                sched_name: query.sched_vars[term.sched].clone(),
                state: term.state,
                term_indices: Vec::new(),
                targets: Vec::new(),
            }
        });
        comb.term_indices.push(i);
        match comb.targets.iter_mut().find(|(t, _)| *t == term.target) {
            Some((_, q)) => *q += &term.coeff,
            None => comb.targets.push((term.target.clone(), term.coeff.clone())),
        }
    }
    order
        .into_iter()
        .map(|key| by_key.remove(&key).unwrap())
        .collect()
}

/// MDP over (base state, touched-targets mask) pairs, with the reward that
/// makes expected total reward equal the combination's weighted sum of
/// reachability probabilities.
#[derive(Debug, Clone)]
pub struct Unfolding {
    pub mdp: Mdp,
    /// Reward per unfolding state: coefficients of targets containing the
    /// base state that the run has not touched before.
    pub rewards: Vec<Rat>,
    /// Unfolding state -> (base state, mask). Bit `i` of the mask is the
    /// combination's `i`-th target set.
    pub back: Vec<(usize, u32)>,
    /// Initial unfolding state, always 0 = (combination state, empty mask).
    pub init: usize,
}

/// Builds the reachable part of the unfolding breadth-first from
/// `(comb.state, empty mask)`. The mask grows along every transition by the
/// targets containing the *source* state, so rewards are collected exactly
/// once per target set.
pub fn unfold(base: &Mdp, comb: &Combination) -> Result<Unfolding, PipelineError> {
    if comb.targets.len() > MAX_TARGETS {
        return Err(PipelineError::TooManyTargets {
            state: comb.state,
            count: comb.targets.len(),
        });
    }
    // Per base state: which target bits it touches, and its uncollected reward.
    let mut touch = vec![0u32; base.num_states()];
    for (bit, (target, _)) in comb.targets.iter().enumerate() {
        for &s in target {
            touch[s] |= 1 << bit;
        }
    }
    let reward_of = |state: usize, mask: u32| -> Rat {
        let mut r = Rat::zero();
        for (bit, (_, q)) in comb.targets.iter().enumerate() {
            if touch[state] & (1 << bit) != 0 && mask & (1 << bit) == 0 {
                r += q;
            }
        }
        r
    };

    let mut index: HashMap<(usize, u32), usize> = HashMap::new();
    let mut back: Vec<(usize, u32)> = Vec::new();
    let mut intern = |key: (usize, u32), back: &mut Vec<(usize, u32)>| -> usize {
        *index.entry(key).or_insert_with(|| {
            back.push(key);
            back.len() - 1
        })
    };
    let root = intern((comb.state, 0), &mut back);
    debug_assert_eq!(root, 0);
    let mut actions: Vec<Vec<Action>> = Vec::new();
    let mut at = 0;
    while at < back.len() {
        let (s, mask) = back[at];
        let grown = mask | touch[s];
        let acts = base.actions[s]
            .iter()
            .map(|act| Action {
                name: act.name.clone(),
                transitions: act
                    .transitions
                    .iter()
                    .map(|(succ, p)| (intern((*succ, grown), &mut back), p.clone()))
                    .collect(),
            })
            .collect();
        actions.push(acts);
        at += 1;
    }
    let rewards = back.iter().map(|&(s, mask)| reward_of(s, mask)).collect();
    let labels = BTreeMap::from([("init".to_string(), BTreeSet::from([0]))]);
    Ok(Unfolding {
        mdp: Mdp { actions, labels },
        rewards,
        back,
        init: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::figures::weighted_split;
    use crate::property::parse_query;
    use crate::rational::rat;

    #[test]
    fn running_example_splits_into_two_combinations() {
        let inst = weighted_split();
        let q = parse_query(&inst.property, &inst.mdp).unwrap().normalize();
        let combs = combinations(&q);
        assert_eq!(combs.len(), 2);
        // First: (s, s1) with targets T1 (coeff 1) and T2 (coeff -1/2).
        assert_eq!(combs[0].state, 0);
        assert_eq!(combs[0].term_indices, vec![0, 1]);
        assert_eq!(combs[0].targets.len(), 2);
        assert_eq!(combs[0].targets[0].1, rat(1, 1));
        assert_eq!(combs[0].targets[1].1, rat(-1, 2));
        // Second: (s, s2) with target T2 (coeff -1/2).
        assert_eq!(combs[1].state, 1);
        assert_eq!(combs[1].term_indices, vec![2]);
        assert_eq!(combs[1].targets, vec![(BTreeSet::from([3]), rat(-1, 2))]);
    }

    #[test]
    fn duplicate_target_sets_merge_with_summed_coefficients() {
        let inst = weighted_split();
        // T2 twice under the same scheduler and state: coefficients add up.
        let q = parse_query(
            "exists s . 1/4*P(s, s1, F T2) + 1/2*P(s, s1, F T2) > 0",
            &inst.mdp,
        )
        .unwrap()
        .normalize();
        let combs = combinations(&q);
        assert_eq!(combs.len(), 1);
        assert_eq!(combs[0].targets.len(), 1);
        assert_eq!(combs[0].targets[0].1, rat(3, 4));
    }

    #[test]
    fn running_example_unfolding_has_ten_states() {
        let inst = weighted_split();
        let q = parse_query(&inst.property, &inst.mdp).unwrap().normalize();
        let combs = combinations(&q);
        let un = unfold(&inst.mdp, &combs[0]).unwrap();
        assert_eq!(un.mdp.num_states(), 10);
        assert_eq!(un.back[0], (0, 0));
        // Rewards sit exactly at first touches: +1 at (t1, {}),
        // -1/2 at (t2, {}) and -1/2 at (t2, {T1}).
        let t1 = 2usize;
        let t2 = 3usize;
        for (i, &(s, mask)) in un.back.iter().enumerate() {
            let expected = if s == t1 && mask & 1 == 0 {
                rat(1, 1)
            } else if s == t2 && mask & 2 == 0 {
                rat(-1, 2)
            } else {
                rat(0, 1)
            };
            assert_eq!(un.rewards[i], expected, "reward at ({s}, {mask:b})");
        }
        let reward_spots: Vec<(usize, u32)> = un
            .back
            .iter()
            .enumerate()
            .filter(|(i, _)| !un.rewards[*i].is_zero())
            .map(|(_, &k)| k)
            .collect();
        assert_eq!(reward_spots, vec![(t1, 0), (t2, 0), (t2, 1)]);
    }

    #[test]
    fn masks_grow_along_transitions() {
        let inst = weighted_split();
        let q = parse_query(&inst.property, &inst.mdp).unwrap().normalize();
        for comb in combinations(&q) {
            let un = unfold(&inst.mdp, &comb).unwrap();
            for (i, acts) in un.mdp.actions.iter().enumerate() {
                let (_, mask) = un.back[i];
                for act in acts {
                    for &(succ, _) in &act.transitions {
                        let (_, succ_mask) = un.back[succ];
                        assert_eq!(
                            succ_mask & mask,
                            mask,
                            "mask shrank on {} -> {}",
                            i,
                            succ
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn projection_recovers_base_transitions() {
        let inst = weighted_split();
        let q = parse_query(&inst.property, &inst.mdp).unwrap().normalize();
        let combs = combinations(&q);
        let un = unfold(&inst.mdp, &combs[0]).unwrap();
        for (i, acts) in un.mdp.actions.iter().enumerate() {
            let (s, _) = un.back[i];
            assert_eq!(acts.len(), inst.mdp.actions[s].len());
            for (act, base_act) in acts.iter().zip(&inst.mdp.actions[s]) {
                assert_eq!(act.name, base_act.name);
                let projected: Vec<(usize, Rat)> = act
                    .transitions
                    .iter()
                    .map(|(succ, p)| (un.back[*succ].0, p.clone()))
                    .collect();
                assert_eq!(projected, base_act.transitions);
            }
        }
    }

    #[test]
    fn initial_state_inside_target_collects_reward_at_once() {
        let inst = weighted_split();
        // Start directly in T1 = {t1}.
        let q = parse_query("exists s . P(s, 2, F T1) >= 1", &inst.mdp)
            .unwrap()
            .normalize();
        let combs = combinations(&q);
        let un = unfold(&inst.mdp, &combs[0]).unwrap();
        assert_eq!(un.rewards[0], rat(1, 1));
    }

    #[test]
    fn too_many_targets_is_rejected() {
        // 21 singleton target sets in one combination.
        let n = MAX_TARGETS + 1;
        let mdp = Mdp {
            actions: (0..n)
                .map(|s| {
                    vec![Action {
                        name: "a".into(),
                        transitions: vec![((s + 1) % n, rat(1, 1))],
                    }]
                })
                .collect(),
            labels: (0..n)
                .map(|s| (format!("t{s}"), BTreeSet::from([s])))
                .collect(),
        };
        let terms: Vec<String> = (0..n).map(|s| format!("P(s, 0, F t{s})")).collect();
        let text = format!("exists s . {} > 0", terms.join(" + "));
        let q = parse_query(&text, &mdp).unwrap().normalize();
        let combs = combinations(&q);
        assert_eq!(
            unfold(&mdp, &combs[0]).unwrap_err(),
            PipelineError::TooManyTargets { state: 0, count: n }
        );
    }
}
