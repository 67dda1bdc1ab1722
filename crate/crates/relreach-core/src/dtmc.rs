//! Exact analysis of finite Markov chains: reachability probabilities and
//! expected total reward.
//!
//! Both routines first restrict to the states where the answer can be nonzero
//! (backward reachability), which also makes the remaining linear system
//! nonsingular whenever the quantity is well-defined.

use crate::linear::solve_sparse;
use crate::model::Dtmc;
use crate::rational::{rat_one, Rat};
use num::Zero;
use std::collections::{BTreeSet, VecDeque};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DtmcError {
    #[error("expected total reward diverges: a recurrent state can accumulate nonzero reward")]
    DivergentReward,
    #[error("target state {0} out of range")]
    TargetOutOfRange(usize),
}

/// States with a positive-probability path INTO `seeds` (including them).
fn backward_reachable(dtmc: &Dtmc, seeds: &BTreeSet<usize>) -> Vec<bool> {
    let n = dtmc.rows.len();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (s, row) in dtmc.rows.iter().enumerate() {
        for &(succ, _) in row {
            preds[succ].push(s);
        }
    }
    let mut seen = vec![false; n];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for &s in seeds {
        if !seen[s] {
            seen[s] = true;
            queue.push_back(s);
        }
    }
    while let Some(s) = queue.pop_front() {
        for &p in &preds[s] {
            if !seen[p] {
                seen[p] = true;
                queue.push_back(p);
            }
        }
    }
    seen
}

/// Probability of eventually reaching `targets`, per state.
///
/// States that cannot reach the target get probability 0 up front; on the
/// rest, the hitting-probability system has a unique solution because the
/// restricted transition matrix is strictly substochastic.
pub fn reach_probability(dtmc: &Dtmc, targets: &BTreeSet<usize>) -> Result<Vec<Rat>, DtmcError> {
    let n = dtmc.rows.len();
    if let Some(&bad) = targets.iter().find(|&&t| t >= n) {
        return Err(DtmcError::TargetOutOfRange(bad));
    }
    let can_reach = backward_reachable(dtmc, targets);
    let unknowns: Vec<usize> = (0..n)
        .filter(|s| can_reach[*s] && !targets.contains(s))
        .collect();
    let index_of: std::collections::HashMap<usize, usize> = unknowns
        .iter()
        .enumerate()
        .map(|(i, &s)| (s, i))
        .collect();
    let mut rows = Vec::with_capacity(unknowns.len());
    let mut rhs = Vec::with_capacity(unknowns.len());
    for &s in &unknowns {
        // x_s - sum_{t unknown} P(s,t) x_t = sum_{t target} P(s,t)
        let mut row = vec![(index_of[&s], rat_one())];
        let mut c = Rat::zero();
        for (succ, p) in &dtmc.rows[s] {
            if targets.contains(succ) {
                c += p;
            } else if let Some(&j) = index_of.get(succ) {
                row.push((j, -p.clone()));
            }
        }
        rows.push(row);
        rhs.push(c);
    }
    let solved = solve_sparse(unknowns.len(), rows, rhs)
        .expect("restricted hitting system is nonsingular");
    let mut result = vec![Rat::zero(); n];
    for &t in targets {
        result[t] = rat_one();
    }
    for (i, &s) in unknowns.iter().enumerate() {
        result[s] = solved[i].clone();
    }
    Ok(result)
}

/// Expected total accumulated reward, per state.
///
/// Well-defined only when no recurrent state can keep collecting nonzero
/// reward; that situation surfaces as a singular system and is reported as
/// [`DtmcError::DivergentReward`].
pub fn expected_total_reward(dtmc: &Dtmc, rewards: &[Rat]) -> Result<Vec<Rat>, DtmcError> {
    let n = dtmc.rows.len();
    assert_eq!(rewards.len(), n, "one reward per state");
    let seeds: BTreeSet<usize> = (0..n).filter(|&s| !rewards[s].is_zero()).collect();
    let relevant = backward_reachable(dtmc, &seeds);
    let unknowns: Vec<usize> = (0..n).filter(|&s| relevant[s]).collect();
    let index_of: std::collections::HashMap<usize, usize> = unknowns
        .iter()
        .enumerate()
        .map(|(i, &s)| (s, i))
        .collect();
    let mut rows = Vec::with_capacity(unknowns.len());
    let mut rhs = Vec::with_capacity(unknowns.len());
    for &s in &unknowns {
        // x_s - sum_{t relevant} P(s,t) x_t = rew_s
        let mut row = vec![(index_of[&s], rat_one())];
        for (succ, p) in &dtmc.rows[s] {
            if let Some(&j) = index_of.get(succ) {
                if j == index_of[&s] {
                    // Self-loop folds into the diagonal.
                    row[0].1 -= p;
                } else {
                    row.push((j, -p.clone()));
                }
            }
        }
        rows.push(row);
        rhs.push(rewards[s].clone());
    }
    let solved =
        solve_sparse(unknowns.len(), rows, rhs).map_err(|_| DtmcError::DivergentReward)?;
    let mut result = vec![Rat::zero(); n];
    for (i, &s) in unknowns.iter().enumerate() {
        result[s] = solved[i].clone();
    }
    Ok(result)
}
