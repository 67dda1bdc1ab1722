//! Brute-force decision over memoryless deterministic scheduler tuples.
//!
//! Answers the same query as the main pipeline but with the scheduler class
//! restricted to memoryless deterministic ones on the base model — useful as
//! an independent cross-check on small instances and as the reference
//! semantics for reductions that are stated for that class. The two answers
//! legitimately differ on queries where history or randomization helps.
//!
//! Enumeration order is lexicographic over state-indexed action choices,
//! variables in declaration order, and the reported witness is always the
//! first (least) satisfying tuple, which keeps results independent of
//! parallel execution.

use crate::dtmc::reach_probability;
use crate::model::{induce_dtmc, Mdp, MdScheduler};
use crate::property::{NormComp, NormalizedQuery};
use crate::rational::Rat;
use crate::verdict::Verdict;
use num::{Signed, Zero};
use rayon::prelude::*;
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("{tuples} scheduler tuples to enumerate, budget is {budget}")]
    BudgetExceeded { tuples: String, budget: u64 },
}

#[derive(Debug, Clone)]
pub struct OracleOutcome {
    /// Verdict for the original query (complemented if it was universal).
    pub verdict: Verdict,
    /// For a satisfied existential (or refuted universal): the least
    /// satisfying tuple, one scheduler per variable.
    pub witness: Option<Vec<MdScheduler>>,
    /// Schedulers per variable that were enumerated.
    pub policies_per_var: u64,
}

/// Number of memoryless deterministic schedulers, if it fits.
fn policy_count(mdp: &Mdp) -> Option<u64> {
    let mut k: u64 = 1;
    for acts in &mdp.actions {
        k = k.checked_mul(acts.len() as u64)?;
    }
    Some(k)
}

/// Decodes the `rank`-th scheduler in lexicographic order (state 0 most
/// significant).
fn decode_policy(mdp: &Mdp, rank: u64) -> MdScheduler {
    let n = mdp.num_states();
    let mut choice = vec![0usize; n];
    let mut r = rank;
    for s in (0..n).rev() {
        let k = mdp.actions[s].len() as u64;
        choice[s] = (r % k) as usize;
        r /= k;
    }
    debug_assert_eq!(r, 0);
    MdScheduler { choice }
}

/// Checks whether some tuple of memoryless deterministic schedulers
/// satisfies the normalized comparison; `budget` caps the number of tuples.
pub fn md_check(
    mdp: &Mdp,
    query: &NormalizedQuery,
    budget: u64,
) -> Result<OracleOutcome, OracleError> {
    let n_vars = query.sched_vars.len() as u32;
    let k = policy_count(mdp);
    let tuples = k.and_then(|k| k.checked_pow(n_vars));
    let tuples = match tuples {
        Some(t) if t <= budget => t,
        _ => {
            return Err(OracleError::BudgetExceeded {
                tuples: tuples.map_or("more than 2^64".to_string(), |t| t.to_string()),
                budget,
            })
        }
    };
    let k = k.expect("bounded by budget");

    // Distinct (state, target) needs, and per-term references into them.
    let mut needs: Vec<(usize, BTreeSet<usize>)> = Vec::new();
    let term_need: Vec<usize> = query
        .terms
        .iter()
        .map(|t| {
            let key = (t.state, t.target.clone());
            match needs.iter().position(|n| *n == key) {
                Some(i) => i,
                None => {
                    needs.push(key);
                    needs.len() - 1
                }
            }
        })
        .collect();

    // Evaluate every policy once: probabilities for each distinct need.
    let table: Vec<Vec<Rat>> = (0..k)
        .into_par_iter()
        .map(|rank| {
            let policy = decode_policy(mdp, rank);
            let dtmc = induce_dtmc(mdp, &policy).expect("decoded choices are enabled");
            needs
                .iter()
                .map(|(state, target)| {
                    if target.is_empty() {
                        Rat::zero()
                    } else {
                        reach_probability(&dtmc, target).expect("targets are validated")[*state]
                            .clone()
                    }
                })
                .collect()
        })
        .collect();

    let satisfied = |tuple_rank: u64| -> bool {
        // Digits in base k, first variable most significant.
        let mut digits = vec![0u64; n_vars as usize];
        let mut r = tuple_rank;
        for d in digits.iter_mut().rev() {
            *d = r % k;
            r /= k;
        }
        let mut value = Rat::zero();
        for (i, term) in query.terms.iter().enumerate() {
            let p = &table[digits[term.sched] as usize][term_need[i]];
            if !p.is_zero() {
                value += &term.coeff * p;
            }
        }
        match &query.comp {
            NormComp::Gt => value > query.threshold,
            NormComp::Ge => value >= query.threshold,
            NormComp::Approx(eps) => (&value - &query.threshold).abs() <= *eps,
            NormComp::NotApprox(eps) => (&value - &query.threshold).abs() > *eps,
        }
    };

    let first = (0..tuples).into_par_iter().find_first(|&r| satisfied(r));
    let outcome = match first {
        Some(rank) => {
            let mut digits = vec![0u64; n_vars as usize];
            let mut r = rank;
            for d in digits.iter_mut().rev() {
                *d = r % k;
                r /= k;
            }
            let witness = digits
                .into_iter()
                .map(|d| decode_policy(mdp, d))
                .collect();
            OracleOutcome {
                verdict: if query.negated {
                    Verdict::Violated
                } else {
                    Verdict::Holds
                },
                witness: Some(witness),
                policies_per_var: k,
            }
        }
        None => OracleOutcome {
            verdict: if query.negated {
                Verdict::Holds
            } else {
                Verdict::Violated
            },
            witness: None,
            policies_per_var: k,
        },
    };
    Ok(outcome)
}
