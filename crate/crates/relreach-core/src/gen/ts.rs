//! Two-thread interleaving where the final value of a shared low variable
//! can leak a secret counter.
//!
//! Thread `th` decrements a counter h and then writes l := 2; thread `thp`
//! writes l := 1. A scheduler picks which thread steps next. The model is
//! the full product over (h, l, th done, thp done) with two initial states,
//! one per initial counter value; the property asks whether some scheduler
//! makes the probability of ending with l = 1 differ between them.

use super::{Engine, Expected, GenError, GeneratedInstance};
use crate::model::{Action, Mdp};
use crate::rational::Rat;
use crate::verdict::Verdict;
use num::One;
use std::collections::{BTreeMap, BTreeSet};

/// Builds the interleaving product for initial counters `h1` and `h2`.
pub fn gen_thread_scheduling(h1: usize, h2: usize) -> Result<GeneratedInstance, GenError> {
    if h1 == h2 {
        return Err(GenError::EqualCounters);
    }
    let hmax = h1.max(h2);
    // (h, l, d1, d2) with l in {0,1,2} and d1/d2 marking finished threads.
    let idx = |h: usize, l: usize, d1: usize, d2: usize| ((h * 3 + l) * 2 + d1) * 2 + d2;
    let total = (hmax + 1) * 12;

    let mut actions = vec![Vec::new(); total];
    for h in 0..=hmax {
        for l in 0..3 {
            for d1 in 0..2 {
                for d2 in 0..2 {
                    let s = idx(h, l, d1, d2);
                    let mut acts = Vec::new();
                    if d1 == 0 {
                        let succ = if h > 0 {
                            idx(h - 1, l, 0, d2)
                        } else {
                            idx(h, 2, 1, d2)
                        };
                        acts.push(Action {
                            name: "th".into(),
                            transitions: vec![(succ, Rat::one())],
                        });
                    }
                    if d2 == 0 {
                        acts.push(Action {
                            name: "thp".into(),
                            transitions: vec![(idx(h, 1, d1, 1), Rat::one())],
                        });
                    }
                    if acts.is_empty() {
                        acts.push(Action {
                            name: "done".into(),
                            transitions: vec![(s, Rat::one())],
                        });
                    }
                    actions[s] = acts;
                }
            }
        }
    }

    let mut labels: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    labels.insert("init_h1".into(), BTreeSet::from([idx(h1, 0, 0, 0)]));
    labels.insert("init_h2".into(), BTreeSet::from([idx(h2, 0, 0, 0)]));
    labels.insert("l1".into(), (0..=hmax).map(|h| idx(h, 1, 1, 1)).collect());
    labels.insert("l2".into(), (0..=hmax).map(|h| idx(h, 2, 1, 1)).collect());

    let source = "running the second thread first exactly when the counter is at its \
                  larger start value ends the runs with different final values"
        .to_string();
    let expected = [Engine::Pipeline, Engine::MdOracle]
        .into_iter()
        .map(|engine| Expected {
            engine,
            verdict: Verdict::Violated,
            source: source.clone(),
        })
        .collect();

    Ok(GeneratedInstance {
        name: format!("thread_scheduling_{h1}_{h2}"),
        mdp: Mdp { actions, labels },
        property: "forall s . P(s, init_h1, F l1) - P(s, init_h2, F l1) ~ 0 eps 0".into(),
        expected,
        notes: format!(
            "Interleaving of a counting thread (h := {h1} or {h2}, then l := 2) with a \
             one-step thread (l := 1); the scheduler's interleaving decides the final l."
        ),
    })
}
