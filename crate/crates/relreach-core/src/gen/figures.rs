//! Four small fixed models that separate scheduler classes.
//!
//! `weighted_split` exercises the whole pipeline on a three-term weighted
//! query; the other three are minimal witnesses that randomization, memory,
//! and history dependence each strictly add power over memoryless
//! deterministic schedulers.

use super::{Engine, Expected, GeneratedInstance};
use crate::model::{Action, Mdp};
use crate::rational::rat;
use crate::verdict::Verdict;
use std::collections::{BTreeMap, BTreeSet};

fn act(name: &str, succs: &[(usize, i64, i64)]) -> Action {
    Action {
        name: name.into(),
        transitions: succs.iter().map(|&(s, n, d)| (s, rat(n, d))).collect(),
    }
}

fn labels(pairs: &[(&str, &[usize])]) -> BTreeMap<String, BTreeSet<usize>> {
    pairs
        .iter()
        .map(|(name, states)| (name.to_string(), states.iter().copied().collect()))
        .collect()
}

fn expect(engine: Engine, verdict: Verdict, source: &str) -> Expected {
    Expected {
        engine,
        verdict,
        source: source.into(),
    }
}

/// Weighted three-term query over one scheduler variable and two initial
/// states. The achievable weighted sums form [-1, 1/4]; mixing the extremal
/// schedulers with weights 1/5 and 4/5 achieves 0 exactly.
pub fn weighted_split() -> GeneratedInstance {
    let mdp = Mdp {
        actions: vec![
            vec![
                act("alpha", &[(0, 1, 3), (2, 1, 3), (3, 1, 3)]),
                act("beta", &[(1, 1, 1)]),
            ],
            vec![act("alpha", &[(3, 1, 1)]), act("beta", &[(1, 1, 1)])],
            vec![act("tau", &[(0, 1, 1)])],
            vec![act("tau", &[(3, 1, 1)])],
        ],
        labels: labels(&[("s1", &[0]), ("s2", &[1]), ("T1", &[2]), ("T2", &[3])]),
    };
    GeneratedInstance {
        name: "weighted_split".into(),
        mdp,
        property: "exists s . P(s, s1, F T1) - 1/2 * P(s, s1, F T2) - 1/2 * P(s, s2, F T2) ~ 0 eps 0".into(),
        expected: vec![expect(
            Engine::Pipeline,
            Verdict::Holds,
            "achievable weighted sums form [-1, 1/4], which contains 0",
        )],
        notes: "Three weighted terms, one scheduler variable, two initial states; the \
                extremal values are -1 and 1/4 and a 1/5-4/5 mix attains 0 exactly."
            .into(),
    }
}

/// One coin-free choice between hitting the target surely and missing it
/// surely. Hitting probability exactly 1/2 needs a randomized scheduler.
pub fn mix_required() -> GeneratedInstance {
    let mdp = Mdp {
        actions: vec![
            vec![act("alpha", &[(1, 1, 1)]), act("beta", &[(2, 1, 1)])],
            vec![act("tau", &[(1, 1, 1)])],
            vec![act("tau", &[(2, 1, 1)])],
        ],
        labels: labels(&[("init", &[0]), ("T", &[1])]),
    };
    GeneratedInstance {
        name: "mix_required".into(),
        mdp,
        property: "exists sig . P(sig, init, F T) ~ 1/2 eps 0".into(),
        expected: vec![
            expect(
                Engine::Pipeline,
                Verdict::Holds,
                "an equal-weight mix of the two pure choices attains 1/2 exactly",
            ),
            expect(
                Engine::MdOracle,
                Verdict::Violated,
                "deterministic choices only attain 0 or 1",
            ),
        ],
        notes: "Single choice between reaching the target surely or never; only a \
                randomized scheduler attains probability exactly 1/2."
            .into(),
    }
}

/// The first target returns control to the start, so a scheduler that plays
/// one action first and the other after returning reaches both targets with
/// probability 1. Without memory the two probabilities are 1 and 0 in some
/// order.
pub fn memory_required() -> GeneratedInstance {
    let mdp = Mdp {
        actions: vec![
            vec![act("alpha", &[(1, 1, 1)]), act("beta", &[(2, 1, 1)])],
            vec![act("gamma", &[(0, 1, 1)])],
            vec![act("tau", &[(2, 1, 1)])],
        ],
        labels: labels(&[("init", &[0]), ("T1", &[1]), ("T2", &[2])]),
    };
    GeneratedInstance {
        name: "memory_required".into(),
        mdp,
        property: "exists sig . P(sig, init, F T1) = P(sig, init, F T2)".into(),
        expected: vec![
            expect(
                Engine::Pipeline,
                Verdict::Holds,
                "playing alpha on the first visit and beta after returning reaches both targets surely",
            ),
            expect(
                Engine::MdOracle,
                Verdict::Violated,
                "a fixed state-based choice reaches exactly one of the two targets",
            ),
        ],
        notes: "Reaching both targets with equal probability requires remembering \
                whether the first target was already visited."
            .into(),
    }
}

/// The second initial state funnels into the first, so memoryless choices
/// give both initial states the same reachability value; distinguishing them
/// requires acting on how the run began.
pub fn history_required() -> GeneratedInstance {
    let mdp = Mdp {
        actions: vec![
            vec![
                act("alpha", &[(2, 1, 1)]),
                act("beta", &[(2, 1, 2), (3, 1, 2)]),
            ],
            vec![act("tau", &[(0, 1, 1)])],
            vec![act("tau", &[(2, 1, 1)])],
            vec![act("tau", &[(3, 1, 1)])],
        ],
        labels: labels(&[("s1", &[0]), ("s2", &[1]), ("T", &[2])]),
    };
    GeneratedInstance {
        name: "history_required".into(),
        mdp,
        property: "exists sig . P(sig, s1, F T) != P(sig, s2, F T)".into(),
        expected: vec![
            expect(
                Engine::Pipeline,
                Verdict::Holds,
                "choosing alpha when started at s1 and beta after arriving from s2 attains 1 versus 1/2",
            ),
            expect(
                Engine::MdOracle,
                Verdict::Violated,
                "runs from s2 enter s1 and thereafter coincide with runs from s1",
            ),
        ],
        notes: "Two initial states, one scheduler variable; only a history-dependent \
                scheduler can give the two starts different reachability values."
            .into(),
    }
}

/// All four fixed instances.
pub fn gen_figures() -> Vec<GeneratedInstance> {
    vec![
        weighted_split(),
        mix_required(),
        memory_required(),
        history_required(),
    ]
}
