//! Maximal end components and the quotient that removes them.
//!
//! An end component is a set of states plus, per state, a nonempty set of
//! actions whose successors stay inside the set, such that the induced graph
//! is strongly connected. Inside one, a scheduler can stall forever without
//! collecting reward, so optimal expected total reward only depends on when
//! and where the component is left. The quotient collapses each maximal end
//! component to a single state with the component's leave actions plus a
//! `stay` action into an absorbing bottom state; in the quotient, every
//! scheduler eventually reaches the bottom state.

use crate::model::{Action, Mdp, MdScheduler};
use crate::rational::{rat_one, Rat};
use num::Zero;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// One maximal end component: its states and, per state, the retained
/// actions (those whose successors all stay inside).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mec {
    pub states: BTreeSet<usize>,
    pub actions: BTreeMap<usize, Vec<usize>>,
}

/// Strongly connected components of a successor-list graph, iterative
/// Tarjan. Components come back in reverse topological order; callers that
/// need determinism sort afterwards.
fn sccs(num_nodes: usize, succs: &dyn Fn(usize) -> Vec<usize>) -> Vec<Vec<usize>> {
    #[derive(Clone)]
    struct NodeState {
        index: usize,
        lowlink: usize,
        on_stack: bool,
        visited: bool,
    }
    let mut st = vec![
        NodeState {
            index: 0,
            lowlink: 0,
            on_stack: false,
            visited: false,
        };
        num_nodes
    ];
    let mut counter = 0usize;
    let mut stack: Vec<usize> = Vec::new();
    let mut components: Vec<Vec<usize>> = Vec::new();
    // Explicit DFS frames: (node, its successors, next successor position).
    let mut frames: Vec<(usize, Vec<usize>, usize)> = Vec::new();

    for root in 0..num_nodes {
        if st[root].visited {
            continue;
        }
        st[root].visited = true;
        st[root].index = counter;
        st[root].lowlink = counter;
        counter += 1;
        st[root].on_stack = true;
        stack.push(root);
        frames.push((root, succs(root), 0));
        while !frames.is_empty() {
            enum Step {
                Descend(usize, usize),
                Retire(usize),
            }
            let step = {
                let frame = frames.last_mut().expect("loop guard");
                let v = frame.0;
                if frame.2 < frame.1.len() {
                    let w = frame.1[frame.2];
                    frame.2 += 1;
                    Step::Descend(v, w)
                } else {
                    Step::Retire(v)
                }
            };
            match step {
                Step::Descend(v, w) => {
                    if !st[w].visited {
                        st[w].visited = true;
                        st[w].index = counter;
                        st[w].lowlink = counter;
                        counter += 1;
                        st[w].on_stack = true;
                        stack.push(w);
                        frames.push((w, succs(w), 0));
                    } else if st[w].on_stack {
                        st[v].lowlink = st[v].lowlink.min(st[w].index);
                    }
                }
                Step::Retire(v) => {
                    if st[v].lowlink == st[v].index {
                        let mut comp = Vec::new();
                        loop {
                            let w = stack.pop().expect("tarjan stack underflow");
                            st[w].on_stack = false;
                            comp.push(w);
                            if w == v {
                                break;
                            }
                        }
                        components.push(comp);
                    }
                    frames.pop();
                    if let Some(parent) = frames.last_mut() {
                        let low = st[v].lowlink;
                        st[parent.0].lowlink = st[parent.0].lowlink.min(low);
                    }
                }
            }
        }
    }
    components
}

/// Maximal end components, sorted by smallest member state.
///
/// Iterative refinement: start from the SCCs of the full graph; within a
/// candidate set, drop actions that can escape it, then states left with no
/// action, then re-split into SCCs of what remains, until each candidate is
/// strongly connected under its retained actions.
pub fn mec_decompose(mdp: &Mdp) -> Vec<Mec> {
    let n = mdp.num_states();
    let all_succs = |s: usize| -> Vec<usize> {
        mdp.actions[s]
            .iter()
            .flat_map(|a| a.transitions.iter().map(|&(succ, _)| succ))
            .collect()
    };
    let mut work: Vec<Vec<usize>> = sccs(n, &all_succs);
    let mut result: Vec<Mec> = Vec::new();

    while let Some(candidate) = work.pop() {
        let mut inside: BTreeSet<usize> = candidate.into_iter().collect();
        // Remove states until every remaining one has a fully-inside action.
        loop {
            let bad: Vec<usize> = inside
                .iter()
                .copied()
                .filter(|&s| {
                    !mdp.actions[s].iter().any(|a| {
                        a.transitions.iter().all(|&(succ, _)| inside.contains(&succ))
                    })
                })
                .collect();
            if bad.is_empty() {
                break;
            }
            for s in bad {
                inside.remove(&s);
            }
        }
        if inside.is_empty() {
            continue;
        }
        let members: Vec<usize> = inside.iter().copied().collect();
        let local_of: BTreeMap<usize, usize> =
            members.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let retained: BTreeMap<usize, Vec<usize>> = members
            .iter()
            .map(|&s| {
                let acts: Vec<usize> = mdp.actions[s]
                    .iter()
                    .enumerate()
                    .filter(|(_, a)| {
                        a.transitions.iter().all(|&(succ, _)| inside.contains(&succ))
                    })
                    .map(|(i, _)| i)
                    .collect();
                (s, acts)
            })
            .collect();
        let local_succs = |i: usize| -> Vec<usize> {
            let s = members[i];
            retained[&s]
                .iter()
                .flat_map(|&a| {
                    mdp.actions[s][a]
                        .transitions
                        .iter()
                        .map(|&(succ, _)| local_of[&succ])
                })
                .collect()
        };
        let parts = sccs(members.len(), &local_succs);
        if parts.len() == 1 {
            result.push(Mec {
                states: inside,
                actions: retained,
            });
        } else {
            for part in parts {
                work.push(part.into_iter().map(|i| members[i]).collect());
            }
        }
    }
    result.sort_by_key(|m| *m.states.iter().next().expect("mec is nonempty"));
    result
}

/// Where a quotient action comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    /// Verbatim action of a state outside every MEC.
    Copied { state: usize, action: usize },
    /// Action of a MEC member that can exit the component.
    Leave { state: usize, action: usize },
    /// The added jump to the bottom state (or its self-loop).
    Stay,
}

#[derive(Debug, Clone)]
pub struct Quotient {
    pub mdp: Mdp,
    pub rewards: Vec<Rat>,
    /// Absorbing zero-reward state every scheduler ends up in.
    pub s_bot: usize,
    /// Original state -> quotient state.
    pub state_map: Vec<usize>,
    /// Quotient state and action -> origin in the source model.
    pub provenance: Vec<Vec<Provenance>>,
    pub mecs: Vec<Mec>,
    /// Original state -> index into `mecs`, if inside one.
    pub mec_of: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QuotientError {
    #[error("state {state} carries reward {reward} but lies in an end component; its reward could be collected forever")]
    RewardInsideMec { state: usize, reward: String },
    #[error("quotient still contains an end component besides the bottom state")]
    NotAttracting,
}

/// Collapses each MEC to one state, keeps everything else, adds `stay`
/// actions into the absorbing bottom state. Quotient state order: non-MEC
/// states ascending, then MECs (by smallest member), then bottom.
pub fn build_quotient(mdp: &Mdp, rewards: &[Rat], mecs: &[Mec]) -> Result<Quotient, QuotientError> {
    let n = mdp.num_states();
    assert_eq!(rewards.len(), n, "one reward per state");
    let mut mec_of: Vec<Option<usize>> = vec![None; n];
    for (i, mec) in mecs.iter().enumerate() {
        for &s in &mec.states {
            mec_of[s] = Some(i);
            if !rewards[s].is_zero() {
                return Err(QuotientError::RewardInsideMec {
                    state: s,
                    reward: crate::rational::fmt_rat(&rewards[s]),
                });
            }
        }
    }
    let mut state_map = vec![usize::MAX; n];
    let mut next = 0usize;
    for s in 0..n {
        if mec_of[s].is_none() {
            state_map[s] = next;
            next += 1;
        }
    }
    let first_mec_state = next;
    for mec in mecs {
        for &s in &mec.states {
            state_map[s] = next;
        }
        next += 1;
    }
    let s_bot = next;
    let num_q = next + 1;

    // Merge successor probabilities that fall into the same quotient state.
    let map_transitions = |transitions: &[(usize, Rat)]| -> Vec<(usize, Rat)> {
        let mut merged: BTreeMap<usize, Rat> = BTreeMap::new();
        for (succ, p) in transitions {
            *merged.entry(state_map[*succ]).or_insert_with(Rat::zero) += p;
        }
        merged.into_iter().collect()
    };

    let mut actions: Vec<Vec<Action>> = Vec::with_capacity(num_q);
    let mut provenance: Vec<Vec<Provenance>> = Vec::with_capacity(num_q);
    let mut q_rewards: Vec<Rat> = Vec::with_capacity(num_q);
    for s in 0..n {
        if mec_of[s].is_some() {
            continue;
        }
        let acts = mdp.actions[s]
            .iter()
            .map(|a| Action {
                name: a.name.clone(),
                transitions: map_transitions(&a.transitions),
            })
            .collect();
        let prov = (0..mdp.actions[s].len())
            .map(|action| Provenance::Copied { state: s, action })
            .collect();
        actions.push(acts);
        provenance.push(prov);
        q_rewards.push(rewards[s].clone());
    }
    debug_assert_eq!(actions.len(), first_mec_state);
    for mec in mecs {
        let mut acts = Vec::new();
        let mut prov = Vec::new();
        for &s in &mec.states {
            for (i, a) in mdp.actions[s].iter().enumerate() {
                if mec.actions[&s].contains(&i) {
                    continue; // stays inside, not a way out
                }
                acts.push(Action {
                    name: format!("{}@s{}", a.name, s),
                    transitions: map_transitions(&a.transitions),
                });
                prov.push(Provenance::Leave { state: s, action: i });
            }
        }
        acts.push(Action {
            name: "stay".into(),
            transitions: vec![(s_bot, rat_one())],
        });
        prov.push(Provenance::Stay);
        actions.push(acts);
        provenance.push(prov);
        q_rewards.push(Rat::zero());
    }
    actions.push(vec![Action {
        name: "stay".into(),
        transitions: vec![(s_bot, rat_one())],
    }]);
    provenance.push(vec![Provenance::Stay]);
    q_rewards.push(Rat::zero());

    let quotient_mdp = Mdp {
        actions,
        labels: BTreeMap::new(),
    };
    // The whole point of the construction: the only end component left is
    // the bottom state, so total reward is finite under every scheduler.
    let check = mec_decompose(&quotient_mdp);
    if check.len() != 1 || check[0].states != BTreeSet::from([s_bot]) {
        return Err(QuotientError::NotAttracting);
    }

    Ok(Quotient {
        mdp: quotient_mdp,
        rewards: q_rewards,
        s_bot,
        state_map,
        provenance,
        mecs: mecs.to_vec(),
        mec_of,
    })
}

/// Translates a quotient scheduler back to the original model.
///
/// Outside MECs the chosen action is copied. For a MEC whose quotient choice
/// is a leave action, every member is pointed toward the exit state along
/// retained actions (layered backward reachability, so the exit is hit with
/// probability one). For `stay`, members take their first retained action,
/// which keeps the run inside the component forever.
pub fn lift_scheduler(quotient: &Quotient, base: &Mdp, choice: &MdScheduler) -> MdScheduler {
    let n = base.num_states();
    let mut lifted = vec![usize::MAX; n];
    for s in 0..n {
        if quotient.mec_of[s].is_some() {
            continue;
        }
        let q = quotient.state_map[s];
        match quotient.provenance[q][choice.choice[q]] {
            Provenance::Copied { state, action } => {
                debug_assert_eq!(state, s);
                lifted[s] = action;
            }
            _ => unreachable!("non-MEC quotient state has only copied actions"),
        }
    }
    for (m, mec) in quotient.mecs.iter().enumerate() {
        let q = quotient.state_map[*mec.states.iter().next().expect("mec is nonempty")];
        match quotient.provenance[q][choice.choice[q]] {
            Provenance::Stay => {
                for &s in &mec.states {
                    lifted[s] = mec.actions[&s][0];
                }
            }
            Provenance::Leave { state: exit, action } => {
                lifted[exit] = action;
                let mut settled = BTreeSet::from([exit]);
                // Layer the component backwards from the exit along retained
                // actions; each pass settles at least one state because the
                // retained graph is strongly connected.
                while settled.len() < mec.states.len() {
                    let mut progressed = false;
                    for &s in &mec.states {
                        if settled.contains(&s) {
                            continue;
                        }
                        let reaching = mec.actions[&s].iter().copied().find(|&a| {
                            base.actions[s][a]
                                .transitions
                                .iter()
                                .any(|(succ, _)| settled.contains(succ))
                        });
                        if let Some(a) = reaching {
                            lifted[s] = a;
                            settled.insert(s);
                            progressed = true;
                        }
                    }
                    assert!(progressed, "end component is strongly connected");
                }
            }
            Provenance::Copied { .. } => {
                unreachable!("MEC quotient state has only leave and stay actions (mec {m})")
            }
        }
    }
    MdScheduler { choice: lifted }
}
