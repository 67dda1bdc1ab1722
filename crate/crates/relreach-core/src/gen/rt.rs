//! Robot on a fixed L-shaped route across an n-by-n grid, optionally
//! obstructed by an adversarial janitor.
//!
//! The robot follows the bottom row and then the right column toward the
//! corner; each move succeeds with a given probability and is blocked
//! outright if the janitor stands on the destination cell. Turns alternate:
//! the janitor may stay or step to an adjacent free cell, never onto the
//! robot. The property asks whether the janitor's behavior (the only
//! nondeterminism) can change the probability of reaching the corner.

use super::{Engine, Expected, GenError, GeneratedInstance};
use crate::model::{Action, Mdp};
use crate::rational::{fmt_rat, Rat};
use crate::verdict::Verdict;
use num::{One, Zero};
use std::collections::{BTreeMap, BTreeSet};

const PROPERTY: &str =
    "forall s1, s2 . P(s1, init, F goal) - P(s2, init, F goal) ~ 0 eps 1/100000";

/// Builds the pursuit model on an `n`-by-`n` grid. `janitor_start = None`
/// removes the janitor, leaving a plain chain.
pub fn gen_robot_tag(
    n: usize,
    janitor_start: Option<(usize, usize)>,
    move_success: Rat,
) -> Result<GeneratedInstance, GenError> {
    if n < 2 {
        return Err(GenError::GridTooSmall(n));
    }
    if !(move_success > Rat::zero() && move_success <= Rat::one()) {
        return Err(GenError::BadMoveProbability(fmt_rat(&move_success)));
    }
    // Route: (1,1) .. (n,1) along the bottom row, then (n,2) .. (n,n).
    let path: Vec<(usize, usize)> = (1..=n)
        .map(|x| (x, 1))
        .chain((2..=n).map(|y| (n, y)))
        .collect();
    let r_goal = path.len() - 1;
    let one = Rat::one;

    let Some((jx0, jy0)) = janitor_start else {
        // No janitor: a chain with one action per state.
        let mut actions = Vec::with_capacity(path.len());
        for r in 0..=r_goal {
            if r == r_goal {
                actions.push(vec![Action {
                    name: "done".into(),
                    transitions: vec![(r, one())],
                }]);
            } else {
                let transitions = if move_success.is_one() {
                    vec![(r + 1, one())]
                } else {
                    vec![(r + 1, move_success.clone()), (r, &one() - &move_success)]
                };
                actions.push(vec![Action {
                    name: "move".into(),
                    transitions,
                }]);
            }
        }
        let labels: BTreeMap<String, BTreeSet<usize>> = [
            ("init".to_string(), BTreeSet::from([0])),
            ("goal".to_string(), BTreeSet::from([r_goal])),
        ]
        .into();
        let source = "every state has a single action, so all schedulers coincide".to_string();
        let expected = [Engine::Pipeline, Engine::MdOracle]
            .into_iter()
            .map(|engine| Expected {
                engine,
                verdict: Verdict::Holds,
                source: source.clone(),
            })
            .collect();
        return Ok(GeneratedInstance {
            name: format!("robot_chain_{n}"),
            mdp: Mdp { actions, labels },
            property: PROPERTY.into(),
            expected,
            notes: format!(
                "Janitor-free route of {} cells; each step advances with probability {}.",
                path.len(),
                fmt_rat(&move_success)
            ),
        });
    };

    let in_grid = |x: i64, y: i64| x >= 1 && x <= n as i64 && y >= 1 && y <= n as i64;
    if !in_grid(jx0 as i64, jy0 as i64) || (jx0, jy0) == path[0] {
        return Err(GenError::BadJanitorStart(jx0, jy0));
    }

    // States (route index, janitor cell, turn), janitor never on the robot.
    let mut index: BTreeMap<(usize, usize, usize, usize), usize> = BTreeMap::new();
    for r in 0..=r_goal {
        for jx in 1..=n {
            for jy in 1..=n {
                if (jx, jy) == path[r] {
                    continue;
                }
                for turn in 0..2 {
                    index.insert((r, jx, jy, turn), index.len());
                }
            }
        }
    }

    let mut actions = vec![Vec::new(); index.len()];
    for (&(r, jx, jy, turn), &s) in &index {
        let acts = if r == r_goal {
            vec![Action {
                name: "done".into(),
                transitions: vec![(s, one())],
            }]
        } else if turn == 0 {
            // Robot's turn: advance toward the next route cell.
            if (jx, jy) == path[r + 1] {
                vec![Action {
                    name: "blocked".into(),
                    transitions: vec![(index[&(r, jx, jy, 1)], one())],
                }]
            } else {
                let advance = index[&(r + 1, jx, jy, 1)];
                let stay = index[&(r, jx, jy, 1)];
                let transitions = if move_success.is_one() {
                    vec![(advance, one())]
                } else {
                    vec![
                        (advance, move_success.clone()),
                        (stay, &one() - &move_success),
                    ]
                };
                vec![Action {
                    name: "move".into(),
                    transitions,
                }]
            }
        } else {
            // Janitor's turn: stay, or step to a free adjacent cell.
            let mut acts = vec![Action {
                name: "stay".into(),
                transitions: vec![(index[&(r, jx, jy, 0)], one())],
            }];
            for (dx, dy, name) in [(-1i64, 0i64, "left"), (1, 0, "right"), (0, -1, "down"), (0, 1, "up")] {
                let (nx, ny) = (jx as i64 + dx, jy as i64 + dy);
                if in_grid(nx, ny) {
                    let (nx, ny) = (nx as usize, ny as usize);
                    if (nx, ny) != path[r] {
                        acts.push(Action {
                            name: name.into(),
                            transitions: vec![(index[&(r, nx, ny, 0)], one())],
                        });
                    }
                }
            }
            acts
        };
        actions[s] = acts;
    }

    let goal: BTreeSet<usize> = index
        .iter()
        .filter(|(&(r, ..), _)| r == r_goal)
        .map(|(_, &s)| s)
        .collect();
    let labels: BTreeMap<String, BTreeSet<usize>> = [
        (
            "init".to_string(),
            BTreeSet::from([index[&(0, jx0, jy0, 0)]]),
        ),
        ("goal".to_string(), goal),
    ]
    .into();

    Ok(GeneratedInstance {
        name: format!("robot_tag_{n}_{jx0}_{jy0}"),
        mdp: Mdp { actions, labels },
        property: PROPERTY.into(),
        expected: Vec::new(),
        notes: format!(
            "Turn-based pursuit on a {n}x{n} grid; the robot follows its fixed route \
             (moves succeed with probability {}), the janitor starts at ({jx0}, {jy0}) \
             and may block the robot's next cell.",
            fmt_rat(&move_success)
        ),
    })
}
