//! Von Neumann extractor with an adversarially chosen per-draw bias.
//!
//! A round draws 2n bits, each from a coin whose bias the scheduler picks
//! from {lo, hi} before the draw. If the round has exactly n zeros the
//! process returns the round's first bit, otherwise it retries. States track
//! (bits drawn, first bit, zeros drawn); the question is whether the two
//! return values stay equally likely no matter how the biases are chosen.

use super::{Engine, Expected, GenError, GeneratedInstance};
use crate::model::{Action, Mdp};
use crate::rational::{fmt_rat, rat, Rat};
use crate::verdict::Verdict;
use num::{One, Zero};
use std::collections::{BTreeMap, BTreeSet};

/// Builds the n-zeros-in-2n-bits extractor with bias choices `p_lo`/`p_hi`
/// and the symmetry property at tolerance `eps`.
pub fn gen_von_neumann(
    n: usize,
    p_lo: Rat,
    p_hi: Rat,
    eps: Rat,
) -> Result<GeneratedInstance, GenError> {
    if n == 0 {
        return Err(GenError::BadWordLength);
    }
    if !(p_lo > Rat::zero() && p_lo <= p_hi && p_hi < Rat::one()) {
        return Err(GenError::BadBias {
            lo: fmt_rat(&p_lo),
            hi: fmt_rat(&p_hi),
        });
    }
    if eps < Rat::zero() {
        return Err(GenError::NegativeEpsilon(fmt_rat(&eps)));
    }

    let len = 2 * n;
    // Numbering: start, then draw states ordered by (depth, first bit,
    // zeros), then ret0 and ret1. With d bits drawn and first bit f, the
    // zero count z ranges over 1..=d (f = 0) or 0..=d-1 (f = 1).
    let mut index: BTreeMap<(usize, u8, usize), usize> = BTreeMap::new();
    let mut next = 1usize;
    for d in 1..len {
        for f in 0..=1u8 {
            let zs = if f == 0 { 1..=d } else { 0..=d - 1 };
            for z in zs {
                index.insert((d, f, z), next);
                next += 1;
            }
        }
    }
    let ret0 = next;
    let ret1 = next + 1;

    // Successor of a depth-d state after drawing `bit`.
    let step = |d: usize, f: u8, z: usize, bit: u8| -> usize {
        if d == 0 {
            index[&(1, bit, (1 - bit) as usize)]
        } else if d + 1 < len {
            index[&(d + 1, f, z + (1 - bit) as usize)]
        } else {
            let zeros = z + (1 - bit) as usize;
            match (zeros == n, f) {
                (false, _) => 0,
                (true, 0) => ret0,
                (true, _) => ret1,
            }
        }
    };
    let bias_action = |name: &str, p: &Rat, d: usize, f: u8, z: usize| -> Action {
        let on_one = step(d, f, z, 1);
        let on_zero = step(d, f, z, 0);
        let transitions = if on_one == on_zero {
            vec![(on_one, Rat::one())]
        } else {
            vec![(on_one, p.clone()), (on_zero, Rat::one() - p)]
        };
        Action {
            name: name.into(),
            transitions,
        }
    };
    let draw = |d: usize, f: u8, z: usize| -> Vec<Action> {
        vec![
            bias_action("lo", &p_lo, d, f, z),
            bias_action("hi", &p_hi, d, f, z),
        ]
    };

    let mut actions = vec![draw(0, 0, 0)];
    for (&(d, f, z), &idx) in &index {
        debug_assert_eq!(idx, actions.len());
        actions.push(draw(d, f, z));
    }
    for ret in [ret0, ret1] {
        actions.push(vec![Action {
            name: "done".into(),
            transitions: vec![(ret, Rat::one())],
        }]);
    }

    let labels: BTreeMap<String, BTreeSet<usize>> = [
        ("init".to_string(), BTreeSet::from([0])),
        ("ret0".to_string(), BTreeSet::from([ret0])),
        ("ret1".to_string(), BTreeSet::from([ret1])),
    ]
    .into();

    let mut expected = Vec::new();
    if p_lo == p_hi {
        let source = "equal biases collapse the choice, and every balanced word has the \
                      same probability, split evenly by first bit"
            .to_string();
        for engine in [Engine::Pipeline, Engine::MdOracle] {
            expected.push(Expected {
                engine,
                verdict: Verdict::Holds,
                source: source.clone(),
            });
        }
    } else if n == 1 {
        // Renewal argument: per round, return-0 weight (1-p_s)p_a and
        // return-1 weight p_s(1-p_b) with each bias free; extremizing gives
        // +/- (hi-lo)/(lo+hi-2*lo*hi).
        let gap = (&p_hi - &p_lo) / (&p_lo + &p_hi - rat(2, 1) * &p_lo * &p_hi);
        let verdict = if gap <= eps {
            Verdict::Holds
        } else {
            Verdict::Violated
        };
        let source = format!("extremal return-value difference is exactly {}", fmt_rat(&gap));
        for engine in [Engine::Pipeline, Engine::MdOracle] {
            expected.push(Expected {
                engine,
                verdict,
                source: source.clone(),
            });
        }
    }

    Ok(GeneratedInstance {
        name: format!("von_neumann_{n}"),
        mdp: Mdp { actions, labels },
        property: format!(
            "forall s . P(s, init, F ret0) - P(s, init, F ret1) ~ 0 eps {}",
            fmt_rat(&eps)
        ),
        expected,
        notes: format!(
            "Rounds of {len} coin flips with per-flip bias chosen from {{{}, {}}}; a round \
             with exactly {n} zeros returns its first bit, any other round retries.",
            fmt_rat(&p_lo),
            fmt_rat(&p_hi)
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dtmc::reach_probability;
    use crate::model::{induce_dtmc, MdScheduler};

    fn biased(n: usize, eps: Rat) -> GeneratedInstance {
        gen_von_neumann(n, rat(59, 100), rat(61, 100), eps).unwrap()
    }

    #[test]
    fn state_counts_follow_the_encoding() {
        // 2n(2n-1) draw states plus start and the two return states.
        for (n, count) in [(1usize, 5usize), (2, 15), (3, 33), (10, 383)] {
            assert_eq!(biased(n, rat(0, 1)).mdp.num_states(), count);
        }
    }

    #[test]
    fn single_pair_extremal_difference_matches_closed_form() {
        let inst = biased(1, rat(0, 1));
        // start = 0, (1 bit, first 0, one zero) = 1, (1 bit, first 1, no
        // zeros) = 2, ret0 = 3, ret1 = 4. Low bias on the first flip and
        // high bias on the second maximizes the ret0-ret1 gap.
        let sched = MdScheduler {
            choice: vec![0, 1, 1, 0, 0],
        };
        let dtmc = induce_dtmc(&inst.mdp, &sched).unwrap();
        let p0 = reach_probability(&dtmc, &inst.mdp.labels["ret0"].clone()).unwrap()[0].clone();
        let p1 = reach_probability(&dtmc, &inst.mdp.labels["ret1"].clone()).unwrap()[0].clone();
        assert_eq!(p0 - p1, rat(100, 2401));
        assert_eq!(inst.expected.len(), 2);
        assert!(inst
            .expected
            .iter()
            .all(|e| e.verdict == Verdict::Violated));
    }

    #[test]
    fn expected_verdict_tracks_the_tolerance() {
        assert!(biased(1, rat(1, 20))
            .expected
            .iter()
            .all(|e| e.verdict == Verdict::Holds));
        assert!(biased(1, rat(1, 25))
            .expected
            .iter()
            .all(|e| e.verdict == Verdict::Violated));
    }

    #[test]
    fn fair_coin_returns_evenly() {
        let inst = gen_von_neumann(2, rat(1, 2), rat(1, 2), rat(0, 1)).unwrap();
        let sched = MdScheduler {
            choice: vec![0; inst.mdp.num_states()],
        };
        let dtmc = induce_dtmc(&inst.mdp, &sched).unwrap();
        let p0 = reach_probability(&dtmc, &inst.mdp.labels["ret0"].clone()).unwrap()[0].clone();
        let p1 = reach_probability(&dtmc, &inst.mdp.labels["ret1"].clone()).unwrap()[0].clone();
        assert_eq!(p0, p1);
        assert_eq!(p0, rat(1, 2));
        assert!(!inst.expected.is_empty());
    }

    #[test]
    fn retry_merges_into_a_single_transition() {
        // With one pair, the state that has already failed the balance test
        // cannot exist; with two pairs, depth-3 states with z = 3 loop to
        // start on either outcome.
        let inst = biased(2, rat(0, 1));
        let (d, f, z) = (3usize, 0u8, 3usize);
        // Locate the state by replaying the numbering.
        let mut n = 1;
        let mut found = None;
        for dd in 1..4 {
            for ff in 0..=1u8 {
                let zs = if ff == 0 { 1..=dd } else { 0..=dd - 1 };
                for zz in zs {
                    if (dd, ff, zz) == (d, f, z) {
                        found = Some(n);
                    }
                    n += 1;
                }
            }
        }
        let s = found.unwrap();
        for action in &inst.mdp.actions[s] {
            assert_eq!(action.transitions, vec![(0, rat(1, 1))]);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert_eq!(
            gen_von_neumann(0, rat(1, 2), rat(1, 2), rat(0, 1)).unwrap_err(),
            GenError::BadWordLength
        );
        assert!(matches!(
            gen_von_neumann(1, rat(0, 1), rat(1, 2), rat(0, 1)).unwrap_err(),
            GenError::BadBias { .. }
        ));
        assert!(matches!(
            gen_von_neumann(1, rat(1, 2), rat(1, 1), rat(0, 1)).unwrap_err(),
            GenError::BadBias { .. }
        ));
        assert!(matches!(
            gen_von_neumann(1, rat(2, 3), rat(1, 3), rat(0, 1)).unwrap_err(),
            GenError::BadBias { .. }
        ));
        assert_eq!(
            gen_von_neumann(1, rat(1, 3), rat(2, 3), rat(-1, 2)).unwrap_err(),
            GenError::NegativeEpsilon("-1/2".into())
        );
    }

    #[test]
    fn property_carries_the_tolerance() {
        assert!(biased(1, rat(1, 20)).property.ends_with("eps 1/20"));
    }
}
