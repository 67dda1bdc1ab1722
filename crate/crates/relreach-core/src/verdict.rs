//! Turning per-combination value bounds into a verdict, and producing
//! checkable witnesses.
//!
//! The achievable values of the combination sum form the interval
//! `[v_min, v_max]` (combinations are independent, and each can be mixed
//! continuously between its extremes), so comparisons against the threshold
//! reduce to interval tests. With only bounds on `v_min`/`v_max`, each test
//! has a certainly-true form, a certainly-false form, and a gap: the gap is
//! `Inconclusive`, which exact mode cannot produce.

use crate::model::{induce_dtmc, MdScheduler};
use crate::pipeline::{combinations, unfold, Combination, Unfolding};
use crate::property::{NormComp, NormalizedQuery};
use crate::rational::{fmt_rat, rat_one, Rat};
use crate::solver::Bounds;
use num::{Signed, Zero};
use std::collections::HashMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    Violated,
    Inconclusive,
}

impl Verdict {
    pub fn complement(self) -> Verdict {
        match self {
            Verdict::Holds => Verdict::Violated,
            Verdict::Violated => Verdict::Holds,
            Verdict::Inconclusive => Verdict::Inconclusive,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::Violated => "violated",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Bounds for one combination; `v_min` is skipped for one-sided comparators.
#[derive(Debug, Clone)]
pub struct CombinationValues {
    pub v_max: Bounds,
    pub v_min: Option<Bounds>,
}

#[derive(Debug, Clone)]
pub struct AggregateResult {
    pub per_combination: Vec<CombinationValues>,
    pub v_max: Bounds,
    pub v_min: Option<Bounds>,
}

/// Componentwise interval sums across combinations.
pub fn aggregate(per_combination: Vec<CombinationValues>) -> AggregateResult {
    let mut v_max = Bounds::point(Rat::zero());
    let mut v_min = Some(Bounds::point(Rat::zero()));
    for cv in &per_combination {
        v_max.lower += &cv.v_max.lower;
        v_max.upper += &cv.v_max.upper;
        match (&mut v_min, &cv.v_min) {
            (Some(acc), Some(b)) => {
                acc.lower += &b.lower;
                acc.upper += &b.upper;
            }
            _ => v_min = None,
        }
    }
    AggregateResult {
        per_combination,
        v_max,
        v_min,
    }
}

/// Decision table over the aggregated bounds. The `negated` flag complements
/// the answer (the normalized query is the complement of a universal one);
/// `Inconclusive` survives negation.
pub fn decide(comp: &NormComp, threshold: &Rat, agg: &AggregateResult, negated: bool) -> Verdict {
    let q = threshold;
    let vmax = &agg.v_max;
    let raw = match comp {
        NormComp::Gt => {
            if vmax.lower > *q {
                Verdict::Holds
            } else if vmax.upper <= *q {
                Verdict::Violated
            } else {
                Verdict::Inconclusive
            }
        }
        NormComp::Ge => {
            if vmax.lower >= *q {
                Verdict::Holds
            } else if vmax.upper < *q {
                Verdict::Violated
            } else {
                Verdict::Inconclusive
            }
        }
        NormComp::Approx(eps) => {
            let vmin = agg.v_min.as_ref().expect("two-sided comparator has v_min");
            // Some achievable value lies within eps of q iff
            // q in [v_min - eps, v_max + eps].
            if *q >= &vmin.upper - eps && *q <= &vmax.lower + eps {
                Verdict::Holds
            } else if *q < &vmin.lower - eps || *q > &vmax.upper + eps {
                Verdict::Violated
            } else {
                Verdict::Inconclusive
            }
        }
        NormComp::NotApprox(eps) => {
            let vmin = agg.v_min.as_ref().expect("two-sided comparator has v_min");
            // Some achievable value lies further than eps from q iff
            // q outside [v_max - eps, v_min + eps]; that interval may be
            // empty, in which case every q works and Violated is impossible.
            if *q < &vmax.lower - eps || *q > &vmin.upper + eps {
                Verdict::Holds
            } else if *q >= &vmax.upper - eps && *q <= &vmin.lower + eps {
                Verdict::Violated
            } else {
                Verdict::Inconclusive
            }
        }
    };
    if negated {
        raw.complement()
    } else {
        raw
    }
}

// ---------------------------------------------------------------------------
// Witnesses

/// Shape of the demonstrating scheduler tuple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WitnessKind {
    /// The maximizing tuple alone reaches the required region.
    PureMax,
    /// The minimizing tuple alone reaches it.
    PureMin,
    /// Mix: before any run starts, one shared coin picks the minimizing
    /// tuple with probability lambda, else the maximizing tuple; the
    /// expected combination sum hits the threshold exactly.
    Mix,
}

/// Memoryless choice on an unfolding, keyed by (base state, touched mask).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WitnessChoice {
    pub state: usize,
    pub mask: u32,
    pub action: usize,
    pub action_name: String,
}

#[derive(Debug, Clone)]
pub struct CombinationWitness {
    pub sched_var: String,
    pub state: usize,
    pub max_choices: Option<Vec<WitnessChoice>>,
    pub min_choices: Option<Vec<WitnessChoice>>,
}

#[derive(Debug, Clone)]
pub struct Witness {
    pub kind: WitnessKind,
    /// Mix only: probability of playing the minimizing tuple.
    pub lambda: Option<Rat>,
    /// Exact combination-sum value the tuple (or mix) achieves.
    pub achieved: Rat,
    pub combinations: Vec<CombinationWitness>,
}

/// Everything known about one combination after an exact solve.
#[derive(Debug, Clone)]
pub struct CombinationSolution {
    pub comb: Combination,
    pub unfolding: Unfolding,
    pub v_max: Rat,
    /// Maximizing choices on the unfolding.
    pub max_sched: MdScheduler,
    pub v_min: Option<Rat>,
    pub min_sched: Option<MdScheduler>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WitnessError {
    #[error("witness gives no choice for unfolding state ({state}, mask {mask:#b})")]
    MissingChoice { state: usize, mask: u32 },
    #[error("witness picks action {action} at state {state}, which has {enabled} actions")]
    ActionOutOfRange {
        state: usize,
        action: usize,
        enabled: usize,
    },
    #[error("witness lacks its {side} scheduler for combination {index}")]
    MissingSide { index: usize, side: &'static str },
    #[error("witness has {got} combination entries, query needs {want}")]
    WrongCombinationCount { got: usize, want: usize },
    #[error("mixing weight {0} is outside [0, 1]")]
    LambdaOutOfRange(String),
    #[error("witness claims value {claimed} but achieves {actual}")]
    AchievedMismatch { claimed: String, actual: String },
    #[error("achieved value {achieved} does not satisfy the comparison")]
    ComparisonFails { achieved: String },
}

fn sched_to_choices(unf: &Unfolding, sched: &MdScheduler) -> Vec<WitnessChoice> {
    sched
        .choice
        .iter()
        .enumerate()
        .map(|(i, &a)| WitnessChoice {
            state: unf.back[i].0,
            mask: unf.back[i].1,
            action: a,
            action_name: unf.mdp.actions[i][a].name.clone(),
        })
        .collect()
}

/// Builds the witness for a normalized query that holds, from exact
/// per-combination solutions. For `~`, picks whichever pure tuple already
/// lands within eps, otherwise mixes the two tuples with the unique weight
/// whose expectation is exactly the threshold.
pub fn synthesize_witness(
    comp: &NormComp,
    threshold: &Rat,
    sols: &[CombinationSolution],
) -> Witness {
    let v_max: Rat = sols.iter().map(|s| s.v_max.clone()).sum();
    let v_min = || -> Rat {
        sols.iter()
            .map(|s| s.v_min.clone().expect("two-sided solve has v_min"))
            .sum()
    };
    let (kind, lambda, achieved) = match comp {
        NormComp::Gt | NormComp::Ge => (WitnessKind::PureMax, None, v_max),
        NormComp::NotApprox(eps) => {
            if *threshold < &v_max - eps {
                (WitnessKind::PureMax, None, v_max)
            } else {
                (WitnessKind::PureMin, None, v_min())
            }
        }
        NormComp::Approx(eps) => {
            let lo = v_min();
            if v_max <= threshold + eps {
                (WitnessKind::PureMax, None, v_max)
            } else if lo >= threshold - eps {
                (WitnessKind::PureMin, None, lo)
            } else {
                // v_min < q - eps < q + eps < v_max: interpolate exactly.
                let lambda = (&v_max - threshold) / (&v_max - &lo);
                (WitnessKind::Mix, Some(lambda), threshold.clone())
            }
        }
    };
    let want_max = kind != WitnessKind::PureMin;
    let want_min = kind != WitnessKind::PureMax;
    let combinations = sols
        .iter()
        .map(|s| CombinationWitness {
            sched_var: s.comb.sched_name.clone(),
            state: s.comb.state,
            max_choices: want_max.then(|| sched_to_choices(&s.unfolding, &s.max_sched)),
            min_choices: want_min.then(|| {
                sched_to_choices(
                    &s.unfolding,
                    s.min_sched.as_ref().expect("two-sided solve has min scheduler"),
                )
            }),
        })
        .collect();
    Witness {
        kind,
        lambda,
        achieved,
        combinations,
    }
}

/// Replays a witness from scratch against the model and query: rebuilds the
/// unfoldings, re-evaluates both tuples exactly, and checks the claimed value
/// and the comparison. Returns the achieved value.
pub fn validate_witness(
    mdp: &crate::model::Mdp,
    query: &NormalizedQuery,
    witness: &Witness,
) -> Result<Rat, WitnessError> {
    let combs = combinations(query);
    if witness.combinations.len() != combs.len() {
        return Err(WitnessError::WrongCombinationCount {
            got: witness.combinations.len(),
            want: combs.len(),
        });
    }
    if let Some(l) = &witness.lambda {
        if l.is_negative() || *l > rat_one() {
            return Err(WitnessError::LambdaOutOfRange(fmt_rat(l)));
        }
    }
    let eval_side = |unf: &Unfolding, choices: &[WitnessChoice]| -> Result<Rat, WitnessError> {
        let by_key: HashMap<(usize, u32), &WitnessChoice> =
            choices.iter().map(|c| ((c.state, c.mask), c)).collect();
        let mut choice = Vec::with_capacity(unf.mdp.num_states());
        for (i, &(s, m)) in unf.back.iter().enumerate() {
            let c = by_key
                .get(&(s, m))
                .ok_or(WitnessError::MissingChoice { state: s, mask: m })?;
            if c.action >= unf.mdp.actions[i].len() {
                return Err(WitnessError::ActionOutOfRange {
                    state: s,
                    action: c.action,
                    enabled: unf.mdp.actions[i].len(),
                });
            }
            choice.push(c.action);
        }
        let dtmc = induce_dtmc(&unf.mdp, &MdScheduler { choice })
            .expect("choices were range-checked");
        let values = crate::dtmc::expected_total_reward(&dtmc, &unf.rewards)
            .expect("unfolding rewards sit on transient states");
        Ok(values[unf.init].clone())
    };

    let mut sum_max = Rat::zero();
    let mut sum_min = Rat::zero();
    let want_max = witness.kind != WitnessKind::PureMin;
    let want_min = witness.kind != WitnessKind::PureMax;
    for (index, (comb, cw)) in combs.iter().zip(&witness.combinations).enumerate() {
        let unf = unfold(mdp, comb).expect("query was checked before witnessing");
        if want_max {
            let choices = cw.max_choices.as_ref().ok_or(WitnessError::MissingSide {
                index,
                side: "maximizing",
            })?;
            sum_max += eval_side(&unf, choices)?;
        }
        if want_min {
            let choices = cw.min_choices.as_ref().ok_or(WitnessError::MissingSide {
                index,
                side: "minimizing",
            })?;
            sum_min += eval_side(&unf, choices)?;
        }
    }
    let achieved = match witness.kind {
        WitnessKind::PureMax => sum_max,
        WitnessKind::PureMin => sum_min,
        WitnessKind::Mix => {
            let l = witness
                .lambda
                .clone()
                .ok_or(WitnessError::LambdaOutOfRange("missing".into()))?;
            &l * &sum_min + (rat_one() - &l) * &sum_max
        }
    };
    if achieved != witness.achieved {
        return Err(WitnessError::AchievedMismatch {
            claimed: fmt_rat(&witness.achieved),
            actual: fmt_rat(&achieved),
        });
    }
    let q = &query.threshold;
    let ok = match &query.comp {
        NormComp::Gt => achieved > *q,
        NormComp::Ge => achieved >= *q,
        NormComp::Approx(eps) => (&achieved - q).abs() <= *eps,
        NormComp::NotApprox(eps) => (&achieved - q).abs() > *eps,
    };
    if !ok {
        return Err(WitnessError::ComparisonFails {
            achieved: fmt_rat(&achieved),
        });
    }
    Ok(achieved)
}
