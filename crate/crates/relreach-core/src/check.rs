//! End-to-end checking: split the query into combinations, unfold each,
//! quotient away end components, solve, aggregate, and decide.
//!
//! The requested tolerance bounds the width of the *aggregated* value
//! intervals, so each combination is solved to tolerance / #combinations.
//! Combinations are independent and solved in parallel.

use crate::mec::{build_quotient, lift_scheduler, mec_decompose, QuotientError};
use crate::model::Mdp;
use crate::pipeline::{combinations, unfold, Combination, PipelineError};
use crate::property::NormalizedQuery;
use crate::rational::{fmt_rat, Rat};
use crate::solver::{maximize_reward, minimize_reward, Bounds, Mode, SolverConfig, SolverError};
use crate::verdict::{
    aggregate, decide, synthesize_witness, CombinationSolution, CombinationValues, Verdict,
    Witness, WitnessKind,
};
use num::{BigInt, Zero};
use rayon::prelude::*;
use serde_json::json;
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CheckError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Quotient(#[from] QuotientError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("witness synthesis requires exact mode")]
    WitnessNeedsExactMode,
    #[error("could not start worker threads: {0}")]
    Parallelism(String),
}

/// How to run a check.
#[derive(Debug, Clone)]
pub struct CheckConfig {
    pub mode: Mode,
    /// Width bound for the aggregated value intervals (approximate mode).
    pub tolerance: Rat,
    /// Per-solve sweep cap in approximate mode.
    pub max_iterations: usize,
    /// Worker threads; None uses the global pool.
    pub jobs: Option<usize>,
    /// Synthesize a scheduler witness (exact mode only).
    pub want_witness: bool,
}

impl CheckConfig {
    pub fn exact() -> Self {
        CheckConfig {
            mode: Mode::Exact,
            tolerance: Rat::zero(),
            max_iterations: 0,
            jobs: None,
            want_witness: false,
        }
    }

    pub fn approx(tolerance: Rat) -> Self {
        CheckConfig {
            mode: Mode::Approx,
            tolerance,
            max_iterations: 1_000_000,
            jobs: None,
            want_witness: false,
        }
    }
}

/// Wall-clock time spent in each stage, summed over combinations.
#[derive(Debug, Clone, Copy, Default)]
pub struct Timings {
    pub unfold: Duration,
    pub mec: Duration,
    pub solve: Duration,
    pub aggregate: Duration,
}

/// Per-combination statistics and value bounds.
#[derive(Debug, Clone)]
pub struct CombinationReport {
    pub sched_var: String,
    pub initial_state: usize,
    pub unfolding_states: usize,
    pub unfolding_transitions: usize,
    pub quotient_states: usize,
    pub mec_count: usize,
    pub v_max: Bounds,
    pub v_min: Option<Bounds>,
    pub max_iterations: usize,
    pub min_iterations: usize,
}

/// Everything a check run produced.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub verdict: Verdict,
    pub v_max: Bounds,
    pub v_min: Option<Bounds>,
    pub combinations: Vec<CombinationReport>,
    pub witness: Option<Witness>,
    pub timings: Timings,
    pub model_states: usize,
    pub model_transitions: usize,
}

fn with_pool<R: Send>(
    jobs: Option<usize>,
    f: impl FnOnce() -> R + Send,
) -> Result<R, CheckError> {
    match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CheckError::Parallelism(e.to_string()))
            .map(|pool| pool.install(f)),
        None => Ok(f()),
    }
}

type SolvedCombination = (
    CombinationValues,
    Option<CombinationSolution>,
    CombinationReport,
    [Duration; 3],
);

fn solve_combination(
    mdp: &Mdp,
    comb: &Combination,
    cfg: &SolverConfig,
    need_min: bool,
) -> Result<SolvedCombination, CheckError> {
    let t0 = Instant::now();
    let unf = unfold(mdp, comb)?;
    let t1 = Instant::now();
    let mecs = mec_decompose(&unf.mdp);
    let quotient = build_quotient(&unf.mdp, &unf.rewards, &mecs)?;
    let t2 = Instant::now();
    let at = quotient.state_map[unf.init];
    let max_out = maximize_reward(&quotient, at, cfg)?;
    let min_out = if need_min {
        Some(minimize_reward(&quotient, at, cfg)?)
    } else {
        None
    };
    let t3 = Instant::now();

    let values = CombinationValues {
        v_max: max_out.bounds.clone(),
        v_min: min_out.as_ref().map(|o| o.bounds.clone()),
    };
    let report = CombinationReport {
        sched_var: comb.sched_name.clone(),
        initial_state: comb.state,
        unfolding_states: unf.mdp.num_states(),
        unfolding_transitions: unf.mdp.num_transitions(),
        quotient_states: quotient.mdp.num_states(),
        mec_count: quotient.mecs.len(),
        v_max: max_out.bounds.clone(),
        v_min: values.v_min.clone(),
        max_iterations: max_out.iterations,
        min_iterations: min_out.as_ref().map_or(0, |o| o.iterations),
    };
    let solution = max_out.policy.as_ref().map(|p| {
        let max_sched = lift_scheduler(&quotient, &unf.mdp, p);
        let (v_min, min_sched) = match &min_out {
            Some(o) => (
                Some(o.bounds.lower.clone()),
                o.policy
                    .as_ref()
                    .map(|p| lift_scheduler(&quotient, &unf.mdp, p)),
            ),
            None => (None, None),
        };
        CombinationSolution {
            comb: comb.clone(),
            unfolding: unf,
            v_max: max_out.bounds.lower.clone(),
            max_sched,
            v_min,
            min_sched,
        }
    });
    Ok((
        values,
        solution,
        report,
        [t1 - t0, t2 - t1, t3 - t2],
    ))
}

/// Checks `query` on `mdp` and reports the verdict with its evidence.
pub fn run_check(
    mdp: &Mdp,
    query: &NormalizedQuery,
    config: &CheckConfig,
) -> Result<RunReport, CheckError> {
    if config.want_witness && config.mode == Mode::Approx {
        return Err(CheckError::WitnessNeedsExactMode);
    }
    let combs = combinations(query);
    let per_comb_tolerance =
        &config.tolerance / Rat::from_integer(BigInt::from(combs.len().max(1)));
    let solver_cfg = SolverConfig {
        mode: config.mode,
        tolerance: per_comb_tolerance,
        max_iterations: config.max_iterations,
    };
    let need_min = !query.comp.is_one_sided();

    let solved: Result<Vec<SolvedCombination>, CheckError> = with_pool(config.jobs, || {
        combs
            .par_iter()
            .map(|comb| solve_combination(mdp, comb, &solver_cfg, need_min))
            .collect()
    })?;
    let solved = solved?;

    let t_agg = Instant::now();
    let mut timings = Timings::default();
    let mut values = Vec::with_capacity(solved.len());
    let mut solutions = Vec::with_capacity(solved.len());
    let mut reports = Vec::with_capacity(solved.len());
    for (v, sol, rep, [du, dm, ds]) in solved {
        values.push(v);
        if let Some(sol) = sol {
            solutions.push(sol);
        }
        reports.push(rep);
        timings.unfold += du;
        timings.mec += dm;
        timings.solve += ds;
    }
    let agg = aggregate(values);
    let verdict = decide(&query.comp, &query.threshold, &agg, query.negated);
    debug_assert!(
        config.mode == Mode::Approx || verdict != Verdict::Inconclusive,
        "exact mode must decide"
    );

    let witness = if config.want_witness
        && decide(&query.comp, &query.threshold, &agg, false) == Verdict::Holds
    {
        let w = synthesize_witness(&query.comp, &query.threshold, &solutions);
        debug_assert!(
            crate::verdict::validate_witness(mdp, query, &w).is_ok(),
            "synthesized witness must replay"
        );
        Some(w)
    } else {
        None
    };
    timings.aggregate = t_agg.elapsed();

    Ok(RunReport {
        verdict,
        v_max: agg.v_max,
        v_min: agg.v_min,
        combinations: reports,
        witness,
        timings,
        model_states: mdp.num_states(),
        model_transitions: mdp.num_transitions(),
    })
}

fn bounds_json(b: &Bounds) -> serde_json::Value {
    json!({ "lower": fmt_rat(&b.lower), "upper": fmt_rat(&b.upper) })
}

fn witness_json(query: &NormalizedQuery, w: &Witness) -> serde_json::Value {
    let kind = match w.kind {
        WitnessKind::PureMax => "pure-max",
        WitnessKind::PureMin => "pure-min",
        WitnessKind::Mix => "mix",
    };
    let combinations: Vec<serde_json::Value> = w
        .combinations
        .iter()
        .map(|c| {
            let choices = |side: &Option<Vec<crate::verdict::WitnessChoice>>| {
                side.as_ref().map(|cs| {
                    cs.iter()
                        .map(|ch| {
                            json!({
                                "state": ch.state,
                                "mask": ch.mask,
                                "action": ch.action,
                                "action_name": ch.action_name,
                            })
                        })
                        .collect::<Vec<_>>()
                })
            };
            json!({
                "sched_var": c.sched_var,
                "initial_state": c.state,
                "max_choices": choices(&c.max_choices),
                "min_choices": choices(&c.min_choices),
            })
        })
        .collect();
    json!({
        "role": if query.negated { "counterexample" } else { "witness" },
        "kind": kind,
        "lambda": w.lambda.as_ref().map(fmt_rat),
        "achieved": fmt_rat(&w.achieved),
        "combinations": combinations,
    })
}

/// Deterministic machine-readable summary of a run (no timings).
pub fn report_json(
    query: &NormalizedQuery,
    config: &CheckConfig,
    report: &RunReport,
) -> serde_json::Value {
    let combinations: Vec<serde_json::Value> = report
        .combinations
        .iter()
        .map(|c| {
            json!({
                "sched_var": c.sched_var,
                "initial_state": c.initial_state,
                "unfolding_states": c.unfolding_states,
                "unfolding_transitions": c.unfolding_transitions,
                "quotient_states": c.quotient_states,
                "mecs": c.mec_count,
                "v_max": bounds_json(&c.v_max),
                "v_min": c.v_min.as_ref().map(bounds_json),
                "iterations": { "max": c.max_iterations, "min": c.min_iterations },
            })
        })
        .collect();
    json!({
        "verdict": report.verdict.as_str(),
        "property": query.as_query().to_string(),
        "mode": match config.mode { Mode::Exact => "exact", Mode::Approx => "approx" },
        "tolerance": fmt_rat(&config.tolerance),
        "v_max": bounds_json(&report.v_max),
        "v_min": report.v_min.as_ref().map(bounds_json),
        "model": { "states": report.model_states, "transitions": report.model_transitions },
        "combinations": combinations,
        "witness": report.witness.as_ref().map(|w| witness_json(query, w)),
    })
}

/// The per-combination unfoldings as JSON, for inspection.
pub fn dump_unfoldings(
    mdp: &Mdp,
    query: &NormalizedQuery,
) -> Result<serde_json::Value, CheckError> {
    let mut out = Vec::new();
    for comb in combinations(query) {
        let unf = unfold(mdp, &comb)?;
        let model: serde_json::Value =
            serde_json::from_str(&unf.mdp.to_json()).expect("serialized model parses");
        let rewards: serde_json::Map<String, serde_json::Value> = unf
            .rewards
            .iter()
            .enumerate()
            .filter(|(_, r)| !r.is_zero())
            .map(|(s, r)| (s.to_string(), json!(fmt_rat(r))))
            .collect();
        out.push(json!({
            "sched_var": comb.sched_name,
            "initial_state": comb.state,
            "model": model,
            "rewards": rewards,
        }));
    }
    Ok(serde_json::Value::Array(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::figures::{history_required, mix_required, weighted_split};
    use crate::model::Action;
    use crate::property::parse_query;
    use crate::rational::rat;
    use crate::verdict::validate_witness;
    use std::collections::{BTreeMap, BTreeSet};

    fn exact_with_witness() -> CheckConfig {
        CheckConfig {
            want_witness: true,
            ..CheckConfig::exact()
        }
    }

    #[test]
    fn weighted_query_exact_values_and_mixed_witness() {
        let inst = weighted_split();
        let q = parse_query(&inst.property, &inst.mdp).unwrap().normalize();
        let report = run_check(&inst.mdp, &q, &exact_with_witness()).unwrap();
        assert_eq!(report.verdict, Verdict::Holds);
        assert_eq!(report.v_max.lower, rat(1, 4));
        assert!(report.v_max.is_point());
        assert_eq!(report.v_min.as_ref().unwrap().lower, rat(-1, 1));
        let w = report.witness.unwrap();
        assert_eq!(w.kind, WitnessKind::Mix);
        assert_eq!(w.lambda, Some(rat(1, 5)));
        assert_eq!(w.achieved, rat(0, 1));
        assert_eq!(validate_witness(&inst.mdp, &q, &w).unwrap(), rat(0, 1));
    }

    #[test]
    fn approximate_run_brackets_the_exact_values() {
        let inst = weighted_split();
        let q = parse_query(&inst.property, &inst.mdp).unwrap().normalize();
        let tol = rat(1, 1_000_000);
        let report = run_check(&inst.mdp, &q, &CheckConfig::approx(tol.clone())).unwrap();
        assert_eq!(report.verdict, Verdict::Holds);
        let vmax = &report.v_max;
        assert!(vmax.lower <= rat(1, 4) && rat(1, 4) <= vmax.upper);
        assert!(vmax.width() <= tol);
        let vmin = report.v_min.unwrap();
        assert!(vmin.lower <= rat(-1, 1) && rat(-1, 1) <= vmin.upper);
        assert!(vmin.width() <= tol);
    }

    #[test]
    fn one_sided_queries_skip_the_minimizing_solve() {
        let inst = mix_required();
        let q = parse_query("exists sig . P(sig, init, F T) > 1/2", &inst.mdp)
            .unwrap()
            .normalize();
        let report = run_check(&inst.mdp, &q, &CheckConfig::exact()).unwrap();
        assert_eq!(report.verdict, Verdict::Holds);
        assert!(report.v_min.is_none());
        assert!(report.combinations.iter().all(|c| c.v_min.is_none()));
    }

    #[test]
    fn witness_in_approximate_mode_is_refused() {
        let inst = mix_required();
        let q = parse_query(&inst.property, &inst.mdp).unwrap().normalize();
        let config = CheckConfig {
            want_witness: true,
            ..CheckConfig::approx(rat(1, 1000))
        };
        assert!(matches!(
            run_check(&inst.mdp, &q, &config),
            Err(CheckError::WitnessNeedsExactMode)
        ));
    }

    #[test]
    fn pure_witness_for_inequality_query() {
        let inst = history_required();
        let q = parse_query(&inst.property, &inst.mdp).unwrap().normalize();
        let report = run_check(&inst.mdp, &q, &exact_with_witness()).unwrap();
        assert_eq!(report.verdict, Verdict::Holds);
        let w = report.witness.unwrap();
        assert_eq!(w.kind, WitnessKind::PureMax);
        assert!(validate_witness(&inst.mdp, &q, &w).is_ok());
    }

    /// One state slowly draining into the target: the exact value is 1, and
    /// a small enough comparison margin relative to the bound width makes
    /// the approximate verdict provably Inconclusive while the exact one
    /// decides.
    fn slow_drain() -> Mdp {
        Mdp {
            actions: vec![
                vec![Action {
                    name: "wait".into(),
                    transitions: vec![(0, rat(9, 10)), (1, rat(1, 10))],
                }],
                vec![Action {
                    name: "done".into(),
                    transitions: vec![(1, rat(1, 1))],
                }],
            ],
            labels: BTreeMap::from([
                ("init".to_string(), BTreeSet::from([0])),
                ("T".to_string(), BTreeSet::from([1])),
            ]),
        }
    }

    #[test]
    fn approximation_can_be_inconclusive_where_exact_decides() {
        let mdp = slow_drain();
        // Margin far below the final bound width: neither side certifiable.
        let q = parse_query("exists x . P(x, init, F T) !~ 1 eps 1/10000000", &mdp)
            .unwrap()
            .normalize();
        let tol = rat(1, 1000);
        let report = run_check(&mdp, &q, &CheckConfig::approx(tol)).unwrap();
        assert_eq!(report.verdict, Verdict::Inconclusive);
        // The universal reading stays Inconclusive as well.
        let forall = parse_query("forall x . P(x, init, F T) ~ 1 eps 1/10000000", &mdp)
            .unwrap()
            .normalize();
        let report = run_check(&mdp, &forall, &CheckConfig::approx(rat(1, 1000))).unwrap();
        assert_eq!(report.verdict, Verdict::Inconclusive);
        // Exact mode settles both.
        let report = run_check(&mdp, &q, &CheckConfig::exact()).unwrap();
        assert_eq!(report.verdict, Verdict::Violated);
        let report = run_check(&mdp, &forall, &CheckConfig::exact()).unwrap();
        assert_eq!(report.verdict, Verdict::Holds);
    }

    #[test]
    fn tolerance_is_split_across_combinations() {
        let inst = history_required();
        // Two combinations; the aggregated interval must still meet the
        // requested width.
        let q = parse_query(&inst.property, &inst.mdp).unwrap().normalize();
        let tol = rat(1, 100_000);
        let report = run_check(&inst.mdp, &q, &CheckConfig::approx(tol.clone())).unwrap();
        assert_eq!(report.combinations.len(), 2);
        assert!(report.v_max.width() <= tol);
        assert!(report.v_min.unwrap().width() <= tol);
    }

    #[test]
    fn report_json_is_deterministic_and_carries_no_timings() {
        let inst = weighted_split();
        let q = parse_query(&inst.property, &inst.mdp).unwrap().normalize();
        let config = exact_with_witness();
        let a = report_json(&q, &config, &run_check(&inst.mdp, &q, &config).unwrap());
        let b = report_json(&q, &config, &run_check(&inst.mdp, &q, &config).unwrap());
        assert_eq!(a, b);
        let text = serde_json::to_string(&a).unwrap();
        assert!(!text.contains("timing"));
        assert_eq!(a["verdict"], "holds");
        assert_eq!(a["witness"]["lambda"], "1/5");
        assert_eq!(a["witness"]["role"], "witness");
    }

    #[test]
    fn unfolding_dump_lists_reward_spots() {
        let inst = weighted_split();
        let q = parse_query(&inst.property, &inst.mdp).unwrap().normalize();
        let dump = dump_unfoldings(&inst.mdp, &q).unwrap();
        let arr = dump.as_array().unwrap();
        assert_eq!(arr.len(), 2);
        assert_eq!(arr[0]["sched_var"], "s");
        assert_eq!(arr[0]["initial_state"], 0);
        assert!(arr[0]["model"]["num_states"].as_u64().unwrap() >= 4);
        assert!(!arr[0]["rewards"].as_object().unwrap().is_empty());
    }

    #[test]
    fn explicit_job_count_gives_the_same_answer() {
        let inst = weighted_split();
        let q = parse_query(&inst.property, &inst.mdp).unwrap().normalize();
        let mut config = CheckConfig::exact();
        config.jobs = Some(1);
        let one = run_check(&inst.mdp, &q, &config).unwrap();
        config.jobs = Some(4);
        let four = run_check(&inst.mdp, &q, &config).unwrap();
        assert_eq!(one.verdict, four.verdict);
        assert_eq!(one.v_max.lower, four.v_max.lower);
        assert_eq!(one.v_min.unwrap().lower, four.v_min.unwrap().lower);
    }
}
