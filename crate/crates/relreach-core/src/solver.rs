//! Optimal expected total reward on a MEC quotient.
//!
//! Requires the quotient property: the only end component is the absorbing
//! bottom state, hence every policy is proper (reaches the bottom state with
//! probability one) and every policy's value is finite and uniquely defined.
//!
//! Exact mode runs policy iteration with exact rational policy evaluation;
//! the result is the optimum, certified by a zero Bellman residual.
//! Approximate mode runs interval value iteration from safe outer bounds,
//! rounding the lower vector down and the upper vector up to denominators
//! dividing 2^64 each sweep, so the reported interval always contains the
//! optimum and iterates never grow beyond fixed-size rationals. The sweeps
//! work on integer numerators scaled by 2^64, turning each state update into
//! integer dot products and one rounding division.
//!
//! Minimization reuses maximization on negated rewards; bounds come back
//! negated and swapped, bit-for-bit.

use crate::dtmc::expected_total_reward;
use crate::mec::Quotient;
use crate::model::{induce_dtmc, MdScheduler};
use crate::rational::{fmt_rat, Rat};
use num::{BigInt, Integer, One, Zero};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Exact,
    Approx,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub mode: Mode,
    /// Absolute width the initial state's interval must reach in approximate
    /// mode; must be 0 in exact mode and positive in approximate mode.
    pub tolerance: Rat,
    /// Sweep cap for approximate mode; exceeding it is an explicit error,
    /// never a silently wrong bound.
    pub max_iterations: usize,
}

impl SolverConfig {
    pub fn exact() -> Self {
        SolverConfig {
            mode: Mode::Exact,
            tolerance: Rat::zero(),
            max_iterations: 0,
        }
    }

    pub fn approx(tolerance: Rat) -> Self {
        SolverConfig {
            mode: Mode::Approx,
            tolerance,
            max_iterations: 1_000_000,
        }
    }
}

/// Lower and upper bound on a value; equal in exact mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bounds {
    pub lower: Rat,
    pub upper: Rat,
}

impl Bounds {
    pub fn point(v: Rat) -> Self {
        Bounds {
            lower: v.clone(),
            upper: v,
        }
    }

    pub fn is_point(&self) -> bool {
        self.lower == self.upper
    }

    pub fn width(&self) -> Rat {
        &self.upper - &self.lower
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    /// Bounds on the optimal value at the requested state.
    pub bounds: Bounds,
    /// Optimizing policy on the quotient; exact mode only.
    pub policy: Option<MdScheduler>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolverError {
    #[error("approximate mode needs a positive tolerance, got {0}")]
    ToleranceNotPositive(String),
    #[error("exact mode admits no tolerance, got {0}")]
    ToleranceInExactMode(String),
    #[error("no convergence to width {tolerance} within {iterations} sweeps (remaining gap {gap})")]
    IterationCapExceeded {
        iterations: usize,
        tolerance: String,
        gap: String,
    },
}

/// Maximal expected total reward at quotient state `at`.
pub fn maximize_reward(
    quotient: &Quotient,
    at: usize,
    cfg: &SolverConfig,
) -> Result<SolveOutcome, SolverError> {
    match cfg.mode {
        Mode::Exact => {
            if !cfg.tolerance.is_zero() {
                return Err(SolverError::ToleranceInExactMode(fmt_rat(&cfg.tolerance)));
            }
            let (value, policy, iterations) = policy_iteration(quotient);
            Ok(SolveOutcome {
                bounds: Bounds::point(value[at].clone()),
                policy: Some(policy),
                iterations,
            })
        }
        Mode::Approx => {
            if cfg.tolerance <= Rat::zero() {
                return Err(SolverError::ToleranceNotPositive(fmt_rat(&cfg.tolerance)));
            }
            interval_iteration(quotient, at, cfg)
        }
    }
}

/// Minimal expected total reward, as `-max(-rewards)`. The returned bounds
/// are the negated, swapped bounds of that maximization — no separate
/// rounding, so duality holds bit-for-bit.
pub fn minimize_reward(
    quotient: &Quotient,
    at: usize,
    cfg: &SolverConfig,
) -> Result<SolveOutcome, SolverError> {
    let negated = Quotient {
        rewards: quotient.rewards.iter().map(|r| -r.clone()).collect(),
        ..quotient.clone()
    };
    let out = maximize_reward(&negated, at, cfg)?;
    Ok(SolveOutcome {
        bounds: Bounds {
            lower: -out.bounds.upper,
            upper: -out.bounds.lower,
        },
        policy: out.policy,
        iterations: out.iterations,
    })
}

/// Value of playing `action` at `s` against the value vector `v`.
fn action_value(quotient: &Quotient, s: usize, action: usize, v: &[Rat]) -> Rat {
    let mut x = quotient.rewards[s].clone();
    for (succ, p) in &quotient.mdp.actions[s][action].transitions {
        if !v[*succ].is_zero() {
            x += p * &v[*succ];
        }
    }
    x
}

/// Howard policy iteration. Any starting policy is proper on a quotient, so
/// evaluation is a plain linear solve; improvement switches a state only on
/// strictly better value, lowest action index first, which terminates and
/// ends in a policy whose Bellman residual is zero.
fn policy_iteration(quotient: &Quotient) -> (Vec<Rat>, MdScheduler, usize) {
    let n = quotient.mdp.num_states();
    let mut policy = MdScheduler { choice: vec![0; n] };
    let mut rounds = 0usize;
    loop {
        rounds += 1;
        let dtmc = induce_dtmc(&quotient.mdp, &policy).expect("policy picks enabled actions");
        let value = expected_total_reward(&dtmc, &quotient.rewards)
            .expect("every quotient policy is proper");
        let mut improved = false;
        for s in 0..n {
            let current = value[s].clone();
            let mut best_action = policy.choice[s];
            let mut best = current.clone();
            for a in 0..quotient.mdp.actions[s].len() {
                if a == policy.choice[s] {
                    continue;
                }
                let x = action_value(quotient, s, a, &value);
                if x > best {
                    best = x;
                    best_action = a;
                }
            }
            if best > current {
                policy.choice[s] = best_action;
                improved = true;
            }
        }
        if !improved {
            // Certificate: the fixed point satisfies the optimality equations.
            for s in 0..n {
                for a in 0..quotient.mdp.actions[s].len() {
                    debug_assert!(
                        action_value(quotient, s, a, &value) <= value[s],
                        "Bellman residual must vanish at optimum"
                    );
                }
            }
            return (value, policy, rounds);
        }
    }
}

/// One state's Bellman backup in integer form. With values stored as
/// numerators over 2^64, action `a`'s scaled sum is `Σ mult·x[succ]`; all of
/// a state's actions share one positive denominator, so the best action is
/// found by comparing those sums alone, and the rounded new value is a single
/// floor or ceiling division.
struct IntBackup {
    /// Per action: `(succ, p.numer · common/p.denom)` pairs.
    acts: Vec<Vec<(usize, BigInt)>>,
    /// Reward denominator.
    rd: BigInt,
    /// Reward numerator × common × 2^64.
    add: BigInt,
    /// Common transition denominator × reward denominator.
    div: BigInt,
}

impl IntBackup {
    /// Largest (or smallest) per-action scaled sum against `x`.
    fn best(&self, x: &[BigInt], maximize: bool) -> BigInt {
        let sums = self
            .acts
            .iter()
            .map(|tr| tr.iter().map(|(succ, m)| m * &x[*succ]).sum::<BigInt>());
        let best = if maximize { sums.max() } else { sums.min() };
        best.expect("validated model has enabled actions")
    }

    fn round_up(&self, sum: BigInt) -> BigInt {
        (sum * &self.rd + &self.add).div_ceil(&self.div)
    }

    fn round_down(&self, sum: BigInt) -> BigInt {
        (sum * &self.rd + &self.add).div_floor(&self.div)
    }
}

/// Integer backup tables for every state but the bottom one. With
/// `with_rewards` false the reward terms are zero (plain reachability).
fn int_backups(quotient: &Quotient, scale: &BigInt, with_rewards: bool) -> Vec<Option<IntBackup>> {
    (0..quotient.mdp.num_states())
        .map(|s| {
            if s == quotient.s_bot {
                return None;
            }
            let mut common = BigInt::one();
            for act in &quotient.mdp.actions[s] {
                for (_, p) in &act.transitions {
                    common = common.lcm(p.denom());
                }
            }
            let acts = quotient.mdp.actions[s]
                .iter()
                .map(|act| {
                    act.transitions
                        .iter()
                        .map(|(succ, p)| (*succ, p.numer() * (&common / p.denom())))
                        .collect()
                })
                .collect();
            let (rn, rd) = if with_rewards {
                let r = &quotient.rewards[s];
                (r.numer().clone(), r.denom().clone())
            } else {
                (BigInt::zero(), BigInt::one())
            };
            Some(IntBackup {
                acts,
                add: rn * &common * scale,
                div: &common * &rd,
                rd,
            })
        })
        .collect()
}

/// Smallest probability, over all states and all ways to resolve choices, of
/// reaching the bottom state within `n` steps — positive on a quotient, and
/// the handle for sound initial bounds: expected time to absorption is at
/// most `n / rho` under every policy. Computed with down-rounded synchronous
/// backups; should rounding flush everything to zero, exact backups redo it.
fn absorption_floor(quotient: &Quotient) -> Rat {
    let n = quotient.mdp.num_states();
    let scale: BigInt = BigInt::one() << 64u32;
    let backups = int_backups(quotient, &scale, false);
    let mut x = vec![BigInt::zero(); n];
    x[quotient.s_bot] = scale.clone();
    for _ in 0..n {
        let mut next = vec![BigInt::zero(); n];
        next[quotient.s_bot] = scale.clone();
        for s in 0..n {
            if let Some(b) = &backups[s] {
                next[s] = b.round_down(b.best(&x, false));
            }
        }
        x = next;
    }
    let least = x.into_iter().min().expect("nonempty quotient");
    if least > BigInt::zero() {
        return Rat::new(least, scale);
    }
    let rho = absorption_floor_exact(quotient);
    assert!(
        rho > Rat::zero(),
        "no end component besides bottom, so {n} min-steps reach it"
    );
    rho
}

fn absorption_floor_exact(quotient: &Quotient) -> Rat {
    let n = quotient.mdp.num_states();
    let mut x = vec![Rat::zero(); n];
    x[quotient.s_bot] = Rat::from_integer(1.into());
    for _ in 0..n {
        let mut next = vec![Rat::zero(); n];
        next[quotient.s_bot] = Rat::from_integer(1.into());
        for s in 0..n {
            if s == quotient.s_bot {
                continue;
            }
            let mut worst: Option<Rat> = None;
            for act in &quotient.mdp.actions[s] {
                let mut mass = Rat::zero();
                for (succ, p) in &act.transitions {
                    if !x[*succ].is_zero() {
                        mass += p * &x[*succ];
                    }
                }
                worst = Some(match worst {
                    Some(w) if w <= mass => w,
                    _ => mass,
                });
            }
            next[s] = worst.expect("validated model has enabled actions");
        }
        x = next;
    }
    x.into_iter().min().expect("nonempty quotient")
}

/// Interval value iteration for the maximum. Starts from bounds derived from
/// the absorption floor and sweeps both vectors in place with the max-Bellman
/// operator, rounding the upper vector up and the lower one down, until the
/// interval at `at` is narrow enough. In-place updates keep each vector on
/// its side of the optimum under any update order, because the operator is
/// monotone and the start vectors bound the optimum from above and below;
/// descending order makes value changes flow backwards through
/// breadth-first-numbered models in few sweeps.
fn interval_iteration(
    quotient: &Quotient,
    at: usize,
    cfg: &SolverConfig,
) -> Result<SolveOutcome, SolverError> {
    let n = quotient.mdp.num_states();
    let scale: BigInt = BigInt::one() << 64u32;
    let horizon = Rat::from_integer(n.into()) / absorption_floor(quotient);
    let top = quotient
        .rewards
        .iter()
        .max()
        .cloned()
        .unwrap_or_else(Rat::zero)
        .max(Rat::zero())
        * &horizon;
    let bottom = quotient
        .rewards
        .iter()
        .min()
        .cloned()
        .unwrap_or_else(Rat::zero)
        .min(Rat::zero())
        * &horizon;
    let mut upper = vec![(top.numer() * &scale).div_ceil(top.denom()); n];
    let mut lower = vec![(bottom.numer() * &scale).div_floor(bottom.denom()); n];
    upper[quotient.s_bot] = BigInt::zero();
    lower[quotient.s_bot] = BigInt::zero();

    let backups = int_backups(quotient, &scale, true);
    let tol_scaled = cfg.tolerance.numer() * &scale;
    let tol_den = cfg.tolerance.denom();

    for sweep in 1..=cfg.max_iterations {
        for s in (0..n).rev() {
            if let Some(b) = &backups[s] {
                upper[s] = b.round_up(b.best(&upper, true));
                lower[s] = b.round_down(b.best(&lower, true));
            }
        }
        if (&upper[at] - &lower[at]) * tol_den <= tol_scaled {
            return Ok(SolveOutcome {
                bounds: Bounds {
                    lower: Rat::new(lower[at].clone(), scale.clone()),
                    upper: Rat::new(upper[at].clone(), scale),
                },
                policy: None,
                iterations: sweep,
            });
        }
    }
    Err(SolverError::IterationCapExceeded {
        iterations: cfg.max_iterations,
        tolerance: fmt_rat(&cfg.tolerance),
        gap: fmt_rat(&Rat::new(&upper[at] - &lower[at], scale)),
    })
}
