//! The `verify` report: exact identity sweeps over random MDPs, oracle
//! agreement on the benchmark environments, and a convergence
//! corroboration run.

use std::fmt;

use atb_core::analysis::{
    convergence_stepsize, convergence_suite, count_bias_instance,
    frozen_count_coefficients, random_instance, sweep_instance, variance_profile, IDENTITY_TOLERANCE,
    SIGMA_GRID,
};
use atb_core::envs::{make_gridworld, make_random_walk};
use atb_core::mdp::{bellman_apply, exact_q, iterate_bellman};
use atb_core::{CoefficientStrategy, Policy, QTable, SigmaSchedule, TabularMdp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::runner::instance_seed;
use crate::Result;

/// One line of the report.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub name: String,
    pub seed: Option<u64>,
    pub residual: f64,
    pub passed: bool,
}

impl fmt::Display for CheckLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let seed = self.seed.map_or_else(|| "-".to_string(), |s| s.to_string());
        write!(
            f,
            "{}\tseed={}\tresidual={:.3e}\t{}",
            self.name,
            seed,
            self.residual,
            if self.passed { "PASS" } else { "FAIL" }
        )
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub sweeps: usize,
    pub seed: u64,
    /// Episodes for the convergence corroboration; `None` skips it.
    pub convergence_episodes: Option<usize>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { sweeps: 100, seed: 0, convergence_episodes: Some(20_000) }
    }
}

/// Exact identity checks on `sweeps` random instances, four lines each.
pub fn identity_sweep(sweeps: usize, seed: u64) -> Result<Vec<CheckLine>> {
    let per_instance: Vec<Vec<CheckLine>> = (0..sweeps)
        .into_par_iter()
        .map(|i| {
            let s = instance_seed(seed, i);
            let inst = random_instance(s);
            let r = sweep_instance(&inst)?;
            let mono_violation = monotonicity_violation(&inst.mdp, &inst.policy, &inst.q, inst.gamma)?;
            let line = |name: &str, residual: f64, passed: bool| CheckLine {
                name: name.to_string(),
                seed: Some(s),
                residual,
                passed,
            };
            Ok(vec![
                line("variance_identity", r.variance_identity, r.variance_identity <= IDENTITY_TOLERANCE),
                line("covariance_identity", r.covariance_identity, r.covariance_identity <= IDENTITY_TOLERANCE),
                line("expected_operator", r.expected_operator, r.expected_operator <= IDENTITY_TOLERANCE),
                line("sigma_monotonicity", mono_violation, r.monotone),
            ])
        })
        .collect::<Result<_>>()?;
    Ok(per_instance.into_iter().flatten().collect())
}

/// Largest decrease of the target variance along the σ grid, or below the
/// σ=0 value, over all pairs. Zero when the profile is monotone.
fn monotonicity_violation(mdp: &TabularMdp, policy: &Policy, q: &QTable, gamma: f64) -> Result<f64> {
    let mut worst = 0.0_f64;
    for s in mdp.non_terminal_states() {
        for a in 0..mdp.num_actions() {
            let profile = variance_profile(mdp, policy, q, gamma, s, a, &SIGMA_GRID)?;
            for w in profile.windows(2) {
                worst = worst.max(w[0] - w[1]);
            }
            for v in &profile {
                worst = worst.max(profile[0] - v);
            }
        }
    }
    Ok(worst)
}

/// `‖iterated Bellman − linear solve‖_∞` at γ = 1 for one environment.
pub fn oracle_agreement(mdp: &TabularMdp, policy: &Policy) -> Result<f64> {
    let exact = exact_q(mdp, policy, 1.0)?;
    let (iterated, _) = iterate_bellman(mdp, policy, 1.0, &QTable::new(mdp, 0.0), 1e-14, 1_000_000)?;
    Ok(exact.max_abs_diff(&iterated)?)
}

/// Largest observed `‖T q1 − T q2‖_∞ / ‖q1 − q2‖_∞` over random pairs.
pub fn contraction_ratio(mdp: &TabularMdp, policy: &Policy, gamma: f64, pairs: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..pairs {
        let q1 = QTable::from_fn(mdp, |_, _| rng.random_range(-10.0..10.0));
        let q2 = QTable::from_fn(mdp, |_, _| rng.random_range(-10.0..10.0));
        let num = bellman_apply(mdp, policy, gamma, &q1)?.max_abs_diff(&bellman_apply(mdp, policy, gamma, &q2)?)?;
        let den = q1.max_abs_diff(&q2)?;
        if den > 0.0 {
            worst = worst.max(num / den);
        }
    }
    Ok(worst)
}

/// Distance between the frozen-count fixed point and `Q^π`, plus the
/// agreement between iterating the frozen operator and solving it.
pub fn count_bias() -> Result<(f64, f64)> {
    let inst = count_bias_instance();
    let coeffs = frozen_count_coefficients(&inst.policy, &inst.counts)?;
    let solved = exact_q(&inst.mdp, &coeffs, inst.gamma)?;
    let (iterated, _) = iterate_bellman(&inst.mdp, &coeffs, inst.gamma, &QTable::new(&inst.mdp, 0.0), 1e-14, 1_000_000)?;
    let truth = exact_q(&inst.mdp, &inst.policy, inst.gamma)?;
    Ok((iterated.max_abs_diff(&truth)?, iterated.max_abs_diff(&solved)?))
}

/// Strategies exercised by the convergence corroboration.
pub fn convergence_strategies() -> Vec<CoefficientStrategy> {
    vec![
        CoefficientStrategy::QSigma(SigmaSchedule::Fixed(0.0)),
        CoefficientStrategy::QSigma(SigmaSchedule::Fixed(0.5)),
        CoefficientStrategy::QSigma(SigmaSchedule::Fixed(1.0)),
        CoefficientStrategy::CountBased,
        CoefficientStrategy::PolicyBased,
    ]
}

/// Final RMS per strategy on the 5-state walk with `α = n^(−0.7)`, γ = 1.
pub fn convergence_runs(episodes: usize, seed: u64) -> Result<Vec<(CoefficientStrategy, f64)>> {
    let (mdp, policy) = make_random_walk(5)?;
    convergence_strategies()
        .into_par_iter()
        .enumerate()
        .map(|(k, strategy)| {
            let rms = convergence_suite(&mdp, &policy, strategy, convergence_stepsize(), 1.0, episodes, instance_seed(seed, k))?;
            Ok((strategy, rms))
        })
        .collect()
}

pub const CONVERGENCE_THRESHOLD: f64 = 0.05;
pub const ORACLE_TOLERANCE: f64 = 1e-8;
pub const COUNT_BIAS_THRESHOLD: f64 = 0.01;

pub fn run_verification(options: &VerifyOptions) -> Result<Vec<CheckLine>> {
    let mut lines = identity_sweep(options.sweeps, options.seed)?;
    let fixed = |name: String, residual: f64, passed: bool| CheckLine { name, seed: None, residual, passed };

    let (walk, walk_policy) = make_random_walk(19)?;
    let grid = make_gridworld();
    let grid_policy = Policy::uniform(grid.num_states(), grid.num_actions());
    for (name, mdp, policy) in [("walk19", &walk, &walk_policy), ("gridworld", &grid, &grid_policy)] {
        let diff = oracle_agreement(mdp, policy)?;
        lines.push(fixed(format!("oracle_agreement[{name}]"), diff, diff <= ORACLE_TOLERANCE));
    }

    let ratio = contraction_ratio(&grid, &grid_policy, 0.9, 100, options.seed)?;
    lines.push(CheckLine {
        name: "contraction[gridworld,gamma=0.9]".into(),
        seed: Some(options.seed),
        residual: ratio,
        passed: ratio <= 0.9 + 1e-12,
    });

    let (bias, solve_gap) = count_bias()?;
    lines.push(fixed("count_fixed_point_bias".into(), bias, bias > COUNT_BIAS_THRESHOLD && solve_gap <= ORACLE_TOLERANCE));

    if let Some(episodes) = options.convergence_episodes {
        for (strategy, rms) in convergence_runs(episodes, options.seed)? {
            lines.push(CheckLine {
                name: format!("convergence_corroboration[{strategy}]"),
                seed: Some(options.seed),
                residual: rms,
                passed: rms < CONVERGENCE_THRESHOLD,
            });
        }
    }
    Ok(lines)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_format() {
        let line = CheckLine { name: "variance_identity".into(), seed: Some(3), residual: 1.5e-17, passed: true };
        assert_eq!(line.to_string(), "variance_identity\tseed=3\tresidual=1.500e-17\tPASS");
        let line = CheckLine { name: "x".into(), seed: None, residual: 0.2, passed: false };
        assert_eq!(line.to_string(), "x\tseed=-\tresidual=2.000e-1\tFAIL");
    }

    #[test]
    fn small_report_passes() {
        let lines = run_verification(&VerifyOptions { sweeps: 5, seed: 1, convergence_episodes: None }).unwrap();
        assert_eq!(lines.len(), 5 * 4 + 4);
        assert!(lines.iter().all(|l| l.passed), "{lines:#?}");
    }
}
