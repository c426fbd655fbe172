//! Trial execution.
//!
//! Each `(strategy, trial)` pair is an independent work unit with its own
//! seed and learner state. Results are written to fixed slots, so serial
//! and parallel execution produce identical output.

use std::time::{Duration, Instant};

use atb_core::learner::{rms_error, run_episode};
use atb_core::mdp::exact_q;
use atb_core::{CoefficientStrategy, LearnerSettings, LearnerState, Policy, QTable, TabularMdp};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::Result;

/// RMS curves for one strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyRun {
    pub strategy: CoefficientStrategy,
    pub label: String,
    /// Seed used for each trial.
    pub seeds: Vec<u64>,
    /// `rms[trial][episode]`, measured after each episode.
    pub rms: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub environment: String,
    /// RMS error of the initial table, before any episode.
    pub initial_rms: f64,
    pub runs: Vec<StrategyRun>,
    pub duration: Duration,
}

impl RunResult {
    pub fn run(&self, label: &str) -> Option<&StrategyRun> {
        self.runs.iter().find(|r| r.label == label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Serial,
    Parallel,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable 64-bit mix of `(base_seed, strategy_index, trial_index)`.
pub fn trial_seed(base_seed: u64, strategy_index: usize, trial_index: usize) -> u64 {
    let h = splitmix64(base_seed);
    let h = splitmix64(h ^ (strategy_index as u64).wrapping_mul(0xd6e8_feb8_6659_fd93));
    splitmix64(h ^ (trial_index as u64).wrapping_mul(0xa076_1d64_78bd_642f))
}

/// Stable 64-bit mix of a base seed and an instance index.
pub fn instance_seed(base_seed: u64, index: usize) -> u64 {
    splitmix64(splitmix64(base_seed) ^ index as u64)
}

struct Problem<'a> {
    mdp: &'a TabularMdp,
    policy: &'a Policy,
    reference: &'a QTable,
}

fn run_trial(problem: &Problem<'_>, config: &ExperimentConfig, strategy: CoefficientStrategy, seed: u64) -> Result<Vec<f64>> {
    let mut settings = LearnerSettings::new(strategy, config.alpha, config.gamma);
    settings.max_steps = config.max_steps;
    let mut state = LearnerState::new(problem.mdp, config.q_init, seed);
    let mut curve = Vec::with_capacity(config.episodes);
    for _ in 0..config.episodes {
        run_episode(problem.mdp, problem.policy, &settings, &mut state)?;
        curve.push(rms_error(&state.q, problem.reference)?);
    }
    Ok(curve)
}

/// Runs every strategy for every trial in parallel.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunResult> {
    run_experiment_with(config, Execution::Parallel)
}

pub fn run_experiment_with(config: &ExperimentConfig, execution: Execution) -> Result<RunResult> {
    let started = Instant::now();
    let (mdp, policy) = config.environment.build()?;
    let reference = exact_q(&mdp, &policy, config.gamma)?;
    let initial_rms = rms_error(&QTable::new(&mdp, config.q_init), &reference)?;
    let problem = Problem { mdp: &mdp, policy: &policy, reference: &reference };

    let units: Vec<(usize, usize)> = (0..config.strategies.len())
        .flat_map(|k| (0..config.trials).map(move |i| (k, i)))
        .collect();
    let work = |&(k, i): &(usize, usize)| {
        run_trial(&problem, config, config.strategies[k], trial_seed(config.base_seed, k, i))
    };
    let curves: Vec<Vec<f64>> = match execution {
        Execution::Serial => units.iter().map(work).collect::<Result<_>>()?,
        Execution::Parallel => units.par_iter().map(work).collect::<Result<_>>()?,
    };

    let mut curves = curves.into_iter();
    let runs = config
        .strategies
        .iter()
        .enumerate()
        .map(|(k, &strategy)| StrategyRun {
            strategy,
            label: strategy.to_string(),
            seeds: (0..config.trials).map(|i| trial_seed(config.base_seed, k, i)).collect(),
            rms: curves.by_ref().take(config.trials).collect(),
        })
        .collect();

    Ok(RunResult { environment: config.environment.name(), initial_rms, runs, duration: started.elapsed() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn seeds_are_distinct_and_stable() {
        let a = trial_seed(7, 0, 0);
        assert_eq!(a, trial_seed(7, 0, 0));
        assert_ne!(a, trial_seed(7, 1, 0));
        assert_ne!(a, trial_seed(7, 0, 1));
        assert_ne!(a, trial_seed(8, 0, 0));
        assert_ne!(trial_seed(0, 1, 0), trial_seed(0, 0, 1));
    }

    #[test]
    fn one_by_one_shape() {
        let cfg = parse_config("episodes = 1\ntrials = 1\nstrategies = [\"sarsa\"]").unwrap();
        let result = run_experiment(&cfg).unwrap();
        assert_eq!(result.runs.len(), 1);
        assert_eq!(result.runs[0].rms.len(), 1);
        assert_eq!(result.runs[0].rms[0].len(), 1);
    }

    #[test]
    fn adding_a_strategy_keeps_other_streams() {
        let one = parse_config("episodes = 5\ntrials = 2\nstrategies = [\"sarsa\"]").unwrap();
        let two = parse_config("episodes = 5\ntrials = 2\nstrategies = [\"sarsa\", \"count-atb\"]").unwrap();
        let a = run_experiment(&one).unwrap();
        let b = run_experiment(&two).unwrap();
        assert_eq!(a.runs[0], b.runs[0]);
    }

    #[test]
    fn serial_matches_parallel() {
        let cfg = parse_config("episodes = 20\ntrials = 4").unwrap();
        let serial = run_experiment_with(&cfg, Execution::Serial).unwrap();
        let parallel = run_experiment_with(&cfg, Execution::Parallel).unwrap();
        assert_eq!(serial.runs, parallel.runs);
    }
}
