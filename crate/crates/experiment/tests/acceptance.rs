//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per
//! criterion, and exits nonzero if any fails.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use atb_core::analysis::{
    count_bias_instance, frozen_count_coefficients, random_instance, sweep_instance, IDENTITY_TOLERANCE,
};
use atb_core::envs::{make_gridworld, make_random_walk};
use atb_core::mdp::{exact_q, iterate_bellman};
use atb_core::strategy::CoefficientContext;
use atb_core::{CoefficientStrategy, Policy, QTable, SigmaSchedule};
use atb_experiment::aggregate::StrategyCurve;
use atb_experiment::runner::instance_seed;
use atb_experiment::verify::{contraction_ratio, convergence_runs, oracle_agreement};
use atb_experiment::{aggregate, parse_config, run_experiment, AggregateCurve, EnvironmentConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SWEEP_INSTANCES: usize = 200;
const SWEEP_SEED: u64 = 2024;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn sweep() -> Vec<atb_core::analysis::SweepResiduals> {
    (0..SWEEP_INSTANCES)
        .map(|i| sweep_instance(&random_instance(instance_seed(SWEEP_SEED, i))).expect("sweep instance"))
        .collect()
}

fn criterion_variance_identity() -> Outcome {
    let started = Instant::now();
    let worst = sweep().iter().map(|r| r.variance_identity).fold(0.0, f64::max);
    let elapsed = started.elapsed();
    outcome(
        worst <= IDENTITY_TOLERANCE && elapsed < Duration::from_secs(5),
        format!("{SWEEP_INSTANCES} instances, max residual {worst:.3e} (<= 1e-10), {elapsed:.2?} (< 5 s)"),
    )
}

fn criterion_covariance_identity() -> Outcome {
    let worst = sweep().iter().map(|r| r.covariance_identity).fold(0.0, f64::max);
    outcome(worst <= IDENTITY_TOLERANCE, format!("max |Cov - Var| {worst:.3e} (<= 1e-10)"))
}

fn criterion_expected_operator() -> Outcome {
    let worst = sweep().iter().map(|r| r.expected_operator).fold(0.0, f64::max);
    outcome(worst <= IDENTITY_TOLERANCE, format!("max |E[target] - T q| {worst:.3e} (<= 1e-10) over sigma grid"))
}

fn criterion_monotone_variance() -> Outcome {
    let results = sweep();
    let failures = results.iter().filter(|r| !r.monotone).count();
    outcome(failures == 0, format!("{failures} of {} instances non-monotone on 5-point grid", results.len()))
}

fn criterion_oracles() -> Outcome {
    let (walk, walk_pi) = make_random_walk(19).unwrap();
    let grid = make_gridworld();
    let grid_pi = Policy::uniform(grid.num_states(), grid.num_actions());
    let walk_gap = oracle_agreement(&walk, &walk_pi).unwrap();
    let grid_gap = oracle_agreement(&grid, &grid_pi).unwrap();
    let ratio = contraction_ratio(&grid, &grid_pi, 0.9, 100, 7).unwrap();
    let walk_ratio = contraction_ratio(&walk, &walk_pi, 0.9, 100, 8).unwrap();
    outcome(
        walk_gap <= 1e-8 && grid_gap <= 1e-8 && ratio <= 0.9 && walk_ratio <= 0.9,
        format!(
            "iterate vs solve: walk19 {walk_gap:.2e}, gridworld {grid_gap:.2e} (<= 1e-8); contraction ratio gridworld {ratio:.6}, walk19 {walk_ratio:.6} (<= 0.9)"
        ),
    )
}

fn criterion_convergence() -> Outcome {
    let started = Instant::now();
    let runs = convergence_runs(20_000, 11).unwrap();
    let elapsed = started.elapsed();
    let worst = runs.iter().map(|(_, r)| *r).fold(0.0, f64::max);
    let listing: Vec<String> = runs.iter().map(|(s, r)| format!("{s}={r:.4}")).collect();
    outcome(
        worst < 0.05 && elapsed < Duration::from_secs(60),
        format!("walk5, alpha = n^-0.7, 20000 episodes: {} (< 0.05), {elapsed:.2?} (< 60 s)", listing.join(" ")),
    )
}

/// `a ≤ b`, treating a gap within one confidence half-width as a tie.
fn no_worse(curves: &AggregateCurve, a: &str, b: &str) -> (bool, String) {
    let (ca, cb): (&StrategyCurve, &StrategyCurve) = (curves.curve(a).unwrap(), curves.curve(b).unwrap());
    let tolerance = ca.final_half_width().max(cb.final_half_width());
    let ok = ca.final_mean() <= cb.final_mean() + tolerance;
    (ok, format!("{a} {:.4} <= {b} {:.4} (+{tolerance:.4})", ca.final_mean(), cb.final_mean()))
}

fn experiment_curves(env: &str) -> AggregateCurve {
    let cfg = parse_config(&format!("[environment]\nname = \"{env}\"\n")).unwrap();
    assert_eq!((cfg.episodes, cfg.trials, cfg.gamma), (200, 50, 1.0));
    let result = run_experiment(&cfg).unwrap();
    aggregate(&result, cfg.confidence, cfg.interval).unwrap()
}

fn criterion_experiments() -> Outcome {
    let started = Instant::now();
    let mut passed = true;
    let mut notes = Vec::new();
    for env in ["walk19", "gridworld"] {
        let curves = experiment_curves(env);
        let mut checks = vec![
            ("a", no_worse(&curves, "qsigma(sigma=0)", "qsigma(sigma=0.5)")),
            ("a", no_worse(&curves, "qsigma(sigma=0.5)", "qsigma(sigma=1)")),
            ("b", no_worse(&curves, "policy-atb", "count-atb")),
            ("c", no_worse(&curves, "policy-atb", "qsigma(decay=0.95)")),
        ];
        if env == "gridworld" {
            checks.push(("d", no_worse(&curves, "count-atb", "qsigma(sigma=1)")));
        } else {
            let count = curves.curve("count-atb").unwrap();
            let policy = curves.curve("policy-atb").unwrap();
            let n = count.mean.len();
            let tail = n - n / 4;
            let above = (tail..n).all(|e| count.mean[e] > policy.mean[e] + policy.half_width[e]);
            checks.push((
                "e",
                (
                    above,
                    format!(
                        "count-atb above policy-atb over episodes {}..={n} (tail means {:.4} vs {:.4})",
                        tail + 1,
                        count.tail_mean(n / 4),
                        policy.tail_mean(n / 4)
                    ),
                ),
            ));
        }
        for (tag, (ok, text)) in checks {
            passed &= ok;
            notes.push(format!("{env}({tag}) {} {text}", if ok { "ok" } else { "VIOLATED" }));
        }
    }
    let elapsed = started.elapsed();
    passed &= elapsed < Duration::from_secs(120);
    notes.push(format!("{elapsed:.2?} (< 120 s)"));
    outcome(passed, notes.join("; "))
}

fn criterion_count_bias() -> Outcome {
    let inst = count_bias_instance();
    let coeffs = frozen_count_coefficients(&inst.policy, &inst.counts).unwrap();
    let (iterated, _) =
        iterate_bellman(&inst.mdp, &coeffs, inst.gamma, &QTable::new(&inst.mdp, 0.0), 1e-14, 1_000_000).unwrap();
    let solved = exact_q(&inst.mdp, &coeffs, inst.gamma).unwrap();
    let truth = exact_q(&inst.mdp, &inst.policy, inst.gamma).unwrap();
    let gap = iterated.max_abs_diff(&solved).unwrap();
    let bias = iterated.max_abs_diff(&truth).unwrap();
    outcome(
        bias > 0.01 && gap <= 1e-8,
        format!("frozen counts 9:1, ||fixed point - Q^pi|| = {bias:.4} (> 0.01); iterate vs solve {gap:.2e}"),
    )
}

fn random_strategy(rng: &mut ChaCha8Rng) -> CoefficientStrategy {
    match rng.random_range(0..7) {
        0 => CoefficientStrategy::QSigma(SigmaSchedule::Fixed(rng.random_range(0.0..=1.0))),
        1 => CoefficientStrategy::QSigma(
            SigmaSchedule::exponential(rng.random_range(0.0..=1.0), rng.random_range(0.01..=1.0)).unwrap(),
        ),
        2 => CoefficientStrategy::CountBased,
        3 => CoefficientStrategy::PolicyBased,
        4 => CoefficientStrategy::ExpectedSarsa,
        5 => CoefficientStrategy::Sarsa,
        _ => CoefficientStrategy::TreeBackup,
    }
}

fn criterion_simplex() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let invocations = 100_000;
    let mut worst_sum = 0.0_f64;
    let mut min_entry = f64::INFINITY;
    for _ in 0..invocations {
        let n = rng.random_range(1..=8);
        let raw: Vec<f64> = (0..n)
            .map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random::<f64>() })
            .collect();
        let total: f64 = raw.iter().sum();
        let policy: Vec<f64> = if total > 0.0 {
            raw.iter().map(|x| x / total).collect()
        } else {
            let mut one_hot = vec![0.0; n];
            one_hot[rng.random_range(0..n)] = 1.0;
            one_hot
        };
        let counts: Vec<u64> = (0..n).map(|_| if rng.random_bool(0.4) { 0 } else { rng.random_range(1..1000) }).collect();
        let ctx = CoefficientContext {
            policy_row: &policy,
            counts_row: &counts,
            a_next: Some(rng.random_range(0..n)),
            episode_index: rng.random_range(0..500),
        };
        let c = random_strategy(&mut rng).coefficients(&ctx).unwrap();
        worst_sum = worst_sum.max((c.iter().sum::<f64>() - 1.0).abs());
        min_entry = min_entry.min(c.iter().copied().fold(f64::INFINITY, f64::min));
    }
    outcome(
        worst_sum <= 1e-12 && min_entry >= 0.0,
        format!("{invocations} invocations, max |sum - 1| {worst_sum:.2e} (<= 1e-12), min entry {min_entry:.2e} (>= 0)"),
    )
}

fn criterion_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("experiment.toml");
    std::fs::write(&config, "seed = 123\n[environment]\nname = \"gridworld\"\n").unwrap();
    let run = |name: &str, serial: bool| -> Vec<u8> {
        let out = dir.path().join(name);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_atb"));
        cmd.arg("run").arg("--config").arg(&config).arg("--out-csv").arg(&out);
        if serial {
            cmd.arg("--serial");
        }
        let status = cmd.output().unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        std::fs::read(out).unwrap()
    };
    let first = run("a.csv", false);
    let second = run("b.csv", false);
    let serial = run("c.csv", true);
    outcome(
        !first.is_empty() && first == second && first == serial,
        format!("{} CSV bytes; repeat identical: {}; serial == parallel: {}", first.len(), first == second, first == serial),
    )
}

fn main() -> ExitCode {
    // the environment names used above must stay addressable from configs
    assert!(EnvironmentConfig::catalog().iter().any(|(n, _)| *n == "gridworld"));

    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("1 variance identity", criterion_variance_identity),
        ("2 covariance identity", criterion_covariance_identity),
        ("3 sigma-independent expected update", criterion_expected_operator),
        ("4 variance minimal at sigma=0, nondecreasing", criterion_monotone_variance),
        ("5 oracle agreement and contraction", criterion_oracles),
        ("6 convergence corroboration", criterion_convergence),
        ("7 experiment reproduction (ordinal)", criterion_experiments),
        ("8 count-based fixed-point bias", criterion_count_bias),
        ("9 simplex property", criterion_simplex),
        ("10 determinism", criterion_determinism),
    ];
    let mut failures = 0;
    for (name, check) in criteria {
        let result = check();
        if !result.passed {
            failures += 1;
        }
        println!("[{}] criterion {name}: {}", if result.passed { "PASS" } else { "FAIL" }, result.detail);
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
