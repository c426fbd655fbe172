use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use atb_core::CoefficientStrategy;
use atb_experiment::config::EnvironmentConfig;
use atb_experiment::csv_out::write_csv;
use atb_experiment::svg::render_svg;
use atb_experiment::verify::{run_verification, VerifyOptions};
use atb_experiment::{aggregate, parse_config, run_experiment_with, Execution, ExperimentConfig};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "atb", version, about = "Tabular TD policy evaluation with adaptive tree backups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and export aggregate RMS curves
    Run {
        /// TOML configuration; defaults apply when omitted
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_csv: Option<PathBuf>,
        #[arg(long)]
        out_svg: Option<PathBuf>,
        /// Override the number of trials
        #[arg(long)]
        trials: Option<usize>,
        /// Override the base seed
        #[arg(long)]
        seed: Option<u64>,
        /// Run trials on one thread
        #[arg(long)]
        serial: bool,
    },
    /// Check the variance, covariance and operator identities numerically
    Verify {
        #[arg(long, default_value_t = 100)]
        sweeps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Episodes for the convergence corroboration (0 skips it)
        #[arg(long, default_value_t = 20_000)]
        episodes: usize,
    },
    /// List the accepted strategy names
    ListStrategies,
    /// List the available environments
    ListEnvs,
}

fn load_config(path: Option<&PathBuf>) -> anyhow::Result<ExperimentConfig> {
    let text = match path {
        Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => String::new(),
    };
    Ok(parse_config(&text)?)
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Run { config, out_csv, out_svg, trials, seed, serial } => {
            let mut cfg = load_config(config.as_ref())?;
            if let Some(t) = trials {
                if t == 0 {
                    bail!("--trials must be at least 1");
                }
                cfg.trials = t;
            }
            if let Some(s) = seed {
                cfg.base_seed = s;
            }
            let out_csv = out_csv.or(cfg.output.csv.clone());
            let out_svg = out_svg.or(cfg.output.svg.clone());

            let execution = if serial { Execution::Serial } else { Execution::Parallel };
            let result = run_experiment_with(&cfg, execution)?;
            eprintln!(
                "{}: {} strategies x {} trials x {} episodes in {:.2?} (initial RMS {:.4})",
                result.environment,
                result.runs.len(),
                cfg.trials,
                cfg.episodes,
                result.duration,
                result.initial_rms
            );

            if cfg.trials < 2 {
                for run in &result.runs {
                    println!("{}\tfinal_rms={:.6}", run.label, run.rms[0].last().copied().unwrap_or(f64::NAN));
                }
                if out_csv.is_some() || out_svg.is_some() {
                    bail!("confidence intervals need at least 2 trials; CSV/SVG output not written");
                }
                return Ok(true);
            }

            let curves = aggregate(&result, cfg.confidence, cfg.interval)?;
            for c in &curves.curves {
                println!("{}\tfinal_rms={:.6}\tci_halfwidth={:.6}", c.label, c.final_mean(), c.final_half_width());
            }
            if let Some(path) = out_csv {
                write_csv(&curves, &path).with_context(|| format!("writing {}", path.display()))?;
            }
            if let Some(path) = out_svg {
                render_svg(&curves, &path).with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(true)
        }
        Command::Verify { sweeps, seed, episodes } => {
            let options = VerifyOptions { sweeps, seed, convergence_episodes: (episodes > 0).then_some(episodes) };
            let lines = run_verification(&options)?;
            for line in &lines {
                println!("{line}");
            }
            let failed = lines.iter().filter(|l| !l.passed).count();
            println!("# {} checks, {} failed", lines.len(), failed);
            if options.convergence_episodes.is_some() {
                println!("# convergence lines corroborate almost-sure convergence empirically; they do not prove it");
            }
            Ok(failed == 0)
        }
        Command::ListStrategies => {
            for (name, description) in CoefficientStrategy::catalog() {
                println!("{name:<30}{description}");
            }
            Ok(true)
        }
        Command::ListEnvs => {
            for (name, description) in EnvironmentConfig::catalog() {
                println!("{name:<12}{description}");
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
