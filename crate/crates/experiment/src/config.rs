//! Experiment configuration read from a TOML document.
//!
//! Every field is optional; omitted fields take the benchmark defaults
//! (19-state walk, α = 0.4, γ = 1, 200 episodes, 50 trials, 99% intervals).
//!
//! ```toml
//! strategies = ["qsigma(sigma=0)", "policy-atb"]
//! episodes = 200
//! trials = 50
//! seed = 0
//! gamma = 1.0
//! confidence = 0.99
//! interval = "normal"      # or "t"
//! q_init = 0.0
//! max_steps = 10000
//!
//! [environment]
//! name = "gridworld"       # "walk19", "walk" or "gridworld"
//! success_prob = 0.8
//!
//! [alpha]
//! schedule = "constant"    # or "polynomial"
//! alpha0 = 0.4
//!
//! [output]
//! csv = "curves.csv"
//! svg = "curves.svg"
//! ```

use std::path::PathBuf;

use atb_core::envs::{make_gridworld_with, make_random_walk, GridworldParams};
use atb_core::{CoefficientStrategy, Policy, StepsizeSchedule, TabularMdp};
use serde::Deserialize;

use crate::{ExperimentError, Result};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("malformed configuration: {0}")]
    Parse(String),

    #[error("{field}: {message}")]
    Field { field: String, message: String },
}

fn field_error(field: &str, message: impl Into<String>) -> ExperimentError {
    ConfigError::Field { field: field.to_string(), message: message.into() }.into()
}

/// Environment selection with its overridable constants.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvironmentConfig {
    RandomWalk { n_states: usize },
    Gridworld(GridworldParams),
}

impl EnvironmentConfig {
    pub fn name(&self) -> String {
        match self {
            EnvironmentConfig::RandomWalk { n_states: 19 } => "walk19".into(),
            EnvironmentConfig::RandomWalk { n_states } => format!("walk{n_states}"),
            EnvironmentConfig::Gridworld(_) => "gridworld".into(),
        }
    }

    /// Builds the MDP and its equiprobable evaluation policy.
    pub fn build(&self) -> Result<(TabularMdp, Policy)> {
        Ok(match self {
            EnvironmentConfig::RandomWalk { n_states } => make_random_walk(*n_states)?,
            EnvironmentConfig::Gridworld(params) => {
                let mdp = make_gridworld_with(params)?;
                let policy = Policy::uniform(mdp.num_states(), mdp.num_actions());
                (mdp, policy)
            }
        })
    }

    /// Names accepted in `[environment] name`, with descriptions.
    pub fn catalog() -> &'static [(&'static str, &'static str)] {
        &[
            ("walk19", "19-state deterministic random walk, rewards -1/+1 at the ends"),
            ("walk", "random walk with `n_states` (odd) non-terminal states"),
            ("gridworld", "4x3 stochastic gridworld (success_prob, step_reward, goal_reward, pit_reward)"),
        ]
    }
}

/// How confidence half-widths are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntervalKind {
    /// `z · s / √n`
    Normal,
    /// `t_{n−1} · s / √n`
    StudentT,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutputPaths {
    pub csv: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub environment: EnvironmentConfig,
    pub strategies: Vec<CoefficientStrategy>,
    pub alpha: StepsizeSchedule,
    pub gamma: f64,
    pub episodes: usize,
    pub trials: usize,
    pub base_seed: u64,
    pub confidence: f64,
    pub interval: IntervalKind,
    pub q_init: f64,
    pub max_steps: usize,
    pub output: OutputPaths,
}

pub const DEFAULT_STRATEGIES: [&str; 6] = [
    "qsigma(sigma=0)",
    "qsigma(sigma=0.5)",
    "qsigma(sigma=1)",
    "qsigma(decay=0.95)",
    "count-atb",
    "policy-atb",
];

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            environment: EnvironmentConfig::RandomWalk { n_states: 19 },
            strategies: DEFAULT_STRATEGIES.iter().map(|s| s.parse().expect("default strategies parse")).collect(),
            alpha: StepsizeSchedule::Constant(0.4),
            gamma: 1.0,
            episodes: 200,
            trials: 50,
            base_seed: 0,
            confidence: 0.99,
            interval: IntervalKind::Normal,
            q_init: 0.0,
            max_steps: 10_000,
            output: OutputPaths::default(),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    strategies: Option<Vec<String>>,
    episodes: Option<i64>,
    trials: Option<i64>,
    seed: Option<u64>,
    gamma: Option<f64>,
    confidence: Option<f64>,
    interval: Option<String>,
    q_init: Option<f64>,
    max_steps: Option<i64>,
    environment: Option<RawEnvironment>,
    alpha: Option<RawAlpha>,
    output: Option<RawOutput>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnvironment {
    name: Option<String>,
    n_states: Option<i64>,
    success_prob: Option<f64>,
    step_reward: Option<f64>,
    goal_reward: Option<f64>,
    pit_reward: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAlpha {
    schedule: Option<String>,
    alpha0: Option<f64>,
    exponent: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    csv: Option<PathBuf>,
    svg: Option<PathBuf>,
}

fn positive(field: &str, value: Option<i64>, default: usize) -> Result<usize> {
    match value {
        None => Ok(default),
        Some(v) if v >= 1 => Ok(v as usize),
        Some(v) => Err(field_error(field, format!("must be at least 1, got {v}"))),
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let defaults = ExperimentConfig::default();

    let strategies = match raw.strategies {
        None => defaults.strategies,
        Some(names) => {
            if names.is_empty() {
                return Err(field_error("strategies", "must list at least one strategy"));
            }
            let mut parsed: Vec<CoefficientStrategy> = Vec::with_capacity(names.len());
            for (i, name) in names.iter().enumerate() {
                let strategy: CoefficientStrategy =
                    name.parse().map_err(|e| field_error(&format!("strategies[{i}]"), format!("{e}")))?;
                if parsed.iter().any(|p| p.to_string() == strategy.to_string()) {
                    return Err(field_error(&format!("strategies[{i}]"), format!("duplicate strategy `{name}`")));
                }
                parsed.push(strategy);
            }
            parsed
        }
    };

    let gamma = raw.gamma.unwrap_or(defaults.gamma);
    if !(0.0..=1.0).contains(&gamma) {
        return Err(field_error("gamma", format!("must be in [0, 1], got {gamma}")));
    }
    let confidence = raw.confidence.unwrap_or(defaults.confidence);
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(field_error("confidence", format!("must be in (0, 1), got {confidence}")));
    }
    let interval = match raw.interval.as_deref() {
        None | Some("normal") => IntervalKind::Normal,
        Some("t") | Some("student-t") => IntervalKind::StudentT,
        Some(other) => return Err(field_error("interval", format!("expected \"normal\" or \"t\", got \"{other}\""))),
    };
    let q_init = raw.q_init.unwrap_or(defaults.q_init);
    if !q_init.is_finite() {
        return Err(field_error("q_init", "must be finite"));
    }

    let environment = parse_environment(raw.environment.unwrap_or_default())?;
    let alpha = parse_alpha(raw.alpha.unwrap_or_default())?;
    let output = raw
        .output
        .map(|o| OutputPaths { csv: o.csv, svg: o.svg })
        .unwrap_or_default();

    Ok(ExperimentConfig {
        environment,
        strategies,
        alpha,
        gamma,
        episodes: positive("episodes", raw.episodes, defaults.episodes)?,
        trials: positive("trials", raw.trials, defaults.trials)?,
        base_seed: raw.seed.unwrap_or(defaults.base_seed),
        confidence,
        interval,
        q_init,
        max_steps: positive("max_steps", raw.max_steps, defaults.max_steps)?,
        output,
    })
}

fn parse_environment(raw: RawEnvironment) -> Result<EnvironmentConfig> {
    let name = raw.name.as_deref().unwrap_or("walk19");
    let grid_keys = [
        ("environment.success_prob", raw.success_prob.is_some()),
        ("environment.step_reward", raw.step_reward.is_some()),
        ("environment.goal_reward", raw.goal_reward.is_some()),
        ("environment.pit_reward", raw.pit_reward.is_some()),
    ];
    match name {
        "walk19" | "walk" => {
            if let Some((field, _)) = grid_keys.iter().find(|(_, set)| *set) {
                return Err(field_error(field, format!("not a parameter of `{name}`")));
            }
            let default_n = 19;
            let n_states = positive("environment.n_states", raw.n_states, default_n)?;
            if name == "walk19" && n_states != 19 {
                return Err(field_error("environment.n_states", "walk19 has 19 states; use name = \"walk\""));
            }
            if n_states % 2 == 0 {
                return Err(field_error("environment.n_states", format!("must be odd, got {n_states}")));
            }
            Ok(EnvironmentConfig::RandomWalk { n_states })
        }
        "gridworld" => {
            if raw.n_states.is_some() {
                return Err(field_error("environment.n_states", "not a parameter of `gridworld`"));
            }
            let d = GridworldParams::default();
            let params = GridworldParams {
                success_prob: raw.success_prob.unwrap_or(d.success_prob),
                step_reward: raw.step_reward.unwrap_or(d.step_reward),
                goal_reward: raw.goal_reward.unwrap_or(d.goal_reward),
                pit_reward: raw.pit_reward.unwrap_or(d.pit_reward),
            };
            if !(0.0..=1.0).contains(&params.success_prob) {
                return Err(field_error("environment.success_prob", format!("must be in [0, 1], got {}", params.success_prob)));
            }
            Ok(EnvironmentConfig::Gridworld(params))
        }
        other => Err(field_error("environment.name", format!("unknown environment `{other}`"))),
    }
}

fn parse_alpha(raw: RawAlpha) -> Result<StepsizeSchedule> {
    match raw.schedule.as_deref().unwrap_or("constant") {
        "constant" => {
            if raw.exponent.is_some() {
                return Err(field_error("alpha.exponent", "only valid for the polynomial schedule"));
            }
            StepsizeSchedule::constant(raw.alpha0.unwrap_or(0.4))
                .map_err(|e| field_error("alpha.alpha0", e.to_string()))
        }
        "polynomial" => StepsizeSchedule::polynomial(raw.alpha0.unwrap_or(1.0), raw.exponent.unwrap_or(0.7))
            .map_err(|e| field_error("alpha", e.to_string())),
        other => Err(field_error("alpha.schedule", format!("expected \"constant\" or \"polynomial\", got \"{other}\""))),
    }
}
