//! Exact one-step target distributions and the numerical checks built on
//! them.
//!
//! For a fixed `(s, a)` the Q(σ) target
//! `r + γ (σ Q(s',a') + (1−σ) Σ_b π(b|s') Q(s',b))` takes finitely many
//! values, one per successor pair `(s', a')`. Enumerating them gives exact
//! means, variances and covariances, so the algebraic identities relating
//! σ, Sarsa and Expected Sarsa can be checked to rounding error instead of
//! sampling error.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::learner::{rms_error, run_episode};
use crate::mdp::{bellman_apply, check_gamma, dot, exact_q};
use crate::{
    CoefficientStrategy, Error, LearnerSettings, LearnerState, Policy, QTable, Result,
    StepsizeSchedule, TabularMdp,
};

/// Tolerance used by the exact identity checks.
pub const IDENTITY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub prob: f64,
    pub value: f64,
}

/// A finite distribution of target values.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetDistribution {
    pub atoms: Vec<Atom>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
}

impl TargetDistribution {
    pub fn total_probability(&self) -> f64 {
        self.atoms.iter().map(|a| a.prob).sum()
    }

    pub fn moments(&self) -> Moments {
        moments(self)
    }
}

/// Weighted mean and variance (two-pass).
pub fn moments(dist: &TargetDistribution) -> Moments {
    let mean: f64 = dist.atoms.iter().map(|a| a.prob * a.value).sum();
    let variance: f64 = dist
        .atoms
        .iter()
        .map(|a| a.prob * (a.value - mean) * (a.value - mean))
        .sum();
    Moments { mean, variance: variance.max(0.0) }
}

/// Sarsa and Expected Sarsa targets for the same successor outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
struct JointAtom {
    prob: f64,
    sampled: f64,
    expected: f64,
}

fn check_pair(mdp: &TabularMdp, policy: &Policy, q: &QTable, s: usize, a: usize) -> Result<()> {
    if policy.num_states() != mdp.num_states()
        || policy.num_actions() != mdp.num_actions()
        || q.num_states() != mdp.num_states()
        || q.num_actions() != mdp.num_actions()
    {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", mdp.num_states(), mdp.num_actions()),
            actual: format!("policy {}x{}, q {}x{}", policy.num_states(), policy.num_actions(), q.num_states(), q.num_actions()),
        });
    }
    if s >= mdp.num_states() || a >= mdp.num_actions() {
        return Err(Error::param("state", format!("pair ({s}, {a}) out of range")));
    }
    if mdp.is_terminal(s) {
        return Err(Error::TerminalState(s));
    }
    Ok(())
}

/// All successor outcomes with positive probability. A terminal successor
/// contributes a single atom.
fn enumerate_joint(
    mdp: &TabularMdp,
    policy: &Policy,
    q: &QTable,
    gamma: f64,
    s: usize,
    a: usize,
) -> Result<Vec<JointAtom>> {
    check_pair(mdp, policy, q, s, a)?;
    let mut atoms = Vec::new();
    for (next, &p) in mdp.transition_row(s, a).iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let r = mdp.reward(s, a, next);
        if mdp.is_terminal(next) {
            atoms.push(JointAtom { prob: p, sampled: r, expected: r });
            continue;
        }
        let expected = r + gamma * dot(policy.row(next), q.row(next));
        for (a_next, &pa) in policy.row(next).iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            atoms.push(JointAtom { prob: p * pa, sampled: r + gamma * q.get(next, a_next), expected });
        }
    }
    Ok(atoms)
}

/// Exact distribution of the Q(σ) target for the pair `(s, a)`.
pub fn enumerate_target(
    mdp: &TabularMdp,
    policy: &Policy,
    q: &QTable,
    gamma: f64,
    s: usize,
    a: usize,
    sigma: f64,
) -> Result<TargetDistribution> {
    check_pair(mdp, policy, q, s, a)?;
    let mut atoms = Vec::new();
    for (next, &p) in mdp.transition_row(s, a).iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let r = mdp.reward(s, a, next);
        if mdp.is_terminal(next) {
            atoms.push(Atom { prob: p, value: r });
            continue;
        }
        let expectation = dot(policy.row(next), q.row(next));
        for (a_next, &pa) in policy.row(next).iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            let backup = sigma * q.get(next, a_next) + (1.0 - sigma) * expectation;
            atoms.push(Atom { prob: p * pa, value: r + gamma * backup });
        }
    }
    Ok(TargetDistribution { atoms })
}

fn target_variance(
    mdp: &TabularMdp,
    policy: &Policy,
    q: &QTable,
    gamma: f64,
    s: usize,
    a: usize,
    sigma: f64,
) -> Result<f64> {
    Ok(enumerate_target(mdp, policy, q, gamma, s, a, sigma)?.moments().variance)
}

/// `|Var_σ − (Var_0 + σ² (Var_1 − Var_0))|`
pub fn check_variance_identity(
    mdp: &TabularMdp,
    policy: &Policy,
    q: &QTable,
    gamma: f64,
    s: usize,
    a: usize,
    sigma: f64,
) -> Result<f64> {
    let var_sigma = target_variance(mdp, policy, q, gamma, s, a, sigma)?;
    let var_expected = target_variance(mdp, policy, q, gamma, s, a, 0.0)?;
    let var_sampled = target_variance(mdp, policy, q, gamma, s, a, 1.0)?;
    Ok((var_sigma - (var_expected + sigma * sigma * (var_sampled - var_expected))).abs())
}

/// `|Cov(Sarsa target, Expected Sarsa target) − Var(Expected Sarsa target)|`
/// over the joint successor distribution.
pub fn check_covariance_identity(
    mdp: &TabularMdp,
    policy: &Policy,
    q: &QTable,
    gamma: f64,
    s: usize,
    a: usize,
) -> Result<f64> {
    let joint = enumerate_joint(mdp, policy, q, gamma, s, a)?;
    let mean_sampled: f64 = joint.iter().map(|j| j.prob * j.sampled).sum();
    let mean_expected: f64 = joint.iter().map(|j| j.prob * j.expected).sum();
    let cov: f64 = joint
        .iter()
        .map(|j| j.prob * (j.sampled - mean_sampled) * (j.expected - mean_expected))
        .sum();
    let var: f64 = joint
        .iter()
        .map(|j| j.prob * (j.expected - mean_expected) * (j.expected - mean_expected))
        .sum();
    Ok((cov - var).abs())
}

/// Target variances along an ascending σ grid.
pub fn variance_profile(
    mdp: &TabularMdp,
    policy: &Policy,
    q: &QTable,
    gamma: f64,
    s: usize,
    a: usize,
    sigma_grid: &[f64],
) -> Result<Vec<f64>> {
    sigma_grid
        .iter()
        .map(|&sigma| target_variance(mdp, policy, q, gamma, s, a, sigma))
        .collect()
}

/// True iff the target variance is nondecreasing along `sigma_grid` and the
/// value at σ=0 is the grid minimum. Comparisons allow rounding slack of
/// [`IDENTITY_TOLERANCE`].
pub fn check_sigma_monotonicity(
    mdp: &TabularMdp,
    policy: &Policy,
    q: &QTable,
    gamma: f64,
    s: usize,
    a: usize,
    sigma_grid: &[f64],
) -> Result<bool> {
    if sigma_grid.is_empty()
        || sigma_grid.windows(2).any(|w| !(w[0] <= w[1]))
        || sigma_grid.iter().any(|s| !(0.0..=1.0).contains(s))
    {
        return Err(Error::param("sigma_grid", "must be ascending within [0, 1]"));
    }
    let profile = variance_profile(mdp, policy, q, gamma, s, a, sigma_grid)?;
    let nondecreasing = profile.windows(2).all(|w| w[1] >= w[0] - IDENTITY_TOLERANCE);
    let at_zero = target_variance(mdp, policy, q, gamma, s, a, 0.0)?;
    let zero_is_min = profile.iter().all(|&v| v >= at_zero - IDENTITY_TOLERANCE);
    Ok(nondecreasing && zero_is_min)
}

/// `max_{s,a} |E[target_σ(s,a)] − (T_π q)(s,a)|` over non-terminal pairs.
pub fn check_expected_operator(
    mdp: &TabularMdp,
    policy: &Policy,
    q: &QTable,
    gamma: f64,
    sigma: f64,
) -> Result<f64> {
    let tq = bellman_apply(mdp, policy, gamma, q)?;
    let mut worst = 0.0_f64;
    for s in mdp.non_terminal_states() {
        for a in 0..mdp.num_actions() {
            let mean = enumerate_target(mdp, policy, q, gamma, s, a, sigma)?.moments().mean;
            worst = worst.max((mean - tq.get(s, a)).abs());
        }
    }
    Ok(worst)
}

/// Runs the learner for `episodes` episodes with a stepsize satisfying the
/// Robbins-Monro conditions and returns the final RMS error against the
/// exact action values. This corroborates convergence; it cannot certify it.
pub fn convergence_suite(
    mdp: &TabularMdp,
    policy: &Policy,
    strategy: CoefficientStrategy,
    stepsize: StepsizeSchedule,
    gamma: f64,
    episodes: usize,
    seed: u64,
) -> Result<f64> {
    if !stepsize.satisfies_robbins_monro() {
        return Err(Error::param("stepsize", "convergence runs need a decaying per-pair stepsize"));
    }
    let reference = exact_q(mdp, policy, gamma)?;
    let settings = LearnerSettings::new(strategy, stepsize, gamma);
    let mut state = LearnerState::new(mdp, 0.0, seed);
    for _ in 0..episodes {
        run_episode(mdp, policy, &settings, &mut state)?;
    }
    rms_error(&state.q, &reference)
}

/// The stepsize used by the convergence runs: `α = n(s,a)^(−0.7)`.
pub fn convergence_stepsize() -> StepsizeSchedule {
    StepsizeSchedule::PolynomialVisitDecay { alpha0: 1.0, exponent: 0.7 }
}

/// Row-stochastic coefficient table induced by frozen visit counts:
/// `c(s, a) = n(s, a) / Σ_b n(s, b)`, or `π(·|s)` for unvisited rows.
pub fn frozen_count_coefficients(policy: &Policy, counts: &crate::VisitCounts) -> Result<Policy> {
    let mut table = Vec::with_capacity(policy.num_states() * policy.num_actions());
    for s in 0..policy.num_states() {
        table.extend(crate::strategy::coeff_count_based(counts.row(s), policy.row(s)));
    }
    Policy::new(policy.num_states(), policy.num_actions(), table)
}

/// A small instance on which frozen Count-Based coefficients visibly bias
/// the fixed point.
#[derive(Debug, Clone)]
pub struct CountBiasInstance {
    pub mdp: TabularMdp,
    pub policy: Policy,
    pub counts: crate::VisitCounts,
    pub gamma: f64,
}

/// Two continuing states, two actions, uniform successor distribution.
/// Action 0 pays 1 and action 1 pays 0; π is uniform but the frozen counts
/// favour action 0 nine to one.
pub fn count_bias_instance() -> CountBiasInstance {
    let transition = vec![0.5; 2 * 2 * 2];
    let reward = vec![1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0];
    let mdp = TabularMdp::new(2, 2, transition, reward, vec![false, false], vec![1.0, 0.0])
        .expect("constant instance is valid");
    CountBiasInstance {
        mdp,
        policy: Policy::uniform(2, 2),
        counts: crate::VisitCounts::from_table(2, vec![9, 1, 9, 1]),
        gamma: 0.9,
    }
}

/// A seeded random evaluation problem.
#[derive(Debug, Clone)]
pub struct RandomInstance {
    pub mdp: TabularMdp,
    pub policy: Policy,
    pub q: QTable,
    pub gamma: f64,
}

fn random_simplex<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

/// Random MDP with uniform-random stochastic rows and rewards in [−1, 1].
/// When `num_states > 1` the last state is terminal with probability 1/2.
pub fn random_mdp<R: Rng + ?Sized>(num_states: usize, num_actions: usize, rng: &mut R) -> Result<TabularMdp> {
    if num_states == 0 || num_actions == 0 {
        return Err(Error::param("num_states", "random MDP needs at least one state and action"));
    }
    let with_terminal = num_states > 1 && rng.random::<bool>();
    let mut terminal = vec![false; num_states];
    if with_terminal {
        terminal[num_states - 1] = true;
    }
    let mut transition = Vec::with_capacity(num_states * num_actions * num_states);
    let mut reward = Vec::with_capacity(num_states * num_actions * num_states);
    for s in 0..num_states {
        for _ in 0..num_actions {
            if terminal[s] {
                transition.extend((0..num_states).map(|n| if n == s { 1.0 } else { 0.0 }));
                reward.extend(std::iter::repeat_n(0.0, num_states));
            } else {
                transition.extend(random_simplex(num_states, rng));
                reward.extend((0..num_states).map(|_| rng.random_range(-1.0..=1.0)));
            }
        }
    }
    let live = terminal.iter().filter(|&&t| !t).count() as f64;
    let start = terminal.iter().map(|&t| if t { 0.0 } else { 1.0 / live }).collect();
    TabularMdp::new(num_states, num_actions, transition, reward, terminal, start)
}

/// Random instance with at most 5 states and 4 actions, random policy,
/// random Q in [−1, 1] and γ drawn from {0.5, 0.9, 0.99}.
pub fn random_instance(seed: u64) -> RandomInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let num_states = rng.random_range(1..=5);
    let num_actions = rng.random_range(1..=4);
    let mdp = random_mdp(num_states, num_actions, &mut rng).expect("sizes are positive");
    let probs = (0..num_states).flat_map(|_| random_simplex(num_actions, &mut rng)).collect();
    let policy = Policy::new(num_states, num_actions, probs).expect("rows are normalised");
    let q = QTable::from_fn(&mdp, |_, _| rng.random_range(-1.0..=1.0));
    let gamma = [0.5, 0.9, 0.99][rng.random_range(0..3)];
    RandomInstance { mdp, policy, q, gamma }
}

/// Largest residual of each exact identity over one random instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepResiduals {
    pub variance_identity: f64,
    pub covariance_identity: f64,
    pub expected_operator: f64,
    pub monotone: bool,
}

/// The σ grid used by the sweeps.
pub const SIGMA_GRID: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// Evaluates every exact identity on one random instance, over all
/// non-terminal pairs and the σ grid.
pub fn sweep_instance(instance: &RandomInstance) -> Result<SweepResiduals> {
    let RandomInstance { mdp, policy, q, gamma } = instance;
    check_gamma(*gamma)?;
    let mut out = SweepResiduals {
        variance_identity: 0.0,
        covariance_identity: 0.0,
        expected_operator: 0.0,
        monotone: true,
    };
    for &sigma in &SIGMA_GRID {
        out.expected_operator = out.expected_operator.max(check_expected_operator(mdp, policy, q, *gamma, sigma)?);
    }
    for s in mdp.non_terminal_states() {
        for a in 0..mdp.num_actions() {
            for &sigma in &SIGMA_GRID {
                out.variance_identity =
                    out.variance_identity.max(check_variance_identity(mdp, policy, q, *gamma, s, a, sigma)?);
            }
            out.covariance_identity =
                out.covariance_identity.max(check_covariance_identity(mdp, policy, q, *gamma, s, a)?);
            out.monotone &= check_sigma_monotonicity(mdp, policy, q, *gamma, s, a, &SIGMA_GRID)?;
        }
    }
    Ok(out)
}
