//! Episodic on-policy TD learning with the weighted one-step backup.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::mdp::{dot, sample_action, sample_start, sample_transition, Transition};
use crate::strategy::CoefficientContext;
use crate::{CoefficientStrategy, Error, Policy, QTable, Result, TabularMdp, VisitCounts};

/// Stepsize `α` used for each update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepsizeSchedule {
    Constant(f64),
    /// `α = alpha0 · n(s,a)^(−exponent)` where `n(s,a)` is the visit count
    /// of the pair being updated.
    PolynomialVisitDecay { alpha0: f64, exponent: f64 },
}

impl StepsizeSchedule {
    pub fn constant(alpha: f64) -> Result<Self> {
        check_alpha0(alpha)?;
        Ok(StepsizeSchedule::Constant(alpha))
    }

    /// Per-pair decay satisfying `Σα = ∞, Σα² < ∞` for exponents in (0.5, 1].
    pub fn polynomial(alpha0: f64, exponent: f64) -> Result<Self> {
        check_alpha0(alpha0)?;
        if !(exponent > 0.5 && exponent <= 1.0) {
            return Err(Error::param("exponent", format!("{exponent} not in (0.5, 1]")));
        }
        Ok(StepsizeSchedule::PolynomialVisitDecay { alpha0, exponent })
    }

    pub fn value(&self, visits: u64) -> f64 {
        match *self {
            StepsizeSchedule::Constant(alpha) => alpha,
            StepsizeSchedule::PolynomialVisitDecay { alpha0, exponent } => {
                alpha0 * (visits.max(1) as f64).powf(-exponent)
            }
        }
    }

    pub fn satisfies_robbins_monro(&self) -> bool {
        matches!(self, StepsizeSchedule::PolynomialVisitDecay { .. })
    }
}

fn check_alpha0(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::param("alpha", format!("{alpha} not in (0, 1]")))
    }
}

/// Everything about a learner that stays fixed across episodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerSettings {
    pub strategy: CoefficientStrategy,
    pub stepsize: StepsizeSchedule,
    pub gamma: f64,
    pub max_steps: usize,
}

impl LearnerSettings {
    pub const DEFAULT_MAX_STEPS: usize = 10_000;

    pub fn new(strategy: CoefficientStrategy, stepsize: StepsizeSchedule, gamma: f64) -> Self {
        LearnerSettings { strategy, stepsize, gamma, max_steps: Self::DEFAULT_MAX_STEPS }
    }
}

/// Mutable state owned by one learner.
#[derive(Debug, Clone)]
pub struct LearnerState {
    pub q: QTable,
    pub counts: VisitCounts,
    pub episode_index: usize,
    rng: ChaCha8Rng,
}

impl LearnerState {
    pub fn new(mdp: &TabularMdp, q_init: f64, seed: u64) -> Self {
        LearnerState {
            q: QTable::new(mdp, q_init),
            counts: VisitCounts::new(mdp.num_states(), mdp.num_actions()),
            episode_index: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

/// Applies one weighted backup to `q(t.s, t.a)`. When `t.done` the target
/// is `t.r` and `c` is ignored.
pub fn atb_update(q: &mut QTable, t: &Transition, c: &[f64], alpha: f64, gamma: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::param("alpha", format!("{alpha} not in [0, 1]")));
    }
    let target = if t.done {
        t.r
    } else {
        if c.len() != q.num_actions() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} coefficients", q.num_actions()),
                actual: c.len().to_string(),
            });
        }
        let sum: f64 = c.iter().sum();
        let min = c.iter().copied().fold(f64::INFINITY, f64::min);
        if (sum - 1.0).abs() > 1e-9 || min < -1e-9 {
            return Err(Error::SimplexViolation { sum, min });
        }
        t.r + gamma * dot(c, q.row(t.s_next))
    };
    let old = q.get(t.s, t.a);
    q.set(t.s, t.a, (1.0 - alpha) * old + alpha * target);
    Ok(())
}

/// Runs one episode from a start-distribution draw until termination or
/// `max_steps` transitions. Visit counts are incremented when an action is
/// selected, so the successor's count already includes `a'` when the
/// coefficients for the preceding transition are computed.
pub fn run_episode(
    mdp: &TabularMdp,
    policy: &Policy,
    settings: &LearnerSettings,
    state: &mut LearnerState,
) -> Result<usize> {
    let mut coeffs = vec![0.0; mdp.num_actions()];
    let rng = &mut state.rng;

    let mut s = sample_start(mdp, rng);
    let mut a = sample_action(policy, s, rng);
    state.counts.increment(s, a);

    let mut steps = 0;
    while steps < settings.max_steps.max(1) {
        let t = sample_transition(mdp, policy, s, a, rng)?;
        steps += 1;
        if let Some(a_next) = t.a_next {
            state.counts.increment(t.s_next, a_next);
            let ctx = CoefficientContext {
                policy_row: policy.row(t.s_next),
                counts_row: state.counts.row(t.s_next),
                a_next: Some(a_next),
                episode_index: state.episode_index,
            };
            settings.strategy.coefficients_into(&ctx, &mut coeffs)?;
        }
        let alpha = settings.stepsize.value(state.counts.get(t.s, t.a));
        atb_update(&mut state.q, &t, &coeffs, alpha, settings.gamma)?;

        match t.a_next {
            Some(a_next) => {
                s = t.s_next;
                a = a_next;
            }
            None => break,
        }
    }
    state.episode_index += 1;
    Ok(steps)
}

/// Root-mean-square difference over all non-terminal `(s, a)` pairs.
pub fn rms_error(q: &QTable, q_ref: &QTable) -> Result<f64> {
    q.check_same_shape(q_ref)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for s in (0..q.num_states()).filter(|&s| !q_ref.is_terminal(s)) {
        for (x, y) in q.row(s).iter().zip(q_ref.row(s)) {
            sum += (x - y) * (x - y);
            count += 1;
        }
    }
    if count == 0 {
        return Ok(0.0);
    }
    Ok((sum / count as f64).sqrt())
}
