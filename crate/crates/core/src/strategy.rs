//! Backup coefficients `c(s', ·)` for the weighted one-step update
//!
//! ```text
//! Q(s,a) ← (1−α) Q(s,a) + α (r + γ Σ_{a'} c(s',a') Q(s',a'))
//! ```
//!
//! Every strategy emits a nonnegative vector summing to one.

use std::fmt;
use std::str::FromStr;

use crate::{Error, Result};

/// Per-pair visit counts `n(s, a)`. Entries only grow.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisitCounts {
    num_actions: usize,
    n: Vec<u64>,
}

impl VisitCounts {
    pub fn new(num_states: usize, num_actions: usize) -> Self {
        VisitCounts { num_actions, n: vec![0; num_states * num_actions] }
    }

    /// Builds counts from a row-major table.
    pub fn from_table(num_actions: usize, n: Vec<u64>) -> Self {
        VisitCounts { num_actions, n }
    }

    pub fn increment(&mut self, s: usize, a: usize) {
        self.n[s * self.num_actions + a] += 1;
    }

    pub fn get(&self, s: usize, a: usize) -> u64 {
        self.n[s * self.num_actions + a]
    }

    pub fn row(&self, s: usize) -> &[u64] {
        &self.n[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn total(&self) -> u64 {
        self.n.iter().sum()
    }
}

/// Schedule for σ across episodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaSchedule {
    Fixed(f64),
    /// `σ_k = sigma0 · decay^k` for episode index `k`.
    ExponentialDecay { sigma0: f64, decay: f64 },
}

impl SigmaSchedule {
    pub fn fixed(sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        Ok(SigmaSchedule::Fixed(sigma))
    }

    pub fn exponential(sigma0: f64, decay: f64) -> Result<Self> {
        check_sigma(sigma0)?;
        if !(decay > 0.0 && decay <= 1.0) {
            return Err(Error::param("decay", format!("{decay} not in (0, 1]")));
        }
        Ok(SigmaSchedule::ExponentialDecay { sigma0, decay })
    }

    pub fn value(&self, episode_index: usize) -> f64 {
        match *self {
            SigmaSchedule::Fixed(sigma) => sigma,
            SigmaSchedule::ExponentialDecay { sigma0, decay } => {
                let exp = i32::try_from(episode_index).unwrap_or(i32::MAX);
                (sigma0 * decay.powi(exp)).clamp(0.0, 1.0)
            }
        }
    }
}

pub fn sigma_schedule_value(schedule: &SigmaSchedule, episode_index: usize) -> f64 {
    schedule.value(episode_index)
}

fn check_sigma(sigma: f64) -> Result<()> {
    if (0.0..=1.0).contains(&sigma) {
        Ok(())
    } else {
        Err(Error::param("sigma", format!("{sigma} not in [0, 1]")))
    }
}

/// `c(a) = (1−σ) π(a) + σ [a = a_next]`
pub fn coeff_q_sigma(policy_row: &[f64], a_next: usize, sigma: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; policy_row.len()];
    q_sigma_into(policy_row, a_next, sigma, &mut out)?;
    Ok(out)
}

fn q_sigma_into(policy_row: &[f64], a_next: usize, sigma: f64, out: &mut [f64]) -> Result<()> {
    check_sigma(sigma)?;
    if a_next >= policy_row.len() {
        return Err(Error::param("a_next", format!("{a_next} out of range 0..{}", policy_row.len())));
    }
    for (a, (c, &p)) in out.iter_mut().zip(policy_row).enumerate() {
        *c = (1.0 - sigma) * p + if a == a_next { sigma } else { 0.0 };
    }
    Ok(())
}

/// Count-Based ATB: `c(a) = n(a) / Σ n`. Falls back to the policy row when
/// nothing in the row has been visited.
pub fn coeff_count_based(counts_row: &[u64], policy_row: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; policy_row.len()];
    count_based_into(counts_row, policy_row, &mut out);
    out
}

fn count_based_into(counts_row: &[u64], policy_row: &[f64], out: &mut [f64]) {
    let total: u64 = counts_row.iter().sum();
    if total == 0 {
        out.copy_from_slice(policy_row);
        return;
    }
    let total = total as f64;
    for (c, &n) in out.iter_mut().zip(counts_row) {
        *c = n as f64 / total;
    }
}

/// Policy-Based ATB: the policy row restricted to visited actions and
/// renormalised, `c(a) = u(n(a)) π(a) / Σ u(n(a')) π(a')`. Falls back to the
/// policy row when no visited action has positive probability.
pub fn coeff_policy_based(counts_row: &[u64], policy_row: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; policy_row.len()];
    policy_based_into(counts_row, policy_row, &mut out);
    out
}

fn policy_based_into(counts_row: &[u64], policy_row: &[f64], out: &mut [f64]) {
    let mass: f64 = counts_row
        .iter()
        .zip(policy_row)
        .filter(|(&n, _)| n > 0)
        .map(|(_, &p)| p)
        .sum();
    if !(mass > 0.0) {
        out.copy_from_slice(policy_row);
        return;
    }
    if counts_row.iter().all(|&n| n > 0) {
        // full visitation: exactly Expected Sarsa
        out.copy_from_slice(policy_row);
        return;
    }
    for ((c, &n), &p) in out.iter_mut().zip(counts_row).zip(policy_row) {
        *c = if n > 0 { p / mass } else { 0.0 };
    }
}

/// Inputs available to a coefficient rule for one transition.
#[derive(Debug, Clone, Copy)]
pub struct CoefficientContext<'a> {
    /// `π(·|s')`
    pub policy_row: &'a [f64],
    /// `n(s', ·)`
    pub counts_row: &'a [u64],
    pub a_next: Option<usize>,
    pub episode_index: usize,
}

/// The coefficient rules understood by the learner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoefficientStrategy {
    QSigma(SigmaSchedule),
    CountBased,
    PolicyBased,
    ExpectedSarsa,
    Sarsa,
    /// One-step on-policy Tree Backup; identical to Expected Sarsa here.
    TreeBackup,
}

impl CoefficientStrategy {
    /// Whether the rule needs the sampled successor action.
    pub fn needs_next_action(&self) -> bool {
        matches!(self, CoefficientStrategy::QSigma(_) | CoefficientStrategy::Sarsa)
    }

    pub fn coefficients(&self, ctx: &CoefficientContext<'_>) -> Result<Vec<f64>> {
        let mut out = vec![0.0; ctx.policy_row.len()];
        self.coefficients_into(ctx, &mut out)?;
        Ok(out)
    }

    /// Writes the coefficient vector into `out` (length `|A|`).
    pub fn coefficients_into(&self, ctx: &CoefficientContext<'_>, out: &mut [f64]) -> Result<()> {
        let next_action = || ctx.a_next.ok_or_else(|| Error::MissingNextAction(self.to_string()));
        match self {
            CoefficientStrategy::QSigma(schedule) => {
                q_sigma_into(ctx.policy_row, next_action()?, schedule.value(ctx.episode_index), out)
            }
            CoefficientStrategy::Sarsa => q_sigma_into(ctx.policy_row, next_action()?, 1.0, out),
            CoefficientStrategy::ExpectedSarsa | CoefficientStrategy::TreeBackup => {
                out.copy_from_slice(ctx.policy_row);
                Ok(())
            }
            CoefficientStrategy::CountBased => {
                count_based_into(ctx.counts_row, ctx.policy_row, out);
                Ok(())
            }
            CoefficientStrategy::PolicyBased => {
                policy_based_into(ctx.counts_row, ctx.policy_row, out);
                Ok(())
            }
        }
    }

    /// Names and one-line descriptions of the accepted strategy spellings.
    pub fn catalog() -> &'static [(&'static str, &'static str)] {
        &[
            ("qsigma(sigma=<s>)", "Q(sigma) with fixed sigma in [0, 1]"),
            ("qsigma(decay=<d>)", "Q(sigma) with sigma = decay^episode, starting at 1"),
            ("qsigma(sigma=<s>,decay=<d>)", "Q(sigma) with sigma = s * decay^episode"),
            ("count-atb", "Count-Based adaptive tree backup"),
            ("policy-atb", "Policy-Based adaptive tree backup"),
            ("sarsa", "Sarsa, equal to qsigma(sigma=1)"),
            ("expected-sarsa", "Expected Sarsa, equal to qsigma(sigma=0)"),
            ("tree-backup", "one-step Tree Backup, equal to expected-sarsa on-policy"),
        ]
    }
}

impl fmt::Display for CoefficientStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoefficientStrategy::QSigma(SigmaSchedule::Fixed(s)) => write!(f, "qsigma(sigma={s})"),
            CoefficientStrategy::QSigma(SigmaSchedule::ExponentialDecay { sigma0, decay }) => {
                if *sigma0 == 1.0 {
                    write!(f, "qsigma(decay={decay})")
                } else {
                    write!(f, "qsigma(sigma={sigma0},decay={decay})")
                }
            }
            CoefficientStrategy::CountBased => f.write_str("count-atb"),
            CoefficientStrategy::PolicyBased => f.write_str("policy-atb"),
            CoefficientStrategy::ExpectedSarsa => f.write_str("expected-sarsa"),
            CoefficientStrategy::Sarsa => f.write_str("sarsa"),
            CoefficientStrategy::TreeBackup => f.write_str("tree-backup"),
        }
    }
}

impl FromStr for CoefficientStrategy {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        let unknown = || Error::UnknownStrategy(text.to_string());
        match compact.as_str() {
            "count-atb" => return Ok(CoefficientStrategy::CountBased),
            "policy-atb" => return Ok(CoefficientStrategy::PolicyBased),
            "expected-sarsa" => return Ok(CoefficientStrategy::ExpectedSarsa),
            "sarsa" => return Ok(CoefficientStrategy::Sarsa),
            "tree-backup" => return Ok(CoefficientStrategy::TreeBackup),
            _ => {}
        }
        let args = compact
            .strip_prefix("qsigma(")
            .and_then(|rest| rest.strip_suffix(')'))
            .ok_or_else(unknown)?;

        let mut sigma = None;
        let mut decay = None;
        for pair in args.split(',').filter(|p| !p.is_empty()) {
            let (key, value) = pair.split_once('=').ok_or_else(unknown)?;
            let value: f64 = value
                .parse()
                .map_err(|_| Error::param("sigma", format!("cannot parse `{value}` in `{text}`")))?;
            let slot = match key {
                "sigma" => &mut sigma,
                "decay" => &mut decay,
                _ => return Err(unknown()),
            };
            if slot.replace(value).is_some() {
                return Err(unknown());
            }
        }
        let schedule = match (sigma, decay) {
            (Some(s), None) => SigmaSchedule::fixed(s)?,
            (s, Some(d)) => SigmaSchedule::exponential(s.unwrap_or(1.0), d)?,
            (None, None) => return Err(unknown()),
        };
        Ok(CoefficientStrategy::QSigma(schedule))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-15)
    }

    #[test]
    fn q_sigma_endpoints_and_midpoint() {
        let pi = [0.5, 0.5];
        assert!(close(&coeff_q_sigma(&pi, 0, 0.0).unwrap(), &pi));
        assert!(close(&coeff_q_sigma(&[0.2, 0.3, 0.5], 1, 1.0).unwrap(), &[0.0, 1.0, 0.0]));
        assert!(close(&coeff_q_sigma(&pi, 0, 0.5).unwrap(), &[0.75, 0.25]));
        assert!(coeff_q_sigma(&pi, 0, 1.2).is_err());
        assert!(coeff_q_sigma(&pi, 2, 0.5).is_err());
    }

    #[test]
    fn count_based_cases() {
        assert!(close(&coeff_count_based(&[2, 1, 1], &[1.0 / 3.0; 3]), &[0.5, 0.25, 0.25]));
        assert!(close(&coeff_count_based(&[0, 0], &[0.3, 0.7]), &[0.3, 0.7]));
    }

    #[test]
    fn policy_based_cases() {
        let pi = [0.1, 0.6, 0.3];
        assert_eq!(coeff_policy_based(&[4, 1, 9], &pi), pi.to_vec());
        assert!(close(&coeff_policy_based(&[1, 0], &[0.3, 0.7]), &[1.0, 0.0]));
        assert!(close(&coeff_policy_based(&[1, 0, 2], &[1.0 / 3.0; 3]), &[0.5, 0.0, 0.5]));
        assert!(close(&coeff_policy_based(&[0, 0], &[0.3, 0.7]), &[0.3, 0.7]));
        // only a zero-probability action visited: fall back to π
        assert!(close(&coeff_policy_based(&[3, 0], &[0.0, 1.0]), &[0.0, 1.0]));
    }

    #[test]
    fn sigma_schedules() {
        assert_eq!(SigmaSchedule::fixed(0.3).unwrap().value(17), 0.3);
        let exp = SigmaSchedule::exponential(1.0, 0.95).unwrap();
        assert_eq!(exp.value(0), 1.0);
        assert!((exp.value(2) - 0.9025).abs() < 1e-15);
        assert!(SigmaSchedule::exponential(1.0, 0.0).is_err());
        assert!(SigmaSchedule::fixed(-0.1).is_err());
    }

    #[test]
    fn dispatch() {
        let pi = [0.2, 0.3, 0.5];
        let counts = [0, 0, 0];
        let ctx = |a_next| CoefficientContext { policy_row: &pi, counts_row: &counts, a_next, episode_index: 0 };
        assert_eq!(CoefficientStrategy::Sarsa.coefficients(&ctx(Some(2))).unwrap(), vec![0.0, 0.0, 1.0]);
        assert_eq!(CoefficientStrategy::ExpectedSarsa.coefficients(&ctx(None)).unwrap(), pi.to_vec());
        assert_eq!(CoefficientStrategy::TreeBackup.coefficients(&ctx(None)).unwrap(), pi.to_vec());
        let decaying = CoefficientStrategy::QSigma(SigmaSchedule::exponential(1.0, 0.95).unwrap());
        assert_eq!(decaying.coefficients(&ctx(Some(1))).unwrap(), vec![0.0, 1.0, 0.0]);
        assert!(matches!(
            CoefficientStrategy::Sarsa.coefficients(&ctx(None)),
            Err(Error::MissingNextAction(_))
        ));
    }

    #[test]
    fn parse_and_display() {
        for text in [
            "qsigma(sigma=0.5)",
            "qsigma(decay=0.95)",
            "qsigma(sigma=0.5,decay=0.9)",
            "count-atb",
            "policy-atb",
            "sarsa",
            "expected-sarsa",
            "tree-backup",
        ] {
            let parsed: CoefficientStrategy = text.parse().unwrap();
            assert_eq!(parsed.to_string(), text);
        }
        assert_eq!(
            "qsigma( sigma = 0 )".parse::<CoefficientStrategy>().unwrap(),
            CoefficientStrategy::QSigma(SigmaSchedule::Fixed(0.0))
        );
        assert!("qsigma(sigma=2)".parse::<CoefficientStrategy>().is_err());
        assert!("qsigma()".parse::<CoefficientStrategy>().is_err());
        assert!("qsigma(lambda=0.5)".parse::<CoefficientStrategy>().is_err());
        assert!("greedy".parse::<CoefficientStrategy>().is_err());
    }

    fn policy_row(len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, len).prop_map(|raw| {
            let total: f64 = raw.iter().sum();
            if total <= 0.0 {
                vec![1.0 / raw.len() as f64; raw.len()]
            } else {
                raw.iter().map(|x| x / total).collect()
            }
        })
    }

    proptest! {
        #[test]
        fn q_sigma_recovers_interpolated_target(
            (pi, q, a_next) in (1usize..6).prop_flat_map(|n| (policy_row(n), prop::collection::vec(-10.0f64..10.0, n), 0..n)),
            sigma in 0.0f64..=1.0,
        ) {
            let c = coeff_q_sigma(&pi, a_next, sigma).unwrap();
            let backed: f64 = c.iter().zip(&q).map(|(c, q)| c * q).sum();
            let expected_part: f64 = pi.iter().zip(&q).map(|(p, q)| p * q).sum();
            let target = sigma * q[a_next] + (1.0 - sigma) * expected_part;
            prop_assert!((backed - target).abs() <= 1e-12);
        }

        #[test]
        fn adaptive_variants_exclude_unvisited(
            (pi, counts) in (2usize..6).prop_flat_map(|n| (policy_row(n), prop::collection::vec(0u64..4, n))),
        ) {
            let any_visited = counts.iter().any(|&n| n > 0);
            let count_c = coeff_count_based(&counts, &pi);
            let policy_c = coeff_policy_based(&counts, &pi);
            let visited_mass: f64 = counts.iter().zip(&pi).filter(|(&n, _)| n > 0).map(|(_, p)| p).sum();
            for (a, &n) in counts.iter().enumerate() {
                if n == 0 && any_visited {
                    prop_assert_eq!(count_c[a], 0.0);
                    if visited_mass > 0.0 {
                        prop_assert_eq!(policy_c[a], 0.0);
                    }
                }
            }
            if counts.iter().all(|&n| n > 0) {
                prop_assert_eq!(policy_c, pi);
            }
        }
    }
}
