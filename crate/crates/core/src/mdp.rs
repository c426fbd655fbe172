//! Finite MDPs, fixed policies and action-value tables.
//!
//! Rewards are stored per transition as `R(s, a, s')`; operators work with
//! the expected one-step reward `r̄(s, a) = Σ_{s'} P(s'|s,a) R(s,a,s')`.

use std::collections::VecDeque;

use rand::Rng;

use crate::linalg::solve_dense;
use crate::{Error, Result, PROB_TOLERANCE};

/// A finite MDP with explicit transition and reward tensors.
///
/// Terminal states are absorbing with zero reward. The start distribution
/// puts no mass on terminal states.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    // (s, a, s') row-major
    transition: Vec<f64>,
    reward: Vec<f64>,
    terminal: Vec<bool>,
    start: Vec<f64>,
}

impl TabularMdp {
    /// Builds and validates an MDP. `transition` and `reward` are indexed
    /// `(s, a, s')` in row-major order.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        terminal: Vec<bool>,
        start: Vec<f64>,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return Err(Error::InvalidMdp("state and action sets must be nonempty".into()));
        }
        let cube = num_states * num_actions * num_states;
        if transition.len() != cube || reward.len() != cube {
            return Err(Error::InvalidMdp(format!(
                "transition/reward tensors must have {cube} entries"
            )));
        }
        if terminal.len() != num_states || start.len() != num_states {
            return Err(Error::InvalidMdp(format!(
                "terminal flags and start distribution must have {num_states} entries"
            )));
        }
        let mdp = TabularMdp { num_states, num_actions, transition, reward, terminal, start };

        for s in 0..num_states {
            for a in 0..num_actions {
                let row = mdp.transition_row(s, a);
                if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                    return Err(Error::InvalidMdp(format!("negative probability at ({s}, {a})")));
                }
                if mdp.reward_row(s, a).iter().any(|r| !r.is_finite()) {
                    return Err(Error::InvalidMdp(format!("non-finite reward at ({s}, {a})")));
                }
                if mdp.terminal[s] {
                    let absorbing = row
                        .iter()
                        .enumerate()
                        .all(|(next, &p)| if next == s { p == 1.0 } else { p == 0.0 });
                    if !absorbing || mdp.reward_row(s, a).iter().any(|&r| r != 0.0) {
                        return Err(Error::InvalidMdp(format!(
                            "terminal state {s} must be absorbing with zero reward"
                        )));
                    }
                } else {
                    let sum: f64 = row.iter().sum();
                    if (sum - 1.0).abs() > PROB_TOLERANCE {
                        return Err(Error::InvalidMdp(format!(
                            "transition row ({s}, {a}) sums to {sum}"
                        )));
                    }
                }
            }
        }

        if mdp.start.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::InvalidMdp("negative start probability".into()));
        }
        let start_sum: f64 = mdp.start.iter().sum();
        if (start_sum - 1.0).abs() > PROB_TOLERANCE {
            return Err(Error::InvalidMdp(format!("start distribution sums to {start_sum}")));
        }
        if let Some(s) = (0..num_states).find(|&s| mdp.terminal[s] && mdp.start[s] > 0.0) {
            return Err(Error::InvalidMdp(format!("start distribution puts mass on terminal {s}")));
        }
        Ok(mdp)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn terminal_flags(&self) -> &[bool] {
        &self.terminal
    }

    pub fn start_distribution(&self) -> &[f64] {
        &self.start
    }

    pub fn non_terminal_states(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_states).filter(move |&s| !self.terminal[s])
    }

    /// Number of non-terminal `(s, a)` pairs.
    pub fn num_non_terminal_pairs(&self) -> usize {
        self.non_terminal_states().count() * self.num_actions
    }

    fn offset(&self, s: usize, a: usize) -> usize {
        (s * self.num_actions + a) * self.num_states
    }

    /// `P(·|s, a)`
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let o = self.offset(s, a);
        &self.transition[o..o + self.num_states]
    }

    /// `R(s, a, ·)`
    pub fn reward_row(&self, s: usize, a: usize) -> &[f64] {
        let o = self.offset(s, a);
        &self.reward[o..o + self.num_states]
    }

    pub fn transition_prob(&self, s: usize, a: usize, next: usize) -> f64 {
        self.transition[self.offset(s, a) + next]
    }

    pub fn reward(&self, s: usize, a: usize, next: usize) -> f64 {
        self.reward[self.offset(s, a) + next]
    }

    /// Expected one-step reward `r̄(s, a)`.
    pub fn expected_reward(&self, s: usize, a: usize) -> f64 {
        self.transition_row(s, a)
            .iter()
            .zip(self.reward_row(s, a))
            .map(|(p, r)| p * r)
            .sum()
    }

    fn check_state(&self, s: usize) -> Result<()> {
        if s < self.num_states {
            Ok(())
        } else {
            Err(Error::param("state", format!("{s} out of range 0..{}", self.num_states)))
        }
    }

    fn check_action(&self, a: usize) -> Result<()> {
        if a < self.num_actions {
            Ok(())
        } else {
            Err(Error::param("action", format!("{a} out of range 0..{}", self.num_actions)))
        }
    }
}

/// A fixed stochastic policy `π(a|s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    num_states: usize,
    num_actions: usize,
    probs: Vec<f64>,
}

impl Policy {
    pub fn new(num_states: usize, num_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != num_states * num_actions {
            return Err(Error::InvalidPolicy(format!(
                "expected {} probabilities, got {}",
                num_states * num_actions,
                probs.len()
            )));
        }
        for (s, row) in probs.chunks(num_actions.max(1)).enumerate() {
            if row.iter().any(|&p| !(p >= 0.0)) {
                return Err(Error::InvalidPolicy(format!("negative probability in row {s}")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > PROB_TOLERANCE {
                return Err(Error::InvalidPolicy(format!("row {s} sums to {sum}")));
            }
        }
        Ok(Policy { num_states, num_actions, probs })
    }

    /// The equiprobable policy over every action in every state.
    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        let p = 1.0 / num_actions as f64;
        Policy { num_states, num_actions, probs: vec![p; num_states * num_actions] }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.num_actions + a]
    }

    fn check_dims(&self, mdp: &TabularMdp) -> Result<()> {
        if self.num_states != mdp.num_states || self.num_actions != mdp.num_actions {
            return Err(Error::DimensionMismatch {
                expected: format!("policy {}x{}", mdp.num_states, mdp.num_actions),
                actual: format!("{}x{}", self.num_states, self.num_actions),
            });
        }
        Ok(())
    }
}

/// Action-value estimates. Terminal rows are identically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    num_states: usize,
    num_actions: usize,
    values: Vec<f64>,
    terminal: Vec<bool>,
    init_value: f64,
}

impl QTable {
    /// Every non-terminal entry set to `init_value`.
    pub fn new(mdp: &TabularMdp, init_value: f64) -> Self {
        let mut q = QTable::from_fn(mdp, |_, _| init_value);
        q.init_value = init_value;
        q
    }

    /// Builds a table from `f(s, a)`; terminal entries are forced to zero.
    pub fn from_fn(mdp: &TabularMdp, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let (ns, na) = (mdp.num_states, mdp.num_actions);
        let mut values = Vec::with_capacity(ns * na);
        for s in 0..ns {
            for a in 0..na {
                values.push(if mdp.terminal[s] { 0.0 } else { f(s, a) });
            }
        }
        QTable { num_states: ns, num_actions: na, values, terminal: mdp.terminal.clone(), init_value: 0.0 }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn init_value(&self) -> f64 {
        self.init_value
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.num_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.num_actions..(s + 1) * self.num_actions]
    }

    /// Writes a non-terminal entry. Writes to terminal entries are ignored.
    pub fn set(&mut self, s: usize, a: usize, value: f64) {
        if !self.terminal[s] {
            self.values[s * self.num_actions + a] = value;
        }
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    /// All entries in `(s, a)` row-major order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Policy-weighted state values `V(s) = Σ_a π(a|s) Q(s, a)`.
    pub fn state_values(&self, policy: &Policy) -> Vec<f64> {
        (0..self.num_states)
            .map(|s| dot(policy.row(s), self.row(s)))
            .collect()
    }

    /// `max |q1 − q2|` over all entries.
    pub fn max_abs_diff(&self, other: &QTable) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs())))
    }

    pub(crate) fn check_same_shape(&self, other: &QTable) -> Result<()> {
        if self.num_states != other.num_states || self.num_actions != other.num_actions {
            return Err(Error::DimensionMismatch {
                expected: format!("q-table {}x{}", self.num_states, self.num_actions),
                actual: format!("{}x{}", other.num_states, other.num_actions),
            });
        }
        Ok(())
    }

    pub(crate) fn check_dims(&self, mdp: &TabularMdp) -> Result<()> {
        if self.num_states != mdp.num_states || self.num_actions != mdp.num_actions {
            return Err(Error::DimensionMismatch {
                expected: format!("q-table {}x{}", mdp.num_states, mdp.num_actions),
                actual: format!("{}x{}", self.num_states, self.num_actions),
            });
        }
        Ok(())
    }
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// One sampled step `(s, a, r, s', a')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub s: usize,
    pub a: usize,
    pub r: f64,
    pub s_next: usize,
    /// Successor action; `None` exactly when `done`.
    pub a_next: Option<usize>,
    pub done: bool,
}

/// Draws an index from a probability vector with a single uniform variate.
pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

pub fn sample_start<R: Rng + ?Sized>(mdp: &TabularMdp, rng: &mut R) -> usize {
    sample_categorical(&mdp.start, rng)
}

pub fn sample_action<R: Rng + ?Sized>(policy: &Policy, s: usize, rng: &mut R) -> usize {
    sample_categorical(policy.row(s), rng)
}

/// Samples `s' ~ P(·|s,a)` and, unless `s'` is terminal, `a' ~ π(·|s')`.
pub fn sample_transition<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    policy: &Policy,
    s: usize,
    a: usize,
    rng: &mut R,
) -> Result<Transition> {
    mdp.check_state(s)?;
    mdp.check_action(a)?;
    if mdp.is_terminal(s) {
        return Err(Error::TerminalState(s));
    }
    let s_next = sample_categorical(mdp.transition_row(s, a), rng);
    let r = mdp.reward(s, a, s_next);
    let done = mdp.is_terminal(s_next);
    let a_next = if done { None } else { Some(sample_action(policy, s_next, rng)) };
    Ok(Transition { s, a, r, s_next, a_next, done })
}

/// States from which no terminal is reachable when following `policy`
/// after the first step. Empty iff the policy is proper.
fn states_without_exit(mdp: &TabularMdp, policy: &Policy) -> Vec<usize> {
    let n = mdp.num_states;
    // reverse edges of the policy-induced state graph
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for s in mdp.non_terminal_states() {
        for next in 0..n {
            let reachable = (0..mdp.num_actions)
                .any(|a| policy.prob(s, a) > 0.0 && mdp.transition_prob(s, a, next) > 0.0);
            if reachable {
                preds[next].push(s);
            }
        }
    }
    let mut exits = mdp.terminal.clone();
    let mut queue: VecDeque<usize> = (0..n).filter(|&s| mdp.terminal[s]).collect();
    while let Some(s) = queue.pop_front() {
        for &p in &preds[s] {
            if !exits[p] {
                exits[p] = true;
                queue.push_back(p);
            }
        }
    }
    (0..n).filter(|&s| !exits[s]).collect()
}

/// Solves `Q = r̄ + γ P_π Q` over the non-terminal pairs, terminal values
/// pinned to zero.
///
/// With `gamma == 1` the policy must reach a terminal state with probability
/// one from every non-terminal state; this is checked by reachability.
pub fn exact_q(mdp: &TabularMdp, policy: &Policy, gamma: f64) -> Result<QTable> {
    policy.check_dims(mdp)?;
    check_gamma(gamma)?;
    if gamma == 1.0 {
        if let Some(&s) = states_without_exit(mdp, policy).first() {
            return Err(Error::ImproperPolicy(s));
        }
    }

    let na = mdp.num_actions;
    let states: Vec<usize> = mdp.non_terminal_states().collect();
    let mut index = vec![usize::MAX; mdp.num_states];
    for (i, &s) in states.iter().enumerate() {
        index[s] = i;
    }
    let n = states.len() * na;
    let mut a_mat = vec![0.0; n * n];
    let mut b = vec![0.0; n];

    for (i, &s) in states.iter().enumerate() {
        for a in 0..na {
            let row = i * na + a;
            a_mat[row * n + row] += 1.0;
            b[row] = mdp.expected_reward(s, a);
            for (next, &p) in mdp.transition_row(s, a).iter().enumerate() {
                if p == 0.0 || mdp.terminal[next] {
                    continue;
                }
                for a2 in 0..na {
                    let col = index[next] * na + a2;
                    a_mat[row * n + col] -= gamma * p * policy.prob(next, a2);
                }
            }
        }
    }

    let x = solve_dense(a_mat, b).ok_or(Error::SingularSystem)?;
    let q = QTable::from_fn(mdp, |s, a| x[index[s] * na + a]);

    let residual = bellman_apply(mdp, policy, gamma, &q)?.max_abs_diff(&q)?;
    if !(residual <= 1e-10) {
        return Err(Error::SingularSystem);
    }
    Ok(q)
}

/// `(T_π q)(s, a) = r̄(s, a) + γ Σ_{s', a'} P(s'|s,a) π(a'|s') q(s', a')`.
pub fn bellman_apply(mdp: &TabularMdp, policy: &Policy, gamma: f64, q: &QTable) -> Result<QTable> {
    policy.check_dims(mdp)?;
    q.check_dims(mdp)?;
    let v = q.state_values(policy);
    Ok(QTable::from_fn(mdp, |s, a| {
        mdp.expected_reward(s, a) + gamma * dot(mdp.transition_row(s, a), &v)
    }))
}

/// Iterates `bellman_apply` from `q0` until successive iterates differ by
/// at most `tol` in max norm, or `max_iters` is hit. Returns the last
/// iterate and the number of applications.
pub fn iterate_bellman(
    mdp: &TabularMdp,
    policy: &Policy,
    gamma: f64,
    q0: &QTable,
    tol: f64,
    max_iters: usize,
) -> Result<(QTable, usize)> {
    let mut q = q0.clone();
    for k in 1..=max_iters {
        let next = bellman_apply(mdp, policy, gamma, &q)?;
        let delta = next.max_abs_diff(&q)?;
        q = next;
        if delta <= tol {
            return Ok((q, k));
        }
    }
    Ok((q, max_iters))
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if (0.0..=1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(Error::param("gamma", format!("{gamma} not in [0, 1]")))
    }
}
