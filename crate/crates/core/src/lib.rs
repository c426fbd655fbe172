//! Tabular temporal-difference policy evaluation.
//!
//! The crate is organised bottom-up:
//!
//! - [`mdp`]: finite MDPs, fixed policies, value tables, exact evaluation
//!   by linear solve and the Bellman operator.
//! - [`envs`]: the random-walk and gridworld benchmark environments.
//! - [`strategy`]: backup-coefficient rules (Q(σ), Count-Based and
//!   Policy-Based adaptive tree backup, Sarsa, Expected Sarsa).
//! - [`learner`]: the episodic on-policy learner driving the generic
//!   weighted one-step update.
//! - [`analysis`]: exact enumeration of one-step target distributions and
//!   the numerical checks built on it.

pub mod analysis;
pub mod envs;
mod error;
pub mod learner;
mod linalg;
pub mod mdp;
pub mod strategy;

pub use error::{Error, Result};
pub use mdp::{Policy, QTable, TabularMdp, Transition};
pub use strategy::{CoefficientStrategy, SigmaSchedule, VisitCounts};
pub use learner::{LearnerSettings, LearnerState, StepsizeSchedule};

/// Tolerance for probability rows summing to one.
pub const PROB_TOLERANCE: f64 = 1e-12;
