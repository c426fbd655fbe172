//! Benchmark environments: the deterministic random walk and the 4×3
//! stochastic gridworld.

use crate::{Error, Policy, Result, TabularMdp};

pub const WALK_LEFT: usize = 0;
pub const WALK_RIGHT: usize = 1;

/// A chain of `n_states` non-terminal states between two terminals.
///
/// State `0` is the left terminal, states `1..=n_states` the chain, and
/// `n_states + 1` the right terminal. Actions move one cell left or right.
/// Entering the left terminal pays −1, the right terminal +1; every other
/// step pays 0. Episodes start in the centre. The returned policy is
/// equiprobable.
pub fn make_random_walk(n_states: usize) -> Result<(TabularMdp, Policy)> {
    if n_states == 0 || n_states % 2 == 0 {
        return Err(Error::param("n_states", format!("{n_states} must be a positive odd integer")));
    }
    let ns = n_states + 2;
    let right_terminal = ns - 1;
    let mut transition = vec![0.0; ns * 2 * ns];
    let mut reward = vec![0.0; ns * 2 * ns];
    let at = |s: usize, a: usize, next: usize| (s * 2 + a) * ns + next;

    for s in 0..ns {
        for a in [WALK_LEFT, WALK_RIGHT] {
            let next = if s == 0 || s == right_terminal {
                s
            } else if a == WALK_LEFT {
                s - 1
            } else {
                s + 1
            };
            transition[at(s, a, next)] = 1.0;
            if s != next {
                if next == 0 {
                    reward[at(s, a, next)] = -1.0;
                } else if next == right_terminal {
                    reward[at(s, a, next)] = 1.0;
                }
            }
        }
    }

    let mut terminal = vec![false; ns];
    terminal[0] = true;
    terminal[right_terminal] = true;
    let mut start = vec![0.0; ns];
    start[(n_states + 1) / 2] = 1.0;

    let mdp = TabularMdp::new(ns, 2, transition, reward, terminal, start)?;
    Ok((mdp, Policy::uniform(ns, 2)))
}

pub const NORTH: usize = 0;
pub const SOUTH: usize = 1;
pub const EAST: usize = 2;
pub const WEST: usize = 3;

const GRID_COLS: usize = 4;
const GRID_ROWS: usize = 3;
const BLOCKED: (usize, usize) = (2, 2);
const GOAL: (usize, usize) = (4, 3);
const PIT: (usize, usize) = (4, 2);
const START: (usize, usize) = (1, 1);

/// Tunable constants of the 4×3 gridworld.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridworldParams {
    /// Probability that the intended move happens; the remainder is split
    /// evenly between the two perpendicular moves.
    pub success_prob: f64,
    /// Reward paid on every step.
    pub step_reward: f64,
    /// Extra reward for entering the goal cell (4,3).
    pub goal_reward: f64,
    /// Extra reward for entering the pit cell (4,2).
    pub pit_reward: f64,
}

impl Default for GridworldParams {
    fn default() -> Self {
        GridworldParams { success_prob: 0.8, step_reward: -0.04, goal_reward: 1.0, pit_reward: -1.0 }
    }
}

/// State index of grid cell `(col, row)`, both 1-based with row 1 at the
/// bottom. `None` for the blocked cell or out-of-range coordinates.
pub fn gridworld_state(col: usize, row: usize) -> Option<usize> {
    if !(1..=GRID_COLS).contains(&col) || !(1..=GRID_ROWS).contains(&row) || (col, row) == BLOCKED {
        return None;
    }
    let linear = (row - 1) * GRID_COLS + (col - 1);
    let blocked_linear = (BLOCKED.1 - 1) * GRID_COLS + (BLOCKED.0 - 1);
    Some(if linear > blocked_linear { linear - 1 } else { linear })
}

/// Inverse of [`gridworld_state`].
pub fn gridworld_cell(state: usize) -> Option<(usize, usize)> {
    (1..=GRID_ROWS)
        .flat_map(|row| (1..=GRID_COLS).map(move |col| (col, row)))
        .find(|&(col, row)| gridworld_state(col, row) == Some(state))
}

fn grid_move((col, row): (usize, usize), action: usize) -> (usize, usize) {
    let target = match action {
        NORTH => (col, row + 1),
        SOUTH => (col, row.wrapping_sub(1)),
        EAST => (col + 1, row),
        _ => (col.wrapping_sub(1), row),
    };
    if gridworld_state(target.0, target.1).is_some() {
        target
    } else {
        (col, row)
    }
}

fn perpendicular(action: usize) -> [usize; 2] {
    match action {
        NORTH | SOUTH => [EAST, WEST],
        _ => [NORTH, SOUTH],
    }
}

/// The 11-state gridworld with default constants.
pub fn make_gridworld() -> TabularMdp {
    make_gridworld_with(&GridworldParams::default()).expect("default gridworld constants are valid")
}

/// The 4×3 gridworld with a wall at (2,2), goal at (4,3) and pit at (4,2).
///
/// Bumping into the wall or the boundary leaves the agent in place.
/// Every step pays `step_reward`; entering the goal or pit additionally
/// pays its terminal reward. Episodes start at (1,1).
pub fn make_gridworld_with(params: &GridworldParams) -> Result<TabularMdp> {
    if !(0.0..=1.0).contains(&params.success_prob) {
        return Err(Error::param("success_prob", format!("{} not in [0, 1]", params.success_prob)));
    }
    for (name, v) in [
        ("step_reward", params.step_reward),
        ("goal_reward", params.goal_reward),
        ("pit_reward", params.pit_reward),
    ] {
        if !v.is_finite() {
            return Err(Error::param(name, "must be finite"));
        }
    }
    let ns = GRID_COLS * GRID_ROWS - 1;
    let na = 4;
    let slip = (1.0 - params.success_prob) / 2.0;
    let goal = gridworld_state(GOAL.0, GOAL.1).unwrap();
    let pit = gridworld_state(PIT.0, PIT.1).unwrap();
    let mut transition = vec![0.0; ns * na * ns];
    let mut reward = vec![0.0; ns * na * ns];

    for s in 0..ns {
        let cell = gridworld_cell(s).unwrap();
        for a in 0..na {
            let base = (s * na + a) * ns;
            if s == goal || s == pit {
                transition[base + s] = 1.0;
                continue;
            }
            let [p1, p2] = perpendicular(a);
            for (dir, p) in [(a, params.success_prob), (p1, slip), (p2, slip)] {
                let (c, r) = grid_move(cell, dir);
                transition[base + gridworld_state(c, r).unwrap()] += p;
            }
            for next in 0..ns {
                if transition[base + next] > 0.0 {
                    reward[base + next] = params.step_reward
                        + if next == goal {
                            params.goal_reward
                        } else if next == pit {
                            params.pit_reward
                        } else {
                            0.0
                        };
                }
            }
        }
    }

    let mut terminal = vec![false; ns];
    terminal[goal] = true;
    terminal[pit] = true;
    let mut start = vec![0.0; ns];
    start[gridworld_state(START.0, START.1).unwrap()] = 1.0;
    TabularMdp::new(ns, na, transition, reward, terminal, start)
}
