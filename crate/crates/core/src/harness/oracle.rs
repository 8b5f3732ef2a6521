//! Exact action values of the pickup and drop sub-tasks by value iteration.
//!
//! The sub-task dynamics are re-derived here from the reward rules rather
//! than by calling into the environment, so that the learned tables can be
//! checked against an independent solution.

use std::collections::HashMap;

use crate::abstraction::AbstractState;
use crate::environment::{Action, GridConfig, Position};
use crate::error::{Error, Result};
use crate::learner::QTable;

/// Largest number of state-action pairs the solver accepts.
pub const MAX_PAIRS: usize = 1_000_000;
pub const TOLERANCE: f64 = 1e-9;
const MAX_SWEEPS: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Subtask {
    Pickup,
    Drop,
}

impl Subtask {
    pub fn name(self) -> &'static str {
        match self {
            Subtask::Pickup => "pickup",
            Subtask::Drop => "drop",
        }
    }
}

impl std::str::FromStr for Subtask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pickup" => Ok(Subtask::Pickup),
            "drop" => Ok(Subtask::Drop),
            other => Err(Error::config(format!("unknown subtask {other:?}"))),
        }
    }
}

/// Result of a transition in the sub-task MDP.
#[derive(Clone, Copy, Debug)]
struct Edge {
    reward: f64,
    /// `None` when the sub-task ends.
    next: Option<usize>,
}

fn shift(p: Position, action: Action, width: usize, height: usize) -> Option<Position> {
    let (dr, dc): (i64, i64) = match action {
        Action::Up => (-1, 0),
        Action::Down => (1, 0),
        Action::Left => (0, -1),
        Action::Right => (0, 1),
        Action::NoOp => (0, 0),
    };
    let r = p.row as i64 + dr;
    let c = p.col as i64 + dc;
    (r >= 0 && c >= 0 && (r as usize) < height && (c as usize) < width)
        .then(|| Position::new(r as usize, c as usize))
}

fn enumerate(cfg: &GridConfig, task: Subtask) -> Vec<AbstractState> {
    let cells: Vec<Position> = cfg.cells().collect();
    match task {
        Subtask::Pickup => cells
            .iter()
            .filter(|&&g| g != cfg.bank)
            .flat_map(|&gem_pos| {
                cells
                    .iter()
                    .filter(move |&&a| a != gem_pos)
                    .map(move |&agent_pos| AbstractState::Pickup { agent_pos, gem_pos })
            })
            .collect(),
        Subtask::Drop => cells
            .iter()
            .filter(|&&a| a != cfg.bank)
            .map(|&agent_pos| AbstractState::Drop { agent_pos })
            .collect(),
    }
}

fn transition(cfg: &GridConfig, s: &AbstractState, a: Action) -> (f64, Option<AbstractState>) {
    let (agent, goal, goal_reward) = match *s {
        AbstractState::Pickup { agent_pos, gem_pos } => (agent_pos, gem_pos, 50.0),
        AbstractState::Drop { agent_pos } => (agent_pos, cfg.bank, 500.0),
        _ => unreachable!("oracle only enumerates sub-task states"),
    };
    let with_agent = |p: Position| match *s {
        AbstractState::Pickup { gem_pos, .. } => AbstractState::Pickup { agent_pos: p, gem_pos },
        _ => AbstractState::Drop { agent_pos: p },
    };
    match shift(agent, a, cfg.width, cfg.height) {
        None => (-5.0, Some(s.clone())),
        Some(_) if a == Action::NoOp => (cfg.noop_reward, Some(s.clone())),
        Some(p) if p == goal => (goal_reward, None),
        Some(p) => (-1.0, Some(with_agent(p))),
    }
}

/// Optimal action values of `task` on `cfg`'s grid, discounted by `gamma`.
/// Terminal transitions (acquiring the gem, reaching the bank) do not
/// bootstrap.
pub fn value_iteration_oracle(cfg: &GridConfig, task: Subtask, gamma: f64) -> Result<QTable> {
    cfg.validate()?;
    let cells = cfg.width * cfg.height;
    let state_count = match task {
        Subtask::Pickup => (cells - 1).saturating_mul(cells - 1),
        Subtask::Drop => cells - 1,
    };
    if state_count.saturating_mul(Action::COUNT) > MAX_PAIRS {
        return Err(Error::Refused(format!(
            "{} sub-task on a {}x{} grid has {} state-action pairs (limit {MAX_PAIRS})",
            task.name(),
            cfg.width,
            cfg.height,
            state_count * Action::COUNT
        )));
    }

    let states = enumerate(cfg, task);
    let index: HashMap<&AbstractState, usize> = states.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let edges: Vec<[Edge; Action::COUNT]> = states
        .iter()
        .map(|s| {
            Action::ALL.map(|a| {
                let (reward, next) = transition(cfg, s, a);
                Edge {
                    reward,
                    next: next.map(|n| index[&n]),
                }
            })
        })
        .collect();

    let mut q = vec![[0.0f64; Action::COUNT]; states.len()];
    let mut v = vec![0.0f64; states.len()];
    for sweep in 1..=MAX_SWEEPS {
        let mut delta: f64 = 0.0;
        for (row, out) in q.iter_mut().zip(&edges) {
            for (value, edge) in row.iter_mut().zip(out) {
                let target = edge.reward + edge.next.map_or(0.0, |n| gamma * v[n]);
                delta = delta.max((target - *value).abs());
                *value = target;
            }
        }
        for (vs, row) in v.iter_mut().zip(&q) {
            *vs = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        }
        if delta < TOLERANCE {
            let mut table = QTable::new();
            for (s, row) in states.iter().zip(&q) {
                for a in Action::ALL {
                    table.set(s, a, row[a.index()]);
                }
            }
            return Ok(table);
        }
        if sweep == MAX_SWEEPS {
            return Err(Error::NoConvergence {
                iterations: sweep,
                delta,
            });
        }
    }
    unreachable!()
}
