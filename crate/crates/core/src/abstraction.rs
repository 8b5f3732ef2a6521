//! Per-agent projections of the world state.
//!
//! Each projection keeps only the facts that influence the agent's current
//! sub-task, so the Q-tables stay small and are shared between agents:
//!
//! * pickup: own position and the assigned gem's position
//! * drop: own position (the bank is fixed)
//! * flat: own position, current target and whether a gem is held
//! * no planner: own position, carry flag and every gem still on the grid

use std::fmt;
use std::str::FromStr;

use crate::environment::{GemStatus, Position, WorldState};
use crate::error::{Error, Result};
use crate::planner::Assignment;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AbstractState {
    Pickup {
        agent_pos: Position,
        gem_pos: Position,
    },
    Drop {
        agent_pos: Position,
    },
    Flat {
        agent_pos: Position,
        target_pos: Option<Position>,
        carrying: bool,
    },
    NoPlanner {
        agent_pos: Position,
        carrying: bool,
        gem_cells: Vec<Option<Position>>,
    },
}

pub fn abstract_pickup(state: &WorldState, agent: usize, gem: usize) -> Result<AbstractState> {
    let gem_pos = state
        .gem_position(gem)
        .ok_or_else(|| Error::contract(format!("gem {gem} is not on the grid")))?;
    if state.carried_by(agent).is_some() {
        return Err(Error::contract(format!(
            "agent {agent} is carrying and cannot be in a pickup state"
        )));
    }
    Ok(AbstractState::Pickup {
        agent_pos: state.agent_positions[agent],
        gem_pos,
    })
}

pub fn abstract_drop(state: &WorldState, agent: usize) -> Result<AbstractState> {
    if state.carried_by(agent).is_none() {
        return Err(Error::contract(format!("agent {agent} is not carrying a gem")));
    }
    Ok(AbstractState::Drop {
        agent_pos: state.agent_positions[agent],
    })
}

pub fn abstract_flat(
    state: &WorldState,
    agent: usize,
    assignment: &Assignment,
    bank: Position,
) -> AbstractState {
    let carrying = state.carried_by(agent).is_some();
    let target_pos = if carrying {
        Some(bank)
    } else {
        assignment
            .gem_of(agent)
            .and_then(|gem| state.gem_position(gem))
    };
    AbstractState::Flat {
        agent_pos: state.agent_positions[agent],
        target_pos,
        carrying,
    }
}

pub fn abstract_no_planner(state: &WorldState, agent: usize) -> AbstractState {
    AbstractState::NoPlanner {
        agent_pos: state.agent_positions[agent],
        carrying: state.carried_by(agent).is_some(),
        gem_cells: state
            .gems
            .iter()
            .map(|g| match g {
                GemStatus::OnGrid(p) => Some(*p),
                _ => None,
            })
            .collect(),
    }
}

fn flag(b: bool) -> u8 {
    u8::from(b)
}

/// Canonical text form: `P,r,c,gr,gc`, `D,r,c`, `F,r,c,tr,tc,k` (`F,r,c,_,k`
/// without a target) and `N,r,c,k,gems` where each gem is `r:c` or `_`.
impl fmt::Display for AbstractState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AbstractState::Pickup { agent_pos: a, gem_pos: g } => {
                write!(f, "P,{},{},{},{}", a.row, a.col, g.row, g.col)
            }
            AbstractState::Drop { agent_pos: a } => write!(f, "D,{},{}", a.row, a.col),
            AbstractState::Flat {
                agent_pos: a,
                target_pos,
                carrying,
            } => {
                write!(f, "F,{},{},", a.row, a.col)?;
                match target_pos {
                    Some(t) => write!(f, "{},{},", t.row, t.col)?,
                    None => write!(f, "_,")?,
                }
                write!(f, "{}", flag(*carrying))
            }
            AbstractState::NoPlanner {
                agent_pos: a,
                carrying,
                gem_cells,
            } => {
                write!(f, "N,{},{},{}", a.row, a.col, flag(*carrying))?;
                for cell in gem_cells {
                    match cell {
                        Some(p) => write!(f, ",{}:{}", p.row, p.col)?,
                        None => write!(f, ",_")?,
                    }
                }
                Ok(())
            }
        }
    }
}

fn num(field: Option<&str>) -> std::result::Result<usize, String> {
    let s = field.ok_or("missing field")?;
    s.parse::<usize>()
        .map_err(|_| format!("expected a cell index, found {s:?}"))
}

fn bit(field: Option<&str>) -> std::result::Result<bool, String> {
    match field {
        Some("0") => Ok(false),
        Some("1") => Ok(true),
        other => Err(format!("expected 0 or 1, found {other:?}")),
    }
}

fn pos(fields: &mut std::str::Split<'_, char>) -> std::result::Result<Position, String> {
    Ok(Position::new(num(fields.next())?, num(fields.next())?))
}

fn parse_state(s: &str) -> std::result::Result<AbstractState, String> {
    let mut fields = s.split(',');
    let state = match fields.next() {
        Some("P") => AbstractState::Pickup {
            agent_pos: pos(&mut fields)?,
            gem_pos: pos(&mut fields)?,
        },
        Some("D") => AbstractState::Drop {
            agent_pos: pos(&mut fields)?,
        },
        Some("F") => {
            let agent_pos = pos(&mut fields)?;
            let rest: Vec<&str> = fields.by_ref().collect();
            let (target_pos, carry) = match rest.as_slice() {
                ["_", k] => (None, *k),
                [r, c, k] => (Some(Position::new(num(Some(r))?, num(Some(c))?)), *k),
                _ => return Err("flat state needs a target and a carry flag".into()),
            };
            AbstractState::Flat {
                agent_pos,
                target_pos,
                carrying: bit(Some(carry))?,
            }
        }
        Some("N") => {
            let agent_pos = pos(&mut fields)?;
            let carrying = bit(fields.next())?;
            let gem_cells = fields
                .by_ref()
                .map(|cell| match cell {
                    "_" => Ok(None),
                    _ => {
                        let (r, c) = cell
                            .split_once(':')
                            .ok_or_else(|| format!("expected r:c or _, found {cell:?}"))?;
                        Ok(Some(Position::new(num(Some(r))?, num(Some(c))?)))
                    }
                })
                .collect::<std::result::Result<Vec<_>, String>>()?;
            AbstractState::NoPlanner {
                agent_pos,
                carrying,
                gem_cells,
            }
        }
        other => return Err(format!("unknown state tag {other:?}")),
    };
    if let Some(extra) = fields.next() {
        return Err(format!("trailing field {extra:?}"));
    }
    Ok(state)
}

impl FromStr for AbstractState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_state(s).map_err(|msg| Error::parse(0, format!("{msg} in state {s:?}")))
    }
}
