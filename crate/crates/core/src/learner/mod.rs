//! Central controller: shared Q-tables, option dispatch and TD learning.

mod controller;
mod qtable;

pub use controller::{option_for_agent, AgentStep, Controller, TableAccess};
pub use qtable::{AlphaSchedule, Hyperparams, QTable};

use std::fmt;
use std::str::FromStr;

use crate::abstraction::AbstractState;
use crate::environment::Action;
use crate::error::{Error, Result};

/// Sub-task an agent is currently executing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OptionId {
    Pickup,
    Drop,
    Idle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Random,
    FlatQ,
    OptionsQ,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Random, Method::FlatQ, Method::OptionsQ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Random => "random",
            Method::FlatQ => "q",
            Method::OptionsQ => "q-options",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Method::Random),
            "q" => Ok(Method::FlatQ),
            "q-options" => Ok(Method::OptionsQ),
            other => Err(Error::config(format!(
                "unknown method {other:?} (expected random, q or q-options)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ControllerMode {
    pub method: Method,
    pub planner: bool,
}

impl ControllerMode {
    pub fn new(method: Method, planner: bool) -> Self {
        ControllerMode { method, planner }
    }
}

/// The controller's value tables for one method.
#[derive(Clone, Debug, PartialEq)]
pub enum Tables {
    Random,
    Flat(QTable),
    Options { pickup: QTable, drop: QTable },
}

impl Tables {
    pub fn fresh(method: Method) -> Tables {
        match method {
            Method::Random => Tables::Random,
            Method::FlatQ => Tables::Flat(QTable::new()),
            Method::OptionsQ => Tables::Options {
                pickup: QTable::new(),
                drop: QTable::new(),
            },
        }
    }

    pub fn method(&self) -> Method {
        match self {
            Tables::Random => Method::Random,
            Tables::Flat(_) => Method::FlatQ,
            Tables::Options { .. } => Method::OptionsQ,
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            Tables::Random => true,
            Tables::Flat(q) => q.is_empty(),
            Tables::Options { pickup, drop } => pickup.is_empty() && drop.is_empty(),
        }
    }

    /// Table consulted while executing `option`.
    pub fn for_option(&self, option: OptionId) -> Option<&QTable> {
        match (self, option) {
            (_, OptionId::Idle) | (Tables::Random, _) => None,
            (Tables::Flat(q), _) => Some(q),
            (Tables::Options { pickup, .. }, OptionId::Pickup) => Some(pickup),
            (Tables::Options { drop, .. }, OptionId::Drop) => Some(drop),
        }
    }

    pub fn for_option_mut(&mut self, option: OptionId) -> Option<&mut QTable> {
        match (self, option) {
            (_, OptionId::Idle) | (Tables::Random, _) => None,
            (Tables::Flat(q), _) => Some(q),
            (Tables::Options { pickup, .. }, OptionId::Pickup) => Some(pickup),
            (Tables::Options { drop, .. }, OptionId::Drop) => Some(drop),
        }
    }

    pub fn digest(&self) -> u64 {
        match self {
            Tables::Random => 0,
            Tables::Flat(q) => q.digest(),
            Tables::Options { pickup, drop } => pickup.digest().rotate_left(1) ^ drop.digest(),
        }
    }
}

/// Epsilon-free policy for one option. Idle always yields NoOp and the
/// random method has no greedy policy, so it falls back to NoOp as well.
pub fn greedy_policy(tables: &Tables, option: OptionId) -> impl Fn(&AbstractState) -> Action + '_ {
    let table = tables.for_option(option);
    move |s| table.map_or(Action::NoOp, |q| q.greedy(s))
}
