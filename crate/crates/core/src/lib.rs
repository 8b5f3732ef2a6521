//! Multi-agent Bank world with a centralized tabular Q-learning controller.
//!
//! Agents collect gems and deposit them at a central bank. A single
//! controller owns the Q-tables; every agent reads and updates them through
//! its own abstract view of the world. Learning can be flat (one table) or
//! split into pickup and drop options, and a Manhattan-distance planner can
//! hand each agent a gem.

pub mod abstraction;
pub mod environment;
pub mod error;
pub mod harness;
pub mod learner;
pub mod parallel;
pub mod planner;

pub use abstraction::AbstractState;
pub use environment::{Action, GemStatus, GridConfig, Layout, Position, StepEvent, StepOutcome, WorldState};
pub use error::{Error, Result};
pub use harness::{EpisodeRecord, RunConfig, TrainOutput};
pub use learner::{ControllerMode, Hyperparams, Method, OptionId, QTable, Tables};
pub use parallel::Execution;
pub use planner::Assignment;
