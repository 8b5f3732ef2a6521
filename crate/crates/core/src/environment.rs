//! The Bank world: agents walk a rectangular grid, pick up gems by stepping
//! onto them and deposit them by stepping onto the bank cell.
//!
//! Every agent moves independently and deterministically. Agents may share a
//! cell, there are no obstacles, and an agent carries at most one gem.

use std::fmt;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const REWARD_ILLEGAL: f64 = -5.0;
pub const REWARD_STEP: f64 = -1.0;
pub const REWARD_ACQUIRE: f64 = 50.0;
pub const REWARD_DROP: f64 = 500.0;

/// Grid cell, row 0 at the top.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Position {
    pub row: usize,
    pub col: usize,
}

impl Position {
    pub const fn new(row: usize, col: usize) -> Self {
        Position { row, col }
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.row, self.col)
    }
}

/// The five primitive actions, in canonical index order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
    NoOp,
}

impl Action {
    pub const COUNT: usize = 5;
    pub const ALL: [Action; 5] = [
        Action::Up,
        Action::Down,
        Action::Left,
        Action::Right,
        Action::NoOp,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Action> {
        Action::ALL.get(index).copied()
    }

    /// Destination of this action from `from`, or `None` when it would leave
    /// a `width` x `height` grid.
    pub fn apply(self, from: Position, width: usize, height: usize) -> Option<Position> {
        let Position { row, col } = from;
        match self {
            Action::Up => row.checked_sub(1).map(|r| Position::new(r, col)),
            Action::Down => (row + 1 < height).then(|| Position::new(row + 1, col)),
            Action::Left => col.checked_sub(1).map(|c| Position::new(row, c)),
            Action::Right => (col + 1 < width).then(|| Position::new(row, col + 1)),
            Action::NoOp => Some(from),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GemStatus {
    OnGrid(Position),
    CarriedBy(usize),
    Dropped,
}

/// Initial placement of agents and gems.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Layout {
    Fixed {
        agents: Vec<Position>,
        gems: Vec<Position>,
    },
    /// Gems on distinct non-bank cells and agents on gem-free cells, drawn
    /// from the reset seed.
    Random,
}

impl Layout {
    /// Deterministic default placement: agents start in opposite corners,
    /// gems in the remaining corners and then the edge midpoints. Leftover
    /// entities fill free cells in row-major order.
    pub fn spread(
        width: usize,
        height: usize,
        bank: Position,
        num_agents: usize,
        num_gems: usize,
    ) -> Result<Layout> {
        let (h, w) = (height - 1, width - 1);
        let agent_prefs = [
            Position::new(0, 0),
            Position::new(h, w),
            Position::new(0, w / 2),
            Position::new(h, w / 2),
        ];
        let gem_prefs = [
            Position::new(0, w),
            Position::new(h, 0),
            Position::new(h / 2, 0),
            Position::new(h / 2, w),
        ];
        let row_major = (0..height).flat_map(|r| (0..width).map(move |c| Position::new(r, c)));

        let mut agents = Vec::with_capacity(num_agents);
        for p in agent_prefs.iter().copied().chain(row_major.clone()) {
            if agents.len() == num_agents {
                break;
            }
            if !agents.contains(&p) {
                agents.push(p);
            }
        }

        let mut gems = Vec::with_capacity(num_gems);
        for p in gem_prefs.iter().copied().chain(row_major) {
            if gems.len() == num_gems {
                break;
            }
            if p != bank && !agents.contains(&p) && !gems.contains(&p) {
                gems.push(p);
            }
        }
        if agents.len() < num_agents || gems.len() < num_gems {
            return Err(Error::config(format!(
                "{width}x{height} grid cannot hold {num_agents} agents and {num_gems} gems"
            )));
        }
        Ok(Layout::Fixed { agents, gems })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridConfig {
    pub width: usize,
    pub height: usize,
    pub bank: Position,
    pub num_agents: usize,
    pub num_gems: usize,
    pub step_limit: usize,
    /// Reward for a NoOp. Either 0 or -1.
    pub noop_reward: f64,
    pub layout: Layout,
}

impl GridConfig {
    /// Grid with the bank at the center, the spread layout, a 1000-step
    /// episode limit and a zero NoOp reward.
    pub fn new(width: usize, height: usize, num_agents: usize, num_gems: usize) -> Result<Self> {
        if width < 3 || height < 3 {
            return Err(Error::config(format!(
                "grid must be at least 3x3, got {width}x{height}"
            )));
        }
        let bank = Self::center(width, height);
        let layout = Layout::spread(width, height, bank, num_agents, num_gems)?;
        let cfg = GridConfig {
            width,
            height,
            bank,
            num_agents,
            num_gems,
            step_limit: 1000,
            noop_reward: 0.0,
            layout,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn center(width: usize, height: usize) -> Position {
        Position::new((height - 1) / 2, (width - 1) / 2)
    }

    pub fn with_step_limit(mut self, step_limit: usize) -> Self {
        self.step_limit = step_limit;
        self
    }

    pub fn with_noop_reward(mut self, noop_reward: f64) -> Self {
        self.noop_reward = noop_reward;
        self
    }

    pub fn with_layout(mut self, layout: Layout) -> Self {
        self.layout = layout;
        self
    }

    pub fn contains(&self, p: Position) -> bool {
        p.row < self.height && p.col < self.width
    }

    pub fn cells(&self) -> impl Iterator<Item = Position> + '_ {
        (0..self.height).flat_map(move |r| (0..self.width).map(move |c| Position::new(r, c)))
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 3 || self.height < 3 {
            return Err(Error::config(format!(
                "grid must be at least 3x3, got {}x{}",
                self.width, self.height
            )));
        }
        let bank = self.bank;
        let interior = bank.row >= 1
            && bank.col >= 1
            && bank.row + 1 < self.height
            && bank.col + 1 < self.width;
        if !interior {
            return Err(Error::config(format!(
                "bank {bank} must lie strictly inside the grid"
            )));
        }
        if self.num_agents == 0 {
            return Err(Error::config("at least one agent is required"));
        }
        if self.num_gems == 0 {
            return Err(Error::config("at least one gem is required"));
        }
        if self.step_limit == 0 {
            return Err(Error::config("step limit must be positive"));
        }
        if self.noop_reward != 0.0 && self.noop_reward != -1.0 {
            return Err(Error::config(format!(
                "noop reward must be 0 or -1, got {}",
                self.noop_reward
            )));
        }
        match &self.layout {
            Layout::Fixed { agents, gems } => {
                if agents.len() != self.num_agents {
                    return Err(Error::config(format!(
                        "layout lists {} agents, expected {}",
                        agents.len(),
                        self.num_agents
                    )));
                }
                if gems.len() != self.num_gems {
                    return Err(Error::config(format!(
                        "layout lists {} gems, expected {}",
                        gems.len(),
                        self.num_gems
                    )));
                }
                for (i, &p) in agents.iter().enumerate() {
                    if !self.contains(p) {
                        return Err(Error::config(format!("agent {i} at {p} is off the grid")));
                    }
                }
                for (j, &p) in gems.iter().enumerate() {
                    if !self.contains(p) {
                        return Err(Error::config(format!("gem {j} at {p} is off the grid")));
                    }
                    if p == bank {
                        return Err(Error::config(format!("gem {j} placed on the bank {p}")));
                    }
                    if gems[..j].contains(&p) {
                        return Err(Error::config(format!("gem {j} shares cell {p}")));
                    }
                }
            }
            Layout::Random => {
                let cells = self.width * self.height;
                if self.num_gems + 1 >= cells {
                    return Err(Error::config(format!(
                        "{} gems do not fit on a {}x{} grid",
                        self.num_gems, self.width, self.height
                    )));
                }
            }
        }
        Ok(())
    }
}

/// What happened to the acting agent in one `step_agent` call.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepEvent {
    Illegal,
    Acquired(usize),
    Dropped(usize),
    Moved,
    Idle,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub event: StepEvent,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct WorldState {
    pub agent_positions: Vec<Position>,
    pub gems: Vec<GemStatus>,
    pub step: usize,
}

impl WorldState {
    /// Initial state of an episode. The seed only matters for
    /// [`Layout::Random`].
    pub fn reset(config: &GridConfig, seed: u64) -> Result<WorldState> {
        config.validate()?;
        let (agents, gems) = match &config.layout {
            Layout::Fixed { agents, gems } => (agents.clone(), gems.clone()),
            Layout::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let free: Vec<Position> = config.cells().filter(|&p| p != config.bank).collect();
                let gems: Vec<Position> = sample(&mut rng, free.len(), config.num_gems)
                    .into_iter()
                    .map(|i| free[i])
                    .collect();
                let open: Vec<Position> = config.cells().filter(|p| !gems.contains(p)).collect();
                let agents = (0..config.num_agents)
                    .map(|_| open[rng.gen_range(0..open.len())])
                    .collect();
                (agents, gems)
            }
        };
        Ok(WorldState {
            agent_positions: agents,
            gems: gems.into_iter().map(GemStatus::OnGrid).collect(),
            step: 0,
        })
    }

    pub fn num_agents(&self) -> usize {
        self.agent_positions.len()
    }

    /// Gem currently held by `agent`.
    pub fn carried_by(&self, agent: usize) -> Option<usize> {
        self.gems
            .iter()
            .position(|g| *g == GemStatus::CarriedBy(agent))
    }

    pub fn gem_position(&self, gem: usize) -> Option<Position> {
        match self.gems.get(gem) {
            Some(GemStatus::OnGrid(p)) => Some(*p),
            _ => None,
        }
    }

    pub fn dropped_count(&self) -> usize {
        self.gems
            .iter()
            .filter(|g| matches!(g, GemStatus::Dropped))
            .count()
    }

    pub fn all_dropped(&self) -> bool {
        self.gems.iter().all(|g| matches!(g, GemStatus::Dropped))
    }

    pub fn is_legal(&self, config: &GridConfig, agent: usize, action: Action) -> bool {
        action
            .apply(self.agent_positions[agent], config.width, config.height)
            .is_some()
    }

    pub fn is_terminal(&self, config: &GridConfig) -> bool {
        self.all_dropped() || self.step >= config.step_limit
    }

    pub fn advance_step(&mut self) {
        self.step += 1;
    }

    /// Moves a single agent. Acquisition and deposit happen automatically on
    /// entering the gem or bank cell.
    ///
    /// `assigned_gem` is the planner's allocation for this agent. When it is
    /// `None` the agent may pick up any gem lying on the cell it enters
    /// (lowest gem index first).
    pub fn step_agent(
        &mut self,
        config: &GridConfig,
        agent: usize,
        action: Action,
        assigned_gem: Option<usize>,
    ) -> Result<StepOutcome> {
        if agent >= self.num_agents() {
            return Err(Error::contract(format!(
                "agent {agent} out of range ({} agents)",
                self.num_agents()
            )));
        }
        if let Some(gem) = assigned_gem {
            match self.gems.get(gem) {
                None => return Err(Error::contract(format!("gem {gem} does not exist"))),
                Some(GemStatus::Dropped) => {
                    return Err(Error::contract(format!(
                        "gem {gem} is already dropped and cannot be assigned"
                    )))
                }
                Some(GemStatus::CarriedBy(other)) if *other != agent => {
                    return Err(Error::contract(format!(
                        "gem {gem} is carried by agent {other}, not agent {agent}"
                    )))
                }
                _ => {}
            }
        }

        let from = self.agent_positions[agent];
        let Some(to) = action.apply(from, config.width, config.height) else {
            return Ok(StepOutcome {
                reward: REWARD_ILLEGAL,
                event: StepEvent::Illegal,
            });
        };
        if action == Action::NoOp {
            return Ok(StepOutcome {
                reward: config.noop_reward,
                event: StepEvent::Idle,
            });
        }
        self.agent_positions[agent] = to;

        match self.carried_by(agent) {
            Some(gem) if to == config.bank => {
                self.gems[gem] = GemStatus::Dropped;
                Ok(StepOutcome {
                    reward: REWARD_DROP,
                    event: StepEvent::Dropped(gem),
                })
            }
            Some(_) => Ok(moved()),
            None => {
                let eligible = match assigned_gem {
                    Some(gem) => (self.gems[gem] == GemStatus::OnGrid(to)).then_some(gem),
                    None => self.gems.iter().position(|g| *g == GemStatus::OnGrid(to)),
                };
                match eligible {
                    Some(gem) => {
                        self.gems[gem] = GemStatus::CarriedBy(agent);
                        Ok(StepOutcome {
                            reward: REWARD_ACQUIRE,
                            event: StepEvent::Acquired(gem),
                        })
                    }
                    None => Ok(moved()),
                }
            }
        }
    }

    /// Checks gem conservation and the single-carry rule.
    pub fn check_invariants(&self, config: &GridConfig) -> Result<()> {
        if self.gems.len() != config.num_gems {
            return Err(Error::contract(format!(
                "{} gem statuses for {} gems",
                self.gems.len(),
                config.num_gems
            )));
        }
        if self.agent_positions.len() != config.num_agents {
            return Err(Error::contract("agent count changed"));
        }
        for (i, p) in self.agent_positions.iter().enumerate() {
            if !config.contains(*p) {
                return Err(Error::contract(format!("agent {i} left the grid at {p}")));
            }
        }
        let mut carrying = vec![false; config.num_agents];
        for (j, g) in self.gems.iter().enumerate() {
            match *g {
                GemStatus::OnGrid(p) if !config.contains(p) => {
                    return Err(Error::contract(format!("gem {j} off the grid")));
                }
                GemStatus::CarriedBy(a) => {
                    if a >= config.num_agents {
                        return Err(Error::contract(format!("gem {j} carried by unknown agent {a}")));
                    }
                    if std::mem::replace(&mut carrying[a], true) {
                        return Err(Error::contract(format!("agent {a} carries two gems")));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}

fn moved() -> StepOutcome {
    StepOutcome {
        reward: REWARD_STEP,
        event: StepEvent::Moved,
    }
}
