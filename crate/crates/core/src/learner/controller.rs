use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ControllerMode, Hyperparams, Method, OptionId, Tables};
use crate::abstraction::{abstract_drop, abstract_flat, abstract_no_planner, abstract_pickup, AbstractState};
use crate::environment::{Action, GridConfig, StepEvent, StepOutcome, WorldState};
use crate::error::Result;
use crate::planner::Assignment;

/// Which option an agent executes. `assignment` is `None` when the planner
/// is disabled, in which case a non-carrying agent always runs Pickup.
pub fn option_for_agent(state: &WorldState, agent: usize, assignment: Option<&Assignment>) -> OptionId {
    if state.carried_by(agent).is_some() {
        return OptionId::Drop;
    }
    match assignment {
        None => OptionId::Pickup,
        Some(a) if a.gem_of(agent).is_some() => OptionId::Pickup,
        Some(_) => OptionId::Idle,
    }
}

/// Read/write access to the controller's tables.
pub enum TableAccess<'t> {
    Learn(&'t mut Tables),
    Frozen(&'t Tables),
}

impl TableAccess<'_> {
    fn tables(&self) -> &Tables {
        match self {
            TableAccess::Learn(t) => t,
            TableAccess::Frozen(t) => t,
        }
    }
}

/// One agent's turn within a controller step.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentStep {
    pub agent: usize,
    pub option: OptionId,
    /// Abstract state the action was chosen from; `None` for Idle agents
    /// and the random method.
    pub state: Option<AbstractState>,
    pub action: Action,
    pub outcome: StepOutcome,
}

/// Drives all agents of one episode through a shared set of tables.
pub struct Controller<'a> {
    config: &'a GridConfig,
    mode: ControllerMode,
    hyper: &'a Hyperparams,
    rng: ChaCha8Rng,
    assignment: Assignment,
    planner_calls: u64,
}

impl<'a> Controller<'a> {
    pub fn new(config: &'a GridConfig, mode: ControllerMode, hyper: &'a Hyperparams, seed: u64) -> Self {
        Controller {
            config,
            mode,
            hyper,
            rng: ChaCha8Rng::seed_from_u64(seed),
            assignment: Assignment::empty(config.num_agents, config.num_gems),
            planner_calls: 0,
        }
    }

    pub fn mode(&self) -> ControllerMode {
        self.mode
    }

    pub fn assignment(&self) -> &Assignment {
        &self.assignment
    }

    /// Number of times the planner has been consulted.
    pub fn planner_calls(&self) -> u64 {
        self.planner_calls
    }

    /// Clears the assignment for a new episode. The random stream carries on.
    pub fn begin_episode(&mut self) {
        self.assignment = Assignment::empty(self.config.num_agents, self.config.num_gems);
    }

    fn plan(&mut self, state: &WorldState) {
        self.planner_calls += 1;
        self.assignment = self.assignment.assign(state);
    }

    fn observe(&self, state: &WorldState, agent: usize, option: OptionId) -> Result<Option<AbstractState>> {
        let planner = self.mode.planner;
        Ok(match (self.mode.method, option) {
            (Method::Random, _) | (_, OptionId::Idle) => None,
            (Method::FlatQ, _) if planner => Some(abstract_flat(state, agent, &self.assignment, self.config.bank)),
            (Method::FlatQ, _) => Some(abstract_no_planner(state, agent)),
            (Method::OptionsQ, OptionId::Drop) => Some(abstract_drop(state, agent)?),
            (Method::OptionsQ, OptionId::Pickup) if planner => {
                let gem = self.assignment.gem_of(agent).expect("pickup option without an assignment");
                Some(abstract_pickup(state, agent, gem)?)
            }
            (Method::OptionsQ, OptionId::Pickup) => Some(abstract_no_planner(state, agent)),
        })
    }

    /// Lets every agent act once, in ascending index, then advances the
    /// step counter. Agents after the final deposit do not act.
    pub fn step(
        &mut self,
        state: &mut WorldState,
        mut tables: TableAccess<'_>,
        epsilon: f64,
    ) -> Result<Vec<AgentStep>> {
        let planner = self.mode.planner;
        let mut turns = Vec::with_capacity(state.num_agents());
        for agent in 0..state.num_agents() {
            if state.all_dropped() {
                break;
            }
            if planner {
                self.plan(state);
            }
            let option = option_for_agent(state, agent, planner.then_some(&self.assignment));
            let observed = self.observe(state, agent, option)?;
            let action = match (option, &observed) {
                (OptionId::Idle, _) => Action::NoOp,
                (_, None) => Action::ALL[self.rng.gen_range(0..Action::COUNT)],
                (_, Some(s)) => tables
                    .tables()
                    .for_option(option)
                    .expect("learning method without a table")
                    .select_action(s, epsilon, &mut self.rng),
            };

            let assigned = if planner { self.assignment.gem_of(agent) } else { None };
            let outcome = state.step_agent(self.config, agent, action, assigned)?;
            if let (StepEvent::Dropped(gem), true) = (outcome.event, planner) {
                self.assignment = self.assignment.release(gem)?;
            }

            if let (TableAccess::Learn(t), Some(s)) = (&mut tables, &observed) {
                let (terminal, next) = match self.mode.method {
                    Method::OptionsQ => {
                        let done = matches!(
                            (option, outcome.event),
                            (OptionId::Pickup, StepEvent::Acquired(_)) | (OptionId::Drop, StepEvent::Dropped(_))
                        );
                        if done {
                            (true, None)
                        } else {
                            (false, self.observe(state, agent, option)?)
                        }
                    }
                    _ => {
                        if matches!(outcome.event, StepEvent::Dropped(_)) && planner {
                            // the agent's next target is whatever the planner hands out now
                            self.plan(state);
                        }
                        let next_option = option_for_agent(state, agent, planner.then_some(&self.assignment));
                        let next = match next_option {
                            OptionId::Idle => Some(abstract_flat(state, agent, &self.assignment, self.config.bank)),
                            o => self.observe(state, agent, o)?,
                        };
                        (state.all_dropped(), next)
                    }
                };
                let table = t.for_option_mut(option).expect("learning method without a table");
                match next {
                    Some(next) => table.td_update(s, action, outcome.reward, &next, terminal, self.hyper),
                    None => table.td_update(s, action, outcome.reward, s, true, self.hyper),
                };
            }

            turns.push(AgentStep {
                agent,
                option,
                state: observed,
                action,
                outcome,
            });
        }
        state.advance_step();
        Ok(turns)
    }

    /// Runs one episode from `state` until termination and returns the turns
    /// taken at every step.
    pub fn run_episode(
        &mut self,
        state: &mut WorldState,
        mut tables: TableAccess<'_>,
        epsilon: f64,
        mut on_step: impl FnMut(&[AgentStep]),
    ) -> Result<()> {
        self.begin_episode();
        while !state.is_terminal(self.config) {
            let access = match &mut tables {
                TableAccess::Learn(t) => TableAccess::Learn(t),
                TableAccess::Frozen(t) => TableAccess::Frozen(t),
            };
            let turns = self.step(state, access, epsilon)?;
            on_step(&turns);
        }
        Ok(())
    }
}
