//! Greedy Manhattan-distance task allocation.
//!
//! Free agents are served in ascending index order; each takes the nearest
//! gem that is still on the grid and unassigned (ties go to the lowest gem
//! index). Assignments are only removed by [`Assignment::release`].

use crate::environment::{GemStatus, Position, WorldState};
use crate::error::{Error, Result};

pub fn manhattan(a: Position, b: Position) -> usize {
    a.row.abs_diff(b.row) + a.col.abs_diff(b.col)
}

/// Injective partial map between agents and gems.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Assignment {
    agent_to_gem: Vec<Option<usize>>,
    gem_to_agent: Vec<Option<usize>>,
}

impl Assignment {
    pub fn empty(num_agents: usize, num_gems: usize) -> Self {
        Assignment {
            agent_to_gem: vec![None; num_agents],
            gem_to_agent: vec![None; num_gems],
        }
    }

    pub fn gem_of(&self, agent: usize) -> Option<usize> {
        self.agent_to_gem.get(agent).copied().flatten()
    }

    pub fn agent_of(&self, gem: usize) -> Option<usize> {
        self.gem_to_agent.get(gem).copied().flatten()
    }

    pub fn is_empty(&self) -> bool {
        self.agent_to_gem.iter().all(Option::is_none)
    }

    /// `(agent, gem)` pairs in agent order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.agent_to_gem
            .iter()
            .enumerate()
            .filter_map(|(a, g)| g.map(|g| (a, g)))
    }

    fn bind(&mut self, agent: usize, gem: usize) {
        self.agent_to_gem[agent] = Some(gem);
        self.gem_to_agent[gem] = Some(agent);
    }

    /// Gives every free agent the closest unassigned on-grid gem.
    pub fn assign(&self, state: &WorldState) -> Assignment {
        let mut next = self.clone();
        next.agent_to_gem.resize(state.agent_positions.len(), None);
        next.gem_to_agent.resize(state.gems.len(), None);
        for (agent, &pos) in state.agent_positions.iter().enumerate() {
            if next.agent_to_gem[agent].is_some() {
                continue;
            }
            let nearest = state
                .gems
                .iter()
                .enumerate()
                .filter(|(gem, _)| next.gem_to_agent[*gem].is_none())
                .filter_map(|(gem, status)| match status {
                    GemStatus::OnGrid(p) => Some((manhattan(pos, *p), gem)),
                    _ => None,
                })
                .min();
            if let Some((_, gem)) = nearest {
                next.bind(agent, gem);
            }
        }
        next
    }

    /// Removes the pair holding `gem`, freeing its agent.
    pub fn release(&self, gem: usize) -> Result<Assignment> {
        let agent = self
            .agent_of(gem)
            .ok_or_else(|| Error::contract(format!("gem {gem} is not assigned")))?;
        let mut next = self.clone();
        next.agent_to_gem[agent] = None;
        next.gem_to_agent[gem] = None;
        Ok(next)
    }

    /// Verifies injectivity and consistency with the world state.
    pub fn check(&self, state: &WorldState) -> Result<()> {
        for (agent, gem) in self.pairs() {
            if self.agent_of(gem) != Some(agent) {
                return Err(Error::contract(format!(
                    "maps disagree on agent {agent} / gem {gem}"
                )));
            }
            if matches!(state.gems.get(gem), Some(GemStatus::Dropped) | None) {
                return Err(Error::contract(format!("gem {gem} assigned but not live")));
            }
        }
        for (gem, agent) in self.gem_to_agent.iter().enumerate() {
            if let Some(agent) = agent {
                if self.gem_of(*agent) != Some(gem) {
                    return Err(Error::contract(format!(
                        "gem {gem} points at agent {agent} which holds another gem"
                    )));
                }
            }
        }
        for (gem, status) in state.gems.iter().enumerate() {
            if let GemStatus::CarriedBy(agent) = status {
                if self.agent_of(gem) != Some(*agent) {
                    return Err(Error::contract(format!(
                        "gem {gem} carried by agent {agent} but not assigned to it"
                    )));
                }
            }
        }
        Ok(())
    }
}
