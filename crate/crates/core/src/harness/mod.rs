//! Training and evaluation loops, the exact value-iteration oracle,
//! experiment suites and file output.

pub mod experiments;
pub mod io;
pub mod oracle;

use std::path::PathBuf;

use crate::environment::{GridConfig, WorldState};
use crate::error::{Error, Result};
use crate::learner::{AgentStep, Controller, ControllerMode, Hyperparams, Method, TableAccess, Tables};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub mode: ControllerMode,
    pub hyper: Hyperparams,
    pub episodes: usize,
    pub eval_runs: usize,
    /// Trailing-mean reward that counts as "learned". When absent the
    /// experiment suites derive one from the oracle.
    pub threshold: Option<f64>,
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(grid: GridConfig, mode: ControllerMode, hyper: Hyperparams, episodes: usize) -> Self {
        RunConfig {
            grid,
            mode,
            hyper,
            episodes,
            eval_runs: 10,
            threshold: None,
            output_dir: None,
        }
    }

    pub fn with_mode(&self, mode: ControllerMode) -> Self {
        RunConfig { mode, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.hyper.validate()?;
        if self.episodes == 0 {
            return Err(Error::config("episodes must be at least 1"));
        }
        if self.eval_runs == 0 {
            return Err(Error::config("eval runs must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRecord {
    pub episode: usize,
    /// Sum of rewards over all agents and steps.
    pub total_reward: f64,
    pub steps_used: usize,
    pub gems_dropped: usize,
    pub epsilon: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutput {
    pub tables: Tables,
    pub records: Vec<EpisodeRecord>,
    pub planner_calls: u64,
}

/// Reset seed of training episode `episode`. Independent of the method so
/// that every arm of a comparison sees the same initial states.
pub fn episode_seed(seed: u64, episode: usize) -> u64 {
    splitmix64(seed ^ splitmix64(episode as u64 ^ 0xA076_1D64_78BD_642F))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Trains for `cfg.episodes` episodes with a linearly annealed epsilon.
pub fn train(cfg: &RunConfig) -> Result<TrainOutput> {
    cfg.validate()?;
    let mut tables = Tables::fresh(cfg.mode.method);
    let mut controller = Controller::new(&cfg.grid, cfg.mode, &cfg.hyper, cfg.hyper.seed);
    let mut records = Vec::with_capacity(cfg.episodes);
    for episode in 0..cfg.episodes {
        let epsilon = match cfg.mode.method {
            Method::Random => 1.0,
            _ => cfg.hyper.epsilon_at(episode, cfg.episodes),
        };
        let record = run_one(
            &mut controller,
            &cfg.grid,
            TableAccess::Learn(&mut tables),
            epsilon,
            episode_seed(cfg.hyper.seed, episode),
            episode,
        )?;
        records.push(record);
    }
    Ok(TrainOutput {
        tables,
        records,
        planner_calls: controller.planner_calls(),
    })
}

fn run_one(
    controller: &mut Controller<'_>,
    grid: &GridConfig,
    tables: TableAccess<'_>,
    epsilon: f64,
    reset_seed: u64,
    episode: usize,
) -> Result<EpisodeRecord> {
    let mut state = WorldState::reset(grid, reset_seed)?;
    let mut total = 0.0;
    controller.run_episode(&mut state, tables, epsilon, |turns| {
        total += turns.iter().map(|t| t.outcome.reward).sum::<f64>();
    })?;
    Ok(EpisodeRecord {
        episode,
        total_reward: total,
        steps_used: state.step,
        gems_dropped: state.dropped_count(),
        epsilon,
    })
}

/// Greedy evaluation: `cfg.eval_runs` episodes, run `r` seeded with
/// `seed + r`. Tables are only read.
pub fn evaluate(tables: &Tables, cfg: &RunConfig) -> Result<Vec<EpisodeRecord>> {
    evaluate_with(tables, cfg, |_, _| {})
}

/// [`evaluate`] with a hook observing every controller step as
/// `(run index, turns)`.
pub fn evaluate_with(
    tables: &Tables,
    cfg: &RunConfig,
    mut on_step: impl FnMut(usize, &[AgentStep]),
) -> Result<Vec<EpisodeRecord>> {
    cfg.validate()?;
    if tables.method() != cfg.mode.method {
        return Err(Error::config(format!(
            "tables were trained with method {} but the run asks for {}",
            tables.method(),
            cfg.mode.method
        )));
    }
    let epsilon = match cfg.mode.method {
        Method::Random => 1.0,
        _ => 0.0,
    };
    (0..cfg.eval_runs)
        .map(|run| {
            let seed = cfg.hyper.seed.wrapping_add(run as u64);
            let mut controller = Controller::new(&cfg.grid, cfg.mode, &cfg.hyper, seed);
            let mut state = WorldState::reset(&cfg.grid, seed)?;
            let mut total = 0.0;
            controller.run_episode(&mut state, TableAccess::Frozen(tables), epsilon, |turns| {
                total += turns.iter().map(|t| t.outcome.reward).sum::<f64>();
                on_step(run, turns);
            })?;
            Ok(EpisodeRecord {
                episode: run,
                total_reward: total,
                steps_used: state.step,
                gems_dropped: state.dropped_count(),
                epsilon,
            })
        })
        .collect()
}

/// Mean and sample standard deviation of the total rewards.
pub fn mean_std(records: &[EpisodeRecord]) -> (f64, f64) {
    let n = records.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = records.iter().map(|r| r.total_reward).sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = records
        .iter()
        .map(|r| (r.total_reward - mean).powi(2))
        .sum::<f64>()
        / (n - 1) as f64;
    (mean, var.sqrt())
}

/// First episode count after which the trailing `window`-episode mean
/// reward reaches `threshold`.
pub fn episodes_to_threshold(records: &[EpisodeRecord], window: usize, threshold: f64) -> Option<usize> {
    if window == 0 || records.len() < window {
        return None;
    }
    let mut sum: f64 = records[..window].iter().map(|r| r.total_reward).sum();
    for end in window..=records.len() {
        if end > window {
            sum += records[end - 1].total_reward - records[end - 1 - window].total_reward;
        }
        if sum / window as f64 >= threshold {
            return Some(end);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(r: f64) -> EpisodeRecord {
        EpisodeRecord {
            episode: 0,
            total_reward: r,
            steps_used: 1,
            gems_dropped: 0,
            epsilon: 0.0,
        }
    }

    #[test]
    fn threshold_crossing() {
        let records: Vec<_> = (0..10).map(|i| rec(i as f64)).collect();
        // trailing-3 means: 1, 2, 3, ... first reaching 4 ends at episode 6
        assert_eq!(episodes_to_threshold(&records, 3, 4.0), Some(6));
        assert_eq!(episodes_to_threshold(&records, 3, 1.0), Some(3));
        assert_eq!(episodes_to_threshold(&records, 3, 100.0), None);
        assert_eq!(episodes_to_threshold(&records[..2], 3, 0.0), None);
    }

    #[test]
    fn mean_and_std() {
        let (m, s) = mean_std(&[rec(1.0), rec(3.0)]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(mean_std(&[rec(5.0)]), (5.0, 0.0));
    }

    #[test]
    fn episode_seeds_differ() {
        assert_ne!(episode_seed(1, 0), episode_seed(1, 1));
        assert_ne!(episode_seed(1, 0), episode_seed(2, 0));
        assert_eq!(episode_seed(3, 4), episode_seed(3, 4));
    }
}
