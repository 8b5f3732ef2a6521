//! Method comparison and planner ablation.

use super::oracle::{value_iteration_oracle, Subtask};
use super::{episodes_to_threshold, evaluate, mean_std, train, EpisodeRecord, RunConfig, TrainOutput};
use crate::environment::{GridConfig, Layout};
use crate::error::{Error, Result};
use crate::learner::{ControllerMode, Hyperparams, Method, Tables};
use crate::parallel::{map_runs, Execution};

/// Width of the trailing mean used for episodes-to-threshold.
pub const TRAILING_WINDOW: usize = 50;
/// Default threshold as a fraction of the oracle-optimal episode return.
pub const THRESHOLD_FRACTION: f64 = 0.8;

/// Options tables holding the exact sub-task values.
pub fn oracle_tables(grid: &GridConfig, gamma: f64) -> Result<Tables> {
    Ok(Tables::Options {
        pickup: value_iteration_oracle(grid, Subtask::Pickup, gamma)?,
        drop: value_iteration_oracle(grid, Subtask::Drop, gamma)?,
    })
}

/// Undiscounted episode return of the planner-driven greedy controller
/// acting on the oracle tables. `None` when the layout is random or the
/// oracle refuses the grid.
pub fn reference_return(grid: &GridConfig, hyper: &Hyperparams) -> Result<Option<f64>> {
    if grid.layout == Layout::Random {
        return Ok(None);
    }
    let tables = match oracle_tables(grid, hyper.gamma) {
        Ok(t) => t,
        Err(Error::Refused(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let mut cfg = RunConfig::new(grid.clone(), ControllerMode::new(Method::OptionsQ, true), hyper.clone(), 1);
    cfg.eval_runs = 1;
    Ok(Some(evaluate(&tables, &cfg)?[0].total_reward))
}

/// Explicit threshold if configured, else the oracle-derived default.
pub fn resolve_threshold(cfg: &RunConfig) -> Result<Option<f64>> {
    if let Some(t) = cfg.threshold {
        return Ok(Some(t));
    }
    Ok(reference_return(&cfg.grid, &cfg.hyper)?.map(|r| THRESHOLD_FRACTION * r))
}

#[derive(Clone, Debug)]
pub struct ArmResult {
    pub mode: ControllerMode,
    pub train: TrainOutput,
    pub eval: Vec<EpisodeRecord>,
    pub mean_eval_reward: f64,
    pub std_eval_reward: f64,
    pub episodes_to_threshold: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct Summary {
    pub threshold: Option<f64>,
    pub arms: Vec<ArmResult>,
}

impl Summary {
    pub fn arm(&self, method: Method, planner: bool) -> Option<&ArmResult> {
        self.arms
            .iter()
            .find(|a| a.mode == ControllerMode::new(method, planner))
    }
}

/// Trains and evaluates one arm.
pub fn run_arm(cfg: &RunConfig, threshold: Option<f64>) -> Result<ArmResult> {
    let train_out = train(cfg)?;
    let eval = evaluate(&train_out.tables, cfg)?;
    let (mean, std) = mean_std(&eval);
    let reached = threshold.and_then(|t| episodes_to_threshold(&train_out.records, TRAILING_WINDOW, t));
    Ok(ArmResult {
        mode: cfg.mode,
        train: train_out,
        eval,
        mean_eval_reward: mean,
        std_eval_reward: std,
        episodes_to_threshold: reached,
    })
}

fn run_arms(base: &RunConfig, modes: &[ControllerMode], threshold: Option<f64>, exec: Execution) -> Result<Summary> {
    let configs: Vec<RunConfig> = modes.iter().map(|m| base.with_mode(*m)).collect();
    let arms = map_runs(configs, exec, |cfg| run_arm(&cfg, threshold))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(Summary { threshold, arms })
}

/// Random policy, flat Q-learning and options Q-learning under the same
/// grid, planner setting and seed.
pub fn compare_methods(base: &RunConfig, exec: Execution) -> Result<Summary> {
    base.validate()?;
    let threshold = resolve_threshold(base)?;
    let modes: Vec<ControllerMode> = Method::ALL
        .iter()
        .map(|m| ControllerMode::new(*m, base.mode.planner))
        .collect();
    run_arms(base, &modes, threshold, exec)
}

/// Options Q-learning with and without the planner.
pub fn compare_planner(base: &RunConfig, exec: Execution) -> Result<Summary> {
    base.validate()?;
    if base.mode.method != Method::OptionsQ {
        return Err(Error::config(format!(
            "planner comparison runs the q-options method, got {}",
            base.mode.method
        )));
    }
    let threshold = resolve_threshold(base)?.ok_or_else(|| {
        Error::config("no oracle reference for this layout; a threshold must be given")
    })?;
    let modes = [
        ControllerMode::new(Method::OptionsQ, true),
        ControllerMode::new(Method::OptionsQ, false),
    ];
    run_arms(base, &modes, Some(threshold), exec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_return_on_desk_layout() {
        // two agents walk 6 cells to their gems and 6 back to the bank:
        // each earns 5 * -1 + 50 + 5 * -1 + 500
        let grid = GridConfig::new(7, 7, 2, 2).unwrap().with_step_limit(300);
        let r = reference_return(&grid, &Hyperparams::default()).unwrap();
        assert_eq!(r, Some(2.0 * 540.0));
        let random = grid.with_layout(Layout::Random);
        assert_eq!(reference_return(&random, &Hyperparams::default()).unwrap(), None);
    }

    #[test]
    fn planner_comparison_requires_options() {
        let grid = GridConfig::new(5, 5, 1, 1).unwrap();
        let cfg = RunConfig::new(grid, ControllerMode::new(Method::FlatQ, true), Hyperparams::default(), 5);
        assert!(matches!(compare_planner(&cfg, Execution::Sequential), Err(Error::Config(_))));
    }

    #[test]
    fn unreachable_threshold_is_reported_as_none() {
        let grid = GridConfig::new(5, 5, 1, 1).unwrap().with_step_limit(30);
        let mut cfg = RunConfig::new(grid, ControllerMode::new(Method::OptionsQ, true), Hyperparams::default(), 60);
        cfg.threshold = Some(1e9);
        let summary = compare_planner(&cfg, Execution::Sequential).unwrap();
        assert_eq!(summary.arms.len(), 2);
        assert!(summary.arms.iter().all(|a| a.episodes_to_threshold.is_none()));
        // the planner-off arm never consults the planner
        let off = summary.arm(Method::OptionsQ, false).unwrap();
        assert_eq!(off.train.planner_calls, 0);
        assert!(summary.arm(Method::OptionsQ, true).unwrap().train.planner_calls > 0);
    }

    #[test]
    fn method_comparison_has_three_rows() {
        let grid = GridConfig::new(5, 5, 1, 1).unwrap().with_step_limit(40);
        let cfg = RunConfig::new(grid, ControllerMode::new(Method::OptionsQ, true), Hyperparams::default(), 20);
        let seq = compare_methods(&cfg, Execution::Sequential).unwrap();
        let par = compare_methods(&cfg, Execution::parallel()).unwrap();
        assert_eq!(seq.arms.len(), 3);
        for (a, b) in seq.arms.iter().zip(&par.arms) {
            assert_eq!(a.mode, b.mode);
            assert_eq!(a.train, b.train);
            assert_eq!(a.eval, b.eval);
        }
        assert!(matches!(seq.arm(Method::Random, true).unwrap().train.tables, Tables::Random));
    }
}
