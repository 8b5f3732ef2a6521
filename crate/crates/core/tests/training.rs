use bankworld::harness::experiments::oracle_tables;
use bankworld::harness::{evaluate, train, EpisodeRecord};
use bankworld::parallel::map_runs;
use bankworld::*;

fn desk(method: Method, planner: bool, seed: u64) -> RunConfig {
    let grid = GridConfig::new(7, 7, 2, 2).unwrap().with_step_limit(300);
    RunConfig::new(
        grid,
        ControllerMode::new(method, planner),
        Hyperparams::default().with_seed(seed),
        2000,
    )
}

fn mean(records: &[EpisodeRecord]) -> f64 {
    records.iter().map(|r| r.total_reward).sum::<f64>() / records.len() as f64
}

#[test]
fn options_learning_improves_at_desk_scale() {
    let out = train(&desk(Method::OptionsQ, true, 11)).unwrap();
    assert_eq!(out.records.len(), 2000);
    let first = mean(&out.records[..100]);
    let last = mean(&out.records[1900..]);
    assert!(last > first, "first {first} last {last}");
    assert!(out.records.iter().all(|r| r.steps_used <= 300 && r.gems_dropped <= 2));
}

#[test]
fn trailing_mean_rises_across_thirds() {
    for (method, planner) in [(Method::OptionsQ, true), (Method::OptionsQ, false)] {
        let out = train(&desk(method, planner, 3)).unwrap();
        let n = out.records.len() / 3;
        let thirds: Vec<f64> = (0..3).map(|i| mean(&out.records[i * n..(i + 1) * n])).collect();
        let lo = thirds.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = thirds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tolerance = 0.05 * (hi - lo);
        let inversions: Vec<f64> = thirds.windows(2).map(|w| w[0] - w[1]).filter(|d| *d > 0.0).collect();
        assert!(
            inversions.len() <= 1 && inversions.iter().all(|d| *d <= tolerance),
            "{method} planner={planner}: {thirds:?}"
        );
    }
}

#[test]
fn random_policy_learns_nothing() {
    let mut cfg = desk(Method::Random, true, 4);
    cfg.episodes = 10;
    let out = train(&cfg).unwrap();
    assert!(out.tables.is_empty());
    assert_eq!(out.records.len(), 10);
    assert!(out.records.iter().all(|r| r.epsilon == 1.0));
}

#[test]
fn q_values_stay_bounded() {
    let gamma = 0.9;
    let lo = -5.0 / (1.0 - gamma);
    let hi = 500.0 / (1.0 - gamma);
    for method in [Method::FlatQ, Method::OptionsQ] {
        for planner in [true, false] {
            let grid = GridConfig::new(5, 5, 2, 3)
                .unwrap()
                .with_layout(Layout::Random)
                .with_step_limit(200)
                .with_noop_reward(-1.0);
            let hyper = Hyperparams {
                alpha: 0.5,
                gamma,
                eps_start: 1.0,
                eps_end: 0.3,
                ..Hyperparams::default().with_seed(8)
            };
            let cfg = RunConfig::new(grid, ControllerMode::new(method, planner), hyper, 400);
            let out = train(&cfg).unwrap();
            let tables: Vec<&QTable> = match &out.tables {
                Tables::Flat(q) => vec![q],
                Tables::Options { pickup, drop } => vec![pickup, drop],
                Tables::Random => unreachable!(),
            };
            for q in tables {
                for s in q.states() {
                    for a in Action::ALL {
                        let v = q.get(s, a);
                        assert!((lo..=hi).contains(&v), "{method} {s} {a:?} = {v}");
                    }
                }
            }
        }
    }
}

#[test]
fn evaluation_leaves_tables_untouched() {
    let mut cfg = desk(Method::FlatQ, true, 5);
    cfg.episodes = 50;
    let out = train(&cfg).unwrap();
    let before = out.tables.digest();
    let snapshot = out.tables.clone();
    let a = evaluate(&out.tables, &cfg).unwrap();
    let b = evaluate(&out.tables, &cfg).unwrap();
    assert_eq!(out.tables.digest(), before);
    assert_eq!(out.tables, snapshot);
    assert_eq!(a, b);
    assert_eq!(a.len(), cfg.eval_runs);
    assert!(a.iter().all(|r| r.epsilon == 0.0));
}

#[test]
fn runs_are_determined_by_their_seed() {
    let configs: Vec<RunConfig> = [1u64, 1, 2]
        .iter()
        .map(|&s| {
            let mut c = desk(Method::OptionsQ, false, s);
            c.episodes = 100;
            c.grid = c.grid.with_layout(Layout::Random);
            c
        })
        .collect();
    let seq = map_runs(configs.clone(), Execution::Sequential, |c| train(&c).unwrap());
    let par = map_runs(configs, Execution::parallel(), |c| train(&c).unwrap());
    assert_eq!(seq, par);
    assert_eq!(seq[0], seq[1]);
    assert_eq!(seq[0].tables.digest(), seq[1].tables.digest());
    assert_ne!(seq[0].records, seq[2].records);
}

#[test]
fn converged_single_agent_matches_the_oracle_rollout() {
    let grid = GridConfig::new(5, 5, 1, 1).unwrap().with_step_limit(100);
    let cfg = RunConfig::new(
        grid.clone(),
        ControllerMode::new(Method::OptionsQ, true),
        Hyperparams::default().with_seed(21),
        1500,
    );
    let out = train(&cfg).unwrap();
    let learned = evaluate(&out.tables, &cfg).unwrap();
    let exact = evaluate(&oracle_tables(&grid, cfg.hyper.gamma).unwrap(), &cfg).unwrap();
    // agent (0,0) to gem (0,4): 3 moves + acquire; gem to bank (2,2): 3 moves + drop
    assert_eq!(exact[0].total_reward, -3.0 + 50.0 - 3.0 + 500.0);
    assert_eq!(learned, exact);
}

#[test]
fn mismatched_tables_are_rejected() {
    let mut cfg = desk(Method::FlatQ, true, 1);
    cfg.episodes = 5;
    let out = train(&cfg).unwrap();
    let options = cfg.with_mode(ControllerMode::new(Method::OptionsQ, true));
    assert!(matches!(evaluate(&out.tables, &options), Err(Error::Config(_))));
}
