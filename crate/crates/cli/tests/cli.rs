use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bankworld(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bankworld"))
        .args(args)
        .env_remove("MACOPT_THREADS")
        .output()
        .expect("binary runs")
}

fn files(dir: &Path) -> BTreeSet<String> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect()
}

fn set(names: &[&str]) -> BTreeSet<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &[&str] = &["--grid", "5x5", "--agents", "1", "--gems", "2", "--episodes", "40", "--steps", "60"];

#[test]
fn train_then_eval_writes_the_run_files() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("a");
    let run_s = run.to_str().unwrap();
    let mut args = vec!["train", "--method", "q-options", "--planner", "on", "--seed", "42", "--out", run_s];
    args.extend_from_slice(SMALL);
    let o = bankworld(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(files(&run), set(&["config.txt", "metrics.csv", "plot_metrics.py", "q.csv"]));

    let metrics = fs::read_to_string(run.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("episode,total_reward,steps_used,gems_dropped,epsilon\n"));
    assert_eq!(metrics.lines().count(), 41);
    assert!(!metrics.contains('\r'));
    let config = fs::read_to_string(run.join("config.txt")).unwrap();
    assert!(config.contains("seed = 42") && config.contains("grid = 5x5"), "{config}");
    let plot = fs::read_to_string(run.join("plot_metrics.py")).unwrap();
    assert!(plot.contains("\"metrics.csv\""));
    let q = fs::read_to_string(run.join("q.csv")).unwrap();
    assert!(q.starts_with("# mode=q-options planner=on option="));

    // grid and mode come from the table's directory and header
    let q_path = run.join("q.csv");
    let o = bankworld(&["eval", "--qtable", q_path.to_str().unwrap(), "--runs", "3", "--seed", "7"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let eval = run.join("eval");
    assert_eq!(files(&eval), set(&["config.txt", "metrics.csv", "plot_metrics.py"]));
    let metrics = fs::read_to_string(eval.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 4);
    let config = fs::read_to_string(eval.join("config.txt")).unwrap();
    assert!(config.contains("seed = 7") && config.contains("grid = 5x5") && config.contains("runs = 3"));
}

#[test]
fn training_is_reproducible_from_the_echoed_config() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let mut args = vec!["train", "--method", "q", "--seed", "5", "--noop-reward", "-1", "--out", a.to_str().unwrap()];
    args.extend_from_slice(SMALL);
    assert!(bankworld(&args).status.success());
    let cfg = a.join("config.txt");
    let o = bankworld(&["train", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["config.txt", "metrics.csv", "q.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn compare_methods_writes_arms_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("cmp");
    let mut args = vec!["compare-methods", "--threshold", "100", "--runs", "2", "--out", out.to_str().unwrap()];
    args.extend_from_slice(SMALL);
    let o = bankworld(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        files(&out),
        set(&[
            "config.txt",
            "q-options-planner-on",
            "q-planner-on",
            "random-planner-on",
            "summary.csv"
        ])
    );
    for arm in ["q-options-planner-on", "q-planner-on", "random-planner-on"] {
        assert_eq!(files(&out.join(arm)), set(&["config.txt", "metrics.csv", "plot_metrics.py", "q.csv"]));
    }
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines[0], "method,planner,mean_eval_reward,std_eval_reward,episodes_to_threshold");
    assert_eq!(lines.len(), 4);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 5));
}

#[test]
fn compare_planner_with_fixed_layout_derives_threshold() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("abl");
    let o = bankworld(&[
        "compare-planner",
        "--grid",
        "5x5",
        "--agents",
        "2",
        "--gems",
        "2",
        "--episodes",
        "30",
        "--steps",
        "50",
        "--runs",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(files(&out).contains("q-options-planner-off"));
    let config = fs::read_to_string(out.join("config.txt")).unwrap();
    assert!(config.contains("threshold = "), "{config}");

    // a random layout has no oracle reference
    let o = bankworld(&["compare-planner", "--layout", "random", "--episodes", "5", "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("--threshold"));
}

#[test]
fn oracle_writes_a_loadable_table() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("oracle.csv");
    let o = bankworld(&["oracle", "--grid", "5x5", "--agents", "1", "--gems", "1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.contains("option=pickup") && text.contains("option=drop"));

    // greedy play on exact values collects the gem every run
    let eval = tmp.path().join("eval");
    let o = bankworld(&[
        "eval", "--qtable", out.to_str().unwrap(), "--grid", "5x5", "--agents", "1", "--gems", "1",
        "--steps", "50", "--runs", "2", "--out", eval.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let metrics = fs::read_to_string(eval.join("metrics.csv")).unwrap();
    assert!(metrics.lines().skip(1).all(|l| l.split(',').nth(3) == Some("1")), "{metrics}");

    let o = bankworld(&["oracle", "--grid", "5x5", "--subtask", "drop", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let text = fs::read_to_string(&out).unwrap();
    assert!(!text.contains("P,"));
}

#[test]
fn usage_errors_are_one_line_and_name_the_flag() {
    let cases: &[(&[&str], &str)] = &[
        (&["train", "--grid", "4x0"], "--grid"),
        (&["train", "--gems", "0"], "--gems"),
        (&["train", "--eps-start", "2.0"], "--eps-start"),
        (&["train", "--noop-reward", "-3"], "--noop-reward"),
        (&["train", "--planner", "maybe"], "--planner"),
        (&["train", "--colour", "blue"], "--colour"),
        (&["compare-planner", "--method", "q"], "--method"),
    ];
    for (args, flag) in cases {
        let o = bankworld(args);
        assert!(!o.status.success(), "{args:?}");
        let err = stderr(&o);
        assert_eq!(err.trim_end().lines().count(), 1, "{args:?}: {err}");
        assert!(err.contains(flag), "{args:?}: {err}");
    }
}

#[test]
fn missing_files_are_reported() {
    let o = bankworld(&["eval", "--qtable", "/nonexistent/q.csv"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/nonexistent/q.csv"));
    let o = bankworld(&["train", "--config", "/nonexistent/run.cfg"]);
    assert!(!o.status.success());
    assert_eq!(stderr(&o).lines().count(), 1);
}

#[test]
fn config_file_layout_is_used_and_overridden() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    fs::write(
        &cfg,
        "# desk layout\ngrid = 5x5\nagents = 1\ngems = 1\nepisodes = 10\nsteps = 30\n\n[layout]\nagent.0 = 0,0\ngem.0 = 4,4\n",
    )
    .unwrap();
    let out = tmp.path().join("run");
    let o = bankworld(&["train", "--config", cfg.to_str().unwrap(), "--episodes", "3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let echoed = fs::read_to_string(out.join("config.txt")).unwrap();
    assert!(echoed.contains("episodes = 3") && echoed.contains("gem.0 = 4,4"), "{echoed}");
    assert_eq!(fs::read_to_string(out.join("metrics.csv")).unwrap().lines().count(), 4);

    fs::write(&cfg, "grid = 5x5\nagents = 1\ngems = 1\n[layout]\nagent.0 = 0,0\ngem.0 = 2,2\n").unwrap();
    let o = bankworld(&["train", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("[layout]"));
}
