use std::fs;
use std::path::{Path, PathBuf};

use bankworld::harness::experiments::{self, oracle_tables, ArmResult, Summary, TRAILING_WINDOW};
use bankworld::harness::io::{self, TableHeader};
use bankworld::harness::oracle::{value_iteration_oracle, Subtask};
use bankworld::harness::{evaluate, mean_std, train};
use bankworld::{ControllerMode, Execution, Method, QTable, RunConfig, Tables};

use crate::error::CliError;
use crate::settings::{echo, Settings};

pub const CONFIG_FILE: &str = "config.txt";
pub const METRICS_FILE: &str = "metrics.csv";
pub const QTABLE_FILE: &str = "q.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const THREADS_VAR: &str = "MACOPT_THREADS";

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::File {
        path: dir.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::File {
        path: path.to_path_buf(),
        source,
    })
}

fn header(cfg: &RunConfig) -> TableHeader {
    TableHeader {
        mode: cfg.mode,
        hyper: cfg.hyper.clone(),
    }
}

/// config echo, metrics, optional q-table, plot script.
fn write_run(
    dir: &Path,
    cfg: &RunConfig,
    records: &[bankworld::EpisodeRecord],
    tables: Option<&Tables>,
) -> Result<(), CliError> {
    create_dir(dir)?;
    write_text(&dir.join(CONFIG_FILE), &echo(cfg))?;
    let metrics = dir.join(METRICS_FILE);
    io::write_metrics(records, &metrics)?;
    if let Some(t) = tables {
        io::write_qtable(t, &header(cfg), &dir.join(QTABLE_FILE))?;
    }
    io::write_plot_script(&metrics)?;
    Ok(())
}

fn trailing_mean(records: &[bankworld::EpisodeRecord]) -> f64 {
    let tail = &records[records.len().saturating_sub(TRAILING_WINDOW)..];
    tail.iter().map(|r| r.total_reward).sum::<f64>() / tail.len().max(1) as f64
}

pub fn train_cmd(settings: &Settings, out: &Path) -> Result<(), CliError> {
    let cfg = settings.run_config()?;
    let result = train(&cfg)?;
    write_run(out, &cfg, &result.records, Some(&result.tables))?;
    println!(
        "trained {} (planner {}) for {} episodes; trailing-{TRAILING_WINDOW} mean reward {}; wrote {}",
        cfg.mode.method,
        if cfg.mode.planner { "on" } else { "off" },
        cfg.episodes,
        io::format_number(trailing_mean(&result.records)),
        out.display()
    );
    Ok(())
}

/// Table-directory config, then the table header, then `--config`, then
/// flags.
pub fn eval_settings(qtable: &Path, config: Option<&Path>, flags: &Settings) -> Result<(Settings, Tables), CliError> {
    if !qtable.is_file() {
        return Err(CliError::File {
            path: qtable.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "q-table file not found"),
        });
    }
    let (tables, table_header) = io::read_qtable(qtable).map_err(|source| CliError::Table {
        path: qtable.to_path_buf(),
        source,
    })?;
    let mut settings = Settings::new();
    let beside = qtable.parent().unwrap_or(Path::new(".")).join(CONFIG_FILE);
    if beside.is_file() {
        settings.load_file(&beside)?;
    }
    settings.load_table_header(&table_header, qtable);
    if let Some(path) = config {
        settings.load_file(path)?;
    }
    settings.merge_flags(flags);
    Ok((settings, tables))
}

pub fn eval_cmd(qtable: &Path, config: Option<&Path>, flags: &Settings, out: Option<&Path>) -> Result<(), CliError> {
    let (settings, tables) = eval_settings(qtable, config, flags)?;
    let cfg = settings.run_config()?;
    if tables.method() != cfg.mode.method {
        return Err(CliError::Usage {
            flag: "--method".into(),
            message: format!("table holds {} values but {} was requested", tables.method(), cfg.mode.method),
        });
    }
    let records = evaluate(&tables, &cfg)?;
    let out: PathBuf = match out {
        Some(p) => p.to_path_buf(),
        None => qtable.parent().unwrap_or(Path::new(".")).join("eval"),
    };
    write_run(&out, &cfg, &records, None)?;
    let (mean, std) = mean_std(&records);
    println!(
        "evaluated {} greedy runs: mean reward {} std {}; wrote {}",
        records.len(),
        io::format_number(mean),
        io::format_number(std),
        out.display()
    );
    Ok(())
}

/// Worker count for comparison arms: `MACOPT_THREADS` if set, else one per
/// arm.
pub fn execution(arms: usize) -> Result<Execution, CliError> {
    let threads = match std::env::var(THREADS_VAR) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => n,
            _ => {
                return Err(CliError::Usage {
                    flag: THREADS_VAR.into(),
                    message: format!("expected a positive integer, got {v:?}"),
                })
            }
        },
        Err(_) => arms,
    };
    Ok(if threads <= 1 {
        Execution::Sequential
    } else {
        Execution::Parallel { threads: Some(threads) }
    })
}

pub fn arm_dir_name(mode: ControllerMode) -> String {
    format!("{}-planner-{}", mode.method, if mode.planner { "on" } else { "off" })
}

fn write_comparison(out: &Path, base: &RunConfig, summary: &Summary) -> Result<(), CliError> {
    create_dir(out)?;
    let mut resolved = base.clone();
    resolved.threshold = summary.threshold;
    write_text(&out.join(CONFIG_FILE), &echo(&resolved))?;
    for arm in &summary.arms {
        write_arm(out, &resolved, arm)?;
    }
    io::write_summary(summary, &out.join(SUMMARY_FILE))?;
    print!("{}", io::summary_csv(summary));
    Ok(())
}

fn write_arm(out: &Path, base: &RunConfig, arm: &ArmResult) -> Result<(), CliError> {
    let cfg = base.with_mode(arm.mode);
    write_run(
        &out.join(arm_dir_name(arm.mode)),
        &cfg,
        &arm.train.records,
        Some(&arm.train.tables),
    )
}

pub fn compare_methods_cmd(settings: &Settings, out: &Path) -> Result<(), CliError> {
    let base = settings.run_config()?;
    let summary = experiments::compare_methods(&base, execution(Method::ALL.len())?)?;
    write_comparison(out, &base, &summary)
}

pub fn compare_planner_cmd(settings: &Settings, out: &Path) -> Result<(), CliError> {
    if settings.method()? != Method::OptionsQ {
        return Err(CliError::Usage {
            flag: "--method".into(),
            message: "the planner comparison trains q-options only".into(),
        });
    }
    let base = settings.run_config()?;
    let summary = experiments::compare_planner(&base, execution(2)?).map_err(|e| match e {
        bankworld::Error::Config(m) if base.threshold.is_none() => CliError::Usage {
            flag: "--threshold".into(),
            message: m,
        },
        other => other.into(),
    })?;
    write_comparison(out, &base, &summary)
}

/// Writes exact sub-task values as a q-options table file. With no
/// subtask, both sections are filled.
pub fn oracle_cmd(settings: &Settings, subtask: Option<Subtask>, out: &Path) -> Result<(), CliError> {
    let grid = settings.grid()?;
    let gamma = settings.gamma()?;
    let tables = match subtask {
        None => oracle_tables(&grid, gamma)?,
        Some(task) => {
            let q = value_iteration_oracle(&grid, task, gamma)?;
            match task {
                Subtask::Pickup => Tables::Options {
                    pickup: q,
                    drop: QTable::new(),
                },
                Subtask::Drop => Tables::Options {
                    pickup: QTable::new(),
                    drop: q,
                },
            }
        }
    };
    let mut hyper = settings.hyper()?;
    hyper.gamma = gamma;
    let header = TableHeader {
        mode: ControllerMode::new(Method::OptionsQ, true),
        hyper,
    };
    if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    io::write_qtable(&tables, &header, out)?;
    println!("wrote oracle values for {}x{} to {}", grid.width, grid.height, out.display());
    Ok(())
}
