//! CSV metrics, Q-table persistence, summary tables and plot scripts.
//!
//! Q-table files hold one section per table. Each section starts with a
//! header line
//!
//! ```text
//! # mode=q-options planner=on option=pickup alpha=0.1 gamma=0.95 ...
//! ```
//!
//! followed by `<state>,<action index>,<value>` records sorted
//! lexicographically. Values are written in shortest round-trip form.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::experiments::Summary;
use super::EpisodeRecord;
use crate::abstraction::AbstractState;
use crate::environment::Action;
use crate::error::{Error, Result};
use crate::learner::{AlphaSchedule, ControllerMode, Hyperparams, Method, QTable, Tables};

pub const METRICS_HEADER: &str = "episode,total_reward,steps_used,gems_dropped,epsilon";
pub const SUMMARY_HEADER: &str = "method,planner,mean_eval_reward,std_eval_reward,episodes_to_threshold";
pub const NOT_REACHED: &str = "not-reached";

/// Integral values print without a fractional part.
pub fn format_number(v: f64) -> String {
    if v.is_finite() && v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

pub fn metrics_csv(records: &[EpisodeRecord]) -> String {
    let mut out = String::with_capacity(32 * (records.len() + 1));
    out.push_str(METRICS_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.episode,
            format_number(r.total_reward),
            r.steps_used,
            r.gems_dropped,
            r.epsilon
        );
    }
    out
}

pub fn write_metrics(records: &[EpisodeRecord], path: &Path) -> Result<()> {
    fs::write(path, metrics_csv(records))?;
    Ok(())
}

pub fn parse_metrics(text: &str) -> Result<Vec<EpisodeRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == METRICS_HEADER => {}
        _ => return Err(Error::parse(1, format!("expected header {METRICS_HEADER:?}"))),
    }
    lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let line_no = i + 1;
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(Error::parse(line_no, format!("expected 5 fields, found {}", f.len())));
            }
            let bad = |what: &str| Error::parse(line_no, format!("bad {what}"));
            Ok(EpisodeRecord {
                episode: f[0].parse().map_err(|_| bad("episode"))?,
                total_reward: f[1].parse().map_err(|_| bad("total_reward"))?,
                steps_used: f[2].parse().map_err(|_| bad("steps_used"))?,
                gems_dropped: f[3].parse().map_err(|_| bad("gems_dropped"))?,
                epsilon: f[4].parse().map_err(|_| bad("epsilon"))?,
            })
        })
        .collect()
}

pub fn read_metrics(path: &Path) -> Result<Vec<EpisodeRecord>> {
    parse_metrics(&fs::read_to_string(path)?)
}

/// Provenance carried by every Q-table section header.
#[derive(Clone, Debug, PartialEq)]
pub struct TableHeader {
    pub mode: ControllerMode,
    pub hyper: Hyperparams,
}

fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

fn header_line(h: &TableHeader, option: &str) -> String {
    let schedule = match h.hyper.alpha_schedule {
        AlphaSchedule::Constant => "constant".to_string(),
        AlphaSchedule::VisitDecay { scale } => format!("visit-decay:{scale}"),
    };
    format!(
        "# mode={} planner={} option={option} alpha={} gamma={} eps-start={} eps-end={} eps-decay-frac={} alpha-schedule={schedule} seed={}",
        h.mode.method,
        on_off(h.mode.planner),
        h.hyper.alpha,
        h.hyper.gamma,
        h.hyper.eps_start,
        h.hyper.eps_end,
        h.hyper.eps_decay_fraction,
        h.hyper.seed,
    )
}

fn table_records(q: &QTable) -> Vec<String> {
    let mut lines: Vec<String> = q
        .sorted_rows()
        .into_iter()
        .flat_map(|(key, _, row)| {
            row.iter()
                .enumerate()
                .map(move |(a, v)| format!("{key},{a},{v}"))
                .collect::<Vec<_>>()
        })
        .collect();
    lines.sort();
    lines
}

pub fn qtable_text(tables: &Tables, header: &TableHeader) -> String {
    let sections: Vec<(&str, Option<&QTable>)> = match tables {
        Tables::Random => vec![("none", None)],
        Tables::Flat(q) => vec![("flat", Some(q))],
        Tables::Options { pickup, drop } => vec![("pickup", Some(pickup)), ("drop", Some(drop))],
    };
    let mut out = String::new();
    for (option, table) in sections {
        out.push_str(&header_line(header, option));
        out.push('\n');
        for line in table.map(table_records).unwrap_or_default() {
            out.push_str(&line);
            out.push('\n');
        }
    }
    out
}

pub fn write_qtable(tables: &Tables, header: &TableHeader, path: &Path) -> Result<()> {
    fs::write(path, qtable_text(tables, header))?;
    Ok(())
}

fn parse_header(line_no: usize, line: &str) -> Result<(TableHeader, String)> {
    let mut hyper = Hyperparams::default();
    let mut method = None;
    let mut planner = None;
    let mut option = None;
    for token in line.trim_start_matches('#').split_whitespace() {
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| Error::parse(line_no, format!("expected key=value, found {token:?}")))?;
        let num = |v: &str| -> Result<f64> {
            v.parse()
                .map_err(|_| Error::parse(line_no, format!("bad number for {key}: {v:?}")))
        };
        match key {
            "mode" => method = Some(value.parse::<Method>().map_err(|e| Error::parse(line_no, e.to_string()))?),
            "planner" => {
                planner = Some(match value {
                    "on" => true,
                    "off" => false,
                    _ => return Err(Error::parse(line_no, format!("bad planner flag {value:?}"))),
                })
            }
            "option" => option = Some(value.to_string()),
            "alpha" => hyper.alpha = num(value)?,
            "gamma" => hyper.gamma = num(value)?,
            "eps-start" => hyper.eps_start = num(value)?,
            "eps-end" => hyper.eps_end = num(value)?,
            "eps-decay-frac" => hyper.eps_decay_fraction = num(value)?,
            "alpha-schedule" => {
                hyper.alpha_schedule = match value {
                    "constant" => AlphaSchedule::Constant,
                    v => match v.strip_prefix("visit-decay:") {
                        Some(scale) => AlphaSchedule::VisitDecay { scale: num(scale)? },
                        None => return Err(Error::parse(line_no, format!("bad alpha schedule {v:?}"))),
                    },
                }
            }
            "seed" => {
                hyper.seed = value
                    .parse()
                    .map_err(|_| Error::parse(line_no, format!("bad seed {value:?}")))?
            }
            other => return Err(Error::parse(line_no, format!("unknown header key {other:?}"))),
        }
    }
    let missing = |k: &str| Error::parse(line_no, format!("header lacks {k}"));
    let mode = ControllerMode::new(method.ok_or_else(|| missing("mode"))?, planner.ok_or_else(|| missing("planner"))?);
    Ok((TableHeader { mode, hyper }, option.ok_or_else(|| missing("option"))?))
}

pub fn parse_qtable(text: &str) -> Result<(Tables, TableHeader)> {
    let mut header: Option<TableHeader> = None;
    let mut sections: Vec<(String, QTable)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            let (h, option) = parse_header(line_no, line)?;
            if let Some(prev) = &header {
                if prev.mode != h.mode {
                    return Err(Error::parse(line_no, "sections disagree on the mode"));
                }
            }
            if sections.iter().any(|(o, _)| *o == option) {
                return Err(Error::parse(line_no, format!("duplicate section {option:?}")));
            }
            header = Some(h);
            sections.push((option, QTable::new()));
            continue;
        }
        let Some((_, table)) = sections.last_mut() else {
            return Err(Error::parse(line_no, "record before any header"));
        };
        let mut parts = line.rsplitn(3, ',');
        let (Some(value), Some(action), Some(state)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::parse(line_no, "expected <state>,<action>,<value>"));
        };
        let value: f64 = value
            .parse()
            .map_err(|_| Error::parse(line_no, format!("bad value {value:?}")))?;
        let action = action
            .parse::<usize>()
            .ok()
            .and_then(Action::from_index)
            .ok_or_else(|| Error::parse(line_no, format!("bad action index {action:?}")))?;
        let state: AbstractState = state.parse().map_err(|e: Error| match e {
            Error::Parse { message, .. } => Error::parse(line_no, message),
            other => other,
        })?;
        table.set(&state, action, value);
    }

    let header = header.ok_or_else(|| Error::parse(1, "missing table header"))?;
    let mut take = |name: &str| -> Result<QTable> {
        let idx = sections
            .iter()
            .position(|(o, _)| o == name)
            .ok_or_else(|| Error::parse(1, format!("missing {name:?} section")))?;
        Ok(sections.remove(idx).1)
    };
    let tables = match header.mode.method {
        Method::Random => {
            take("none")?;
            Tables::Random
        }
        Method::FlatQ => Tables::Flat(take("flat")?),
        Method::OptionsQ => Tables::Options {
            pickup: take("pickup")?,
            drop: take("drop")?,
        },
    };
    if let Some((extra, _)) = sections.first() {
        return Err(Error::parse(1, format!("unexpected section {extra:?}")));
    }
    Ok((tables, header))
}

pub fn read_qtable(path: &Path) -> Result<(Tables, TableHeader)> {
    parse_qtable(&fs::read_to_string(path)?)
}

pub fn summary_csv(summary: &Summary) -> String {
    let mut out = String::new();
    out.push_str(SUMMARY_HEADER);
    out.push('\n');
    for arm in &summary.arms {
        let reached = match (summary.threshold, arm.episodes_to_threshold) {
            (_, Some(n)) => n.to_string(),
            (Some(_), None) => NOT_REACHED.to_string(),
            (None, None) => "n/a".to_string(),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            arm.mode.method,
            on_off(arm.mode.planner),
            format_number(arm.mean_eval_reward),
            format_number(arm.std_eval_reward),
            reached
        );
    }
    out
}

pub fn write_summary(summary: &Summary, path: &Path) -> Result<()> {
    fs::write(path, summary_csv(summary))?;
    Ok(())
}

/// Writes `plot_<stem>.py` next to a metrics CSV. The script reads the CSV
/// by its file name relative to its own location and saves a PNG.
pub fn write_plot_script(metrics_path: &Path) -> Result<std::path::PathBuf> {
    let file_name = metrics_path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::config(format!("bad metrics path {}", metrics_path.display())))?;
    let stem = metrics_path
        .file_stem()
        .and_then(|n| n.to_str())
        .unwrap_or("metrics");
    let script = format!(
        r#"#!/usr/bin/env python3
# Reward per episode for {file_name}.
import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
CSV = os.path.join(HERE, "{file_name}")
PNG = os.path.join(HERE, "{stem}.png")

episodes, rewards = [], []
with open(CSV, newline="") as f:
    for row in csv.DictReader(f):
        episodes.append(int(row["episode"]))
        rewards.append(float(row["total_reward"]))

fig, ax = plt.subplots(figsize=(8, 4))
ax.plot(episodes, rewards, linewidth=0.8)
ax.set_xlabel("episode")
ax.set_ylabel("total reward")
ax.set_title("{stem}")
fig.tight_layout()
fig.savefig(PNG, dpi=120)
print(PNG)
"#
    );
    let path = metrics_path.with_file_name(format!("plot_{stem}.py"));
    fs::write(&path, script)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::Position;

    fn rec(i: usize, r: f64) -> EpisodeRecord {
        EpisodeRecord {
            episode: i,
            total_reward: r,
            steps_used: 10,
            gems_dropped: 1,
            epsilon: 0.5,
        }
    }

    #[test]
    fn metrics_layout() {
        assert_eq!(metrics_csv(&[]), format!("{METRICS_HEADER}\n"));
        let text = metrics_csv(&[rec(0, -12.0), rec(1, 3.5), rec(2, 1080.0)]);
        assert_eq!(text.lines().count(), 4);
        assert_eq!(text.lines().nth(1), Some("0,-12,10,1,0.5"));
        assert_eq!(text.lines().nth(2), Some("1,3.5,10,1,0.5"));
        assert!(!text.contains('\r'));
        assert_eq!(parse_metrics(&text).unwrap()[2], rec(2, 1080.0));
    }

    #[test]
    fn metrics_errors_carry_line_numbers() {
        let err = parse_metrics(&format!("{METRICS_HEADER}\n0,1,2,3,4\n1,x,2,3,4\n")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn qtable_text_is_sorted_and_parses_back() {
        let mut pickup = QTable::new();
        let s = AbstractState::Pickup {
            agent_pos: Position::new(1, 2),
            gem_pos: Position::new(4, 4),
        };
        pickup.set(&s, Action::Down, 0.1 + 0.2);
        let mut drop = QTable::new();
        drop.set(&AbstractState::Drop { agent_pos: Position::new(10, 0) }, Action::Up, -3.25);
        drop.set(&AbstractState::Drop { agent_pos: Position::new(7, 3) }, Action::NoOp, 474.0);
        let tables = Tables::Options { pickup, drop };
        let header = TableHeader {
            mode: ControllerMode::new(Method::OptionsQ, true),
            hyper: Hyperparams::default().with_seed(42),
        };
        let text = qtable_text(&tables, &header);
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# mode=q-options planner=on option=pickup alpha=0.1"));
        assert_eq!(lines[2], "P,1,2,4,4,1,0.30000000000000004");
        let drop_records: Vec<&str> = lines[7..].to_vec();
        let mut sorted = drop_records.clone();
        sorted.sort();
        assert_eq!(drop_records, sorted);
        let (back, h) = parse_qtable(&text).unwrap();
        assert_eq!(back, tables);
        assert_eq!(h, header);
    }

    #[test]
    fn qtable_parse_errors() {
        let header = "# mode=q planner=on option=flat alpha=0.1 gamma=0.95 eps-start=1 eps-end=0.05 eps-decay-frac=0.8 alpha-schedule=constant seed=1";
        let cases = [
            ("D,1,1,0,1.0\n", 1),
            (&format!("{header}\nF,0,0,_,0,7,1.0\n") as &str, 2),
            (&format!("{header}\nF,0,0,_,0,1,abc\n"), 2),
            (&format!("{header}\nQ,0,0,1,1.0\n"), 2),
            ("# mode=q planner=maybe option=flat\n", 1),
        ];
        for (text, line) in cases {
            match parse_qtable(text) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("expected parse error for {text:?}, got {other:?}"),
            }
        }
        assert!(parse_qtable(&format!("{header}\n")).is_ok());
    }

    #[test]
    fn random_tables_round_trip() {
        let header = TableHeader {
            mode: ControllerMode::new(Method::Random, false),
            hyper: Hyperparams::default(),
        };
        let text = qtable_text(&Tables::Random, &header);
        assert_eq!(text.lines().count(), 1);
        assert_eq!(parse_qtable(&text).unwrap(), (Tables::Random, header));
    }

    #[test]
    fn files_on_disk_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let metrics = dir.path().join("run.csv");
        let records = vec![rec(0, -12.0), rec(1, 540.5)];
        write_metrics(&records, &metrics).unwrap();
        assert_eq!(read_metrics(&metrics).unwrap(), records);

        let script = write_plot_script(&metrics).unwrap();
        assert_eq!(script, dir.path().join("plot_run.py"));
        let body = fs::read_to_string(&script).unwrap();
        assert!(body.contains("\"run.csv\"") && body.contains("\"run.png\""));

        let mut q = QTable::new();
        q.set(&AbstractState::Drop { agent_pos: Position::new(0, 1) }, Action::Up, 0.1 + 0.2);
        let tables = Tables::Flat(q);
        let header = TableHeader {
            mode: ControllerMode::new(Method::FlatQ, false),
            hyper: Hyperparams::default(),
        };
        let path = dir.path().join("q.csv");
        write_qtable(&tables, &header, &path).unwrap();
        assert_eq!(read_qtable(&path).unwrap(), (tables, header));
        assert!(matches!(read_qtable(&dir.path().join("missing.csv")), Err(Error::Io(_))));
    }
}
