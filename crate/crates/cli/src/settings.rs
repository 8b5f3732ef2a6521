//! Layered run settings: built-in defaults, then config files, then flags.
//!
//! Config files are flat `key = value` lines whose keys are the long flag
//! names, plus an optional `[layout]` section:
//!
//! ```text
//! grid = 7x7
//! agents = 2
//! [layout]
//! bank = 3,3
//! agent.0 = 0,0
//! gem.0 = 0,6
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use bankworld::harness::io::TableHeader;
use bankworld::learner::AlphaSchedule;
use bankworld::{ControllerMode, GridConfig, Hyperparams, Layout, Method, Position, RunConfig};

use crate::error::CliError;

/// Keys accepted both as `--key` flags and as config-file keys.
pub const KEYS: &[&str] = &[
    "method",
    "planner",
    "grid",
    "agents",
    "gems",
    "episodes",
    "steps",
    "seed",
    "alpha",
    "gamma",
    "eps-start",
    "eps-end",
    "eps-decay-frac",
    "alpha-schedule",
    "noop-reward",
    "layout",
    "runs",
    "threshold",
];

fn default_value(key: &str) -> Option<&'static str> {
    Some(match key {
        "method" => "q-options",
        "planner" => "on",
        "grid" => "11x11",
        "agents" => "2",
        "gems" => "3",
        "episodes" => "6000",
        "steps" => "1000",
        "seed" => "0",
        "alpha" => "0.1",
        "gamma" => "0.95",
        "eps-start" => "1",
        "eps-end" => "0.05",
        "eps-decay-frac" => "0.8",
        "alpha-schedule" => "constant",
        "noop-reward" => "0",
        "runs" => "10",
        _ => return None,
    })
}

#[derive(Clone, Debug)]
enum Origin {
    Default,
    Flag,
    File { path: PathBuf, line: usize },
    Table(PathBuf),
}

#[derive(Clone, Debug)]
struct Entry {
    value: String,
    origin: Origin,
}

#[derive(Clone, Debug, Default)]
pub struct Settings {
    values: BTreeMap<&'static str, Entry>,
    bank: Option<Entry>,
    agents: BTreeMap<usize, Entry>,
    gems: BTreeMap<usize, Entry>,
}

fn label(key: &str, origin: &Origin) -> String {
    match origin {
        Origin::Default | Origin::Flag => format!("--{key}"),
        Origin::File { path, line } => format!("--{key} (from {}:{line})", path.display()),
        Origin::Table(path) => format!("--{key} (from table header {})", path.display()),
    }
}

fn usage(flag: impl Into<String>, message: impl Into<String>) -> CliError {
    CliError::Usage {
        flag: flag.into(),
        message: message.into(),
    }
}

pub fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let w: usize = w.trim().parse().map_err(|_| format!("bad width in {s:?}"))?;
    let h: usize = h.trim().parse().map_err(|_| format!("bad height in {s:?}"))?;
    if w < 3 || h < 3 {
        return Err(format!("grid must be at least 3x3, got {w}x{h}"));
    }
    Ok((w, h))
}

fn parse_position(s: &str) -> Result<Position, String> {
    let (r, c) = s.split_once(',').ok_or_else(|| format!("expected r,c, got {s:?}"))?;
    let r = r.trim().parse().map_err(|_| format!("bad row in {s:?}"))?;
    let c = c.trim().parse().map_err(|_| format!("bad column in {s:?}"))?;
    Ok(Position::new(r, c))
}

fn parse_on_off(s: &str) -> Result<bool, String> {
    match s {
        "on" => Ok(true),
        "off" => Ok(false),
        other => Err(format!("expected on or off, got {other:?}")),
    }
}

fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(_) => Err(format!("expected a positive integer, got {s:?}")),
    }
}

fn unit_interval(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("expected a number, got {s:?}"))?;
    if !(0.0..=1.0).contains(&v) {
        return Err(format!("must be in [0, 1], got {s}"));
    }
    Ok(v)
}

fn parse_alpha(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("expected a number, got {s:?}"))?;
    if !(v > 0.0 && v <= 1.0) {
        return Err(format!("must be in (0, 1], got {s}"));
    }
    Ok(v)
}

fn parse_schedule(s: &str) -> Result<AlphaSchedule, String> {
    if s == "constant" {
        return Ok(AlphaSchedule::Constant);
    }
    let scale = s
        .strip_prefix("visit-decay:")
        .ok_or_else(|| format!("expected constant or visit-decay:<scale>, got {s:?}"))?;
    match scale.parse::<f64>() {
        Ok(v) if v > 0.0 => Ok(AlphaSchedule::VisitDecay { scale: v }),
        _ => Err(format!("visit-decay scale must be a positive number, got {scale:?}")),
    }
}

fn schedule_text(s: AlphaSchedule) -> String {
    match s {
        AlphaSchedule::Constant => "constant".into(),
        AlphaSchedule::VisitDecay { scale } => format!("visit-decay:{scale}"),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum LayoutKind {
    Spread,
    Random,
    Fixed,
}

impl Settings {
    pub fn new() -> Self {
        Settings::default()
    }

    fn put(&mut self, key: &str, value: &str, origin: Origin) -> Result<(), CliError> {
        let key = KEYS
            .iter()
            .copied()
            .find(|k| *k == key)
            .ok_or_else(|| usage(label(key, &origin), "unknown setting"))?;
        self.values.insert(
            key,
            Entry {
                value: value.trim().to_string(),
                origin,
            },
        );
        Ok(())
    }

    /// A value given on the command line.
    pub fn set_flag(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        self.put(key, value, Origin::Flag)
    }

    /// Overlays every value set in `other`.
    pub fn merge_flags(&mut self, other: &Settings) {
        for (k, e) in &other.values {
            self.values.insert(k, e.clone());
        }
    }

    pub fn load_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = fs::read_to_string(path).map_err(|source| CliError::File {
            path: path.to_path_buf(),
            source,
        })?;
        self.load_text(&text, path)
    }

    fn load_text(&mut self, text: &str, path: &Path) -> Result<(), CliError> {
        let mut in_layout = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let origin = Origin::File {
                path: path.to_path_buf(),
                line: i + 1,
            };
            let at = || format!("{}:{}", path.display(), i + 1);
            if line.starts_with('[') {
                if line != "[layout]" {
                    return Err(usage(at(), format!("unknown section {line}")));
                }
                in_layout = true;
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| usage(at(), format!("expected key = value, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            if !in_layout {
                self.put(key, value, origin)?;
                continue;
            }
            let entry = Entry {
                value: value.to_string(),
                origin,
            };
            let index = |rest: &str| {
                rest.parse::<usize>()
                    .map_err(|_| usage(at(), format!("bad layout index in {key:?}")))
            };
            if key == "bank" {
                self.bank = Some(entry);
            } else if let Some(rest) = key.strip_prefix("agent.") {
                self.agents.insert(index(rest)?, entry);
            } else if let Some(rest) = key.strip_prefix("gem.") {
                self.gems.insert(index(rest)?, entry);
            } else {
                return Err(usage(at(), format!("unknown layout key {key:?}")));
            }
        }
        Ok(())
    }

    /// Seeds mode and hyperparameters from a Q-table header.
    pub fn load_table_header(&mut self, header: &TableHeader, path: &Path) {
        let origin = Origin::Table(path.to_path_buf());
        let h = &header.hyper;
        let pairs = [
            ("method", header.mode.method.to_string()),
            ("planner", on_off(header.mode.planner).to_string()),
            ("alpha", h.alpha.to_string()),
            ("gamma", h.gamma.to_string()),
            ("eps-start", h.eps_start.to_string()),
            ("eps-end", h.eps_end.to_string()),
            ("eps-decay-frac", h.eps_decay_fraction.to_string()),
            ("alpha-schedule", schedule_text(h.alpha_schedule)),
            ("seed", h.seed.to_string()),
        ];
        for (k, v) in pairs {
            self.put(k, &v, origin.clone()).expect("header keys are known");
        }
    }

    pub fn is_set(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    fn entry(&self, key: &'static str) -> Option<Entry> {
        self.values.get(key).cloned().or_else(|| {
            default_value(key).map(|v| Entry {
                value: v.to_string(),
                origin: Origin::Default,
            })
        })
    }

    fn get<T>(&self, key: &'static str, parse: impl Fn(&str) -> Result<T, String>) -> Result<T, CliError> {
        let e = self.entry(key).expect("every required key has a default");
        parse(&e.value).map_err(|m| usage(label(key, &e.origin), format!("{:?}: {m}", e.value)))
    }

    fn flag(&self, key: &'static str) -> String {
        self.entry(key)
            .map(|e| label(key, &e.origin))
            .unwrap_or_else(|| format!("--{key}"))
    }

    pub fn method(&self) -> Result<Method, CliError> {
        self.get("method", |s| s.parse::<Method>().map_err(|e| e.to_string()))
    }

    pub fn runs(&self) -> Result<usize, CliError> {
        self.get("runs", positive)
    }

    pub fn gamma(&self) -> Result<f64, CliError> {
        self.get("gamma", unit_interval)
    }

    pub fn grid(&self) -> Result<GridConfig, CliError> {
        let (width, height) = self.get("grid", parse_grid)?;
        let agents = self.get("agents", positive)?;
        let gems = self.get("gems", positive)?;
        let steps = self.get("steps", positive)?;
        let noop = self.get("noop-reward", |s| match s {
            "0" => Ok(0.0),
            "-1" => Ok(-1.0),
            other => Err(format!("expected 0 or -1, got {other:?}")),
        })?;

        let mut grid = GridConfig::new(width, height, agents, gems)
            .map_err(|e| usage(self.flag("gems"), e.to_string()))?
            .with_step_limit(steps)
            .with_noop_reward(noop);

        if let Some(bank) = &self.bank {
            let flag = label("layout", &bank.origin).replacen("--layout", "[layout] bank", 1);
            grid.bank = parse_position(&bank.value).map_err(|m| usage(flag.clone(), m))?;
            grid.layout = Layout::spread(width, height, grid.bank, agents, gems)
                .map_err(|e| usage(flag, e.to_string()))?;
        }

        let explicit = !self.agents.is_empty() || !self.gems.is_empty();
        let kind = match self.values.get("layout") {
            None if explicit => LayoutKind::Fixed,
            None => LayoutKind::Spread,
            Some(_) => self.get("layout", |s| match s {
                "spread" => Ok(LayoutKind::Spread),
                "random" => Ok(LayoutKind::Random),
                "fixed" => Ok(LayoutKind::Fixed),
                other => Err(format!("expected spread, random or fixed, got {other:?}")),
            })?,
        };
        match kind {
            LayoutKind::Spread => {}
            LayoutKind::Random => grid.layout = Layout::Random,
            LayoutKind::Fixed => grid.layout = self.fixed_layout(agents, gems)?,
        }
        grid.validate().map_err(|e| {
            let flag = match kind {
                LayoutKind::Fixed => "[layout]".to_string(),
                _ => self.flag("gems"),
            };
            usage(flag, e.to_string())
        })?;
        Ok(grid)
    }

    fn fixed_layout(&self, agents: usize, gems: usize) -> Result<Layout, CliError> {
        let collect = |what: &str, map: &BTreeMap<usize, Entry>, n: usize| {
            if map.keys().copied().ne(0..n) {
                return Err(usage(
                    "[layout]",
                    format!("fixed layout needs {what}.0 .. {what}.{} exactly", n.saturating_sub(1)),
                ));
            }
            map.iter()
                .map(|(i, e)| parse_position(&e.value).map_err(|m| usage(format!("[layout] {what}.{i}"), m)))
                .collect::<Result<Vec<_>, _>>()
        };
        Ok(Layout::Fixed {
            agents: collect("agent", &self.agents, agents)?,
            gems: collect("gem", &self.gems, gems)?,
        })
    }

    pub fn hyper(&self) -> Result<Hyperparams, CliError> {
        let eps_start = self.get("eps-start", unit_interval)?;
        let eps_end = self.get("eps-end", unit_interval)?;
        if eps_end > eps_start {
            return Err(usage(
                self.flag("eps-end"),
                format!("{eps_end} exceeds eps-start {eps_start}"),
            ));
        }
        let hyper = Hyperparams {
            alpha: self.get("alpha", parse_alpha)?,
            gamma: self.gamma()?,
            eps_start,
            eps_end,
            eps_decay_fraction: self.get("eps-decay-frac", unit_interval)?,
            seed: self.get("seed", |s| s.parse::<u64>().map_err(|_| format!("expected an integer, got {s:?}")))?,
            alpha_schedule: self.get("alpha-schedule", parse_schedule)?,
        };
        hyper.validate()?;
        Ok(hyper)
    }

    pub fn run_config(&self) -> Result<RunConfig, CliError> {
        let grid = self.grid()?;
        let planner = self.get("planner", parse_on_off)?;
        let mode = ControllerMode::new(self.method()?, planner);
        let mut cfg = RunConfig::new(grid, mode, self.hyper()?, self.get("episodes", positive)?);
        cfg.eval_runs = self.runs()?;
        if self.is_set("threshold") {
            cfg.threshold = Some(self.get("threshold", |s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| format!("expected a number, got {s:?}"))
            })?);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Fully resolved configuration in config-file form. Reading it back gives
/// the same run configuration.
pub fn echo(cfg: &RunConfig) -> String {
    let g = &cfg.grid;
    let h = &cfg.hyper;
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    kv("method", cfg.mode.method.to_string());
    kv("planner", on_off(cfg.mode.planner).into());
    kv("grid", format!("{}x{}", g.width, g.height));
    kv("agents", g.num_agents.to_string());
    kv("gems", g.num_gems.to_string());
    kv("episodes", cfg.episodes.to_string());
    kv("steps", g.step_limit.to_string());
    kv("seed", h.seed.to_string());
    kv("alpha", h.alpha.to_string());
    kv("gamma", h.gamma.to_string());
    kv("eps-start", h.eps_start.to_string());
    kv("eps-end", h.eps_end.to_string());
    kv("eps-decay-frac", h.eps_decay_fraction.to_string());
    kv("alpha-schedule", schedule_text(h.alpha_schedule));
    kv("noop-reward", g.noop_reward.to_string());
    kv("runs", cfg.eval_runs.to_string());
    if let Some(t) = cfg.threshold {
        kv("threshold", t.to_string());
    }
    match &g.layout {
        Layout::Random => kv("layout", "random".into()),
        Layout::Fixed { .. } => kv("layout", "fixed".into()),
    }
    out.push_str("\n[layout]\n");
    let pos = |p: Position| format!("{},{}", p.row, p.col);
    let _ = writeln!(out, "bank = {}", pos(g.bank));
    if let Layout::Fixed { agents, gems } = &g.layout {
        for (i, &p) in agents.iter().enumerate() {
            let _ = writeln!(out, "agent.{i} = {}", pos(p));
        }
        for (j, &p) in gems.iter().enumerate() {
            let _ = writeln!(out, "gem.{j} = {}", pos(p));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_text(text: &str) -> Result<Settings, CliError> {
        let mut s = Settings::new();
        s.load_text(text, Path::new("test.cfg"))?;
        Ok(s)
    }

    #[test]
    fn defaults_are_full_scale_on_11x11() {
        let cfg = Settings::new().run_config().unwrap();
        assert_eq!((cfg.grid.width, cfg.grid.height), (11, 11));
        assert_eq!((cfg.grid.num_agents, cfg.grid.num_gems), (2, 3));
        assert_eq!(cfg.episodes, 6000);
        assert_eq!(cfg.grid.step_limit, 1000);
        assert_eq!(cfg.mode, ControllerMode::new(Method::OptionsQ, true));
        assert_eq!(cfg.eval_runs, 10);
    }

    #[test]
    fn flags_override_file() {
        let mut s = from_text("grid = 5x5\nagents = 1\nseed = 3\n").unwrap();
        s.set_flag("seed", "9").unwrap();
        let cfg = s.run_config().unwrap();
        assert_eq!(cfg.grid.width, 5);
        assert_eq!(cfg.hyper.seed, 9);
    }

    #[test]
    fn echo_round_trips() {
        let text = "grid = 7x5\nagents = 1\ngems = 2\nalpha-schedule = visit-decay:50\nthreshold = 12.5\n\
                    noop-reward = -1\n[layout]\nbank = 2,3\nagent.0 = 0,0\ngem.0 = 4,6\ngem.1 = 0,6\n";
        let cfg = from_text(text).unwrap().run_config().unwrap();
        assert_eq!(cfg.grid.bank, Position::new(2, 3));
        let again = from_text(&echo(&cfg)).unwrap().run_config().unwrap();
        assert_eq!(cfg, again);

        let random = from_text("layout = random\n").unwrap().run_config().unwrap();
        assert_eq!(random.grid.layout, Layout::Random);
        assert_eq!(from_text(&echo(&random)).unwrap().run_config().unwrap(), random);
    }

    #[test]
    fn errors_name_the_flag() {
        let bad = |k: &str, v: &str| {
            let mut s = Settings::new();
            s.set_flag(k, v).unwrap();
            s.run_config().unwrap_err().to_string()
        };
        assert!(bad("grid", "4x0").contains("--grid"));
        assert!(bad("gems", "0").contains("--gems"));
        assert!(bad("eps-start", "2.0").contains("--eps-start"));
        let mut s = Settings::new();
        s.set_flag("eps-start", "0.5").unwrap();
        s.set_flag("eps-end", "0.9").unwrap();
        assert!(s.run_config().unwrap_err().to_string().contains("--eps-end"));
        assert!(bad("noop-reward", "-2").contains("--noop-reward"));
        assert!(bad("method", "sarsa").contains("--method"));
        assert!(bad("gems", "200").contains("--gems"));

        let mut s = Settings::new();
        assert!(s.set_flag("colour", "blue").is_err());
        let err = from_text("grid = 2x9\n").unwrap().run_config().unwrap_err().to_string();
        assert!(err.contains("--grid") && err.contains("test.cfg:1"), "{err}");
    }

    #[test]
    fn malformed_files_are_rejected() {
        assert!(from_text("grid 7x7\n").is_err());
        assert!(from_text("[agents]\n").is_err());
        assert!(from_text("[layout]\nwall.0 = 1,1\n").is_err());
        let gap = from_text("agents = 2\n[layout]\nagent.0 = 0,0\nagent.2 = 1,1\n").unwrap();
        assert!(gap.run_config().unwrap_err().to_string().contains("[layout]"));
    }
}
