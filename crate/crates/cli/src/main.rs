mod commands;
mod error;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use bankworld::harness::oracle::Subtask;
use clap::{Args, Parser, Subcommand};

use crate::error::CliError;
use crate::settings::Settings;

/// Multi-agent Bank world: train, evaluate and compare tabular controllers.
#[derive(Parser, Debug)]
#[command(name = "bankworld", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one controller and write its metrics and Q-table.
    Train {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = "runs/train")]
        out: PathBuf,
    },
    /// Greedy evaluation of a saved Q-table.
    Eval {
        #[arg(long)]
        qtable: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        /// Defaults to `eval/` next to the table.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random policy, flat Q-learning and options Q-learning side by side.
    CompareMethods {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = "runs/compare-methods")]
        out: PathBuf,
    },
    /// Options Q-learning with and without the planner.
    ComparePlanner {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = "runs/compare-planner")]
        out: PathBuf,
    },
    /// Exact pickup/drop values by value iteration, as a Q-table file.
    Oracle {
        #[command(flatten)]
        run: RunArgs,
        /// Solve only one sub-task; both by default.
        #[arg(long, value_parser = ["pickup", "drop"])]
        subtask: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// key = value config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// random | q | q-options
    #[arg(long)]
    method: Option<String>,
    /// on | off
    #[arg(long)]
    planner: Option<String>,
    /// WxH
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    agents: Option<String>,
    #[arg(long)]
    gems: Option<String>,
    #[arg(long)]
    episodes: Option<String>,
    /// Step limit per episode.
    #[arg(long)]
    steps: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long = "eps-start")]
    eps_start: Option<String>,
    #[arg(long = "eps-end")]
    eps_end: Option<String>,
    #[arg(long = "eps-decay-frac")]
    eps_decay_frac: Option<String>,
    /// constant | visit-decay:<scale>
    #[arg(long = "alpha-schedule")]
    alpha_schedule: Option<String>,
    /// 0 | -1
    #[arg(long = "noop-reward", allow_hyphen_values = true)]
    noop_reward: Option<String>,
    /// spread | random | fixed
    #[arg(long)]
    layout: Option<String>,
    /// Greedy evaluation runs.
    #[arg(long)]
    runs: Option<String>,
    /// Trailing-mean reward counted as learned.
    #[arg(long, allow_hyphen_values = true)]
    threshold: Option<String>,
}

impl RunArgs {
    fn flags(&self) -> Result<Settings, CliError> {
        let pairs = [
            ("method", &self.method),
            ("planner", &self.planner),
            ("grid", &self.grid),
            ("agents", &self.agents),
            ("gems", &self.gems),
            ("episodes", &self.episodes),
            ("steps", &self.steps),
            ("seed", &self.seed),
            ("alpha", &self.alpha),
            ("gamma", &self.gamma),
            ("eps-start", &self.eps_start),
            ("eps-end", &self.eps_end),
            ("eps-decay-frac", &self.eps_decay_frac),
            ("alpha-schedule", &self.alpha_schedule),
            ("noop-reward", &self.noop_reward),
            ("layout", &self.layout),
            ("runs", &self.runs),
            ("threshold", &self.threshold),
        ];
        let mut s = Settings::new();
        for (key, value) in pairs {
            if let Some(v) = value {
                s.set_flag(key, v)?;
            }
        }
        Ok(s)
    }

    /// Config file first, flags on top.
    fn settings(&self) -> Result<Settings, CliError> {
        let mut s = Settings::new();
        if let Some(path) = &self.config {
            s.load_file(path)?;
        }
        s.merge_flags(&self.flags()?);
        Ok(s)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train { run, out } => commands::train_cmd(&run.settings()?, &out),
        Command::Eval { qtable, run, out } => {
            commands::eval_cmd(&qtable, run.config.as_deref(), &run.flags()?, out.as_deref())
        }
        Command::CompareMethods { run, out } => commands::compare_methods_cmd(&run.settings()?, &out),
        Command::ComparePlanner { run, out } => commands::compare_planner_cmd(&run.settings()?, &out),
        Command::Oracle { run, subtask, out } => {
            let subtask = subtask.map(|s| s.parse::<Subtask>()).transpose()?;
            commands::oracle_cmd(&run.settings()?, subtask, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("usage error");
            eprintln!("{}", first.trim());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
