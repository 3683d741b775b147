use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Swap-based balancing of two-player tile levels: generate levels,
/// calibrate the simulation count, train and evaluate balancing policies.
#[derive(Debug, Parser)]
#[command(name = "swapbal", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration; every key is optional.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set env.max_steps=40`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Root seed; also used as the training seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for simulations and episodes (0 = one per core).
    #[arg(long, env = "SWAPBAL_WORKERS", default_value_t = 0, global = true)]
    pub workers: usize,
    /// Directory for outputs and the echoed effective configuration.
    #[arg(long, env = "SWAPBAL_OUT_DIR", default_value = "swapbal-out", global = true)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a dataset of playable levels with their initial balance.
    Generate {
        #[arg(long)]
        count: Option<usize>,
        /// Dataset file (JSON lines) [default: <out-dir>/dataset.jsonl].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate the simulation count needed for a stable balancing state.
    Calibrate {
        /// Dataset to draw levels from; generated from the config if absent.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        n_max: Option<usize>,
        #[arg(long)]
        threshold: Option<f64>,
        /// Number of levels to calibrate on.
        #[arg(long)]
        levels: Option<usize>,
        /// Curve CSV [default: <out-dir>/calibration.csv].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a balancing policy with PPO.
    Train {
        #[arg(long)]
        repr: Option<String>,
        /// Training levels; generated from the config if absent.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        steps: Option<usize>,
        /// Checkpoint file [default: <out-dir>/checkpoint.json].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Balance a single level with a trained policy.
    Balance {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Level file (text grid or JSON).
        #[arg(long)]
        level: PathBuf,
        /// Episode record [default: <out-dir>/balance-record.json].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a policy on a dataset.
    Evaluate {
        #[command(flatten)]
        policy: PolicyArgs,
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Report JSON [default: <out-dir>/eval-report.json].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare swapped tile pairs of a policy against the random baseline.
    Analyze {
        #[command(flatten)]
        policy: PolicyArgs,
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Swap-frequency CSV [default: <out-dir>/swap-frequency.csv].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a level, optionally highlighting cells.
    Render {
        #[arg(long)]
        level: PathBuf,
        /// Cell to highlight as `row,col`. Repeatable.
        #[arg(long, value_name = "ROW,COL")]
        highlight: Vec<String>,
    },
    /// Play a single match between the scripted foragers.
    Simulate {
        #[arg(long)]
        level: PathBuf,
        /// Print one line per tick.
        #[arg(long)]
        trace: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyKind {
    /// Trained policy from `--checkpoint`.
    Checkpoint,
    /// Uniform random actions.
    Random,
    /// Never swaps.
    Never,
}

#[derive(Debug, Args)]
pub struct PolicyArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Which policy to run; defaults to `checkpoint` when one is given, else `random`.
    #[arg(long, value_enum)]
    pub policy: Option<PolicyKind>,
    /// Sample from the policy instead of acting greedily.
    #[arg(long)]
    pub sample: bool,
}
