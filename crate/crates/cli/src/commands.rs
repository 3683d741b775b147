use std::path::{Path, PathBuf};

use anyhow::Context;
use swapbal_core::env::{EnvConfig, EpisodeRecord};
use swapbal_core::eval::{
    dataset_tile_counts, render_histogram, run_episode, swap_frequency, Agent, DatasetEntry, Greedy, NeverSwap,
    Sampling, UniformRandom,
};
use swapbal_core::generate::{generate, validate, GenConfig};
use swapbal_core::level::{render_ascii, render_highlighted, serialize_level, Level, Position};
use swapbal_core::ppo::train;
use swapbal_core::env::LevelPoolEnv;
use swapbal_core::rng::derive_seed;
use swapbal_core::sim::{run_match_with, trace_line, Forager};

use crate::app::{Cli, Command, PolicyArgs, PolicyKind};
use crate::config::{ConfigBuilder, RunConfig};
use crate::error::{CliError, CliResult, CoreContext};
use crate::formats::{
    calibration_csv, calibration_table, curve_csv, histogram_csv, read_jsonl, read_level, report_table,
    swap_frequency_csv, swap_frequency_table, write_json, write_jsonl, write_level, write_text, Checkpoint,
    CheckpointMeta,
};
use crate::parallel;

/// Everything a command needs after configuration is settled.
pub struct Ctx {
    pub cfg: RunConfig,
    pub out_dir: PathBuf,
}

impl Ctx {
    fn out(&self, explicit: &Option<PathBuf>, default: &str) -> PathBuf {
        explicit.clone().unwrap_or_else(|| self.out_dir.join(default))
    }
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Generate { .. } => "generate",
            Command::Calibrate { .. } => "calibrate",
            Command::Train { .. } => "train",
            Command::Balance { .. } => "balance",
            Command::Evaluate { .. } => "evaluate",
            Command::Analyze { .. } => "analyze",
            Command::Render { .. } => "render",
            Command::Simulate { .. } => "simulate",
        }
    }

    /// Configuration keys set by this command's own flags.
    fn apply_flags(&self, b: &mut ConfigBuilder) -> CliResult<()> {
        match self {
            Command::Generate { count, .. } => {
                if let Some(c) = count {
                    b.set("dataset.count", *c as i64)?;
                }
            }
            Command::Calibrate {
                n_max,
                threshold,
                levels,
                ..
            } => {
                if let Some(n) = n_max {
                    b.set("calibrate.n_max", *n as i64)?;
                }
                if let Some(t) = threshold {
                    b.set("calibrate.threshold", *t)?;
                }
                if let Some(l) = levels {
                    b.set("calibrate.levels", *l as i64)?;
                }
            }
            Command::Train { repr, steps, .. } => {
                if let Some(r) = repr {
                    b.set("env.representation", r.as_str())?;
                }
                if let Some(s) = steps {
                    b.set("train.total_steps", *s as i64)?;
                }
            }
            Command::Evaluate { policy, .. } | Command::Analyze { policy, .. } => {
                if policy.sample {
                    b.set("eval.sample", true)?;
                }
            }
            Command::Balance { .. } | Command::Render { .. } | Command::Simulate { .. } => {}
        }
        Ok(())
    }
}

/// Merges configuration sources in order: file, `--set`, `--seed`, command flags.
pub fn resolve_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut b = match &cli.global.config {
        Some(path) => ConfigBuilder::from_file(path)?,
        None => ConfigBuilder::default(),
    };
    for o in &cli.global.overrides {
        b.set_str(o)?;
    }
    if let Some(seed) = cli.global.seed {
        let seed = i64::try_from(seed).map_err(|_| CliError::config("seed must fit in a signed 64-bit integer"))?;
        b.set("seed", seed)?;
        b.set("train.seed", seed)?;
    }
    cli.command.apply_flags(&mut b)?;
    b.build()
}

pub fn run(cli: Cli) -> CliResult<()> {
    let cfg = resolve_config(&cli)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.global.workers)
        .build()
        .context("starting worker pool")?;
    let ctx = Ctx {
        cfg,
        out_dir: cli.global.out_dir.clone(),
    };
    write_text(
        &ctx.out_dir.join(format!("{}-config.toml", cli.command.name())),
        &ctx.cfg.to_toml()?,
    )?;
    pool.install(|| dispatch(&ctx, &cli.command))
}

fn dispatch(ctx: &Ctx, command: &Command) -> CliResult<()> {
    match command {
        Command::Generate { out, .. } => cmd_generate(ctx, &ctx.out(out, "dataset.jsonl")),
        Command::Calibrate { dataset, out, .. } => {
            cmd_calibrate(ctx, dataset.as_deref(), &ctx.out(out, "calibration.csv"))
        }
        Command::Train { dataset, out, .. } => cmd_train(ctx, dataset.as_deref(), &ctx.out(out, "checkpoint.json")),
        Command::Balance { checkpoint, level, out } => {
            cmd_balance(ctx, checkpoint, level, &ctx.out(out, "balance-record.json"))
        }
        Command::Evaluate { policy, dataset, out } => {
            cmd_evaluate(ctx, policy, dataset.as_deref(), &ctx.out(out, "eval-report.json"))
        }
        Command::Analyze { policy, dataset, out } => {
            cmd_analyze(ctx, policy, dataset.as_deref(), &ctx.out(out, "swap-frequency.csv"))
        }
        Command::Render { level, highlight } => cmd_render(level, highlight),
        Command::Simulate { level, trace } => cmd_simulate(ctx, level, *trace),
    }
}

/// `path` with its file name replaced by `<stem><suffix>`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn check_level(level: &Level, origin: &Path) -> CliResult<()> {
    if let Some(failure) = validate(level).failure() {
        return Err(CliError::config(format!("{}: invalid level: {failure}", origin.display())));
    }
    Ok(())
}

fn load_dataset(path: &Path) -> CliResult<Vec<DatasetEntry>> {
    let entries: Vec<DatasetEntry> = read_jsonl(path)?;
    if entries.is_empty() {
        return Err(CliError::config(format!("{}: dataset is empty", path.display())));
    }
    for (i, e) in entries.iter().enumerate() {
        if let Some(failure) = validate(&e.level).failure() {
            return Err(CliError::config(format!(
                "{} line {}: invalid level: {failure}",
                path.display(),
                i + 1
            )));
        }
    }
    Ok(entries)
}

/// The dataset at `path`, or one generated from the configuration.
fn dataset_or_generate(ctx: &Ctx, path: Option<&Path>) -> CliResult<Vec<DatasetEntry>> {
    match path {
        Some(p) => load_dataset(p),
        None => {
            let c = &ctx.cfg;
            Ok(parallel::build_dataset(&c.generator, c.dataset.count, &c.env.sim, c.env.n_sims, c.seed)?)
        }
    }
}

fn cmd_generate(ctx: &Ctx, out: &Path) -> CliResult<()> {
    let c = &ctx.cfg;
    let data = parallel::build_dataset(&c.generator, c.dataset.count, &c.env.sim, c.env.n_sims, c.seed)?;
    write_jsonl(out, &data)?;
    let balanced = data.iter().filter(|e| c.env.reward.is_balanced(e.b0)).count();
    println!(
        "wrote {} levels to {} ({} initially balanced)",
        data.len(),
        out.display(),
        balanced
    );
    Ok(())
}

fn cmd_calibrate(ctx: &Ctx, dataset: Option<&Path>, out: &Path) -> CliResult<()> {
    let c = &ctx.cfg;
    let levels: Vec<Level> = match dataset {
        Some(p) => load_dataset(p)?
            .into_iter()
            .take(c.calibrate.levels)
            .map(|e| e.level)
            .collect(),
        None => (0..c.calibrate.levels as u64)
            .map(|i| {
                generate(&GenConfig {
                    seed: derive_seed(c.seed, i),
                    ..c.generator.clone()
                })
            })
            .collect::<Result<_, _>>()?,
    };
    let cal = parallel::calibrate(&levels, &c.env.sim, c.calibrate.n_max, c.calibrate.threshold, c.seed)?;
    write_text(out, &calibration_csv(&cal))?;
    write_json(&sibling(out, ".json"), &cal)?;
    print!("{}", calibration_table(&cal));
    println!("calibrated on {} levels; curve written to {}", levels.len(), out.display());
    Ok(())
}

fn cmd_train(ctx: &Ctx, dataset: Option<&Path>, out: &Path) -> CliResult<()> {
    let c = &ctx.cfg;
    let levels: Vec<Level> = dataset_or_generate(ctx, dataset)?.into_iter().map(|e| e.level).collect();
    let (width, height) = (levels[0].width(), levels[0].height());
    let mut env = LevelPoolEnv::new(c.env.clone(), levels).ctx("training levels")?;
    let every = (c.train.total_steps / c.train.rollout_length / 20).max(1);
    let output = train(&mut env, &c.train, |row| {
        if row.update % every == 0 {
            let reward = row
                .stats
                .mean_episode_reward
                .map(|r| format!("{r:.3}"))
                .unwrap_or_else(|| "-".into());
            eprintln!(
                "update {:>5}  steps {:>8}  episodes {:>6}  reward {reward:>7}  entropy {:.3}",
                row.update, row.steps, row.episodes, row.stats.entropy
            );
        }
    })?;
    let updates = output.curve.len();
    let meta = CheckpointMeta {
        representation: c.env.representation,
        width,
        height,
        env: c.env.clone(),
        train: c.train.clone(),
        updates,
        steps: updates * c.train.rollout_length,
    };
    write_json(out, &Checkpoint::new(meta, output.params))?;
    let curve_path = sibling(out, "-curve.csv");
    write_text(&curve_path, &curve_csv(&output.curve))?;
    println!(
        "trained {} for {} updates; checkpoint {}, learning curve {}",
        c.env.representation,
        updates,
        out.display(),
        curve_path.display()
    );
    Ok(())
}

/// Loaded policy choice plus the environment configuration it runs in.
struct Policy {
    kind: PolicyKind,
    checkpoint: Option<Checkpoint>,
    env: EnvConfig,
}

impl Policy {
    fn load(ctx: &Ctx, args: &PolicyArgs) -> CliResult<Policy> {
        let kind = args.policy.unwrap_or(if args.checkpoint.is_some() {
            PolicyKind::Checkpoint
        } else {
            PolicyKind::Random
        });
        let mut env = ctx.cfg.env.clone();
        let checkpoint = match (kind, &args.checkpoint) {
            (PolicyKind::Checkpoint, Some(p)) => {
                let ck = Checkpoint::load(p)?;
                env.representation = ck.metadata.representation;
                Some(ck)
            }
            (PolicyKind::Checkpoint, None) => {
                return Err(CliError::config("--policy checkpoint needs --checkpoint"));
            }
            _ => None,
        };
        Ok(Policy { kind, checkpoint, env })
    }

    fn name(&self, sample: bool) -> String {
        match self.kind {
            PolicyKind::Checkpoint if sample => "checkpoint (sampled)".into(),
            PolicyKind::Checkpoint => "checkpoint (greedy)".into(),
            PolicyKind::Random => "random".into(),
            PolicyKind::Never => "never-swap".into(),
        }
    }

    fn with_agent<T>(&self, sample: bool, f: impl FnOnce(&(dyn Agent + Sync)) -> T) -> T {
        match (&self.checkpoint, self.kind) {
            (Some(ck), PolicyKind::Checkpoint) if sample => f(&Sampling(&ck.params)),
            (Some(ck), PolicyKind::Checkpoint) => f(&Greedy(&ck.params)),
            (_, PolicyKind::Never) => f(&NeverSwap),
            _ => f(&UniformRandom),
        }
    }
}

fn cmd_evaluate(ctx: &Ctx, args: &PolicyArgs, dataset: Option<&Path>, out: &Path) -> CliResult<()> {
    let policy = Policy::load(ctx, args)?;
    let data = dataset_or_generate(ctx, dataset)?;
    let sample = ctx.cfg.eval.sample;
    let (report, records) = policy.with_agent(sample, |a| parallel::evaluate(a, &data, &policy.env))?;
    write_json(out, &report)?;
    write_jsonl(&sibling(out, "-records.jsonl"), &records)?;
    write_text(&ctx.out_dir.join("histogram.csv"), &histogram_csv(&report.final_b_histogram))?;
    print!("{}", report_table(&policy.name(sample), &report));
    println!();
    print!("{}", render_histogram(&report.final_b_histogram, 30));
    Ok(())
}

fn cmd_analyze(ctx: &Ctx, args: &PolicyArgs, dataset: Option<&Path>, out: &Path) -> CliResult<()> {
    let policy = Policy::load(ctx, args)?;
    let data = dataset_or_generate(ctx, dataset)?;
    let sample = ctx.cfg.eval.sample;
    let (_, model) = policy.with_agent(sample, |a| parallel::evaluate(a, &data, &policy.env))?;
    let (_, baseline) = parallel::evaluate(&UniformRandom, &data, &policy.env)?;
    let rows = swap_frequency(&model, &baseline, &dataset_tile_counts(&data));
    write_text(out, &swap_frequency_csv(&rows))?;
    write_json(&sibling(out, ".json"), &rows)?;
    println!("{} vs random baseline", policy.name(sample));
    print!("{}", swap_frequency_table(&rows));
    Ok(())
}

fn cmd_balance(ctx: &Ctx, checkpoint: &Path, level_path: &Path, out: &Path) -> CliResult<()> {
    let ck = Checkpoint::load(checkpoint)?;
    let level = read_level(level_path)?;
    check_level(&level, level_path)?;
    let m = &ck.metadata;
    if (level.width(), level.height()) != (m.width, m.height) {
        return Err(CliError::config(format!(
            "{}: level is {}x{} but the policy was trained on {}x{}",
            level_path.display(),
            level.width(),
            level.height(),
            m.width,
            m.height
        )));
    }
    let mut env = ctx.cfg.env.clone();
    env.representation = m.representation;
    let entry = DatasetEntry {
        level: level.clone(),
        seed: ctx.cfg.seed,
        b0: f64::NAN,
    };
    let record: EpisodeRecord = if ctx.cfg.eval.sample {
        run_episode(&Sampling(&ck.params), &entry, &env)?
    } else {
        run_episode(&Greedy(&ck.params), &entry, &env)?
    };
    write_json(out, &record)?;
    if record.steps == 0 {
        println!("already balanced (b = {}); no swaps needed", record.initial_b);
        print!("{}", render_ascii(&level));
        return Ok(());
    }
    write_level(&sibling(out, "-level.txt"), &record.final_level)?;
    let marked = record.swapped_positions();
    println!("before (b = {:.4}):", record.initial_b);
    print!("{}", render_highlighted(&record.initial_level, &marked));
    println!("after (b = {:.4}):", record.final_b);
    print!("{}", render_highlighted(&record.final_level, &marked));
    for s in &record.swaps {
        println!(
            "step {:>3}: swap ({},{}) {} <-> ({},{}) {}  b {:.4} -> {:.4}",
            s.step,
            s.a.row,
            s.a.col,
            s.kinds[0].name(),
            s.b.row,
            s.b.col,
            s.kinds[1].name(),
            s.b_before,
            s.b_after
        );
    }
    let term = record
        .termination
        .map(|t| format!("{t:?}"))
        .unwrap_or_else(|| "-".into());
    println!("{} swaps in {} steps, ended by {term}", record.changes, record.steps);
    Ok(())
}

fn parse_position(s: &str) -> CliResult<Position> {
    let bad = || CliError::config(format!("highlight `{s}` is not of the form row,col"));
    let (r, c) = s.split_once(',').ok_or_else(bad)?;
    Ok(Position::new(
        r.trim().parse().map_err(|_| bad())?,
        c.trim().parse().map_err(|_| bad())?,
    ))
}

fn cmd_render(level_path: &Path, highlight: &[String]) -> CliResult<()> {
    let level = read_level(level_path)?;
    let marked = highlight.iter().map(|s| parse_position(s)).collect::<CliResult<Vec<_>>>()?;
    for &p in &marked {
        level.check(p)?;
    }
    if marked.is_empty() {
        print!("{}", render_ascii(&level));
    } else {
        print!("{}", render_highlighted(&level, &marked));
    }
    Ok(())
}

fn cmd_simulate(ctx: &Ctx, level_path: &Path, trace: bool) -> CliResult<()> {
    let level = read_level(level_path)?;
    check_level(&level, level_path)?;
    let c = &ctx.cfg;
    let outcome = run_match_with(&level, &c.env.sim, c.seed, [&Forager, &Forager], |s| {
        if trace {
            println!("{}", trace_line(s));
        }
    })?;
    write_json(&ctx.out_dir.join("match.json"), &outcome)?;
    let winners: Vec<String> = outcome.winners.indices().map(|i| i.to_string()).collect();
    println!(
        "winners: {}  end: {:?}  ticks: {}",
        winners.join(","),
        outcome.end,
        outcome.ticks
    );
    println!("level text:\n{}", serialize_level(&level).trim_end());
    Ok(())
}
