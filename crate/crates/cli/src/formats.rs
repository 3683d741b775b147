//! File formats.
//!
//! * Level: JSON `{"width", "height", "cells": [tile ids]}` or the text
//!   grid format (`.txt` and anything else not ending in `.json`).
//! * Dataset, episode records: JSON lines, one object per line.
//! * Checkpoint: JSON `{"format": "swapbal-policy", "version": 1,
//!   "metadata": {...}, "params": {...}}`; `params.data` holds the flat
//!   parameter vector in the layout documented on `PolicyParams`.
//! * Calibration, learning curve, histogram, swap frequencies: CSV with a
//!   header row.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use swapbal_core::balance::Calibration;
use swapbal_core::env::{EnvConfig, Representation};
use swapbal_core::eval::{EvalReport, HistogramRow, SwapPairRow};
use swapbal_core::level::{parse_level, serialize_level, Level};
use swapbal_core::nn::PolicyParams;
use swapbal_core::ppo::{CurveRow, TrainConfig};

use crate::error::{CliError, CliResult};

pub const CHECKPOINT_FORMAT: &str = "swapbal-policy";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn read_level(path: &Path) -> CliResult<Level> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read level {}: {e}", path.display())))?;
    let level = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("level {}: {e}", path.display())))?
    } else {
        parse_level(&text).map_err(|e| CliError::config(format!("level {}: {e}", path.display())))?
    };
    Ok(level)
}

pub fn write_level(path: &Path, level: &Level) -> CliResult<()> {
    let text = if path.extension().is_some_and(|e| e == "json") {
        serde_json::to_string(level).context("serializing level")? + "\n"
    } else {
        serialize_level(level)
    };
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).context("serializing JSON")?;
    write_text(path, &(text + "\n"))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut out, item).context("serializing JSON line")?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> CliResult<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let mut items = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line)
            .map_err(|e| CliError::config(format!("{} line {}: {e}", path.display(), i + 1)))?;
        items.push(item);
    }
    Ok(items)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub representation: Representation,
    pub width: usize,
    pub height: usize,
    pub env: EnvConfig,
    pub train: TrainConfig,
    pub updates: usize,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub metadata: CheckpointMeta,
    pub params: PolicyParams,
}

impl Checkpoint {
    pub fn new(metadata: CheckpointMeta, params: PolicyParams) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            metadata,
            params,
        }
    }

    pub fn load(path: &Path) -> CliResult<Checkpoint> {
        let ck: Checkpoint = read_json(path)?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(CliError::config(format!(
                "{}: not a policy checkpoint (format `{}`)",
                path.display(),
                ck.format
            )));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(CliError::config(format!(
                "{}: unsupported checkpoint version {}",
                path.display(),
                ck.version
            )));
        }
        ck.params
            .check()
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        Ok(ck)
    }
}

pub fn calibration_csv(cal: &Calibration) -> String {
    let mut s = String::from("n,mu,sigma,mu_plus_sigma\n");
    for p in &cal.curve {
        let _ = writeln!(s, "{},{},{},{}", p.n, p.mu, p.sigma, p.mu + p.sigma);
    }
    s
}

pub fn calibration_table(cal: &Calibration) -> String {
    let mut s = format!("{:>4}  {:>8}  {:>8}  {:>8}\n", "n", "mu", "sigma", "mu+sigma");
    for p in &cal.curve {
        let mark = if Some(p.n) == cal.chosen { "  <- chosen" } else { "" };
        let _ = writeln!(s, "{:>4}  {:>8.4}  {:>8.4}  {:>8.4}{mark}", p.n, p.mu, p.sigma, p.mu + p.sigma);
    }
    match cal.chosen {
        Some(n) => {
            let _ = writeln!(s, "chosen n = {n} (threshold {})", cal.threshold);
        }
        None => {
            let _ = writeln!(s, "no n meets mu + sigma < {}", cal.threshold);
        }
    }
    s
}

pub fn curve_csv(rows: &[CurveRow]) -> String {
    let mut s = String::from(
        "update,steps,episodes,mean_episode_reward,policy_loss,value_loss,entropy,clip_fraction\n",
    );
    for r in rows {
        let reward = r.stats.mean_episode_reward.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.update,
            r.steps,
            r.episodes,
            reward,
            r.stats.policy_loss,
            r.stats.value_loss,
            r.stats.entropy,
            r.stats.clip_fraction
        );
    }
    s
}

pub fn histogram_csv(rows: &[HistogramRow]) -> String {
    let mut s = String::from("center,before,after\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{}", r.center, r.before, r.after);
    }
    s
}

pub fn report_table(name: &str, r: &EvalReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "policy                 {name}");
    let _ = writeln!(s, "levels                 {} ({} initially balanced, {} evaluated)", r.levels_total, r.initially_balanced, r.evaluated);
    let _ = writeln!(s, "balanced               {:.1}%", r.balanced_pct);
    let _ = writeln!(s, "improved               {:.1}%", r.improved_pct);
    let _ = writeln!(s, "avg. changes           {:.2} ± {:.2}", r.avg_changes, r.std_changes);
    let _ = writeln!(s, "avg. episode length    {:.2} ± {:.2}", r.avg_episode_length, r.std_episode_length);
    let t = &r.terminations;
    let _ = writeln!(s, "terminations           balanced {}, step cap {}, change cap {}", t.balanced, t.step_cap, t.change_cap);
    s
}

pub fn swap_frequency_csv(rows: &[SwapPairRow]) -> String {
    let mut s = String::from("a,b,model_count,baseline_count,model_share,baseline_share,relative_difference\n");
    for r in rows {
        let rel = r.relative_difference.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.a.name(),
            r.b.name(),
            r.model_count,
            r.baseline_count,
            r.model_share,
            r.baseline_share,
            rel
        );
    }
    s
}

/// Rows ranked by model share, highest first.
pub fn swap_frequency_table(rows: &[SwapPairRow]) -> String {
    let mut ranked: Vec<&SwapPairRow> = rows.iter().collect();
    ranked.sort_by(|x, y| y.model_share.total_cmp(&x.model_share));
    let mut s = format!(
        "{:<22} {:>6} {:>9} {:>8} {:>9} {:>9}\n",
        "pair", "model", "baseline", "share", "base shr", "rel diff"
    );
    for r in ranked {
        let rel = r.relative_difference.map(|v| format!("{v:+.2}")).unwrap_or_else(|| "n/a".into());
        let _ = writeln!(
            s,
            "{:<22} {:>6} {:>9} {:>8.3} {:>9.3} {:>9}",
            format!("{} <-> {}", r.a.name(), r.b.name()),
            r.model_count,
            r.baseline_count,
            r.model_share,
            r.baseline_share,
            rel
        );
    }
    s
}
