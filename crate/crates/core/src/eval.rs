//! Evaluation protocol: datasets, balancing metrics, histograms and
//! tile-impact analysis.
//!
//! Metrics exclude levels that are balanced before the agent acts. A level
//! counts as *improved* when `|b_final - 0.5| < |b_0 - 0.5|` and as
//! *balanced* when its final state is balanced under the environment's
//! reward config.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::balance::estimate_balance;
use crate::env::{EnvConfig, EpisodeRecord, SwapEnv, Termination};
use crate::error::{Error, Result};
use crate::generate::{generate, GenConfig};
use crate::level::{Level, TileCounts, TileKind};
use crate::nn::PolicyParams;
use crate::ppo::{act_greedy, sample_action};
use crate::rng::{derive_seed, rng_from_seed, SimRng};
use crate::sim::SimConfig;

/// Something that picks actions in a swap environment.
pub trait Agent {
    fn act(&self, obs: &[f64], components: &[usize], rng: &mut SimRng) -> Result<Vec<usize>>;

    /// Rejects environments whose action layout the agent cannot serve.
    fn check(&self, _components: &[usize], _obs_len: usize) -> Result<()> {
        Ok(())
    }
}

fn check_params(params: &PolicyParams, components: &[usize], obs_len: usize) -> Result<()> {
    if params.components != components || params.obs_len != obs_len {
        return Err(Error::Input(format!(
            "policy expects components {:?} / observation length {}, environment has {:?} / {}",
            params.components, params.obs_len, components, obs_len
        )));
    }
    Ok(())
}

/// Argmax action of a trained policy.
#[derive(Debug, Clone, Copy)]
pub struct Greedy<'a>(pub &'a PolicyParams);

impl Agent for Greedy<'_> {
    fn act(&self, obs: &[f64], _components: &[usize], _rng: &mut SimRng) -> Result<Vec<usize>> {
        act_greedy(self.0, obs)
    }

    fn check(&self, components: &[usize], obs_len: usize) -> Result<()> {
        check_params(self.0, components, obs_len)
    }
}

/// Samples from a trained policy.
#[derive(Debug, Clone, Copy)]
pub struct Sampling<'a>(pub &'a PolicyParams);

impl Agent for Sampling<'_> {
    fn act(&self, obs: &[f64], _components: &[usize], rng: &mut SimRng) -> Result<Vec<usize>> {
        sample_action(self.0, obs, rng).map(|(a, _, _)| a)
    }

    fn check(&self, components: &[usize], obs_len: usize) -> Result<()> {
        check_params(self.0, components, obs_len)
    }
}

/// Uniform over every action component: the random-swap baseline.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformRandom;

impl Agent for UniformRandom {
    fn act(&self, _obs: &[f64], components: &[usize], rng: &mut SimRng) -> Result<Vec<usize>> {
        Ok(components.iter().map(|&n| rng.gen_range(0..n)).collect())
    }
}

/// Always picks component 0, so the swap flag is never set.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeverSwap;

impl Agent for NeverSwap {
    fn act(&self, _obs: &[f64], components: &[usize], _rng: &mut SimRng) -> Result<Vec<usize>> {
        Ok(vec![0; components.len()])
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DatasetEntry {
    pub level: Level,
    /// Generation seed; also the simulation seed base of `b0`.
    pub seed: u64,
    pub b0: f64,
}

/// Entry `index` of the dataset seeded with `seed`.
pub fn dataset_entry(gen: &GenConfig, sim: &SimConfig, n_sims: usize, seed: u64, index: u64) -> Result<DatasetEntry> {
    let level_seed = derive_seed(seed, index);
    let level = generate(&GenConfig {
        seed: level_seed,
        ..gen.clone()
    })?;
    let b0 = estimate_balance(&level, sim, n_sims, level_seed)?.b;
    Ok(DatasetEntry {
        level,
        seed: level_seed,
        b0,
    })
}

pub fn build_dataset(gen: &GenConfig, count: usize, sim: &SimConfig, n_sims: usize, seed: u64) -> Result<Vec<DatasetEntry>> {
    if count == 0 {
        return Err(Error::Input("dataset count must be at least 1".into()));
    }
    (0..count as u64)
        .map(|i| dataset_entry(gen, sim, n_sims, seed, i))
        .collect()
}

pub fn dataset_tile_counts(entries: &[DatasetEntry]) -> TileCounts {
    let mut total = TileCounts::default();
    for e in entries {
        total.add(&e.level.count_tiles());
    }
    total
}

/// One episode of `agent` on a dataset entry. The environment is reset with
/// the entry's seed, so the starting state equals the entry's `b0`.
pub fn run_episode<A: Agent + ?Sized>(agent: &A, entry: &DatasetEntry, cfg: &EnvConfig) -> Result<EpisodeRecord> {
    let mut env = SwapEnv::new(cfg.clone())?;
    let mut obs = env.reset(&entry.level, entry.seed)?;
    let components = env.action_components();
    agent.check(&components, obs.as_slice().len())?;
    let mut rng = rng_from_seed(derive_seed(entry.seed, 0xA6E7));
    while !env.is_done() {
        let action = agent.act(obs.as_slice(), &components, &mut rng)?;
        obs = env.step(&action)?.observation;
    }
    Ok(env.take_record().expect("reset creates a record"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TerminationCounts {
    pub balanced: usize,
    pub step_cap: usize,
    pub change_cap: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub levels_total: usize,
    pub initially_balanced: usize,
    pub evaluated: usize,
    pub balanced_pct: f64,
    pub improved_pct: f64,
    pub avg_changes: f64,
    pub std_changes: f64,
    pub avg_episode_length: f64,
    pub std_episode_length: f64,
    pub terminations: TerminationCounts,
    /// Initial vs final balancing states, one bin per `k / n_sims`.
    pub final_b_histogram: Vec<HistogramRow>,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    (mean, libm::sqrt(var))
}

pub fn is_improved(b0: f64, b_final: f64) -> bool {
    libm::fabs(b_final - 0.5) < libm::fabs(b0 - 0.5)
}

/// Aggregates episodes of levels that were not balanced initially.
///
/// `levels_total` counts all dataset levels, including the skipped ones.
pub fn summarize(records: &[EpisodeRecord], levels_total: usize, cfg: &EnvConfig) -> Result<EvalReport> {
    let mut terminations = TerminationCounts::default();
    let mut balanced = 0usize;
    let mut improved = 0usize;
    for r in records {
        match r.termination {
            Some(Termination::Balanced) => terminations.balanced += 1,
            Some(Termination::StepCap) => terminations.step_cap += 1,
            Some(Termination::ChangeCap) => terminations.change_cap += 1,
            None => return Err(Error::Input("episode record without termination".into())),
        }
        balanced += usize::from(cfg.reward.is_balanced(r.final_b));
        improved += usize::from(is_improved(r.initial_b, r.final_b));
    }
    let n = records.len();
    let pct = |k: usize| if n == 0 { 0.0 } else { 100.0 * k as f64 / n as f64 };
    let (avg_changes, std_changes) = mean_std(records.iter().map(|r| r.changes as f64));
    let (avg_len, std_len) = mean_std(records.iter().map(|r| r.steps as f64));
    let before: Vec<f64> = records.iter().map(|r| r.initial_b).collect();
    let after: Vec<f64> = records.iter().map(|r| r.final_b).collect();
    let final_b_histogram = compare_histograms(&before, &after, cfg.n_sims)?;
    Ok(EvalReport {
        levels_total,
        initially_balanced: levels_total.saturating_sub(n),
        evaluated: n,
        balanced_pct: pct(balanced),
        improved_pct: pct(improved),
        avg_changes,
        std_changes,
        avg_episode_length: avg_len,
        std_episode_length: std_len,
        terminations,
        final_b_histogram,
    })
}

/// Entries that the evaluation actually runs: not balanced at the start.
pub fn evaluable<'a>(dataset: &'a [DatasetEntry], cfg: &EnvConfig) -> impl Iterator<Item = &'a DatasetEntry> + 'a {
    let reward = cfg.reward.clone();
    dataset.iter().filter(move |e| !reward.is_balanced(e.b0))
}

/// One episode per initially unbalanced level, in dataset order.
pub fn evaluate<A: Agent + ?Sized>(agent: &A, dataset: &[DatasetEntry], cfg: &EnvConfig) -> Result<(EvalReport, Vec<EpisodeRecord>)> {
    cfg.validate()?;
    let records = evaluable(dataset, cfg)
        .map(|e| run_episode(agent, e, cfg))
        .collect::<Result<Vec<_>>>()?;
    let report = summarize(&records, dataset.len(), cfg)?;
    Ok((report, records))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SwapPairRow {
    pub a: TileKind,
    pub b: TileKind,
    pub model_count: usize,
    pub baseline_count: usize,
    /// Occurrence-weighted share among all pairs (sums to 1 over rows when any swap happened).
    pub model_share: f64,
    pub baseline_share: f64,
    /// `(model_share - baseline_share) / baseline_share`; `None` when the baseline never swapped this pair.
    pub relative_difference: Option<f64>,
}

/// The ten unordered pairs of distinct placeable kinds, in a fixed order.
pub fn swap_pairs() -> Vec<(TileKind, TileKind)> {
    let kinds = TileKind::PLACEABLE;
    let mut out = Vec::with_capacity(10);
    for i in 0..kinds.len() {
        for j in i + 1..kinds.len() {
            out.push((kinds[i], kinds[j]));
        }
    }
    out
}

fn pair_counts(records: &[EpisodeRecord]) -> Vec<usize> {
    let pairs = swap_pairs();
    let mut counts = vec![0; pairs.len()];
    for s in records.iter().flat_map(|r| &r.swaps) {
        let [x, y] = s.kinds;
        if let Some(i) = pairs.iter().position(|&(a, b)| (a, b) == (x, y) || (a, b) == (y, x)) {
            counts[i] += 1;
        }
    }
    counts
}

fn weighted_shares(counts: &[usize], weights: &[f64]) -> Vec<f64> {
    let w: Vec<f64> = counts.iter().zip(weights).map(|(&c, &w)| c as f64 * w).collect();
    let total: f64 = w.iter().sum();
    if total > 0.0 {
        w.iter().map(|v| v / total).collect()
    } else {
        vec![0.0; w.len()]
    }
}

/// Swap-pair frequencies of `model` against `baseline`, each pair weighted
/// by the inverse occurrence probabilities of its two kinds in `tiles`.
pub fn swap_frequency(model: &[EpisodeRecord], baseline: &[EpisodeRecord], tiles: &TileCounts) -> Vec<SwapPairRow> {
    let total = tiles.total() as f64;
    let prob = |k: TileKind| tiles.get(k) as f64 / total;
    let pairs = swap_pairs();
    let weights: Vec<f64> = pairs
        .iter()
        .map(|&(a, b)| {
            let p = prob(a) * prob(b);
            if p > 0.0 {
                1.0 / p
            } else {
                0.0
            }
        })
        .collect();
    let mc = pair_counts(model);
    let bc = pair_counts(baseline);
    let ms = weighted_shares(&mc, &weights);
    let bs = weighted_shares(&bc, &weights);
    pairs
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| SwapPairRow {
            a,
            b,
            model_count: mc[i],
            baseline_count: bc[i],
            model_share: ms[i],
            baseline_share: bs[i],
            relative_difference: (bs[i] > 0.0).then(|| (ms[i] - bs[i]) / bs[i]),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HistogramRow {
    pub center: f64,
    pub before: usize,
    pub after: usize,
}

/// Before/after histogram of balancing states with one bin per `k / n`,
/// `k = 0..=n`; each value falls into the bin of the nearest `k / n`.
pub fn compare_histograms(before: &[f64], after: &[f64], n: usize) -> Result<Vec<HistogramRow>> {
    if before.len() != after.len() {
        return Err(Error::Input(format!(
            "histogram columns differ in length: {} vs {}",
            before.len(),
            after.len()
        )));
    }
    if n == 0 {
        return Err(Error::Input("bin count must be positive".into()));
    }
    let mut rows: Vec<HistogramRow> = (0..=n)
        .map(|k| HistogramRow {
            center: k as f64 / n as f64,
            before: 0,
            after: 0,
        })
        .collect();
    let bin = |b: f64| -> Result<usize> {
        if !(0.0..=1.0).contains(&b) {
            return Err(Error::Input(format!("balancing state {b} outside [0, 1]")));
        }
        Ok(libm::round(b * n as f64) as usize)
    };
    for &b in before {
        rows[bin(b)?].before += 1;
    }
    for &b in after {
        rows[bin(b)?].after += 1;
    }
    Ok(rows)
}

/// Two-column ASCII bar chart of a histogram, one line per bin.
pub fn render_histogram(rows: &[HistogramRow], width: usize) -> String {
    let max = rows.iter().map(|r| r.before.max(r.after)).max().unwrap_or(0).max(1);
    let bar = |c: usize| {
        let len = (c * width).div_ceil(max);
        let mut s: String = core::iter::repeat('#').take(len).collect();
        while s.len() < width {
            s.push(' ');
        }
        s
    };
    let mut out = format!("{:>6} | {:<w$} | {}\n", "b", "before", "after", w = width + 6);
    for r in rows {
        out.push_str(&format!(
            "{:>6.3} | {} {:>5} | {} {:>5}\n",
            r.center,
            bar(r.before),
            r.before,
            bar(r.after),
            r.after
        ));
    }
    out
}
