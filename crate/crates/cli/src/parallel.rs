//! Parallel fan-out over levels. Every item carries its own derived seed
//! and results are collected in index order, so outputs do not depend on
//! the number of worker threads.

use rayon::prelude::*;
use swapbal_core::balance::{calibration_curve, simulate_record, win_rate_prefixes, Calibration};
use swapbal_core::env::{EnvConfig, EpisodeRecord};
use swapbal_core::eval::{dataset_entry, evaluable, run_episode, summarize, Agent, DatasetEntry, EvalReport};
use swapbal_core::generate::GenConfig;
use swapbal_core::level::Level;
use swapbal_core::rng::derive_seed;
use swapbal_core::sim::SimConfig;
use swapbal_core::Result;

pub fn build_dataset(gen: &GenConfig, count: usize, sim: &SimConfig, n_sims: usize, seed: u64) -> Result<Vec<DatasetEntry>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| dataset_entry(gen, sim, n_sims, seed, i))
        .collect()
}

/// Same result as `balance::calibrate_n`, with levels simulated in parallel.
pub fn calibrate(levels: &[Level], sim: &SimConfig, n_max: usize, threshold: f64, seed: u64) -> Result<Calibration> {
    let per_level = levels
        .par_iter()
        .enumerate()
        .map(|(j, l)| simulate_record(l, sim, n_max, derive_seed(seed, j as u64)).map(|w| win_rate_prefixes(&w)))
        .collect::<Result<Vec<_>>>()?;
    calibration_curve(&per_level, n_max, threshold)
}

/// Same result as `eval::evaluate`, with episodes run in parallel.
pub fn evaluate<A: Agent + Sync + ?Sized>(
    agent: &A,
    dataset: &[DatasetEntry],
    cfg: &EnvConfig,
) -> Result<(EvalReport, Vec<EpisodeRecord>)> {
    cfg.validate()?;
    let entries: Vec<&DatasetEntry> = evaluable(dataset, cfg).collect();
    let records = entries
        .par_iter()
        .map(|e| run_episode(agent, e, cfg))
        .collect::<Result<Vec<_>>>()?;
    let report = summarize(&records, dataset.len(), cfg)?;
    Ok((report, records))
}
