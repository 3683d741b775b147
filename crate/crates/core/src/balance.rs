//! Balancing state, swap reward and simulation-count calibration.
//!
//! The balancing state of `n` simulated matches is the mean winner index
//! over all winners: `b = (sum of winner indices) / (number of winners)`.
//! A draw contributes both indices, so the winner count lies in `n..=2n`.
//! `b = 0` means the first player always wins, `b = 1` the second, and
//! `b = 0.5` an even split.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::level::Level;
use crate::rng::derive_seed;
use crate::sim::{run_match, SimConfig, Winners};

/// Winner sets of `n >= 1` simulated matches.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WinRecord(Vec<Winners>);

impl WinRecord {
    pub fn new(winners: Vec<Winners>) -> Result<WinRecord> {
        if winners.is_empty() {
            return Err(Error::Input("win record needs at least one simulation".into()));
        }
        Ok(WinRecord(winners))
    }

    pub fn winners(&self) -> &[Winners] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Total number of winners (`wl`).
    pub fn winner_count(&self) -> u32 {
        self.0.iter().map(|w| w.count()).sum()
    }

    pub fn index_sum(&self) -> u32 {
        self.0.iter().map(|w| w.index_sum()).sum()
    }

    pub fn b(&self) -> f64 {
        self.index_sum() as f64 / self.winner_count() as f64
    }
}

pub fn compute_b(winners: &[Winners]) -> Result<f64> {
    Ok(WinRecord::new(winners.to_vec())?.b())
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BalanceEstimate {
    pub b: f64,
    pub n: usize,
    /// Matches each player won, draws included.
    pub wins: [u32; 2],
    pub draws: u32,
    /// Numerator and denominator of `b`, kept for exact comparisons.
    pub index_sum: u32,
    pub winner_count: u32,
    pub seed_base: u64,
}

impl BalanceEstimate {
    pub fn from_record(record: &WinRecord, seed_base: u64) -> BalanceEstimate {
        let mut wins = [0u32; 2];
        let mut draws = 0;
        for w in record.winners() {
            for i in w.indices() {
                wins[i] += 1;
            }
            draws += u32::from(w.is_draw());
        }
        BalanceEstimate {
            b: record.b(),
            n: record.len(),
            wins,
            draws,
            index_sum: record.index_sum(),
            winner_count: record.winner_count(),
            seed_base,
        }
    }

    /// Exact `b == 0.5`.
    pub fn is_exactly_balanced(&self) -> bool {
        2 * self.index_sum == self.winner_count
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum RewardMode {
    /// `b_prev - b_now (+ alpha)`.
    Literal,
    /// `|b_prev - 0.5| - |b_now - 0.5| (+ alpha)`.
    #[default]
    Distance,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct RewardConfig {
    /// Bonus paid when the new state is balanced.
    pub alpha: f64,
    pub mode: RewardMode,
    /// `None` means balanced is exact equality with 0.5.
    pub balance_tolerance: Option<f64>,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            alpha: 0.5,
            mode: RewardMode::Distance,
            balance_tolerance: None,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) {
            return Err(Error::Input(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if let Some(t) = self.balance_tolerance {
            if !(t >= 0.0) {
                return Err(Error::Input(format!("balance_tolerance must be >= 0, got {t}")));
            }
        }
        Ok(())
    }

    pub fn is_balanced(&self, b: f64) -> bool {
        is_balanced(b, self.balance_tolerance)
    }
}

pub fn is_balanced(b: f64, tolerance: Option<f64>) -> bool {
    match tolerance {
        None => b == 0.5,
        Some(t) => libm::fabs(b - 0.5) <= t,
    }
}

pub fn compute_reward(b_prev: f64, b_now: f64, cfg: &RewardConfig) -> f64 {
    let base = match cfg.mode {
        RewardMode::Literal => b_prev - b_now,
        RewardMode::Distance => libm::fabs(b_prev - 0.5) - libm::fabs(b_now - 0.5),
    };
    if cfg.is_balanced(b_now) {
        base + cfg.alpha
    } else {
        base
    }
}

fn check_even(n: usize, min: usize, what: &str) -> Result<()> {
    if n < min || n % 2 != 0 {
        return Err(Error::Input(format!("{what} must be even and >= {min}, got {n}")));
    }
    Ok(())
}

/// Winner sets of matches `0..n`, match `i` seeded with `derive_seed(seed_base, i)`.
pub fn simulate_record(
    level: &Level,
    config: &SimConfig,
    n: usize,
    seed_base: u64,
) -> Result<Vec<Winners>> {
    (0..n as u64)
        .map(|i| run_match(level, config, derive_seed(seed_base, i)).map(|o| o.winners))
        .collect()
}

/// Plays the level `n` times and reduces the results to a balancing state.
pub fn estimate_balance(
    level: &Level,
    config: &SimConfig,
    n: usize,
    seed_base: u64,
) -> Result<BalanceEstimate> {
    check_even(n, 2, "simulation count")?;
    let record = WinRecord::new(simulate_record(level, config, n, seed_base)?)?;
    Ok(BalanceEstimate::from_record(&record, seed_base))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CalibrationPoint {
    pub n: usize,
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Calibration {
    /// Smallest even `n` with `mu + sigma < threshold`, if any up to `n_max`.
    pub chosen: Option<usize>,
    pub threshold: f64,
    pub curve: Vec<CalibrationPoint>,
}

/// First player's win rate over the first `k` matches, for `k = 1..=winners.len()`.
///
/// Entry `k - 1` holds `w_k`. Draws count as a win for the first player.
pub fn win_rate_prefixes(winners: &[Winners]) -> Vec<f64> {
    let mut wins = 0u32;
    winners
        .iter()
        .enumerate()
        .map(|(i, w)| {
            wins += u32::from(w.contains(0));
            wins as f64 / (i + 1) as f64
        })
        .collect()
}

/// Builds the `(n, mu_n, sigma_n)` curve from per-level win-rate prefixes.
///
/// For each even `n` in `4..=n_max`, `mu_n` is the mean over levels of
/// `|w_n - w_{n-2}|` and `sigma_n` its population standard deviation.
pub fn calibration_curve(per_level: &[Vec<f64>], n_max: usize, threshold: f64) -> Result<Calibration> {
    check_even(n_max, 4, "n_max")?;
    if per_level.is_empty() {
        return Err(Error::Input("calibration needs at least one level".into()));
    }
    if let Some(short) = per_level.iter().find(|r| r.len() < n_max) {
        return Err(Error::Shape {
            expected: n_max,
            actual: short.len(),
        });
    }
    let s = per_level.len() as f64;
    let mut curve = Vec::new();
    for n in (4..=n_max).step_by(2) {
        let devs: Vec<f64> = per_level
            .iter()
            .map(|r| libm::fabs(r[n - 1] - r[n - 3]))
            .collect();
        let mu = devs.iter().sum::<f64>() / s;
        let var = devs.iter().map(|d| (d - mu) * (d - mu)).sum::<f64>() / s;
        curve.push(CalibrationPoint {
            n,
            mu,
            sigma: libm::sqrt(var),
        });
    }
    let chosen = curve
        .iter()
        .find(|p| p.mu + p.sigma < threshold)
        .map(|p| p.n);
    Ok(Calibration {
        chosen,
        threshold,
        curve,
    })
}

/// Chooses the simulation count for a sample of levels.
///
/// Level `j` is simulated `n_max` times with seed base `derive_seed(seed, j)`;
/// every `w_n` is read off the same nested runs.
pub fn calibrate_n(
    levels: &[Level],
    config: &SimConfig,
    n_max: usize,
    threshold: f64,
    seed: u64,
) -> Result<Calibration> {
    check_even(n_max, 4, "n_max")?;
    let per_level = levels
        .iter()
        .enumerate()
        .map(|(j, l)| {
            simulate_record(l, config, n_max, derive_seed(seed, j as u64))
                .map(|w| win_rate_prefixes(&w))
        })
        .collect::<Result<Vec<_>>>()?;
    calibration_curve(&per_level, n_max, threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::level::parse_level;
    use alloc::vec;

    const F: Winners = Winners::FIRST;
    const S: Winners = Winners::SECOND;
    const D: Winners = Winners::DRAW;

    #[test]
    fn b_examples() {
        assert_eq!(compute_b(&[F; 14]).unwrap(), 0.0);
        let mut half = vec![F; 7];
        half.extend([S; 7]);
        assert_eq!(compute_b(&half).unwrap(), 0.5);
        assert_eq!(compute_b(&[D, S]).unwrap(), 2.0 / 3.0);
        assert!(matches!(compute_b(&[]), Err(Error::Input(_))));
    }

    #[test]
    fn reward_examples() {
        let lit = RewardConfig {
            mode: RewardMode::Literal,
            ..RewardConfig::default()
        };
        let dist = RewardConfig::default();
        assert!((compute_reward(0.7, 0.6, &lit) - 0.1).abs() < 1e-12);
        assert!((compute_reward(0.3, 0.4, &dist) - 0.1).abs() < 1e-12);
        assert!((compute_reward(0.6, 0.5, &lit) - 0.6).abs() < 1e-12);
        assert!((compute_reward(0.6, 0.5, &dist) - 0.6).abs() < 1e-12);
        // the literal form punishes an improvement from below
        assert!(compute_reward(0.3, 0.4, &lit) < 0.0);
        for x in [0.0, 0.25, 0.7, 1.0] {
            assert_eq!(compute_reward(x, x, &lit), 0.0);
            assert_eq!(compute_reward(x, x, &dist), 0.0);
        }
    }

    #[test]
    fn tolerance_widens_balanced() {
        let cfg = RewardConfig {
            balance_tolerance: Some(0.05),
            ..RewardConfig::default()
        };
        assert!(cfg.is_balanced(0.54));
        assert!(!RewardConfig::default().is_balanced(0.54));
        assert!(RewardConfig { alpha: -1.0, ..RewardConfig::default() }.validate().is_err());
    }

    #[test]
    fn odd_or_tiny_n_is_rejected() {
        let l = parse_level("2 2\nPG\nGP\n").unwrap();
        let cfg = SimConfig::default();
        assert!(matches!(estimate_balance(&l, &cfg, 3, 0), Err(Error::Input(_))));
        assert!(matches!(estimate_balance(&l, &cfg, 0, 0), Err(Error::Input(_))));
    }

    #[test]
    fn sealed_twin_pockets_are_balanced() {
        // Players share a corridor with no resources; they starve together.
        let l = parse_level("6 2\nPGGGGP\nSSSSSS\n").unwrap();
        let cfg = SimConfig {
            scrub_respawn_prob: 0.0,
            ..SimConfig::default()
        };
        let est = estimate_balance(&l, &cfg, 14, 9).unwrap();
        assert_eq!(est.b, 0.5);
        assert!(est.is_exactly_balanced());
        assert_eq!(est.draws, 14);
        assert_eq!(est, estimate_balance(&l, &cfg, 14, 9).unwrap());
    }

    #[test]
    fn estimates_nest() {
        let l = parse_level("6 6\nPGFGSW\nGGGFGG\nWSGGGF\nGGFGSG\nFGGWGG\nGSGGFP\n").unwrap();
        let cfg = SimConfig::default();
        let long = simulate_record(&l, &cfg, 20, 4).unwrap();
        let short = simulate_record(&l, &cfg, 8, 4).unwrap();
        assert_eq!(&long[..8], &short[..]);
    }

    #[test]
    fn curve_for_one_sided_levels_picks_four() {
        let per_level = vec![vec![1.0; 30], vec![0.0; 30]];
        let cal = calibration_curve(&per_level, 30, 0.05).unwrap();
        assert_eq!(cal.chosen, Some(4));
        assert_eq!(cal.curve.len(), 14);
        assert!(cal.curve.iter().all(|p| p.mu == 0.0 && p.sigma == 0.0));
    }

    #[test]
    fn curve_reports_missing_n() {
        // alternating winner: |w_n - w_{n-2}| stays positive
        let w: Vec<Winners> = (0..8).map(|i| if i % 4 < 2 { F } else { S }).collect();
        let cal = calibration_curve(&[win_rate_prefixes(&w)], 8, 0.0).unwrap();
        assert_eq!(cal.chosen, None);
        assert!(calibration_curve(&[vec![0.0; 8]], 7, 0.05).is_err());
    }

    #[test]
    fn prefixes() {
        assert_eq!(win_rate_prefixes(&[F, S, D, S]), vec![1.0, 0.5, 2.0 / 3.0, 0.5]);
    }
}
