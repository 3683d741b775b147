//! Run configuration: one TOML file, `--set key=value` overrides and
//! command flags, merged in that order on the raw table before it is
//! deserialized. Unknown keys are rejected at every level.

use std::path::Path;

use serde::{Deserialize, Serialize};
use swapbal_core::env::EnvConfig;
use swapbal_core::generate::GenConfig;
use swapbal_core::ppo::TrainConfig;
use toml::{Table, Value};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Root of every seed stream: dataset levels, simulations, training.
    pub seed: u64,
    pub dataset: DatasetConfig,
    pub generator: GenConfig,
    pub env: EnvConfig,
    pub calibrate: CalibrateConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            dataset: DatasetConfig::default(),
            generator: GenConfig::default(),
            env: EnvConfig::default(),
            calibrate: CalibrateConfig::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub count: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig { count: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrateConfig {
    /// How many dataset levels enter the calibration.
    pub levels: usize,
    pub n_max: usize,
    pub threshold: f64,
}

impl Default for CalibrateConfig {
    fn default() -> Self {
        CalibrateConfig {
            levels: 100,
            n_max: 30,
            threshold: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Sample actions from the policy instead of taking the argmax.
    pub sample: bool,
}

impl RunConfig {
    pub fn validate(&self) -> CliResult<()> {
        if self.dataset.count == 0 {
            return Err(CliError::config("dataset.count must be at least 1"));
        }
        if self.calibrate.levels == 0 {
            return Err(CliError::config("calibrate.levels must be at least 1"));
        }
        if self.calibrate.n_max < 4 || self.calibrate.n_max % 2 != 0 {
            return Err(CliError::config(format!(
                "calibrate.n_max must be even and >= 4, got {}",
                self.calibrate.n_max
            )));
        }
        if !(self.calibrate.threshold > 0.0) {
            return Err(CliError::config(format!(
                "calibrate.threshold must be positive, got {}",
                self.calibrate.threshold
            )));
        }
        if i64::try_from(self.seed).is_err() {
            return Err(CliError::config("seed must fit in a signed 64-bit integer"));
        }
        self.generator.validate()?;
        self.env.validate()?;
        self.train.validate()?;
        Ok(())
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string_pretty(self).map_err(|e| CliError::Runtime(e.into()))
    }
}

/// Accumulates the raw table that becomes a [`RunConfig`].
#[derive(Debug, Clone, Default)]
pub struct ConfigBuilder {
    table: Table,
}

impl ConfigBuilder {
    pub fn from_file(path: &Path) -> CliResult<ConfigBuilder> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        let table: Table = text
            .parse()
            .map_err(|e| CliError::config(format!("config {}: {e}", path.display())))?;
        Ok(ConfigBuilder { table })
    }

    /// Applies a `dotted.key=value` override; the value is read as TOML and
    /// falls back to a plain string.
    pub fn set_str(&mut self, assignment: &str) -> CliResult<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("override `{assignment}` is not of the form key=value")))?;
        let value = parse_value(raw.trim());
        self.set(key.trim(), value)
    }

    pub fn set(&mut self, key: &str, value: impl Into<Value>) -> CliResult<()> {
        let parts: Vec<&str> = key.split('.').collect();
        if parts.iter().any(|p| p.is_empty()) {
            return Err(CliError::config(format!("invalid config key `{key}`")));
        }
        let mut table = &mut self.table;
        for part in &parts[..parts.len() - 1] {
            let entry = table
                .entry(part.to_string())
                .or_insert_with(|| Value::Table(Table::new()));
            table = entry
                .as_table_mut()
                .ok_or_else(|| CliError::config(format!("config key `{part}` in `{key}` is not a table")))?;
        }
        table.insert(parts[parts.len() - 1].to_string(), value.into());
        Ok(())
    }

    pub fn build(self) -> CliResult<RunConfig> {
        let cfg: RunConfig = Value::Table(self.table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::config(format!("config: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_value(raw: &str) -> Value {
    let doc = format!("v = {raw}");
    match doc.parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.to_string())),
        Err(_) => Value::String(raw.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        assert_eq!(ConfigBuilder::default().build().unwrap(), RunConfig::default());
    }

    #[test]
    fn overrides_and_unknown_keys() {
        let mut b = ConfigBuilder::default();
        b.set_str("env.max_steps=40").unwrap();
        b.set_str("env.representation=swap-wide").unwrap();
        b.set_str("env.sim.food_goal = 4").unwrap();
        let cfg = b.build().unwrap();
        assert_eq!(cfg.env.max_steps, 40);
        assert_eq!(cfg.env.sim.food_goal, 4);

        let mut b = ConfigBuilder::default();
        b.set_str("env.bogus=1").unwrap();
        let err = b.build().unwrap_err().to_string();
        assert!(err.contains("bogus"), "{err}");

        let mut b = ConfigBuilder::default();
        b.set_str("env.representation=diagonal").unwrap();
        let err = b.build().unwrap_err().to_string();
        assert!(err.contains("swap-narrow") && err.contains("swap-wide"), "{err}");
    }

    #[test]
    fn echo_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.seed = 42;
        cfg.env.reward.balance_tolerance = Some(0.05);
        let text = cfg.to_toml().unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let text = RunConfig::default().to_toml().unwrap();
        assert_eq!(toml::from_str::<RunConfig>(&text).unwrap(), RunConfig::default());
    }

    #[test]
    fn validation_errors() {
        for set in ["dataset.count=0", "calibrate.n_max=7", "env.n_sims=3", "train.minibatch_size=100"] {
            let mut b = ConfigBuilder::default();
            b.set_str(set).unwrap();
            assert!(matches!(b.build(), Err(CliError::Config(_))), "{set}");
        }
    }
}
