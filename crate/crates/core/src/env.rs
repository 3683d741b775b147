//! Swap-based balancing environments.
//!
//! The agent edits a playable level only by exchanging two tiles. Three
//! representations differ in how the two positions are chosen:
//!
//! | representation | action components     | positions                          |
//! |----------------|-----------------------|------------------------------------|
//! | swap-narrow    | `[2]`                 | two random cells, redrawn each step |
//! | swap-turtle    | `[4, 4, 2]`           | two cursors moved N/E/S/W by the agent |
//! | swap-wide      | `[w, h, w, h, 2]`     | chosen directly (`x1, y1, x2, y2`)  |
//!
//! The last component is always the swap flag (`1` = swap). A swap is
//! executed only when the two kinds differ and the swapped level is still
//! playable; everything else is a no-op step rewarded with exactly 0 that
//! does not touch the simulator. After an executed swap the level is
//! re-simulated and rewarded by [`compute_reward`].
//!
//! Observation layout (bit-exact): `7 * h * w` values, plane-major then
//! row-major, index `plane * h * w + row * w + col`. Planes 0..5 are one-hot
//! grass, forest, stone, water, player spawn (scrub shares the forest plane);
//! planes 5 and 6 mark the first and second cursor and are all zero for
//! swap-wide.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use crate::balance::{compute_reward, estimate_balance, BalanceEstimate, RewardConfig};
use crate::error::{Error, Result};
use crate::generate::validate;
use crate::level::{Direction, Level, Position, TileKind};
use crate::ppo::{Environment, Step};
use crate::rng::{derive_seed, rng_from_seed, SimRng};
use crate::sim::SimConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Representation {
    #[cfg_attr(feature = "serde", serde(rename = "swap-narrow"))]
    SwapNarrow,
    #[cfg_attr(feature = "serde", serde(rename = "swap-turtle"))]
    SwapTurtle,
    #[cfg_attr(feature = "serde", serde(rename = "swap-wide"))]
    SwapWide,
}

impl Representation {
    pub const ALL: [Representation; 3] = [
        Representation::SwapNarrow,
        Representation::SwapTurtle,
        Representation::SwapWide,
    ];

    pub const fn name(self) -> &'static str {
        match self {
            Representation::SwapNarrow => "swap-narrow",
            Representation::SwapTurtle => "swap-turtle",
            Representation::SwapWide => "swap-wide",
        }
    }

    pub fn action_components(self, width: usize, height: usize) -> Vec<usize> {
        match self {
            Representation::SwapNarrow => vec![2],
            Representation::SwapTurtle => vec![4, 4, 2],
            Representation::SwapWide => vec![width, height, width, height, 2],
        }
    }

    pub fn observation_len(self, width: usize, height: usize) -> usize {
        OBS_PLANES * width * height
    }

    pub fn uses_cursors(self) -> bool {
        !matches!(self, Representation::SwapWide)
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Representation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Representation::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| {
                Error::Input(format!(
                    "unknown representation {s:?}; expected one of swap-narrow, swap-turtle, swap-wide"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSpace {
    pub components: Vec<usize>,
    pub total: usize,
}

pub fn action_space(repr: Representation, width: usize, height: usize) -> ActionSpace {
    let components = repr.action_components(width, height);
    let total = components.iter().product();
    ActionSpace { components, total }
}

pub const TILE_PLANES: [TileKind; 5] = TileKind::PLACEABLE;
pub const OBS_PLANES: usize = TILE_PLANES.len() + 2;

fn plane_of(kind: TileKind) -> usize {
    match kind {
        TileKind::Grass => 0,
        TileKind::Forest | TileKind::Scrub => 1,
        TileKind::Stone => 2,
        TileKind::Water => 3,
        TileKind::PlayerSpawn => 4,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub width: usize,
    pub height: usize,
    data: Vec<f64>,
}

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn plane(&self, p: usize) -> &[f64] {
        let n = self.width * self.height;
        &self.data[p * n..(p + 1) * n]
    }
}

pub fn encode_obs(level: &Level, cursors: Option<[Position; 2]>, _repr: Representation) -> Observation {
    let (w, h) = (level.width(), level.height());
    let n = w * h;
    let mut data = vec![0.0; OBS_PLANES * n];
    for (i, kind) in level.cells().iter().enumerate() {
        data[plane_of(*kind) * n + i] = 1.0;
    }
    if let Some(cs) = cursors {
        for (k, c) in cs.iter().enumerate() {
            data[(TILE_PLANES.len() + k) * n + level.index(*c)] = 1.0;
        }
    }
    Observation {
        width: w,
        height: h,
        data,
    }
}

/// Recovers the level from the tile planes of an observation.
pub fn decode_tiles(obs: &[f64], width: usize, height: usize) -> Result<Level> {
    let n = width * height;
    if obs.len() < TILE_PLANES.len() * n {
        return Err(Error::Shape {
            expected: OBS_PLANES * n,
            actual: obs.len(),
        });
    }
    let cells = (0..n)
        .map(|i| {
            let hot: Vec<usize> = (0..TILE_PLANES.len()).filter(|p| obs[p * n + i] == 1.0).collect();
            match hot[..] {
                [p] => Ok(TILE_PLANES[p]),
                _ => Err(Error::Input(format!("cell {i} is not one-hot"))),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Level::new(width, height, cells)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct EnvConfig {
    pub representation: Representation,
    pub max_steps: usize,
    pub max_changes: usize,
    pub n_sims: usize,
    pub reward: RewardConfig,
    pub sim: SimConfig,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            representation: Representation::SwapNarrow,
            max_steps: 60,
            max_changes: 8,
            // what calibration picks for the default simulator and generator
            n_sims: 18,
            reward: RewardConfig::default(),
            sim: SimConfig::default(),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_steps == 0 {
            return Err(Error::Input("max_steps must be positive".into()));
        }
        if self.max_changes == 0 || self.max_changes > self.max_steps {
            return Err(Error::Input(format!(
                "max_changes must be in 1..={}, got {}",
                self.max_steps, self.max_changes
            )));
        }
        if self.n_sims < 2 || self.n_sims % 2 != 0 {
            return Err(Error::Input(format!("n_sims must be even and >= 2, got {}", self.n_sims)));
        }
        self.reward.validate()?;
        self.sim.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Termination {
    Balanced,
    StepCap,
    ChangeCap,
}

impl Termination {
    pub const ALL: [Termination; 3] = [Termination::Balanced, Termination::StepCap, Termination::ChangeCap];

    pub const fn name(self) -> &'static str {
        match self {
            Termination::Balanced => "balanced",
            Termination::StepCap => "step_cap",
            Termination::ChangeCap => "change_cap",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwapAction {
    Narrow { swap: bool },
    Turtle { moves: [Direction; 2], swap: bool },
    Wide { a: Position, b: Position, swap: bool },
}

/// Why a step did not execute a swap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Skip {
    NoSwap,
    SameKind,
    Unplayable,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExecutedSwap {
    pub step: usize,
    pub a: Position,
    pub b: Position,
    /// Kinds at `a` and `b` before the swap.
    pub kinds: [TileKind; 2],
    pub b_before: f64,
    pub b_after: f64,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpisodeRecord {
    pub representation: Representation,
    pub initial_level: Level,
    pub final_level: Level,
    pub initial_b: f64,
    pub final_b: f64,
    /// Raw action components, one entry per step.
    pub actions: Vec<Vec<usize>>,
    pub swaps: Vec<ExecutedSwap>,
    pub steps: usize,
    pub changes: usize,
    pub termination: Option<Termination>,
    pub total_reward: f64,
}

impl EpisodeRecord {
    pub fn swapped_positions(&self) -> Vec<Position> {
        let mut out = Vec::new();
        for s in &self.swaps {
            for p in [s.a, s.b] {
                if !out.contains(&p) {
                    out.push(p);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub executed: bool,
    pub skipped: Option<Skip>,
    pub termination: Option<Termination>,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// One balancing episode over one level.
#[derive(Debug, Clone)]
pub struct SwapEnv {
    cfg: EnvConfig,
    level: Level,
    cursors: [Position; 2],
    estimate: Option<BalanceEstimate>,
    sim_seed_base: u64,
    rng: SimRng,
    steps: usize,
    changes: usize,
    done: bool,
    sim_calls: usize,
    record: Option<EpisodeRecord>,
}

impl SwapEnv {
    pub fn new(cfg: EnvConfig) -> Result<SwapEnv> {
        cfg.validate()?;
        Ok(SwapEnv {
            cfg,
            level: Level::filled(2, 2, TileKind::Grass)?,
            cursors: [Position::default(); 2],
            estimate: None,
            sim_seed_base: 0,
            rng: rng_from_seed(0),
            steps: 0,
            changes: 0,
            done: true,
            sim_calls: 0,
            record: None,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn level(&self) -> &Level {
        &self.level
    }

    pub fn cursors(&self) -> [Position; 2] {
        self.cursors
    }

    pub fn b(&self) -> f64 {
        self.estimate.as_ref().map_or(f64::NAN, |e| e.b)
    }

    pub fn estimate(&self) -> Option<&BalanceEstimate> {
        self.estimate.as_ref()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn changes(&self) -> usize {
        self.changes
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Calls to the balance estimator since construction.
    pub fn sim_calls(&self) -> usize {
        self.sim_calls
    }

    pub fn record(&self) -> Option<&EpisodeRecord> {
        self.record.as_ref()
    }

    pub fn take_record(&mut self) -> Option<EpisodeRecord> {
        self.record.take()
    }

    pub fn action_components(&self) -> Vec<usize> {
        self.cfg
            .representation
            .action_components(self.level.width(), self.level.height())
    }

    pub fn observation(&self) -> Observation {
        let repr = self.cfg.representation;
        let cursors = repr.uses_cursors().then_some(self.cursors);
        encode_obs(&self.level, cursors, repr)
    }

    fn random_position(&mut self) -> Position {
        Position::new(
            self.rng.gen_range(0..self.level.height()),
            self.rng.gen_range(0..self.level.width()),
        )
    }

    fn distinct_pair(&mut self) -> [Position; 2] {
        let a = self.random_position();
        loop {
            let b = self.random_position();
            if b != a {
                return [a, b];
            }
        }
    }

    fn estimate_now(&mut self) -> Result<BalanceEstimate> {
        self.sim_calls += 1;
        estimate_balance(&self.level, &self.cfg.sim, self.cfg.n_sims, self.sim_seed_base)
    }

    /// Starts an episode on `level`.
    ///
    /// Simulations use `seed` as their seed base for the whole episode, so
    /// the initial state equals `estimate_balance(level, sim, n_sims, seed)`.
    /// Cursor positions come from a stream derived from `seed`.
    pub fn reset(&mut self, level: &Level, seed: u64) -> Result<Observation> {
        let report = validate(level);
        if let Some(why) = report.failure() {
            return Err(Error::InvalidLevel(why.into()));
        }
        if level.cells().contains(&TileKind::Scrub) {
            return Err(Error::InvalidLevel(
                "scrub tiles only occur during play".into(),
            ));
        }
        self.level = level.clone();
        self.sim_seed_base = seed;
        self.rng = rng_from_seed(derive_seed(seed, u64::MAX));
        self.cursors = match self.cfg.representation {
            Representation::SwapNarrow => self.distinct_pair(),
            Representation::SwapTurtle => [self.random_position(), self.random_position()],
            Representation::SwapWide => [Position::default(); 2],
        };
        self.steps = 0;
        self.changes = 0;
        let est = self.estimate_now()?;
        let balanced = self.cfg.reward.is_balanced(est.b);
        self.done = balanced;
        self.record = Some(EpisodeRecord {
            representation: self.cfg.representation,
            initial_level: level.clone(),
            final_level: level.clone(),
            initial_b: est.b,
            final_b: est.b,
            actions: Vec::new(),
            swaps: Vec::new(),
            steps: 0,
            changes: 0,
            termination: balanced.then_some(Termination::Balanced),
            total_reward: 0.0,
        });
        self.estimate = Some(est);
        Ok(self.observation())
    }

    pub fn decode(&self, action: &[usize]) -> Result<SwapAction> {
        let comps = self.action_components();
        if action.len() != comps.len() {
            return Err(Error::Action(format!(
                "{} expects {} components, got {}",
                self.cfg.representation,
                comps.len(),
                action.len()
            )));
        }
        for (i, (&a, &n)) in action.iter().zip(&comps).enumerate() {
            if a >= n {
                return Err(Error::Action(format!("component {i} = {a} is out of range 0..{n}")));
            }
        }
        let swap = action[action.len() - 1] == 1;
        Ok(match self.cfg.representation {
            Representation::SwapNarrow => SwapAction::Narrow { swap },
            Representation::SwapTurtle => SwapAction::Turtle {
                moves: [
                    Direction::from_index(action[0]).expect("range checked"),
                    Direction::from_index(action[1]).expect("range checked"),
                ],
                swap,
            },
            Representation::SwapWide => SwapAction::Wide {
                a: Position::new(action[1], action[0]),
                b: Position::new(action[3], action[2]),
                swap,
            },
        })
    }

    fn try_swap(&mut self, a: Position, b: Position) -> Result<core::result::Result<ExecutedSwap, Skip>> {
        let kinds = [self.level.get(a), self.level.get(b)];
        if kinds[0] == kinds[1] {
            return Ok(Err(Skip::SameKind));
        }
        self.level.swap(a, b)?;
        if !validate(&self.level).valid {
            self.level.swap(a, b)?;
            return Ok(Err(Skip::Unplayable));
        }
        let b_before = self.b();
        let est = self.estimate_now()?;
        let reward = compute_reward(b_before, est.b, &self.cfg.reward);
        let swap = ExecutedSwap {
            step: self.steps,
            a,
            b,
            kinds,
            b_before,
            b_after: est.b,
            reward,
        };
        self.estimate = Some(est);
        self.changes += 1;
        Ok(Ok(swap))
    }

    pub fn step(&mut self, action: &[usize]) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::EpisodeDone);
        }
        let decoded = self.decode(action)?;
        let (target, swap) = match decoded {
            SwapAction::Narrow { swap } => (self.cursors, swap),
            SwapAction::Turtle { swap, .. } => (self.cursors, swap),
            SwapAction::Wide { a, b, swap } => ([a, b], swap),
        };
        let result = if swap {
            self.try_swap(target[0], target[1])?
        } else {
            Err(Skip::NoSwap)
        };

        match decoded {
            SwapAction::Narrow { .. } => self.cursors = self.distinct_pair(),
            SwapAction::Turtle { moves, swap: false } => {
                for (c, d) in self.cursors.iter_mut().zip(moves) {
                    if let Some(p) = self.level.step(*c, d) {
                        *c = p;
                    }
                }
            }
            _ => {}
        }
        self.steps += 1;

        let termination = if self.cfg.reward.is_balanced(self.b()) {
            Some(Termination::Balanced)
        } else if self.changes >= self.cfg.max_changes {
            Some(Termination::ChangeCap)
        } else if self.steps >= self.cfg.max_steps {
            Some(Termination::StepCap)
        } else {
            None
        };
        self.done = termination.is_some();

        let (reward, executed, skipped) = match &result {
            Ok(s) => (s.reward, true, None),
            Err(skip) => (0.0, false, Some(*skip)),
        };
        let b = self.b();
        if let Some(rec) = self.record.as_mut() {
            rec.actions.push(action.to_vec());
            if let Ok(s) = result {
                rec.swaps.push(s);
            }
            rec.final_level = self.level.clone();
            rec.final_b = b;
            rec.steps = self.steps;
            rec.changes = self.changes;
            rec.termination = termination;
            rec.total_reward += reward;
        }
        Ok(StepOutcome {
            observation: self.observation(),
            reward,
            done: self.done,
            info: StepInfo {
                executed,
                skipped,
                termination,
                b,
            },
        })
    }
}

/// Training wrapper: every reset draws a level from a pool and skips
/// levels that are already balanced.
#[derive(Debug, Clone)]
pub struct LevelPoolEnv {
    env: SwapEnv,
    levels: Vec<Level>,
    max_redraws: usize,
}

impl LevelPoolEnv {
    pub fn new(cfg: EnvConfig, levels: Vec<Level>) -> Result<LevelPoolEnv> {
        if levels.is_empty() {
            return Err(Error::Input("level pool is empty".into()));
        }
        let (w, h) = (levels[0].width(), levels[0].height());
        if levels.iter().any(|l| l.width() != w || l.height() != h) {
            return Err(Error::Input("all pool levels must share one size".into()));
        }
        Ok(LevelPoolEnv {
            env: SwapEnv::new(cfg)?,
            levels,
            max_redraws: 64,
        })
    }

    pub fn inner(&self) -> &SwapEnv {
        &self.env
    }
}

impl Environment for LevelPoolEnv {
    fn observation_len(&self) -> usize {
        let l = &self.levels[0];
        self.env.cfg.representation.observation_len(l.width(), l.height())
    }

    fn action_components(&self) -> Vec<usize> {
        let l = &self.levels[0];
        self.env.cfg.representation.action_components(l.width(), l.height())
    }

    fn reset(&mut self, seed: u64) -> Result<Vec<f64>> {
        let mut rng = rng_from_seed(seed);
        for attempt in 0..self.max_redraws {
            let i = rng.gen_range(0..self.levels.len());
            let level = self.levels[i].clone();
            let obs = self.env.reset(&level, derive_seed(seed, attempt as u64))?;
            if !self.env.is_done() {
                return Ok(obs.into_vec());
            }
        }
        Err(Error::Input(format!(
            "no unbalanced level found in {} draws",
            self.max_redraws
        )))
    }

    fn step(&mut self, action: &[usize]) -> Result<Step> {
        let out = self.env.step(action)?;
        Ok(Step {
            observation: out.observation.into_vec(),
            reward: out.reward,
            done: out.done,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::level::parse_level;

    fn lvl(s: &str) -> Level {
        parse_level(s).unwrap()
    }

    #[test]
    fn action_space_sizes() {
        assert_eq!(action_space(Representation::SwapNarrow, 6, 6).total, 2);
        assert_eq!(action_space(Representation::SwapTurtle, 6, 6).total, 32);
        assert_eq!(action_space(Representation::SwapWide, 6, 6).total, 2592);
        assert_eq!(
            action_space(Representation::SwapWide, 4, 3).components,
            vec![4, 3, 4, 3, 2]
        );
    }

    #[test]
    fn representation_names_round_trip() {
        for r in Representation::ALL {
            assert_eq!(r.name().parse::<Representation>().unwrap(), r);
        }
        let err = "narrow".parse::<Representation>().unwrap_err();
        assert!(format!("{err}").contains("swap-turtle"));
    }

    #[test]
    fn encode_all_grass_and_cursor() {
        let l = Level::filled(6, 6, TileKind::Grass).unwrap();
        let obs = encode_obs(&l, Some([Position::new(2, 3), Position::new(0, 0)]), Representation::SwapNarrow);
        assert!(obs.plane(0).iter().all(|&v| v == 1.0));
        for p in 1..5 {
            assert!(obs.plane(p).iter().all(|&v| v == 0.0));
        }
        let c = obs.plane(5);
        assert_eq!(c.iter().sum::<f64>(), 1.0);
        assert_eq!(c[2 * 6 + 3], 1.0);
        let wide = encode_obs(&l, None, Representation::SwapWide);
        assert!(wide.plane(5).iter().chain(wide.plane(6)).all(|&v| v == 0.0));
    }

    #[test]
    fn decode_inverts_encode() {
        let l = lvl("3 2\nPFS\nWGP\n");
        let obs = encode_obs(&l, None, Representation::SwapWide);
        assert_eq!(decode_tiles(obs.as_slice(), 3, 2).unwrap(), l);
    }

    fn cfg(repr: Representation) -> EnvConfig {
        EnvConfig {
            representation: repr,
            ..EnvConfig::default()
        }
    }

    const LEVEL: &str = "6 6\nPGFGSW\nGGGFGG\nWSGGGF\nGGFGSG\nFGGWGG\nGSGGFP\n";

    #[test]
    fn reset_is_seeded() {
        let l = lvl(LEVEL);
        let mut a = SwapEnv::new(cfg(Representation::SwapNarrow)).unwrap();
        let mut b = SwapEnv::new(cfg(Representation::SwapNarrow)).unwrap();
        assert_eq!(a.reset(&l, 5).unwrap(), b.reset(&l, 5).unwrap());
        assert_eq!(a.cursors(), b.cursors());
        assert_ne!(a.cursors()[0], a.cursors()[1]);
        assert_eq!(a.sim_calls(), 1);
        let direct = estimate_balance(&l, &SimConfig::default(), a.config().n_sims, 5).unwrap();
        assert_eq!(a.b(), direct.b);
    }

    #[test]
    fn reset_rejects_unplayable_levels() {
        let mut env = SwapEnv::new(cfg(Representation::SwapWide)).unwrap();
        assert!(matches!(env.reset(&lvl("PSG\nSSG\nGGP\n"), 0), Err(Error::InvalidLevel(_))));
        assert!(matches!(env.reset(&lvl("PCG\nGGG\nGGP\n"), 0), Err(Error::InvalidLevel(_))));
    }

    #[test]
    fn balanced_level_ends_immediately() {
        let l = lvl("6 2\nPGGGGP\nSSSSSS\n");
        let mut c = cfg(Representation::SwapWide);
        c.sim.scrub_respawn_prob = 0.0;
        let mut env = SwapEnv::new(c).unwrap();
        env.reset(&l, 0).unwrap();
        assert!(env.is_done());
        assert_eq!(env.record().unwrap().termination, Some(Termination::Balanced));
        assert!(matches!(env.step(&[0, 0, 1, 0, 1]), Err(Error::EpisodeDone)));
    }

    #[test]
    fn wide_same_kind_and_unplayable_swaps_are_free_noops() {
        // Player 0 (top-left) reaches player 1 only through (0,1).
        let l = lvl("4 3\nPGSS\nSGSS\nSGGP\n");
        let mut env = SwapEnv::new(cfg(Representation::SwapWide)).unwrap();
        env.reset(&l, 1).unwrap();
        if env.is_done() {
            return;
        }
        // stone <-> stone
        let out = env.step(&[2, 0, 3, 0, 1]).unwrap();
        assert_eq!(out.reward, 0.0);
        assert_eq!(out.info.skipped, Some(Skip::SameKind));
        // grass (0,1) <-> stone (0,2) would wall player 0 in
        let out = env.step(&[1, 0, 2, 0, 1]).unwrap();
        assert_eq!(out.info.skipped, Some(Skip::Unplayable));
        assert_eq!(out.reward, 0.0);
        assert_eq!(env.level(), &l);
        assert_eq!(env.sim_calls(), 1);
        assert_eq!(env.changes(), 0);
        assert_eq!(env.steps(), 2);
    }

    #[test]
    fn turtle_moves_clamp_and_swap_keeps_cursors() {
        let l = lvl(LEVEL);
        let mut env = SwapEnv::new(cfg(Representation::SwapTurtle)).unwrap();
        env.reset(&l, 2).unwrap();
        for _ in 0..8 {
            if env.is_done() {
                return;
            }
            // north twice per step pins both cursors to row 0
            env.step(&[0, 0, 0]).unwrap();
        }
        assert!(env.cursors().iter().all(|c| c.row == 0));
        let before = env.cursors();
        if !env.is_done() {
            env.step(&[2, 2, 1]).unwrap();
            assert_eq!(env.cursors(), before);
        }
    }

    #[test]
    fn executed_swaps_preserve_tiles_and_playability() {
        let l = lvl(LEVEL);
        let mut env = SwapEnv::new(cfg(Representation::SwapNarrow)).unwrap();
        env.reset(&l, 3).unwrap();
        let counts = l.count_tiles();
        let mut executed = 0;
        while !env.is_done() {
            let out = env.step(&[1]).unwrap();
            executed += usize::from(out.info.executed);
            assert_eq!(env.level().count_tiles(), counts);
            assert!(validate(env.level()).valid);
            if !out.info.executed {
                assert_eq!(out.reward, 0.0);
            }
        }
        assert_eq!(env.sim_calls(), executed + 1);
        let rec = env.record().unwrap();
        assert_eq!(rec.swaps.len(), executed);
        assert!(rec.steps <= 60 && rec.changes <= 8);
        assert!(rec.termination.is_some());
    }

    #[test]
    fn out_of_range_actions_are_errors() {
        let l = lvl(LEVEL);
        let mut env = SwapEnv::new(cfg(Representation::SwapWide)).unwrap();
        env.reset(&l, 4).unwrap();
        if env.is_done() {
            return;
        }
        assert!(matches!(env.step(&[6, 0, 0, 0, 1]), Err(Error::Action(_))));
        assert!(matches!(env.step(&[0, 0, 0, 0, 2]), Err(Error::Action(_))));
        assert!(matches!(env.step(&[1]), Err(Error::Action(_))));
    }

    #[test]
    fn config_validation() {
        let mut c = EnvConfig::default();
        c.n_sims = 13;
        assert!(c.validate().is_err());
        let mut c = EnvConfig::default();
        c.max_changes = 61;
        assert!(c.validate().is_err());
    }
}
