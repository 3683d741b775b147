//! Deterministic two-player forage-survival matches.
//!
//! Both players start on their spawn cells with full health, food and
//! water. Stepping onto forest eats it (the tile turns to scrub, which
//! regrows with a small per-tick probability), standing next to water
//! refills water. An empty food or water indicator costs health each tick,
//! and health regenerates while both indicators are above a threshold.
//! A player wins by collecting `food_goal` forests first or by outliving the
//! opponent; simultaneous finishes are draws.
//!
//! Everything random flows from the match seed through [`SimRng`], so a
//! `(level, config, seed)` triple fully determines the outcome.
//!
//! Trace format (one line per tick, after the tick is applied):
//!
//! ```text
//! tick=<t> p0=<row>,<col> h=<health> f=<food> w=<water> fc=<collected> alive=<0|1> p1=<row>,<col> h=... alive=<0|1>
//! ```

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::level::{path_exists, Direction, Level, Position, TileKind};
use crate::rng::{rng_from_seed, SimRng};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SimConfig {
    pub max_health: u32,
    pub max_food: u32,
    pub max_water: u32,
    /// Health lost per tick while food or water is empty.
    pub starve_damage: u32,
    /// Health restored per tick while both indicators exceed `regen_threshold`.
    pub regen_amount: u32,
    pub regen_threshold: f64,
    /// Per-tick probability that a scrub tile grows back into forest.
    pub scrub_respawn_prob: f64,
    pub food_goal: u32,
    pub max_ticks: u32,
    /// Fraction of the maximum below which the forager seeks that resource.
    pub forage_threshold: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            max_health: 10,
            max_food: 10,
            max_water: 10,
            starve_damage: 1,
            regen_amount: 1,
            regen_threshold: 0.5,
            scrub_respawn_prob: 0.025,
            food_goal: 5,
            max_ticks: 200,
            forage_threshold: 0.5,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let stats = [
            ("max_health", self.max_health),
            ("max_food", self.max_food),
            ("max_water", self.max_water),
            ("food_goal", self.food_goal),
            ("max_ticks", self.max_ticks),
        ];
        for (name, v) in stats {
            if v == 0 {
                return Err(Error::Input(format!("{name} must be positive")));
            }
        }
        let fractions = [
            ("regen_threshold", self.regen_threshold),
            ("scrub_respawn_prob", self.scrub_respawn_prob),
            ("forage_threshold", self.forage_threshold),
        ];
        for (name, v) in fractions {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Input(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        Ok(())
    }

    fn below(&self, value: u32, max: u32) -> bool {
        (value as f64) < self.forage_threshold * max as f64
    }

    fn above_regen(&self, value: u32, max: u32) -> bool {
        (value as f64) > self.regen_threshold * max as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Move {
    North,
    East,
    South,
    West,
    Stay,
}

impl Move {
    pub fn direction(self) -> Option<Direction> {
        match self {
            Move::North => Some(Direction::North),
            Move::East => Some(Direction::East),
            Move::South => Some(Direction::South),
            Move::West => Some(Direction::West),
            Move::Stay => None,
        }
    }

    fn from_direction(d: Direction) -> Move {
        match d {
            Direction::North => Move::North,
            Direction::East => Move::East,
            Direction::South => Move::South,
            Direction::West => Move::West,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PlayerState {
    pub pos: Position,
    pub health: u32,
    pub food: u32,
    pub water: u32,
    pub food_collected: u32,
    pub alive: bool,
}

impl PlayerState {
    fn spawn(pos: Position, config: &SimConfig) -> Self {
        PlayerState {
            pos,
            health: config.max_health,
            food: config.max_food,
            water: config.max_water,
            food_collected: 0,
            alive: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameState {
    pub terrain: Level,
    pub players: [PlayerState; 2],
    pub tick: u32,
    pub rng: SimRng,
}

/// Non-empty subset of `{0, 1}`, stored as a bit mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(into = "Vec<u8>", try_from = "Vec<u8>"))]
pub struct Winners(u8);

impl Winners {
    pub const FIRST: Winners = Winners(0b01);
    pub const SECOND: Winners = Winners(0b10);
    pub const DRAW: Winners = Winners(0b11);
    pub const ALL: [Winners; 3] = [Winners::FIRST, Winners::SECOND, Winners::DRAW];

    pub fn only(player: usize) -> Winners {
        match player {
            0 => Winners::FIRST,
            1 => Winners::SECOND,
            _ => panic!("player index {player} out of range"),
        }
    }

    pub fn from_flags(first: bool, second: bool) -> Option<Winners> {
        match (first, second) {
            (true, true) => Some(Winners::DRAW),
            (true, false) => Some(Winners::FIRST),
            (false, true) => Some(Winners::SECOND),
            (false, false) => None,
        }
    }

    pub fn contains(self, player: usize) -> bool {
        player < 2 && self.0 & (1 << player) != 0
    }

    pub fn count(self) -> u32 {
        self.0.count_ones()
    }

    pub fn is_draw(self) -> bool {
        self == Winners::DRAW
    }

    /// Sum of winning player indices.
    pub fn index_sum(self) -> u32 {
        u32::from(self.contains(1))
    }

    pub fn indices(self) -> impl Iterator<Item = usize> {
        (0..2).filter(move |&i| self.contains(i))
    }

    /// Relabels players 0 <-> 1.
    pub fn swapped(self) -> Winners {
        Winners(((self.0 & 1) << 1) | ((self.0 >> 1) & 1))
    }
}

impl From<Winners> for Vec<u8> {
    fn from(w: Winners) -> Vec<u8> {
        w.indices().map(|i| i as u8).collect()
    }
}

impl TryFrom<Vec<u8>> for Winners {
    type Error = Error;

    fn try_from(v: Vec<u8>) -> Result<Winners> {
        let mut bits = 0u8;
        for i in v {
            if i > 1 {
                return Err(Error::Input(format!("winner index {i} out of range")));
            }
            bits |= 1 << i;
        }
        if bits == 0 {
            return Err(Error::Input("winner set must not be empty".into()));
        }
        Ok(Winners(bits))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum MatchEnd {
    FoodGoal,
    LastStanding,
    AllDead,
    TickCap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MatchOutcome {
    pub winners: Winners,
    pub ticks: u32,
    pub end: MatchEnd,
    pub players: [PlayerState; 2],
}

/// Spawn cells of a level in row-major order.
pub fn spawn_positions(level: &Level) -> Vec<Position> {
    level.positions_of(TileKind::PlayerSpawn)
}

pub fn init_match(level: &Level, config: &SimConfig, seed: u64) -> Result<GameState> {
    config.validate()?;
    let spawns = spawn_positions(level);
    if spawns.len() != 2 {
        return Err(Error::InvalidLevel(format!(
            "expected exactly 2 player spawns, found {}",
            spawns.len()
        )));
    }
    if !path_exists(level, spawns[0], spawns[1])? {
        return Err(Error::InvalidLevel(
            "no passable path between the player spawns".into(),
        ));
    }
    let mut terrain = level.clone();
    for &p in &spawns {
        terrain.set(p, TileKind::Grass);
    }
    Ok(GameState {
        terrain,
        players: [
            PlayerState::spawn(spawns[0], config),
            PlayerState::spawn(spawns[1], config),
        ],
        tick: 0,
        rng: rng_from_seed(seed),
    })
}

/// Scripted player behaviour consulted once per tick.
pub trait PlayerPolicy {
    fn choose(&self, state: &GameState, player: usize, config: &SimConfig) -> Move;
}

/// The scripted forager: refill food, then water, when below threshold;
/// otherwise keep heading for the nearest forest.
#[derive(Debug, Clone, Copy, Default)]
pub struct Forager;

impl PlayerPolicy for Forager {
    fn choose(&self, state: &GameState, player: usize, config: &SimConfig) -> Move {
        forage_policy(state, player, config)
    }
}

fn is_forest(level: &Level, p: Position) -> bool {
    level.get(p) == TileKind::Forest
}

fn next_to_water(level: &Level, p: Position) -> bool {
    level.neighbors(p).any(|n| level.get(n) == TileKind::Water)
}

/// First move along a shortest passable path from `start` to the nearest
/// cell satisfying `is_target`. Ties resolve in N, E, S, W exploration
/// order. `Some(Move::Stay)` when `start` is already a target, `None` when
/// no target is reachable.
pub fn step_toward(
    level: &Level,
    start: Position,
    is_target: impl Fn(&Level, Position) -> bool,
) -> Option<Move> {
    if is_target(level, start) {
        return Some(Move::Stay);
    }
    // first_dir[i]: the first move taken on the BFS path to cell i
    let mut first_dir: Vec<Option<Direction>> = vec![None; level.len()];
    let mut seen = vec![false; level.len()];
    let mut queue = VecDeque::new();
    seen[level.index(start)] = true;
    queue.push_back(start);
    while let Some(p) = queue.pop_front() {
        for d in Direction::ALL {
            let Some(n) = level.step(p, d) else { continue };
            let i = level.index(n);
            if seen[i] || !level.get(n).passable() {
                continue;
            }
            seen[i] = true;
            let dir = if p == start {
                d
            } else {
                first_dir[level.index(p)].expect("interior cells carry a first move")
            };
            first_dir[i] = Some(dir);
            if is_target(level, n) {
                return Some(Move::from_direction(dir));
            }
            queue.push_back(n);
        }
    }
    None
}

pub fn forage_policy(state: &GameState, player: usize, config: &SimConfig) -> Move {
    let me = &state.players[player];
    if !me.alive {
        return Move::Stay;
    }
    let level = &state.terrain;
    if config.below(me.food, config.max_food) {
        if let Some(m) = step_toward(level, me.pos, is_forest) {
            return m;
        }
    }
    if config.below(me.water, config.max_water) {
        if let Some(m) = step_toward(level, me.pos, next_to_water) {
            return m;
        }
    }
    step_toward(level, me.pos, is_forest).unwrap_or(Move::Stay)
}

/// Advances the match by one tick using the forager for both players.
pub fn tick(state: &mut GameState, config: &SimConfig) {
    tick_with(state, config, [&Forager, &Forager]);
}

pub fn tick_with(state: &mut GameState, config: &SimConfig, policies: [&dyn PlayerPolicy; 2]) {
    // Both players decide on the same pre-move state.
    let moves = [
        policies[0].choose(state, 0, config),
        policies[1].choose(state, 1, config),
    ];

    for (p, m) in state.players.iter_mut().zip(moves) {
        if !p.alive {
            continue;
        }
        if let Some(target) = m.direction().and_then(|d| state.terrain.step(p.pos, d)) {
            if state.terrain.get(target).passable() {
                p.pos = target;
            }
        }
    }

    for p in state.players.iter_mut().filter(|p| p.alive) {
        if next_to_water(&state.terrain, p.pos) {
            p.water = config.max_water;
        }
    }

    let on_forest: [bool; 2] = core::array::from_fn(|i| {
        let p = &state.players[i];
        p.alive && is_forest(&state.terrain, p.pos)
    });
    let mut eaters = [on_forest[0], on_forest[1]];
    if on_forest[0] && on_forest[1] && state.players[0].pos == state.players[1].pos {
        let (a, b) = (state.players[0].food_collected, state.players[1].food_collected);
        let first_gets_it = match a.cmp(&b) {
            core::cmp::Ordering::Less => true,
            core::cmp::Ordering::Greater => false,
            core::cmp::Ordering::Equal => state.tick % 2 == 0,
        };
        eaters = [first_gets_it, !first_gets_it];
    }
    for (i, eats) in eaters.into_iter().enumerate() {
        if eats {
            let p = &mut state.players[i];
            p.food = config.max_food;
            p.food_collected += 1;
            state.terrain.set(p.pos, TileKind::Scrub);
        }
    }

    for p in state.players.iter_mut().filter(|p| p.alive) {
        p.food = p.food.saturating_sub(1);
        p.water = p.water.saturating_sub(1);
        if p.food == 0 || p.water == 0 {
            p.health = p.health.saturating_sub(config.starve_damage);
        }
        if config.above_regen(p.food, config.max_food)
            && config.above_regen(p.water, config.max_water)
        {
            p.health = (p.health + config.regen_amount).min(config.max_health);
        }
    }

    if config.scrub_respawn_prob > 0.0 {
        for i in 0..state.terrain.len() {
            if state.terrain.cells()[i] == TileKind::Scrub
                && state.rng.gen_bool(config.scrub_respawn_prob)
            {
                let pos = state.terrain.position(i);
                state.terrain.set(pos, TileKind::Forest);
            }
        }
    }

    for p in state.players.iter_mut() {
        if p.alive && p.health == 0 {
            p.alive = false;
        }
    }
    state.tick += 1;
}

/// Decides the match after a tick, if any win condition holds.
pub fn decide(state: &GameState, config: &SimConfig) -> Option<(Winners, MatchEnd)> {
    let [a, b] = &state.players;
    let goal = |p: &PlayerState| p.alive && p.food_collected >= config.food_goal;
    if let Some(w) = Winners::from_flags(goal(a), goal(b)) {
        return Some((w, MatchEnd::FoodGoal));
    }
    match (a.alive, b.alive) {
        (false, false) => return Some((Winners::DRAW, MatchEnd::AllDead)),
        (true, false) => return Some((Winners::FIRST, MatchEnd::LastStanding)),
        (false, true) => return Some((Winners::SECOND, MatchEnd::LastStanding)),
        (true, true) => {}
    }
    if state.tick >= config.max_ticks {
        return Some((Winners::DRAW, MatchEnd::TickCap));
    }
    None
}

pub fn run_match(level: &Level, config: &SimConfig, seed: u64) -> Result<MatchOutcome> {
    run_match_with(level, config, seed, [&Forager, &Forager], |_| {})
}

/// Runs a match with arbitrary player policies, calling `observe` after every tick.
pub fn run_match_with(
    level: &Level,
    config: &SimConfig,
    seed: u64,
    policies: [&dyn PlayerPolicy; 2],
    mut observe: impl FnMut(&GameState),
) -> Result<MatchOutcome> {
    let mut state = init_match(level, config, seed)?;
    loop {
        tick_with(&mut state, config, policies);
        observe(&state);
        if let Some((winners, end)) = decide(&state, config) {
            return Ok(MatchOutcome {
                winners,
                ticks: state.tick,
                end,
                players: state.players,
            });
        }
    }
}

pub fn trace_line(state: &GameState) -> String {
    let mut line = format!("tick={}", state.tick);
    for (i, p) in state.players.iter().enumerate() {
        line.push_str(&format!(
            " p{i}={},{} h={} f={} w={} fc={} alive={}",
            p.pos.row,
            p.pos.col,
            p.health,
            p.food,
            p.water,
            p.food_collected,
            u8::from(p.alive)
        ));
    }
    line
}
