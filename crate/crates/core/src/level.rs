//! Tile vocabulary and the level grid.
//!
//! Text format (bit-exact):
//!
//! ```text
//! <width> <height>
//! <row 0: width tile codes>
//! ...
//! <row height-1>
//! ```
//!
//! Codes: `G` grass, `F` forest, `C` scrub, `S` stone, `W` water,
//! `P` player spawn. [`serialize_level`] writes the header and one row per
//! line, each line terminated by `\n`. [`parse_level`] also accepts a body
//! without the header line, ignores spaces and tabs inside rows, and
//! tolerates a trailing newline or `\r\n` line endings.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(into = "u8", try_from = "u8"))]
pub enum TileKind {
    Grass = 0,
    Forest = 1,
    Scrub = 2,
    Stone = 3,
    Water = 4,
    PlayerSpawn = 5,
}

impl TileKind {
    pub const ALL: [TileKind; 6] = [
        TileKind::Grass,
        TileKind::Forest,
        TileKind::Scrub,
        TileKind::Stone,
        TileKind::Water,
        TileKind::PlayerSpawn,
    ];

    /// Kinds a level author (or generator) places. Scrub only appears during play.
    pub const PLACEABLE: [TileKind; 5] = [
        TileKind::Grass,
        TileKind::Forest,
        TileKind::Stone,
        TileKind::Water,
        TileKind::PlayerSpawn,
    ];

    pub const fn id(self) -> u8 {
        self as u8
    }

    pub const fn from_id(id: u8) -> Option<TileKind> {
        match id {
            0 => Some(TileKind::Grass),
            1 => Some(TileKind::Forest),
            2 => Some(TileKind::Scrub),
            3 => Some(TileKind::Stone),
            4 => Some(TileKind::Water),
            5 => Some(TileKind::PlayerSpawn),
            _ => None,
        }
    }

    pub const fn code(self) -> char {
        match self {
            TileKind::Grass => 'G',
            TileKind::Forest => 'F',
            TileKind::Scrub => 'C',
            TileKind::Stone => 'S',
            TileKind::Water => 'W',
            TileKind::PlayerSpawn => 'P',
        }
    }

    pub const fn from_code(c: char) -> Option<TileKind> {
        match c {
            'G' => Some(TileKind::Grass),
            'F' => Some(TileKind::Forest),
            'C' => Some(TileKind::Scrub),
            'S' => Some(TileKind::Stone),
            'W' => Some(TileKind::Water),
            'P' => Some(TileKind::PlayerSpawn),
            _ => None,
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            TileKind::Grass => "grass",
            TileKind::Forest => "forest",
            TileKind::Scrub => "scrub",
            TileKind::Stone => "stone",
            TileKind::Water => "water",
            TileKind::PlayerSpawn => "player",
        }
    }

    pub const fn passable(self) -> bool {
        passable(self)
    }
}

impl From<TileKind> for u8 {
    fn from(kind: TileKind) -> u8 {
        kind.id()
    }
}

impl TryFrom<u8> for TileKind {
    type Error = Error;

    fn try_from(id: u8) -> Result<TileKind> {
        TileKind::from_id(id).ok_or_else(|| Error::Input(format!("unknown tile id {id}")))
    }
}

impl fmt::Display for TileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Players walk on everything except stone and water.
pub const fn passable(kind: TileKind) -> bool {
    !matches!(kind, TileKind::Stone | TileKind::Water)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Position {
    pub row: usize,
    pub col: usize,
}

impl Position {
    pub const fn new(row: usize, col: usize) -> Self {
        Position { row, col }
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.row, self.col)
    }
}

/// Cardinal directions in the fixed order used for tie-breaking everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Direction {
    North,
    East,
    South,
    West,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::North,
        Direction::East,
        Direction::South,
        Direction::West,
    ];

    pub const fn from_index(i: usize) -> Option<Direction> {
        match i {
            0 => Some(Direction::North),
            1 => Some(Direction::East),
            2 => Some(Direction::South),
            3 => Some(Direction::West),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "LevelRepr"))]
pub struct Level {
    width: usize,
    height: usize,
    cells: Vec<TileKind>,
}

#[cfg(feature = "serde")]
#[derive(serde::Deserialize)]
struct LevelRepr {
    width: usize,
    height: usize,
    cells: Vec<TileKind>,
}

#[cfg(feature = "serde")]
impl TryFrom<LevelRepr> for Level {
    type Error = Error;

    fn try_from(r: LevelRepr) -> Result<Level> {
        Level::new(r.width, r.height, r.cells)
    }
}

pub const MIN_SIDE: usize = 2;

impl Level {
    pub fn new(width: usize, height: usize, cells: Vec<TileKind>) -> Result<Level> {
        if width < MIN_SIDE || height < MIN_SIDE {
            return Err(Error::Input(format!(
                "level must be at least {MIN_SIDE}x{MIN_SIDE}, got {width}x{height}"
            )));
        }
        if cells.len() != width * height {
            return Err(Error::Input(format!(
                "expected {} cells for {width}x{height}, got {}",
                width * height,
                cells.len()
            )));
        }
        Ok(Level {
            width,
            height,
            cells,
        })
    }

    pub fn filled(width: usize, height: usize, kind: TileKind) -> Result<Level> {
        Level::new(width, height, vec![kind; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[TileKind] {
        &self.cells
    }

    pub fn in_bounds(&self, pos: Position) -> bool {
        pos.row < self.height && pos.col < self.width
    }

    pub fn check(&self, pos: Position) -> Result<()> {
        if self.in_bounds(pos) {
            Ok(())
        } else {
            Err(Error::OutOfBounds {
                pos,
                width: self.width,
                height: self.height,
            })
        }
    }

    pub fn index(&self, pos: Position) -> usize {
        pos.row * self.width + pos.col
    }

    pub fn position(&self, index: usize) -> Position {
        Position::new(index / self.width, index % self.width)
    }

    /// Panics if `pos` is out of bounds.
    pub fn get(&self, pos: Position) -> TileKind {
        assert!(self.in_bounds(pos), "position {pos} out of bounds");
        self.cells[self.index(pos)]
    }

    /// Panics if `pos` is out of bounds.
    pub fn set(&mut self, pos: Position, kind: TileKind) {
        assert!(self.in_bounds(pos), "position {pos} out of bounds");
        let i = self.index(pos);
        self.cells[i] = kind;
    }

    pub fn swap(&mut self, a: Position, b: Position) -> Result<()> {
        self.check(a)?;
        self.check(b)?;
        let (ia, ib) = (self.index(a), self.index(b));
        self.cells.swap(ia, ib);
        Ok(())
    }

    pub fn positions_of(&self, kind: TileKind) -> Vec<Position> {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, k)| **k == kind)
            .map(|(i, _)| self.position(i))
            .collect()
    }

    /// Step from `pos` in `dir`, or `None` when that leaves the grid.
    pub fn step(&self, pos: Position, dir: Direction) -> Option<Position> {
        let p = match dir {
            Direction::North => Position::new(pos.row.checked_sub(1)?, pos.col),
            Direction::East => Position::new(pos.row, pos.col + 1),
            Direction::South => Position::new(pos.row + 1, pos.col),
            Direction::West => Position::new(pos.row, pos.col.checked_sub(1)?),
        };
        self.in_bounds(p).then_some(p)
    }

    /// In-bounds 4-neighbours in N, E, S, W order.
    pub fn neighbors(&self, pos: Position) -> impl Iterator<Item = Position> + '_ {
        Direction::ALL.into_iter().filter_map(move |d| self.step(pos, d))
    }

    /// Cells reachable from `start` over passable tiles (4-neighbourhood),
    /// as a mask indexed like `cells`. `start` itself is always marked.
    pub fn reachable_from(&self, start: Position) -> Vec<bool> {
        let mut seen = vec![false; self.cells.len()];
        let mut queue = VecDeque::new();
        seen[self.index(start)] = true;
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            for n in self.neighbors(p) {
                let i = self.index(n);
                if !seen[i] && self.cells[i].passable() {
                    seen[i] = true;
                    queue.push_back(n);
                }
            }
        }
        seen
    }

    pub fn count_tiles(&self) -> TileCounts {
        count_tiles(self)
    }
}

/// Histogram of tile kinds, indexed by [`TileKind::id`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TileCounts(pub [usize; 6]);

impl TileCounts {
    pub fn get(&self, kind: TileKind) -> usize {
        self.0[kind.id() as usize]
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn add(&mut self, other: &TileCounts) {
        for (a, b) in self.0.iter_mut().zip(other.0) {
            *a += b;
        }
    }
}

pub fn count_tiles(level: &Level) -> TileCounts {
    let mut counts = TileCounts::default();
    for kind in &level.cells {
        counts.0[kind.id() as usize] += 1;
    }
    counts
}

/// True iff a 4-neighbourhood path over passable tiles joins `a` and `b`.
///
/// The endpoints themselves need not be passable; `a == b` is always connected.
pub fn path_exists(level: &Level, a: Position, b: Position) -> Result<bool> {
    level.check(a)?;
    level.check(b)?;
    if a == b {
        return Ok(true);
    }
    // The walk may enter `b` even when `b` is impassable, which keeps the
    // relation symmetric.
    let target = level.index(b);
    let mut seen = vec![false; level.len()];
    let mut queue = VecDeque::new();
    seen[level.index(a)] = true;
    queue.push_back(a);
    while let Some(p) = queue.pop_front() {
        for n in level.neighbors(p) {
            let i = level.index(n);
            if i == target {
                return Ok(true);
            }
            if !seen[i] && level.cells[i].passable() {
                seen[i] = true;
                queue.push_back(n);
            }
        }
    }
    Ok(false)
}

pub fn serialize_level(level: &Level) -> String {
    let mut out = format!("{} {}\n", level.width, level.height);
    for row in level.cells.chunks(level.width) {
        out.extend(row.iter().map(|k| k.code()));
        out.push('\n');
    }
    out
}

pub fn parse_level(text: &str) -> Result<Level> {
    let mut lines = text.lines().enumerate().peekable();
    let mut declared = None;
    if let Some((_, first)) = lines.peek() {
        let mut parts = first.split_whitespace();
        if let (Some(w), Some(h), None) = (parts.next(), parts.next(), parts.next()) {
            if let (Ok(w), Ok(h)) = (w.parse::<usize>(), h.parse::<usize>()) {
                declared = Some((w, h));
                lines.next();
            }
        }
    }

    let mut cells = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (lineno, line) in lines {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let mut row_len = 0;
        for (col, c) in line.chars().enumerate() {
            if c == ' ' || c == '\t' {
                continue;
            }
            let kind = TileKind::from_code(c).ok_or_else(|| Error::Parse {
                line: lineno + 1,
                column: col + 1,
                message: format!("unknown tile code {c:?}"),
            })?;
            cells.push(kind);
            row_len += 1;
        }
        match width {
            None => width = Some(row_len),
            Some(w) if w != row_len => {
                return Err(Error::Parse {
                    line: lineno + 1,
                    column: row_len.min(w) + 1,
                    message: format!("ragged row: expected {w} tiles, found {row_len}"),
                })
            }
            _ => {}
        }
        rows += 1;
    }

    let width = width.ok_or_else(|| Error::Parse {
        line: 1,
        column: 1,
        message: "no tile rows".into(),
    })?;
    if let Some((w, h)) = declared {
        if (w, h) != (width, rows) {
            return Err(Error::Parse {
                line: 1,
                column: 1,
                message: format!("header declares {w}x{h} but body is {width}x{rows}"),
            });
        }
    }
    Level::new(width, rows, cells).map_err(|e| Error::Parse {
        line: 1,
        column: 1,
        message: format!("{e}"),
    })
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_level(self))
    }
}

impl core::str::FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Level> {
        parse_level(s)
    }
}

/// One code per cell separated by single spaces, one line per row.
///
/// `[Grass, Water, Stone]` renders as `"G W S\n"`. The output parses back
/// with [`parse_level`].
pub fn render_ascii(level: &Level) -> String {
    let mut out = String::with_capacity(level.len() * 2);
    for row in level.cells.chunks(level.width) {
        for (i, k) in row.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push(k.code());
        }
        out.push('\n');
    }
    out
}

/// Three characters per cell: `[X]` for highlighted cells, ` X ` otherwise.
pub fn render_highlighted(level: &Level, highlight: &[Position]) -> String {
    let mut out = String::with_capacity(level.len() * 3 + level.height);
    for row in 0..level.height {
        for col in 0..level.width {
            let pos = Position::new(row, col);
            let c = level.get(pos).code();
            if highlight.contains(&pos) {
                out.push('[');
                out.push(c);
                out.push(']');
            } else {
                out.push(' ');
                out.push(c);
                out.push(' ');
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn lvl(text: &str) -> Level {
        parse_level(text).unwrap()
    }

    #[test]
    fn tile_codes_and_ids_are_stable() {
        let codes: String = TileKind::ALL.iter().map(|k| k.code()).collect();
        assert_eq!(codes, "GFCSWP");
        for (i, k) in TileKind::ALL.iter().enumerate() {
            assert_eq!(k.id() as usize, i);
            assert_eq!(TileKind::from_id(i as u8), Some(*k));
            assert_eq!(TileKind::from_code(k.code()), Some(*k));
        }
        assert_eq!(TileKind::from_id(6), None);
    }

    #[test]
    fn passability() {
        assert!(!passable(TileKind::Stone));
        assert!(!passable(TileKind::Water));
        assert!(passable(TileKind::Grass));
        assert!(passable(TileKind::Scrub));
        assert!(passable(TileKind::Forest));
        assert!(passable(TileKind::PlayerSpawn));
    }

    #[test]
    fn parse_without_header() {
        let l = lvl("GG\nGW");
        assert_eq!(l.width(), 2);
        assert_eq!(l.height(), 2);
        assert_eq!(
            l.cells(),
            &[TileKind::Grass, TileKind::Grass, TileKind::Grass, TileKind::Water]
        );
    }

    #[test]
    fn canonical_text_round_trips() {
        let s = "3 2\nGFP\nSWC\n";
        assert_eq!(serialize_level(&lvl(s)), s);
    }

    #[test]
    fn unknown_code_reports_coordinates() {
        let err = parse_level("2 2\nGG\nGX\n").unwrap_err();
        assert_eq!(
            err,
            Error::Parse {
                line: 3,
                column: 2,
                message: "unknown tile code 'X'".into()
            }
        );
    }

    #[test]
    fn ragged_rows_and_size_mismatch_rejected() {
        assert!(matches!(
            parse_level("GGG\nGG\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_level("3 3\nGGG\nGGG\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(parse_level("").is_err());
        assert!(parse_level("G\n").is_err());
    }

    #[test]
    fn path_on_open_grid_and_split_grid() {
        let open = Level::filled(6, 6, TileKind::Grass).unwrap();
        assert!(path_exists(&open, Position::new(0, 0), Position::new(5, 5)).unwrap());

        let mut split = open.clone();
        for r in 0..6 {
            split.set(Position::new(r, 3), TileKind::Stone);
        }
        assert!(!path_exists(&split, Position::new(0, 0), Position::new(5, 5)).unwrap());
        assert!(path_exists(&split, Position::new(2, 2), Position::new(2, 2)).unwrap());
    }

    #[test]
    fn path_out_of_bounds_is_error() {
        let open = Level::filled(3, 3, TileKind::Grass).unwrap();
        assert!(matches!(
            path_exists(&open, Position::new(0, 0), Position::new(3, 0)),
            Err(Error::OutOfBounds { .. })
        ));
    }

    #[test]
    fn counts() {
        let open = Level::filled(6, 6, TileKind::Grass).unwrap();
        let c = count_tiles(&open);
        assert_eq!(c.get(TileKind::Grass), 36);
        assert_eq!(c.total(), 36);
        for k in &TileKind::ALL[1..] {
            assert_eq!(c.get(*k), 0);
        }
    }

    #[test]
    fn render_forms() {
        let l = Level::new(
            3,
            2,
            vec![
                TileKind::Grass,
                TileKind::Water,
                TileKind::Stone,
                TileKind::Forest,
                TileKind::PlayerSpawn,
                TileKind::Scrub,
            ],
        )
        .unwrap();
        assert_eq!(render_ascii(&l), "G W S\nF P C\n");
        assert_eq!(render_ascii(&lvl(&render_ascii(&l))), render_ascii(&l));
        let h = render_highlighted(&l, &[Position::new(0, 1), Position::new(1, 2)]);
        assert_eq!(h, " G [W] S \n F  P [C]\n");
        assert_eq!(h.matches('[').count(), 2);
    }

    #[test]
    fn display_matches_serialize() {
        let l = lvl("2 2\nPG\nGP\n");
        assert_eq!(l.to_string(), serialize_level(&l));
    }
}
