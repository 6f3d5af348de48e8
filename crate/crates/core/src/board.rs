//! Go rules kernel: stone placement, captures, simple ko, suicide rejection
//! and incremental tabulation hashing.
//!
//! [`BoardState`] is an immutable value. [`BoardState::apply_move`] returns a
//! fresh successor and leaves the receiver untouched, so states can be shared
//! between worker threads freely.

use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sgf::GameRecord;

/// Largest board edge the kernel (and the hash tables) support.
pub const MAX_SIZE: u8 = 25;

/// Seed of the tabulation hash tables. Changing it invalidates every
/// persisted evaluation cache, so it is frozen.
pub const HASH_SEED: u64 = 0x6A09_E667_F3BC_C908;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Color {
    Black,
    White,
}

impl Color {
    pub fn opponent(self) -> Color {
        match self {
            Color::Black => Color::White,
            Color::White => Color::Black,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Color::Black => 0,
            Color::White => 1,
        }
    }

    /// Single-letter tag used by SGF and the engine protocol.
    pub fn letter(self) -> char {
        match self {
            Color::Black => 'B',
            Color::White => 'W',
        }
    }

    pub fn from_letter(c: &str) -> Option<Color> {
        match c {
            "B" | "b" => Some(Color::Black),
            "W" | "w" => Some(Color::White),
            _ => None,
        }
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// An intersection, `(0, 0)` being the top-left corner as in SGF.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Point {
    pub col: u8,
    pub row: u8,
}

impl Point {
    pub const fn new(col: u8, row: u8) -> Point {
        Point { col, row }
    }

    pub fn on_board(self, size: u8) -> bool {
        self.col < size && self.row < size
    }

    fn index(self, size: u8) -> usize {
        self.row as usize * size as usize + self.col as usize
    }

    fn from_index(idx: usize, size: u8) -> Point {
        let n = size as usize;
        Point::new((idx % n) as u8, (idx / n) as u8)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.col, self.row)
    }
}

/// A play or a pass by one color. A pass carries no point.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Move {
    pub color: Color,
    pub point: Option<Point>,
}

impl Move {
    pub fn play(color: Color, col: u8, row: u8) -> Move {
        Move { color, point: Some(Point::new(col, row)) }
    }

    pub fn at(color: Color, point: Point) -> Move {
        Move { color, point: Some(point) }
    }

    pub fn pass(color: Color) -> Move {
        Move { color, point: None }
    }

    pub fn is_pass(&self) -> bool {
        self.point.is_none()
    }
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.point {
            Some(p) => write!(f, "{} {}", self.color, p),
            None => write!(f, "{} pass", self.color),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BoardError {
    #[error("point {0} is already occupied")]
    OccupiedPoint(Point),
    #[error("play at {0} would be suicide")]
    SuicideMove(Point),
    #[error("play at {0} retakes the ko")]
    KoViolation(Point),
    #[error("expected {expected} to move, got {got}")]
    WrongColor { expected: Color, got: Color },
    #[error("point {point} is off a {size}x{size} board")]
    OffBoard { point: Point, size: u8 },
    #[error("unsupported board size {0}")]
    UnsupportedSize(u8),
    #[error("illegal recorded move at ply {ply}: {reason}")]
    IllegalRecordedMove { ply: usize, reason: Box<BoardError> },
}

struct HashTables {
    stones: Vec<[u64; 2]>,
    ko: Vec<u64>,
    size: Vec<u64>,
    white_to_move: u64,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn tables() -> &'static HashTables {
    static TABLES: OnceLock<HashTables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let cells = MAX_SIZE as usize * MAX_SIZE as usize;
        let mut s = HASH_SEED;
        let stones = (0..cells).map(|_| [splitmix64(&mut s), splitmix64(&mut s)]).collect();
        let ko = (0..cells).map(|_| splitmix64(&mut s)).collect();
        let size = (0..=MAX_SIZE).map(|_| splitmix64(&mut s)).collect();
        let white_to_move = splitmix64(&mut s);
        HashTables { stones, ko, size, white_to_move }
    })
}

// Tables are laid out on the 25x25 grid so a point hashes the same on every
// board size; the size key separates sizes.
fn stone_key(p: Point, c: Color) -> u64 {
    tables().stones[p.index(MAX_SIZE)][c.index()]
}

fn ko_key(p: Point) -> u64 {
    tables().ko[p.index(MAX_SIZE)]
}

#[derive(Debug)]
struct HistoryNode {
    mv: Move,
    prev: Option<Arc<HistoryNode>>,
}

/// Full rules state at one ply.
#[derive(Clone)]
pub struct BoardState {
    size: u8,
    grid: Box<[Option<Color>]>,
    to_move: Color,
    ko_point: Option<Point>,
    prisoners: [u32; 2],
    komi: f64,
    key: u64,
    ply: u32,
    setup: Arc<Vec<(Color, Point)>>,
    history: Option<Arc<HistoryNode>>,
}

impl fmt::Debug for BoardState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BoardState {{ size: {}, to_move: {}, ply: {}, ko: {:?}, key: {:016x} }}", self.size, self.to_move, self.ply, self.ko_point, self.key)?;
        for row in 0..self.size {
            for col in 0..self.size {
                let c = match self.get(Point::new(col, row)) {
                    Some(Color::Black) => 'X',
                    Some(Color::White) => 'O',
                    None => '.',
                };
                write!(f, "{c}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl PartialEq for BoardState {
    fn eq(&self, other: &Self) -> bool {
        self.size == other.size
            && self.grid == other.grid
            && self.to_move == other.to_move
            && self.ko_point == other.ko_point
            && self.prisoners == other.prisoners
            && self.komi == other.komi
            && self.ply == other.ply
    }
}

impl BoardState {
    /// Empty board with black to move.
    pub fn new(size: u8, komi: f64) -> Result<BoardState, BoardError> {
        BoardState::with_setup(size, komi, &[], Color::Black)
    }

    /// Board with handicap/setup stones placed before ply 0.
    pub fn with_setup(
        size: u8,
        komi: f64,
        setup: &[(Color, Point)],
        to_move: Color,
    ) -> Result<BoardState, BoardError> {
        if !(1..=MAX_SIZE).contains(&size) {
            return Err(BoardError::UnsupportedSize(size));
        }
        let mut grid = vec![None; size as usize * size as usize].into_boxed_slice();
        for &(c, p) in setup {
            if !p.on_board(size) {
                return Err(BoardError::OffBoard { point: p, size });
            }
            grid[p.index(size)] = Some(c);
        }
        let mut state = BoardState {
            size,
            grid,
            to_move,
            ko_point: None,
            prisoners: [0, 0],
            komi,
            key: 0,
            ply: 0,
            setup: Arc::new(setup.to_vec()),
            history: None,
        };
        state.key = state.compute_key();
        Ok(state)
    }

    pub fn size(&self) -> u8 {
        self.size
    }

    pub fn to_move(&self) -> Color {
        self.to_move
    }

    pub fn ko_point(&self) -> Option<Point> {
        self.ko_point
    }

    /// Stones captured by `color` so far.
    pub fn prisoners(&self, color: Color) -> u32 {
        self.prisoners[color.index()]
    }

    pub fn komi(&self) -> f64 {
        self.komi
    }

    pub fn ply(&self) -> u32 {
        self.ply
    }

    pub fn position_key(&self) -> u64 {
        self.key
    }

    pub fn get(&self, p: Point) -> Option<Color> {
        self.grid[p.index(self.size)]
    }

    pub fn setup_stones(&self) -> &[(Color, Point)] {
        &self.setup
    }

    /// Moves applied since the initial position, oldest first.
    pub fn history(&self) -> Vec<Move> {
        let mut out = Vec::with_capacity(self.ply as usize);
        let mut node = self.history.as_ref();
        while let Some(n) = node {
            out.push(n.mv);
            node = n.prev.as_ref();
        }
        out.reverse();
        out
    }

    pub fn stones(&self) -> impl Iterator<Item = (Point, Color)> + '_ {
        let size = self.size;
        self.grid
            .iter()
            .enumerate()
            .filter_map(move |(i, c)| c.map(|c| (Point::from_index(i, size), c)))
    }

    pub fn stone_count(&self, color: Color) -> usize {
        self.grid.iter().filter(|c| **c == Some(color)).count()
    }

    /// Hash recomputed from scratch; equals [`Self::position_key`] for every
    /// state built through this module.
    pub fn compute_key(&self) -> u64 {
        let t = tables();
        let mut key = t.size[self.size as usize];
        for (p, c) in self.stones() {
            key ^= stone_key(p, c);
        }
        if self.to_move == Color::White {
            key ^= t.white_to_move;
        }
        if let Some(k) = self.ko_point {
            key ^= ko_key(k);
        }
        key
    }

    pub fn neighbors(&self, p: Point) -> impl Iterator<Item = Point> {
        let size = self.size;
        let (c, r) = (p.col as i16, p.row as i16);
        [(c - 1, r), (c + 1, r), (c, r - 1), (c, r + 1)]
            .into_iter()
            .filter(move |&(c, r)| c >= 0 && r >= 0 && c < size as i16 && r < size as i16)
            .map(|(c, r)| Point::new(c as u8, r as u8))
    }

    /// Stones of the group containing `p` and its liberty count.
    pub fn group(&self, p: Point) -> (Vec<Point>, usize) {
        group_on(&self.grid, self.size, p)
    }

    /// Successor after `mv`, or the rule it breaks.
    pub fn apply_move(&self, mv: &Move) -> Result<BoardState, BoardError> {
        if mv.color != self.to_move {
            return Err(BoardError::WrongColor { expected: self.to_move, got: mv.color });
        }
        let t = tables();
        let mut next = self.clone();
        next.ply += 1;
        next.to_move = self.to_move.opponent();
        next.key ^= t.white_to_move;
        if let Some(k) = self.ko_point {
            next.key ^= ko_key(k);
        }
        next.ko_point = None;
        next.history = Some(Arc::new(HistoryNode { mv: *mv, prev: self.history.clone() }));

        let Some(p) = mv.point else {
            return Ok(next);
        };
        if !p.on_board(self.size) {
            return Err(BoardError::OffBoard { point: p, size: self.size });
        }
        if self.get(p).is_some() {
            return Err(BoardError::OccupiedPoint(p));
        }
        if self.ko_point == Some(p) {
            return Err(BoardError::KoViolation(p));
        }

        let me = mv.color;
        let size = self.size;
        next.grid[p.index(size)] = Some(me);
        next.key ^= stone_key(p, me);

        let mut captured: Vec<Point> = Vec::new();
        for n in self.neighbors(p) {
            if next.grid[n.index(size)] != Some(me.opponent()) {
                continue;
            }
            let (stones, libs) = group_on(&next.grid, size, n);
            if libs == 0 {
                for s in stones {
                    next.grid[s.index(size)] = None;
                    next.key ^= stone_key(s, me.opponent());
                    captured.push(s);
                }
            }
        }

        let (own, own_libs) = group_on(&next.grid, size, p);
        if own_libs == 0 {
            return Err(BoardError::SuicideMove(p));
        }
        next.prisoners[me.index()] += captured.len() as u32;

        if captured.len() == 1 && own.len() == 1 && own_libs == 1 {
            next.ko_point = Some(captured[0]);
            next.key ^= ko_key(captured[0]);
        }
        Ok(next)
    }

    /// Every play `apply_move` accepts for the side to move, in row-major
    /// order, followed by pass.
    pub fn legal_moves(&self) -> Vec<Move> {
        let mut out: Vec<Move> = (0..self.grid.len())
            .map(|i| Move::at(self.to_move, Point::from_index(i, self.size)))
            .filter(|m| self.is_legal(m))
            .collect();
        out.push(Move::pass(self.to_move));
        out
    }

    pub fn is_legal(&self, mv: &Move) -> bool {
        if mv.color != self.to_move {
            return false;
        }
        let Some(p) = mv.point else { return true };
        if !p.on_board(self.size) || self.get(p).is_some() || self.ko_point == Some(p) {
            return false;
        }
        // Legal iff some neighbor is empty, a friendly neighbor group keeps a
        // liberty elsewhere, or an enemy neighbor group is in atari.
        let me = mv.color;
        for n in self.neighbors(p) {
            match self.get(n) {
                None => return true,
                Some(c) => {
                    let (_, libs) = self.group(n);
                    if c == me && libs > 1 {
                        return true;
                    }
                    if c != me && libs == 1 {
                        return true;
                    }
                }
            }
        }
        false
    }
}

fn group_on(grid: &[Option<Color>], size: u8, p: Point) -> (Vec<Point>, usize) {
    let n = size as usize;
    let Some(color) = grid[p.index(size)] else {
        return (Vec::new(), 0);
    };
    let mut seen = vec![false; grid.len()];
    let mut lib_seen = vec![false; grid.len()];
    let mut stack = vec![p.index(size)];
    seen[p.index(size)] = true;
    let mut stones = Vec::new();
    let mut libs = 0;
    while let Some(i) = stack.pop() {
        stones.push(Point::from_index(i, size));
        let (c, r) = (i % n, i / n);
        let mut visit = |j: usize| match grid[j] {
            None => {
                if !lib_seen[j] {
                    lib_seen[j] = true;
                    libs += 1;
                }
            }
            Some(k) if k == color && !seen[j] => {
                seen[j] = true;
                stack.push(j);
            }
            _ => {}
        };
        if c > 0 {
            visit(i - 1);
        }
        if c + 1 < n {
            visit(i + 1);
        }
        if r > 0 {
            visit(i - n);
        }
        if r + 1 < n {
            visit(i + n);
        }
    }
    (stones, libs)
}

/// States visited by a recorded game: `states[k]` is the position before
/// move `k + 1`, and the last entry is the final position.
pub fn replay(record: &GameRecord) -> Result<Vec<BoardState>, BoardError> {
    let mut state = BoardState::with_setup(
        record.size,
        record.komi,
        &record.setup_stones,
        record.initial_to_move(),
    )?;
    let mut states = Vec::with_capacity(record.moves.len() + 1);
    for (i, mv) in record.moves.iter().enumerate() {
        let next = state
            .apply_move(mv)
            .map_err(|e| BoardError::IllegalRecordedMove { ply: i + 1, reason: Box::new(e) })?;
        states.push(std::mem::replace(&mut state, next));
    }
    states.push(state);
    Ok(states)
}
