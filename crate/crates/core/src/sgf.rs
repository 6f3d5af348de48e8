//! SGF (FF[4] subset) game records and the match-metadata table.
//!
//! Only the mainline is kept: at every branch point the first child is
//! followed and the number of skipped variations is recorded. Root properties
//! the parser does not interpret are preserved in order so that
//! [`serialize_sgf`] reproduces them.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::board::{Color, Move, Point, MAX_SIZE};
use crate::month::{parse_date, Month};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SgfError {
    #[error("malformed SGF at byte {position}: {reason}")]
    MalformedSgf { position: usize, reason: String },
    #[error("unsupported board size {0}")]
    UnsupportedSize(u32),
}

/// One match: metadata plus the mainline of moves.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GameRecord {
    /// `PB`; advisory only, identities come from the metadata table.
    pub black_name: Option<String>,
    pub white_name: Option<String>,
    pub date: Option<NaiveDate>,
    pub result: Option<String>,
    pub komi: f64,
    pub size: u8,
    /// `PL`, when the record states who moves first.
    pub first_player: Option<Color>,
    pub setup_stones: Vec<(Color, Point)>,
    pub moves: Vec<Move>,
    /// Uninterpreted root properties, in source order.
    pub extra: Vec<(String, Vec<String>)>,
    pub source_path: String,
    /// Variations skipped while extracting the mainline.
    pub branch_count: usize,
    pub warnings: Vec<String>,
}

impl GameRecord {
    pub fn new(size: u8, komi: f64) -> GameRecord {
        GameRecord { size, komi, ..Default::default() }
    }

    /// Color to move at ply 0: `PL` if given, white after a black-only
    /// handicap setup, black otherwise.
    pub fn initial_to_move(&self) -> Color {
        if let Some(c) = self.first_player {
            return c;
        }
        let has_black = self.setup_stones.iter().any(|(c, _)| *c == Color::Black);
        let has_white = self.setup_stones.iter().any(|(c, _)| *c == Color::White);
        if has_black && !has_white {
            Color::White
        } else {
            Color::Black
        }
    }

    /// Equality on the subset `serialize_sgf` retains (mainline, metadata,
    /// preserved properties); provenance and diagnostics are ignored.
    pub fn same_content(&self, other: &GameRecord) -> bool {
        self.black_name == other.black_name
            && self.white_name == other.white_name
            && self.date == other.date
            && self.result == other.result
            && self.komi == other.komi
            && self.size == other.size
            && self.first_player == other.first_player
            && self.setup_stones == other.setup_stones
            && self.moves == other.moves
            && self.extra == other.extra
    }
}

struct Node {
    props: Vec<(String, Vec<String>, usize)>,
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    branches: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, position: usize, reason: impl Into<String>) -> Result<T, SgfError> {
        Err(SgfError::MalformedSgf { position, reason: reason.into() })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    /// Parses one game tree, appending its mainline nodes to `out`.
    /// `follow` is false for variations, which are validated but dropped.
    fn game_tree(&mut self, out: &mut Vec<Node>, follow: bool) -> Result<(), SgfError> {
        if self.peek() != Some(b'(') {
            return self.err(self.pos, "expected '('");
        }
        self.pos += 1;
        let mut saw_node = false;
        while self.peek() == Some(b';') {
            self.pos += 1;
            let node = self.node()?;
            if follow {
                out.push(node);
            }
            saw_node = true;
        }
        if !saw_node {
            return self.err(self.pos, "game tree without nodes");
        }
        let mut child = 0;
        while self.peek() == Some(b'(') {
            self.game_tree(out, follow && child == 0)?;
            if follow && child > 0 {
                self.branches += 1;
            }
            child += 1;
        }
        match self.peek() {
            Some(b')') => {
                self.pos += 1;
                Ok(())
            }
            Some(c) => self.err(self.pos, format!("unexpected {:?}", c as char)),
            None => self.err(self.pos, "unclosed game tree"),
        }
    }

    fn node(&mut self) -> Result<Node, SgfError> {
        let mut props = Vec::new();
        loop {
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphabetic() {
                self.pos += 1;
            }
            if start == self.pos {
                break;
            }
            // FF[3] allowed lowercase letters inside identifiers; they are
            // not significant.
            let ident: String = self.src[start..self.pos]
                .iter()
                .filter(|c| c.is_ascii_uppercase())
                .map(|&c| c as char)
                .collect();
            if ident.is_empty() {
                return self.err(start, "property identifier without uppercase letters");
            }
            let mut values = Vec::new();
            while self.peek() == Some(b'[') {
                values.push(self.value()?);
            }
            if values.is_empty() {
                return self.err(self.pos, format!("property {ident} has no value"));
            }
            props.push((ident, values, start));
        }
        Ok(Node { props })
    }

    fn value(&mut self) -> Result<String, SgfError> {
        let open = self.pos;
        self.pos += 1;
        let mut buf = Vec::new();
        loop {
            match self.src.get(self.pos) {
                None => return self.err(open, "unclosed property value"),
                Some(b'\\') => {
                    match self.src.get(self.pos + 1) {
                        None => return self.err(open, "unclosed property value"),
                        // soft line break
                        Some(b'\n') => {}
                        Some(&c) => buf.push(c),
                    }
                    self.pos += 2;
                }
                Some(b']') => {
                    self.pos += 1;
                    break;
                }
                Some(&c) => {
                    buf.push(c);
                    self.pos += 1;
                }
            }
        }
        String::from_utf8(buf).map_err(|_| SgfError::MalformedSgf { position: open, reason: "value is not UTF-8".into() })
    }
}

fn parse_point(v: &str, size: u8, at: usize) -> Result<Option<Point>, SgfError> {
    let b = v.as_bytes();
    if b.is_empty() || (v == "tt" && size <= 19) {
        return Ok(None);
    }
    if b.len() != 2 || !b[0].is_ascii_lowercase() || !b[1].is_ascii_lowercase() {
        return Err(SgfError::MalformedSgf { position: at, reason: format!("bad point {v:?}") });
    }
    let p = Point::new(b[0] - b'a', b[1] - b'a');
    if !p.on_board(size) {
        return Err(SgfError::MalformedSgf { position: at, reason: format!("point {v:?} off a {size}x{size} board") });
    }
    Ok(Some(p))
}

fn point_text(p: Point) -> String {
    format!("{}{}", (b'a' + p.col) as char, (b'a' + p.row) as char)
}

fn escape(v: &str) -> String {
    let mut s = String::with_capacity(v.len());
    for c in v.chars() {
        if c == ']' || c == '\\' {
            s.push('\\');
        }
        s.push(c);
    }
    s
}

/// Parses the first game of an SGF collection.
pub fn parse_sgf(text: &str) -> Result<GameRecord, SgfError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0, branches: 0 };
    // Tolerate junk before the first tree, as many archives carry headers.
    match text.find('(') {
        Some(i) => p.pos = i,
        None => return p.err(0, "no game tree"),
    }
    let mut nodes = Vec::new();
    p.game_tree(&mut nodes, true)?;

    let mut rec = GameRecord::new(19, 0.0);
    rec.branch_count = p.branches;

    // size first: point decoding depends on it
    if let Some((_, vals, at)) = nodes[0].props.iter().find(|(k, _, _)| k == "SZ") {
        let v = vals[0].trim();
        let n: u32 = v
            .split(':')
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| SgfError::MalformedSgf { position: *at, reason: format!("bad size {v:?}") })?;
        if v.contains(':') && v.split(':').nth(1).map(str::trim) != Some(&n.to_string()) {
            return Err(SgfError::UnsupportedSize(n));
        }
        if n == 0 || n > MAX_SIZE as u32 {
            return Err(SgfError::UnsupportedSize(n));
        }
        rec.size = n as u8;
    }

    for (i, node) in nodes.iter().enumerate() {
        let root = i == 0;
        for (key, vals, at) in &node.props {
            let at = *at;
            match key.as_str() {
                "B" | "W" => {
                    let color = if key == "B" { Color::Black } else { Color::White };
                    let point = parse_point(&vals[0], rec.size, at)?;
                    rec.moves.push(Move { color, point });
                }
                "AB" | "AW" if root => {
                    let color = if key == "AB" { Color::Black } else { Color::White };
                    for v in vals {
                        for pt in expand_points(v, rec.size, at)? {
                            rec.setup_stones.push((color, pt));
                        }
                    }
                }
                "AB" | "AW" | "AE" => {
                    rec.warnings.push(format!("setup property {key} after the root node ignored"));
                }
                "SZ" | "GM" | "FF" if root => {
                    if key == "GM" && vals[0].trim() != "1" {
                        rec.warnings.push(format!("GM[{}] is not Go", vals[0]));
                    }
                }
                "KM" if root => {
                    rec.komi = vals[0].trim().parse().map_err(|_| SgfError::MalformedSgf {
                        position: at,
                        reason: format!("bad komi {:?}", vals[0]),
                    })?;
                }
                "DT" if root => {
                    let first = vals[0].split(',').next().unwrap_or("");
                    match parse_date(first) {
                        Some(d) => rec.date = Some(d),
                        None => {
                            rec.warnings.push(format!("unparsed date {:?}", vals[0]));
                            rec.extra.push((key.clone(), vals.clone()));
                        }
                    }
                }
                "RE" if root => rec.result = Some(vals[0].clone()),
                "PB" if root => rec.black_name = Some(vals[0].clone()),
                "PW" if root => rec.white_name = Some(vals[0].clone()),
                "PL" if root => rec.first_player = Color::from_letter(vals[0].trim()),
                _ if root => rec.extra.push((key.clone(), vals.clone())),
                // annotations on move nodes are not retained
                _ => {}
            }
        }
    }

    let mut expect = rec.initial_to_move();
    for (k, m) in rec.moves.iter().enumerate() {
        if m.color != expect {
            rec.warnings.push(format!("move {} is {} but {} was to play", k + 1, m.color, expect));
        }
        expect = m.color.opponent();
    }
    Ok(rec)
}

// AB/AW accept compressed rectangles `aa:cc`.
fn expand_points(v: &str, size: u8, at: usize) -> Result<Vec<Point>, SgfError> {
    if let Some((a, b)) = v.split_once(':') {
        let (Some(a), Some(b)) = (parse_point(a, size, at)?, parse_point(b, size, at)?) else {
            return Err(SgfError::MalformedSgf { position: at, reason: format!("bad rectangle {v:?}") });
        };
        let mut out = Vec::new();
        for row in a.row.min(b.row)..=a.row.max(b.row) {
            for col in a.col.min(b.col)..=a.col.max(b.col) {
                out.push(Point::new(col, row));
            }
        }
        Ok(out)
    } else {
        Ok(parse_point(v, size, at)?.into_iter().collect())
    }
}

/// Writes the record as a single-variation SGF. Passes are written as the
/// empty value.
pub fn serialize_sgf(rec: &GameRecord) -> String {
    let mut s = String::from("(;GM[1]FF[4]");
    let _ = write!(s, "SZ[{}]KM[{}]", rec.size, rec.komi);
    if let Some(d) = rec.date {
        let _ = write!(s, "DT[{}]", d.format("%Y-%m-%d"));
    }
    let mut text = |k: &str, v: &Option<String>| {
        if let Some(v) = v {
            let _ = write!(s, "{k}[{}]", escape(v));
        }
    };
    text("PB", &rec.black_name);
    text("PW", &rec.white_name);
    text("RE", &rec.result);
    if let Some(c) = rec.first_player {
        let _ = write!(s, "PL[{c}]");
    }
    for color in [Color::Black, Color::White] {
        let pts: Vec<_> = rec.setup_stones.iter().filter(|(c, _)| *c == color).collect();
        if !pts.is_empty() {
            s.push_str(if color == Color::Black { "AB" } else { "AW" });
            for (_, p) in pts {
                let _ = write!(s, "[{}]", point_text(*p));
            }
        }
    }
    for (k, vals) in &rec.extra {
        s.push_str(k);
        for v in vals {
            let _ = write!(s, "[{}]", escape(v));
        }
    }
    for m in &rec.moves {
        let coord = m.point.map(point_text).unwrap_or_default();
        let _ = write!(s, ";{}[{}]", m.color, coord);
    }
    s.push_str(")\n");
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GroupFlag {
    Treated,
    Control,
    #[default]
    None,
}

impl GroupFlag {
    pub fn parse(s: &str) -> Option<GroupFlag> {
        match s.trim().to_ascii_lowercase().as_str() {
            "treated" => Some(GroupFlag::Treated),
            "control" => Some(GroupFlag::Control),
            "none" | "" => Some(GroupFlag::None),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GroupFlag::Treated => "treated",
            GroupFlag::Control => "control",
            GroupFlag::None => "none",
        }
    }
}

/// One analyzable match joined with its metadata row.
#[derive(Debug, Clone)]
pub struct MatchRow {
    pub match_id: String,
    pub record: GameRecord,
    pub black_id: String,
    pub white_id: String,
    pub date: NaiveDate,
    pub month: Month,
    pub tournament: Option<String>,
    /// Group flag of the black and white player in this match.
    pub groups: [GroupFlag; 2],
}

impl MatchRow {
    pub fn player(&self, color: Color) -> &str {
        match color {
            Color::Black => &self.black_id,
            Color::White => &self.white_id,
        }
    }

    pub fn group_of(&self, color: Color) -> GroupFlag {
        self.groups[color.index()]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SkipEntry {
    pub path: String,
    pub match_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct MatchTable {
    pub rows: Vec<MatchRow>,
    pub skipped: Vec<SkipEntry>,
}

impl MatchTable {
    pub fn get(&self, match_id: &str) -> Option<&MatchRow> {
        self.rows.iter().find(|r| r.match_id == match_id)
    }

    /// Rows keyed by match id.
    pub fn index(&self) -> BTreeMap<&str, &MatchRow> {
        self.rows.iter().map(|r| (r.match_id.as_str(), r)).collect()
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("metadata file {0} not found")]
    MissingMetadataFile(PathBuf),
    #[error("duplicate match id {0:?}")]
    DuplicateMatchId(String),
    #[error("metadata line {line}: {reason}")]
    BadRow { line: u64, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Deserialize)]
struct MetaRow {
    match_id: String,
    sgf_path: String,
    black_id: String,
    white_id: String,
    date: String,
    #[serde(default)]
    group: Option<String>,
    #[serde(default)]
    black_group: Option<String>,
    #[serde(default)]
    white_group: Option<String>,
    #[serde(default)]
    tournament: Option<String>,
}

/// Reads the metadata CSV and parses every referenced SGF. Rows whose files
/// are missing or unparsable go to the skip report; only metadata problems
/// are fatal.
pub fn load_corpus(root: &Path, metadata: &Path) -> Result<MatchTable, CorpusError> {
    if !metadata.is_file() {
        return Err(CorpusError::MissingMetadataFile(metadata.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(metadata)?;
    let mut table = MatchTable::default();
    let mut seen = HashSet::new();
    for result in reader.deserialize::<MetaRow>() {
        let row = result?;
        let line = table.rows.len() as u64 + table.skipped.len() as u64 + 2;
        if !seen.insert(row.match_id.clone()) {
            return Err(CorpusError::DuplicateMatchId(row.match_id));
        }
        let date = parse_date(&row.date)
            .ok_or_else(|| CorpusError::BadRow { line, reason: format!("bad date {:?}", row.date) })?;
        let flag = |v: &Option<String>| {
            GroupFlag::parse(v.as_deref().unwrap_or(""))
                .ok_or_else(|| CorpusError::BadRow { line, reason: format!("bad group {v:?}") })
        };
        let group = flag(&row.group)?;
        let pick = |v: &Option<String>| -> Result<GroupFlag, CorpusError> {
            match v.as_deref().map(str::trim) {
                None | Some("") => Ok(group),
                Some(_) => flag(v),
            }
        };
        let groups = [pick(&row.black_group)?, pick(&row.white_group)?];
        let path = root.join(&row.sgf_path);
        let skip = |reason: String| SkipEntry { path: row.sgf_path.clone(), match_id: row.match_id.clone(), reason };
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) => {
                table.skipped.push(skip(format!("unreadable: {e}")));
                continue;
            }
        };
        let mut record = match parse_sgf(&text) {
            Ok(r) => r,
            Err(e) => {
                table.skipped.push(skip(e.to_string()));
                continue;
            }
        };
        record.source_path = row.sgf_path.clone();
        table.rows.push(MatchRow {
            month: Month::of(date),
            match_id: row.match_id,
            record,
            black_id: row.black_id,
            white_id: row.white_id,
            date,
            tournament: row.tournament.filter(|t| !t.is_empty()),
            groups,
        });
    }
    table.skipped.sort();
    Ok(table)
}
