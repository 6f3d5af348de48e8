//! Human-AI gap per move and its aggregations.
//!
//! The gap of one move is the engine's value of its own best move minus its
//! value of the move the human played, in win-probability percentage points.
//! Gaps are aggregated into move-number bins per era and into player-month
//! panel cells.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::board::{replay, BoardError, Color, Move};
use crate::engine::{Engine, EngineError, EngineEvaluation, Evaluator};
use crate::month::Month;
use crate::sgf::{GroupFlag, MatchRow, MatchTable};
use crate::tables::{self, TableError};

pub const GAPS_SCHEMA: &str = "gogap.gaps/1";
pub const PANEL_SCHEMA: &str = "gogap.panel/1";
pub const BINS_SCHEMA: &str = "gogap.bins/1";

pub const GAPS_COLUMNS: &[&str] =
    &["match_id", "player_id", "color", "ply", "own_move_index", "delta_pp", "missing", "month", "era", "engine_id", "date"];
pub const PANEL_COLUMNS: &[&str] = &["player_id", "month", "mean_gap_pp", "n_matches", "n_moves", "group"];
pub const BINS_COLUMNS: &[&str] = &["era", "bin", "first_ply", "last_ply", "mean_gap_pp", "n"];

#[derive(Debug, Error)]
pub enum GapError {
    #[error("match {match_id}: {source}")]
    IllegalRecordedMove { match_id: String, source: BoardError },
    #[error("match {match_id}: {source}")]
    Engine { match_id: String, source: EngineError },
}

/// Whether the move limit counts plies of the whole match or each player's
/// own moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KUnit {
    #[default]
    OwnMoves,
    Plies,
}

impl std::str::FromStr for KUnit {
    type Err = String;

    fn from_str(s: &str) -> Result<KUnit, String> {
        match s {
            "own_moves" => Ok(KUnit::OwnMoves),
            "plies" => Ok(KUnit::Plies),
            _ => Err(format!("unknown k_unit {s:?} (own_moves|plies)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Era {
    Before,
    Mid,
    After,
}

impl Era {
    pub const ALL: [Era; 3] = [Era::Before, Era::Mid, Era::After];

    fn index(self) -> usize {
        self as usize
    }
}

/// Two cut dates splitting the timeline into three eras. Each era is closed
/// on the left: a match on a cut date belongs to the later era.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EraConfig {
    pub cut_1: NaiveDate,
    pub cut_2: NaiveDate,
    pub labels: [String; 3],
}

impl Default for EraConfig {
    fn default() -> Self {
        EraConfig {
            cut_1: NaiveDate::from_ymd_opt(2016, 3, 15).unwrap(),
            cut_2: NaiveDate::from_ymd_opt(2017, 10, 25).unwrap(),
            labels: ["before".into(), "mid".into(), "after".into()],
        }
    }
}

impl EraConfig {
    pub fn new(cut_1: NaiveDate, cut_2: NaiveDate) -> Result<EraConfig, String> {
        if cut_1 >= cut_2 {
            return Err(format!("era cut {cut_1} must precede {cut_2}"));
        }
        Ok(EraConfig { cut_1, cut_2, ..Default::default() })
    }

    pub fn classify(&self, date: NaiveDate) -> Era {
        if date < self.cut_1 {
            Era::Before
        } else if date < self.cut_2 {
            Era::Mid
        } else {
            Era::After
        }
    }

    pub fn label(&self, era: Era) -> &str {
        &self.labels[era.index()]
    }

    pub fn era_of_label(&self, label: &str) -> Option<Era> {
        Era::ALL.into_iter().find(|e| self.label(*e) == label)
    }
}

/// One gap observation.
#[derive(Debug, Clone, PartialEq)]
pub struct GapRecord {
    pub match_id: String,
    pub player_id: String,
    pub color: Color,
    /// 1-based ply within the match.
    pub ply: u32,
    /// 1-based index among this player's moves.
    pub own_move_index: u32,
    /// Percentage points; `None` when the engine could not score the move.
    pub delta: Option<f64>,
    pub engine_id: String,
    pub month: Month,
    pub date: NaiveDate,
}

impl GapRecord {
    pub fn missing(&self) -> bool {
        self.delta.is_none()
    }
}

/// Gap in percentage points between the engine's best move and the human
/// move, given the engine's value of the human move.
///
/// Exactly zero when the human played the best move or a move the engine
/// values equally.
pub fn gap_for_move(eval: &EngineEvaluation, human_move: &Move, human_value: f64) -> f64 {
    let best = eval.best();
    if *human_move == eval.best_move || human_value == best.win_prob {
        return 0.0;
    }
    100.0 * (best.win_prob - human_value)
}

/// Gaps of one match, for the first `k_limit` plies or own moves.
pub fn match_gap_series<E: Engine>(
    row: &MatchRow,
    evaluator: &mut Evaluator<'_, E>,
    k_limit: u32,
    k_unit: KUnit,
) -> Result<Vec<GapRecord>, GapError> {
    let states = replay(&row.record)
        .map_err(|source| GapError::IllegalRecordedMove { match_id: row.match_id.clone(), source })?;
    let engine_id = evaluator.params().engine_id.clone();
    let mut own = [0u32; 2];
    let mut out = Vec::new();
    for (k, mv) in row.record.moves.iter().enumerate() {
        let ply = k as u32 + 1;
        own[mv.color.index()] += 1;
        let own_idx = own[mv.color.index()];
        let selected = match k_unit {
            KUnit::Plies => ply <= k_limit,
            KUnit::OwnMoves => own_idx <= k_limit,
        };
        if !selected {
            if k_unit == KUnit::Plies || own.iter().all(|n| *n > k_limit) {
                break;
            }
            continue;
        }
        let state = &states[k];
        let delta = match score_move(evaluator, state, mv) {
            Ok(d) => Some(d),
            Err(EngineError::MissingEvaluation(_)) => None,
            Err(source) => return Err(GapError::Engine { match_id: row.match_id.clone(), source }),
        };
        out.push(GapRecord {
            match_id: row.match_id.clone(),
            player_id: row.player(mv.color).to_string(),
            color: mv.color,
            ply,
            own_move_index: own_idx,
            delta,
            engine_id: engine_id.clone(),
            month: row.month,
            date: row.date,
        });
    }
    Ok(out)
}

fn score_move<E: Engine>(
    evaluator: &mut Evaluator<'_, E>,
    state: &crate::board::BoardState,
    mv: &Move,
) -> Result<f64, EngineError> {
    let eval = evaluator.evaluate(state)?;
    let human = evaluator.evaluate_move_with(state, &eval, mv)?;
    let d = gap_for_move(&eval, mv, human);
    if !d.is_finite() {
        return Err(EngineError::MissingEvaluation("non-finite gap".into()));
    }
    Ok(d)
}

/// Mean of values summed in ascending order, so the result does not depend
/// on input order.
fn canonical_mean(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    Some(values.iter().sum::<f64>() / values.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinRow {
    pub era: Era,
    /// 0-based bin; covers plies `bin * size + 1 ..= (bin + 1) * size`.
    pub bin: u32,
    pub first_ply: u32,
    pub last_ply: u32,
    pub mean_gap: Option<f64>,
    pub n: usize,
}

/// Mean gap per (era, ply bin). Bins run from the first to the last bin
/// observed in any era; empty cells have `n = 0` and no mean.
pub fn bin_by_move(gaps: &[GapRecord], bin_size: u32, eras: &EraConfig) -> Vec<BinRow> {
    assert!(bin_size >= 1, "bin size must be positive");
    let mut cells: BTreeMap<(Era, u32), Vec<f64>> = BTreeMap::new();
    let mut max_bin = None;
    for g in gaps {
        let bin = (g.ply - 1) / bin_size;
        max_bin = max_bin.max(Some(bin));
        if let Some(d) = g.delta {
            cells.entry((eras.classify(g.date), bin)).or_default().push(d);
        }
    }
    let Some(max_bin) = max_bin else { return Vec::new() };
    let mut rows = Vec::new();
    for era in Era::ALL {
        for bin in 0..=max_bin {
            let mut vals = cells.remove(&(era, bin)).unwrap_or_default();
            rows.push(BinRow {
                era,
                bin,
                first_ply: bin * bin_size + 1,
                last_ply: (bin + 1) * bin_size,
                n: vals.len(),
                mean_gap: canonical_mean(&mut vals),
            });
        }
    }
    rows
}

/// Player-month aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelCell {
    pub player_id: String,
    pub month: Month,
    pub mean_gap: f64,
    pub n_matches: usize,
    pub n_moves_used: usize,
    pub group: GroupFlag,
}

/// Builds the player-month panel: the mean over the player's matches that
/// month of each match's mean gap. A match's mean is taken over its
/// non-missing moves; matches with none are left out.
pub fn build_panel(gaps: &[GapRecord], table: &MatchTable) -> Vec<PanelCell> {
    let index = table.index();
    // (player, month) -> match -> deltas
    let mut by_cell: BTreeMap<(&str, Month), BTreeMap<&str, Vec<f64>>> = BTreeMap::new();
    let mut flags: BTreeMap<(&str, Month), Vec<GroupFlag>> = BTreeMap::new();
    for g in gaps {
        let key = (g.player_id.as_str(), g.month);
        let per_match = by_cell.entry(key).or_default().entry(g.match_id.as_str()).or_default();
        if let Some(d) = g.delta {
            per_match.push(d);
        }
        if let Some(row) = index.get(g.match_id.as_str()) {
            flags.entry(key).or_default().push(row.group_of(g.color));
        }
    }
    let mut cells = Vec::new();
    for ((player, month), matches) in by_cell {
        let mut match_means = Vec::new();
        let mut n_moves = 0;
        for (_, mut deltas) in matches {
            n_moves += deltas.len();
            if let Some(m) = canonical_mean(&mut deltas) {
                match_means.push(m);
            }
        }
        let n_matches = match_means.len();
        let Some(mean_gap) = canonical_mean(&mut match_means) else { continue };
        cells.push(PanelCell {
            player_id: player.to_string(),
            month,
            mean_gap,
            n_matches,
            n_moves_used: n_moves,
            group: combine_flags(flags.get(&(player, month)).map(Vec::as_slice).unwrap_or(&[])),
        });
    }
    cells
}

/// Agreeing non-`none` flags win; conflicting flags yield `none`.
fn combine_flags(flags: &[GroupFlag]) -> GroupFlag {
    let mut out = GroupFlag::None;
    for &f in flags {
        if f == GroupFlag::None {
            continue;
        }
        if out != GroupFlag::None && out != f {
            return GroupFlag::None;
        }
        out = f;
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
struct GapRow {
    match_id: String,
    player_id: String,
    color: String,
    ply: u32,
    own_move_index: u32,
    delta_pp: Option<f64>,
    missing: bool,
    month: Month,
    era: String,
    engine_id: String,
    date: NaiveDate,
}

/// Writes the gap table: `match_id, player_id, color, ply, own_move_index,
/// delta_pp, missing, month, era, engine_id, date`.
pub fn write_gaps<W: Write>(out: W, gaps: &[GapRecord], eras: &EraConfig) -> std::io::Result<()> {
    let mut w = tables::writer(out, GAPS_SCHEMA, GAPS_COLUMNS)?;
    for g in gaps {
        w.serialize(GapRow {
            match_id: g.match_id.clone(),
            player_id: g.player_id.clone(),
            color: g.color.to_string(),
            ply: g.ply,
            own_move_index: g.own_move_index,
            delta_pp: g.delta,
            missing: g.missing(),
            month: g.month,
            era: eras.label(eras.classify(g.date)).to_string(),
            engine_id: g.engine_id.clone(),
            date: g.date,
        })?;
    }
    w.flush()
}

pub fn read_gaps(path: &Path) -> Result<Vec<GapRecord>, TableError> {
    let rows: Vec<GapRow> = tables::read_rows(path, GAPS_SCHEMA)?;
    rows.into_iter()
        .enumerate()
        .map(|(i, r)| {
            let bad = |reason: &str| TableError::Row { path: path.display().to_string(), row: i + 1, reason: reason.into() };
            let color = Color::from_letter(&r.color).ok_or_else(|| bad("bad color"))?;
            if r.missing != r.delta_pp.is_none() {
                return Err(bad("missing flag disagrees with delta_pp"));
            }
            if r.delta_pp.is_some_and(|d| !d.is_finite()) {
                return Err(bad("non-finite delta_pp"));
            }
            Ok(GapRecord {
                match_id: r.match_id,
                player_id: r.player_id,
                color,
                ply: r.ply,
                own_move_index: r.own_move_index,
                delta: r.delta_pp,
                engine_id: r.engine_id,
                month: r.month,
                date: r.date,
            })
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct PanelRow {
    player_id: String,
    month: Month,
    mean_gap_pp: f64,
    n_matches: usize,
    n_moves: usize,
    group: GroupFlag,
}

pub fn write_panel<W: Write>(out: W, cells: &[PanelCell]) -> std::io::Result<()> {
    let mut w = tables::writer(out, PANEL_SCHEMA, PANEL_COLUMNS)?;
    for c in cells {
        w.serialize(PanelRow {
            player_id: c.player_id.clone(),
            month: c.month,
            mean_gap_pp: c.mean_gap,
            n_matches: c.n_matches,
            n_moves: c.n_moves_used,
            group: c.group,
        })?;
    }
    w.flush()
}

pub fn read_panel(path: &Path) -> Result<Vec<PanelCell>, TableError> {
    let rows: Vec<PanelRow> = tables::read_rows(path, PANEL_SCHEMA)?;
    Ok(rows
        .into_iter()
        .map(|r| PanelCell {
            player_id: r.player_id,
            month: r.month,
            mean_gap: r.mean_gap_pp,
            n_matches: r.n_matches,
            n_moves_used: r.n_moves,
            group: r.group,
        })
        .collect())
}

#[derive(Debug, Serialize)]
struct BinCsvRow<'a> {
    era: &'a str,
    bin: u32,
    first_ply: u32,
    last_ply: u32,
    mean_gap_pp: Option<f64>,
    n: usize,
}

pub fn write_bins<W: Write>(out: W, rows: &[BinRow], eras: &EraConfig) -> std::io::Result<()> {
    let mut w = tables::writer(out, BINS_SCHEMA, BINS_COLUMNS)?;
    for r in rows {
        w.serialize(BinCsvRow {
            era: eras.label(r.era),
            bin: r.bin,
            first_ply: r.first_ply,
            last_ply: r.last_ply,
            mean_gap_pp: r.mean_gap,
            n: r.n,
        })?;
    }
    w.flush()
}
