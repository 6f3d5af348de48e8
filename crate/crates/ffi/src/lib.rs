//! C ABI over the gogap core: board and record handles plus the two-sample
//! tests. The header is generated into `include/gogap.h` at build time.
//!
//! Every fallible call returns a [`GogapStatus`]; on failure the message is
//! kept per thread and can be read with [`gogap_last_error`]. Handles are
//! opaque and owned by the caller until passed to their `_free` function.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gogap::board::{replay, BoardState, Color, Move, Point};
use gogap::sgf::{parse_sgf, serialize_sgf, GameRecord};
use gogap::stats::{self, Df, LeveneCenter, Tail, TestReport};
use libc::{c_char, c_int, size_t};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GogapStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    IllegalMove = 3,
    ParseError = 4,
    StatsError = 5,
    OutOfRange = 6,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GogapColor {
    Empty = 0,
    Black = 1,
    White = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GogapTail {
    Less = 0,
    Greater = 1,
    TwoSided = 2,
}

/// A move; `col` and `row` are -1 for a pass.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GogapMove {
    pub color: GogapColor,
    pub col: c_int,
    pub row: c_int,
}

/// Result of a two-sample test. Absent values are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GogapTestResult {
    pub statistic: f64,
    pub p: f64,
    pub df1: f64,
    pub df2: f64,
    pub effect_size: f64,
    pub n1: size_t,
    pub n2: size_t,
    /// Nonzero when the test could not be carried out (e.g. zero variance).
    pub degenerate: c_int,
}

pub struct GogapBoard {
    state: BoardState,
}

pub struct GogapRecord {
    record: GameRecord,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn fail(status: GogapStatus, msg: impl std::fmt::Display) -> GogapStatus {
    set_error(msg.to_string());
    status
}

fn guard(f: impl FnOnce() -> GogapStatus) -> GogapStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(GogapStatus::Panic, "internal panic"),
    }
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gogap_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gogap_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must come from a gogap function documented to return an owned
/// string, and must not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn gogap_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

fn color_in(c: GogapColor) -> Option<Color> {
    match c {
        GogapColor::Black => Some(Color::Black),
        GogapColor::White => Some(Color::White),
        GogapColor::Empty => None,
    }
}

fn color_out(c: Option<Color>) -> GogapColor {
    match c {
        Some(Color::Black) => GogapColor::Black,
        Some(Color::White) => GogapColor::White,
        None => GogapColor::Empty,
    }
}

fn move_out(m: &Move) -> GogapMove {
    let (col, row) = m.point.map_or((-1, -1), |p| (p.col as c_int, p.row as c_int));
    GogapMove { color: color_out(Some(m.color)), col, row }
}

fn point_in(col: c_int, row: c_int) -> Option<Point> {
    Some(Point::new(u8::try_from(col).ok()?, u8::try_from(row).ok()?))
}

// ---- boards

/// Empty board with black to move.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn gogap_board_new(size: c_int, komi: f64, out: *mut *mut GogapBoard) -> GogapStatus {
    guard(|| {
        if out.is_null() {
            return fail(GogapStatus::NullPointer, "out is NULL");
        }
        let Ok(size) = u8::try_from(size) else {
            return fail(GogapStatus::InvalidArgument, format!("unsupported board size {size}"));
        };
        match BoardState::new(size, komi) {
            Ok(state) => {
                *out = Box::into_raw(Box::new(GogapBoard { state }));
                GogapStatus::Ok
            }
            Err(e) => fail(GogapStatus::InvalidArgument, e),
        }
    })
}

/// # Safety
/// `board` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gogap_board_free(board: *mut GogapBoard) {
    if !board.is_null() {
        drop(Box::from_raw(board));
    }
}

/// # Safety
/// `board` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gogap_board_clone(board: *const GogapBoard, out: *mut *mut GogapBoard) -> GogapStatus {
    guard(|| {
        let (Some(b), false) = (board.as_ref(), out.is_null()) else {
            return fail(GogapStatus::NullPointer, "board or out is NULL");
        };
        *out = Box::into_raw(Box::new(GogapBoard { state: b.state.clone() }));
        GogapStatus::Ok
    })
}

/// Plays `mv` in place. On failure the board is unchanged.
///
/// # Safety
/// `board` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn gogap_board_play(board: *mut GogapBoard, mv: GogapMove) -> GogapStatus {
    guard(|| {
        let Some(b) = board.as_mut() else {
            return fail(GogapStatus::NullPointer, "board is NULL");
        };
        let Some(color) = color_in(mv.color) else {
            return fail(GogapStatus::InvalidArgument, "move color must be black or white");
        };
        let point = if mv.col == -1 && mv.row == -1 {
            None
        } else {
            match point_in(mv.col, mv.row) {
                Some(p) => Some(p),
                None => return fail(GogapStatus::IllegalMove, format!("point ({}, {}) is off the board", mv.col, mv.row)),
            }
        };
        match b.state.apply_move(&Move { color, point }) {
            Ok(next) => {
                b.state = next;
                GogapStatus::Ok
            }
            Err(e) => fail(GogapStatus::IllegalMove, e),
        }
    })
}

/// 1 when `mv` is legal, 0 otherwise (including a NULL board).
///
/// # Safety
/// `board` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gogap_board_is_legal(board: *const GogapBoard, mv: GogapMove) -> c_int {
    let Some(b) = board.as_ref() else { return 0 };
    let Some(color) = color_in(mv.color) else { return 0 };
    let point = if mv.col == -1 && mv.row == -1 {
        None
    } else {
        match point_in(mv.col, mv.row) {
            Some(p) => Some(p),
            None => return 0,
        }
    };
    b.state.is_legal(&Move { color, point }) as c_int
}

/// # Safety
/// `board` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gogap_board_get(board: *const GogapBoard, col: c_int, row: c_int, out: *mut GogapColor) -> GogapStatus {
    guard(|| {
        let (Some(b), false) = (board.as_ref(), out.is_null()) else {
            return fail(GogapStatus::NullPointer, "board or out is NULL");
        };
        match point_in(col, row).filter(|p| p.on_board(b.state.size())) {
            Some(p) => {
                *out = color_out(b.state.get(p));
                GogapStatus::Ok
            }
            None => fail(GogapStatus::OutOfRange, format!("point ({col}, {row}) is off the board")),
        }
    })
}

/// # Safety
/// `board` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gogap_board_to_move(board: *const GogapBoard) -> GogapColor {
    board.as_ref().map_or(GogapColor::Empty, |b| color_out(Some(b.state.to_move())))
}

/// Zobrist key of the position (stones, side to move, ko point); 0 for NULL.
///
/// # Safety
/// `board` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gogap_board_key(board: *const GogapBoard) -> u64 {
    board.as_ref().map_or(0, |b| b.state.position_key())
}

/// Stones captured by `color`.
///
/// # Safety
/// `board` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gogap_board_prisoners(board: *const GogapBoard, color: GogapColor) -> u32 {
    match (board.as_ref(), color_in(color)) {
        (Some(b), Some(c)) => b.state.prisoners(c),
        _ => 0,
    }
}

/// # Safety
/// `board` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gogap_board_size(board: *const GogapBoard) -> c_int {
    board.as_ref().map_or(0, |b| b.state.size() as c_int)
}

// ---- records

/// Parses SGF text (mainline only).
///
/// # Safety
/// `text` must be a NUL-terminated UTF-8 string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gogap_record_parse(text: *const c_char, out: *mut *mut GogapRecord) -> GogapStatus {
    guard(|| {
        if text.is_null() || out.is_null() {
            return fail(GogapStatus::NullPointer, "text or out is NULL");
        }
        let Ok(text) = CStr::from_ptr(text).to_str() else {
            return fail(GogapStatus::ParseError, "SGF text is not UTF-8");
        };
        match parse_sgf(text) {
            Ok(record) => {
                *out = Box::into_raw(Box::new(GogapRecord { record }));
                GogapStatus::Ok
            }
            Err(e) => fail(GogapStatus::ParseError, e),
        }
    })
}

/// # Safety
/// `record` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gogap_record_free(record: *mut GogapRecord) {
    if !record.is_null() {
        drop(Box::from_raw(record));
    }
}

/// # Safety
/// `record` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gogap_record_size(record: *const GogapRecord) -> c_int {
    record.as_ref().map_or(0, |r| r.record.size as c_int)
}

/// # Safety
/// `record` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gogap_record_move_count(record: *const GogapRecord) -> size_t {
    record.as_ref().map_or(0, |r| r.record.moves.len())
}

/// # Safety
/// `record` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gogap_record_move(record: *const GogapRecord, index: size_t, out: *mut GogapMove) -> GogapStatus {
    guard(|| {
        let (Some(r), false) = (record.as_ref(), out.is_null()) else {
            return fail(GogapStatus::NullPointer, "record or out is NULL");
        };
        match r.record.moves.get(index) {
            Some(m) => {
                *out = move_out(m);
                GogapStatus::Ok
            }
            None => fail(GogapStatus::OutOfRange, format!("move {index} of {}", r.record.moves.len())),
        }
    })
}

/// Canonical SGF text. The caller frees it with [`gogap_string_free`].
///
/// # Safety
/// `record` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gogap_record_to_sgf(record: *const GogapRecord, out: *mut *mut c_char) -> GogapStatus {
    guard(|| {
        let (Some(r), false) = (record.as_ref(), out.is_null()) else {
            return fail(GogapStatus::NullPointer, "record or out is NULL");
        };
        match CString::new(serialize_sgf(&r.record)) {
            Ok(s) => {
                *out = s.into_raw();
                GogapStatus::Ok
            }
            Err(_) => fail(GogapStatus::InvalidArgument, "record text contains NUL"),
        }
    })
}

/// Board after the first `ply` moves of the record.
///
/// # Safety
/// `record` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gogap_record_position(record: *const GogapRecord, ply: size_t, out: *mut *mut GogapBoard) -> GogapStatus {
    guard(|| {
        let (Some(r), false) = (record.as_ref(), out.is_null()) else {
            return fail(GogapStatus::NullPointer, "record or out is NULL");
        };
        if ply > r.record.moves.len() {
            return fail(GogapStatus::OutOfRange, format!("ply {ply} of {}", r.record.moves.len()));
        }
        let mut prefix = r.record.clone();
        prefix.moves.truncate(ply);
        match replay(&prefix) {
            Ok(mut states) => {
                let state = states.pop().expect("replay yields the initial position");
                *out = Box::into_raw(Box::new(GogapBoard { state }));
                GogapStatus::Ok
            }
            Err(e) => fail(GogapStatus::IllegalMove, e),
        }
    })
}

// ---- statistics

fn tail_in(t: GogapTail) -> Tail {
    match t {
        GogapTail::Less => Tail::Less,
        GogapTail::Greater => Tail::Greater,
        GogapTail::TwoSided => Tail::TwoSided,
    }
}

fn result_out(r: &TestReport) -> GogapTestResult {
    let (df1, df2) = match r.df {
        Some(Df::One(d)) => (d, f64::NAN),
        Some(Df::Pair(a, b)) => (a, b),
        None => (f64::NAN, f64::NAN),
    };
    GogapTestResult {
        statistic: r.statistic.unwrap_or(f64::NAN),
        p: r.p.unwrap_or(f64::NAN),
        df1,
        df2,
        effect_size: r.effect_size.unwrap_or(f64::NAN),
        n1: r.n1,
        n2: r.n2,
        degenerate: r.degenerate as c_int,
    }
}

unsafe fn two_sample(
    x: *const f64,
    nx: size_t,
    y: *const f64,
    ny: size_t,
    out: *mut GogapTestResult,
    test: impl FnOnce(&[f64], &[f64]) -> Result<TestReport, stats::StatsError>,
) -> GogapStatus {
    guard(|| {
        if x.is_null() || y.is_null() || out.is_null() {
            return fail(GogapStatus::NullPointer, "sample or out is NULL");
        }
        let (x, y) = (std::slice::from_raw_parts(x, nx), std::slice::from_raw_parts(y, ny));
        match test(x, y) {
            Ok(r) => {
                *out = result_out(&r);
                GogapStatus::Ok
            }
            Err(e) => fail(GogapStatus::StatsError, e),
        }
    })
}

/// Welch's unequal-variance t test; `df1` holds the Welch-Satterthwaite
/// degrees of freedom and `effect_size` Cohen's d.
///
/// # Safety
/// `x` and `y` must point to `nx` and `ny` readable doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gogap_welch_t(x: *const f64, nx: size_t, y: *const f64, ny: size_t, tail: GogapTail, out: *mut GogapTestResult) -> GogapStatus {
    two_sample(x, nx, y, ny, out, |x, y| stats::welch_t(x, y, tail_in(tail)))
}

/// Wilcoxon rank-sum test; `statistic` is the rank sum of `x`.
///
/// # Safety
/// As for [`gogap_welch_t`].
#[no_mangle]
pub unsafe extern "C" fn gogap_wilcoxon_rank_sum(x: *const f64, nx: size_t, y: *const f64, ny: size_t, tail: GogapTail, out: *mut GogapTestResult) -> GogapStatus {
    two_sample(x, nx, y, ny, out, |x, y| stats::wilcoxon_rank_sum(x, y, tail_in(tail)))
}

/// Two-sample Kolmogorov-Smirnov test.
///
/// # Safety
/// As for [`gogap_welch_t`].
#[no_mangle]
pub unsafe extern "C" fn gogap_ks_two_sample(x: *const f64, nx: size_t, y: *const f64, ny: size_t, tail: GogapTail, out: *mut GogapTestResult) -> GogapStatus {
    two_sample(x, nx, y, ny, out, |x, y| stats::ks_two_sample(x, y, tail_in(tail)))
}

/// Levene's test; `median` nonzero selects the Brown-Forsythe center.
///
/// # Safety
/// As for [`gogap_welch_t`].
#[no_mangle]
pub unsafe extern "C" fn gogap_levene(
    x: *const f64,
    nx: size_t,
    y: *const f64,
    ny: size_t,
    median: c_int,
    tail: GogapTail,
    out: *mut GogapTestResult,
) -> GogapStatus {
    let center = if median != 0 { LeveneCenter::Median } else { LeveneCenter::Mean };
    two_sample(x, nx, y, ny, out, |x, y| stats::levene(x, y, center, tail_in(tail)))
}
