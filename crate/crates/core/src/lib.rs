//! Measures how closely human Go moves track a strong engine's choices.
//!
//! The pipeline: [`sgf`] records are replayed by the [`board`] kernel, every
//! position is scored through an [`engine`], [`gap`] turns the scores into
//! per-move gaps and player-month panels, and [`econ`] / [`stats`] run the
//! trend, difference-in-differences and cheat-detection analyses.

pub mod board;
pub mod cli;
pub mod econ;
pub mod engine;
pub mod gap;
pub mod month;
pub mod sgf;
pub mod sim;
pub mod stats;
pub mod tables;

pub use board::{BoardError, BoardState, Color, Move, Point};
pub use month::Month;
pub use sgf::{GameRecord, MatchTable};
