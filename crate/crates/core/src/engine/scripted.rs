//! Deterministic stand-in engine.
//!
//! The value of a position for the player to move is
//! `logistic(score / SCORE_SCALE)` with the integer score
//!
//! ```text
//! score = STONE_WEIGHT   * (own stones - opponent stones)
//!       + LIBERTY_WEIGHT * (own liberties - opponent liberties)
//!       + CENTER_WEIGHT  * (own centrality - opponent centrality)
//! ```
//!
//! Liberties are summed per group. Centrality of a stone on an `n`-board is
//! `2(n-1) - |2c - (n-1)| - |2r - (n-1)|`, the doubled Manhattan distance
//! from the edge-most point, so the whole score stays in integers.
//!
//! Candidates are every legal move (pass included). A candidate's win
//! probability is `1 - value(successor)`, ranked by descending win
//! probability, ties broken by descending integer score, then row-major
//! point order with pass last. The candidate at rank `r` is credited
//! `max(1, visits_budget >> r)` visits.

use super::{Candidate, Engine, EngineError, EngineEvaluation, EngineParams};
use crate::board::{BoardState, Point};

pub const STONE_WEIGHT: i64 = 16;
pub const LIBERTY_WEIGHT: i64 = 4;
pub const CENTER_WEIGHT: i64 = 1;
pub const SCORE_SCALE: f64 = 64.0;

/// Identifier stamped on scripted evaluations.
pub const SCRIPTED_ENGINE_ID: &str = "scripted-v1";

#[derive(Debug, Clone)]
pub struct ScriptedEngine {
    id: String,
}

impl ScriptedEngine {
    pub fn new() -> ScriptedEngine {
        ScriptedEngine { id: SCRIPTED_ENGINE_ID.to_string() }
    }
}

impl Default for ScriptedEngine {
    fn default() -> Self {
        ScriptedEngine::new()
    }
}

/// Per-color (stones, liberties summed over groups, centrality).
pub fn features(state: &BoardState) -> [[i64; 3]; 2] {
    let n = state.size() as i64;
    let mut out = [[0i64; 3]; 2];
    let mut counted = vec![false; (n * n) as usize];
    for (p, c) in state.stones() {
        let f = &mut out[c.index()];
        f[0] += 1;
        f[2] += centrality(p, state.size());
        let idx = p.row as usize * n as usize + p.col as usize;
        if !counted[idx] {
            let (stones, libs) = state.group(p);
            for s in stones {
                counted[s.row as usize * n as usize + s.col as usize] = true;
            }
            f[1] += libs as i64;
        }
    }
    out
}

/// Integer score from the perspective of the player to move.
pub fn score(state: &BoardState) -> i64 {
    let f = features(state);
    let me = state.to_move().index();
    let op = state.to_move().opponent().index();
    let d = |k: usize| f[me][k] - f[op][k];
    STONE_WEIGHT * d(0) + LIBERTY_WEIGHT * d(1) + CENTER_WEIGHT * d(2)
}

pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Win probability of the player to move.
pub fn value(state: &BoardState) -> f64 {
    logistic(score(state) as f64 / SCORE_SCALE)
}

impl Engine for ScriptedEngine {
    fn engine_id(&self) -> &str {
        &self.id
    }

    fn analyze(&mut self, state: &BoardState, params: &EngineParams) -> Result<EngineEvaluation, EngineError> {
        let mut ranked: Vec<(f64, i64, usize, Candidate)> = state
            .legal_moves()
            .into_iter()
            .enumerate()
            .map(|(order, mv)| {
                let next = state.apply_move(&mv).expect("legal move applies");
                let s = score(&next);
                let win_prob = 1.0 - logistic(s as f64 / SCORE_SCALE);
                (win_prob, -s, order, Candidate { mv, win_prob, visits: 1 })
            })
            .collect();
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.cmp(&a.1)).then(a.2.cmp(&b.2)));
        let candidates: Vec<Candidate> = ranked
            .into_iter()
            .take(params.max_candidates)
            .enumerate()
            .map(|(rank, (_, _, _, mut c))| {
                c.visits = if rank >= 32 { 1 } else { (params.visits_budget >> rank).max(1) };
                c
            })
            .collect();
        Ok(EngineEvaluation {
            state_key: state.position_key(),
            to_move: state.to_move(),
            best_move: candidates[0].mv,
            candidates,
            root_win_prob: value(state),
            engine_id: self.id.clone(),
            visits_budget: params.visits_budget,
        })
    }
}

pub fn centrality(p: Point, size: u8) -> i64 {
    let n = size as i64;
    2 * (n - 1) - (2 * p.col as i64 - (n - 1)).abs() - (2 * p.row as i64 - (n - 1)).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::board::{Color, Move};

    #[test]
    fn empty_board_ranking_is_reproducible() {
        let s = BoardState::new(19, 6.5).unwrap();
        let p = EngineParams::new(SCRIPTED_ENGINE_ID);
        let a = ScriptedEngine::new().analyze(&s, &p).unwrap();
        let b = ScriptedEngine::new().analyze(&s, &p).unwrap();
        assert_eq!(a, b);
        // tengen maximizes centrality and liberties; it wins every tie break
        assert_eq!(a.best_move, Move::play(Color::Black, 9, 9));
        assert_eq!(a.candidates.len(), 362);
        // one stone with four liberties, fully central: 16 + 16 + 36
        let after = s.apply_move(&a.best_move).unwrap();
        assert_eq!(score(&after), -(16 + 16 + 36));
        assert_eq!(a.root_win_prob, 0.5);
        assert_eq!(a.candidates[0].visits, 64);
        assert_eq!(a.candidates[1].visits, 32);
        assert_eq!(a.candidates.last().unwrap().visits, 1);
    }

    #[test]
    fn max_candidates_truncates() {
        let s = BoardState::new(9, 7.0).unwrap();
        let p = EngineParams { max_candidates: 5, ..EngineParams::new(SCRIPTED_ENGINE_ID) };
        let e = ScriptedEngine::new().analyze(&s, &p).unwrap();
        assert_eq!(e.candidates.len(), 5);
        assert!(e.validate().is_ok());
    }

    #[test]
    fn centrality_values() {
        assert_eq!(centrality(Point::new(9, 9), 19), 36);
        assert_eq!(centrality(Point::new(0, 0), 19), 0);
        assert_eq!(centrality(Point::new(3, 3), 19), 12);
    }
}
