//! Analysis engine abstraction.
//!
//! An [`Engine`] turns a [`BoardState`] into an [`EngineEvaluation`]: ranked
//! candidate moves with win probabilities from the perspective of the player
//! to move. [`Evaluator`] layers the evaluation cache and the forced-move
//! fallback of [`Evaluator::evaluate_move`] on top of any engine.

pub mod cache;
pub mod protocol;
pub mod scripted;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::board::{BoardError, BoardState, Color, Move};
pub use cache::{CacheError, CacheKey, EvalCache};
pub use protocol::{EngineCommand, Perspective, ProtocolEngine};
pub use scripted::ScriptedEngine;

/// Candidates with fewer visits than this are treated as raw priors and the
/// move is re-scored with a forced query on the successor position.
pub const MIN_VISITS: u32 = 2;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("engine unavailable: {0}")]
    EngineUnavailable(String),
    #[error("engine did not answer within {0:?}")]
    EngineTimeout(Duration),
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("engine could not score the move: {0}")]
    MissingEvaluation(String),
    #[error("illegal query: {0}")]
    IllegalMove(#[from] BoardError),
    #[error(transparent)]
    Cache(#[from] CacheError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    #[serde(rename = "move")]
    pub mv: Move,
    /// Win probability for the player to move if this move is played.
    pub win_prob: f64,
    pub visits: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineEvaluation {
    pub state_key: u64,
    pub to_move: Color,
    /// Sorted by descending `win_prob`.
    pub candidates: Vec<Candidate>,
    pub best_move: Move,
    /// Value of the position itself for the player to move.
    pub root_win_prob: f64,
    pub engine_id: String,
    pub visits_budget: u32,
}

impl EngineEvaluation {
    pub fn best(&self) -> &Candidate {
        &self.candidates[0]
    }

    pub fn candidate(&self, mv: &Move) -> Option<&Candidate> {
        self.candidates.iter().find(|c| c.mv == *mv)
    }

    /// Checks the ordering and range invariants every engine adapter must
    /// uphold.
    pub fn validate(&self) -> Result<(), String> {
        let Some(first) = self.candidates.first() else {
            return Err("no candidates".into());
        };
        if first.mv != self.best_move {
            return Err("best_move is not the top candidate".into());
        }
        if !(0.0..=1.0).contains(&self.root_win_prob) {
            return Err(format!("root win probability {} out of range", self.root_win_prob));
        }
        for c in &self.candidates {
            if !(0.0..=1.0).contains(&c.win_prob) {
                return Err(format!("win probability {} out of range", c.win_prob));
            }
            if c.visits < 1 {
                return Err("candidate with zero visits".into());
            }
            if c.mv.color != self.to_move {
                return Err(format!("candidate {} for the wrong color", c.mv));
            }
        }
        if self.candidates.windows(2).any(|w| w[0].win_prob < w[1].win_prob) {
            return Err("candidates not sorted by win probability".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineParams {
    pub engine_id: String,
    pub visits_budget: u32,
    pub max_candidates: usize,
    /// Overrides the komi carried by the state; `None` passes the record's
    /// komi through.
    pub komi: Option<f64>,
    pub ruleset: String,
    pub per_query_timeout: Duration,
}

impl EngineParams {
    pub fn new(engine_id: impl Into<String>) -> EngineParams {
        EngineParams {
            engine_id: engine_id.into(),
            visits_budget: 64,
            max_candidates: 400,
            komi: None,
            ruleset: "korean".into(),
            per_query_timeout: Duration::from_secs(60),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.visits_budget < 1 {
            return Err("visits_budget must be at least 1".into());
        }
        if self.max_candidates < 1 {
            return Err("max_candidates must be at least 1".into());
        }
        Ok(())
    }

    pub fn komi_for(&self, state: &BoardState) -> f64 {
        self.komi.unwrap_or_else(|| state.komi())
    }

    pub fn cache_key(&self, state: &BoardState) -> CacheKey {
        CacheKey::new(
            state.position_key(),
            state.to_move(),
            &self.engine_id,
            self.visits_budget,
            self.komi_for(state),
            &self.ruleset,
        )
    }
}

/// Anything that can analyze a position. One value is one engine session and
/// is owned by a single worker.
pub trait Engine: Send {
    fn engine_id(&self) -> &str;

    fn analyze(&mut self, state: &BoardState, params: &EngineParams) -> Result<EngineEvaluation, EngineError>;
}

impl<E: Engine + ?Sized> Engine for Box<E> {
    fn engine_id(&self) -> &str {
        (**self).engine_id()
    }

    fn analyze(&mut self, state: &BoardState, params: &EngineParams) -> Result<EngineEvaluation, EngineError> {
        (**self).analyze(state, params)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct EvalStats {
    pub engine_queries: u64,
    pub cache_hits: u64,
    pub forced_queries: u64,
}

/// An engine session plus an optional shared cache.
pub struct Evaluator<'c, E: Engine> {
    engine: E,
    params: EngineParams,
    cache: Option<&'c EvalCache>,
    stats: EvalStats,
}

impl<'c, E: Engine> Evaluator<'c, E> {
    pub fn new(engine: E, params: EngineParams, cache: Option<&'c EvalCache>) -> Evaluator<'c, E> {
        Evaluator { engine, params, cache, stats: EvalStats::default() }
    }

    pub fn params(&self) -> &EngineParams {
        &self.params
    }

    pub fn stats(&self) -> EvalStats {
        self.stats
    }

    pub fn engine_mut(&mut self) -> &mut E {
        &mut self.engine
    }

    pub fn evaluate(&mut self, state: &BoardState) -> Result<EngineEvaluation, EngineError> {
        let key = self.params.cache_key(state);
        if let Some(cache) = self.cache {
            // a corrupt entry is flagged by the cache and treated as a miss
            match cache.get(&key) {
                Ok(Some(hit)) => {
                    self.stats.cache_hits += 1;
                    return Ok(hit);
                }
                Ok(None) | Err(CacheError::CacheCorrupt { .. }) => {}
                Err(e) => return Err(e.into()),
            }
        }
        self.stats.engine_queries += 1;
        let eval = self.engine.analyze(state, &self.params)?;
        eval.validate().map_err(EngineError::ProtocolViolation)?;
        if eval.state_key != state.position_key() || eval.to_move != state.to_move() {
            return Err(EngineError::ProtocolViolation("evaluation is for a different position".into()));
        }
        if let Some(cache) = self.cache {
            cache.put(&key, &eval)?;
        }
        Ok(eval)
    }

    /// Win probability, for the player to move at `state`, after `mv`.
    ///
    /// Uses the candidate's value when the engine searched it at least
    /// [`MIN_VISITS`] times; otherwise analyzes the successor and flips its
    /// root value back to the original mover.
    pub fn evaluate_move(&mut self, state: &BoardState, mv: &Move) -> Result<f64, EngineError> {
        let eval = self.evaluate(state)?;
        self.evaluate_move_with(state, &eval, mv)
    }

    /// As [`Self::evaluate_move`], reusing an evaluation of `state`.
    pub fn evaluate_move_with(
        &mut self,
        state: &BoardState,
        eval: &EngineEvaluation,
        mv: &Move,
    ) -> Result<f64, EngineError> {
        if let Some(c) = eval.candidate(mv) {
            if c.visits >= MIN_VISITS {
                return Ok(c.win_prob);
            }
        }
        let next = state.apply_move(mv)?;
        self.stats.forced_queries += 1;
        let succ = self.evaluate(&next)?;
        if !succ.root_win_prob.is_finite() {
            return Err(EngineError::MissingEvaluation(format!("no value for successor of {mv}")));
        }
        Ok(1.0 - succ.root_win_prob)
    }
}
