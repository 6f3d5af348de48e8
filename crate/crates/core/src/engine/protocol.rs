//! JSON-lines analysis protocol over a child process's stdin/stdout.
//!
//! One request object per line in, one response object per line out. Field
//! names are fixed; see `docs/engine-protocol.md`. Coordinates use the GTP
//! convention (columns `A`..`Z` without `I`, rows counted from the bottom),
//! and `pass` for a pass.

use std::io::{self, BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Candidate, Engine, EngineError, EngineEvaluation, EngineParams};
use crate::board::{BoardState, Color, Move, Point};

const COLUMNS: &[u8] = b"ABCDEFGHJKLMNOPQRSTUVWXYZ";

pub fn point_to_gtp(p: Point, size: u8) -> String {
    format!("{}{}", COLUMNS[p.col as usize] as char, size - p.row)
}

pub fn move_to_gtp(m: &Move, size: u8) -> String {
    m.point.map(|p| point_to_gtp(p, size)).unwrap_or_else(|| "pass".into())
}

pub fn gtp_to_point(s: &str, size: u8) -> Option<Option<Point>> {
    let s = s.trim();
    if s.eq_ignore_ascii_case("pass") {
        return Some(None);
    }
    let mut chars = s.chars();
    let letter = chars.next()?.to_ascii_uppercase() as u8;
    let col = COLUMNS.iter().position(|c| *c == letter)? as u8;
    let row_num: u8 = chars.as_str().parse().ok()?;
    if row_num == 0 || row_num > size || col >= size {
        return None;
    }
    Some(Some(Point::new(col, size - row_num)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRequest {
    pub id: String,
    pub moves: Vec<[String; 2]>,
    pub initial_stones: Vec<[String; 2]>,
    pub initial_player: String,
    pub board_size: u8,
    pub komi: f64,
    pub ruleset: String,
    pub max_visits: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub include_move: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoveInfo {
    #[serde(rename = "move")]
    pub mv: String,
    pub winrate: f64,
    pub visits: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisResponse {
    pub id: String,
    pub turn: String,
    #[serde(default)]
    pub root_winrate: Option<f64>,
    #[serde(default)]
    pub move_infos: Vec<MoveInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl AnalysisRequest {
    pub fn for_state(id: String, state: &BoardState, params: &EngineParams) -> AnalysisRequest {
        let size = state.size();
        let history = state.history();
        let initial_player = history.first().map(|m| m.color).unwrap_or(state.to_move());
        AnalysisRequest {
            id,
            moves: history.iter().map(|m| [m.color.to_string(), move_to_gtp(m, size)]).collect(),
            initial_stones: state
                .setup_stones()
                .iter()
                .map(|(c, p)| [c.to_string(), point_to_gtp(*p, size)])
                .collect(),
            initial_player: initial_player.to_string(),
            board_size: size,
            komi: params.komi_for(state),
            ruleset: params.ruleset.clone(),
            max_visits: params.visits_budget,
            include_move: None,
        }
    }

    /// Rebuilds the queried position.
    pub fn to_state(&self) -> Result<BoardState, String> {
        let size = self.board_size;
        let color = |s: &str| Color::from_letter(s).ok_or_else(|| format!("bad color {s:?}"));
        let point = |s: &str| gtp_to_point(s, size).ok_or_else(|| format!("bad coordinate {s:?}"));
        let mut setup = Vec::new();
        for [c, p] in &self.initial_stones {
            let p = point(p)?.ok_or("pass in initial stones")?;
            setup.push((color(c)?, p));
        }
        let mut state = BoardState::with_setup(size, self.komi, &setup, color(&self.initial_player)?)
            .map_err(|e| e.to_string())?;
        for (i, [c, p]) in self.moves.iter().enumerate() {
            let mv = Move { color: color(c)?, point: point(p)? };
            state = state.apply_move(&mv).map_err(|e| format!("move {}: {e}", i + 1))?;
        }
        Ok(state)
    }
}

/// How a particular engine reports win rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Perspective {
    /// Values are for the player to move (no conversion).
    #[default]
    Mover,
    /// Values are for black; flipped for white-to-move positions.
    Black,
}

impl Perspective {
    fn to_mover(self, winrate: f64, to_move: Color) -> f64 {
        match (self, to_move) {
            (Perspective::Black, Color::White) => 1.0 - winrate,
            _ => winrate,
        }
    }
}

/// Launch command for an external engine, always taken from configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineCommand {
    pub program: String,
    pub args: Vec<String>,
}

/// Converts a response into an evaluation of `state`.
pub fn evaluation_from_response(
    resp: &AnalysisResponse,
    expected_id: &str,
    state: &BoardState,
    params: &EngineParams,
    perspective: Perspective,
    engine_id: &str,
) -> Result<EngineEvaluation, EngineError> {
    if resp.id != expected_id {
        return Err(EngineError::ProtocolViolation(format!("response id {:?} does not match request {:?}", resp.id, expected_id)));
    }
    if let Some(err) = &resp.error {
        return Err(EngineError::MissingEvaluation(err.clone()));
    }
    let to_move = state.to_move();
    if Color::from_letter(&resp.turn) != Some(to_move) {
        return Err(EngineError::ProtocolViolation(format!("turn {:?} but {} is to move", resp.turn, to_move)));
    }
    let root = resp.root_winrate.ok_or_else(|| EngineError::MissingEvaluation("no root_winrate".into()))?;
    if resp.move_infos.is_empty() {
        return Err(EngineError::MissingEvaluation("no move_infos".into()));
    }
    let check = |w: f64| {
        if (0.0..=1.0).contains(&w) {
            Ok(w)
        } else {
            Err(EngineError::ProtocolViolation(format!("winrate {w} outside [0, 1]")))
        }
    };
    let mut candidates = Vec::with_capacity(resp.move_infos.len());
    for info in &resp.move_infos {
        let point = gtp_to_point(&info.mv, state.size())
            .ok_or_else(|| EngineError::ProtocolViolation(format!("bad move {:?}", info.mv)))?;
        candidates.push(Candidate {
            mv: Move { color: to_move, point },
            win_prob: perspective.to_mover(check(info.winrate)?, to_move),
            visits: info.visits.max(1),
        });
    }
    candidates.sort_by(|a, b| b.win_prob.total_cmp(&a.win_prob));
    candidates.truncate(params.max_candidates);
    Ok(EngineEvaluation {
        state_key: state.position_key(),
        to_move,
        best_move: candidates[0].mv,
        candidates,
        root_win_prob: perspective.to_mover(check(root)?, to_move),
        engine_id: engine_id.to_string(),
        visits_budget: params.visits_budget,
    })
}

/// Client session for an external engine process.
pub struct ProtocolEngine {
    id: String,
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<io::Result<String>>,
    perspective: Perspective,
    next_id: u64,
    dead: Option<String>,
}

impl ProtocolEngine {
    pub fn spawn(cmd: &EngineCommand, engine_id: &str, perspective: Perspective) -> Result<ProtocolEngine, EngineError> {
        let mut child = Command::new(&cmd.program)
            .args(&cmd.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| EngineError::EngineUnavailable(format!("{}: {e}", cmd.program)))?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(ProtocolEngine {
            id: engine_id.to_string(),
            child,
            stdin,
            lines: rx,
            perspective,
            next_id: 0,
            dead: None,
        })
    }

    fn fail(&mut self, err: EngineError) -> EngineError {
        self.dead = Some(err.to_string());
        let _ = self.child.kill();
        err
    }

    fn round_trip(&mut self, line: &str, timeout: Duration) -> Result<String, EngineError> {
        let stdin = self.stdin.as_mut().ok_or_else(|| EngineError::EngineUnavailable("stdin closed".into()))?;
        if let Err(e) = stdin.write_all(line.as_bytes()).and_then(|_| stdin.write_all(b"\n")).and_then(|_| stdin.flush()) {
            return Err(self.fail(EngineError::EngineUnavailable(format!("write failed: {e}"))));
        }
        match self.lines.recv_timeout(timeout) {
            Ok(Ok(l)) => Ok(l),
            Ok(Err(e)) => Err(self.fail(EngineError::EngineUnavailable(format!("read failed: {e}")))),
            Err(RecvTimeoutError::Timeout) => Err(self.fail(EngineError::EngineTimeout(timeout))),
            Err(RecvTimeoutError::Disconnected) => Err(self.fail(EngineError::EngineUnavailable("engine exited".into()))),
        }
    }
}

impl Engine for ProtocolEngine {
    fn engine_id(&self) -> &str {
        &self.id
    }

    fn analyze(&mut self, state: &BoardState, params: &EngineParams) -> Result<EngineEvaluation, EngineError> {
        if let Some(why) = &self.dead {
            return Err(EngineError::EngineUnavailable(format!("session closed after: {why}")));
        }
        self.next_id += 1;
        let id = format!("q{}", self.next_id);
        let req = AnalysisRequest::for_state(id.clone(), state, params);
        let line = serde_json::to_string(&req).expect("request serializes");
        let reply = self.round_trip(&line, params.per_query_timeout)?;
        let resp: AnalysisResponse = match serde_json::from_str(&reply) {
            Ok(r) => r,
            Err(e) => return Err(self.fail(EngineError::ProtocolViolation(format!("malformed response: {e}")))),
        };
        match evaluation_from_response(&resp, &id, state, params, self.perspective, &self.id) {
            Err(e @ EngineError::ProtocolViolation(_)) => Err(self.fail(e)),
            other => other,
        }
    }
}

impl Drop for ProtocolEngine {
    fn drop(&mut self) {
        drop(self.stdin.take());
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Misbehaviors the reference server can simulate, for client tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fault {
    #[default]
    None,
    WrongId,
    Garbage,
    Hang,
    Exit,
    RefuseAll,
}

impl Fault {
    pub fn parse(s: &str) -> Option<Fault> {
        Some(match s {
            "none" => Fault::None,
            "wrong-id" => Fault::WrongId,
            "garbage" => Fault::Garbage,
            "hang" => Fault::Hang,
            "exit" => Fault::Exit,
            "refuse" => Fault::RefuseAll,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ServeOptions {
    pub perspective: Perspective,
    pub fault: Fault,
    /// Number of well-formed answers before the fault kicks in.
    pub fault_after: usize,
}

/// Reference server loop: answers requests with any [`Engine`]. Used by the
/// `gogap-scripted-engine` binary so the client can be exercised end to end.
pub fn serve<E: Engine>(engine: &mut E, input: impl BufRead, mut output: impl Write, opts: ServeOptions) -> io::Result<()> {
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let faulty = n >= opts.fault_after;
        if faulty {
            match opts.fault {
                Fault::Hang => loop {
                    thread::sleep(Duration::from_secs(3600));
                },
                Fault::Exit => return Ok(()),
                Fault::Garbage => {
                    writeln!(output, "{{not json")?;
                    output.flush()?;
                    continue;
                }
                _ => {}
            }
        }
        let reply = match serde_json::from_str::<AnalysisRequest>(&line) {
            Ok(req) => answer(engine, &req, opts, faulty),
            Err(e) => AnalysisResponse {
                id: String::new(),
                turn: String::new(),
                root_winrate: None,
                move_infos: Vec::new(),
                error: Some(format!("bad request: {e}")),
            },
        };
        writeln!(output, "{}", serde_json::to_string(&reply).expect("response serializes"))?;
        output.flush()?;
    }
    Ok(())
}

fn answer<E: Engine>(engine: &mut E, req: &AnalysisRequest, opts: ServeOptions, faulty: bool) -> AnalysisResponse {
    let mut resp = AnalysisResponse {
        id: req.id.clone(),
        turn: String::new(),
        root_winrate: None,
        move_infos: Vec::new(),
        error: None,
    };
    if faulty && opts.fault == Fault::WrongId {
        resp.id.push_str("-stale");
    }
    if faulty && opts.fault == Fault::RefuseAll {
        resp.error = Some("refused".into());
        return resp;
    }
    let state = match req.to_state() {
        Ok(s) => s,
        Err(e) => {
            resp.error = Some(e);
            return resp;
        }
    };
    let mut params = EngineParams::new(engine.engine_id().to_string());
    params.visits_budget = req.max_visits.max(1);
    params.komi = Some(req.komi);
    params.ruleset = req.ruleset.clone();
    let eval = match engine.analyze(&state, &params) {
        Ok(e) => e,
        Err(e) => {
            resp.error = Some(e.to_string());
            return resp;
        }
    };
    let to_move = state.to_move();
    let out = |w: f64| opts.perspective.to_mover(w, to_move);
    let size = state.size();
    resp.turn = to_move.to_string();
    resp.root_winrate = Some(out(eval.root_win_prob));
    resp.move_infos = eval
        .candidates
        .iter()
        .map(|c| MoveInfo { mv: move_to_gtp(&c.mv, size), winrate: out(c.win_prob), visits: c.visits })
        .collect();
    if let Some(m) = &req.include_move {
        if !resp.move_infos.iter().any(|i| i.mv.eq_ignore_ascii_case(m)) {
            resp.error = Some(format!("cannot include {m}"));
        }
    }
    resp
}
