//! Seeded generators for synthetic inputs: random legal games, small
//! fixture corpora, player-month panels with a planted treatment effect,
//! and gap careers. Everything is a pure function of the seed.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};

use crate::board::{BoardState, Move};
use crate::econ::DidSpec;
use crate::gap::PanelCell;
use crate::month::Month;
use crate::sgf::{serialize_sgf, GameRecord, GroupFlag};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Plays uniformly random legal moves. Passes only once `min_plies` have
/// been played; two passes in a row or `max_plies` end the game.
pub fn random_game<R: Rng>(rng: &mut R, size: u8, komi: f64, min_plies: u32, max_plies: u32) -> (GameRecord, Vec<BoardState>) {
    let mut state = BoardState::new(size, komi).expect("valid size");
    let mut states = vec![state.clone()];
    let mut moves: Vec<Move> = Vec::new();
    while (moves.len() as u32) < max_plies {
        let legal = state.legal_moves();
        let plays = &legal[..legal.len() - 1];
        let pass = *legal.last().unwrap();
        let mv = if plays.is_empty() || (moves.len() as u32 >= min_plies && rng.random_bool(0.05)) {
            pass
        } else {
            *plays.choose(rng).unwrap()
        };
        state = state.apply_move(&mv).expect("generated move is legal");
        states.push(state.clone());
        let ended = mv.is_pass() && moves.last().is_some_and(Move::is_pass);
        moves.push(mv);
        if ended {
            break;
        }
    }
    let mut rec = GameRecord::new(size, komi);
    rec.moves = moves;
    (rec, states)
}

#[derive(Debug, Clone)]
pub struct FixtureCorpus {
    pub root: PathBuf,
    pub metadata: PathBuf,
    pub match_ids: Vec<String>,
}

/// Writes `n_matches` random 9x9 games under `root/sgf/` plus
/// `root/metadata.csv`. Six players meet in rotation; dates spread over
/// 2015-2019 so all three eras occur; players 0-2 are treated, 3-5 control.
pub fn fixture_corpus(root: &Path, seed: u64, n_matches: usize) -> io::Result<FixtureCorpus> {
    let mut rng = rng(seed);
    fs::create_dir_all(root.join("sgf"))?;
    let mut meta = String::from("match_id,sgf_path,black_id,white_id,date,black_group,white_group\n");
    let group = |p: usize| if p < 3 { "treated" } else { "control" };
    let start = NaiveDate::from_ymd_opt(2015, 1, 1).unwrap();
    let mut ids = Vec::new();
    for i in 0..n_matches {
        let (mut rec, _) = random_game(&mut rng, 9, 7.5, 30, 70);
        let b = i % 6;
        let w = (i + 1 + i / 6) % 6;
        let w = if w == b { (w + 1) % 6 } else { w };
        let date = start + chrono::Duration::days((i * 1825 / n_matches.max(1)) as i64 + rng.random_range(0..5));
        rec.black_name = Some(format!("P{b}"));
        rec.white_name = Some(format!("P{w}"));
        rec.date = Some(date);
        let id = format!("m{i:03}");
        let rel = format!("sgf/{id}.sgf");
        fs::write(root.join(&rel), serialize_sgf(&rec))?;
        meta.push_str(&format!("{id},{rel},P{b},P{w},{date},{},{}\n", group(b), group(w)));
        ids.push(id);
    }
    let metadata = root.join("metadata.csv");
    fs::write(&metadata, meta)?;
    Ok(FixtureCorpus { root: root.to_path_buf(), metadata, match_ids: ids })
}

/// Player-month panel generator: `y = alpha_i + tau_t + beta * D_it + e`,
/// with `alpha ~ N(0, 1)`, `tau ~ N(0, 0.5^2)`, `e ~ N(0, noise_sd^2)` and
/// `D_it` on for treated players inside the spec's post window. The first
/// half of the players (rounded up) is treated.
#[derive(Debug, Clone)]
pub struct DidDgp {
    pub n_players: usize,
    pub n_months: usize,
    pub start: Month,
    pub beta: f64,
    pub noise_sd: f64,
}

impl DidDgp {
    pub fn generate(&self, spec: &DidSpec, seed: u64) -> Vec<PanelCell> {
        let mut rng = rng(seed);
        let unit = Normal::new(0.0, 1.0).unwrap();
        let (lo, hi) = spec.window();
        let tau: Vec<f64> = (0..self.n_months).map(|_| 0.5 * unit.sample(&mut rng)).collect();
        let mut cells = Vec::with_capacity(self.n_players * self.n_months);
        for i in 0..self.n_players {
            let treated = i < self.n_players.div_ceil(2);
            let alpha = unit.sample(&mut rng);
            for (t, tau_t) in tau.iter().enumerate() {
                let month = Month(self.start.0 + t as i32);
                let d = treated && (lo..=hi).contains(&month);
                let y = alpha + tau_t + if d { self.beta } else { 0.0 } + self.noise_sd * unit.sample(&mut rng);
                cells.push(PanelCell {
                    player_id: format!("p{i:03}"),
                    month,
                    mean_gap: y,
                    n_matches: 1,
                    n_moves_used: 50,
                    group: if treated { GroupFlag::Treated } else { GroupFlag::Control },
                });
            }
        }
        cells
    }
}

/// Gamma(shape, scale) draws.
pub fn gamma_sample<R: Rng>(rng: &mut R, n: usize, shape: f64, scale: f64) -> Vec<f64> {
    let g = Gamma::new(shape, scale).expect("positive parameters");
    (0..n).map(|_| g.sample(rng)).collect()
}

/// Affine map of `x` onto the given sample mean and sample SD (n - 1).
pub fn rescale_to_moments(x: &[f64], mean: f64, sd: f64) -> Vec<f64> {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let s = (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)).sqrt();
    x.iter().map(|v| mean + sd * (v - m) / s).collect()
}
