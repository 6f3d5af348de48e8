//! Batch front end.
//!
//! Configuration is a plain-text file of `key = value` lines (`#` starts a
//! comment). Every key can be overridden on the command line with
//! `--set key=value` or a dedicated flag; flags win. Relative paths in the
//! file resolve against the file's directory.
//!
//! Exit codes: 0 success (skipped matches included), 2 configuration error,
//! 3 engine failure, 4 data error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::board::BoardState;
use crate::econ::{self, DidSpec, FeMethod, FitOptions, PostDefinition};
use crate::engine::{
    CacheError, Engine, EngineCommand, EngineError, EngineParams, EvalCache, EvalStats, Evaluator, Perspective,
    ProtocolEngine, ScriptedEngine,
};
use crate::gap::{self, EraConfig, GapError, GapRecord, KUnit};
use crate::month::{parse_date, Month};
use crate::sgf::{self, CorpusError, SkipEntry};
use crate::stats::{self, LeveneCenter, SampleSummary, StatsError, Tail, TestReport};
use crate::tables;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("engine failure: {0}")]
    Engine(String),
    #[error("data error: {0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Engine(_) => 3,
            CliError::Data(_) => 4,
        }
    }
}

fn data<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Data(e.to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub enum EngineChoice {
    Scripted,
    Command(EngineCommand),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub corpus_root: PathBuf,
    pub metadata: Option<PathBuf>,
    pub engine: EngineChoice,
    pub perspective: Perspective,
    pub params: EngineParams,
    pub k_limit: u32,
    pub k_unit: KUnit,
    pub eras: EraConfig,
    pub bin_size: u32,
    pub cache: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub workers: usize,
    pub did_event_1: Month,
    pub did_event_2: Month,
    pub did_end: Month,
    /// Seed for every generated fixture and Monte-Carlo run.
    pub seed: u64,
}

const KEYS: &[&str] = &[
    "corpus_root",
    "metadata",
    "engine",
    "engine_program",
    "engine_args",
    "engine_id",
    "engine_perspective",
    "visits",
    "max_candidates",
    "komi",
    "ruleset",
    "timeout_secs",
    "k_limit",
    "k_unit",
    "era_cut_1",
    "era_cut_2",
    "bin_size",
    "cache",
    "out_dir",
    "workers",
    "did_event_1",
    "did_event_2",
    "did_end",
    "seed",
];

const PATH_KEYS: &[&str] = &["corpus_root", "metadata", "cache", "out_dir", "engine_program"];

/// Parses the key-value grammar. Values keep inner whitespace; surrounding
/// whitespace is trimmed.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split_once('#').map_or(raw, |(a, _)| a).trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", i + 1)))?;
        let k = k.trim();
        if !KEYS.contains(&k) {
            return Err(CliError::Config(format!("line {}: unknown key {k:?}", i + 1)));
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}

impl RunConfig {
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<RunConfig, CliError> {
        let bad = |k: &str, why: String| CliError::Config(format!("{k}: {why}"));
        for k in map.keys() {
            if !KEYS.contains(&k.as_str()) {
                return Err(CliError::Config(format!("unknown key {k:?}")));
            }
        }
        let get = |k: &str| map.get(k).map(String::as_str).filter(|v| !v.is_empty());
        fn num<T: std::str::FromStr>(v: Option<&str>, k: &str, default: T) -> Result<T, CliError>
        where
            T::Err: std::fmt::Display,
        {
            match v {
                None => Ok(default),
                Some(s) => s.parse().map_err(|e| CliError::Config(format!("{k}: {e}"))),
            }
        }
        let date = |k: &str, default: chrono::NaiveDate| match get(k) {
            None => Ok(default),
            Some(s) => parse_date(s).ok_or_else(|| bad(k, format!("bad date {s:?}"))),
        };
        let month = |k: &str, default: Month| match get(k) {
            None => Ok(default),
            Some(s) => s.parse::<Month>().map_err(|e| bad(k, e.to_string())),
        };

        let engine = match get("engine").unwrap_or("scripted") {
            "scripted" => EngineChoice::Scripted,
            "command" => {
                let program = get("engine_program").ok_or_else(|| bad("engine_program", "required for engine = command".into()))?;
                let args = get("engine_args").map(|a| a.split_whitespace().map(String::from).collect()).unwrap_or_default();
                EngineChoice::Command(EngineCommand { program: program.into(), args })
            }
            other => return Err(bad("engine", format!("expected scripted or command, got {other:?}"))),
        };
        let default_id = match &engine {
            EngineChoice::Scripted => crate::engine::scripted::SCRIPTED_ENGINE_ID.to_string(),
            EngineChoice::Command(c) => Path::new(&c.program).file_name().map_or(c.program.clone(), |f| f.to_string_lossy().into()),
        };
        let perspective = match get("engine_perspective").unwrap_or("mover") {
            "mover" => Perspective::Mover,
            "black" => Perspective::Black,
            other => return Err(bad("engine_perspective", format!("expected mover or black, got {other:?}"))),
        };
        let mut params = EngineParams::new(get("engine_id").map_or(default_id, String::from));
        params.visits_budget = num(get("visits"), "visits", params.visits_budget)?;
        params.max_candidates = num(get("max_candidates"), "max_candidates", params.max_candidates)?;
        params.komi = get("komi").map(|s| s.parse::<f64>().map_err(|e| bad("komi", e.to_string()))).transpose()?;
        if let Some(r) = get("ruleset") {
            params.ruleset = r.into();
        }
        params.per_query_timeout = Duration::from_secs_f64(num(get("timeout_secs"), "timeout_secs", 60.0)?);
        params.validate().map_err(CliError::Config)?;

        let defaults = EraConfig::default();
        let eras = EraConfig::new(date("era_cut_1", defaults.cut_1)?, date("era_cut_2", defaults.cut_2)?).map_err(CliError::Config)?;
        let did = DidSpec::new(PostDefinition::AfterEvent1);
        let cfg = RunConfig {
            corpus_root: get("corpus_root").map_or_else(|| PathBuf::from("."), PathBuf::from),
            metadata: get("metadata").map(PathBuf::from),
            engine,
            perspective,
            params,
            k_limit: num(get("k_limit"), "k_limit", 50)?,
            k_unit: get("k_unit").map_or(Ok(KUnit::OwnMoves), |s| s.parse().map_err(CliError::Config))?,
            eras,
            bin_size: num(get("bin_size"), "bin_size", 10)?,
            cache: get("cache").map(PathBuf::from),
            out_dir: get("out_dir").map_or_else(|| PathBuf::from("out"), PathBuf::from),
            workers: num(get("workers"), "workers", 1)?,
            did_event_1: month("did_event_1", did.event_1)?,
            did_event_2: month("did_event_2", did.event_2)?,
            did_end: month("did_end", did.end)?,
            seed: num(get("seed"), "seed", 0)?,
        };
        if cfg.k_limit < 1 {
            return Err(bad("k_limit", "must be at least 1".into()));
        }
        if cfg.workers < 1 {
            return Err(bad("workers", "must be at least 1".into()));
        }
        if cfg.bin_size < 1 {
            return Err(bad("bin_size", "must be at least 1".into()));
        }
        cfg.did_spec(PostDefinition::AfterEvent1).validate().map_err(CliError::Config)?;
        Ok(cfg)
    }

    pub fn did_spec(&self, post: PostDefinition) -> DidSpec {
        DidSpec { post_definition: post, event_1: self.did_event_1, event_2: self.did_event_2, end: self.did_end }
    }

    fn make_engine(&self) -> Result<Box<dyn Engine>, EngineError> {
        Ok(match &self.engine {
            EngineChoice::Scripted => Box::new(ScriptedEngine::new()),
            EngineChoice::Command(cmd) => Box::new(ProtocolEngine::spawn(cmd, &self.params.engine_id, self.perspective)?),
        })
    }

    fn open_cache(&self) -> Result<Option<EvalCache>, CliError> {
        let Some(path) = &self.cache else { return Ok(None) };
        match EvalCache::open(path, &self.params.engine_id) {
            Ok(c) => Ok(Some(c)),
            Err(e @ CacheError::BadHeader { .. }) => Err(CliError::Config(e.to_string())),
            Err(e) => Err(data(e)),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "gogap", version, about = "Human-AI gap analysis for Go game records")]
pub struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Key-value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Directory for outputs, and for inputs not given explicitly.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Parallel engine sessions for `analyze`.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Evaluation cache base path (`.log` and `.idx` are appended).
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Score every move of the corpus and write the gap table.
    Analyze {
        /// Directory that `sgf_path` entries are relative to.
        #[arg(long)]
        corpus_root: Option<PathBuf>,
        /// Match metadata CSV.
        #[arg(long)]
        metadata: Option<PathBuf>,
    },
    /// Mean gap per era and move bin.
    Bins {
        /// Gap table [default: OUT_DIR/gaps.csv].
        #[arg(long)]
        gaps: Option<PathBuf>,
        /// Moves per bin.
        #[arg(long)]
        bin_size: Option<u32>,
    },
    /// Player-month panel.
    Panel {
        /// Gap table [default: OUT_DIR/gaps.csv].
        #[arg(long)]
        gaps: Option<PathBuf>,
        #[arg(long)]
        metadata: Option<PathBuf>,
        #[arg(long)]
        corpus_root: Option<PathBuf>,
    },
    /// Month effects from the two-way fixed-effects regression.
    Trend {
        /// Player-month panel [default: OUT_DIR/panel.csv].
        #[arg(long)]
        panel: Option<PathBuf>,
        /// Fixed-effects solver: absorb or dummies.
        #[arg(long, default_value = "absorb")]
        method: FeMethod,
        /// Weight cells by their number of matches.
        #[arg(long)]
        weighted: bool,
    },
    /// Difference-in-differences for the three post-period definitions.
    Did {
        /// Player-month panel [default: OUT_DIR/panel.csv].
        #[arg(long)]
        panel: Option<PathBuf>,
        /// Fixed-effects solver: absorb or dummies.
        #[arg(long, default_value = "absorb")]
        method: FeMethod,
        /// Weight cells by their number of matches.
        #[arg(long)]
        weighted: bool,
    },
    /// Compare one match's gaps against the rest of the player's career.
    Cheatcheck {
        /// Gap table [default: OUT_DIR/gaps.csv].
        #[arg(long)]
        gaps: Option<PathBuf>,
        #[arg(long)]
        player: String,
        #[arg(long = "match")]
        match_id: String,
        /// Alternative for (career, suspect): greater means the career
        /// gaps are larger.
        #[arg(long, default_value = "greater")]
        tail: Tail,
        /// Levene center: mean or median.
        #[arg(long, default_value = "mean")]
        center: LeveneCenter,
        /// Histogram bins in cheatcheck_hist.csv.
        #[arg(long, default_value_t = 20)]
        hist_bins: usize,
    },
    /// Summarize an evaluation cache.
    CacheInfo,
    /// Query the configured engine once on an empty board.
    EngineProbe {
        /// Board size of the probe position.
        #[arg(long, default_value_t = 19)]
        size: u8,
    },
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("gogap: {e}");
            e.exit_code()
        }
    }
}

fn load_config(common: &Common, extra: &[(&str, Option<&Path>)]) -> Result<RunConfig, CliError> {
    let mut map = BTreeMap::new();
    if let Some(path) = &common.config {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for (k, v) in parse_config_text(&text)? {
            let is_path = PATH_KEYS.contains(&k.as_str()) && !v.is_empty();
            // bare program names are looked up on PATH, not next to the file
            let keep = k == "engine_program" && !v.contains('/');
            let v = if is_path && !keep && Path::new(&v).is_relative() { base.join(&v).to_string_lossy().into_owned() } else { v };
            map.insert(k, v);
        }
    }
    for kv in &common.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    let flags: [(&str, Option<String>); 3] = [
        ("out_dir", common.out_dir.as_ref().map(|p| p.to_string_lossy().into_owned())),
        ("workers", common.workers.map(|w| w.to_string())),
        ("cache", common.cache.as_ref().map(|p| p.to_string_lossy().into_owned())),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            map.insert(k.into(), v);
        }
    }
    for (k, v) in extra {
        if let Some(v) = v {
            map.insert(k.to_string(), v.to_string_lossy().into_owned());
        }
    }
    RunConfig::from_map(&map)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let common = &cli.common;
    match cli.command {
        Command::Analyze { corpus_root, metadata } => {
            let cfg = load_config(common, &[("corpus_root", corpus_root.as_deref()), ("metadata", metadata.as_deref())])?;
            let summary = cmd_analyze(&cfg)?;
            eprintln!(
                "analyzed {} of {} matches ({} skipped), {} gap records; engine queries {}, cache hits {}",
                summary.analyzed, summary.matches, summary.skipped, summary.records, summary.engine_queries, summary.cache_hits
            );
            Ok(())
        }
        Command::Bins { gaps, bin_size } => {
            let mut cfg = load_config(common, &[])?;
            if let Some(b) = bin_size {
                if b < 1 {
                    return Err(CliError::Config("bin_size must be at least 1".into()));
                }
                cfg.bin_size = b;
            }
            cmd_bins(&cfg, &gaps.unwrap_or_else(|| cfg.out_dir.join("gaps.csv")))
        }
        Command::Panel { gaps, metadata, corpus_root } => {
            let cfg = load_config(common, &[("corpus_root", corpus_root.as_deref()), ("metadata", metadata.as_deref())])?;
            cmd_panel(&cfg, &gaps.unwrap_or_else(|| cfg.out_dir.join("gaps.csv")))
        }
        Command::Trend { panel, method, weighted } => {
            let cfg = load_config(common, &[])?;
            cmd_trend(&cfg, &panel.unwrap_or_else(|| cfg.out_dir.join("panel.csv")), FitOptions { method, weighted })
        }
        Command::Did { panel, method, weighted } => {
            let cfg = load_config(common, &[])?;
            cmd_did(&cfg, &panel.unwrap_or_else(|| cfg.out_dir.join("panel.csv")), FitOptions { method, weighted })
        }
        Command::Cheatcheck { gaps, player, match_id, tail, center, hist_bins } => {
            let cfg = load_config(common, &[])?;
            if hist_bins < 1 {
                return Err(CliError::Config("hist_bins must be at least 1".into()));
            }
            let opts = CheatOptions { tail, center, hist_bins };
            cmd_cheatcheck(&cfg, &gaps.unwrap_or_else(|| cfg.out_dir.join("gaps.csv")), &player, &match_id, opts)
        }
        Command::CacheInfo => {
            let cfg = load_config(common, &[])?;
            if cfg.cache.is_none() {
                return Err(CliError::Config("no cache configured".into()));
            }
            let cache = cfg.open_cache()?.expect("cache configured");
            let info = cache.info().map_err(data)?;
            println!("{}", serde_json::to_string_pretty(&info).expect("serializable"));
            Ok(())
        }
        Command::EngineProbe { size } => {
            let cfg = load_config(common, &[])?;
            let state = BoardState::new(size, cfg.params.komi.unwrap_or(7.5)).map_err(|e| CliError::Config(e.to_string()))?;
            let mut engine = cfg.make_engine().map_err(|e| CliError::Engine(e.to_string()))?;
            let eval = engine.analyze(&state, &cfg.params).map_err(|e| CliError::Engine(e.to_string()))?;
            eval.validate().map_err(CliError::Engine)?;
            let probe = serde_json::json!({
                "engine_id": eval.engine_id,
                "to_move": eval.to_move,
                "best_move": eval.best_move.to_string(),
                "root_win_prob": eval.root_win_prob,
                "candidates": eval.candidates.len(),
            });
            println!("{probe}");
            Ok(())
        }
    }
}

/// Writes through a `.partial` sibling and renames on success.
fn write_atomic(path: &Path, f: impl FnOnce(&mut fs::File) -> std::io::Result<()>) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| data(format!("{}: {e}", dir.display())))?;
        }
    }
    let partial = partial_path(path);
    let mut file = fs::File::create(&partial).map_err(|e| data(format!("{}: {e}", partial.display())))?;
    f(&mut file).and_then(|_| file.sync_all()).map_err(|e| data(format!("{}: {e}", partial.display())))?;
    fs::rename(&partial, path).map_err(|e| data(format!("{}: {e}", path.display())))
}

pub fn partial_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".partial");
    PathBuf::from(s)
}

pub const SKIPS_SCHEMA: &str = "gogap.skips/1";
pub const TREND_SCHEMA: &str = "gogap.trend/1";
pub const HIST_SCHEMA: &str = "gogap.cheat_hist/1";

pub const SKIPS_COLUMNS: &[&str] = &["path", "match_id", "reason"];
pub const TREND_COLUMNS: &[&str] = &["month", "tau_hat", "se", "ci95_low_clustered", "ci95_high_clustered"];
pub const HIST_COLUMNS: &[&str] =
    &["bin", "lower", "upper", "count_career", "count_suspect", "share_career", "share_suspect"];

fn write_skips(path: &Path, skips: &[SkipEntry]) -> Result<(), CliError> {
    write_atomic(path, |f| {
        let mut w = tables::writer(f, SKIPS_SCHEMA, SKIPS_COLUMNS)?;
        for s in skips {
            w.serialize(s)?;
        }
        w.flush()
    })
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct AnalyzeSummary {
    pub schema: &'static str,
    pub engine_id: String,
    pub matches: usize,
    pub analyzed: usize,
    pub skipped: usize,
    pub records: usize,
    pub missing: usize,
    pub workers: usize,
    pub engine_queries: u64,
    pub cache_hits: u64,
    pub forced_queries: u64,
}

enum Outcome {
    Done(Vec<GapRecord>),
    Skip(SkipEntry),
}

pub fn cmd_analyze(cfg: &RunConfig) -> Result<AnalyzeSummary, CliError> {
    let metadata = cfg.metadata.as_ref().ok_or_else(|| CliError::Config("metadata is required".into()))?;
    let table = sgf::load_corpus(&cfg.corpus_root, metadata).map_err(|e| match e {
        CorpusError::MissingMetadataFile(_) => CliError::Config(e.to_string()),
        other => data(other),
    })?;
    let cache = cfg.open_cache()?;
    let n = table.rows.len();
    let slots: Vec<Mutex<Option<Outcome>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let failure: Mutex<Option<CliError>> = Mutex::new(None);
    let totals: Mutex<EvalStats> = Mutex::new(EvalStats::default());
    let workers = cfg.workers.min(n.max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| {
                let fail = |e: CliError| {
                    abort.store(true, Ordering::SeqCst);
                    failure.lock().unwrap().get_or_insert(e);
                };
                let engine = match cfg.make_engine() {
                    Ok(e) => e,
                    Err(e) => return fail(CliError::Engine(e.to_string())),
                };
                let mut ev = Evaluator::new(engine, cfg.params.clone(), cache.as_ref());
                while !abort.load(Ordering::SeqCst) {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= n {
                        break;
                    }
                    let row = &table.rows[i];
                    let outcome = match gap::match_gap_series(row, &mut ev, cfg.k_limit, cfg.k_unit) {
                        Ok(g) => Outcome::Done(g),
                        Err(GapError::IllegalRecordedMove { source, .. }) => Outcome::Skip(SkipEntry {
                            path: row.record.source_path.clone(),
                            match_id: row.match_id.clone(),
                            reason: source.to_string(),
                        }),
                        Err(GapError::Engine { match_id, source }) => {
                            fail(CliError::Engine(format!("match {match_id}: {source}")));
                            break;
                        }
                    };
                    *slots[i].lock().unwrap() = Some(outcome);
                }
                let s = ev.stats();
                let mut t = totals.lock().unwrap();
                t.engine_queries += s.engine_queries;
                t.cache_hits += s.cache_hits;
                t.forced_queries += s.forced_queries;
            });
        }
    });

    let mut gaps = Vec::new();
    let mut skips = table.skipped.clone();
    let mut analyzed = 0;
    for slot in slots {
        match slot.into_inner().unwrap() {
            Some(Outcome::Done(g)) => {
                analyzed += 1;
                gaps.extend(g);
            }
            Some(Outcome::Skip(s)) => skips.push(s),
            None => {}
        }
    }
    gaps.sort_by(|a, b| (&a.match_id, a.ply).cmp(&(&b.match_id, b.ply)));
    skips.sort();
    if let Some(c) = &cache {
        c.write_index().map_err(data)?;
    }
    let totals = totals.into_inner().unwrap();
    let summary = AnalyzeSummary {
        schema: "gogap.run/1",
        engine_id: cfg.params.engine_id.clone(),
        matches: n + table.skipped.len(),
        analyzed,
        skipped: skips.len(),
        records: gaps.len(),
        missing: gaps.iter().filter(|g| g.missing()).count(),
        workers,
        engine_queries: totals.engine_queries,
        cache_hits: totals.cache_hits,
        forced_queries: totals.forced_queries,
    };
    let gaps_path = cfg.out_dir.join("gaps.csv");
    if let Some(err) = failure.into_inner().unwrap() {
        // keep what finished, under the .partial name only
        fs::create_dir_all(&cfg.out_dir).map_err(data)?;
        let partial = partial_path(&gaps_path);
        let file = fs::File::create(&partial).map_err(data)?;
        gap::write_gaps(file, &gaps, &cfg.eras).map_err(data)?;
        eprintln!("gogap: incomplete results ({analyzed} matches) left in {}", partial.display());
        return Err(err);
    }
    write_atomic(&gaps_path, |f| gap::write_gaps(f, &gaps, &cfg.eras))?;
    write_skips(&cfg.out_dir.join("skips.csv"), &skips)?;
    write_atomic(&cfg.out_dir.join("run.json"), |f| {
        serde_json::to_writer_pretty(&mut *f, &summary)?;
        writeln!(f)
    })?;
    Ok(summary)
}

pub fn cmd_bins(cfg: &RunConfig, gaps_path: &Path) -> Result<(), CliError> {
    let gaps = gap::read_gaps(gaps_path).map_err(data)?;
    let rows = gap::bin_by_move(&gaps, cfg.bin_size, &cfg.eras);
    write_atomic(&cfg.out_dir.join("bins.csv"), |f| gap::write_bins(f, &rows, &cfg.eras))
}

pub fn cmd_panel(cfg: &RunConfig, gaps_path: &Path) -> Result<(), CliError> {
    let gaps = gap::read_gaps(gaps_path).map_err(data)?;
    let metadata = cfg.metadata.as_ref().ok_or_else(|| CliError::Config("metadata is required for group flags".into()))?;
    let table = sgf::load_corpus(&cfg.corpus_root, metadata).map_err(|e| match e {
        CorpusError::MissingMetadataFile(_) => CliError::Config(e.to_string()),
        other => data(other),
    })?;
    let cells = gap::build_panel(&gaps, &table);
    write_atomic(&cfg.out_dir.join("panel.csv"), |f| gap::write_panel(f, &cells))
}

pub fn cmd_trend(cfg: &RunConfig, panel_path: &Path, opts: FitOptions) -> Result<(), CliError> {
    let panel = gap::read_panel(panel_path).map_err(data)?;
    let fit = econ::fit_two_way_fe(&panel, opts).map_err(data)?;
    let rows = econ::trend_table(&fit);
    write_atomic(&cfg.out_dir.join("trend.csv"), |f| {
        let mut w = tables::writer(f, TREND_SCHEMA, TREND_COLUMNS)?;
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush()
    })?;
    let doc = serde_json::json!({ "schema": "gogap.trend_fit/1", "fit": fit });
    write_atomic(&cfg.out_dir.join("trend_fit.json"), |f| {
        serde_json::to_writer_pretty(&mut *f, &doc)?;
        writeln!(f)
    })
}

pub fn cmd_did(cfg: &RunConfig, panel_path: &Path, opts: FitOptions) -> Result<(), CliError> {
    let panel = gap::read_panel(panel_path).map_err(data)?;
    let mut columns = Vec::new();
    for post in PostDefinition::ALL {
        let spec = cfg.did_spec(post);
        let (lo, hi) = spec.window();
        let fit = econ::fit_did(&panel, &spec, opts).map_err(data)?;
        columns.push((format!("{lo}..{hi}"), fit));
    }
    let text = econ::did_text_table(&columns);
    let doc = serde_json::json!({
        "schema": "gogap.did/1",
        "columns": columns.iter().map(|(w, f)| serde_json::json!({ "post_window": w, "fit": f })).collect::<Vec<_>>(),
    });
    write_atomic(&cfg.out_dir.join("did.json"), |f| {
        serde_json::to_writer_pretty(&mut *f, &doc)?;
        writeln!(f)
    })?;
    write_atomic(&cfg.out_dir.join("did.txt"), |f| f.write_all(text.as_bytes()))?;
    print!("{text}");
    Ok(())
}

#[derive(Debug, Error, PartialEq)]
pub enum CheatError {
    #[error("player {0:?} has no gap records")]
    UnknownPlayer(String),
    #[error("player {player:?} has no gap records in match {match_id:?}")]
    UnknownMatch { player: String, match_id: String },
    #[error("player {0:?} has no other matches to compare against")]
    EmptyComparisonSet(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, Copy)]
pub struct CheatOptions {
    pub tail: Tail,
    pub center: LeveneCenter,
    pub hist_bins: usize,
}

impl Default for CheatOptions {
    fn default() -> Self {
        CheatOptions { tail: Tail::Greater, center: LeveneCenter::Mean, hist_bins: 20 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HistRow {
    pub bin: usize,
    pub lower: f64,
    pub upper: f64,
    pub count_career: usize,
    pub count_suspect: usize,
    pub share_career: f64,
    pub share_suspect: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheatReport {
    pub schema: &'static str,
    pub player: String,
    pub match_id: String,
    /// Order of the samples in every test: (career, suspect).
    pub samples: [&'static str; 2],
    pub reports: Vec<TestReport>,
    pub career: SampleSummary,
    pub suspect: SampleSummary,
    #[serde(skip)]
    pub histogram: Vec<HistRow>,
}

/// Splits one player's gaps into the suspect match and the rest of the
/// career, then runs the four two-sample tests on (career, suspect).
pub fn cheat_check(gaps: &[GapRecord], player: &str, match_id: &str, opts: CheatOptions) -> Result<CheatReport, CheatError> {
    let mine: Vec<&GapRecord> = gaps.iter().filter(|g| g.player_id == player).collect();
    if mine.is_empty() {
        return Err(CheatError::UnknownPlayer(player.into()));
    }
    let suspect: Vec<f64> = mine.iter().filter(|g| g.match_id == match_id).filter_map(|g| g.delta).collect();
    if !mine.iter().any(|g| g.match_id == match_id) {
        return Err(CheatError::UnknownMatch { player: player.into(), match_id: match_id.into() });
    }
    let career: Vec<f64> = mine.iter().filter(|g| g.match_id != match_id).filter_map(|g| g.delta).collect();
    if career.is_empty() {
        return Err(CheatError::EmptyComparisonSet(player.into()));
    }
    let reports = vec![
        stats::welch_t(&career, &suspect, opts.tail)?,
        stats::wilcoxon_rank_sum(&career, &suspect, opts.tail)?,
        stats::ks_two_sample(&career, &suspect, opts.tail)?,
        stats::levene(&career, &suspect, opts.center, opts.tail)?,
    ];
    let share = |c: usize, n: usize| c as f64 / n as f64;
    let histogram = stats::histogram(&career, &suspect, opts.hist_bins)
        .into_iter()
        .enumerate()
        .map(|(bin, (lower, upper, a, b))| HistRow {
            bin,
            lower,
            upper,
            count_career: a,
            count_suspect: b,
            share_career: share(a, career.len()),
            share_suspect: share(b, suspect.len()),
        })
        .collect();
    Ok(CheatReport {
        schema: "gogap.cheatcheck/1",
        player: player.into(),
        match_id: match_id.into(),
        samples: ["career", "suspect"],
        reports,
        career: stats::summarize(&career)?,
        suspect: stats::summarize(&suspect)?,
        histogram,
    })
}

pub fn cmd_cheatcheck(cfg: &RunConfig, gaps_path: &Path, player: &str, match_id: &str, opts: CheatOptions) -> Result<(), CliError> {
    let gaps = gap::read_gaps(gaps_path).map_err(data)?;
    let report = cheat_check(&gaps, player, match_id, opts).map_err(data)?;
    write_atomic(&cfg.out_dir.join("cheatcheck.json"), |f| {
        serde_json::to_writer_pretty(&mut *f, &report)?;
        writeln!(f)
    })?;
    write_atomic(&cfg.out_dir.join("cheatcheck_hist.csv"), |f| {
        let mut w = tables::writer(f, HIST_SCHEMA, HIST_COLUMNS)?;
        for r in &report.histogram {
            w.serialize(r)?;
        }
        w.flush()
    })?;
    println!("career n={} mean={:.3}  suspect n={} mean={:.3}", report.career.n, report.career.mean, report.suspect.n, report.suspect.mean);
    for r in &report.reports {
        let fmt = |v: Option<f64>| v.map_or("NA".to_string(), |v| format!("{v:.4}"));
        println!("{:<18} statistic={:<12} p={}", r.test, fmt(r.statistic), fmt(r.p));
    }
    Ok(())
}
