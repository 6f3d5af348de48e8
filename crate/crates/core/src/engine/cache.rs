//! Persistent evaluation cache.
//!
//! Two files share a base path:
//!
//! * `<name>.log`: a text header line
//!   `GOGAP-EVAL-CACHE v1 engine=<engine_id>` followed by records, each
//!   `u32 LE payload length | u32 LE CRC-32 of payload | payload`, where the
//!   payload is the JSON object `{"key": CacheKey, "eval": EngineEvaluation}`.
//! * `<name>.idx`: header `GOGAP-EVAL-INDEX v1 log_len=<bytes>` then one JSON
//!   line `{"key": .., "offset": ..}` per record. The index is only trusted
//!   when its `log_len` matches the log; otherwise the log is rescanned.
//!
//! A put appends one whole record under the writer lock and is skipped when
//! the key is already present, so concurrent puts of one key leave exactly
//! one record. Records with a bad checksum are reported and never served.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::hash::{Hash, Hasher};
use std::io::{self, BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::EngineEvaluation;
use crate::board::Color;

pub const FORMAT_VERSION: u32 = 1;
const LOG_MAGIC: &str = "GOGAP-EVAL-CACHE";
const IDX_MAGIC: &str = "GOGAP-EVAL-INDEX";

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache entry at offset {offset} is corrupt: {reason}")]
    CacheCorrupt { offset: u64, reason: String },
    #[error("{path}: {reason}")]
    BadHeader { path: PathBuf, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Content address of one evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheKey {
    pub position_key: u64,
    pub to_move: Color,
    pub engine_id: String,
    pub visits_budget: u32,
    /// Komi as IEEE-754 bits so the key has exact equality.
    pub komi_bits: u64,
    pub ruleset: String,
}

impl Hash for CacheKey {
    fn hash<H: Hasher>(&self, h: &mut H) {
        self.position_key.hash(h);
        self.to_move.hash(h);
        self.engine_id.hash(h);
        self.visits_budget.hash(h);
        self.komi_bits.hash(h);
        self.ruleset.hash(h);
    }
}

impl CacheKey {
    pub fn new(position_key: u64, to_move: Color, engine_id: &str, visits_budget: u32, komi: f64, ruleset: &str) -> CacheKey {
        CacheKey {
            position_key,
            to_move,
            engine_id: engine_id.to_string(),
            visits_budget,
            komi_bits: komi.to_bits(),
            ruleset: ruleset.to_string(),
        }
    }

    pub fn komi(&self) -> f64 {
        f64::from_bits(self.komi_bits)
    }
}

#[derive(Serialize, Deserialize)]
struct Record {
    key: CacheKey,
    eval: EngineEvaluation,
}

#[derive(Serialize, Deserialize)]
struct IndexLine {
    key: CacheKey,
    offset: u64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct CacheInfo {
    pub engine_id: String,
    pub version: u32,
    pub entries: usize,
    pub log_bytes: u64,
    pub corrupt: Vec<String>,
    pub index_used: bool,
}

pub struct EvalCache {
    log_path: PathBuf,
    idx_path: PathBuf,
    engine_id: String,
    index: RwLock<HashMap<CacheKey, u64>>,
    writer: Mutex<File>,
    reader: Mutex<File>,
    corrupt: Mutex<Vec<String>>,
    index_used: bool,
}

impl EvalCache {
    /// Opens or creates the cache pair at `base` (`base.log`, `base.idx`).
    pub fn open(base: &Path, engine_id: &str) -> Result<EvalCache, CacheError> {
        let log_path = base.with_extension("log");
        let idx_path = base.with_extension("idx");
        if let Some(dir) = log_path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        let mut writer = OpenOptions::new().read(true).append(true).create(true).open(&log_path)?;
        let header_engine = if writer.metadata()?.len() == 0 {
            writeln!(writer, "{LOG_MAGIC} v{FORMAT_VERSION} engine={engine_id}")?;
            writer.flush()?;
            engine_id.to_string()
        } else {
            read_log_header(&log_path)?.1
        };
        let reader = File::open(&log_path)?;
        let mut cache = EvalCache {
            log_path,
            idx_path,
            engine_id: header_engine,
            index: RwLock::new(HashMap::new()),
            writer: Mutex::new(writer),
            reader: Mutex::new(reader),
            corrupt: Mutex::new(Vec::new()),
            index_used: false,
        };
        cache.load()?;
        Ok(cache)
    }

    fn load(&mut self) -> Result<(), CacheError> {
        let log_len = std::fs::metadata(&self.log_path)?.len();
        if let Some(map) = self.read_index(log_len) {
            *self.index.get_mut().expect("lock") = map;
            self.index_used = true;
            return Ok(());
        }
        let (header_len, _) = read_log_header(&self.log_path)?;
        let mut file = BufReader::new(File::open(&self.log_path)?);
        file.seek(SeekFrom::Start(header_len))?;
        let mut offset = header_len;
        let mut map = HashMap::new();
        let mut corrupt = Vec::new();
        let mut good_end = offset;
        loop {
            let mut head = [0u8; 8];
            match read_full(&mut file, &mut head)? {
                0 => break,
                8 => {}
                _ => {
                    corrupt.push(format!("offset {offset}: torn record header, tail truncated"));
                    break;
                }
            }
            let len = u32::from_le_bytes(head[0..4].try_into().unwrap()) as usize;
            let crc = u32::from_le_bytes(head[4..8].try_into().unwrap());
            let mut payload = vec![0u8; len];
            if read_full(&mut file, &mut payload)? != len {
                corrupt.push(format!("offset {offset}: torn record payload, tail truncated"));
                break;
            }
            match decode(&payload, crc) {
                Ok(rec) => {
                    map.entry(rec.key).or_insert(offset);
                }
                Err(reason) => corrupt.push(format!("offset {offset}: {reason}")),
            }
            offset += 8 + len as u64;
            good_end = offset;
        }
        if good_end < log_len {
            // drop a torn tail so later appends start on a record boundary
            self.writer.get_mut().expect("lock").set_len(good_end)?;
        }
        *self.index.get_mut().expect("lock") = map;
        *self.corrupt.get_mut().expect("lock") = corrupt;
        Ok(())
    }

    fn read_index(&self, log_len: u64) -> Option<HashMap<CacheKey, u64>> {
        let f = File::open(&self.idx_path).ok()?;
        let mut lines = BufReader::new(f).lines();
        let header = lines.next()?.ok()?;
        let expected = format!("{IDX_MAGIC} v{FORMAT_VERSION} log_len={log_len}");
        if header != expected {
            return None;
        }
        let mut map = HashMap::new();
        for line in lines {
            let l: IndexLine = serde_json::from_str(&line.ok()?).ok()?;
            if l.offset >= log_len {
                return None;
            }
            map.insert(l.key, l.offset);
        }
        Some(map)
    }

    /// Rewrites the side index atomically (temp file + rename).
    pub fn write_index(&self) -> Result<(), CacheError> {
        let writer = self.writer.lock().expect("cache writer poisoned");
        let log_len = writer.metadata()?.len();
        let index = self.index.read().expect("cache index poisoned");
        let mut entries: Vec<_> = index.iter().collect();
        entries.sort_by_key(|(_, off)| **off);
        let tmp = self.idx_path.with_extension("idx.tmp");
        {
            let mut f = io::BufWriter::new(File::create(&tmp)?);
            writeln!(f, "{IDX_MAGIC} v{FORMAT_VERSION} log_len={log_len}")?;
            for (key, offset) in entries {
                let line = serde_json::to_string(&IndexLine { key: key.clone(), offset: *offset }).map_err(io::Error::other)?;
                writeln!(f, "{line}")?;
            }
            f.flush()?;
        }
        std::fs::rename(&tmp, &self.idx_path)?;
        Ok(())
    }

    pub fn get(&self, key: &CacheKey) -> Result<Option<EngineEvaluation>, CacheError> {
        let Some(offset) = self.index.read().expect("cache index poisoned").get(key).copied() else {
            return Ok(None);
        };
        let payload;
        let crc;
        {
            let mut r = self.reader.lock().expect("cache reader poisoned");
            r.seek(SeekFrom::Start(offset))?;
            let mut head = [0u8; 8];
            r.read_exact(&mut head)?;
            let len = u32::from_le_bytes(head[0..4].try_into().unwrap()) as usize;
            crc = u32::from_le_bytes(head[4..8].try_into().unwrap());
            let mut buf = vec![0u8; len];
            r.read_exact(&mut buf)?;
            payload = buf;
        }
        match decode(&payload, crc) {
            Ok(rec) if rec.key == *key => Ok(Some(rec.eval)),
            Ok(_) => Err(self.flag(offset, "index points at a record for another key".into())),
            Err(reason) => Err(self.flag(offset, reason)),
        }
    }

    fn flag(&self, offset: u64, reason: String) -> CacheError {
        self.corrupt.lock().expect("lock").push(format!("offset {offset}: {reason}"));
        self.index.write().expect("lock").retain(|_, o| *o != offset);
        CacheError::CacheCorrupt { offset, reason }
    }

    /// Appends `eval` under `key` unless the key is already stored.
    /// Returns whether a record was written.
    pub fn put(&self, key: &CacheKey, eval: &EngineEvaluation) -> Result<bool, CacheError> {
        let payload = serde_json::to_vec(&Record { key: key.clone(), eval: eval.clone() }).map_err(io::Error::other)?;
        let mut record = Vec::with_capacity(payload.len() + 8);
        record.extend_from_slice(&(payload.len() as u32).to_le_bytes());
        record.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
        record.extend_from_slice(&payload);

        let mut w = self.writer.lock().expect("cache writer poisoned");
        if self.index.read().expect("cache index poisoned").contains_key(key) {
            return Ok(false);
        }
        let offset = w.seek(SeekFrom::End(0))?;
        w.write_all(&record)?;
        w.flush()?;
        self.index.write().expect("cache index poisoned").insert(key.clone(), offset);
        Ok(true)
    }

    pub fn len(&self) -> usize {
        self.index.read().expect("cache index poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn corrupt_entries(&self) -> Vec<String> {
        self.corrupt.lock().expect("lock").clone()
    }

    pub fn info(&self) -> Result<CacheInfo, CacheError> {
        Ok(CacheInfo {
            engine_id: self.engine_id.clone(),
            version: FORMAT_VERSION,
            entries: self.len(),
            log_bytes: std::fs::metadata(&self.log_path)?.len(),
            corrupt: self.corrupt_entries(),
            index_used: self.index_used,
        })
    }

    pub fn log_path(&self) -> &Path {
        &self.log_path
    }

    pub fn index_path(&self) -> &Path {
        &self.idx_path
    }
}

fn decode(payload: &[u8], crc: u32) -> Result<Record, String> {
    if crc32fast::hash(payload) != crc {
        return Err("checksum mismatch".into());
    }
    serde_json::from_slice(payload).map_err(|e| format!("undecodable record: {e}"))
}

fn read_full(r: &mut impl Read, buf: &mut [u8]) -> io::Result<usize> {
    let mut n = 0;
    while n < buf.len() {
        match r.read(&mut buf[n..])? {
            0 => break,
            k => n += k,
        }
    }
    Ok(n)
}

/// Returns (header length in bytes, engine id).
fn read_log_header(path: &Path) -> Result<(u64, String), CacheError> {
    let mut line = String::new();
    BufReader::new(File::open(path)?).read_line(&mut line)?;
    let bad = |reason: &str| CacheError::BadHeader { path: path.to_path_buf(), reason: reason.to_string() };
    if !line.ends_with('\n') {
        return Err(bad("missing header line"));
    }
    let mut parts = line.trim_end().splitn(3, ' ');
    if parts.next() != Some(LOG_MAGIC) {
        return Err(bad("not an evaluation cache"));
    }
    if parts.next() != Some(&format!("v{FORMAT_VERSION}")) {
        return Err(bad("unsupported cache version"));
    }
    let engine = parts.next().and_then(|p| p.strip_prefix("engine=")).ok_or_else(|| bad("missing engine id"))?;
    Ok((line.len() as u64, engine.to_string()))
}

impl Drop for EvalCache {
    fn drop(&mut self) {
        let _ = self.write_index();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::board::BoardState;
    use crate::engine::{Engine, EngineParams, ScriptedEngine};
    use std::sync::Arc;

    fn sample() -> (CacheKey, EngineEvaluation) {
        let s = BoardState::new(5, 7.0).unwrap();
        let p = EngineParams::new("scripted-v1");
        let e = ScriptedEngine::new().analyze(&s, &p).unwrap();
        (p.cache_key(&s), e)
    }

    #[test]
    fn put_then_get() {
        let dir = tempfile::tempdir().unwrap();
        let c = EvalCache::open(&dir.path().join("c"), "scripted-v1").unwrap();
        let (k, e) = sample();
        assert!(c.put(&k, &e).unwrap());
        assert_eq!(c.get(&k).unwrap(), Some(e.clone()));
        let mut other = k.clone();
        other.visits_budget += 1;
        assert_eq!(c.get(&other).unwrap(), None);
        assert!(!c.put(&k, &e).unwrap());
    }

    #[test]
    fn reopen_uses_index_or_rescans() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("c");
        let (k, e) = sample();
        {
            let c = EvalCache::open(&base, "scripted-v1").unwrap();
            c.put(&k, &e).unwrap();
        }
        let c = EvalCache::open(&base, "scripted-v1").unwrap();
        assert!(c.info().unwrap().index_used);
        assert_eq!(c.get(&k).unwrap(), Some(e.clone()));
        drop(c);
        std::fs::remove_file(base.with_extension("idx")).unwrap();
        let c = EvalCache::open(&base, "scripted-v1").unwrap();
        assert!(!c.info().unwrap().index_used);
        assert_eq!(c.get(&k).unwrap(), Some(e));
    }

    #[test]
    fn corrupt_records_are_flagged_not_served() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("c");
        let (k, e) = sample();
        let mut k2 = k.clone();
        k2.ruleset = "chinese".into();
        {
            let c = EvalCache::open(&base, "scripted-v1").unwrap();
            c.put(&k, &e).unwrap();
            c.put(&k2, &e).unwrap();
        }
        std::fs::remove_file(base.with_extension("idx")).unwrap();
        // flip a byte inside the first payload
        let log = base.with_extension("log");
        let mut bytes = std::fs::read(&log).unwrap();
        let header = bytes.iter().position(|b| *b == b'\n').unwrap() + 1;
        bytes[header + 20] ^= 0x55;
        // and tear the tail
        bytes.extend_from_slice(&[9, 0, 0]);
        std::fs::write(&log, &bytes).unwrap();
        let c = EvalCache::open(&base, "scripted-v1").unwrap();
        assert_eq!(c.get(&k).unwrap(), None);
        assert_eq!(c.get(&k2).unwrap(), Some(e.clone()));
        assert_eq!(c.corrupt_entries().len(), 2);
        // the torn tail was cut, so new appends are readable after reopening
        assert!(c.put(&k, &e).unwrap());
        drop(c);
        std::fs::remove_file(base.with_extension("idx")).unwrap();
        let c = EvalCache::open(&base, "scripted-v1").unwrap();
        assert_eq!(c.get(&k).unwrap(), Some(e));
    }

    #[test]
    fn concurrent_puts_of_one_key_leave_one_record() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("c");
        let c = Arc::new(EvalCache::open(&base, "scripted-v1").unwrap());
        let (k, e) = sample();
        for _ in 0..20 {
            let writes: usize = std::thread::scope(|s| {
                let hs: Vec<_> = (0..2)
                    .map(|_| {
                        let (c, k, e) = (&c, &k, &e);
                        s.spawn(move || {
                            let w = c.put(k, e).unwrap() as usize;
                            assert_eq!(c.get(k).unwrap().as_ref(), Some(e));
                            w
                        })
                    })
                    .collect();
                hs.into_iter().map(|h| h.join().unwrap()).sum()
            });
            assert!(writes <= 1);
        }
        drop(c);
        std::fs::remove_file(base.with_extension("idx")).unwrap();
        // count durable records by scanning
        let log = std::fs::read(base.with_extension("log")).unwrap();
        let mut off = log.iter().position(|b| *b == b'\n').unwrap() + 1;
        let mut n = 0;
        while off < log.len() {
            let len = u32::from_le_bytes(log[off..off + 4].try_into().unwrap()) as usize;
            off += 8 + len;
            n += 1;
        }
        assert_eq!(n, 1);
    }

    #[test]
    fn rejects_foreign_files() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("c");
        std::fs::write(base.with_extension("log"), "hello\n").unwrap();
        assert!(matches!(EvalCache::open(&base, "x"), Err(CacheError::BadHeader { .. })));
    }
}
