//! Episodic, semantic and procedural memory persisted as JSON files.
//!
//! Episodic records are appended to `episodic.jsonl` and never rewritten.
//! Semantic records are keyed by `entity` and procedural records by `key`;
//! a newer record replaces the older one and the file is rewritten whole.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub const EPISODIC_FILE: &str = "episodic.jsonl";
pub const SEMANTIC_FILE: &str = "semantic.json";
pub const PROCEDURAL_FILE: &str = "procedural.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryKind {
    Episodic,
    Semantic,
    Procedural,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryRecord {
    pub kind: MemoryKind,
    pub timestamp: f64,
    pub payload: Value,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecallFilter {
    pub kind: Option<MemoryKind>,
    pub from: Option<f64>,
    pub to: Option<f64>,
    /// Matches the payload's `template_id` field.
    pub template_id: Option<String>,
}

impl RecallFilter {
    pub fn kind(kind: MemoryKind) -> Self {
        Self { kind: Some(kind), ..Self::default() }
    }

    fn accepts(&self, r: &MemoryRecord) -> bool {
        self.kind.is_none_or(|k| k == r.kind)
            && self.from.is_none_or(|f| r.timestamp >= f)
            && self.to.is_none_or(|t| r.timestamp <= t)
            && self
                .template_id
                .as_deref()
                .is_none_or(|t| r.payload.get("template_id").and_then(Value::as_str) == Some(t))
    }
}

fn required_string(payload: &Value, field: &str, kind: &str) -> Result<String> {
    payload
        .get(field)
        .and_then(Value::as_str)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .ok_or_else(|| Error::Schema(format!("{kind} payload needs a non-empty string `{field}`")))
}

/// Checks `payload` against the schema for `kind`; returns the upsert key if any.
fn validate(kind: MemoryKind, payload: &Value) -> Result<Option<String>> {
    if !payload.is_object() {
        return Err(Error::Schema("memory payload must be a JSON object".into()));
    }
    match kind {
        MemoryKind::Episodic => {
            required_string(payload, "event", "episodic")?;
            Ok(None)
        }
        MemoryKind::Semantic => {
            let key = required_string(payload, "entity", "semantic")?;
            if !payload.get("annotation").is_some_and(Value::is_object) {
                return Err(Error::Schema("semantic payload needs an `annotation` object".into()));
            }
            Ok(Some(key))
        }
        MemoryKind::Procedural => {
            let key = required_string(payload, "key", "procedural")?;
            if payload.get("value").is_none() {
                return Err(Error::Schema("procedural payload needs a `value`".into()));
            }
            Ok(Some(key))
        }
    }
}

fn key_of(kind: MemoryKind, r: &MemoryRecord) -> Option<&str> {
    let field = match kind {
        MemoryKind::Semantic => "entity",
        MemoryKind::Procedural => "key",
        MemoryKind::Episodic => return None,
    };
    r.payload.get(field).and_then(Value::as_str)
}

#[derive(Debug)]
pub struct MemoryStore {
    dir: PathBuf,
    episodic: Vec<MemoryRecord>,
    semantic: Vec<MemoryRecord>,
    procedural: Vec<MemoryRecord>,
    /// Latest timestamp written in this session.
    last: Option<f64>,
}

impl MemoryStore {
    /// Opens (creating if needed) a store rooted at `dir`.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let episodic = match File::open(dir.join(EPISODIC_FILE)) {
            Ok(f) => {
                let mut out = Vec::new();
                for (i, line) in BufReader::new(f).lines().enumerate() {
                    let line = line?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    let rec: MemoryRecord = serde_json::from_str(&line)
                        .map_err(|e| Error::Parse { line: i + 1, column: e.column(), message: e.to_string() })?;
                    out.push(rec);
                }
                out
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(e.into()),
        };
        let load = |name: &str| -> Result<Vec<MemoryRecord>> {
            match fs::read_to_string(dir.join(name)) {
                Ok(text) => serde_json::from_str(&text)
                    .map_err(|e| Error::Parse { line: e.line(), column: e.column(), message: e.to_string() }),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
                Err(e) => Err(e.into()),
            }
        };
        Ok(Self {
            semantic: load(SEMANTIC_FILE)?,
            procedural: load(PROCEDURAL_FILE)?,
            episodic,
            dir,
            last: None,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Records `payload` stamped with the current wall-clock time.
    pub fn record_event(&mut self, kind: MemoryKind, payload: Value) -> Result<MemoryRecord> {
        let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
        // wall clocks can step back; keep the session monotone instead of failing
        let ts = self.last.map_or(now, |l| l.max(now));
        self.record_event_at(kind, payload, ts)
    }

    /// Records `payload` at an explicit timestamp, which must not precede the
    /// previous one written in this session. The record is on disk when this returns.
    pub fn record_event_at(&mut self, kind: MemoryKind, payload: Value, timestamp: f64) -> Result<MemoryRecord> {
        if !timestamp.is_finite() {
            return Err(Error::Schema("timestamp must be finite".into()));
        }
        if let Some(last) = self.last {
            if timestamp < last {
                return Err(Error::ClockRegression { last, next: timestamp });
            }
        }
        let key = validate(kind, &payload)?;
        let rec = MemoryRecord { kind, timestamp, payload };
        match kind {
            MemoryKind::Episodic => {
                let mut f = OpenOptions::new().create(true).append(true).open(self.dir.join(EPISODIC_FILE))?;
                let mut line = serde_json::to_string(&rec)?;
                line.push('\n');
                f.write_all(line.as_bytes())?;
                f.sync_data()?;
                self.episodic.push(rec.clone());
            }
            MemoryKind::Semantic | MemoryKind::Procedural => {
                let (records, file) = if kind == MemoryKind::Semantic {
                    (&mut self.semantic, SEMANTIC_FILE)
                } else {
                    (&mut self.procedural, PROCEDURAL_FILE)
                };
                let mut next = records.clone();
                next.retain(|r| key_of(kind, r) != key.as_deref());
                next.push(rec.clone());
                write_atomic(&self.dir.join(file), &serde_json::to_string_pretty(&next)?)?;
                *records = next;
            }
        }
        self.last = Some(timestamp);
        Ok(rec)
    }

    /// Matching records across all kinds, ordered by timestamp.
    pub fn recall(&self, filter: &RecallFilter) -> Vec<MemoryRecord> {
        let mut out: Vec<MemoryRecord> = self
            .episodic
            .iter()
            .chain(&self.semantic)
            .chain(&self.procedural)
            .filter(|r| filter.accepts(r))
            .cloned()
            .collect();
        out.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        out
    }

    /// Current value of a procedural preference.
    pub fn preference(&self, key: &str) -> Option<&Value> {
        self.procedural
            .iter()
            .find(|r| key_of(MemoryKind::Procedural, r) == Some(key))
            .and_then(|r| r.payload.get("value"))
    }
}

fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(text.as_bytes())?;
        f.sync_data()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
