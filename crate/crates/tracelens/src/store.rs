//! Session persistence: one append-only JSONL log per session
//! (`<dir>/<id>.jsonl`), a metadata snapshot (`<dir>/<id>.meta.json`) and a
//! counter file that keeps session ids unique across restarts.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tracelens_core::domain::{StudyConfig, Task};
use tracelens_core::session::{LogRecord, Phase, SessionState, TaskOutcome};

use crate::{Error, Result};

pub const LOG_SUFFIX: &str = ".jsonl";
const COUNTER_FILE: &str = "counter";

pub fn log_path(dir: &Path, session_id: &str) -> PathBuf {
    dir.join(format!("{session_id}{LOG_SUFFIX}"))
}

pub fn meta_path(dir: &Path, session_id: &str) -> PathBuf {
    dir.join(format!("{session_id}.meta.json"))
}

/// Appends records, one JSON object per line. Each record reaches the OS
/// before `append` returns.
#[derive(Debug)]
pub struct SessionLog {
    path: PathBuf,
    file: File,
}

impl SessionLog {
    pub fn open(path: &Path) -> Result<Self> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(Error::io(path))?;
        Ok(Self {
            path: path.to_path_buf(),
            file,
        })
    }

    pub fn append(&mut self, records: &[LogRecord]) -> Result<()> {
        let mut buf = Vec::new();
        for r in records {
            serde_json::to_writer(&mut buf, r).map_err(|e| Error::Other(e.to_string()))?;
            buf.push(b'\n');
        }
        self.file.write_all(&buf).map_err(Error::io(&self.path))?;
        self.file.flush().map_err(Error::io(&self.path))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

/// Parses a log. Lines are numbered from 1; blank lines are skipped.
pub fn read_log(path: &Path) -> Result<Vec<(usize, LogRecord)>> {
    let file = File::open(path).map_err(Error::io(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(Error::io(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: e.to_string(),
        })?;
        out.push((i + 1, record));
    }
    Ok(out)
}

/// Drops a torn final line (a crash mid-append) so the log ends on a record
/// boundary. Returns whether anything was cut.
pub fn repair_tail(path: &Path) -> Result<bool> {
    let bytes = fs::read(path).map_err(Error::io(path))?;
    let keep = match bytes.iter().rposition(|&b| b == b'\n') {
        Some(i) if i + 1 == bytes.len() => return Ok(false),
        Some(i) => i + 1,
        None if bytes.is_empty() => return Ok(false),
        None => 0,
    };
    let file = OpenOptions::new().write(true).open(path).map_err(Error::io(path))?;
    file.set_len(keep as u64).map_err(Error::io(path))?;
    Ok(true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub session_id: String,
    pub config: StudyConfig,
    pub datasets: BTreeMap<Task, String>,
    pub phase: Phase,
    pub current_task: Task,
    pub selections: Vec<String>,
    pub completed: Vec<TaskOutcome>,
}

impl SessionMeta {
    pub fn of(state: &SessionState, datasets: BTreeMap<Task, String>) -> Self {
        Self {
            session_id: state.session_id.clone(),
            config: state.config,
            datasets,
            phase: state.phase,
            current_task: state.current_task,
            selections: state.selections.clone(),
            completed: state.completed.clone(),
        }
    }
}

/// Writes the metadata file through a temp file and rename.
pub fn write_meta(dir: &Path, meta: &SessionMeta) -> Result<()> {
    let path = meta_path(dir, &meta.session_id);
    let tmp = path.with_extension("json.tmp");
    let text = serde_json::to_string_pretty(meta).map_err(|e| Error::Other(e.to_string()))?;
    fs::write(&tmp, text).map_err(Error::io(&tmp))?;
    fs::rename(&tmp, &path).map_err(Error::io(&path))
}

pub fn read_meta(dir: &Path, session_id: &str) -> Result<SessionMeta> {
    let path = meta_path(dir, session_id);
    let text = fs::read_to_string(&path).map_err(Error::io(&path))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path,
        line: e.line(),
        msg: e.to_string(),
    })
}

/// Reads the persisted session counter (0 when absent).
pub fn read_counter(dir: &Path) -> Result<u64> {
    let path = dir.join(COUNTER_FILE);
    match fs::read_to_string(&path) {
        Ok(text) => text.trim().parse().map_err(|_| Error::Parse {
            path,
            line: 1,
            msg: format!("bad counter {text:?}"),
        }),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(0),
        Err(e) => Err(Error::Io { path, source: e }),
    }
}

pub fn write_counter(dir: &Path, value: u64) -> Result<()> {
    let path = dir.join(COUNTER_FILE);
    let tmp = dir.join(format!("{COUNTER_FILE}.tmp"));
    fs::write(&tmp, format!("{value}\n")).map_err(Error::io(&tmp))?;
    fs::rename(&tmp, &path).map_err(Error::io(&path))
}

/// Log files in `dir`, sorted by name.
pub fn list_logs(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut logs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(Error::io(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_string_lossy().ends_with(LOG_SUFFIX))
        .collect();
    logs.sort();
    Ok(logs)
}
