//! The session service: creates sessions, routes client messages through
//! the study state machine, persists every accepted step and rebuilds all
//! sessions from their logs on startup.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Instant;

use log::{info, warn};
use tracelens_core::analysis::Replayer;
use tracelens_core::domain::{Condition, InteractionEvent, StudyConfig, TaskOrder};
use tracelens_core::session::{Datasets, LogRecord, Session, SessionError};

use crate::format::DatasetDir;
use crate::protocol::{ClientMessage, ServerMessage};
use crate::store::{self, SessionLog, SessionMeta};
use crate::{Error, Result};

/// Messages to send back, and whether the connection must close.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Reply {
    pub messages: Vec<ServerMessage>,
    pub fatal: bool,
}

impl Reply {
    fn one(message: ServerMessage) -> Self {
        Self {
            messages: vec![message],
            fatal: false,
        }
    }

    fn session_error(err: &SessionError) -> Self {
        Self {
            messages: vec![ServerMessage::error(err.code(), err.to_string())],
            fatal: err.is_fatal(),
        }
    }
}

struct LiveSession {
    session: Session,
    log: SessionLog,
    /// Wall-clock origin for server-stamped events.
    origin: Instant,
    origin_ms: u64,
}

impl LiveSession {
    fn now_ms(&self) -> u64 {
        self.origin_ms + self.origin.elapsed().as_millis() as u64
    }
}

pub struct Service {
    dir: PathBuf,
    datasets: Datasets,
    condition_override: Option<Condition>,
    counter: Mutex<u64>,
    sessions: Mutex<HashMap<String, Arc<Mutex<LiveSession>>>>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

impl Service {
    /// Opens the session directory and rebuilds every logged session.
    pub fn open(dir: impl Into<PathBuf>, datasets: Datasets, condition_override: Option<Condition>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(Error::io(&dir))?;
        let mut lookup = DatasetDir::default();
        lookup.insert((*datasets.politics).clone());
        lookup.insert((*datasets.movies).clone());

        let mut sessions = HashMap::new();
        let logs = store::list_logs(&dir)?;
        for path in &logs {
            if store::repair_tail(path)? {
                warn!("{}: dropped torn final line", path.display());
            }
            let session = recover(path, &lookup)?;
            let id = session.state.session_id.clone();
            let origin_ms = last_timestamp(path)?;
            sessions.insert(
                id,
                Arc::new(Mutex::new(LiveSession {
                    session,
                    log: SessionLog::open(path)?,
                    origin: Instant::now(),
                    origin_ms,
                })),
            );
        }
        if !logs.is_empty() {
            info!("recovered {} sessions from {}", logs.len(), dir.display());
        }
        let counter = store::read_counter(&dir)?.max(sessions.len() as u64);
        Ok(Self {
            dir,
            datasets,
            condition_override,
            counter: Mutex::new(counter),
            sessions: Mutex::new(sessions),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Starts a session. Unspecified conditions rotate CTRL, SUM, RT, RT_SUM;
    /// unspecified task orders alternate within each condition.
    pub fn create_session(&self, condition: Option<Condition>, task_order: Option<TaskOrder>) -> Result<String> {
        let mut counter = lock(&self.counter);
        let n = *counter;
        let condition = condition
            .or(self.condition_override)
            .unwrap_or(Condition::ALL[(n % 4) as usize]);
        let task_order = task_order.unwrap_or(if (n / 4).is_multiple_of(2) {
            TaskOrder::PoliticsFirst
        } else {
            TaskOrder::MoviesFirst
        });
        let id = format!("s{:06}", n + 1);
        store::write_counter(&self.dir, n + 1)?;
        *counter = n + 1;
        drop(counter);

        let config = StudyConfig::new(condition, task_order);
        let session = Session::new(id.clone(), config, self.datasets.clone());
        let mut log = SessionLog::open(&store::log_path(&self.dir, &id))?;
        log.append(&[LogRecord::Start {
            session_id: id.clone(),
            config,
            datasets: self.datasets.ids(),
        }])?;
        store::write_meta(&self.dir, &SessionMeta::of(&session.state, self.datasets.ids()))?;
        info!("session {id}: {condition}, {}", task_order.as_str());
        lock(&self.sessions).insert(
            id.clone(),
            Arc::new(Mutex::new(LiveSession {
                session,
                log,
                origin: Instant::now(),
                origin_ms: 0,
            })),
        );
        Ok(id)
    }

    fn live(&self, id: &str) -> Option<Arc<Mutex<LiveSession>>> {
        lock(&self.sessions).get(id).cloned()
    }

    pub fn contains(&self, id: &str) -> bool {
        lock(&self.sessions).contains_key(id)
    }

    /// A copy of the session's current state and metrics.
    pub fn session(&self, id: &str) -> Option<Session> {
        self.live(id).map(|s| lock(&s).session.clone())
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = lock(&self.sessions).keys().cloned().collect();
        ids.sort();
        ids
    }

    pub fn hello(&self, id: &str) -> Option<ServerMessage> {
        let live = self.live(id)?;
        let live = lock(&live);
        let state = &live.session.state;
        Some(ServerMessage::Hello {
            session: id.to_string(),
            condition: state.config.condition,
            task_order: state.config.task_order,
            task: state.current_task,
            phase: state.phase,
            event_count: state.event_count,
        })
    }

    pub fn handle_text(&self, id: &str, text: &str) -> Reply {
        match serde_json::from_str::<ClientMessage>(text) {
            Ok(msg) => self.handle(id, msg),
            Err(e) => Reply::one(ServerMessage::error("validation", format!("bad message: {e}"))),
        }
    }

    pub fn handle(&self, id: &str, msg: ClientMessage) -> Reply {
        let Some(live) = self.live(id) else {
            return Reply {
                messages: vec![ServerMessage::error("unknown_session", id)],
                fatal: true,
            };
        };
        let mut live = lock(&live);
        match self.step(&mut live, msg) {
            Ok(reply) => reply,
            Err(e) => {
                warn!("session {id}: {e}");
                Reply {
                    messages: vec![ServerMessage::error("storage", e.to_string())],
                    fatal: true,
                }
            }
        }
    }

    /// Applies one message. On a storage failure the in-memory session is
    /// rolled back so it never runs ahead of its log.
    fn step(&self, live: &mut LiveSession, msg: ClientMessage) -> Result<Reply> {
        let before = live.session.clone();
        let result = self.step_inner(live, msg);
        if result.is_err() {
            live.session = before;
        }
        result
    }

    fn step_inner(&self, live: &mut LiveSession, msg: ClientMessage) -> Result<Reply> {
        let session_id = live.session.state.session_id.clone();
        match msg {
            ClientMessage::Event {
                seq,
                ts,
                kind,
                target,
                detail,
            } => {
                let event = InteractionEvent {
                    session_id,
                    seq,
                    timestamp: ts,
                    kind,
                    target,
                    detail,
                };
                let outcome = match live.session.handle_event(&event) {
                    Ok(o) => o,
                    Err(e) => return Ok(Reply::session_error(&e)),
                };
                let mut records = vec![LogRecord::Event(event.clone())];
                records.extend(outcome.snapshot.clone().map(LogRecord::Metrics));
                live.log.append(&records)?;
                let mut reply = Reply::default();
                if let (true, Some(snap)) = (outcome.push, &outcome.snapshot) {
                    reply.messages.push(ServerMessage::metrics(snap));
                }
                if kind.targets_point() && kind != tracelens_core::domain::EventKind::Hover {
                    reply.messages.push(ServerMessage::Selection {
                        seq: event.seq,
                        ids: live.session.state.selections.clone(),
                    });
                }
                Ok(reply)
            }
            ClientMessage::Toggle { id, ts } => {
                let ts = ts.unwrap_or_else(|| live.now_ms());
                let (event, outcome) = match live.session.toggle(&id, ts) {
                    Ok(r) => r,
                    Err(e) => return Ok(Reply::session_error(&e)),
                };
                let mut records = vec![LogRecord::Event(event.clone())];
                records.extend(outcome.snapshot.clone().map(LogRecord::Metrics));
                live.log.append(&records)?;
                let mut reply = Reply::one(ServerMessage::Selection {
                    seq: event.seq,
                    ids: live.session.state.selections.clone(),
                });
                if let (true, Some(snap)) = (outcome.push, &outcome.snapshot) {
                    reply.messages.push(ServerMessage::metrics(snap));
                }
                Ok(reply)
            }
            ClientMessage::Submit => {
                let phase = match live.session.submit() {
                    Ok(p) => p,
                    Err(e) => return Ok(Reply::session_error(&e)),
                };
                live.log.append(&[LogRecord::Submit { phase }])?;
                self.persist_meta(live)?;
                Ok(Reply::one(ServerMessage::Phase {
                    phase,
                    task: live.session.state.current_task,
                }))
            }
            ClientMessage::Survey { responses } => {
                let task = live.session.state.current_task;
                let phase = match live.session.record_survey(&responses) {
                    Ok(p) => p,
                    Err(e) => return Ok(Reply::session_error(&e)),
                };
                live.log.append(&[LogRecord::Survey { task, responses, phase }])?;
                self.persist_meta(live)?;
                Ok(Reply::one(ServerMessage::Phase {
                    phase,
                    task: live.session.state.current_task,
                }))
            }
            ClientMessage::GetReport => Ok(match live.session.report() {
                Ok(report) => Reply::one(ServerMessage::Report(report)),
                Err(e) => Reply::session_error(&e),
            }),
        }
    }

    fn persist_meta(&self, live: &LiveSession) -> Result<()> {
        store::write_meta(&self.dir, &SessionMeta::of(&live.session.state, self.datasets.ids()))
    }
}

fn recover(path: &Path, datasets: &DatasetDir) -> Result<Session> {
    let stem = path
        .file_name()
        .map(|n| n.to_string_lossy().trim_end_matches(store::LOG_SUFFIX).to_string())
        .unwrap_or_default();
    let mut replayer = Replayer::new(stem);
    for (line, record) in store::read_log(path)? {
        replayer
            .apply(&record, |ids| datasets.resolve(ids))
            .map_err(|source| Error::Replay {
                path: path.to_path_buf(),
                line,
                source,
            })?;
    }
    replayer
        .finish()
        .session
        .ok_or_else(|| Error::Other(format!("{}: log has no start record", path.display())))
}

fn last_timestamp(path: &Path) -> Result<u64> {
    Ok(store::read_log(path)?
        .iter()
        .filter_map(|(_, r)| match r {
            LogRecord::Event(e) => Some(e.timestamp),
            _ => None,
        })
        .max()
        .unwrap_or(0))
}
