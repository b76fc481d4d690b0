//! Study session state machine.
//!
//! Per task the phase path depends on the condition:
//!
//! ```text
//! CTRL, RT     task_phase1 -> revision -> summative_post -> survey
//! SUM, RT_SUM  task_phase1 -> summative_pre -> revision -> survey
//! ```
//!
//! A session starts in `practice`, runs both tasks in the configured order
//! and ends in `done`. Every transition is forward-only. `submit` drives all
//! transitions except leaving `survey`, which needs the survey answers.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, EventKind, InteractionEvent, StudyConfig, Task};
use crate::metrics::{qualifying, summative_comparisons, DistributionComparison, MetricSnapshot, MetricsEngine};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Practice,
    TaskPhase1,
    SummativePre,
    Revision,
    SummativePost,
    Survey,
    Done,
}

impl Phase {
    /// Phases that accept interaction events and selection changes. The
    /// practice task runs entirely in the client.
    pub fn interactive(self) -> bool {
        matches!(self, Phase::TaskPhase1 | Phase::Revision)
    }

    pub fn summative(self) -> bool {
        matches!(self, Phase::SummativePre | Phase::SummativePost)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Practice => "practice",
            Phase::TaskPhase1 => "task_phase1",
            Phase::SummativePre => "summative_pre",
            Phase::Revision => "revision",
            Phase::SummativePost => "summative_post",
            Phase::Survey => "survey",
            Phase::Done => "done",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Surprise {
    Yes,
    No,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Focus {
    #[serde(rename = "high")]
    High,
    #[serde(rename = "medium")]
    Medium,
    #[serde(rename = "low")]
    Low,
    #[serde(rename = "NA")]
    NotApplicable,
}

impl Focus {
    pub fn as_str(self) -> &'static str {
        match self {
            Focus::High => "high",
            Focus::Medium => "medium",
            Focus::Low => "low",
            Focus::NotApplicable => "NA",
        }
    }
}

impl Surprise {
    pub fn as_str(self) -> &'static str {
        match self {
            Surprise::Yes => "yes",
            Surprise::No => "no",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyResponse {
    pub attribute: String,
    pub surprise: Surprise,
    pub focus: Focus,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SessionError {
    /// Out-of-order sequence number. Fatal for the connection.
    #[error("expected seq {expected}, got {got}")]
    Protocol { expected: u64, got: u64 },
    #[error("{action} not allowed in phase {phase}")]
    Phase { action: &'static str, phase: Phase },
    #[error("selection already holds {0} items")]
    Capacity(usize),
    #[error("selection has {have} items, {need} required")]
    IncompleteSelection { have: usize, need: usize },
    #[error("{0}")]
    Validation(String),
}

impl SessionError {
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::Protocol { .. } => "protocol",
            SessionError::Phase { .. } => "phase",
            SessionError::Capacity(_) => "capacity",
            SessionError::IncompleteSelection { .. } => "incomplete_selection",
            SessionError::Validation(_) => "validation",
        }
    }

    pub fn is_fatal(&self) -> bool {
        matches!(self, SessionError::Protocol { .. })
    }
}

/// What a finished task left behind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskOutcome {
    pub task: Task,
    pub phase1_selection: Vec<String>,
    pub final_selection: Vec<String>,
    pub survey: Vec<SurveyResponse>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    pub config: StudyConfig,
    pub current_task: Task,
    pub phase: Phase,
    /// Insertion-ordered, duplicate-free.
    pub selections: Vec<String>,
    pub phase1_selection: Option<Vec<String>>,
    pub final_selection: Option<Vec<String>>,
    pub event_count: u64,
    pub completed: Vec<TaskOutcome>,
}

impl SessionState {
    pub fn new(session_id: impl Into<String>, config: StudyConfig) -> Self {
        Self {
            session_id: session_id.into(),
            config,
            current_task: config.task_order.tasks()[0],
            phase: Phase::Practice,
            selections: Vec::new(),
            phase1_selection: None,
            final_selection: None,
            event_count: 0,
            completed: Vec::new(),
        }
    }

    fn require_interactive(&self, action: &'static str) -> Result<(), SessionError> {
        if self.phase.interactive() {
            Ok(())
        } else {
            Err(SessionError::Phase {
                action,
                phase: self.phase,
            })
        }
    }

    /// Validates and applies one interaction event. Select and deselect
    /// events change the selection.
    pub fn apply_event(&mut self, event: &InteractionEvent, dataset: &Dataset) -> Result<(), SessionError> {
        let expected = self.event_count + 1;
        if event.seq != expected {
            return Err(SessionError::Protocol {
                expected,
                got: event.seq,
            });
        }
        self.require_interactive("interaction")?;
        if let Some(problem) = event.check_target(dataset) {
            return Err(SessionError::Validation(problem));
        }
        let target = event.target.as_deref().unwrap_or_default();
        match event.kind {
            EventKind::Select => {
                if self.selections.iter().any(|s| s == target) {
                    return Err(SessionError::Validation(format!("{target} is already selected")));
                }
                if self.selections.len() >= self.config.selection_size {
                    return Err(SessionError::Capacity(self.selections.len()));
                }
                self.selections.push(String::from(target));
            }
            EventKind::Deselect => {
                let Some(pos) = self.selections.iter().position(|s| s == target) else {
                    return Err(SessionError::Validation(format!("{target} is not selected")));
                };
                self.selections.remove(pos);
            }
            _ => {}
        }
        self.event_count = expected;
        Ok(())
    }

    /// Builds the select or deselect event a click on `point_id` produces.
    pub fn toggle_event(&self, point_id: &str, timestamp: u64) -> Result<InteractionEvent, SessionError> {
        self.require_interactive("selection")?;
        let kind = if self.selections.iter().any(|s| s == point_id) {
            EventKind::Deselect
        } else if self.selections.len() >= self.config.selection_size {
            return Err(SessionError::Capacity(self.selections.len()));
        } else {
            EventKind::Select
        };
        Ok(InteractionEvent::new(
            self.session_id.clone(),
            self.event_count + 1,
            timestamp,
            kind,
            Some(String::from(point_id)),
        ))
    }

    fn require_full_selection(&self) -> Result<(), SessionError> {
        let need = self.config.selection_size;
        if self.selections.len() == need {
            Ok(())
        } else {
            Err(SessionError::IncompleteSelection {
                have: self.selections.len(),
                need,
            })
        }
    }

    /// Advances past the current phase and returns the new one.
    pub fn submit(&mut self) -> Result<Phase, SessionError> {
        let summative_first = self.config.condition.summative_before_revision();
        let next = match self.phase {
            Phase::Practice => Phase::TaskPhase1,
            Phase::TaskPhase1 => {
                self.require_full_selection()?;
                self.phase1_selection = Some(self.selections.clone());
                if summative_first {
                    Phase::SummativePre
                } else {
                    Phase::Revision
                }
            }
            Phase::SummativePre => Phase::Revision,
            Phase::Revision => {
                self.require_full_selection()?;
                self.final_selection = Some(self.selections.clone());
                if summative_first {
                    Phase::Survey
                } else {
                    Phase::SummativePost
                }
            }
            Phase::SummativePost => Phase::Survey,
            phase @ (Phase::Survey | Phase::Done) => {
                return Err(SessionError::Phase {
                    action: "submit",
                    phase,
                })
            }
        };
        self.phase = next;
        Ok(next)
    }

    /// Stores the survey for the current task and moves to the next task
    /// (or `done`).
    pub fn record_survey(&mut self, responses: &[SurveyResponse], dataset: &Dataset) -> Result<Phase, SessionError> {
        if self.phase != Phase::Survey {
            return Err(SessionError::Phase {
                action: "survey",
                phase: self.phase,
            });
        }
        let mut seen = BTreeSet::new();
        for r in responses {
            if dataset.attribute(&r.attribute).is_none() {
                return Err(SessionError::Validation(format!("unknown attribute {:?}", r.attribute)));
            }
            if !seen.insert(r.attribute.as_str()) {
                return Err(SessionError::Validation(format!(
                    "duplicate response for {:?}",
                    r.attribute
                )));
            }
        }
        if let Some(missing) = dataset.attributes.iter().find(|a| !seen.contains(a.name.as_str())) {
            return Err(SessionError::Validation(format!(
                "missing response for {:?}",
                missing.name
            )));
        }
        self.completed.push(TaskOutcome {
            task: self.current_task,
            phase1_selection: self.phase1_selection.take().unwrap_or_default(),
            final_selection: self.final_selection.take().unwrap_or_default(),
            survey: responses.to_vec(),
        });
        self.selections.clear();
        let tasks = self.config.task_order.tasks();
        self.phase = if self.completed.len() < tasks.len() {
            self.current_task = tasks[self.completed.len()];
            Phase::TaskPhase1
        } else {
            Phase::Done
        };
        Ok(self.phase)
    }
}

/// The two task datasets a session runs on.
#[derive(Debug, Clone)]
pub struct Datasets {
    pub politics: Arc<Dataset>,
    pub movies: Arc<Dataset>,
}

impl Datasets {
    pub fn get(&self, task: Task) -> &Arc<Dataset> {
        match task {
            Task::Politics => &self.politics,
            Task::Movies => &self.movies,
        }
    }

    pub fn ids(&self) -> BTreeMap<Task, String> {
        BTreeMap::from([
            (Task::Politics, self.politics.id.clone()),
            (Task::Movies, self.movies.id.clone()),
        ])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummativeReport {
    pub task: Task,
    pub phase: Phase,
    pub comparisons: Vec<DistributionComparison>,
    pub selection: Vec<String>,
}

/// Result of an accepted interaction event.
#[derive(Debug, Clone, PartialEq)]
pub struct EventOutcome {
    /// Present for qualifying events.
    pub snapshot: Option<MetricSnapshot>,
    /// Whether the snapshot goes to the client (real-time conditions only).
    pub push: bool,
}

/// A session together with the metric engine for its current task.
#[derive(Debug, Clone)]
pub struct Session {
    pub state: SessionState,
    datasets: Datasets,
    engine: MetricsEngine,
}

impl PartialEq for Session {
    fn eq(&self, other: &Self) -> bool {
        self.state == other.state && self.engine == other.engine
    }
}

impl Session {
    pub fn new(session_id: impl Into<String>, config: StudyConfig, datasets: Datasets) -> Self {
        let state = SessionState::new(session_id, config);
        let engine = MetricsEngine::new(datasets.get(state.current_task));
        Self {
            state,
            datasets,
            engine,
        }
    }

    pub fn dataset(&self) -> &Arc<Dataset> {
        self.datasets.get(self.state.current_task)
    }

    pub fn datasets(&self) -> &Datasets {
        &self.datasets
    }

    pub fn snapshot(&self) -> MetricSnapshot {
        self.engine.snapshot()
    }

    pub fn handle_event(&mut self, event: &InteractionEvent) -> Result<EventOutcome, SessionError> {
        let dataset = Arc::clone(self.datasets.get(self.state.current_task));
        self.state.apply_event(event, &dataset)?;
        self.engine
            .observe(event)
            .map_err(|e| SessionError::Validation(format!("{e}")))?;
        let snapshot = qualifying(event).then(|| self.engine.snapshot());
        Ok(EventOutcome {
            push: snapshot.is_some() && self.state.config.condition.real_time(),
            snapshot,
        })
    }

    /// Click on a point: select it, or deselect it if already selected.
    pub fn toggle(&mut self, point_id: &str, timestamp: u64) -> Result<(InteractionEvent, EventOutcome), SessionError> {
        let event = self.state.toggle_event(point_id, timestamp)?;
        let outcome = self.handle_event(&event)?;
        Ok((event, outcome))
    }

    pub fn submit(&mut self) -> Result<Phase, SessionError> {
        self.state.submit()
    }

    pub fn record_survey(&mut self, responses: &[SurveyResponse]) -> Result<Phase, SessionError> {
        let dataset = Arc::clone(self.datasets.get(self.state.current_task));
        let before = self.state.current_task;
        let phase = self.state.record_survey(responses, &dataset)?;
        if self.state.current_task != before {
            self.engine = MetricsEngine::new(self.datasets.get(self.state.current_task));
        }
        Ok(phase)
    }

    pub fn report(&self) -> Result<SummativeReport, SessionError> {
        if !self.state.phase.summative() {
            return Err(SessionError::Phase {
                action: "report",
                phase: self.state.phase,
            });
        }
        Ok(SummativeReport {
            task: self.state.current_task,
            phase: self.state.phase,
            comparisons: summative_comparisons(self.dataset(), self.engine.weights(), &self.state.selections),
            selection: self.state.selections.clone(),
        })
    }
}

/// One line of a session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "r", rename_all = "snake_case")]
pub enum LogRecord {
    Start {
        session_id: String,
        config: StudyConfig,
        datasets: BTreeMap<Task, String>,
    },
    Event(InteractionEvent),
    /// The snapshot computed right after the preceding qualifying event.
    Metrics(MetricSnapshot),
    Submit {
        phase: Phase,
    },
    Survey {
        task: Task,
        responses: Vec<SurveyResponse>,
        phase: Phase,
    },
}
