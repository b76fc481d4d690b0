//! Offline measures over recorded sessions: replay, revision counts,
//! selection composition, and percentile-bootstrap interval estimates.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Condition, Dataset, EventKind, StudyConfig, Task, SELECTION_SIZE};
use crate::metrics::{qualifying, MetricSnapshot};
use crate::session::{Datasets, Focus, LogRecord, Phase, Session, SessionError, Surprise, SurveyResponse};
use crate::{Error, Result};

pub const DEFAULT_RESAMPLES: usize = 1000;
pub const DEFAULT_LEVEL: f64 = 0.95;

/// Number of phase-1 picks that did not survive into the final selection.
/// Order is ignored.
pub fn revisions(phase1: &[String], last: &[String]) -> Result<u32> {
    if phase1.len() != SELECTION_SIZE || last.len() != SELECTION_SIZE {
        return Err(Error::Contract(format!(
            "revisions need two selections of {SELECTION_SIZE}, got {} and {}",
            phase1.len(),
            last.len()
        )));
    }
    let kept = phase1.iter().filter(|id| last.contains(id)).count();
    Ok((SELECTION_SIZE - kept) as u32)
}

fn category_share<'a>(
    points: impl Iterator<Item = &'a crate::domain::DataPoint>,
    dataset: &Dataset,
    attribute: &str,
    value: &str,
) -> Result<f64> {
    let attr = dataset
        .attribute(attribute)
        .ok_or_else(|| Error::lookup("attribute", attribute))?;
    if !attr.is_discrete() {
        return Err(Error::Contract(format!("{attribute} is not categorical")));
    }
    let index = attr
        .categories
        .iter()
        .position(|c| c == value)
        .ok_or_else(|| Error::lookup("category", value))?;
    let (mut hits, mut n) = (0usize, 0usize);
    for p in points {
        n += 1;
        if p.value(attribute).and_then(|v| attr.category_index(v)) == Some(index) {
            hits += 1;
        }
    }
    if n == 0 {
        return Err(Error::Contract("empty selection".into()));
    }
    Ok(hits as f64 / n as f64)
}

/// Fraction of the selected points whose `attribute` equals `value`.
pub fn composition_ratio(selection: &[String], dataset: &Dataset, attribute: &str, value: &str) -> Result<f64> {
    let points = selection
        .iter()
        .map(|id| {
            dataset
                .point(id)
                .ok_or_else(|| Error::lookup("data point", id.as_str()))
        })
        .collect::<Result<Vec<_>>>()?;
    category_share(points.into_iter(), dataset, attribute, value)
}

/// The same fraction over the whole dataset.
pub fn baseline_ratio(dataset: &Dataset, attribute: &str, value: &str) -> Result<f64> {
    category_share(dataset.points.iter(), dataset, attribute, value)
}

/// Every categorical/ordinal (attribute, value) ratio of `selection`.
pub fn composition(selection: &[String], dataset: &Dataset) -> BTreeMap<String, BTreeMap<String, f64>> {
    dataset
        .attributes
        .iter()
        .filter(|a| a.is_discrete())
        .map(|a| {
            let ratios = a
                .categories
                .iter()
                .filter_map(|c| {
                    composition_ratio(selection, dataset, &a.name, c)
                        .ok()
                        .map(|r| (c.clone(), r))
                })
                .collect();
            (a.name.clone(), ratios)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCi {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = libm::floor(h) as usize;
    let hi = libm::ceil(h) as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Percentile bootstrap interval for the mean of `samples`.
pub fn bootstrap_ci(samples: &[f64], resamples: usize, level: f64, seed: u64) -> Result<BootstrapCi> {
    if samples.is_empty() {
        return Err(Error::Contract("bootstrap needs at least one sample".into()));
    }
    if resamples == 0 || !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!(
            "bad bootstrap setup: {resamples} resamples at level {level}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = samples.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| samples[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let alpha = 1.0 - level;
    Ok(BootstrapCi {
        mean: mean(samples),
        lo: quantile(&means, alpha / 2.0),
        hi: quantile(&means, 1.0 - alpha / 2.0),
    })
}

/// Per-task measures of one recorded session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub condition: Option<Condition>,
    pub task: Option<Task>,
    pub counts_by_kind: BTreeMap<EventKind, u64>,
    pub final_dpd: Option<f64>,
    pub final_ad: BTreeMap<String, Option<f64>>,
    /// `None` until the task's revision phase has been submitted.
    pub revisions: Option<u32>,
    pub composition: BTreeMap<String, BTreeMap<String, f64>>,
    pub phase2_interactions: u64,
    pub survey: Vec<SurveyResponse>,
}

impl SessionSummary {
    fn empty(session_id: &str, condition: Option<Condition>, task: Option<Task>) -> Self {
        Self {
            session_id: session_id.to_string(),
            condition,
            task,
            counts_by_kind: EventKind::ALL.iter().map(|k| (*k, 0)).collect(),
            final_dpd: None,
            final_ad: BTreeMap::new(),
            revisions: None,
            composition: BTreeMap::new(),
            phase2_interactions: 0,
            survey: Vec::new(),
        }
    }

    /// Named scalar measures, in a stable order.
    pub fn measures(&self) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        for (kind, count) in &self.counts_by_kind {
            out.push((format!("count:{kind}"), *count as f64));
        }
        out.push((
            "interactions".to_string(),
            self.counts_by_kind.values().sum::<u64>() as f64,
        ));
        out.push(("phase2_interactions".to_string(), self.phase2_interactions as f64));
        if let Some(r) = self.revisions {
            out.push(("revisions".to_string(), r as f64));
        }
        if let Some(d) = self.final_dpd {
            out.push(("dpd".to_string(), d));
        }
        for (attr, v) in &self.final_ad {
            if let Some(v) = v {
                out.push((format!("ad:{attr}"), *v));
            }
        }
        for (attr, ratios) in &self.composition {
            for (value, r) in ratios {
                out.push((format!("composition:{attr}={value}"), *r));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReplayError {
    #[error("log has no start record")]
    NotStarted,
    #[error("duplicate start record")]
    DuplicateStart,
    #[error("unknown dataset: {0}")]
    UnknownDataset(String),
    #[error("rejected by session: {0}")]
    Session(#[from] SessionError),
    #[error("logged {what} disagrees with replay: {detail}")]
    Mismatch { what: &'static str, detail: String },
}

/// The product of replaying a log.
#[derive(Debug, Clone)]
pub struct Replay {
    /// Snapshot after every qualifying event, in log order.
    pub snapshots: Vec<MetricSnapshot>,
    pub summaries: Vec<SessionSummary>,
    /// Reconstructed live session, when the log had a start record.
    pub session: Option<Session>,
}

/// Re-drives a [`Session`] from its log records.
pub struct Replayer {
    session_id: String,
    session: Option<Session>,
    snapshots: Vec<MetricSnapshot>,
    summaries: Vec<SessionSummary>,
    counts: BTreeMap<EventKind, u64>,
    phase2: u64,
    last_snapshot: Option<MetricSnapshot>,
}

impl Replayer {
    pub fn new(session_id: impl Into<String>) -> Self {
        Self {
            session_id: session_id.into(),
            session: None,
            snapshots: Vec::new(),
            summaries: Vec::new(),
            counts: EventKind::ALL.iter().map(|k| (*k, 0)).collect(),
            phase2: 0,
            last_snapshot: None,
        }
    }

    pub fn session(&self) -> Option<&Session> {
        self.session.as_ref()
    }

    fn live(&mut self) -> core::result::Result<&mut Session, ReplayError> {
        self.session.as_mut().ok_or(ReplayError::NotStarted)
    }

    /// Applies one record. `resolve` maps the start record's dataset ids to
    /// loaded datasets.
    pub fn apply<F>(&mut self, record: &LogRecord, resolve: F) -> core::result::Result<(), ReplayError>
    where
        F: FnOnce(&BTreeMap<Task, String>) -> core::result::Result<Datasets, String>,
    {
        match record {
            LogRecord::Start {
                session_id,
                config,
                datasets,
            } => {
                if self.session.is_some() {
                    return Err(ReplayError::DuplicateStart);
                }
                let datasets = resolve(datasets).map_err(ReplayError::UnknownDataset)?;
                self.session_id = session_id.clone();
                self.session = Some(Session::new(session_id.clone(), *config, datasets));
            }
            LogRecord::Event(event) => {
                let session = self.live()?;
                let in_revision = session.state.phase == Phase::Revision;
                let outcome = session.handle_event(event)?;
                *self.counts.entry(event.kind).or_insert(0) += 1;
                if in_revision {
                    self.phase2 += 1;
                }
                if qualifying(event) {
                    let snap = outcome.snapshot.expect("qualifying events produce snapshots");
                    self.snapshots.push(snap.clone());
                    self.last_snapshot = Some(snap);
                }
            }
            LogRecord::Metrics(stored) => {
                let expected = self.last_snapshot.take().ok_or(ReplayError::Mismatch {
                    what: "metrics",
                    detail: format!("snapshot at seq {} without a preceding qualifying event", stored.seq),
                })?;
                if *stored != expected {
                    return Err(ReplayError::Mismatch {
                        what: "metrics",
                        detail: format!("snapshot at seq {}", stored.seq),
                    });
                }
            }
            LogRecord::Submit { phase } => {
                let got = self.live()?.submit()?;
                if got != *phase {
                    return Err(ReplayError::Mismatch {
                        what: "phase",
                        detail: format!("logged {phase}, replayed {got}"),
                    });
                }
            }
            LogRecord::Survey { responses, phase, .. } => {
                let mut summary = self.task_summary().ok_or(ReplayError::NotStarted)?;
                summary.survey = responses.clone();
                let got = self.live()?.record_survey(responses)?;
                if got != *phase {
                    return Err(ReplayError::Mismatch {
                        what: "phase",
                        detail: format!("logged {phase}, replayed {got}"),
                    });
                }
                self.summaries.push(summary);
                self.counts.values_mut().for_each(|c| *c = 0);
                self.phase2 = 0;
            }
        }
        Ok(())
    }

    fn task_summary(&self) -> Option<SessionSummary> {
        let session = self.session.as_ref()?;
        let state = &session.state;
        let mut summary =
            SessionSummary::empty(&self.session_id, Some(state.config.condition), Some(state.current_task));
        summary.counts_by_kind = self.counts.clone();
        summary.phase2_interactions = self.phase2;
        let snap = session.snapshot();
        summary.final_dpd = snap.dpd;
        summary.final_ad = snap.ad;
        if let (Some(first), Some(last)) = (&state.phase1_selection, &state.final_selection) {
            summary.revisions = revisions(first, last).ok();
            summary.composition = composition(last, session.dataset());
        }
        Some(summary)
    }

    pub fn finish(mut self) -> Replay {
        match &self.session {
            None => self.summaries.push(SessionSummary::empty(&self.session_id, None, None)),
            Some(s) if s.state.phase != Phase::Done => {
                let summary = self.task_summary().expect("session exists");
                self.summaries.push(summary);
            }
            Some(_) => {}
        }
        Replay {
            snapshots: self.snapshots,
            summaries: self.summaries,
            session: self.session,
        }
    }

    /// Rebuilds a session from a full log.
    pub fn replay<'a, F>(
        session_id: &str,
        records: impl IntoIterator<Item = &'a LogRecord>,
        mut resolve: F,
    ) -> core::result::Result<Replay, ReplayError>
    where
        F: FnMut(&BTreeMap<Task, String>) -> core::result::Result<Datasets, String>,
    {
        let mut replayer = Replayer::new(session_id);
        for record in records {
            replayer.apply(record, &mut resolve)?;
        }
        Ok(replayer.finish())
    }

    /// Config recorded in the start record, once seen.
    pub fn config(&self) -> Option<StudyConfig> {
        self.session.as_ref().map(|s| s.state.config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureRow {
    pub condition: Option<Condition>,
    pub task: Option<Task>,
    pub measure: String,
    pub mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n: usize,
}

/// Mean and bootstrap interval of every measure per (condition, task).
/// `keep` filters measure names.
pub fn tabulate(
    summaries: &[SessionSummary],
    resamples: usize,
    level: f64,
    seed: u64,
    keep: impl Fn(&str) -> bool,
) -> Result<Vec<MeasureRow>> {
    let mut groups: BTreeMap<(Option<Condition>, Option<Task>, String), Vec<f64>> = BTreeMap::new();
    for s in summaries {
        for (measure, value) in s.measures() {
            if keep(&measure) {
                groups.entry((s.condition, s.task, measure)).or_default().push(value);
            }
        }
    }
    groups
        .into_iter()
        .enumerate()
        .map(|(i, ((condition, task, measure), values))| {
            let group_seed = seed.wrapping_add((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let ci = bootstrap_ci(&values, resamples, level, group_seed)?;
            Ok(MeasureRow {
                condition,
                task,
                measure,
                mean: ci.mean,
                ci_lo: ci.lo,
                ci_hi: ci.hi,
                n: values.len(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyTallyRow {
    pub condition: Option<Condition>,
    pub task: Option<Task>,
    pub attribute: String,
    pub focus: Focus,
    pub surprise: Surprise,
    pub count: usize,
}

/// Counts of each focus × surprise answer per condition, task and attribute.
pub fn survey_tally(summaries: &[SessionSummary]) -> Vec<SurveyTallyRow> {
    type Key = (Option<Condition>, Option<Task>, String, Focus, Surprise);
    let mut counts: BTreeMap<Key, usize> = BTreeMap::new();
    for s in summaries {
        for r in &s.survey {
            *counts
                .entry((s.condition, s.task, r.attribute.clone(), r.focus, r.surprise))
                .or_insert(0) += 1;
        }
    }
    counts
        .into_iter()
        .map(
            |((condition, task, attribute, focus, surprise), count)| SurveyTallyRow {
                condition,
                task,
                attribute,
                focus,
                surprise,
                count,
            },
        )
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub task: Task,
    pub attribute: String,
    pub value: String,
    pub count: usize,
    pub n: usize,
    pub ratio: f64,
}

/// Dataset share of every categorical value, the reference for composition ratios.
pub fn baselines(dataset: &Dataset) -> Vec<BaselineRow> {
    let mut rows = Vec::new();
    for attr in dataset
        .attributes
        .iter()
        .filter(|a| a.kind == crate::domain::AttrKind::Categorical)
    {
        for value in &attr.categories {
            let count = dataset
                .points
                .iter()
                .filter(|p| p.value(&attr.name).and_then(|v| v.as_category()) == Some(value))
                .count();
            rows.push(BaselineRow {
                task: dataset.task,
                attribute: attr.name.clone(),
                value: value.clone(),
                count,
                n: dataset.len(),
                ratio: count as f64 / dataset.len() as f64,
            });
        }
    }
    rows
}
