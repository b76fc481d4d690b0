//! Offline replay of session logs and tabulation of per-condition measures.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use tracelens_core::analysis::{self, Replay, Replayer, SessionSummary};
use tracelens_core::metrics::MetricSnapshot;

use crate::format::DatasetDir;
use crate::store;
use crate::{Error, Result};

fn session_id_of(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().trim_end_matches(store::LOG_SUFFIX).to_string())
        .unwrap_or_default()
}

/// Replays as much of the log as is readable. The error, if any, names the
/// first bad line; everything before it is in the returned replay.
pub fn replay_log_lenient(path: &Path, datasets: &DatasetDir) -> Result<(Replay, Option<Error>)> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    let mut replayer = Replayer::new(session_id_of(path));
    let mut failure = None;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => {
                failure = Some(Error::Parse {
                    path: path.to_path_buf(),
                    line: line_no,
                    msg: e.to_string(),
                });
                break;
            }
        };
        if let Err(source) = replayer.apply(&record, |ids| datasets.resolve(ids)) {
            failure = Some(Error::Replay {
                path: path.to_path_buf(),
                line: line_no,
                source,
            });
            break;
        }
    }
    Ok((replayer.finish(), failure))
}

pub fn replay_log(path: &Path, datasets: &DatasetDir) -> Result<Replay> {
    match replay_log_lenient(path, datasets)? {
        (replay, None) => Ok(replay),
        (_, Some(e)) => Err(e),
    }
}

#[derive(Debug, Serialize)]
pub struct ReplayOutput<'a> {
    pub session_id: String,
    pub snapshots: &'a [MetricSnapshot],
    pub summaries: &'a [SessionSummary],
}

pub fn replay_json(path: &Path, replay: &Replay) -> String {
    let out = ReplayOutput {
        session_id: replay
            .summaries
            .first()
            .map(|s| s.session_id.clone())
            .unwrap_or_else(|| session_id_of(path)),
        snapshots: &replay.snapshots,
        summaries: &replay.summaries,
    };
    serde_json::to_string_pretty(&out).expect("replay output serializes")
}

#[derive(Debug, Clone)]
pub struct TabulateOptions {
    pub sessions: String,
    /// `all`, or a comma list of measure names or name prefixes (`ad`, `count`, ...).
    pub measure: String,
    pub seed: u64,
    pub resamples: usize,
    pub level: f64,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabulateResult {
    pub sessions: usize,
    pub files: Vec<PathBuf>,
}

fn measure_filter(spec: &str) -> impl Fn(&str) -> bool {
    let wanted: Vec<String> = spec
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    move |measure: &str| {
        wanted.iter().any(|w| {
            w == "all"
                || measure == w
                || measure
                    .strip_prefix(w.as_str())
                    .is_some_and(|rest| rest.starts_with(':'))
        })
    }
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Other(format!("{}: {e}", path.display())))?;
    w.write_record(header).map_err(|e| Error::Other(e.to_string()))?;
    for row in rows {
        w.write_record(&row).map_err(|e| Error::Other(e.to_string()))?;
    }
    w.flush().map_err(Error::io(path))
}

/// Replays every matching log and writes `measures.csv`, `survey.csv`,
/// `baselines.csv` and `summaries.jsonl` into `opts.out`.
pub fn tabulate(opts: &TabulateOptions, datasets: &DatasetDir) -> Result<TabulateResult> {
    let mut paths: Vec<PathBuf> = glob::glob(&opts.sessions)
        .map_err(|e| Error::Other(format!("bad glob {:?}: {e}", opts.sessions)))?
        .filter_map(std::result::Result::ok)
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Other(format!("no session logs match {:?}", opts.sessions)));
    }

    let mut summaries = Vec::new();
    let mut used: BTreeMap<String, ()> = BTreeMap::new();
    for path in &paths {
        let replay = replay_log(path, datasets)?;
        if let Some(session) = &replay.session {
            for id in session.datasets().ids().into_values() {
                used.insert(id, ());
            }
        }
        summaries.extend(replay.summaries);
    }

    fs::create_dir_all(&opts.out).map_err(Error::io(&opts.out))?;
    let keep = measure_filter(&opts.measure);
    let rows = analysis::tabulate(&summaries, opts.resamples, opts.level, opts.seed, keep)?;
    let measures = opts.out.join("measures.csv");
    write_csv(
        &measures,
        &["condition", "task", "measure", "mean", "ci_lo", "ci_hi", "n"],
        rows.iter().map(|r| {
            vec![
                opt(r.condition),
                opt(r.task),
                r.measure.clone(),
                r.mean.to_string(),
                r.ci_lo.to_string(),
                r.ci_hi.to_string(),
                r.n.to_string(),
            ]
        }),
    )?;

    let survey = opts.out.join("survey.csv");
    write_csv(
        &survey,
        &["condition", "task", "attribute", "focus", "surprise", "count"],
        analysis::survey_tally(&summaries).into_iter().map(|r| {
            vec![
                opt(r.condition),
                opt(r.task),
                r.attribute,
                r.focus.as_str().to_string(),
                r.surprise.as_str().to_string(),
                r.count.to_string(),
            ]
        }),
    )?;

    // Baselines are reported at percentage-point precision in `baseline`;
    // `baseline_exact` keeps the full ratio.
    let baselines = opts.out.join("baselines.csv");
    let mut baseline_rows = Vec::new();
    for id in used.keys() {
        if let Some(d) = datasets.get(id) {
            for b in analysis::baselines(d) {
                baseline_rows.push(vec![
                    b.task.to_string(),
                    id.clone(),
                    b.attribute,
                    b.value,
                    b.count.to_string(),
                    b.n.to_string(),
                    format!("{:.2}", b.ratio),
                    b.ratio.to_string(),
                ]);
            }
        }
    }
    write_csv(
        &baselines,
        &[
            "task",
            "dataset",
            "attribute",
            "value",
            "count",
            "n",
            "baseline",
            "baseline_exact",
        ],
        baseline_rows,
    )?;

    let summaries_path = opts.out.join("summaries.jsonl");
    let mut text = String::new();
    for s in &summaries {
        text.push_str(&serde_json::to_string(s).map_err(|e| Error::Other(e.to_string()))?);
        text.push('\n');
    }
    fs::write(&summaries_path, text).map_err(Error::io(&summaries_path))?;

    Ok(TabulateResult {
        sessions: paths.len(),
        files: vec![measures, survey, baselines, summaries_path],
    })
}
