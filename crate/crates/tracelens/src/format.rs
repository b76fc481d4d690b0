//! Dataset files: `<id>.csv` holds `id,label,<attributes...>` rows and
//! `<id>.schema.json` lists the attribute specs in column order.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use tracelens_core::domain::{validate_dataset, AttrKind, AttributeSpec, DataPoint, Dataset, Task, Value};
use tracelens_core::gen::{sample_movies, MoviesGenSpec, RawRow};
use tracelens_core::session::Datasets;

use crate::{Error, Result};

pub const SCHEMA_SUFFIX: &str = ".schema.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub id: String,
    pub task: Task,
    pub seed: u64,
    pub attributes: Vec<AttributeSpec>,
}

pub fn csv_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.csv"))
}

pub fn schema_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}{SCHEMA_SUFFIX}"))
}

/// Renders the CSV body of `dataset`.
pub fn dataset_csv(dataset: &Dataset) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["id", "label"];
    header.extend(dataset.attributes.iter().map(|a| a.name.as_str()));
    w.write_record(&header).map_err(|e| Error::Other(e.to_string()))?;
    for p in &dataset.points {
        let mut row = vec![p.id.clone(), p.label.clone()];
        row.extend(
            dataset
                .attributes
                .iter()
                .map(|a| p.values.get(&a.name).map(Value::to_string).unwrap_or_default()),
        );
        w.write_record(&row).map_err(|e| Error::Other(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Other(e.to_string()))
}

/// Writes `<dir>/<id>.csv` and `<dir>/<id>.schema.json`.
pub fn write_dataset(dataset: &Dataset, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir).map_err(Error::io(dir))?;
    let csv = csv_path(dir, &dataset.id);
    fs::write(&csv, dataset_csv(dataset)?).map_err(Error::io(&csv))?;
    let schema = Schema {
        id: dataset.id.clone(),
        task: dataset.task,
        seed: dataset.seed,
        attributes: dataset.attributes.clone(),
    };
    let json = schema_path(dir, &dataset.id);
    let mut text = serde_json::to_string_pretty(&schema).map_err(|e| Error::Other(e.to_string()))?;
    text.push('\n');
    fs::write(&json, text).map_err(Error::io(&json))?;
    Ok((csv, json))
}

fn parse_cell(attr: &AttributeSpec, raw: &str) -> std::result::Result<Value, String> {
    match attr.kind {
        AttrKind::Categorical => Ok(Value::Category(raw.to_string())),
        AttrKind::Numeric | AttrKind::Ordinal => raw
            .trim()
            .parse::<f64>()
            .map(Value::Number)
            .map_err(|_| format!("{}: {raw:?} is not a number", attr.name)),
    }
}

/// Reads a dataset from its schema file; the CSV is the sibling `<id>.csv`.
pub fn read_dataset(schema_file: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(schema_file).map_err(Error::io(schema_file))?;
    let schema: Schema = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: schema_file.to_path_buf(),
        line: e.line(),
        msg: e.to_string(),
    })?;
    let dir = schema_file.parent().unwrap_or(Path::new("."));
    let csv_file = csv_path(dir, &schema.id);
    let mut reader = csv::Reader::from_path(&csv_file).map_err(|e| Error::Parse {
        path: csv_file.clone(),
        line: 0,
        msg: e.to_string(),
    })?;
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: csv_file.clone(),
        line,
        msg,
    };
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut expected = vec!["id".to_string(), "label".to_string()];
    expected.extend(schema.attributes.iter().map(|a| a.name.clone()));
    if header != expected {
        return Err(parse_err(
            1,
            format!("header {header:?} does not match schema {expected:?}"),
        ));
    }
    let mut points = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| parse_err(line, e.to_string()))?;
        if record.len() != expected.len() {
            return Err(parse_err(
                line,
                format!("expected {} cells, got {}", expected.len(), record.len()),
            ));
        }
        if let Some(gap) = record.iter().position(|c| c.trim().is_empty()) {
            return Err(parse_err(line, format!("missing value in column {:?}", expected[gap])));
        }
        let mut values = BTreeMap::new();
        for (attr, raw) in schema.attributes.iter().zip(record.iter().skip(2)) {
            values.insert(
                attr.name.clone(),
                parse_cell(attr, raw).map_err(|m| parse_err(line, m))?,
            );
        }
        points.push(DataPoint {
            id: record[0].to_string(),
            label: record[1].to_string(),
            values,
        });
    }
    let dataset = Dataset {
        id: schema.id,
        task: schema.task,
        attributes: schema.attributes,
        points,
        seed: schema.seed,
    };
    let violations = validate_dataset(&dataset);
    if !violations.is_empty() {
        return Err(Error::Dataset {
            path: csv_file,
            msg: violations.join("; "),
        });
    }
    Ok(dataset)
}

/// All datasets found in a directory, keyed by id.
#[derive(Debug, Clone, Default)]
pub struct DatasetDir {
    pub datasets: BTreeMap<String, Arc<Dataset>>,
}

impl DatasetDir {
    pub fn load(dir: &Path) -> Result<Self> {
        let mut datasets = BTreeMap::new();
        if !dir.exists() {
            return Ok(Self { datasets });
        }
        let mut entries: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(Error::io(dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.to_string_lossy().ends_with(SCHEMA_SUFFIX))
            .collect();
        entries.sort();
        for path in entries {
            let d = read_dataset(&path)?;
            datasets.insert(d.id.clone(), Arc::new(d));
        }
        Ok(Self { datasets })
    }

    pub fn get(&self, id: &str) -> Option<&Arc<Dataset>> {
        self.datasets.get(id)
    }

    pub fn insert(&mut self, dataset: Dataset) {
        self.datasets.insert(dataset.id.clone(), Arc::new(dataset));
    }

    /// The single dataset of `task`, or the one named by `id`.
    pub fn for_task(&self, task: Task, id: Option<&str>) -> Result<Arc<Dataset>> {
        if let Some(id) = id {
            return match self.datasets.get(id) {
                Some(d) if d.task == task => Ok(Arc::clone(d)),
                Some(_) => Err(Error::Unavailable(format!("{id} is not a {task} dataset"))),
                None => Err(Error::Unavailable(format!("no dataset {id:?}"))),
            };
        }
        let mut matching = self.datasets.values().filter(|d| d.task == task);
        match (matching.next(), matching.next()) {
            (Some(d), None) => Ok(Arc::clone(d)),
            (None, _) => Err(Error::Unavailable(format!("no {task} dataset"))),
            (Some(_), Some(_)) => Err(Error::Unavailable(format!("several {task} datasets; pick one by id"))),
        }
    }

    /// Resolves the dataset ids a session log refers to.
    pub fn resolve(&self, ids: &BTreeMap<Task, String>) -> std::result::Result<Datasets, String> {
        let get = |task: Task| -> std::result::Result<Arc<Dataset>, String> {
            let id = ids.get(&task).ok_or_else(|| format!("no {task} dataset id in log"))?;
            self.get(id).cloned().ok_or_else(|| id.clone())
        };
        Ok(Datasets {
            politics: get(Task::Politics)?,
            movies: get(Task::Movies)?,
        })
    }
}

/// Column aliases accepted in raw movie sources (left: raw, right: attribute).
const MOVIE_ALIASES: &[(&str, &str)] = &[
    ("MPAA Rating", "Content Rating"),
    ("Major Genre", "Genre"),
    ("Running Time min", "Running Time"),
];

/// Reads a raw movies CSV into rows of column name to cell text.
pub fn read_raw_rows(path: &Path) -> Result<Vec<RawRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: e.to_string(),
        })?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: e.to_string(),
        })?
        .iter()
        .map(|h| {
            MOVIE_ALIASES
                .iter()
                .find(|(raw, _)| *raw == h)
                .map_or_else(|| h.to_string(), |(_, attr)| attr.to_string())
        })
        .collect();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 2,
            msg: e.to_string(),
        })?;
        rows.push(header.iter().cloned().zip(record.iter().map(str::to_string)).collect());
    }
    Ok(rows)
}

/// Samples the movies dataset from `spec.source_path`.
pub fn generate_movies(spec: &MoviesGenSpec, seed: u64) -> Result<Dataset> {
    let rows = read_raw_rows(Path::new(&spec.source_path))?;
    Ok(sample_movies(spec, &rows, seed)?)
}
