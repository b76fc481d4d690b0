use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::generate_title;
use crate::domain::{AttrKind, AttributeSpec, DataPoint, Dataset, Task, Value};
use crate::{Error, Result};

/// One source row: column name to raw cell text.
pub type RawRow = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq)]
pub struct MoviesGenSpec {
    pub source_path: String,
    pub n: usize,
    /// Column names with their kind, in output column order.
    pub selected_attributes: Vec<(String, AttrKind)>,
    pub title_seed: u64,
}

impl Default for MoviesGenSpec {
    fn default() -> Self {
        let cat = |n: &str| (n.to_string(), AttrKind::Categorical);
        let num = |n: &str| (n.to_string(), AttrKind::Numeric);
        Self {
            source_path: String::new(),
            n: 180,
            selected_attributes: alloc::vec![
                cat("Content Rating"),
                cat("Genre"),
                cat("Creative Type"),
                num("Worldwide Gross"),
                num("Production Budget"),
                num("Release Year"),
                num("Running Time"),
                num("Rotten Tomatoes Rating"),
                num("IMDB Rating"),
            ],
            title_seed: 0,
        }
    }
}

impl MoviesGenSpec {
    pub fn validate(&self) -> Result<()> {
        let cats = self
            .selected_attributes
            .iter()
            .filter(|(_, k)| *k == AttrKind::Categorical)
            .count();
        let nums = self
            .selected_attributes
            .iter()
            .filter(|(_, k)| *k == AttrKind::Numeric)
            .count();
        if cats != 3 || nums != 6 || self.selected_attributes.len() != 9 {
            return Err(Error::Config(format!(
                "need 3 categorical and 6 numeric attributes, got {cats} and {nums}"
            )));
        }
        if self.n == 0 {
            return Err(Error::Config("n must be positive".into()));
        }
        Ok(())
    }
}

fn parse_cell(kind: AttrKind, raw: &str) -> Option<Value> {
    let raw = raw.trim();
    if raw.is_empty() {
        return None;
    }
    match kind {
        AttrKind::Numeric | AttrKind::Ordinal => raw.parse::<f64>().ok().filter(|v| v.is_finite()).map(Value::Number),
        AttrKind::Categorical => Some(Value::Category(raw.to_string())),
    }
}

/// Samples `spec.n` complete rows uniformly without replacement and gives
/// each a generated title. Categories and numeric ranges are taken from the
/// sampled rows.
pub fn sample_movies(spec: &MoviesGenSpec, rows: &[RawRow], seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let complete: Vec<Vec<Value>> = rows
        .iter()
        .filter_map(|row| {
            spec.selected_attributes
                .iter()
                .map(|(name, kind)| row.get(name).and_then(|raw| parse_cell(*kind, raw)))
                .collect::<Option<Vec<_>>>()
        })
        .collect();
    if complete.len() < spec.n {
        return Err(Error::Generation(format!(
            "source has {} complete rows, need {}",
            complete.len(),
            spec.n
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, complete.len(), spec.n).into_vec();
    picked.sort_unstable();

    let mut attributes = Vec::with_capacity(spec.selected_attributes.len());
    for (col, (name, kind)) in spec.selected_attributes.iter().enumerate() {
        let column = picked.iter().map(|&r| &complete[r][col]);
        let attr = match kind {
            AttrKind::Categorical => {
                let cats: BTreeSet<&str> = column.filter_map(Value::as_category).collect();
                AttributeSpec::categorical(name.clone(), cats)
            }
            _ => {
                let (lo, hi) = column
                    .filter_map(Value::as_f64)
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
                AttributeSpec::numeric(name.clone(), lo, hi)
            }
        };
        if let Some(problem) = attr.violations().into_iter().next() {
            return Err(Error::Generation(format!("sampled rows are degenerate: {problem}")));
        }
        attributes.push(attr);
    }

    let mut title_rng = ChaCha8Rng::seed_from_u64(spec.title_seed ^ seed.rotate_left(32));
    let mut used = BTreeSet::new();
    let points = picked
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let mut title = generate_title(&mut title_rng);
            for _ in 0..32 {
                if !used.contains(&title) {
                    break;
                }
                title = generate_title(&mut title_rng);
            }
            used.insert(title.clone());
            let values = spec
                .selected_attributes
                .iter()
                .zip(&complete[r])
                .map(|((name, _), v)| (name.clone(), v.clone()))
                .collect();
            DataPoint {
                id: format!("mov-{i:03}"),
                label: title,
                values,
            }
        })
        .collect();

    Ok(Dataset {
        id: format!("movies-s{seed}"),
        task: Task::Movies,
        attributes,
        points,
        seed,
    })
}
