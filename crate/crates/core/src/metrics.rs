//! Bias metrics over an interaction log.
//!
//! * DPD (data point distribution): `1 - H(p) / ln(n)` where `p` is the
//!   share of qualifying interactions per point and `n` the number of points
//!   in the dataset. 0 when interactions cover every point evenly, 1 when
//!   they all land on one point.
//! * AD (attribute distribution), per attribute: total variation distance
//!   between the interaction-weighted and dataset category shares for
//!   categorical/ordinal attributes, and the two-sample Kolmogorov–Smirnov
//!   statistic between the interaction-weighted and dataset CDFs for numeric
//!   attributes.
//!
//! Metrics are cumulative (no decay) and `None` until the first qualifying
//! interaction. [`MetricsEngine`] maintains them incrementally; the free
//! functions recompute them from [`InteractionWeights`].

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::domain::{AttrKind, AttributeSpec, Dataset, EventKind, InteractionEvent, Value};
use crate::{Error, Result};

/// Number of equal-width bins used to summarize numeric attributes for display.
pub const HISTOGRAM_BINS: usize = 20;

/// Whether `event` contributes to the metric numerators (hover, select, deselect).
pub fn qualifying(event: &InteractionEvent) -> bool {
    matches!(event.kind, EventKind::Hover | EventKind::Select | EventKind::Deselect)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionWeights {
    pub counts: BTreeMap<String, u64>,
    pub total: u64,
}

impl InteractionWeights {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self, id: &str) -> u64 {
        self.counts.get(id).copied().unwrap_or(0)
    }

    pub fn record(&mut self, id: &str) {
        match self.counts.get_mut(id) {
            Some(c) => *c += 1,
            None => {
                self.counts.insert(String::from(id), 1);
            }
        }
        self.total += 1;
    }

    /// Adds one qualifying event.
    pub fn update(&mut self, event: &InteractionEvent) -> Result<()> {
        if !qualifying(event) {
            return Err(Error::Contract(format!(
                "{} events do not carry interaction weight",
                event.kind
            )));
        }
        let target = event
            .target
            .as_deref()
            .ok_or_else(|| Error::Contract(format!("{} event without a target", event.kind)))?;
        self.record(target);
        Ok(())
    }
}

pub fn update_weights(mut weights: InteractionWeights, event: &InteractionEvent) -> Result<InteractionWeights> {
    weights.update(event)?;
    Ok(weights)
}

/// Entropy deficit of the interaction shares, normalized by `ln(n_points)`.
pub fn compute_dpd(weights: &InteractionWeights, n_points: usize) -> Result<Option<f64>> {
    if n_points < 2 {
        return Err(Error::Config(format!("DPD needs at least 2 points, got {n_points}")));
    }
    if weights.total == 0 {
        return Ok(None);
    }
    let total = weights.total as f64;
    let entropy: f64 = weights
        .counts
        .values()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * libm::log(p)
        })
        .sum();
    let dpd = 1.0 - entropy / libm::log(n_points as f64);
    Ok(Some(dpd.clamp(0.0, 1.0)))
}

/// Half the L1 distance between two distributions over the same support.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| libm::fabs(a - b)).sum::<f64>()
}

/// TVD between category tallies, each normalized by its own total.
fn tvd_from_tallies(data: &[u64], n: u64, interactions: &[u64], total: u64) -> f64 {
    let p: Vec<f64> = data.iter().map(|&c| c as f64 / n as f64).collect();
    let q: Vec<f64> = interactions.iter().map(|&c| c as f64 / total as f64).collect();
    total_variation(&p, &q).clamp(0.0, 1.0)
}

/// KS statistic given per-point interaction counts and the points sorted
/// by value. The CDFs are compared only after the last point of each run of
/// tied values.
fn ks_sorted(order: &[(f64, usize)], counts: &[u64], n: u64, total: u64) -> f64 {
    let mut cum_data = 0u64;
    let mut cum_int = 0u64;
    let mut best = 0u128;
    for (k, &(v, i)) in order.iter().enumerate() {
        cum_data += 1;
        cum_int += counts[i];
        if order.get(k + 1).is_some_and(|next| next.0 == v) {
            continue;
        }
        // |cum_int/total - cum_data/n| scaled by n*total stays an exact integer.
        let a = cum_int as u128 * n as u128;
        let b = cum_data as u128 * total as u128;
        best = best.max(a.abs_diff(b));
    }
    best as f64 / (n as f64 * total as f64)
}

fn attribute<'a>(dataset: &'a Dataset, name: &str) -> Result<&'a AttributeSpec> {
    dataset.attribute(name).ok_or_else(|| Error::lookup("attribute", name))
}

/// Category index of every point (in dataset order) for a discrete attribute.
fn point_categories(attr: &AttributeSpec, dataset: &Dataset) -> Vec<Option<usize>> {
    let levels = attr.ordinal_levels();
    dataset
        .points
        .iter()
        .map(|p| match (&levels, p.value(&attr.name)?) {
            (Some(levels), Value::Number(v)) => levels.iter().position(|l| l == v),
            (_, v) => attr.category_index(v),
        })
        .collect()
}

/// Interaction count of every point, in dataset order.
fn point_counts(weights: &InteractionWeights, dataset: &Dataset) -> Vec<u64> {
    dataset.points.iter().map(|p| weights.count(&p.id)).collect()
}

fn ad_categorical(attr: &AttributeSpec, dataset: &Dataset, counts: &[u64]) -> f64 {
    let mut data = vec![0u64; attr.categories.len()];
    let mut interactions = vec![0u64; attr.categories.len()];
    for (c, w) in point_categories(attr, dataset).into_iter().zip(counts) {
        if let Some(c) = c {
            data[c] += 1;
            interactions[c] += w;
        }
    }
    tvd_from_tallies(&data, dataset.len() as u64, &interactions, interactions.iter().sum())
}

fn ad_numeric(attr: &AttributeSpec, dataset: &Dataset, counts: &[u64]) -> f64 {
    let total = counts.iter().sum();
    ks_sorted(&value_order(attr, dataset), counts, dataset.len() as u64, total)
}

/// AD for a categorical or ordinal attribute.
pub fn compute_ad_categorical(
    attribute_name: &str,
    weights: &InteractionWeights,
    dataset: &Dataset,
) -> Result<Option<f64>> {
    let attr = attribute(dataset, attribute_name)?;
    if !attr.is_discrete() {
        return Err(Error::Contract(format!(
            "{attribute_name} is not categorical or ordinal"
        )));
    }
    if weights.total == 0 {
        return Ok(None);
    }
    Ok(Some(ad_categorical(attr, dataset, &point_counts(weights, dataset))))
}

/// (value, point index) pairs in ascending value order.
fn value_order(attr: &AttributeSpec, dataset: &Dataset) -> Vec<(f64, usize)> {
    let mut order: Vec<(f64, usize)> = dataset
        .points
        .iter()
        .enumerate()
        .filter_map(|(i, p)| p.value(&attr.name).and_then(|v| v.as_f64()).map(|v| (v, i)))
        .collect();
    order.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    order
}

/// AD for a numeric attribute.
pub fn compute_ad_numeric(
    attribute_name: &str,
    weights: &InteractionWeights,
    dataset: &Dataset,
) -> Result<Option<f64>> {
    let attr = attribute(dataset, attribute_name)?;
    if attr.kind != AttrKind::Numeric {
        return Err(Error::Contract(format!("{attribute_name} is not numeric")));
    }
    if weights.total == 0 {
        return Ok(None);
    }
    Ok(Some(ad_numeric(attr, dataset, &point_counts(weights, dataset))))
}

/// AD for any attribute, dispatching on its kind.
pub fn compute_ad(attribute_name: &str, weights: &InteractionWeights, dataset: &Dataset) -> Result<Option<f64>> {
    match attribute(dataset, attribute_name)?.kind {
        AttrKind::Numeric => compute_ad_numeric(attribute_name, weights, dataset),
        _ => compute_ad_categorical(attribute_name, weights, dataset),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSnapshot {
    pub seq: u64,
    pub dpd: Option<f64>,
    pub ad: BTreeMap<String, Option<f64>>,
    pub weights: InteractionWeights,
}

#[derive(Debug, Clone, PartialEq)]
enum Column {
    Discrete {
        /// Category of each point.
        category: Vec<Option<usize>>,
        /// Points per category.
        data: Vec<u64>,
    },
    Numeric {
        order: Vec<(f64, usize)>,
    },
}

/// Lookup tables that depend only on the dataset: point positions, each
/// point's category per discrete attribute, and the value order per numeric
/// attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetIndex {
    ids: BTreeMap<String, usize>,
    names: Vec<String>,
    columns: Vec<Column>,
}

impl DatasetIndex {
    pub fn new(dataset: &Dataset) -> Self {
        let columns = dataset
            .attributes
            .iter()
            .map(|attr| {
                if attr.is_discrete() {
                    let category = point_categories(attr, dataset);
                    let mut data = vec![0u64; attr.categories.len()];
                    for c in category.iter().flatten() {
                        data[*c] += 1;
                    }
                    Column::Discrete { category, data }
                } else {
                    Column::Numeric {
                        order: value_order(attr, dataset),
                    }
                }
            })
            .collect();
        Self {
            ids: dataset
                .points
                .iter()
                .enumerate()
                .map(|(i, p)| (p.id.clone(), i))
                .collect(),
            names: dataset.attributes.iter().map(|a| a.name.clone()).collect(),
            columns,
        }
    }

    /// Number of points.
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Position of a point in the dataset.
    pub fn position(&self, id: &str) -> Option<usize> {
        self.ids.get(id).copied()
    }

    fn ad_with(
        &self,
        counts: &[u64],
        total: u64,
        interactions: impl Fn(usize) -> Vec<u64>,
    ) -> BTreeMap<String, Option<f64>> {
        let n = self.len() as u64;
        self.names
            .iter()
            .zip(&self.columns)
            .enumerate()
            .map(|(k, (name, column))| {
                let value = (total > 0).then(|| match column {
                    Column::Discrete { data, .. } => {
                        let tallies = interactions(k);
                        tvd_from_tallies(data, n, &tallies, tallies.iter().sum())
                    }
                    Column::Numeric { order } => ks_sorted(order, counts, n, total),
                });
                (name.clone(), value)
            })
            .collect()
    }
}

/// From-scratch metrics over an event prefix. Non-qualifying events and
/// events targeting unknown points are skipped.
pub fn snapshot(events: &[InteractionEvent], dataset: &Dataset) -> MetricSnapshot {
    snapshot_indexed(events, &DatasetIndex::new(dataset))
}

/// [`snapshot`] against a prebuilt index. Every count and tally is rebuilt
/// from `events`.
pub fn snapshot_indexed(events: &[InteractionEvent], index: &DatasetIndex) -> MetricSnapshot {
    let mut weights = InteractionWeights::new();
    let mut counts = vec![0u64; index.len()];
    for event in events.iter().filter(|e| qualifying(e)) {
        if let Some((id, &i)) = event.target.as_deref().and_then(|t| index.ids.get_key_value(t)) {
            weights.record(id);
            counts[i] += 1;
        }
    }
    let ad = index.ad_with(&counts, weights.total, |k| match &index.columns[k] {
        Column::Discrete { category, data } => {
            let mut tallies = vec![0u64; data.len()];
            for (c, w) in category.iter().zip(&counts) {
                if let Some(c) = c {
                    tallies[*c] += w;
                }
            }
            tallies
        }
        Column::Numeric { .. } => Vec::new(),
    });
    MetricSnapshot {
        seq: events.last().map_or(0, |e| e.seq),
        dpd: compute_dpd(&weights, index.len().max(2)).ok().flatten(),
        ad,
        weights,
    }
}

/// Incremental metric state for one task's interaction stream.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsEngine {
    index: DatasetIndex,
    counts: Vec<u64>,
    /// Interaction tally per category, per attribute (empty for numeric ones).
    interactions: Vec<Vec<u64>>,
    weights: InteractionWeights,
    last_seq: u64,
}

impl MetricsEngine {
    pub fn new(dataset: &Dataset) -> Self {
        Self::with_index(DatasetIndex::new(dataset))
    }

    pub fn with_index(index: DatasetIndex) -> Self {
        let interactions = index
            .columns
            .iter()
            .map(|c| match c {
                Column::Discrete { data, .. } => vec![0; data.len()],
                Column::Numeric { .. } => Vec::new(),
            })
            .collect();
        Self {
            counts: vec![0; index.len()],
            interactions,
            index,
            weights: InteractionWeights::new(),
            last_seq: 0,
        }
    }

    pub fn weights(&self) -> &InteractionWeights {
        &self.weights
    }

    /// Feeds one event. Returns whether it changed the weights.
    pub fn observe(&mut self, event: &InteractionEvent) -> Result<bool> {
        self.last_seq = event.seq;
        if !qualifying(event) {
            return Ok(false);
        }
        let target = event.target.as_deref().unwrap_or_default();
        let point = self
            .index
            .position(target)
            .ok_or_else(|| Error::lookup("data point", target))?;
        self.counts[point] += 1;
        self.weights.record(target);
        for (column, tallies) in self.index.columns.iter().zip(&mut self.interactions) {
            if let Column::Discrete { category, .. } = column {
                if let Some(c) = category[point] {
                    tallies[c] += 1;
                }
            }
        }
        Ok(true)
    }

    pub fn dpd(&self) -> Option<f64> {
        compute_dpd(&self.weights, self.counts.len().max(2)).ok().flatten()
    }

    pub fn ad(&self) -> BTreeMap<String, Option<f64>> {
        self.index
            .ad_with(&self.counts, self.weights.total, |k| self.interactions[k].clone())
    }

    pub fn snapshot(&self) -> MetricSnapshot {
        MetricSnapshot {
            seq: self.last_seq,
            dpd: self.dpd(),
            ad: self.ad(),
            weights: self.weights.clone(),
        }
    }
}

/// Display summary of one distribution. Empty `proportions` means no mass
/// (e.g. no interactions yet).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistSummary {
    Categories {
        categories: Vec<String>,
        proportions: Vec<f64>,
    },
    Bins {
        edges: Vec<f64>,
        proportions: Vec<f64>,
    },
}

impl DistSummary {
    pub fn proportions(&self) -> &[f64] {
        match self {
            DistSummary::Categories { proportions, .. } | DistSummary::Bins { proportions, .. } => proportions,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.proportions().is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionComparison {
    pub attribute: String,
    pub data_dist: DistSummary,
    pub interaction_dist: DistSummary,
    pub selection_dist: DistSummary,
    pub ad_value: Option<f64>,
}

fn normalize(tallies: Vec<u64>) -> Vec<f64> {
    let total: u64 = tallies.iter().sum();
    if total == 0 {
        return Vec::new();
    }
    tallies.into_iter().map(|c| c as f64 / total as f64).collect()
}

fn bin_of(v: f64, lo: f64, hi: f64) -> usize {
    let t = (v - lo) / (hi - lo) * HISTOGRAM_BINS as f64;
    (libm::floor(t).max(0.0) as usize).min(HISTOGRAM_BINS - 1)
}

fn summarize(attr: &AttributeSpec, dataset: &Dataset, weight: impl Fn(&str) -> u64) -> DistSummary {
    if attr.is_discrete() {
        let mut tallies = vec![0u64; attr.categories.len()];
        for p in &dataset.points {
            if let Some(c) = p.value(&attr.name).and_then(|v| attr.category_index(v)) {
                tallies[c] += weight(&p.id);
            }
        }
        DistSummary::Categories {
            categories: attr.categories.clone(),
            proportions: normalize(tallies),
        }
    } else {
        let [lo, hi] = attr.range.unwrap_or([0.0, 1.0]);
        let width = (hi - lo) / HISTOGRAM_BINS as f64;
        let edges = (0..=HISTOGRAM_BINS).map(|i| lo + width * i as f64).collect();
        let mut tallies = vec![0u64; HISTOGRAM_BINS];
        for p in &dataset.points {
            if let Some(v) = p.value(&attr.name).and_then(|v| v.as_f64()) {
                tallies[bin_of(v, lo, hi)] += weight(&p.id);
            }
        }
        DistSummary::Bins {
            edges,
            proportions: normalize(tallies),
        }
    }
}

/// Per-attribute comparison of the dataset, the interactions, and the
/// current selection. AD values use the exact CDFs, never the bins.
pub fn summative_comparisons(
    dataset: &Dataset,
    weights: &InteractionWeights,
    selection: &[String],
) -> Vec<DistributionComparison> {
    dataset
        .attributes
        .iter()
        .map(|attr| DistributionComparison {
            attribute: attr.name.clone(),
            data_dist: summarize(attr, dataset, |_| 1),
            interaction_dist: summarize(attr, dataset, |id| weights.count(id)),
            selection_dist: summarize(attr, dataset, |id| u64::from(selection.iter().any(|s| s == id))),
            ad_value: compute_ad(&attr.name, weights, dataset).ok().flatten(),
        })
        .collect()
}
