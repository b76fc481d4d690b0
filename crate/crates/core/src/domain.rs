//! Datasets, interaction events and study configuration.
//!
//! All types here are plain values: once built they are never mutated by
//! the rest of the crate and may be shared freely between threads.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttrKind {
    Categorical,
    Ordinal,
    Numeric,
}

/// One typed column of a dataset.
///
/// Ordinal attributes hold integer-like numbers; their `categories` are the
/// admissible levels written as decimal literals in ascending order
/// (`"-3"`, ..., `"3"` for the policy views).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    pub kind: AttrKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[f64; 2]>,
    pub axis_assignable: bool,
}

impl AttributeSpec {
    pub fn categorical<S: Into<String>>(name: impl Into<String>, categories: impl IntoIterator<Item = S>) -> Self {
        Self {
            name: name.into(),
            kind: AttrKind::Categorical,
            categories: categories.into_iter().map(Into::into).collect(),
            range: None,
            axis_assignable: false,
        }
    }

    /// Ordinal attribute whose levels are the integers `lo..=hi`.
    pub fn ordinal_int(name: impl Into<String>, lo: i64, hi: i64) -> Self {
        Self {
            name: name.into(),
            kind: AttrKind::Ordinal,
            categories: (lo..=hi).map(|v| v.to_string()).collect(),
            range: None,
            axis_assignable: true,
        }
    }

    pub fn numeric(name: impl Into<String>, min: f64, max: f64) -> Self {
        Self {
            name: name.into(),
            kind: AttrKind::Numeric,
            categories: Vec::new(),
            range: Some([min, max]),
            axis_assignable: true,
        }
    }

    /// True for attributes compared category-by-category (categorical and ordinal).
    pub fn is_discrete(&self) -> bool {
        matches!(self.kind, AttrKind::Categorical | AttrKind::Ordinal)
    }

    /// Numeric levels of an ordinal attribute, in category order.
    pub fn ordinal_levels(&self) -> Option<Vec<f64>> {
        if self.kind != AttrKind::Ordinal {
            return None;
        }
        self.categories.iter().map(|c| c.trim().parse::<f64>().ok()).collect()
    }

    /// Index of `value` among this attribute's categories, if it has one.
    pub fn category_index(&self, value: &Value) -> Option<usize> {
        match (self.kind, value) {
            (AttrKind::Categorical, Value::Category(c)) => self.categories.iter().position(|x| x == c),
            (AttrKind::Ordinal, Value::Number(v)) => self
                .categories
                .iter()
                .position(|x| x.trim().parse::<f64>().ok() == Some(*v)),
            _ => None,
        }
    }

    /// Problems with the declaration itself (not with any data).
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let name = &self.name;
        if name.is_empty() {
            out.push("attribute with empty name".to_string());
        }
        match self.kind {
            AttrKind::Categorical | AttrKind::Ordinal => {
                if self.categories.len() < 2 {
                    out.push(format!("attribute {name:?}: needs at least 2 categories"));
                }
                if self.range.is_some() {
                    out.push(format!(
                        "attribute {name:?}: discrete attribute must not declare a range"
                    ));
                }
                let distinct: BTreeSet<&String> = self.categories.iter().collect();
                if distinct.len() != self.categories.len() {
                    out.push(format!("attribute {name:?}: duplicate categories"));
                }
                if self.kind == AttrKind::Ordinal {
                    match self.ordinal_levels() {
                        None => out.push(format!("attribute {name:?}: ordinal levels must be numeric")),
                        Some(levels) => {
                            if levels.windows(2).any(|w| w[0] >= w[1]) {
                                out.push(format!("attribute {name:?}: ordinal levels must be ascending"));
                            }
                        }
                    }
                }
            }
            AttrKind::Numeric => {
                if !self.categories.is_empty() {
                    out.push(format!(
                        "attribute {name:?}: numeric attribute must not declare categories"
                    ));
                }
                match self.range {
                    Some([lo, hi]) if lo.is_finite() && hi.is_finite() && lo < hi => {}
                    Some(_) => out.push(format!("attribute {name:?}: range needs finite min < max")),
                    None => out.push(format!("attribute {name:?}: numeric attribute needs a range")),
                }
            }
        }
        let expect_axis = matches!(self.kind, AttrKind::Numeric | AttrKind::Ordinal);
        if self.axis_assignable != expect_axis {
            out.push(format!(
                "attribute {name:?}: axis_assignable must be {expect_axis} for {:?} attributes",
                self.kind
            ));
        }
        out
    }

    /// Problem with `value` as a cell of this attribute, if any.
    pub fn check_value(&self, value: &Value) -> Option<String> {
        let name = &self.name;
        match (self.kind, value) {
            (AttrKind::Categorical, Value::Category(c)) => {
                if self.categories.contains(c) {
                    None
                } else {
                    Some(format!("{name}: category {c:?} not declared"))
                }
            }
            (AttrKind::Ordinal, Value::Number(v)) => {
                if self.category_index(value).is_some() {
                    None
                } else {
                    Some(format!("{name}: {v} is not an ordinal level"))
                }
            }
            (AttrKind::Numeric, Value::Number(v)) => {
                let [lo, hi] = self.range.unwrap_or([f64::NEG_INFINITY, f64::INFINITY]);
                if !v.is_finite() {
                    Some(format!("{name}: non-finite value"))
                } else if *v < lo || *v > hi {
                    Some(format!("{name}: {v} outside range [{lo}, {hi}]"))
                } else {
                    None
                }
            }
            (kind, v) => Some(format!("{name}: {v} has the wrong type for a {kind:?} attribute")),
        }
    }
}

/// A single cell: a category label or a real number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Number(f64),
    Category(String),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Number(v) => Some(*v),
            Value::Category(_) => None,
        }
    }

    pub fn as_category(&self) -> Option<&str> {
        match self {
            Value::Category(c) => Some(c),
            Value::Number(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Number(v) => write!(f, "{v}"),
            Value::Category(c) => f.write_str(c),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub id: String,
    pub label: String,
    pub values: BTreeMap<String, Value>,
}

impl DataPoint {
    pub fn value(&self, attribute: &str) -> Option<&Value> {
        self.values.get(attribute)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Politics,
    Movies,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Politics => "politics",
            Task::Movies => "movies",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub id: String,
    pub task: Task,
    pub attributes: Vec<AttributeSpec>,
    pub points: Vec<DataPoint>,
    pub seed: u64,
}

impl Dataset {
    pub fn attribute(&self, name: &str) -> Option<&AttributeSpec> {
        self.attributes.iter().find(|a| a.name == name)
    }

    pub fn point(&self, id: &str) -> Option<&DataPoint> {
        self.points.iter().find(|p| p.id == id)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Every way in which `dataset` breaks the schema invariants. Empty when valid.
pub fn validate_dataset(dataset: &Dataset) -> Vec<String> {
    let mut out = Vec::new();
    let mut names = BTreeSet::new();
    for attr in &dataset.attributes {
        out.extend(attr.violations());
        if !names.insert(attr.name.as_str()) {
            out.push(format!("duplicate attribute {:?}", attr.name));
        }
        if attr.name == "id" || attr.name == "label" {
            out.push(format!("attribute name {:?} is reserved", attr.name));
        }
    }
    let mut ids = BTreeSet::new();
    for point in &dataset.points {
        if !ids.insert(point.id.as_str()) {
            out.push(format!("duplicate point id {:?}", point.id));
        }
        for attr in &dataset.attributes {
            match point.values.get(&attr.name) {
                None => out.push(format!("point {:?}: missing {}", point.id, attr.name)),
                Some(v) => {
                    if let Some(msg) = attr.check_value(v) {
                        out.push(format!("point {:?}: {msg}", point.id));
                    }
                }
            }
        }
        for key in point.values.keys() {
            if !names.contains(key.as_str()) {
                out.push(format!("point {:?}: undeclared attribute {key:?}", point.id));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Hover,
    Select,
    Deselect,
    FilterSet,
    FilterClear,
    EncodingSet,
    DistPanelOpen,
    DistPanelAttr,
}

impl EventKind {
    pub const ALL: [EventKind; 8] = [
        EventKind::Hover,
        EventKind::Select,
        EventKind::Deselect,
        EventKind::FilterSet,
        EventKind::FilterClear,
        EventKind::EncodingSet,
        EventKind::DistPanelOpen,
        EventKind::DistPanelAttr,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Hover => "hover",
            EventKind::Select => "select",
            EventKind::Deselect => "deselect",
            EventKind::FilterSet => "filter_set",
            EventKind::FilterClear => "filter_clear",
            EventKind::EncodingSet => "encoding_set",
            EventKind::DistPanelOpen => "dist_panel_open",
            EventKind::DistPanelAttr => "dist_panel_attr",
        }
    }

    /// Kinds whose target is a data point.
    pub fn targets_point(self) -> bool {
        matches!(self, EventKind::Hover | EventKind::Select | EventKind::Deselect)
    }

    /// Kinds whose target is an attribute name.
    pub fn targets_attribute(self) -> bool {
        matches!(
            self,
            EventKind::FilterSet | EventKind::FilterClear | EventKind::EncodingSet | EventKind::DistPanelAttr
        )
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisSlot {
    X,
    Y,
}

/// Optional payload of filter and encoding events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventDetail {
    Range { min: f64, max: f64 },
    Categories(Vec<String>),
    Axis(AxisSlot),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionEvent {
    pub session_id: String,
    pub seq: u64,
    /// Milliseconds since session start.
    pub timestamp: u64,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<EventDetail>,
}

impl InteractionEvent {
    pub fn new(
        session_id: impl Into<String>,
        seq: u64,
        timestamp: u64,
        kind: EventKind,
        target: Option<String>,
    ) -> Self {
        Self {
            session_id: session_id.into(),
            seq,
            timestamp,
            kind,
            target,
            detail: None,
        }
    }

    /// Checks that the target refers to something in `dataset`.
    pub fn check_target(&self, dataset: &Dataset) -> Option<String> {
        let target = self.target.as_deref();
        if self.kind.targets_point() {
            match target {
                Some(id) if dataset.point(id).is_some() => None,
                Some(id) => Some(format!("{} targets unknown point {id:?}", self.kind)),
                None => Some(format!("{} event needs a point target", self.kind)),
            }
        } else if self.kind.targets_attribute() {
            match target {
                Some(name) if dataset.attribute(name).is_some() => None,
                Some(name) => Some(format!("{} targets unknown attribute {name:?}", self.kind)),
                None => Some(format!("{} event needs an attribute target", self.kind)),
            }
        } else {
            None
        }
    }
}

/// The four cells of the real-time × summative-timing design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Condition {
    #[serde(rename = "CTRL")]
    Ctrl,
    #[serde(rename = "SUM")]
    Sum,
    #[serde(rename = "RT")]
    Rt,
    #[serde(rename = "RT_SUM")]
    RtSum,
}

impl Condition {
    /// Round-robin assignment order.
    pub const ALL: [Condition; 4] = [Condition::Ctrl, Condition::Sum, Condition::Rt, Condition::RtSum];

    /// Real-time traces are shown (metric snapshots are pushed to the client).
    pub fn real_time(self) -> bool {
        matches!(self, Condition::Rt | Condition::RtSum)
    }

    /// The summative review is shown before revision rather than at the end.
    pub fn summative_before_revision(self) -> bool {
        matches!(self, Condition::Sum | Condition::RtSum)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Ctrl => "CTRL",
            Condition::Sum => "SUM",
            Condition::Rt => "RT",
            Condition::RtSum => "RT_SUM",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for Condition {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().replace(['+', '-'], "_").as_str() {
            "CTRL" => Ok(Condition::Ctrl),
            "SUM" => Ok(Condition::Sum),
            "RT" => Ok(Condition::Rt),
            "RT_SUM" => Ok(Condition::RtSum),
            _ => Err(crate::Error::lookup("condition", s)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskOrder {
    PoliticsFirst,
    MoviesFirst,
}

impl TaskOrder {
    pub fn tasks(self) -> [Task; 2] {
        match self {
            TaskOrder::PoliticsFirst => [Task::Politics, Task::Movies],
            TaskOrder::MoviesFirst => [Task::Movies, Task::Politics],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TaskOrder::PoliticsFirst => "politics_first",
            TaskOrder::MoviesFirst => "movies_first",
        }
    }
}

impl core::str::FromStr for TaskOrder {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "politics_first" | "politics" => Ok(TaskOrder::PoliticsFirst),
            "movies_first" | "movies" => Ok(TaskOrder::MoviesFirst),
            _ => Err(crate::Error::lookup("task order", s)),
        }
    }
}

pub const SELECTION_SIZE: usize = 10;
pub const HOVER_THRESHOLD_MS: u64 = 300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub condition: Condition,
    pub task_order: TaskOrder,
    pub selection_size: usize,
    /// Minimum hover dwell before the client reports a hover. The engine
    /// trusts received events and never checks this.
    pub hover_threshold_ms: u64,
}

impl StudyConfig {
    pub fn new(condition: Condition, task_order: TaskOrder) -> Self {
        Self {
            condition,
            task_order,
            selection_size: SELECTION_SIZE,
            hover_threshold_ms: HOVER_THRESHOLD_MS,
        }
    }
}
