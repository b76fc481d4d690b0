//! JSON messages exchanged with the client, one per WebSocket text frame.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use tracelens_core::domain::{Condition, EventDetail, EventKind, Task, TaskOrder};
use tracelens_core::metrics::MetricSnapshot;
use tracelens_core::session::{Phase, SummativeReport, SurveyResponse};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "snake_case")]
pub enum ClientMessage {
    Event {
        seq: u64,
        ts: u64,
        kind: EventKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        detail: Option<EventDetail>,
    },
    /// Click on a point. The server assigns the next seq to the resulting
    /// select/deselect event and reports it in the `selection` reply.
    Toggle {
        id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ts: Option<u64>,
    },
    Submit,
    Survey {
        responses: Vec<SurveyResponse>,
    },
    GetReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "snake_case")]
pub enum ServerMessage {
    /// First message on every connection.
    Hello {
        session: String,
        condition: Condition,
        task_order: TaskOrder,
        task: Task,
        phase: Phase,
        event_count: u64,
    },
    Metrics {
        seq: u64,
        dpd: Option<f64>,
        ad: BTreeMap<String, Option<f64>>,
        weights: BTreeMap<String, u64>,
    },
    Phase {
        phase: Phase,
        task: Task,
    },
    Selection {
        seq: u64,
        ids: Vec<String>,
    },
    Report(SummativeReport),
    Error {
        code: String,
        msg: String,
    },
}

impl ServerMessage {
    pub fn metrics(snapshot: &MetricSnapshot) -> Self {
        ServerMessage::Metrics {
            seq: snapshot.seq,
            dpd: snapshot.dpd,
            ad: snapshot.ad.clone(),
            weights: snapshot.weights.counts.clone(),
        }
    }

    pub fn error(code: &str, msg: impl Into<String>) -> Self {
        ServerMessage::Error {
            code: code.to_string(),
            msg: msg.into(),
        }
    }
}
