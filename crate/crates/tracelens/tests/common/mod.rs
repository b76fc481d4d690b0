#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use tracelens::core::domain::{Dataset, Task};
use tracelens::core::gen::{generate_politicians, MoviesGenSpec, PoliticsGenSpec};
use tracelens::core::session::{Datasets, Focus, Phase, Surprise, SurveyResponse};
use tracelens::format::{self, DatasetDir};
use tracelens::protocol::{ClientMessage, ServerMessage};
use tracelens::service::{Reply, Service};

/// A raw movies source in the column naming of the public movies table,
/// with every 7th row missing its genre.
pub fn raw_movies_csv(rows: usize) -> String {
    let mut out = String::from(
        "Title,MPAA Rating,Major Genre,Creative Type,Worldwide Gross,Production Budget,Release Year,Running Time min,Rotten Tomatoes Rating,IMDB Rating\n",
    );
    for i in 0..rows {
        let genre = if i % 7 == 3 {
            ""
        } else {
            ["Drama", "Comedy", "Action", "Horror"][i % 4]
        };
        writeln!(
            out,
            "\"Real Film {i}\",{},{genre},{},{},{},{},{},{},{:.1}",
            ["G", "PG", "PG-13", "R"][(i / 3) % 4],
            ["Contemporary Fiction", "Fantasy", "Factual"][i % 3],
            10_000 + i * 7919 % 500_000,
            5_000 + i * 104_729 % 90_000,
            1960 + i % 50,
            75 + i % 80,
            i * 37 % 101,
            1.5 + (i * 13 % 80) as f64 / 10.0,
        )
        .unwrap();
    }
    out
}

pub fn movies(seed: u64) -> Dataset {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("movies_raw.csv");
    std::fs::write(&src, raw_movies_csv(600)).unwrap();
    let spec = MoviesGenSpec {
        source_path: src.to_string_lossy().into_owned(),
        ..MoviesGenSpec::default()
    };
    format::generate_movies(&spec, seed).unwrap()
}

pub fn politics(seed: u64) -> Dataset {
    generate_politicians(&PoliticsGenSpec::default(), seed).unwrap()
}

pub fn datasets() -> Datasets {
    Datasets {
        politics: Arc::new(politics(42)),
        movies: Arc::new(movies(7)),
    }
}

/// Writes both datasets into `dir` and returns the loaded directory.
pub fn dataset_dir(dir: &Path, datasets: &Datasets) -> DatasetDir {
    format::write_dataset(&datasets.politics, dir).unwrap();
    format::write_dataset(&datasets.movies, dir).unwrap();
    DatasetDir::load(dir).unwrap()
}

pub fn survey_for(dataset: &Dataset) -> Vec<SurveyResponse> {
    dataset
        .attributes
        .iter()
        .enumerate()
        .map(|(i, a)| SurveyResponse {
            attribute: a.name.clone(),
            surprise: if i % 2 == 0 { Surprise::Yes } else { Surprise::No },
            focus: [Focus::High, Focus::Medium, Focus::Low, Focus::NotApplicable][i % 4],
        })
        .collect()
}

pub fn point_ids(dataset: &Dataset) -> Vec<String> {
    dataset.points.iter().map(|p| p.id.clone()).collect()
}

pub fn prefix(task: Task) -> &'static str {
    match task {
        Task::Politics => "pol",
        Task::Movies => "mov",
    }
}

/// Drives a session through the service the way the client would,
/// recording every server message.
pub struct Script<'a> {
    pub service: &'a Service,
    pub id: String,
    pub seq: u64,
    pub ts: u64,
    pub transcript: Vec<ServerMessage>,
}

impl<'a> Script<'a> {
    pub fn new(service: &'a Service, id: &str) -> Self {
        let seq = service.session(id).unwrap().state.event_count;
        Self {
            service,
            id: id.to_string(),
            seq,
            ts: 0,
            transcript: Vec::new(),
        }
    }

    pub fn send(&mut self, msg: ClientMessage) -> Reply {
        let reply = self.service.handle(&self.id, msg);
        self.transcript.extend(reply.messages.iter().cloned());
        reply
    }

    pub fn hover(&mut self, target: &str) -> Reply {
        self.seq += 1;
        self.ts += 350;
        self.send(ClientMessage::Event {
            seq: self.seq,
            ts: self.ts,
            kind: tracelens::core::domain::EventKind::Hover,
            target: Some(target.to_string()),
            detail: None,
        })
    }

    pub fn toggle(&mut self, target: &str) -> Reply {
        self.ts += 100;
        let reply = self.send(ClientMessage::Toggle {
            id: target.to_string(),
            ts: Some(self.ts),
        });
        if reply
            .messages
            .iter()
            .any(|m| matches!(m, ServerMessage::Selection { .. }))
        {
            self.seq += 1;
        }
        reply
    }

    pub fn phase(&mut self) -> Phase {
        self.service.session(&self.id).unwrap().state.phase
    }

    pub fn submit(&mut self) -> Phase {
        let reply = self.send(ClientMessage::Submit);
        match reply.messages.as_slice() {
            [ServerMessage::Phase { phase, .. }] => *phase,
            other => panic!("submit rejected: {other:?}"),
        }
    }

    pub fn survey(&mut self) -> Phase {
        let session = self.service.session(&self.id).unwrap();
        let responses = survey_for(session.dataset());
        let reply = self.send(ClientMessage::Survey { responses });
        match reply.messages.as_slice() {
            [ServerMessage::Phase { phase, .. }] => *phase,
            other => panic!("survey rejected: {other:?}"),
        }
    }

    /// Hovers a few points and selects `first..first+10` of the current task.
    pub fn pick_ten(&mut self, first: usize) {
        let task = self.service.session(&self.id).unwrap().state.current_task;
        let p = prefix(task);
        for i in 0..4 {
            self.hover(&format!("{p}-{:03}", (first + i * 31) % 180));
        }
        for i in first..first + 10 {
            let r = self.toggle(&format!("{p}-{i:03}"));
            assert!(!r.fatal, "{r:?}");
        }
    }

    /// Runs the current task from phase 1 through the survey, recording
    /// each phase entered.
    pub fn run_task(&mut self, swap: usize) -> Vec<Phase> {
        let mut path = vec![self.phase()];
        self.pick_ten(0);
        loop {
            let phase = self.submit();
            path.push(phase);
            match phase {
                Phase::Revision => {
                    let task = self.service.session(&self.id).unwrap().state.current_task;
                    let p = prefix(task);
                    for i in 0..swap {
                        self.toggle(&format!("{p}-{i:03}"));
                    }
                    for i in 0..swap {
                        self.hover(&format!("{p}-{:03}", 100 + i));
                        self.toggle(&format!("{p}-{:03}", 100 + i));
                    }
                }
                Phase::SummativePre | Phase::SummativePost => {
                    let r = self.send(ClientMessage::GetReport);
                    assert!(matches!(r.messages.as_slice(), [ServerMessage::Report(_)]), "{r:?}");
                }
                Phase::Survey => {
                    path.push(self.survey());
                    return path;
                }
                other => panic!("unexpected phase {other}"),
            }
        }
    }

    pub fn metrics_pushes(&self) -> usize {
        self.transcript
            .iter()
            .filter(|m| matches!(m, ServerMessage::Metrics { .. }))
            .count()
    }
}
