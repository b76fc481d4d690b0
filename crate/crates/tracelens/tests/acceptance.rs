//! Acceptance suite. Each criterion prints one PASS/FAIL line with its
//! runtime; the process fails if any criterion fails or runs over budget.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use common::{dataset_dir, datasets, Script};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use tracelens::analyze::{self, TabulateOptions};
use tracelens::core::analysis::{bootstrap_ci, revisions};
use tracelens::core::domain::{
    AttributeSpec, Condition, DataPoint, Dataset, EventKind, InteractionEvent, StudyConfig, Task, TaskOrder, Value,
};
use tracelens::core::metrics::{self, compute_ad, compute_dpd, DatasetIndex, InteractionWeights, MetricsEngine};
use tracelens::core::session::{Datasets, Phase, Session};
use tracelens::protocol::{ClientMessage, ServerMessage};
use tracelens::service::Service;
use tracelens::store;
use tungstenite::stream::MaybeTlsStream;
use tungstenite::{Message, WebSocket};

type Check = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn dataset_composition() -> Check {
    let d = common::politics(42);
    let count = |attr: &str, value: &str| {
        d.points
            .iter()
            .filter(|p| p.value(attr).and_then(Value::as_category) == Some(value))
            .count()
    };
    let both = |party: &str, gender: &str| {
        d.points
            .iter()
            .filter(|p| {
                p.value("Party").and_then(Value::as_category) == Some(party)
                    && p.value("Gender").and_then(Value::as_category) == Some(gender)
            })
            .count()
    };
    let (rep, dem, female) = (
        count("Party", "Republican"),
        count("Party", "Democrat"),
        count("Gender", "Female"),
    );
    ensure(d.len() == 180, || format!("{} points", d.len()))?;
    ensure(rep == 106 && dem == 74, || format!("{rep} R / {dem} D"))?;
    ensure(female == 57, || format!("{female} female"))?;
    ensure(both("Republican", "Female") == 15, || "female Republicans != 15".into())?;
    ensure((female as f64 / 180.0 - 0.3167).abs() < 5e-5, || "female share".into())?;
    // Exact counts hold for other seeds too.
    for seed in 0..20 {
        let d = common::politics(seed);
        let r = d
            .points
            .iter()
            .filter(|p| p.value("Party").and_then(Value::as_category) == Some("Republican"))
            .count();
        let f = d
            .points
            .iter()
            .filter(|p| p.value("Gender").and_then(Value::as_category) == Some("Female"))
            .count();
        ensure(r == 106 && f == 57, || format!("seed {seed}: {r} R, {f} F"))?;
    }
    Ok(format!("{rep} R / {dem} D, female {female}/180"))
}

fn numeric_dataset(values: &[f64]) -> Dataset {
    let points = values
        .iter()
        .enumerate()
        .map(|(i, v)| DataPoint {
            id: format!("d-{i}"),
            label: format!("D{i}"),
            values: BTreeMap::from([("X".to_string(), Value::Number(*v))]),
        })
        .collect();
    Dataset {
        id: "ks".into(),
        task: Task::Movies,
        attributes: vec![AttributeSpec::numeric("X", 1.0, 4.0)],
        points,
        seed: 0,
    }
}

fn metric_endpoints() -> Check {
    let d = common::politics(42);
    let mut uniform = InteractionWeights::new();
    for p in &d.points {
        uniform.record(&p.id);
    }
    let dpd = compute_dpd(&uniform, d.len()).unwrap().unwrap();
    ensure(dpd.abs() <= 1e-12, || format!("uniform DPD {dpd}"))?;

    let mut single = InteractionWeights::new();
    for _ in 0..30 {
        single.record("pol-017");
    }
    let dpd1 = compute_dpd(&single, d.len()).unwrap().unwrap();
    ensure((dpd1 - 1.0).abs() <= 1e-12, || format!("single-point DPD {dpd1}"))?;

    // Interactions proportional to the data: every attribute's AD is 0,
    // also when every count is scaled.
    for k in [1, 3] {
        let mut w = InteractionWeights::new();
        for p in &d.points {
            for _ in 0..k {
                w.record(&p.id);
            }
        }
        for a in &d.attributes {
            let ad = compute_ad(&a.name, &w, &d).unwrap().unwrap();
            ensure(ad.abs() <= 1e-12, || format!("AD {} = {ad} at k={k}", a.name))?;
        }
    }

    let ks = numeric_dataset(&[1.0, 2.0, 3.0, 4.0]);
    let mut w = InteractionWeights::new();
    w.record("d-3");
    let v = compute_ad("X", &w, &ks).unwrap().unwrap();
    ensure(v == 0.75, || format!("KS example {v}"))?;
    Ok(format!("DPD {dpd:e} / {dpd1}, KS {v}"))
}

fn random_stream(rng: &mut ChaCha8Rng, dataset: &Dataset, len: usize) -> Vec<InteractionEvent> {
    let attrs: Vec<&str> = dataset.attributes.iter().map(|a| a.name.as_str()).collect();
    (1..=len as u64)
        .map(|seq| {
            let kind = match rng.random_range(0..10) {
                0..=5 => EventKind::Hover,
                6 => EventKind::Select,
                7 => EventKind::Deselect,
                _ => EventKind::ALL[rng.random_range(0..EventKind::ALL.len())],
            };
            let target = if kind.targets_point() {
                // A skewed target pool gives both spread and concentrated streams.
                let hot = rng.random_range(1..=dataset.len());
                Some(dataset.points[rng.random_range(0..hot)].id.clone())
            } else if kind.targets_attribute() {
                Some(attrs[rng.random_range(0..attrs.len())].to_string())
            } else {
                None
            };
            InteractionEvent::new("fuzz", seq, seq * 10, kind, target)
        })
        .collect()
}

fn incremental_equals_batch() -> Check {
    let politics = common::politics(42);
    let movies = common::movies(7);
    let indexes = [DatasetIndex::new(&politics), DatasetIndex::new(&movies)];
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_515);
    let (mut checked, mut naive) = (0usize, 0usize);
    for stream in 0..1000 {
        let (dataset, index) = if stream % 2 == 0 {
            (&politics, &indexes[0])
        } else {
            (&movies, &indexes[1])
        };
        let len = rng.random_range(0..=500);
        let events = random_stream(&mut rng, dataset, len);
        let mut engine = MetricsEngine::with_index(index.clone());
        for (i, e) in events.iter().enumerate() {
            engine.observe(e).map_err(|err| format!("stream {stream}: {err}"))?;
            if !metrics::qualifying(e) {
                continue;
            }
            let live = engine.snapshot();
            // Every count and tally rebuilt from the whole prefix.
            let batch = metrics::snapshot_indexed(&events[..=i], index);
            ensure(live == batch, || {
                format!("stream {stream} event {i}: {live:?} != {batch:?}")
            })?;
            checked += 1;
            // Periodically also against the per-attribute functions, which
            // share nothing with the index.
            if checked % 97 == 0 {
                let dpd = compute_dpd(&live.weights, dataset.len()).unwrap();
                ensure(live.dpd == dpd, || format!("stream {stream} event {i}: dpd"))?;
                for a in &dataset.attributes {
                    let ad = compute_ad(&a.name, &live.weights, dataset).unwrap();
                    ensure(live.ad[&a.name] == ad, || {
                        format!("stream {stream} event {i}: AD {}", a.name)
                    })?;
                }
                ensure(live == metrics::snapshot(&events[..=i], dataset), || {
                    format!("stream {stream} event {i}")
                })?;
                naive += 1;
            }
        }
    }
    Ok(format!(
        "{checked} snapshots over 1000 streams ({naive} also unindexed)"
    ))
}

fn condition_gating() -> Check {
    let mut lines = Vec::new();
    for condition in Condition::ALL {
        for order in [TaskOrder::PoliticsFirst, TaskOrder::MoviesFirst] {
            let dir = tempfile::tempdir().unwrap();
            let service = Service::open(dir.path(), datasets(), None).unwrap();
            let id = service.create_session(Some(condition), Some(order)).unwrap();
            let mut s = Script::new(&service, &id);
            ensure(s.submit() == Phase::TaskPhase1, || {
                "practice did not lead to phase 1".into()
            })?;
            let mut path = s.run_task(3);
            path.extend(s.run_task(1).into_iter().skip(1));
            use Phase::*;
            let expect: Vec<Phase> = if condition.summative_before_revision() {
                vec![
                    TaskPhase1,
                    SummativePre,
                    Revision,
                    Survey,
                    TaskPhase1,
                    SummativePre,
                    Revision,
                    Survey,
                    Done,
                ]
            } else {
                vec![
                    TaskPhase1,
                    Revision,
                    SummativePost,
                    Survey,
                    TaskPhase1,
                    Revision,
                    SummativePost,
                    Survey,
                    Done,
                ]
            };
            ensure(path == expect, || format!("{condition}/{}: {path:?}", order.as_str()))?;
            let pushes = s.metrics_pushes();
            if condition.real_time() {
                ensure(pushes > 0, || format!("{condition}: no pushes"))?;
            } else {
                ensure(pushes == 0, || format!("{condition}: {pushes} pushes"))?;
            }
            let tasks: Vec<Task> = service
                .session(&id)
                .unwrap()
                .state
                .completed
                .iter()
                .map(|o| o.task)
                .collect();
            ensure(tasks == order.tasks(), || format!("{condition}: task order {tasks:?}"))?;
            if order == TaskOrder::PoliticsFirst {
                lines.push(format!("{condition}:{pushes}"));
            }
        }
    }
    Ok(format!("8 traversals, pushes {}", lines.join(" ")))
}

type Ws = WebSocket<MaybeTlsStream<TcpStream>>;

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

fn spawn_server(port: u16, data: &Path, sessions: &Path) -> Child {
    Command::new(env!("CARGO_BIN_EXE_tracelens"))
        .args(["serve", "--port", &port.to_string(), "--condition", "RT"])
        .arg("--datasets")
        .arg(data)
        .arg("--sessions")
        .arg(sessions)
        .env("RUST_LOG", "warn")
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap()
}

fn connect(port: u16, query: &str) -> Result<Ws, String> {
    let deadline = Instant::now() + Duration::from_secs(3);
    loop {
        match tungstenite::connect(format!("ws://127.0.0.1:{port}/?{query}")) {
            Ok((ws, _)) => return Ok(ws),
            Err(e) if Instant::now() > deadline => return Err(format!("cannot connect: {e}")),
            Err(_) => thread::sleep(Duration::from_millis(20)),
        }
    }
}

fn exchange(ws: &mut Ws, msg: &ClientMessage, replies: usize) -> Result<Vec<ServerMessage>, String> {
    ws.send(Message::text(serde_json::to_string(msg).unwrap()))
        .map_err(|e| e.to_string())?;
    (0..replies).map(|_| recv(ws)).collect()
}

fn recv(ws: &mut Ws) -> Result<ServerMessage, String> {
    loop {
        match ws.read().map_err(|e| e.to_string())? {
            Message::Text(t) => return serde_json::from_str(t.as_str()).map_err(|e| e.to_string()),
            Message::Close(_) => return Err("closed".into()),
            _ => {}
        }
    }
}

fn hover(seq: u64, target: &str) -> InteractionEvent {
    InteractionEvent::new("s000001", seq, seq * 500, EventKind::Hover, Some(target.to_string()))
}

fn event_message(e: &InteractionEvent) -> ClientMessage {
    ClientMessage::Event {
        seq: e.seq,
        ts: e.timestamp,
        kind: e.kind,
        target: e.target.clone(),
        detail: None,
    }
}

/// Kills the service process mid-session, restarts it and checks the
/// recovered session field by field against an in-memory mirror.
fn crash_recovery() -> Check {
    let root = tempfile::tempdir().unwrap();
    let ds = datasets();
    let data = root.path().join("datasets");
    let lookup = dataset_dir(&data, &ds);
    let sessions = root.path().join("sessions");
    let port = free_port();

    let config = StudyConfig::new(Condition::Rt, TaskOrder::PoliticsFirst);
    let mut mirror = Session::new("s000001", config, ds.clone());
    let mut server = spawn_server(port, &data, &sessions);
    let result = (|| {
        let mut ws = connect(port, "order=politics_first")?;
        let hello = recv(&mut ws)?;
        ensure(
            matches!(&hello, ServerMessage::Hello { session, .. } if session == "s000001"),
            || format!("{hello:?}"),
        )?;
        exchange(&mut ws, &ClientMessage::Submit, 1)?;
        mirror.submit().unwrap();
        let mut seq = 0;
        for i in 0..12 {
            seq += 1;
            let e = hover(seq, &format!("pol-{:03}", i * 13 % 180));
            exchange(&mut ws, &event_message(&e), 1)?;
            mirror.handle_event(&e).unwrap();
        }
        for i in 0..6 {
            let id = format!("pol-{:03}", 40 + i);
            let ts = 10_000 + i as u64;
            exchange(
                &mut ws,
                &ClientMessage::Toggle {
                    id: id.clone(),
                    ts: Some(ts),
                },
                2,
            )?;
            mirror.toggle(&id, ts).unwrap();
        }
        Ok::<_, String>(())
    })();
    // SIGKILL: no shutdown path runs.
    server.kill().unwrap();
    server.wait().unwrap();
    result?;

    let mut server = spawn_server(port, &data, &sessions);
    let result = (|| {
        let mut ws = connect(port, "session=s000001")?;
        match recv(&mut ws)? {
            ServerMessage::Hello {
                phase,
                event_count,
                task,
                ..
            } => {
                ensure(phase == mirror.state.phase, || format!("phase {phase}"))?;
                ensure(event_count == mirror.state.event_count, || {
                    format!("event_count {event_count}")
                })?;
                ensure(task == mirror.state.current_task, || format!("task {task}"))?;
            }
            other => return Err(format!("{other:?}")),
        }
        // The recovered engine and selection continue exactly as the mirror.
        let e = hover(mirror.state.event_count + 1, "pol-099");
        let reply = exchange(&mut ws, &event_message(&e), 1)?;
        let expect = mirror.handle_event(&e).unwrap().snapshot.unwrap();
        ensure(reply == vec![ServerMessage::metrics(&expect)], || {
            format!("metrics after restart: {reply:?}")
        })?;
        let reply = exchange(
            &mut ws,
            &ClientMessage::Toggle {
                id: "pol-041".into(),
                ts: Some(20_000),
            },
            2,
        )?;
        mirror.toggle("pol-041", 20_000).unwrap();
        ensure(
            matches!(&reply[0], ServerMessage::Selection { ids, .. } if *ids == mirror.state.selections),
            || format!("selection after restart: {reply:?}"),
        )?;
        Ok::<_, String>(())
    })();
    server.kill().unwrap();
    server.wait().unwrap();
    result?;

    let replay = analyze::replay_log(&store::log_path(&sessions, "s000001"), &lookup).map_err(|e| e.to_string())?;
    let replayed = replay.session.ok_or("no session in log")?;
    ensure(replayed.state.selections == mirror.state.selections, || {
        "selections differ".into()
    })?;
    ensure(replayed.state.phase == mirror.state.phase, || "phase differs".into())?;
    ensure(replayed.state.event_count == mirror.state.event_count, || {
        "event count differs".into()
    })?;
    ensure(replayed.snapshot() == mirror.snapshot(), || "metrics differ".into())?;
    ensure(replayed.state == mirror.state, || "state differs".into())?;

    // The same check in process, with the torn write a crash can leave.
    let dir = tempfile::tempdir().unwrap();
    let before = {
        let service = Service::open(dir.path(), ds.clone(), None).unwrap();
        let id = service.create_session(Some(Condition::RtSum), None).unwrap();
        let mut s = Script::new(&service, &id);
        s.submit();
        s.pick_ten(5);
        s.submit();
        service.session(&id).unwrap()
    };
    let log = store::log_path(dir.path(), "s000001");
    let mut text = fs::read_to_string(&log).unwrap();
    text.push_str("{\"r\":\"event\",\"seq\":");
    fs::write(&log, text).unwrap();
    let service = Service::open(dir.path(), ds, None).unwrap();
    let after = service.session("s000001").unwrap();
    ensure(
        after.state == before.state && after.snapshot() == before.snapshot(),
        || "in-process recovery".into(),
    )?;
    Ok(format!(
        "{} events, {} selected",
        mirror.state.event_count,
        mirror.state.selections.len()
    ))
}

fn bootstrap_coverage() -> Check {
    let (mu, sigma, n) = (3.0, 2.0, 100);
    let normal = Normal::new(mu, sigma).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let trials = 1000;
    let mut covered = 0;
    for t in 0..trials {
        let sample: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
        let ci = bootstrap_ci(&sample, 1000, 0.95, t).unwrap();
        if ci.lo <= mu && mu <= ci.hi {
            covered += 1;
        }
    }
    let coverage = covered as f64 / trials as f64;
    ensure((coverage - 0.95).abs() <= 0.025, || format!("coverage {coverage}"))?;
    let flat = bootstrap_ci(&[4.25; 12], 1000, 0.95, 1).unwrap();
    ensure(flat.lo == 4.25 && flat.hi == 4.25 && flat.mean == 4.25, || {
        format!("degenerate CI {flat:?}")
    })?;
    Ok(format!("coverage {coverage:.3}"))
}

fn baselines_in_tabulation() -> Check {
    let root = tempfile::tempdir().unwrap();
    let ds = Datasets {
        politics: Arc::new(common::politics(42)),
        movies: Arc::new(common::movies(7)),
    };
    let lookup = dataset_dir(&root.path().join("datasets"), &ds);
    let sessions = root.path().join("sessions");
    let service = Service::open(&sessions, ds, None).unwrap();
    for _ in 0..4 {
        let id = service.create_session(None, Some(TaskOrder::PoliticsFirst)).unwrap();
        let mut s = Script::new(&service, &id);
        s.submit();
        s.run_task(2);
    }
    let out = root.path().join("out");
    let opts = TabulateOptions {
        sessions: format!("{}/*.jsonl", sessions.display()),
        measure: "all".into(),
        seed: 3,
        resamples: 1000,
        level: 0.95,
        out: out.clone(),
    };
    analyze::tabulate(&opts, &lookup).map_err(|e| e.to_string())?;
    let mut reader = csv::Reader::from_path(out.join("baselines.csv")).map_err(|e| e.to_string())?;
    let mut found = BTreeMap::new();
    for row in reader.records() {
        let row = row.map_err(|e| e.to_string())?;
        found.insert((row[2].to_string(), row[3].to_string()), row[6].to_string());
    }
    let dem = found
        .get(&("Party".into(), "Democrat".into()))
        .cloned()
        .unwrap_or_default();
    let male = found
        .get(&("Gender".into(), "Male".into()))
        .cloned()
        .unwrap_or_default();
    ensure(dem == "0.41", || format!("Democrat baseline {dem:?}"))?;
    ensure(male == "0.68", || format!("Male baseline {male:?}"))?;
    Ok(format!("Democrat {dem}, Male {male}"))
}

fn revision_metric() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let ids: Vec<String> = (0..180).map(|i| format!("pol-{i:03}")).collect();
    let mut overlaps = BTreeSet::new();
    for pair in 0..1000 {
        // Draw the second selection from a window around the first so every
        // overlap size shows up.
        let a: Vec<String> = sample(&mut rng, 180, 10).into_iter().map(|i| ids[i].clone()).collect();
        let keep = rng.random_range(0..=10);
        let mut b: Vec<String> = a[..keep].to_vec();
        while b.len() < 10 {
            let c = &ids[rng.random_range(0..180)];
            if !b.contains(c) && !a[keep..].contains(c) {
                b.push(c.clone());
            }
        }
        let mut brute = 10;
        for x in &a {
            for y in &b {
                if x == y {
                    brute -= 1;
                }
            }
        }
        let got = revisions(&a, &b).unwrap();
        ensure(got == brute, || format!("pair {pair}: {got} != {brute}"))?;
        overlaps.insert(got);
    }
    ensure(overlaps.len() == 11, || {
        format!("only saw revision counts {overlaps:?}")
    })?;
    Ok("1000 pairs, revision counts 0..=10".into())
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("dataset composition", Duration::from_secs(1), dataset_composition),
        ("metric endpoints", Duration::from_secs(1), metric_endpoints),
        ("incremental = batch", Duration::from_secs(30), incremental_equals_batch),
        ("condition gating", Duration::from_secs(5), condition_gating),
        ("crash recovery", Duration::from_secs(5), crash_recovery),
        ("bootstrap coverage", Duration::from_secs(60), bootstrap_coverage),
        (
            "baselines in tabulation",
            Duration::from_secs(1),
            baselines_in_tabulation,
        ),
        ("revision metric", Duration::from_secs(1), revision_metric),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, budget, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let (ok, detail) = match result {
            Ok(d) if elapsed <= budget => (true, d),
            Ok(d) => (false, format!("{d}; over budget {budget:?}")),
            Err(e) => (false, e),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} {name:<24} {:>8.1} ms  {detail}",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64() * 1e3
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
