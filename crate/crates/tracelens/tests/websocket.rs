mod common;

use std::net::{TcpListener, TcpStream};
use std::sync::Arc;
use std::thread;

use common::datasets;
use tracelens::core::session::Phase;
use tracelens::protocol::{ClientMessage, ServerMessage};
use tracelens::server;
use tracelens::service::Service;
use tungstenite::stream::MaybeTlsStream;
use tungstenite::{Message, WebSocket};

type Ws = WebSocket<MaybeTlsStream<TcpStream>>;

fn start(dir: &std::path::Path) -> u16 {
    let service = Arc::new(Service::open(dir, datasets(), None).unwrap());
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port();
    thread::spawn(move || server::serve(service, listener));
    port
}

fn connect(port: u16, query: &str) -> Ws {
    tungstenite::connect(format!("ws://127.0.0.1:{port}/?{query}"))
        .unwrap()
        .0
}

fn send(ws: &mut Ws, msg: &ClientMessage) {
    ws.send(Message::text(serde_json::to_string(msg).unwrap())).unwrap();
}

fn recv(ws: &mut Ws) -> ServerMessage {
    loop {
        match ws.read().unwrap() {
            Message::Text(t) => return serde_json::from_str(t.as_str()).unwrap(),
            Message::Close(_) => panic!("closed"),
            _ => {}
        }
    }
}

#[test]
fn end_to_end_over_websocket() {
    let dir = tempfile::tempdir().unwrap();
    let port = start(dir.path());

    let mut ws = connect(port, "condition=RT&order=politics_first");
    let ServerMessage::Hello { session, phase, .. } = recv(&mut ws) else {
        panic!("expected hello")
    };
    assert_eq!(phase, Phase::Practice);

    send(&mut ws, &ClientMessage::Submit);
    assert!(matches!(
        recv(&mut ws),
        ServerMessage::Phase {
            phase: Phase::TaskPhase1,
            ..
        }
    ));
    ws.send(Message::text(
        r#"{"t":"event","seq":1,"ts":400,"kind":"hover","target":"pol-002"}"#,
    ))
    .unwrap();
    match recv(&mut ws) {
        ServerMessage::Metrics { seq, dpd, weights, .. } => {
            assert_eq!(seq, 1);
            assert_eq!(dpd, Some(1.0));
            assert_eq!(weights.get("pol-002"), Some(&1));
        }
        other => panic!("{other:?}"),
    }
    send(
        &mut ws,
        &ClientMessage::Toggle {
            id: "pol-003".into(),
            ts: None,
        },
    );
    assert!(matches!(recv(&mut ws), ServerMessage::Selection { seq: 2, .. }));
    assert!(matches!(recv(&mut ws), ServerMessage::Metrics { seq: 2, .. }));
    ws.send(Message::text("garbage")).unwrap();
    assert!(matches!(recv(&mut ws), ServerMessage::Error { code, .. } if code == "validation"));
    ws.close(None).unwrap();

    // Resume the same session on a new connection.
    let mut ws = connect(port, &format!("session={session}"));
    match recv(&mut ws) {
        ServerMessage::Hello {
            session: s,
            phase,
            event_count,
            ..
        } => {
            assert_eq!(s, session);
            assert_eq!(phase, Phase::TaskPhase1);
            assert_eq!(event_count, 2);
        }
        other => panic!("{other:?}"),
    }
    // A seq gap is fatal: error, then close.
    ws.send(Message::text(
        r#"{"t":"event","seq":9,"ts":900,"kind":"hover","target":"pol-002"}"#,
    ))
    .unwrap();
    assert!(matches!(recv(&mut ws), ServerMessage::Error { code, .. } if code == "protocol"));
    loop {
        match ws.read() {
            Ok(Message::Close(_)) | Err(_) => break,
            Ok(_) => {}
        }
    }

    let mut ws = connect(port, "session=s999999");
    assert!(matches!(recv(&mut ws), ServerMessage::Error { code, .. } if code == "unknown_session"));
}

#[test]
fn control_condition_gets_no_metric_pushes() {
    let dir = tempfile::tempdir().unwrap();
    let port = start(dir.path());
    let mut ws = connect(port, "condition=CTRL");
    assert!(matches!(recv(&mut ws), ServerMessage::Hello { .. }));
    send(&mut ws, &ClientMessage::Submit);
    recv(&mut ws);
    for seq in 1..=20u64 {
        send(
            &mut ws,
            &ClientMessage::Event {
                seq,
                ts: seq * 400,
                kind: tracelens::core::domain::EventKind::Hover,
                target: Some(format!("pol-{seq:03}")),
                detail: None,
            },
        );
    }
    // Hovers produce no replies in CTRL; the next reply is the toggle's.
    send(
        &mut ws,
        &ClientMessage::Toggle {
            id: "pol-001".into(),
            ts: Some(9000),
        },
    );
    assert!(matches!(recv(&mut ws), ServerMessage::Selection { seq: 21, .. }));
    send(&mut ws, &ClientMessage::GetReport);
    assert!(matches!(recv(&mut ws), ServerMessage::Error { code, .. } if code == "phase"));
}
