//! WebSocket front end. One thread per connection; each text frame carries
//! one JSON message.
//!
//! Connect to `ws://host:port/?session=<id>` to resume a session, or without
//! `session` (optionally with `condition=` and `order=`) to start a new one.
//! The server answers with `hello` and then replies to each client message.

use std::net::{TcpListener, TcpStream};
use std::sync::Arc;
use std::thread;

use log::{debug, info, warn};
use tungstenite::handshake::server::{Request, Response};
use tungstenite::{Message, WebSocket};

use tracelens_core::domain::{Condition, TaskOrder};

use crate::protocol::ServerMessage;
use crate::service::Service;

#[derive(Debug, Default, Clone, PartialEq)]
struct ConnectParams {
    session: Option<String>,
    condition: Option<String>,
    order: Option<String>,
}

fn parse_query(query: Option<&str>) -> ConnectParams {
    let mut params = ConnectParams::default();
    for pair in query.unwrap_or_default().split('&').filter(|p| !p.is_empty()) {
        let (k, v) = pair.split_once('=').unwrap_or((pair, ""));
        let v = Some(v.to_string()).filter(|v| !v.is_empty());
        match k {
            "session" => params.session = v,
            "condition" => params.condition = v,
            "order" => params.order = v,
            _ => {}
        }
    }
    params
}

/// Accepts connections until the listener fails.
pub fn serve(service: Arc<Service>, listener: TcpListener) -> std::io::Result<()> {
    if let Ok(addr) = listener.local_addr() {
        info!("listening on ws://{addr}");
    }
    for stream in listener.incoming() {
        let stream = stream?;
        let service = Arc::clone(&service);
        thread::spawn(move || {
            let peer = stream.peer_addr().ok();
            if let Err(e) = handle_connection(&service, stream) {
                debug!("connection {peer:?} ended: {e}");
            }
        });
    }
    Ok(())
}

fn send(ws: &mut WebSocket<TcpStream>, msg: &ServerMessage) -> Result<(), String> {
    let text = serde_json::to_string(msg).expect("server messages serialize");
    ws.send(Message::text(text)).map_err(|e| e.to_string())
}

#[allow(clippy::result_large_err)]
fn handle_connection(service: &Service, stream: TcpStream) -> Result<(), String> {
    let mut params = ConnectParams::default();
    let mut ws = tungstenite::accept_hdr(stream, |req: &Request, resp: Response| {
        params = parse_query(req.uri().query());
        Ok(resp)
    })
    .map_err(|e| e.to_string())?;

    let session_id = match params.session {
        Some(id) if service.contains(&id) => id,
        Some(id) => {
            let _ = send(&mut ws, &ServerMessage::error("unknown_session", id));
            let _ = ws.close(None);
            return Ok(());
        }
        None => {
            let condition = params.condition.as_deref().map(str::parse::<Condition>).transpose();
            let order = params.order.as_deref().map(str::parse::<TaskOrder>).transpose();
            let (condition, order) = match (condition, order) {
                (Ok(c), Ok(o)) => (c, o),
                (Err(e), _) | (_, Err(e)) => {
                    let _ = send(&mut ws, &ServerMessage::error("validation", e.to_string()));
                    let _ = ws.close(None);
                    return Ok(());
                }
            };
            match service.create_session(condition, order) {
                Ok(id) => id,
                Err(e) => {
                    warn!("cannot create session: {e}");
                    let _ = send(&mut ws, &ServerMessage::error("storage", e.to_string()));
                    let _ = ws.close(None);
                    return Ok(());
                }
            }
        }
    };
    if let Some(hello) = service.hello(&session_id) {
        send(&mut ws, &hello)?;
    }

    loop {
        let msg = ws.read().map_err(|e| e.to_string())?;
        let text = match msg {
            Message::Text(t) => t.to_string(),
            Message::Close(_) => return Ok(()),
            Message::Binary(_) => {
                send(
                    &mut ws,
                    &ServerMessage::error("validation", "binary frames are not supported"),
                )?;
                continue;
            }
            _ => continue,
        };
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let reply = service.handle_text(&session_id, line);
            for m in &reply.messages {
                send(&mut ws, m)?;
            }
            if reply.fatal {
                let _ = ws.close(None);
                let _ = ws.flush();
                return Ok(());
            }
        }
    }
}
