//! Browser side of the daemon port: `/ws` upgrades to a WebSocket that
//! carries the line protocol one frame per text message; other GETs serve
//! static assets.

use std::io::{self, Read, Write};
use std::net::{Shutdown, TcpStream};
use std::path::{Component, Path, PathBuf};
use std::sync::mpsc::TryRecvError;
use std::time::{Duration, Instant};

use tungstenite::{Error as WsError, Message};

use crate::server::Shared;
use crate::session::is_hangup;

const MAX_HEAD_BYTES: usize = 16 * 1024;
const HEAD_TIMEOUT: Duration = Duration::from_secs(5);
const POLL_INTERVAL: Duration = Duration::from_millis(10);

const PLACEHOLDER_INDEX: &str = "<!doctype html>\n<html><head><meta charset=\"utf-8\"><title>flowtest</title></head>\n<body><h1>flowtest daemon</h1>\n<p>No UI bundle is installed. Start the daemon with <code>--ui-dir</code> pointing at a built dashboard, or connect a client to <code>/ws</code>.</p>\n</body></html>\n";

pub(crate) fn serve(shared: &Shared, mut stream: TcpStream) {
    let Some((head_len, path)) = peek_request_line(&stream) else {
        let _ = respond(&mut stream, "400 Bad Request", "text/plain", b"bad request\n");
        return;
    };
    let path = path.split(['?', '#']).next().unwrap_or("/").to_owned();
    if path == "/ws" {
        websocket_session(shared, stream);
        return;
    }
    let mut head = vec![0u8; head_len];
    if stream.read_exact(&mut head).is_err() {
        return;
    }
    let (status, mime, body) = match asset(shared.ui_dir.as_deref(), &path) {
        Some((mime, body)) => ("200 OK", mime, body),
        None => ("404 Not Found", "text/plain", b"not found\n".to_vec()),
    };
    let _ = respond(&mut stream, status, mime, &body);
}

/// Wait for a full request head without consuming it, so the WebSocket
/// handshake can still read it. Returns the head length and path.
fn peek_request_line(stream: &TcpStream) -> Option<(usize, String)> {
    let deadline = Instant::now() + HEAD_TIMEOUT;
    let mut buf = vec![0u8; MAX_HEAD_BYTES];
    loop {
        let n = stream.peek(&mut buf).ok()?;
        if let Some(end) = buf[..n].windows(4).position(|w| w == b"\r\n\r\n") {
            let head = std::str::from_utf8(&buf[..end]).ok()?;
            let mut parts = head.lines().next()?.split_whitespace();
            let (method, path) = (parts.next()?, parts.next()?);
            return (method == "GET").then(|| (end + 4, path.to_owned()));
        }
        if n == MAX_HEAD_BYTES || Instant::now() > deadline {
            return None;
        }
        std::thread::sleep(POLL_INTERVAL);
    }
}

fn asset(ui_dir: Option<&Path>, path: &str) -> Option<(&'static str, Vec<u8>)> {
    let relative = path.trim_start_matches('/');
    let relative = if relative.is_empty() { "index.html" } else { relative };
    let Some(dir) = ui_dir else {
        return (relative == "index.html").then(|| ("text/html; charset=utf-8", PLACEHOLDER_INDEX.as_bytes().to_vec()));
    };
    let relative = PathBuf::from(relative);
    if relative.components().any(|c| !matches!(c, Component::Normal(_))) {
        return None;
    }
    let body = std::fs::read(dir.join(&relative)).ok()?;
    Some((mime(&relative), body))
}

fn mime(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js" | "mjs") => "text/javascript",
        Some("css") => "text/css",
        Some("json" | "map") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        Some("ico") => "image/x-icon",
        Some("wasm") => "application/wasm",
        _ => "application/octet-stream",
    }
}

fn respond(stream: &mut TcpStream, status: &str, mime: &str, body: &[u8]) -> io::Result<()> {
    write!(
        stream,
        "HTTP/1.1 {status}\r\nContent-Type: {mime}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        body.len()
    )?;
    stream.write_all(body)?;
    stream.flush()
}

fn websocket_session(shared: &Shared, stream: TcpStream) {
    let Ok(closer) = stream.try_clone() else { return };
    let Ok(mut ws) = tungstenite::accept(stream) else { return };
    if ws.get_ref().set_read_timeout(Some(POLL_INTERVAL)).is_err() {
        return;
    }
    let (session, rx) = shared.sessions.open(move || {
        let _ = closer.shutdown(Shutdown::Both);
    });
    'session: loop {
        loop {
            match rx.try_recv() {
                Ok(frame) if is_hangup(&frame) => {
                    let _ = ws.close(None);
                    let _ = ws.flush();
                    break 'session;
                }
                Ok(frame) => {
                    if ws.send(Message::text(frame)).is_err() {
                        break 'session;
                    }
                }
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => break 'session,
            }
        }
        match ws.read() {
            Ok(Message::Text(text)) => {
                for line in text.lines().filter(|l| !l.trim().is_empty()) {
                    if !shared.handle_line(&session, line) {
                        break 'session;
                    }
                }
            }
            Ok(Message::Close(_)) => break,
            Ok(_) => {}
            Err(WsError::Io(e)) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
            Err(_) => break,
        }
    }
    shared.sessions.remove(session.id);
    session.close();
}
