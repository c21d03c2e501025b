//! A blocking client for the line protocol, used by tools and tests.

use std::collections::VecDeque;
use std::io::{self, BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use serde_json::{json, Value};

pub struct Client {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    next_id: u64,
    /// Frames read while waiting for something else.
    pending: VecDeque<Value>,
}

impl Client {
    pub fn connect(addr: impl ToSocketAddrs) -> io::Result<Client> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Client { reader: BufReader::new(stream.try_clone()?), writer: stream, next_id: 0, pending: VecDeque::new() })
    }

    pub fn set_timeout(&self, timeout: Option<Duration>) -> io::Result<()> {
        self.writer.set_read_timeout(timeout)
    }

    /// Send a request and return its request id.
    pub fn send(&mut self, op: &str, params: Value) -> io::Result<String> {
        self.next_id += 1;
        let request_id = format!("c{}", self.next_id);
        let line = json!({ "op": op, "request_id": request_id, "params": params }).to_string();
        self.send_raw(&line)?;
        Ok(request_id)
    }

    pub fn send_raw(&mut self, line: &str) -> io::Result<()> {
        self.writer.write_all(line.as_bytes())?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()
    }

    /// The next frame, in arrival order.
    pub fn next_frame(&mut self) -> io::Result<Value> {
        if let Some(frame) = self.pending.pop_front() {
            return Ok(frame);
        }
        self.read_frame()
    }

    fn read_frame(&mut self) -> io::Result<Value> {
        let mut line = String::new();
        if self.reader.read_line(&mut line)? == 0 {
            return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "daemon closed the connection"));
        }
        serde_json::from_str(&line).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }

    /// Read until the response to `request_id`; other frames stay queued.
    pub fn response(&mut self, request_id: &str) -> io::Result<Value> {
        if let Some(at) = self.pending.iter().position(|f| is_response_to(f, request_id)) {
            return Ok(self.pending.remove(at).expect("position is valid"));
        }
        loop {
            let frame = self.read_frame()?;
            if is_response_to(&frame, request_id) {
                return Ok(frame);
            }
            self.pending.push_back(frame);
        }
    }

    pub fn request(&mut self, op: &str, params: Value) -> io::Result<Value> {
        let id = self.send(op, params)?;
        self.response(&id)
    }

    /// Every frame of `run_id` up to and including its run-finished (or
    /// run-error) frame. Frames of other runs stay queued.
    pub fn run_frames(&mut self, run_id: &str) -> io::Result<Vec<Value>> {
        let mut frames = Vec::new();
        let mut kept = VecDeque::new();
        let mut done = false;
        while let Some(frame) = self.pending.pop_front() {
            if done || frame["run_id"] != run_id {
                kept.push_back(frame);
                continue;
            }
            done = is_terminal(&frame);
            frames.push(frame);
        }
        self.pending = kept;
        while !done {
            let frame = self.read_frame()?;
            if frame["run_id"] != run_id {
                self.pending.push_back(frame);
                continue;
            }
            done = is_terminal(&frame);
            frames.push(frame);
        }
        Ok(frames)
    }
}

fn is_response_to(frame: &Value, request_id: &str) -> bool {
    frame["kind"] == "response" && frame["request_id"] == request_id
}

fn is_terminal(frame: &Value) -> bool {
    frame["kind"] == "run-error" || (frame["kind"] == "event" && frame["type"] == "run-finished")
}
