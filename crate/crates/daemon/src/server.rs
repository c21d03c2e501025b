use std::io::{self, BufRead, BufReader, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};

use flowtest::discovery::SuiteRegistry;
use flowtest::history::default_history_path;
use flowtest::script::load_project;
use flowtest::{CancelToken, Error, ExecControl, HistoryStore, Reporter, Runner, RunnerOptions};
use serde_json::{json, Value};

use crate::executor::{Job, JobKind, JobQueue};
use crate::http;
use crate::protocol::{self, codes, describe, error_frame, ok_frame, ProtocolError, Request, OPS, PROTOCOL_VERSION};
use crate::session::{is_hangup, SessionHandle, Sessions};

#[derive(Debug, Clone, Default)]
pub struct DaemonConfig {
    /// Project root; its test modules are loaded at startup and its run
    /// history is persisted under it.
    pub root: Option<PathBuf>,
    pub options: RunnerOptions,
    /// Directory of browser assets served at `/`.
    pub ui_dir: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum DaemonError {
    #[error("cannot bind daemon socket: {0}")]
    Bind(#[source] io::Error),
    #[error("cannot load project: {0}")]
    Load(#[source] Error),
    #[error(transparent)]
    Runner(#[from] Error),
}

pub(crate) struct Shared {
    pub runner: Runner,
    pub sessions: Arc<Sessions>,
    pub jobs: JobQueue,
    pub root: Mutex<Option<PathBuf>>,
    pub ui_dir: Option<PathBuf>,
    addr: SocketAddr,
    stopping: AtomicBool,
    load_lock: Mutex<()>,
}

pub struct Daemon {
    listener: TcpListener,
    shared: Arc<Shared>,
}

/// A daemon serving on a background thread.
pub struct DaemonHandle {
    shared: Arc<Shared>,
    thread: JoinHandle<()>,
}

impl Daemon {
    pub fn bind(addr: impl ToSocketAddrs, config: DaemonConfig) -> Result<Daemon, DaemonError> {
        let listener = TcpListener::bind(addr).map_err(DaemonError::Bind)?;
        let addr = listener.local_addr().map_err(DaemonError::Bind)?;
        let sessions = Arc::new(Sessions::default());
        let fanout = sessions.clone();
        let reporter = Reporter::new("daemon", move |event| {
            fanout.broadcast(&protocol::event_frame(event));
            true
        });
        let runner = Runner::new(reporter, config.options)?;
        let shared = Arc::new(Shared {
            runner,
            sessions,
            jobs: JobQueue::default(),
            root: Mutex::new(config.root.clone()),
            ui_dir: config.ui_dir,
            addr,
            stopping: AtomicBool::new(false),
            load_lock: Mutex::new(()),
        });
        if let Some(root) = &config.root {
            shared.runner.attach_history(HistoryStore::load(default_history_path(root)));
            shared.load().map_err(DaemonError::Load)?;
        }
        Ok(Daemon { listener, shared })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.shared.addr
    }

    /// The daemon's runner, for loading suites defined in-process.
    pub fn runner(&self) -> &Runner {
        &self.shared.runner
    }

    /// Serve until a `shutdown` request arrives.
    pub fn serve(self) {
        let executor = {
            let shared = self.shared.clone();
            thread::spawn(move || shared.execute_jobs())
        };
        for stream in self.listener.incoming() {
            if self.shared.stopping.load(Ordering::SeqCst) {
                break;
            }
            let Ok(stream) = stream else { continue };
            let _ = stream.set_nodelay(true);
            let shared = self.shared.clone();
            thread::spawn(move || shared.connection(stream));
        }
        let _ = executor.join();
        self.shared.sessions.close_all();
    }

    pub fn spawn(self) -> DaemonHandle {
        let shared = self.shared.clone();
        let thread = thread::spawn(move || self.serve());
        DaemonHandle { shared, thread }
    }
}

impl DaemonHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.shared.addr
    }

    pub fn runner(&self) -> &Runner {
        &self.shared.runner
    }

    pub fn shutdown(self) {
        self.shared.stop();
        let _ = self.thread.join();
    }

    /// Wait for the daemon to stop on its own.
    pub fn join(self) {
        let _ = self.thread.join();
    }
}

impl Shared {
    fn stop(&self) {
        if self.stopping.swap(true, Ordering::SeqCst) {
            return;
        }
        self.jobs.close();
        // Wake the accept loop.
        let _ = TcpStream::connect(self.addr);
    }

    /// Discover and load the project under the configured root, replacing
    /// whatever was loaded before.
    pub(crate) fn load(&self) -> Result<Value, Error> {
        let root = self.root.lock().unwrap_or_else(|e| e.into_inner()).clone();
        let Some(root) = root else {
            return Err(Error::Precondition("no project root configured".into()));
        };
        let _guard = self.load_lock.lock().unwrap_or_else(|e| e.into_inner());
        self.runner.clear_loaded();
        let load = load_project(&root, &self.runner, &SuiteRegistry::new())?;
        let tests = flowtest::model::forest_tests(&load.forest).len();
        Ok(json!({
            "root": root.display().to_string(),
            "modules": load.modules.iter().map(ToString::to_string).collect::<Vec<_>>(),
            "tests": tests,
        }))
    }

    fn execute_jobs(&self) {
        while let Some(job) = self.jobs.next() {
            self.execute(job);
            self.jobs.finish();
        }
    }

    fn execute(&self, job: Job) {
        let has_root = self.root.lock().unwrap_or_else(|e| e.into_inner()).is_some();
        if has_root && self.runner.loaded_hierarchy().is_empty() {
            if let Err(e) = self.load() {
                let error = ProtocolError::new(codes::LOAD_FAILED, e.to_string());
                self.sessions.broadcast(&protocol::run_error_frame(&job.run_id, &error));
                return;
            }
        }
        let control = ExecControl { run_id: Some(job.run_id.clone()), cancel: Some(job.cancel), patch: job.patch };
        let result = match job.kind {
            JobKind::Run => self.runner.execute_loaded(control),
            JobKind::RerunLast => self.runner.rerun_last_with(control),
        };
        match result {
            Ok(_) | Err(Error::FailureSignal(_)) => {}
            Err(e) => {
                let error = ProtocolError::new(codes::RUN_FAILED, e.to_string());
                self.sessions.broadcast(&protocol::run_error_frame(&job.run_id, &error));
            }
        }
    }

    fn connection(self: Arc<Self>, stream: TcpStream) {
        let mut first = [0u8; 1];
        match stream.peek(&mut first) {
            Ok(1) if first[0].is_ascii_uppercase() => http::serve(&self, stream),
            Ok(1) => self.line_session(stream),
            _ => {}
        }
    }

    fn line_session(&self, stream: TcpStream) {
        let Ok(closer) = stream.try_clone() else { return };
        let Ok(mut writer) = stream.try_clone() else { return };
        let (session, rx) = self.sessions.open(move || {
            let _ = closer.shutdown(Shutdown::Both);
        });
        let pump = thread::spawn(move || {
            for frame in rx {
                if is_hangup(&frame) {
                    let _ = writer.shutdown(Shutdown::Both);
                    break;
                }
                let mut line = frame.into_bytes();
                line.push(b'\n');
                if writer.write_all(&line).is_err() {
                    break;
                }
            }
        });
        for line in BufReader::new(&stream).lines() {
            let Ok(line) = line else { break };
            if line.trim().is_empty() {
                continue;
            }
            if !self.handle_line(&session, &line) {
                break;
            }
        }
        self.sessions.remove(session.id);
        session.close();
        drop(session);
        let _ = pump.join();
    }

    /// Handle one request line; false once the session should end.
    pub(crate) fn handle_line(&self, session: &SessionHandle, line: &str) -> bool {
        let request = match Request::parse(line) {
            Ok(r) => r,
            Err(e) => return session.send(&error_frame(None, &e)),
        };
        let id = request.request_id.as_ref();
        if self.stopping.load(Ordering::SeqCst) {
            let e = ProtocolError::new(codes::SHUTTING_DOWN, "daemon is shutting down");
            return session.send(&error_frame(id, &e));
        }
        match self.dispatch(session, &request) {
            Ok(Some(body)) => session.send(&ok_frame(id, body)),
            Ok(None) => true,
            Err(e) => session.send(&error_frame(id, &e)),
        }
    }

    /// Returns the response body, or `None` when the handler already
    /// replied itself.
    fn dispatch(&self, session: &SessionHandle, request: &Request) -> Result<Option<Value>, ProtocolError> {
        let params = request.params();
        let id = request.request_id.as_ref();
        match request.op.as_str() {
            "hello" => Ok(Some(json!({
                "version": PROTOCOL_VERSION,
                "server": "flowtest",
                "capabilities": OPS,
            }))),
            "load" => {
                if let Some(root) = params.get("root").and_then(Value::as_str) {
                    *self.root.lock().unwrap_or_else(|e| e.into_inner()) = Some(PathBuf::from(root));
                }
                match self.load() {
                    Ok(body) => Ok(Some(body)),
                    Err(Error::Precondition(m)) => Err(ProtocolError::new(codes::NO_ROOT, m)),
                    Err(e) => Err(ProtocolError::new(codes::LOAD_FAILED, e.to_string())),
                }
            }
            "list" => {
                let filter = params.get("filter").and_then(Value::as_str).unwrap_or("");
                let tests = describe(&self.runner.loaded_hierarchy(), &self.runner.history(), filter);
                Ok(Some(json!({ "tests": tests })))
            }
            "set-options" => {
                let patch = protocol::options_patch(&params)?;
                let options = self
                    .runner
                    .set_options(&patch)
                    .map_err(|e| ProtocolError::new(codes::INVALID_OPTIONS, e.to_string()))?;
                Ok(Some(json!({ "options": options })))
            }
            "run" | "rerun-failed" | "rerun-last" => {
                let mut patch = protocol::options_patch(&params)?;
                if request.op == "rerun-failed" {
                    patch.rerun_failed = Some(true);
                }
                patch
                    .apply(&self.runner.options())
                    .validate()
                    .map_err(|e| ProtocolError::new(codes::INVALID_OPTIONS, e.to_string()))?;
                let kind = if request.op == "rerun-last" { JobKind::RerunLast } else { JobKind::Run };
                if kind == JobKind::RerunLast && !self.runner.has_previous_run() && !self.jobs.busy() {
                    return Err(ProtocolError::new(codes::NO_PREVIOUS_RUN, "nothing has been run yet"));
                }
                let run_id = self.runner.allocate_run_id();
                // Reply before queueing so the response precedes the
                // run's first event on this session.
                session.send(&ok_frame(id, json!({ "run_id": run_id })));
                let job = Job { run_id, kind, patch, cancel: CancelToken::new() };
                if self.jobs.push(job).is_none() {
                    return Err(ProtocolError::new(codes::SHUTTING_DOWN, "daemon is shutting down"));
                }
                Ok(None)
            }
            "cancel" => {
                let run_id = params.get("run_id").and_then(Value::as_str);
                Ok(Some(json!({ "cancelled": self.jobs.cancel(run_id) })))
            }
            "shutdown" => {
                session.send(&ok_frame(id, json!({})));
                self.stop();
                Ok(None)
            }
            other => Err(ProtocolError::new(codes::UNKNOWN_OP, format!("unknown op `{other}`"))),
        }
    }
}
