use std::cell::RefCell;
use std::sync::{Arc, Mutex};

use crate::model::{EventPayload, RunEvent, StateCell};
use crate::reporting::{with_output_port, OutputPort, Reporter};

/// The single serialized channel through which one run's events reach the
/// reporter. Sequence numbers are assigned under the same lock that
/// invokes the reporter, so reporters see gapless, ordered sequences.
pub(crate) struct Emitter {
    run_id: String,
    reporter: Reporter,
    state_cell: StateCell,
    port: OutputPort,
    next_sequence: Mutex<u64>,
}

impl Emitter {
    pub(crate) fn new(run_id: String, reporter: Reporter, state_cell: StateCell, port: OutputPort) -> Self {
        Emitter { run_id, reporter, state_cell, port, next_sequence: Mutex::new(0) }
    }

    pub(crate) fn run_id(&self) -> &str {
        &self.run_id
    }

    pub(crate) fn emit(&self, payload: EventPayload) {
        self.emit_all(vec![payload]);
    }

    /// Emit a batch with contiguous sequence numbers.
    pub(crate) fn emit_all(&self, payloads: Vec<EventPayload>) {
        if payloads.is_empty() {
            return;
        }
        let mut next = self.next_sequence.lock().unwrap_or_else(|e| e.into_inner());
        with_output_port(self.port.clone(), || {
            for payload in payloads {
                let event = RunEvent {
                    run_id: self.run_id.clone(),
                    sequence: *next,
                    payload,
                    state_cell: self.state_cell.clone(),
                };
                *next += 1;
                self.reporter.handle(&event);
            }
        });
    }
}

/// Where a test's events go: straight to the emitter, or into a buffer
/// flushed as one contiguous block when the test finishes.
pub(crate) enum EventSink {
    Direct(Arc<Emitter>),
    Buffered(Arc<Emitter>, RefCell<Vec<EventPayload>>),
}

impl EventSink {
    pub(crate) fn new(emitter: Arc<Emitter>, buffered: bool) -> Self {
        if buffered {
            EventSink::Buffered(emitter, RefCell::new(Vec::new()))
        } else {
            EventSink::Direct(emitter)
        }
    }

    pub(crate) fn emitter(&self) -> &Arc<Emitter> {
        match self {
            EventSink::Direct(e) | EventSink::Buffered(e, _) => e,
        }
    }

    pub(crate) fn emit(&self, payload: EventPayload) {
        match self {
            EventSink::Direct(e) => e.emit(payload),
            EventSink::Buffered(_, buffer) => buffer.borrow_mut().push(payload),
        }
    }

    pub(crate) fn flush(&self) {
        if let EventSink::Buffered(e, buffer) = self {
            e.emit_all(buffer.take());
        }
    }
}
