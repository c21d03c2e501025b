use std::sync::{Arc, Mutex};

use super::Reporter;
use crate::model::RunEvent;

/// Collects every event it sees. Never claims an event as handled, so it
/// can sit in front of any other reporter.
#[derive(Clone, Default)]
pub struct EventLog(Arc<Mutex<Vec<RunEvent>>>);

impl EventLog {
    pub fn new() -> Self {
        EventLog::default()
    }

    pub fn reporter(&self) -> Reporter {
        let log = self.clone();
        Reporter::new("event-log", move |event| {
            log.0.lock().unwrap_or_else(|e| e.into_inner()).push(event.clone());
            false
        })
    }

    pub fn events(&self) -> Vec<RunEvent> {
        self.0.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn take(&self) -> Vec<RunEvent> {
        std::mem::take(&mut *self.0.lock().unwrap_or_else(|e| e.into_inner()))
    }

    pub fn events_for_run(&self, run_id: &str) -> Vec<RunEvent> {
        self.events().into_iter().filter(|e| e.run_id == run_id).collect()
    }
}
