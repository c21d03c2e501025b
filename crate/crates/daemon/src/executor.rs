//! Single-run-at-a-time FIFO execution of queued run requests.

use std::collections::VecDeque;
use std::sync::{Condvar, Mutex};

use flowtest::{CancelToken, OptionsPatch};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum JobKind {
    Run,
    RerunLast,
}

pub(crate) struct Job {
    pub run_id: String,
    pub kind: JobKind,
    pub patch: OptionsPatch,
    pub cancel: CancelToken,
}

#[derive(Default)]
struct State {
    queue: VecDeque<Job>,
    active: Option<(String, CancelToken)>,
    closed: bool,
}

#[derive(Default)]
pub(crate) struct JobQueue {
    state: Mutex<State>,
    ready: Condvar,
}

impl JobQueue {
    fn lock(&self) -> std::sync::MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Enqueue a job; returns how many runs are ahead of it, or `None`
    /// when the queue no longer accepts work.
    pub fn push(&self, job: Job) -> Option<usize> {
        let mut state = self.lock();
        if state.closed {
            return None;
        }
        let ahead = state.queue.len() + usize::from(state.active.is_some());
        state.queue.push_back(job);
        self.ready.notify_one();
        Some(ahead)
    }

    /// Block for the next job and mark it active; `None` after close.
    pub fn next(&self) -> Option<Job> {
        let mut state = self.lock();
        loop {
            if state.closed {
                return None;
            }
            if let Some(job) = state.queue.pop_front() {
                state.active = Some((job.run_id.clone(), job.cancel.clone()));
                return Some(job);
            }
            state = self.ready.wait(state).unwrap_or_else(|e| e.into_inner());
        }
    }

    pub fn finish(&self) {
        self.lock().active = None;
    }

    /// Whether a run is active or waiting.
    pub fn busy(&self) -> bool {
        let state = self.lock();
        state.active.is_some() || !state.queue.is_empty()
    }

    /// Cancel `run_id`, or every active and queued run when `None`.
    /// Queued runs still execute, find their token set and finish at once
    /// as aborted, so every accepted run ends with a run-finished frame.
    pub fn cancel(&self, run_id: Option<&str>) -> Vec<String> {
        let state = self.lock();
        let mut cancelled = Vec::new();
        let targets =
            state.active.iter().map(|(id, t)| (id, t)).chain(state.queue.iter().map(|j| (&j.run_id, &j.cancel)));
        for (id, token) in targets {
            if run_id.is_none_or(|wanted| wanted == id) {
                token.cancel();
                cancelled.push(id.clone());
            }
        }
        cancelled
    }

    /// Stop accepting work and wake the executor; queued runs are dropped.
    pub fn close(&self) -> Vec<String> {
        let mut state = self.lock();
        state.closed = true;
        if let Some((_, token)) = &state.active {
            token.cancel();
        }
        let dropped = state.queue.drain(..).map(|j| j.run_id).collect();
        self.ready.notify_all();
        dropped
    }
}
