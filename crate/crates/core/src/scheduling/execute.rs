use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Instant;

use super::RunPlan;
use crate::error::{Error, Result};
use crate::model::{EventPayload, FailureContext, RunFinished, RunStarted, RunSummary, StopReason, Warning};
use crate::runner::{execute_test, CancelToken, Emitter, Runner, TestExecution};

#[derive(Default)]
struct Progress {
    done: Vec<(usize, TestExecution)>,
    finished: Vec<bool>,
    /// Lowest plan index that has not finished yet.
    low: usize,
    stop: Option<StopReason>,
    failure: Option<FailureContext>,
}

impl Progress {
    /// Record a finished test; returns true when dispatching must stop.
    fn finish(&mut self, index: usize, execution: TestExecution, plan: &RunPlan) -> bool {
        let options = &plan.options;
        if self.stop.is_none() {
            if options.debug_on_failure && execution.failure.is_some() {
                self.stop = Some(StopReason::DebugOnFailure);
                self.failure = execution.failure.clone();
            } else if options.fail_fast && execution.outcome().demands_attention() {
                self.stop = Some(StopReason::FailFast);
            }
        }
        self.done.push((index, execution));
        if self.finished.len() <= index {
            self.finished.resize(index + 1, false);
        }
        self.finished[index] = true;
        while self.finished.get(self.low).copied().unwrap_or(false) {
            self.low += 1;
        }
        self.stop.is_some()
    }
}

/// Execute `plan`, stream its events through `emitter`, and fold results
/// into the runner's history before announcing the end of the run.
pub(crate) fn execute_plan(
    runner: &Runner,
    emitter: &Arc<Emitter>,
    plan: &RunPlan,
    cancel: Option<&CancelToken>,
    warnings: Vec<String>,
) -> Result<RunSummary> {
    let started = Instant::now();
    emitter.emit(EventPayload::RunStarted(RunStarted { seed: plan.seed_used, tests: plan.ids() }));
    for message in warnings {
        emitter.emit(EventPayload::Warning(Warning { message }));
    }

    let cancelled = || cancel.is_some_and(CancelToken::is_cancelled);
    let workers = plan.options.effective_workers().min(plan.len().max(1));
    let buffered = plan.options.preserve_hierarchy && workers > 1;
    let mut progress = Progress::default();

    if workers <= 1 {
        for (index, entry) in plan.entries.iter().enumerate() {
            if cancelled() {
                progress.stop = Some(StopReason::Cancelled);
                break;
            }
            let execution = execute_test(runner, emitter, &entry.test, &plan.options, false);
            if progress.finish(index, execution, plan) {
                break;
            }
        }
    } else {
        let next = AtomicUsize::new(0);
        let halt = AtomicBool::new(false);
        let shared = Mutex::new(std::mem::take(&mut progress));
        // Under fail-fast a worker only starts index i once every index up
        // to i - workers has finished, so at most workers - 1 tests past the
        // first failing one in plan order are ever dispatched.
        let window = Condvar::new();
        let windowed = plan.options.fail_fast;
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    if halt.load(Ordering::SeqCst) {
                        break;
                    }
                    if cancelled() {
                        halt.store(true, Ordering::SeqCst);
                        let mut p = shared.lock().unwrap_or_else(|e| e.into_inner());
                        p.stop.get_or_insert(StopReason::Cancelled);
                        break;
                    }
                    let index = next.fetch_add(1, Ordering::SeqCst);
                    let Some(entry) = plan.entries.get(index) else { break };
                    if windowed {
                        let p = shared.lock().unwrap_or_else(|e| e.into_inner());
                        let p = window
                            .wait_while(p, |p| index >= p.low + workers && !halt.load(Ordering::SeqCst))
                            .unwrap_or_else(|e| e.into_inner());
                        if halt.load(Ordering::SeqCst) {
                            break;
                        }
                        drop(p);
                    }
                    let execution = execute_test(runner, emitter, &entry.test, &plan.options, buffered);
                    let mut p = shared.lock().unwrap_or_else(|e| e.into_inner());
                    if p.finish(index, execution, plan) {
                        halt.store(true, Ordering::SeqCst);
                    }
                    drop(p);
                    window.notify_all();
                });
            }
        });
        progress = shared.into_inner().unwrap_or_else(|e| e.into_inner());
        progress.done.sort_by_key(|(index, _)| *index);
    }

    let mut summary = RunSummary::default();
    let mut executed = vec![false; plan.len()];
    let mut records = Vec::with_capacity(progress.done.len());
    for (index, execution) in progress.done {
        executed[index] = true;
        summary.merge(&execution.summary);
        records.push(execution.record);
    }
    let not_run: Vec<String> =
        plan.entries.iter().zip(&executed).filter(|(_, ran)| !**ran).map(|(e, _)| e.test_id.clone()).collect();
    runner.record_history(emitter, records);

    let aborted = matches!(progress.stop, Some(StopReason::Cancelled | StopReason::DebugOnFailure));
    emitter.emit(EventPayload::RunFinished(RunFinished {
        summary,
        aborted,
        stop_reason: progress.stop,
        not_run,
        duration_s: started.elapsed().as_secs_f64(),
    }));
    match progress.failure {
        Some(ctx) if progress.stop == Some(StopReason::DebugOnFailure) => Err(Error::FailureSignal(Box::new(ctx))),
        _ => Ok(summary),
    }
}
