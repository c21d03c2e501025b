use std::cell::RefCell;
use std::collections::HashSet;
use std::rc::Rc;
use std::sync::{Arc, OnceLock, RwLock};

use super::emitter::{Emitter, EventSink};
use super::{Runner, RunnerOptions};
use crate::model::{FailureContext, HierarchyNode, NestingKind, OutcomeKind, RunSummary, SourceLocation};
use crate::reporting;

/// A suite body being evaluated: children register here.
pub(crate) struct SuiteBuilder {
    pub(crate) emitter: Arc<Emitter>,
    pub(crate) path: Vec<String>,
    pub(crate) module: Option<String>,
    pub(crate) children: RefCell<Vec<HierarchyNode>>,
    pub(crate) seen_ids: Rc<RefCell<HashSet<String>>>,
}

#[derive(Default)]
pub(crate) struct TestAccum {
    pub(crate) outcomes: Vec<(OutcomeKind, Option<String>)>,
    pub(crate) summary: RunSummary,
    pub(crate) failure: Option<FailureContext>,
    pub(crate) nesting: Option<(NestingKind, String)>,
}

/// A test body being executed.
pub(crate) struct TestScope {
    pub(crate) sink: EventSink,
    pub(crate) test_id: String,
    pub(crate) description: String,
    pub(crate) suite_path: Vec<String>,
    pub(crate) location: Option<SourceLocation>,
    pub(crate) expected_to_fail: bool,
    pub(crate) inspect: bool,
    pub(crate) options: RunnerOptions,
    pub(crate) accum: RefCell<TestAccum>,
}

#[derive(Clone)]
pub(crate) enum Mode {
    TopLevel,
    Suite(Rc<SuiteBuilder>),
    Test(Rc<TestScope>),
}

struct Frame {
    runner: Runner,
    mode: Mode,
}

thread_local! {
    static FRAMES: RefCell<Vec<Frame>> = const { RefCell::new(Vec::new()) };
}

pub(crate) struct FrameGuard(());

impl Drop for FrameGuard {
    fn drop(&mut self) {
        FRAMES.with(|f| {
            f.borrow_mut().pop();
        });
    }
}

pub(crate) fn push_frame(runner: Runner, mode: Mode) -> FrameGuard {
    FRAMES.with(|f| f.borrow_mut().push(Frame { runner, mode }));
    FrameGuard(())
}

/// The mode of the innermost frame when it belongs to `runner`. A frame of
/// another runner on top means `runner` was re-installed at top level.
pub(crate) fn current_mode(runner: &Runner) -> Mode {
    FRAMES.with(|f| match f.borrow().last() {
        Some(frame) if frame.runner.ptr_eq(runner) => frame.mode.clone(),
        _ => Mode::TopLevel,
    })
}

static DEFAULT_RUNNER: OnceLock<RwLock<Runner>> = OnceLock::new();

fn default_slot() -> &'static RwLock<Runner> {
    DEFAULT_RUNNER.get_or_init(|| {
        let runner = Runner::new(reporting::base(), RunnerOptions::default()).expect("default options are consistent");
        RwLock::new(runner)
    })
}

/// The ambient runner: the innermost `with_runner` binding on this thread,
/// else the process-wide default.
pub fn current_runner() -> Runner {
    FRAMES
        .with(|f| f.borrow().last().map(|frame| frame.runner.clone()))
        .unwrap_or_else(|| default_slot().read().unwrap_or_else(|e| e.into_inner()).clone())
}

/// Replace the process-wide default runner.
pub fn set_default_runner(runner: Runner) {
    *default_slot().write().unwrap_or_else(|e| e.into_inner()) = runner;
}

/// Run `f` with `runner` as the ambient runner. The previous binding is
/// restored when `f` returns or unwinds.
pub fn with_runner<R>(runner: &Runner, f: impl FnOnce() -> R) -> R {
    let _guard = push_frame(runner.clone(), Mode::TopLevel);
    f()
}

/// Number of runner frames active on this thread; zero outside any
/// `with_runner`, suite body or test body.
pub fn frame_depth() -> usize {
    FRAMES.with(|f| f.borrow().len())
}
