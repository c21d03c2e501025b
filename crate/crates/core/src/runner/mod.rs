//! The stateful, message-driven runner.
//!
//! Definition forms never execute anything themselves: they send a
//! [`RunnerMessage`] to the ambient runner, which decides from its context
//! stack whether to register, execute, or reject.

mod context;
mod emitter;
mod execute;
mod options;

use std::cell::RefCell;
use std::collections::HashSet;
use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::rc::Rc;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};

use context::{current_mode, push_frame, Mode, SuiteBuilder};
pub use context::{current_runner, frame_depth, set_default_runner, with_runner};
pub(crate) use emitter::Emitter;
pub(crate) use execute::{execute_test, panic_message, TestExecution};
pub use options::{OptionsPatch, RunnerOptions, DEFAULT_WORKER_COUNT};

use crate::error::{Error, Raised, Result};
use crate::history::{HistoryStore, RunRecord};
use crate::model::{
    AssertionSpec, EventPayload, HierarchyNode, Metadata, NestingError, NestingKind, OutcomeKind, RunSummary,
    SourceLocation, StateCell, SuiteEvent, SuiteNode, TestBody, TestCase, TestRef, Value, Warning,
};
use crate::reporting::{current_output_port, Reporter};
use crate::scheduling::{self, RunPlan};

/// A test as sent by the `test` form: not yet placed in a hierarchy.
#[derive(Clone)]
pub struct TestDefinition {
    pub description: String,
    pub metadata: Metadata,
    pub location: Option<SourceLocation>,
    pub body: TestBody,
}

impl TestDefinition {
    pub fn new<F>(description: impl Into<String>, metadata: Metadata, body: F) -> Self
    where
        F: Fn() -> Result<()> + Send + Sync + 'static,
    {
        TestDefinition { description: description.into(), metadata, location: None, body: Arc::new(body) }
    }

    pub fn at(mut self, location: SourceLocation) -> Self {
        self.location = Some(location);
        self
    }
}

impl fmt::Debug for TestDefinition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestDefinition")
            .field("description", &self.description)
            .field("metadata", &self.metadata)
            .finish_non_exhaustive()
    }
}

/// Message type names as they appear on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageType {
    RunTestSuiteBodyThunk,
    RunTestBodyThunk,
    RunAssertion,
    SetOptions,
    GetHierarchy,
    ExecuteLoaded,
    RerunFailed,
}

impl MessageType {
    pub const ALL: [MessageType; 7] = [
        MessageType::RunTestSuiteBodyThunk,
        MessageType::RunTestBodyThunk,
        MessageType::RunAssertion,
        MessageType::SetOptions,
        MessageType::GetHierarchy,
        MessageType::ExecuteLoaded,
        MessageType::RerunFailed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MessageType::RunTestSuiteBodyThunk => "run-test-suite-body-thunk",
            MessageType::RunTestBodyThunk => "run-test-body-thunk",
            MessageType::RunAssertion => "run-assertion",
            MessageType::SetOptions => "set-options",
            MessageType::GetHierarchy => "get-hierarchy",
            MessageType::ExecuteLoaded => "execute-loaded",
            MessageType::RerunFailed => "rerun-failed",
        }
    }
}

impl FromStr for MessageType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MessageType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::Validation(format!("unknown runner message type: {s}")))
    }
}

pub enum RunnerMessage<'a> {
    RunTestSuiteBodyThunk { suite: SuiteNode, execute: bool, module: Option<String> },
    RunTestBodyThunk(TestDefinition),
    RunAssertion(AssertionSpec<'a>),
    SetOptions(OptionsPatch),
    GetHierarchy,
    ExecuteLoaded,
    RerunFailed,
}

impl RunnerMessage<'_> {
    pub fn message_type(&self) -> MessageType {
        match self {
            RunnerMessage::RunTestSuiteBodyThunk { .. } => MessageType::RunTestSuiteBodyThunk,
            RunnerMessage::RunTestBodyThunk(_) => MessageType::RunTestBodyThunk,
            RunnerMessage::RunAssertion(_) => MessageType::RunAssertion,
            RunnerMessage::SetOptions(_) => MessageType::SetOptions,
            RunnerMessage::GetHierarchy => MessageType::GetHierarchy,
            RunnerMessage::ExecuteLoaded => MessageType::ExecuteLoaded,
            RunnerMessage::RerunFailed => MessageType::RerunFailed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Response {
    /// No meaningful value, like a top-level `test` form.
    Unspecified,
    Value(Value),
    Hierarchy(HierarchyNode),
    Forest(Vec<HierarchyNode>),
    Summary(RunSummary),
    Options(RunnerOptions),
}

impl Response {
    pub fn into_summary(self) -> Option<RunSummary> {
        match self {
            Response::Summary(s) => Some(s),
            _ => None,
        }
    }

    pub fn into_value(self) -> Option<Value> {
        match self {
            Response::Value(v) => Some(v),
            _ => None,
        }
    }

    pub fn into_hierarchy(self) -> Option<HierarchyNode> {
        match self {
            Response::Hierarchy(h) => Some(h),
            _ => None,
        }
    }
}

/// Cooperative cancellation for a run: checked before each dispatch.
#[derive(Debug, Clone, Default)]
pub struct CancelToken(Arc<AtomicBool>);

impl CancelToken {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cancel(&self) {
        self.0.store(true, Ordering::SeqCst);
    }

    pub fn is_cancelled(&self) -> bool {
        self.0.load(Ordering::SeqCst)
    }
}

/// Caller-side controls for one plan execution.
#[derive(Debug, Clone, Default)]
pub struct ExecControl {
    pub run_id: Option<String>,
    pub cancel: Option<CancelToken>,
    pub patch: OptionsPatch,
}

/// Top-level suites are keyed by module and description, so re-loading
/// replaces the earlier copy in place.
type SuiteKey = (Option<String>, String);

#[derive(Debug, Clone)]
enum RunScope {
    Loaded,
    Suite(SuiteKey),
}

#[derive(Debug, Clone)]
struct LastRequest {
    scope: RunScope,
    filter_query: Option<String>,
}

struct RunnerState {
    options: RunnerOptions,
    loaded: Vec<(SuiteKey, HierarchyNode)>,
    history: HistoryStore,
    history_warning: Option<String>,
    last_request: Option<LastRequest>,
}

struct RunnerInner {
    reporter: Reporter,
    state_cell: StateCell,
    state: Mutex<RunnerState>,
    runs: AtomicU64,
}

/// A long-lived test runner. Cloning shares the same runner.
#[derive(Clone)]
pub struct Runner(Arc<RunnerInner>);

impl fmt::Debug for Runner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Runner").field("reporter", &self.0.reporter.name()).finish_non_exhaustive()
    }
}

pub fn make_runner(reporter: Reporter, options: RunnerOptions) -> Result<Runner> {
    Runner::new(reporter, options)
}

impl Runner {
    pub fn new(reporter: Reporter, options: RunnerOptions) -> Result<Runner> {
        options.validate()?;
        Ok(Runner(Arc::new(RunnerInner {
            reporter,
            state_cell: StateCell::new(),
            state: Mutex::new(RunnerState {
                options,
                loaded: Vec::new(),
                history: HistoryStore::in_memory(),
                history_warning: None,
                last_request: None,
            }),
            runs: AtomicU64::new(0),
        })))
    }

    pub fn ptr_eq(&self, other: &Runner) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    pub fn reporter(&self) -> &Reporter {
        &self.0.reporter
    }

    pub fn state_cell(&self) -> &StateCell {
        &self.0.state_cell
    }

    fn state(&self) -> MutexGuard<'_, RunnerState> {
        self.0.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Reserve the id the next run will carry, so callers can hand it out
    /// before execution starts.
    pub fn allocate_run_id(&self) -> String {
        format!("run-{}", self.0.runs.fetch_add(1, Ordering::SeqCst) + 1)
    }

    pub(crate) fn emitter(&self, run_id: Option<String>) -> Arc<Emitter> {
        let run_id = run_id.unwrap_or_else(|| self.allocate_run_id());
        Arc::new(Emitter::new(run_id, self.0.reporter.clone(), self.0.state_cell.clone(), current_output_port()))
    }

    pub fn options(&self) -> RunnerOptions {
        self.state().options.clone()
    }

    pub fn set_options(&self, patch: &OptionsPatch) -> Result<RunnerOptions> {
        let mut state = self.state();
        let next = patch.apply(&state.options);
        next.validate()?;
        state.options = next.clone();
        Ok(next)
    }

    /// A snapshot of everything loaded so far.
    pub fn loaded_hierarchy(&self) -> Vec<HierarchyNode> {
        self.state().loaded.iter().map(|(_, node)| node.clone()).collect()
    }

    pub fn clear_loaded(&self) {
        let mut state = self.state();
        state.loaded.clear();
        state.last_request = None;
    }

    /// Replace the history store, e.g. with one loaded from disk.
    pub fn attach_history(&self, history: HistoryStore) {
        let mut state = self.state();
        state.history_warning = history.load_warning().map(str::to_owned);
        state.history = history;
    }

    pub fn history(&self) -> HistoryStore {
        self.state().history.clone()
    }

    pub fn last_outcome(&self, test_id: &str) -> Option<OutcomeKind> {
        self.state().history.last_outcome(test_id)
    }

    pub fn has_previous_run(&self) -> bool {
        self.state().last_request.is_some()
    }

    pub fn handle(&self, message: RunnerMessage<'_>) -> Result<Response> {
        match message {
            RunnerMessage::RunTestSuiteBodyThunk { suite, execute, module } => self.run_suite(suite, execute, module),
            RunnerMessage::RunTestBodyThunk(definition) => self.run_test_definition(definition),
            RunnerMessage::RunAssertion(spec) => self.run_assertion(spec).map(Response::Value),
            RunnerMessage::SetOptions(patch) => self.set_options(&patch).map(Response::Options),
            RunnerMessage::GetHierarchy => Ok(Response::Forest(self.loaded_hierarchy())),
            RunnerMessage::ExecuteLoaded => self.execute_loaded(ExecControl::default()).map(Response::Summary),
            RunnerMessage::RerunFailed => {
                let patch = OptionsPatch { rerun_failed: Some(true), ..Default::default() };
                self.execute_loaded(ExecControl { patch, ..Default::default() }).map(Response::Summary)
            }
        }
    }

    fn nesting_violation(
        &self,
        emitter: &Emitter,
        kind: NestingKind,
        message: String,
        test_id: Option<String>,
        suite_path: Vec<String>,
    ) {
        emitter.emit(EventPayload::NestingError(NestingError { kind, message, test_id, suite_path }));
    }

    pub fn run_assertion(&self, spec: AssertionSpec<'_>) -> Result<Value> {
        match current_mode(self) {
            Mode::Test(scope) => scope.run_assertion(spec),
            Mode::Suite(builder) => {
                let message = format!(
                    "assertion {} is directly inside suite {:?}; wrap it in a test",
                    spec.expression_text,
                    builder.path.last().map(String::as_str).unwrap_or_default()
                );
                self.nesting_violation(
                    &builder.emitter,
                    NestingKind::InvalidStructure,
                    message.clone(),
                    None,
                    builder.path.clone(),
                );
                Err(Error::InvalidStructure(message))
            }
            Mode::TopLevel => execute::run_top_level_assertion(&self.emitter(None), spec),
        }
    }

    fn run_test_definition(&self, definition: TestDefinition) -> Result<Response> {
        if definition.description.is_empty() {
            return Err(Error::Validation("test description is mandatory".into()));
        }
        match current_mode(self) {
            Mode::Test(scope) => {
                let message = format!(
                    "test {:?} defined inside the body of test {:?}",
                    definition.description, scope.description
                );
                self.nesting_violation(
                    scope.sink.emitter(),
                    NestingKind::InvalidNesting,
                    message.clone(),
                    Some(scope.test_id.clone()),
                    scope.suite_path.clone(),
                );
                scope.note_nesting(NestingKind::InvalidNesting, message.clone());
                Err(Error::InvalidNesting(message))
            }
            Mode::Suite(builder) => {
                let test = self.make_test(&builder, definition)?;
                builder.emitter.emit(EventPayload::TestRegistered(TestRef {
                    id: test.id.clone(),
                    description: test.description.clone(),
                    suite_path: test.suite_path.clone(),
                    metadata: test.metadata.clone(),
                    location: test.source_location.clone(),
                }));
                builder.children.borrow_mut().push(HierarchyNode::Test(test));
                Ok(Response::Unspecified)
            }
            Mode::TopLevel => {
                let mut test = TestCase::new(Vec::new(), definition.description, definition.metadata, definition.body)?;
                test.source_location = definition.location;
                let options = self.options();
                let emitter = self.emitter(None);
                let execution = execute_test(self, &emitter, &test, &options, false);
                self.record_history(&emitter, vec![execution.record]);
                Ok(Response::Unspecified)
            }
        }
    }

    fn make_test(&self, builder: &SuiteBuilder, definition: TestDefinition) -> Result<TestCase> {
        let mut test =
            TestCase::new(builder.path.clone(), definition.description, definition.metadata, definition.body)?;
        test.source_location = definition.location;
        test.module = builder.module.clone();
        if !builder.seen_ids.borrow_mut().insert(test.id.clone()) {
            builder.emitter.emit(EventPayload::Warning(Warning {
                message: format!("duplicate test id {:?}; both tests will run", test.id),
            }));
        }
        Ok(test)
    }

    fn load_suite(
        &self,
        suite: &SuiteNode,
        emitter: Arc<Emitter>,
        path: Vec<String>,
        module: Option<String>,
        seen_ids: Rc<RefCell<HashSet<String>>>,
    ) -> Result<HierarchyNode> {
        let builder = Rc::new(SuiteBuilder {
            emitter: emitter.clone(),
            path: path.clone(),
            module,
            children: RefCell::new(Vec::new()),
            seen_ids,
        });
        let event =
            SuiteEvent { description: suite.description.clone(), suite_path: path, metadata: suite.metadata.clone() };
        emitter.emit(EventPayload::SuiteEnter(event.clone()));
        let result = {
            let _frame = push_frame(self.clone(), Mode::Suite(builder.clone()));
            catch_unwind(AssertUnwindSafe(|| (suite.body)()))
        };
        emitter.emit(EventPayload::SuiteLeave(event));
        match result {
            Ok(Ok(())) => {}
            Ok(Err(e)) => return Err(e),
            Err(payload) => {
                return Err(Raised::new(format!(
                    "panic in suite {:?}: {}",
                    suite.description,
                    panic_message(payload.as_ref())
                ))
                .into())
            }
        }
        Ok(HierarchyNode::Suite {
            description: suite.description.clone(),
            metadata: suite.metadata.clone(),
            children: builder.children.take(),
        })
    }

    fn run_suite(&self, suite: SuiteNode, execute: bool, module: Option<String>) -> Result<Response> {
        match current_mode(self) {
            Mode::Test(scope) => {
                let message =
                    format!("suite {:?} defined inside the body of test {:?}", suite.description, scope.description);
                self.nesting_violation(
                    scope.sink.emitter(),
                    NestingKind::InvalidNesting,
                    message.clone(),
                    Some(scope.test_id.clone()),
                    scope.suite_path.clone(),
                );
                scope.note_nesting(NestingKind::InvalidNesting, message.clone());
                Err(Error::InvalidNesting(message))
            }
            Mode::Suite(parent) => {
                let mut path = parent.path.clone();
                path.push(suite.description.clone());
                let module = module.or_else(|| parent.module.clone());
                let node = self.load_suite(&suite, parent.emitter.clone(), path, module, parent.seen_ids.clone())?;
                parent.children.borrow_mut().push(node.clone());
                Ok(Response::Hierarchy(node))
            }
            Mode::TopLevel => {
                let emitter = self.emitter(None);
                let key: SuiteKey = (module.clone(), suite.description.clone());
                let node =
                    self.load_suite(&suite, emitter.clone(), vec![suite.description.clone()], module, Rc::default())?;
                {
                    let mut state = self.state();
                    match state.loaded.iter_mut().find(|(k, _)| *k == key) {
                        Some(slot) => slot.1 = node.clone(),
                        None => state.loaded.push((key.clone(), node.clone())),
                    }
                }
                if !execute {
                    return Ok(Response::Hierarchy(node));
                }
                let request = LastRequest { scope: RunScope::Suite(key), filter_query: None };
                self.execute_request(request, Some(emitter), ExecControl::default()).map(Response::Summary)
            }
        }
    }

    /// Plan and execute everything loaded.
    pub fn execute_loaded(&self, control: ExecControl) -> Result<RunSummary> {
        let request = LastRequest { scope: RunScope::Loaded, filter_query: None };
        self.execute_request(request, None, control)
    }

    /// Rebuild the previous plan's scope and filter with current options
    /// and history, then execute it.
    pub fn rerun_last(&self) -> Result<RunSummary> {
        self.rerun_last_with(ExecControl::default())
    }

    pub fn rerun_last_with(&self, control: ExecControl) -> Result<RunSummary> {
        let request =
            self.state().last_request.clone().ok_or_else(|| Error::Precondition("no previous run to repeat".into()))?;
        self.execute_request(request, None, control)
    }

    /// The plan a run would execute right now.
    pub fn build_plan(&self, patch: &OptionsPatch) -> Result<RunPlan> {
        let state = self.state();
        let options = patch.apply(&state.options);
        options.validate()?;
        let forest: Vec<HierarchyNode> = state.loaded.iter().map(|(_, n)| n.clone()).collect();
        Ok(scheduling::build_plan(&forest, &state.history, &options))
    }

    fn execute_request(
        &self,
        mut request: LastRequest,
        emitter: Option<Arc<Emitter>>,
        control: ExecControl,
    ) -> Result<RunSummary> {
        let (plan, warning) = {
            let mut state = self.state();
            let mut options = control.patch.apply(&state.options);
            if control.patch.filter_query.is_none() {
                options.filter_query = request.filter_query.clone().or(options.filter_query);
            }
            options.validate()?;
            request.filter_query = options.filter_query.clone();
            let forest: Vec<HierarchyNode> = match &request.scope {
                RunScope::Loaded => state.loaded.iter().map(|(_, n)| n.clone()).collect(),
                RunScope::Suite(key) => state.loaded.iter().filter(|(k, _)| k == key).map(|(_, n)| n.clone()).collect(),
            };
            let plan = scheduling::build_plan(&forest, &state.history, &options);
            state.last_request = Some(request);
            (plan, state.history_warning.take())
        };
        let emitter = emitter.unwrap_or_else(|| self.emitter(control.run_id.clone()));
        let warnings: Vec<String> = warning.into_iter().collect();
        scheduling::execute_plan(self, &emitter, &plan, control.cancel.as_ref(), warnings)
    }

    /// Fold finished records into history; persistence errors become
    /// warning events rather than failing the run.
    pub(crate) fn record_history(&self, emitter: &Emitter, records: Vec<RunRecord>) {
        let result = self.state().history.record_run(records);
        if let Err(e) = result {
            emitter.emit(EventPayload::Warning(Warning { message: format!("could not persist run history: {e}") }));
        }
    }
}
