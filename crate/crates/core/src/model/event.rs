use std::any::Any;
use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{FailureContext, Metadata, Outcome, RunSummary, SourceLocation};

/// Scratch state shared between a runner and its reporters.
///
/// Each reporter keys its own slot by name; updates are atomic
/// read-modify-write under one lock.
#[derive(Clone, Default)]
pub struct StateCell(Arc<Mutex<HashMap<String, Box<dyn Any + Send>>>>);

impl StateCell {
    pub fn new() -> Self {
        StateCell::default()
    }

    pub fn with<T, R>(&self, key: &str, f: impl FnOnce(&mut T) -> R) -> R
    where
        T: Default + Send + 'static,
    {
        let mut slots = self.0.lock().unwrap_or_else(|e| e.into_inner());
        let slot = slots.entry(key.to_owned()).or_insert_with(|| Box::new(T::default()));
        if !slot.is::<T>() {
            *slot = Box::new(T::default());
        }
        f(slot.downcast_mut::<T>().expect("slot type checked above"))
    }

    pub fn ptr_eq(&self, other: &StateCell) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

impl fmt::Debug for StateCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("StateCell(..)")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    FailFast,
    Cancelled,
    DebugOnFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStarted {
    pub seed: u64,
    /// Planned test ids in dispatch order.
    pub tests: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFinished {
    pub summary: RunSummary,
    pub aborted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_reason: Option<StopReason>,
    #[serde(default)]
    pub not_run: Vec<String>,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteEvent {
    pub description: String,
    /// Path of suite descriptions, ending with this suite.
    pub suite_path: Vec<String>,
    #[serde(default)]
    pub metadata: Metadata,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRef {
    pub id: String,
    pub description: String,
    pub suite_path: Vec<String>,
    #[serde(default)]
    pub metadata: Metadata,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<SourceLocation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestLeave {
    pub id: String,
    pub description: String,
    pub suite_path: Vec<String>,
    pub outcome: Outcome,
    pub duration_s: f64,
    pub assertions: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssertionResult {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_id: Option<String>,
    pub expression_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub outcome: Outcome,
    /// Rendered result value; absent when the body raised.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    /// Rendered argument values, captured on fail/error only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub argument_values: Option<Vec<String>>,
    pub duration_s: f64,
    #[serde(default)]
    pub inspect: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<SourceLocation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NestingKind {
    InvalidNesting,
    InvalidStructure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestingError {
    /// Serialized as `nesting_kind`: protocol frames reserve `kind`.
    #[serde(rename = "nesting_kind")]
    pub kind: NestingKind,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_id: Option<String>,
    pub suite_path: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Warning {
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum EventPayload {
    RunStarted(RunStarted),
    RunFinished(RunFinished),
    SuiteEnter(SuiteEvent),
    SuiteLeave(SuiteEvent),
    TestRegistered(TestRef),
    TestEnter(TestRef),
    TestLeave(TestLeave),
    AssertionResult(AssertionResult),
    NestingError(NestingError),
    FailureContext(FailureContext),
    Warning(Warning),
}

impl EventPayload {
    pub fn type_name(&self) -> &'static str {
        match self {
            EventPayload::RunStarted(_) => "run-started",
            EventPayload::RunFinished(_) => "run-finished",
            EventPayload::SuiteEnter(_) => "suite-enter",
            EventPayload::SuiteLeave(_) => "suite-leave",
            EventPayload::TestRegistered(_) => "test-registered",
            EventPayload::TestEnter(_) => "test-enter",
            EventPayload::TestLeave(_) => "test-leave",
            EventPayload::AssertionResult(_) => "assertion-result",
            EventPayload::NestingError(_) => "nesting-error",
            EventPayload::FailureContext(_) => "failure-context",
            EventPayload::Warning(_) => "warning",
        }
    }
}

/// One occurrence emitted by a runner to its reporter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunEvent {
    pub run_id: String,
    pub sequence: u64,
    #[serde(flatten)]
    pub payload: EventPayload,
    #[serde(skip)]
    pub state_cell: StateCell,
}

impl RunEvent {
    pub fn type_name(&self) -> &'static str {
        self.payload.type_name()
    }
}

impl PartialEq for RunEvent {
    fn eq(&self, other: &Self) -> bool {
        self.run_id == other.run_id && self.sequence == other.sequence && self.payload == other.payload
    }
}
