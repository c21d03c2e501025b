//! Runtime entities shared by every other module: values, outcomes,
//! tests, suites, the loaded hierarchy, events and summaries.

mod event;
mod failure;
mod hierarchy;
mod latency;
mod outcome;
mod summary;
mod test_case;
mod value;

pub use event::{
    AssertionResult, EventPayload, NestingError, NestingKind, RunEvent, RunFinished, RunStarted, StateCell, StopReason,
    SuiteEvent, TestLeave, TestRef, Warning,
};
pub use failure::{native_backtrace, BacktraceFrame, FailureContext, MAX_BACKTRACE_FRAMES, MAX_RENDERED_VALUES_BYTES};
pub use hierarchy::{forest_tests, HierarchyNode};
pub use latency::{LatencyBand, LatencyBudget, LATENCY_BUDGET};
pub use outcome::{judge, Judgement, Outcome, OutcomeKind};
pub use summary::RunSummary;
pub(crate) use test_case::flag;
pub use test_case::{
    make_assertion, split_test_id, test_id, ArgsThunk, AssertionBody, AssertionSpec, Metadata, SourceLocation,
    SuiteBody, SuiteNode, TestBody, TestCase, EXPECTED_TO_FAIL_KEY, INSPECT_KEY, NO_FAILURE_KEY, SKIP_KEY,
};
pub use value::Value;
