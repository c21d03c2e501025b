//! A runtime-first testing framework.
//!
//! Assertions, tests and suites are values sent as messages to a
//! long-lived [`Runner`]. The runner registers or executes them depending
//! on where they occur, reports through composable [`Reporter`]s, and
//! schedules runs with the help of persisted [`HistoryStore`] data.
//!
//! ```
//! use flowtest::{is, metadata, dsl, reporting, Runner, RunnerOptions};
//!
//! let runner = Runner::new(reporting::silent(), RunnerOptions::sequential()).unwrap();
//! let summary = flowtest::with_runner(&runner, || {
//!     dsl::test_suite("arithmetic", metadata!(), || {
//!         dsl::test("addition", metadata!(), || {
//!             is!(= ; 4, 2 + 2)?;
//!             Ok(())
//!         })
//!     })
//! })
//! .unwrap()
//! .into_summary()
//! .unwrap();
//! assert_eq!((summary.tests, summary.assertions, summary.failures), (1, 1, 0));
//! ```

pub mod discovery;
pub mod dsl;
pub mod error;
pub mod history;
pub mod model;
pub mod reporting;
pub mod runner;
pub mod scheduling;
pub mod script;

pub use error::{Error, Raised, Result};
pub use history::{HistoryStore, RunRecord};
pub use model::{HierarchyNode, Metadata, Outcome, OutcomeKind, RunEvent, RunSummary, SuiteNode, TestCase, Value};
pub use reporting::Reporter;
pub use runner::{
    current_runner, make_runner, set_default_runner, with_runner, CancelToken, ExecControl, OptionsPatch, Response,
    Runner, RunnerMessage, RunnerOptions, TestDefinition,
};
