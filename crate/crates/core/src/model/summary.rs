use std::fmt;

use serde::{Deserialize, Serialize};

use super::{EventPayload, OutcomeKind, RunEvent};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub errors: u64,
    pub failures: u64,
    pub assertions: u64,
    pub tests: u64,
}

impl RunSummary {
    pub fn is_success(&self) -> bool {
        self.errors == 0 && self.failures == 0
    }

    pub fn add_assertion(&mut self, kind: OutcomeKind) {
        self.assertions += 1;
        match kind {
            OutcomeKind::Error => self.errors += 1,
            OutcomeKind::Fail => self.failures += 1,
            _ => {}
        }
    }

    pub fn merge(&mut self, other: &RunSummary) {
        self.errors += other.errors;
        self.failures += other.failures;
        self.assertions += other.assertions;
        self.tests += other.tests;
    }

    /// Recount from an event stream: assertion-result events give the
    /// assertion, failure and error counts; test-leave events give tests.
    pub fn from_events<'a>(events: impl IntoIterator<Item = &'a RunEvent>) -> Self {
        let mut summary = RunSummary::default();
        for event in events {
            match &event.payload {
                EventPayload::AssertionResult(a) => summary.add_assertion(a.outcome.kind),
                EventPayload::TestLeave(_) => summary.tests += 1,
                _ => {}
            }
        }
        summary
    }
}

/// Renders as the alist printed at the end of a verbose run.
impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "((errors . {})\n (failures . {})\n (assertions . {})\n (tests . {}))",
            self.errors, self.failures, self.assertions, self.tests
        )
    }
}
