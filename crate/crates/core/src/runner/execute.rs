use std::any::Any;
use std::cell::RefCell;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::rc::Rc;
use std::sync::Arc;
use std::time::Instant;

use chrono::Utc;

use super::context::{push_frame, Mode, TestAccum, TestScope};
use super::emitter::{Emitter, EventSink};
use super::{Runner, RunnerOptions};
use crate::error::{Error, Raised, Result};
use crate::history::RunRecord;
use crate::model::{
    flag, native_backtrace, AssertionResult, AssertionSpec, BacktraceFrame, EventPayload, FailureContext, NestingKind,
    Outcome, OutcomeKind, RunSummary, SourceLocation, TestCase, TestLeave, TestRef, Value, EXPECTED_TO_FAIL_KEY,
    INSPECT_KEY, MAX_BACKTRACE_FRAMES, NO_FAILURE_KEY, SKIP_KEY,
};

pub(crate) const TEST_BODY_EXPRESSION: &str = "<test body>";
pub(crate) const EXPECTED_FAILURE_EXPRESSION: &str = "<expected failure>";
pub(crate) const UNAVAILABLE: &str = "unavailable";

pub(crate) fn panic_message(payload: &(dyn Any + Send)) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_owned()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "panic with a non-string payload".to_owned()
    }
}

/// "5 and 4 are not =" for a two-argument call, "3 is not even?" for one.
pub(crate) fn mismatch_detail(operator: Option<&str>, args: Option<&[String]>, value: &Value) -> String {
    match (operator, args) {
        (Some(op), Some(args)) if !args.is_empty() && args != [UNAVAILABLE] => match args {
            [one] => format!("{one} is not {op}"),
            [init @ .., last] => format!("{} and {last} are not {op}", init.join(", ")),
            [] => unreachable!(),
        },
        _ => format!("got {value}"),
    }
}

struct Evaluation {
    expression_text: String,
    description: Option<String>,
    location: Option<SourceLocation>,
    result: std::result::Result<Value, String>,
    /// Rendered argument values; only evaluated on fail/error.
    args: Option<Vec<String>>,
    detail: Option<String>,
    duration_s: f64,
}

impl Evaluation {
    fn raw_kind(&self) -> OutcomeKind {
        match &self.result {
            Ok(v) if v.is_truthy() => OutcomeKind::Pass,
            Ok(_) => OutcomeKind::Fail,
            Err(_) => OutcomeKind::Error,
        }
    }
}

fn evaluate(spec: AssertionSpec<'_>) -> Evaluation {
    let operator = spec.operator_name();
    let AssertionSpec { expression_text, description, location, body, args, .. } = spec;
    let started = Instant::now();
    let result = match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(v)) => Ok(v),
        Ok(Err(raised)) => Err(raised.message),
        Err(payload) => Err(panic_message(payload.as_ref())),
    };
    let duration_s = started.elapsed().as_secs_f64();
    let mut eval = Evaluation { expression_text, description, location, result, args: None, detail: None, duration_s };
    if eval.raw_kind() != OutcomeKind::Pass {
        let rendered = match catch_unwind(AssertUnwindSafe(args)) {
            Ok(Ok(values)) => values.iter().map(Value::to_string).collect(),
            _ => vec![UNAVAILABLE.to_owned()],
        };
        eval.detail = Some(match &eval.result {
            Ok(v) => mismatch_detail(operator.as_deref(), Some(&rendered), v),
            Err(msg) => msg.clone(),
        });
        eval.args = Some(rendered);
    }
    eval
}

/// An assertion outside any test: report it and hand back the value, or
/// re-raise the error.
pub(crate) fn run_top_level_assertion(emitter: &Emitter, spec: AssertionSpec<'_>) -> Result<Value> {
    let eval = evaluate(spec);
    let kind = eval.raw_kind();
    emitter.emit(EventPayload::AssertionResult(AssertionResult {
        test_id: None,
        expression_text: eval.expression_text.clone(),
        description: eval.description.clone(),
        outcome: Outcome::of_kind(kind, eval.detail.clone()),
        value: eval.result.as_ref().ok().map(Value::to_string),
        argument_values: eval.args.clone(),
        duration_s: eval.duration_s,
        inspect: false,
        location: eval.location.clone(),
    }));
    eval.result.map_err(|msg| Raised::new(msg).into())
}

impl TestScope {
    fn failure_context(
        &self,
        expression_text: &str,
        location: Option<&SourceLocation>,
        args: &[String],
        outcome: &Outcome,
    ) -> FailureContext {
        let mut backtrace = vec![
            BacktraceFrame::new(format!("is {expression_text}"), location.map(ToString::to_string)),
            BacktraceFrame::new(format!("test {}", self.description), self.location.as_ref().map(ToString::to_string)),
        ];
        backtrace.extend(self.suite_path.iter().rev().map(|s| BacktraceFrame::new(format!("suite {s}"), None)));
        let remaining = MAX_BACKTRACE_FRAMES.saturating_sub(backtrace.len());
        backtrace.extend(native_backtrace(remaining));
        FailureContext {
            test_id: self.test_id.clone(),
            expression_text: expression_text.to_owned(),
            argument_values: args.to_vec(),
            backtrace,
            outcome: outcome.clone(),
        }
        .bounded()
    }

    /// Record one assertion outcome. Returns the failure context when one
    /// was captured for it.
    #[allow(clippy::too_many_arguments)]
    fn record(
        &self,
        expression_text: String,
        description: Option<String>,
        location: Option<SourceLocation>,
        kind: OutcomeKind,
        detail: Option<String>,
        value: Option<String>,
        args: Option<Vec<String>>,
        duration_s: f64,
    ) -> Option<FailureContext> {
        let outcome = Outcome::of_kind(kind, detail.clone());
        self.sink.emit(EventPayload::AssertionResult(AssertionResult {
            test_id: Some(self.test_id.clone()),
            expression_text: expression_text.clone(),
            description,
            outcome: outcome.clone(),
            value,
            argument_values: args.clone(),
            duration_s,
            inspect: self.inspect,
            location: location.clone(),
        }));
        let mut accum = self.accum.borrow_mut();
        accum.outcomes.push((kind, detail));
        accum.summary.add_assertion(kind);
        let wants_context = self.options.debug_on_failure || self.options.capture_failure_context;
        if !(wants_context && matches!(kind, OutcomeKind::Fail | OutcomeKind::Error)) {
            return None;
        }
        let ctx = self.failure_context(&expression_text, location.as_ref(), args.as_deref().unwrap_or(&[]), &outcome);
        self.sink.emit(EventPayload::FailureContext(ctx.clone()));
        if accum.failure.is_none() {
            accum.failure = Some(ctx.clone());
        }
        Some(ctx)
    }

    pub(crate) fn run_assertion(&self, spec: AssertionSpec<'_>) -> Result<Value> {
        let eval = evaluate(spec);
        let mut kind = eval.raw_kind();
        let mut detail = eval.detail.clone();
        if kind == OutcomeKind::Fail && self.inspect {
            kind = OutcomeKind::Pass;
            detail = None;
        }
        if kind == OutcomeKind::Fail && self.expected_to_fail {
            kind = OutcomeKind::Xfail;
        }
        let ctx = self.record(
            eval.expression_text,
            eval.description,
            eval.location,
            kind,
            detail,
            eval.result.as_ref().ok().map(Value::to_string),
            eval.args,
            eval.duration_s,
        );
        if let (Some(ctx), true) = (ctx, self.options.debug_on_failure) {
            return Err(Error::FailureSignal(Box::new(ctx)));
        }
        Ok(eval.result.unwrap_or(Value::Absent))
    }

    pub(crate) fn note_nesting(&self, kind: NestingKind, message: String) {
        let mut accum = self.accum.borrow_mut();
        if accum.nesting.is_none() {
            accum.nesting = Some((kind, message));
        }
    }
}

pub(crate) struct TestExecution {
    pub(crate) record: RunRecord,
    pub(crate) summary: RunSummary,
    pub(crate) failure: Option<FailureContext>,
}

impl TestExecution {
    pub(crate) fn outcome(&self) -> OutcomeKind {
        self.record.outcome
    }
}

fn aggregate(outcomes: &[(OutcomeKind, Option<String>)], expected_to_fail: bool) -> Outcome {
    let first =
        |kind: OutcomeKind| outcomes.iter().find(|(k, _)| *k == kind).map(|(_, d)| Outcome::of_kind(kind, d.clone()));
    if let Some(error) = first(OutcomeKind::Error) {
        return error;
    }
    if expected_to_fail {
        return first(OutcomeKind::Xfail)
            .unwrap_or_else(|| Outcome::of_kind(OutcomeKind::Xpass, Some("expected to fail, but passed".into())));
    }
    first(OutcomeKind::Fail).unwrap_or_else(Outcome::pass)
}

pub(crate) fn execute_test(
    runner: &Runner,
    emitter: &Arc<Emitter>,
    test: &TestCase,
    options: &RunnerOptions,
    buffered: bool,
) -> TestExecution {
    let started = Instant::now();
    let scope = Rc::new(TestScope {
        sink: EventSink::new(emitter.clone(), buffered),
        test_id: test.id.clone(),
        description: test.description.clone(),
        suite_path: test.suite_path.clone(),
        location: test.source_location.clone(),
        expected_to_fail: flag(&test.metadata, EXPECTED_TO_FAIL_KEY),
        inspect: flag(&test.metadata, INSPECT_KEY) && flag(&test.metadata, NO_FAILURE_KEY),
        options: options.clone(),
        accum: RefCell::new(TestAccum::default()),
    });
    scope.sink.emit(EventPayload::TestEnter(TestRef {
        id: test.id.clone(),
        description: test.description.clone(),
        suite_path: test.suite_path.clone(),
        metadata: test.metadata.clone(),
        location: test.source_location.clone(),
    }));

    let outcome = if flag(&test.metadata, SKIP_KEY) {
        Outcome::of_kind(OutcomeKind::Skip, None)
    } else {
        let result = {
            let _frame = push_frame(runner.clone(), Mode::Test(scope.clone()));
            catch_unwind(AssertUnwindSafe(|| (test.body)()))
        };
        let body_error = match result {
            Ok(Ok(())) | Ok(Err(Error::FailureSignal(_))) => None,
            Ok(Err(e)) if e.is_nesting() => {
                let kind = match e {
                    Error::InvalidStructure(_) => NestingKind::InvalidStructure,
                    _ => NestingKind::InvalidNesting,
                };
                scope.note_nesting(kind, e.to_string());
                None
            }
            Ok(Err(e)) => Some(e.to_string()),
            Err(payload) => Some(format!("panic: {}", panic_message(payload.as_ref()))),
        };
        let nesting = scope.accum.borrow().nesting.clone();
        let body_error = body_error.or_else(|| nesting.map(|(_, message)| message));
        if let Some(message) = body_error {
            scope.record(
                TEST_BODY_EXPRESSION.to_owned(),
                None,
                test.source_location.clone(),
                OutcomeKind::Error,
                Some(message),
                None,
                None,
                0.0,
            );
        }
        let outcome = {
            let accum = scope.accum.borrow();
            aggregate(&accum.outcomes, scope.expected_to_fail)
        };
        if outcome.kind == OutcomeKind::Xpass {
            scope.record(
                EXPECTED_FAILURE_EXPRESSION.to_owned(),
                None,
                test.source_location.clone(),
                OutcomeKind::Fail,
                outcome.detail.clone(),
                None,
                None,
                0.0,
            );
        }
        outcome
    };

    let duration_s = started.elapsed().as_secs_f64();
    let assertions = scope.accum.borrow().summary.assertions;
    scope.sink.emit(EventPayload::TestLeave(TestLeave {
        id: test.id.clone(),
        description: test.description.clone(),
        suite_path: test.suite_path.clone(),
        outcome: outcome.clone(),
        duration_s,
        assertions,
    }));
    scope.sink.flush();

    let accum = scope.accum.take();
    let mut summary = accum.summary;
    summary.tests += 1;
    TestExecution {
        record: RunRecord {
            test_id: test.id.clone(),
            outcome: outcome.kind,
            duration: duration_s,
            run_id: emitter.run_id().to_owned(),
            finished_at: Utc::now(),
        },
        summary,
        failure: accum.failure,
    }
}
