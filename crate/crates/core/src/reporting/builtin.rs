use super::{report, Reporter};
use crate::model::{EventPayload, OutcomeKind, RunEvent, StopReason};

pub fn silent() -> Reporter {
    Reporter::new("silent", |_| true)
}

/// One line per event: sequence, type and the JSON payload.
pub fn logging() -> Reporter {
    Reporter::new("logging", |event| {
        let mut payload = serde_json::to_value(&event.payload).unwrap_or_default();
        if let Some(map) = payload.as_object_mut() {
            map.remove("type");
        }
        report(&format!("[{} #{}] {} {}\n", event.run_id, event.sequence, event.type_name(), payload));
        true
    })
}

pub fn unhandled() -> Reporter {
    Reporter::new("unhandled", |event| {
        report(&format!("unhandled event {} (run {}, #{})\n", event.type_name(), event.run_id, event.sequence));
        true
    })
}

const HIERARCHY_DEPTH: &str = "hierarchy/depth";

/// Prints the suite tree as it is loaded.
pub fn hierarchy() -> Reporter {
    Reporter::new("hierarchy", |event| {
        let cell = &event.state_cell;
        match &event.payload {
            EventPayload::SuiteEnter(suite) => {
                let depth = cell.with::<usize, _>(HIERARCHY_DEPTH, |d| {
                    *d += 1;
                    *d - 1
                });
                report(&format!("{}┌> {}\n", "|".repeat(depth), suite.description));
                true
            }
            EventPayload::TestRegistered(test) => {
                let depth = cell.with::<usize, _>(HIERARCHY_DEPTH, |d| *d);
                report(&format!("{} + test {}\n", "|".repeat(depth), test.description));
                true
            }
            EventPayload::SuiteLeave(suite) => {
                let depth = cell.with::<usize, _>(HIERARCHY_DEPTH, |d| {
                    *d = d.saturating_sub(1);
                    *d
                });
                report(&format!("{}└> {}\n", "|".repeat(depth), suite.description));
                true
            }
            _ => false,
        }
    })
}

fn stop_reason_text(reason: StopReason) -> &'static str {
    match reason {
        StopReason::FailFast => "fail-fast",
        StopReason::Cancelled => "cancelled",
        StopReason::DebugOnFailure => "debug-on-failure",
    }
}

/// Per-test banners, each assertion with its verdict, and the final
/// summary alist.
pub fn verbose() -> Reporter {
    Reporter::new("verbose", |event: &RunEvent| {
        match &event.payload {
            EventPayload::RunStarted(_) => {}
            EventPayload::TestEnter(test) => report(&format!("\n┌Test {}\n", test.description)),
            EventPayload::AssertionResult(a) => {
                let mut out = String::new();
                if let Some(description) = &a.description {
                    out.push_str(&format!("Checking {description}\n"));
                }
                out.push_str(&a.expression_text);
                out.push('\n');
                let detail = a.outcome.detail.as_deref().unwrap_or("");
                match a.outcome.kind {
                    OutcomeKind::Pass if a.inspect => {
                        out.push_str(&format!("✓ => {}\n", a.value.as_deref().unwrap_or("")))
                    }
                    OutcomeKind::Pass => out.push_str("✓\n"),
                    OutcomeKind::Fail => out.push_str(&format!("✗ {detail}\n")),
                    OutcomeKind::Error => out.push_str(&format!("✗ error: {detail}\n")),
                    OutcomeKind::Xfail => out.push_str(&format!("✗ (expected) {detail}\n")),
                    other => out.push_str(&format!("{other}\n")),
                }
                report(&out);
            }
            EventPayload::TestLeave(test) => {
                let mut out = String::new();
                match test.outcome.kind {
                    OutcomeKind::Skip => out.push_str("- skipped\n"),
                    OutcomeKind::Xfail => out.push_str("- expected failure\n"),
                    _ => {}
                }
                out.push_str(&format!("└Test {}\n", test.description));
                report(&out);
            }
            EventPayload::RunFinished(finished) => {
                let mut out = format!("{}\n", finished.summary);
                if let Some(reason) = finished.stop_reason {
                    out.push_str(&format!(
                        "stopped ({}); {} not run\n",
                        stop_reason_text(reason),
                        finished.not_run.len()
                    ));
                }
                report(&out);
            }
            EventPayload::NestingError(err) => {
                let kind = serde_json::to_value(err.kind).unwrap_or_default();
                report(&format!("✗ {}: {}\n", kind.as_str().unwrap_or(""), err.message));
            }
            EventPayload::FailureContext(ctx) => {
                let mut out = format!("Failure in {}: {}\n", ctx.test_id, ctx.expression_text);
                if !ctx.argument_values.is_empty() {
                    out.push_str(&format!("  arguments: {}\n", ctx.argument_values.join(", ")));
                }
                for frame in ctx.backtrace.iter().take(8) {
                    match &frame.location {
                        Some(loc) => out.push_str(&format!("  at {} ({loc})\n", frame.function)),
                        None => out.push_str(&format!("  at {}\n", frame.function)),
                    }
                }
                report(&out);
            }
            EventPayload::Warning(w) => report(&format!("warning: {}\n", w.message)),
            EventPayload::SuiteEnter(_) | EventPayload::SuiteLeave(_) | EventPayload::TestRegistered(_) => {
                return false
            }
        }
        true
    })
}

/// One character per finished test.
pub fn dots() -> Reporter {
    Reporter::new("dots", |event| match &event.payload {
        EventPayload::TestLeave(test) => {
            let c = match test.outcome.kind {
                OutcomeKind::Pass => ".",
                OutcomeKind::Fail => "F",
                OutcomeKind::Error => "E",
                OutcomeKind::Skip => "s",
                OutcomeKind::Xfail => "x",
                OutcomeKind::Xpass => "X",
            };
            report(c);
            true
        }
        EventPayload::RunFinished(_) => {
            report("\n");
            true
        }
        _ => false,
    })
}
