use std::fmt::Write;

use crate::error::{Error, Result};
use crate::model::{EventPayload, OutcomeKind, RunEvent, RunFinished};

/// The events of the first complete run in `events`: from run-started
/// through the run-finished carrying the same run id.
pub(crate) fn complete_run(events: &[RunEvent]) -> Result<(&[RunEvent], &RunFinished)> {
    let start = events
        .iter()
        .position(|e| matches!(e.payload, EventPayload::RunStarted(_)))
        .ok_or_else(|| Error::IncompleteStream("no run-started event".into()))?;
    let run_id = &events[start].run_id;
    for (offset, event) in events[start..].iter().enumerate() {
        if let EventPayload::RunFinished(finished) = &event.payload {
            if &event.run_id == run_id {
                return Ok((&events[start..=start + offset], finished));
            }
        }
    }
    Err(Error::IncompleteStream(format!("run {run_id} has no run-finished event")))
}

fn escape_description(id: &str) -> String {
    let mut out = String::with_capacity(id.len());
    for c in id.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '#' => out.push_str("\\#"),
            '\n' | '\r' => out.push(' '),
            c => out.push(c),
        }
    }
    out
}

fn yaml_string(s: &str) -> String {
    serde_json::to_string(s).unwrap_or_else(|_| "\"\"".into())
}

/// Render a complete run as TAP version 14.
pub fn emit_tap(events: &[RunEvent]) -> Result<String> {
    let (run, finished) = complete_run(events)?;
    let leaves: Vec<_> = run
        .iter()
        .filter_map(|e| match &e.payload {
            EventPayload::TestLeave(t) => Some(t),
            _ => None,
        })
        .collect();

    let mut out = String::from("TAP version 14\n");
    let _ = writeln!(out, "1..{}", leaves.len());
    for (i, test) in leaves.iter().enumerate() {
        let n = i + 1;
        let desc = escape_description(&test.id);
        let detail = test.outcome.detail.as_deref();
        match test.outcome.kind {
            OutcomeKind::Pass => {
                let _ = writeln!(out, "ok {n} - {desc}");
            }
            OutcomeKind::Skip => {
                let _ = writeln!(out, "ok {n} - {desc} # SKIP");
            }
            OutcomeKind::Xfail => {
                let _ = writeln!(out, "not ok {n} - {desc} # TODO expected failure");
            }
            kind @ (OutcomeKind::Fail | OutcomeKind::Error | OutcomeKind::Xpass) => {
                let _ = writeln!(out, "not ok {n} - {desc}");
                out.push_str("  ---\n");
                let _ = writeln!(out, "  outcome: {kind}");
                if let Some(detail) = detail {
                    let _ = writeln!(out, "  message: {}", yaml_string(detail));
                }
                let _ = writeln!(out, "  duration_s: {:.6}", test.duration_s);
                out.push_str("  ...\n");
            }
        }
    }
    let s = &finished.summary;
    let _ = writeln!(out, "# tests {}", s.tests);
    let _ = writeln!(out, "# assertions {}", s.assertions);
    let _ = writeln!(out, "# failures {}", s.failures);
    let _ = writeln!(out, "# errors {}", s.errors);
    if !finished.not_run.is_empty() {
        let _ = writeln!(out, "# not run {}", finished.not_run.len());
    }
    Ok(out)
}
