use std::fmt::Write;

use super::tap::complete_run;
use crate::error::Result;
use crate::model::{EventPayload, OutcomeKind, RunEvent};

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            '\t' => out.push_str("&#9;"),
            c if (c as u32) < 0x20 => {}
            c => out.push(c),
        }
    }
    out
}

struct Problem {
    error: bool,
    message: String,
    expression: String,
}

struct Case {
    name: String,
    classname: String,
    time: f64,
    skipped: Option<&'static str>,
    problems: Vec<Problem>,
}

#[derive(Default)]
struct Suite {
    name: String,
    children: Vec<Node>,
}

enum Node {
    Suite(Suite),
    Case(Case),
}

#[derive(Default, Clone, Copy)]
struct Counts {
    tests: u64,
    failures: u64,
    errors: u64,
    skipped: u64,
    time: f64,
}

impl Suite {
    fn child_suite(&mut self, name: &str) -> &mut Suite {
        let pos = self.children.iter().position(|n| matches!(n, Node::Suite(s) if s.name == name));
        let idx = match pos {
            Some(idx) => idx,
            None => {
                self.children.push(Node::Suite(Suite { name: name.to_owned(), ..Suite::default() }));
                self.children.len() - 1
            }
        };
        match &mut self.children[idx] {
            Node::Suite(s) => s,
            Node::Case(_) => unreachable!(),
        }
    }

    fn counts(&self) -> Counts {
        let mut c = Counts::default();
        for child in &self.children {
            match child {
                Node::Suite(s) => {
                    let sc = s.counts();
                    c.tests += sc.tests;
                    c.failures += sc.failures;
                    c.errors += sc.errors;
                    c.skipped += sc.skipped;
                    c.time += sc.time;
                }
                Node::Case(case) => {
                    c.tests += 1;
                    c.time += case.time;
                    c.skipped += u64::from(case.skipped.is_some());
                    for p in &case.problems {
                        if p.error {
                            c.errors += 1;
                        } else {
                            c.failures += 1;
                        }
                    }
                }
            }
        }
        c
    }

    fn write(&self, out: &mut String, indent: usize) {
        let c = self.counts();
        let pad = "  ".repeat(indent);
        let _ = write!(
            out,
            "{pad}<testsuite name=\"{}\" tests=\"{}\" failures=\"{}\" errors=\"{}\" skipped=\"{}\" time=\"{:.6}\"",
            escape(&self.name),
            c.tests,
            c.failures,
            c.errors,
            c.skipped,
            c.time
        );
        if self.children.is_empty() {
            out.push_str("/>\n");
            return;
        }
        out.push_str(">\n");
        for child in &self.children {
            match child {
                Node::Suite(s) => s.write(out, indent + 1),
                Node::Case(case) => case.write(out, indent + 1),
            }
        }
        let _ = writeln!(out, "{pad}</testsuite>");
    }
}

impl Case {
    fn write(&self, out: &mut String, indent: usize) {
        let pad = "  ".repeat(indent);
        let _ = write!(
            out,
            "{pad}<testcase name=\"{}\" classname=\"{}\" time=\"{:.6}\"",
            escape(&self.name),
            escape(&self.classname),
            self.time
        );
        if self.skipped.is_none() && self.problems.is_empty() {
            out.push_str("/>\n");
            return;
        }
        out.push_str(">\n");
        if let Some(message) = self.skipped {
            let _ = writeln!(out, "{pad}  <skipped message=\"{message}\"/>");
        }
        for p in &self.problems {
            let tag = if p.error { "error" } else { "failure" };
            let _ = writeln!(
                out,
                "{pad}  <{tag} message=\"{}\" type=\"{tag}\">{}</{tag}>",
                escape(&p.message),
                escape(&p.expression)
            );
        }
        let _ = writeln!(out, "{pad}</testcase>");
    }
}

/// Render a complete run as JUnit XML with nested testsuite elements
/// mirroring the suite hierarchy.
pub fn emit_junit(events: &[RunEvent]) -> Result<String> {
    let (run, _finished) = complete_run(events)?;
    let mut root = Suite { name: run[0].run_id.clone(), ..Suite::default() };
    let mut pending: Vec<(String, Vec<Problem>)> = Vec::new();

    for event in run {
        match &event.payload {
            EventPayload::AssertionResult(a) => {
                let Some(test_id) = &a.test_id else { continue };
                let error = match a.outcome.kind {
                    OutcomeKind::Fail => false,
                    OutcomeKind::Error => true,
                    _ => continue,
                };
                let problem = Problem {
                    error,
                    message: a.outcome.detail.clone().unwrap_or_default(),
                    expression: a.expression_text.clone(),
                };
                match pending.iter_mut().find(|(id, _)| id == test_id) {
                    Some((_, problems)) => problems.push(problem),
                    None => pending.push((test_id.clone(), vec![problem])),
                }
            }
            EventPayload::TestLeave(t) => {
                let problems =
                    pending.iter().position(|(id, _)| id == &t.id).map(|i| pending.remove(i).1).unwrap_or_default();
                let skipped = match t.outcome.kind {
                    OutcomeKind::Skip => Some("skipped"),
                    OutcomeKind::Xfail => Some("expected failure"),
                    _ => None,
                };
                let mut suite = &mut root;
                for component in &t.suite_path {
                    suite = suite.child_suite(component);
                }
                suite.children.push(Node::Case(Case {
                    name: t.description.clone(),
                    classname: t.suite_path.join("."),
                    time: t.duration_s,
                    skipped,
                    problems,
                }));
            }
            _ => {}
        }
    }
    let c = root.counts();
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<testsuites name=\"flowtest\" tests=\"{}\" failures=\"{}\" errors=\"{}\" skipped=\"{}\" time=\"{:.6}\">",
        c.tests, c.failures, c.errors, c.skipped, c.time
    );
    root.write(&mut out, 1);
    out.push_str("</testsuites>\n");
    Ok(out)
}
