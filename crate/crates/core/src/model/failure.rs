use std::backtrace::Backtrace;

use serde::{Deserialize, Serialize};

use super::Outcome;

pub const MAX_BACKTRACE_FRAMES: usize = 64;
pub const MAX_RENDERED_VALUES_BYTES: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BacktraceFrame {
    pub function: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
}

impl BacktraceFrame {
    pub fn new(function: impl Into<String>, location: Option<String>) -> Self {
        BacktraceFrame { function: function.into(), location }
    }
}

/// Everything captured at the point of a failing assertion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureContext {
    pub test_id: String,
    pub expression_text: String,
    pub argument_values: Vec<String>,
    pub backtrace: Vec<BacktraceFrame>,
    pub outcome: Outcome,
}

impl FailureContext {
    /// Enforce the frame-size bounds: at most 64 frames and 4 KiB of
    /// rendered argument text.
    pub fn bounded(mut self) -> Self {
        self.backtrace.truncate(MAX_BACKTRACE_FRAMES);
        let mut budget = MAX_RENDERED_VALUES_BYTES;
        let mut kept = Vec::with_capacity(self.argument_values.len());
        for value in self.argument_values {
            if budget == 0 {
                break;
            }
            if value.len() <= budget {
                budget -= value.len();
                kept.push(value);
            } else {
                let mut cut = budget;
                while !value.is_char_boundary(cut) {
                    cut -= 1;
                }
                kept.push(format!("{}…", &value[..cut]));
                budget = 0;
            }
        }
        self.argument_values = kept;
        self
    }
}

/// Native stack frames of the current thread, innermost first, skipping
/// the capture machinery itself.
pub fn native_backtrace(limit: usize) -> Vec<BacktraceFrame> {
    let rendered = Backtrace::force_capture().to_string();
    let mut frames: Vec<BacktraceFrame> = Vec::new();
    for line in rendered.lines() {
        let trimmed = line.trim_start();
        if let Some(location) = trimmed.strip_prefix("at ") {
            if let Some(last) = frames.last_mut() {
                last.location.get_or_insert_with(|| location.trim().to_owned());
            }
            continue;
        }
        if let Some((index, function)) = trimmed.split_once(": ") {
            if index.chars().all(|c| c.is_ascii_digit()) {
                frames.push(BacktraceFrame::new(function.trim(), None));
            }
        }
    }
    frames
        .into_iter()
        .filter(|f| {
            !f.function.starts_with("std::backtrace")
                && !f.function.contains("native_backtrace")
                && !f.function.starts_with("<std::backtrace")
        })
        .take(limit)
        .collect()
}
