use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeKind {
    Pass,
    Fail,
    Error,
    Skip,
    Xfail,
    Xpass,
}

impl OutcomeKind {
    pub const ALL: [OutcomeKind; 6] = [
        OutcomeKind::Pass,
        OutcomeKind::Fail,
        OutcomeKind::Error,
        OutcomeKind::Skip,
        OutcomeKind::Xfail,
        OutcomeKind::Xpass,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeKind::Pass => "pass",
            OutcomeKind::Fail => "fail",
            OutcomeKind::Error => "error",
            OutcomeKind::Skip => "skip",
            OutcomeKind::Xfail => "xfail",
            OutcomeKind::Xpass => "xpass",
        }
    }

    /// Outcomes that make a run unsuccessful. An unexpected pass counts.
    pub fn is_failing(self) -> bool {
        matches!(self, OutcomeKind::Fail | OutcomeKind::Error | OutcomeKind::Xpass)
    }

    /// Outcomes that fail-fast stops on and that scheduling puts first.
    pub fn demands_attention(self) -> bool {
        matches!(self, OutcomeKind::Fail | OutcomeKind::Error)
    }
}

impl fmt::Display for OutcomeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OutcomeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        OutcomeKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| format!("unknown outcome kind `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub kind: OutcomeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Outcome {
    pub fn pass() -> Self {
        Outcome { kind: OutcomeKind::Pass, detail: None }
    }

    pub fn fail(detail: impl Into<String>) -> Self {
        Outcome { kind: OutcomeKind::Fail, detail: Some(detail.into()) }
    }

    pub fn error(detail: impl Into<String>) -> Self {
        Outcome { kind: OutcomeKind::Error, detail: Some(detail.into()) }
    }

    pub fn of_kind(kind: OutcomeKind, detail: Option<String>) -> Self {
        Outcome { kind, detail }
    }
}

/// The classification of one asserted result value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgement {
    pub rendered_value: String,
    pub truthy: bool,
}

pub fn judge(result: &Value) -> Judgement {
    Judgement { rendered_value: result.to_string(), truthy: result.is_truthy() }
}
