//! Reporters: single-argument event handlers that return whether they
//! handled the event, combinators over them, and TAP/JUnit emitters.

mod builtin;
mod junit;
mod record;
mod sink;
mod tap;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

pub use builtin::{dots, hierarchy, logging, silent, unhandled, verbose};
pub use junit::emit_junit;
pub use record::EventLog;
pub use sink::{current_output_port, report, with_output_port, CapturedOutput, OutputPort};
pub use tap::emit_tap;

use crate::error::{Error, Result};
use crate::model::RunEvent;

type Handler = dyn Fn(&RunEvent) -> bool + Send + Sync;

/// A stateless event handler. Any state a reporter needs lives in the
/// event's state cell under the reporter's name.
#[derive(Clone)]
pub struct Reporter {
    name: Arc<str>,
    handler: Arc<Handler>,
}

impl Reporter {
    pub fn new<F>(name: &str, handler: F) -> Self
    where
        F: Fn(&RunEvent) -> bool + Send + Sync + 'static,
    {
        Reporter { name: name.into(), handler: Arc::new(handler) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn handle(&self, event: &RunEvent) -> bool {
        (self.handler)(event)
    }
}

impl fmt::Debug for Reporter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Reporter({})", self.name)
    }
}

fn combined_name(prefix: &str, reporters: &[Reporter]) -> String {
    let names: Vec<&str> = reporters.iter().map(Reporter::name).collect();
    format!("{prefix}({})", names.join(","))
}

/// Invoke every reporter in order; handled iff at least one handled.
pub fn use_all(reporters: Vec<Reporter>) -> Result<Reporter> {
    if reporters.is_empty() {
        return Err(Error::Validation("use_all needs at least one reporter".into()));
    }
    let name = combined_name("use-all", &reporters);
    Ok(Reporter::new(&name, move |event| reporters.iter().fold(false, |handled, r| r.handle(event) | handled)))
}

/// Invoke reporters in order until one handles the event.
pub fn use_first(reporters: Vec<Reporter>) -> Result<Reporter> {
    if reporters.is_empty() {
        return Err(Error::Validation("use_first needs at least one reporter".into()));
    }
    let name = combined_name("use-first", &reporters);
    Ok(Reporter::new(&name, move |event| reporters.iter().any(|r| r.handle(event))))
}

/// verbose and hierarchy together, with unhandled as the fallback.
pub fn base() -> Reporter {
    let pair = use_all(vec![verbose(), hierarchy()]).expect("non-empty");
    use_first(vec![pair, unhandled()]).expect("non-empty")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReporterKind {
    Silent,
    Logging,
    Unhandled,
    Hierarchy,
    Verbose,
    Dots,
    Base,
}

impl FromStr for ReporterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "silent" => ReporterKind::Silent,
            "logging" => ReporterKind::Logging,
            "unhandled" => ReporterKind::Unhandled,
            "hierarchy" => ReporterKind::Hierarchy,
            "verbose" => ReporterKind::Verbose,
            "dots" => ReporterKind::Dots,
            "base" => ReporterKind::Base,
            other => return Err(Error::Validation(format!("unknown reporter kind `{other}`"))),
        })
    }
}

pub fn builtin(kind: ReporterKind) -> Reporter {
    match kind {
        ReporterKind::Silent => silent(),
        ReporterKind::Logging => logging(),
        ReporterKind::Unhandled => unhandled(),
        ReporterKind::Hierarchy => hierarchy(),
        ReporterKind::Verbose => verbose(),
        ReporterKind::Dots => dots(),
        ReporterKind::Base => base(),
    }
}

pub fn builtin_named(kind: &str) -> Result<Reporter> {
    kind.parse().map(builtin)
}
