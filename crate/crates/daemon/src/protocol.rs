//! Wire frames: one JSON object per line, in both directions.

use flowtest::model::{forest_tests, HierarchyNode, Metadata, OutcomeKind, RunEvent};
use flowtest::scheduling::{filter_match, filter_record};
use flowtest::{HistoryStore, OptionsPatch};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

pub const PROTOCOL_VERSION: u32 = 1;

pub const OPS: [&str; 9] =
    ["hello", "load", "list", "set-options", "run", "rerun-failed", "rerun-last", "cancel", "shutdown"];

/// Error codes carried in `error.code` of a failed response.
pub mod codes {
    pub const BAD_REQUEST: &str = "bad-request";
    pub const UNKNOWN_OP: &str = "unknown-op";
    pub const INVALID_OPTIONS: &str = "invalid-options";
    pub const NO_PREVIOUS_RUN: &str = "no-previous-run";
    pub const NO_ROOT: &str = "no-root";
    pub const LOAD_FAILED: &str = "load-failed";
    pub const RUN_FAILED: &str = "run-failed";
    pub const SHUTTING_DOWN: &str = "shutting-down";
}

#[derive(Debug, Clone, Deserialize)]
pub struct Request {
    pub op: String,
    #[serde(default)]
    pub request_id: Option<Value>,
    #[serde(default)]
    pub params: Option<Value>,
}

impl Request {
    pub fn parse(line: &str) -> Result<Request, ProtocolError> {
        serde_json::from_str(line).map_err(|e| ProtocolError::new(codes::BAD_REQUEST, e.to_string()))
    }

    pub fn params(&self) -> Map<String, Value> {
        match &self.params {
            Some(Value::Object(m)) => m.clone(),
            _ => Map::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{code}: {message}")]
pub struct ProtocolError {
    pub code: &'static str,
    pub message: String,
}

impl ProtocolError {
    pub fn new(code: &'static str, message: impl Into<String>) -> Self {
        ProtocolError { code, message: message.into() }
    }
}

/// A successful response; `body` fields are merged into the frame.
pub fn ok_frame(request_id: Option<&Value>, body: Value) -> Value {
    let mut frame = Map::new();
    frame.insert("kind".into(), "response".into());
    frame.insert("request_id".into(), request_id.cloned().unwrap_or(Value::Null));
    frame.insert("ok".into(), true.into());
    if let Value::Object(fields) = body {
        frame.extend(fields);
    }
    Value::Object(frame)
}

pub fn error_frame(request_id: Option<&Value>, error: &ProtocolError) -> Value {
    json!({
        "kind": "response",
        "request_id": request_id.cloned().unwrap_or(Value::Null),
        "ok": false,
        "error": { "code": error.code, "message": error.message },
    })
}

/// A run event as streamed to every session.
pub fn event_frame(event: &RunEvent) -> Value {
    let mut frame = Map::new();
    frame.insert("kind".into(), Value::Null);
    if let Value::Object(fields) = serde_json::to_value(event).expect("events serialize") {
        frame.extend(fields);
    }
    frame.insert("kind".into(), "event".into());
    Value::Object(frame)
}

/// A run that could not start or broke down outside any test body.
pub fn run_error_frame(run_id: &str, error: &ProtocolError) -> Value {
    json!({
        "kind": "run-error",
        "run_id": run_id,
        "error": { "code": error.code, "message": error.message },
    })
}

/// Options for one run: any `OptionsPatch` field, with `filter` accepted
/// as a short form of `filter_query`.
pub fn options_patch(params: &Map<String, Value>) -> Result<OptionsPatch, ProtocolError> {
    let mut params = params.clone();
    if let Some(filter) = params.remove("filter") {
        params.entry("filter_query").or_insert(filter);
    }
    if let Some(Value::Object(options)) = params.remove("options") {
        for (k, v) in options {
            params.entry(k).or_insert(v);
        }
    }
    serde_json::from_value(Value::Object(params)).map_err(|e| ProtocolError::new(codes::INVALID_OPTIONS, e.to_string()))
}

/// One entry of a `list` response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestDescriptor {
    pub id: String,
    pub suite_path: Vec<String>,
    pub description: String,
    pub metadata: Metadata,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub module: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_outcome: Option<OutcomeKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_duration_s: Option<f64>,
}

pub fn describe(forest: &[HierarchyNode], history: &HistoryStore, filter: &str) -> Vec<TestDescriptor> {
    forest_tests(forest)
        .into_iter()
        .filter(|t| filter_match(filter, &filter_record(t, history)))
        .map(|t| {
            let last = history.get(&t.id);
            TestDescriptor {
                id: t.id.clone(),
                suite_path: t.suite_path.clone(),
                description: t.description.clone(),
                metadata: t.metadata.clone(),
                module: t.module.clone(),
                last_outcome: last.map(|r| r.outcome),
                last_duration_s: last.map(|r| r.duration),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn responses_merge_body_fields() {
        let f = ok_frame(Some(&json!("r1")), json!({"version": 1}));
        assert_eq!(f, json!({"kind": "response", "request_id": "r1", "ok": true, "version": 1}));
        let e = error_frame(None, &ProtocolError::new(codes::UNKNOWN_OP, "nope"));
        assert_eq!(e["error"]["code"], "unknown-op");
        assert_eq!(e["request_id"], Value::Null);
    }

    #[test]
    fn filter_is_short_for_filter_query() {
        let p = options_patch(json!({"filter": "nested", "fail_fast": true}).as_object().unwrap()).unwrap();
        assert_eq!(p.filter_query.as_deref(), Some("nested"));
        assert_eq!(p.fail_fast, Some(true));
        let p = options_patch(json!({"options": {"seed": 3}, "future_field": 1}).as_object().unwrap()).unwrap();
        assert_eq!(p.seed, Some(3));
        let bad = options_patch(json!({"fail_fast": "yes"}).as_object().unwrap()).unwrap_err();
        assert_eq!(bad.code, codes::INVALID_OPTIONS);
    }

    #[test]
    fn malformed_lines_are_bad_requests() {
        assert_eq!(Request::parse("{").unwrap_err().code, codes::BAD_REQUEST);
        assert_eq!(Request::parse("{\"params\":{}}").unwrap_err().code, codes::BAD_REQUEST);
        let r = Request::parse("{\"op\":\"hello\",\"request_id\":7,\"extra\":true}").unwrap();
        assert_eq!((r.op.as_str(), r.request_id), ("hello", Some(json!(7))));
    }
}
