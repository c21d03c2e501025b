use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::Value;
use crate::error::{Error, Raised, Result};

/// Ordered key/value metadata attached to tests and suites.
pub type Metadata = IndexMap<String, Value>;

pub const SKIP_KEY: &str = "skip?";
pub const EXPECTED_TO_FAIL_KEY: &str = "expected-to-fail?";
pub const INSPECT_KEY: &str = "inspect?";
pub const NO_FAILURE_KEY: &str = "no-failure?";

pub(crate) fn flag(metadata: &Metadata, key: &str) -> bool {
    metadata.get(key).is_some_and(Value::is_truthy)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceLocation {
    pub file: String,
    pub line: u32,
}

impl SourceLocation {
    pub fn new(file: impl Into<String>, line: u32) -> Self {
        SourceLocation { file: file.into(), line }
    }
}

impl fmt::Display for SourceLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.file, self.line)
    }
}

pub type AssertionBody<'a> = Box<dyn FnOnce() -> Result<Value, Raised> + 'a>;
pub type ArgsThunk<'a> = Box<dyn FnOnce() -> Result<Vec<Value>, Raised> + 'a>;

/// A deferred assertion: the verbatim expression text plus thunks for the
/// value and for the evaluated arguments of the outermost call. Both thunks
/// run at most once, synchronously, while the runner handles the assertion.
pub struct AssertionSpec<'a> {
    pub expression_text: String,
    pub description: Option<String>,
    /// Name of the outermost operator, used when rendering a mismatch.
    pub operator: Option<String>,
    pub location: Option<SourceLocation>,
    pub(crate) body: AssertionBody<'a>,
    pub(crate) args: ArgsThunk<'a>,
}

impl fmt::Debug for AssertionSpec<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AssertionSpec")
            .field("expression_text", &self.expression_text)
            .field("description", &self.description)
            .field("operator", &self.operator)
            .finish_non_exhaustive()
    }
}

impl AssertionSpec<'_> {
    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        self.description = Some(description.into());
        self
    }

    pub fn with_operator(mut self, operator: impl Into<String>) -> Self {
        self.operator = Some(operator.into());
        self
    }

    pub fn at(mut self, location: SourceLocation) -> Self {
        self.location = Some(location);
        self
    }

    /// The operator named by the expression: explicit, or the head of a
    /// parenthesised call form.
    pub fn operator_name(&self) -> Option<String> {
        if let Some(op) = &self.operator {
            return Some(op.clone());
        }
        let text = self.expression_text.trim();
        let inner = text.strip_prefix('(')?;
        let head: String =
            inner.trim_start().chars().take_while(|c| !c.is_whitespace() && *c != '(' && *c != ')').collect();
        (!head.is_empty()).then_some(head)
    }
}

pub fn make_assertion<'a, B, A>(
    expression_text: impl Into<String>,
    body: B,
    args: A,
    description: Option<String>,
) -> Result<AssertionSpec<'a>>
where
    B: FnOnce() -> Result<Value, Raised> + 'a,
    A: FnOnce() -> Result<Vec<Value>, Raised> + 'a,
{
    let expression_text = expression_text.into();
    if expression_text.trim().is_empty() {
        return Err(Error::Validation("assertion expression text is empty".into()));
    }
    Ok(AssertionSpec {
        expression_text,
        description,
        operator: None,
        location: None,
        body: Box::new(body),
        args: Box::new(args),
    })
}

pub type TestBody = Arc<dyn Fn() -> Result<()> + Send + Sync>;
pub type SuiteBody = Arc<dyn Fn() -> Result<()> + Send + Sync>;

/// A test as registered with a runner: description, metadata and the
/// deferred body.
#[derive(Clone, Serialize, Deserialize)]
pub struct TestCase {
    pub id: String,
    pub description: String,
    pub suite_path: Vec<String>,
    #[serde(default)]
    pub metadata: Metadata,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_location: Option<SourceLocation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub module: Option<String>,
    #[serde(skip, default = "unavailable_body")]
    pub(crate) body: TestBody,
}

fn unavailable_body() -> TestBody {
    Arc::new(|| Err(Raised::new("test body is not available in a deserialized hierarchy").into()))
}

impl TestCase {
    pub fn new(
        suite_path: Vec<String>,
        description: impl Into<String>,
        metadata: Metadata,
        body: TestBody,
    ) -> Result<Self> {
        let description = description.into();
        if description.is_empty() {
            return Err(Error::Validation("test description is mandatory".into()));
        }
        Ok(TestCase {
            id: test_id(&suite_path, &description),
            description,
            suite_path,
            metadata,
            source_location: None,
            module: None,
            body,
        })
    }

    pub fn body(&self) -> &TestBody {
        &self.body
    }
}

impl PartialEq for TestCase {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
            && self.description == other.description
            && self.suite_path == other.suite_path
            && self.metadata == other.metadata
            && self.source_location == other.source_location
            && self.module == other.module
    }
}

impl fmt::Debug for TestCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestCase")
            .field("id", &self.id)
            .field("metadata", &self.metadata)
            .field("source_location", &self.source_location)
            .finish_non_exhaustive()
    }
}

/// A suite value: a description plus a body that registers children when
/// run under a runner.
#[derive(Clone)]
pub struct SuiteNode {
    pub description: String,
    pub metadata: Metadata,
    pub source_location: Option<SourceLocation>,
    pub(crate) body: SuiteBody,
}

impl fmt::Debug for SuiteNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SuiteNode")
            .field("description", &self.description)
            .field("metadata", &self.metadata)
            .finish_non_exhaustive()
    }
}

impl SuiteNode {
    pub fn new<F>(description: impl Into<String>, metadata: Metadata, body: F) -> Result<Self>
    where
        F: Fn() -> Result<()> + Send + Sync + 'static,
    {
        let description = description.into();
        if description.is_empty() {
            return Err(Error::Validation("suite description is mandatory".into()));
        }
        Ok(SuiteNode { description, metadata, source_location: None, body: Arc::new(body) })
    }

    pub fn at(mut self, location: SourceLocation) -> Self {
        self.source_location = Some(location);
        self
    }

    /// Suite values always carry the suite flag.
    pub fn is_test_suite(&self) -> bool {
        true
    }
}

const ID_SEPARATOR: char = '/';
const ID_ESCAPE: char = '\\';

fn escape_component(out: &mut String, component: &str) {
    for c in component.chars() {
        if c == ID_SEPARATOR || c == ID_ESCAPE {
            out.push(ID_ESCAPE);
        }
        out.push(c);
    }
}

/// Join a suite path and a test description into a stable identifier.
///
/// Components are separated by `/`; literal `/` and `\` are escaped with a
/// backslash, so the mapping is injective.
pub fn test_id(suite_path: &[String], description: &str) -> String {
    let mut id = String::new();
    for component in suite_path {
        escape_component(&mut id, component);
        id.push(ID_SEPARATOR);
    }
    escape_component(&mut id, description);
    id
}

/// Inverse of [`test_id`]: the unescaped components, description last.
pub fn split_test_id(id: &str) -> Vec<String> {
    let mut parts = vec![String::new()];
    let mut chars = id.chars();
    while let Some(c) = chars.next() {
        match c {
            ID_ESCAPE => {
                if let Some(next) = chars.next() {
                    parts.last_mut().unwrap().push(next);
                }
            }
            ID_SEPARATOR => parts.push(String::new()),
            c => parts.last_mut().unwrap().push(c),
        }
    }
    parts
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;

    fn path(parts: &[&str]) -> Vec<String> {
        parts.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn id_of_top_level_test_is_its_description() {
        assert_eq!(test_id(&[], "Test 1"), "Test 1");
    }

    #[test]
    fn id_joins_suite_path() {
        let p = path(&["sample-tests", "Nested test suite"]);
        let id = test_id(&p, "Test 2");
        assert_eq!(id, "sample-tests/Nested test suite/Test 2");
        assert_eq!(split_test_id(&id), path(&["sample-tests", "Nested test suite", "Test 2"]));
    }

    #[test]
    fn id_escapes_separator() {
        assert_eq!(test_id(&path(&["a/b"]), "c"), "a\\/b/c");
        assert_ne!(test_id(&path(&["a/b"]), "c"), test_id(&path(&["a", "b"]), "c"));
        assert_eq!(split_test_id("a\\/b/c"), path(&["a/b", "c"]));
    }

    // Brute force over every path of length <= 2 plus description drawn from
    // a small alphabet that includes the separator and escape characters.
    #[test]
    fn id_is_injective_over_small_alphabet() {
        let alphabet = ["", "a", "/", "\\", "a/", "\\/", "/\\", "a\\"];
        let descriptions = ["x", "/", "\\", "x/y", "x\\"];
        let mut seen: HashMap<String, (Vec<String>, String)> = HashMap::new();
        let mut paths: Vec<Vec<String>> = vec![vec![]];
        for a in alphabet {
            paths.push(path(&[a]));
            for b in alphabet {
                paths.push(path(&[a, b]));
            }
        }
        for p in &paths {
            for d in descriptions {
                let id = test_id(p, d);
                let input = (p.clone(), d.to_string());
                if let Some(prev) = seen.insert(id.clone(), input.clone()) {
                    assert_eq!(prev, input, "collision on {id}");
                }
                let mut expected = p.clone();
                expected.push(d.to_string());
                assert_eq!(split_test_id(&id), expected);
            }
        }
    }

    #[test]
    fn empty_expression_text_is_rejected() {
        let err = make_assertion("  ", || Ok(Value::Bool(true)), || Ok(vec![]), None).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn make_assertion_does_not_execute() {
        use std::sync::atomic::{AtomicBool, Ordering};
        static RAN: AtomicBool = AtomicBool::new(false);
        let spec = make_assertion(
            "(= 4 (+ 2 2))",
            || {
                RAN.store(true, Ordering::SeqCst);
                Ok(Value::Bool(true))
            },
            || Ok(vec![Value::Int(4), Value::Int(4)]),
            None,
        )
        .unwrap();
        assert!(!RAN.load(Ordering::SeqCst));
        assert_eq!(spec.description, None);
        assert_eq!(spec.operator_name().as_deref(), Some("="));
        let described =
            make_assertion("(equal? 'hi 'hey)", || Ok(Value::Bool(false)), || Ok(vec![]), Some("school math".into()))
                .unwrap();
        assert_eq!(described.description.as_deref(), Some("school math"));
        let constant = make_assertion("#t", || Ok(Value::Bool(true)), || Ok(vec![]), None).unwrap();
        assert_eq!(constant.operator_name(), None);
    }

    #[test]
    fn empty_test_description_is_rejected() {
        let body: TestBody = Arc::new(|| Ok(()));
        assert!(TestCase::new(vec![], "", Metadata::new(), body).is_err());
    }
}
