//! Definition forms. Each one only sends a message to the ambient runner.

use crate::error::{Raised, Result};
use crate::model::{make_assertion, AssertionSpec, HierarchyNode, Metadata, SuiteNode, Value};
use crate::runner::{current_runner, Response, RunnerMessage, TestDefinition};

/// Run an assertion under the current runner and return its value.
pub fn is(spec: AssertionSpec<'_>) -> Result<Value> {
    current_runner()
        .handle(RunnerMessage::RunAssertion(spec))?
        .into_value()
        .ok_or_else(|| Raised::new("runner returned no value for an assertion").into())
}

/// Build and run an assertion in one step.
pub fn check<'a, B>(expression_text: &str, body: B) -> Result<Value>
where
    B: FnOnce() -> Result<Value, Raised> + 'a,
{
    is(make_assertion(expression_text, body, || Ok(Vec::new()), None)?)
}

/// Define a test. Inside a suite this registers it; at top level it runs
/// right away.
pub fn test<F>(description: &str, metadata: Metadata, body: F) -> Result<()>
where
    F: Fn() -> Result<()> + Send + Sync + 'static,
{
    test_definition(TestDefinition::new(description, metadata, body))
}

pub fn test_definition(definition: TestDefinition) -> Result<()> {
    current_runner().handle(RunnerMessage::RunTestBodyThunk(definition)).map(|_| ())
}

/// A suite value; nothing runs until it is called or loaded.
pub fn test_suite_thunk<F>(description: &str, metadata: Metadata, body: F) -> Result<SuiteNode>
where
    F: Fn() -> Result<()> + Send + Sync + 'static,
{
    SuiteNode::new(description, metadata, body)
}

/// Define a suite and call it immediately: nested suites register, top
/// level ones load and execute.
pub fn test_suite<F>(description: &str, metadata: Metadata, body: F) -> Result<Response>
where
    F: Fn() -> Result<()> + Send + Sync + 'static,
{
    test_suite_thunk(description, metadata, body)?.call()
}

impl SuiteNode {
    /// Call the suite under the current runner with execution on.
    pub fn call(&self) -> Result<Response> {
        self.send(true, None)
    }

    /// Load without executing any test body.
    pub fn load(&self) -> Result<HierarchyNode> {
        match self.send(false, None)? {
            Response::Hierarchy(h) => Ok(h),
            other => Err(Raised::new(format!("unexpected response to a load: {other:?}")).into()),
        }
    }

    pub fn send(&self, execute: bool, module: Option<String>) -> Result<Response> {
        current_runner().handle(RunnerMessage::RunTestSuiteBodyThunk { suite: self.clone(), execute, module })
    }
}

/// Build an ordered metadata map: `metadata! { "skip?" => true }`.
#[macro_export]
macro_rules! metadata {
    () => { $crate::model::Metadata::new() };
    ($($key:expr => $value:expr),+ $(,)?) => {{
        let mut m = $crate::model::Metadata::new();
        $( m.insert(::std::string::String::from($key), $crate::model::Value::from($value)); )+
        m
    }};
}

/// Assert an expression, capturing its source text.
///
/// `is!(expr)` checks truthiness of `expr` (anything convertible into a
/// `Value`); `is!(op; a, b, ...)` applies a comparison and, on failure,
/// reports the evaluated operands.
#[macro_export]
macro_rules! is {
    ($op:tt; $($arg:expr),+ $(,)?) => {{
        let text = ::std::format!(
            "({} {})",
            ::std::stringify!($op),
            [$(::std::stringify!($arg)),+].join(" ")
        );
        let values = || -> ::std::result::Result<::std::vec::Vec<$crate::model::Value>, $crate::error::Raised> {
            ::std::result::Result::Ok(::std::vec![$($crate::model::Value::from($arg)),+])
        };
        $crate::model::make_assertion(
            text,
            || -> ::std::result::Result<$crate::model::Value, $crate::error::Raised> {
                let v = values()?;
                ::std::result::Result::Ok($crate::model::Value::Bool($crate::dsl::compare(::std::stringify!($op), &v)?))
            },
            values,
            None,
        )
        .and_then(|spec| $crate::dsl::is(spec.with_operator(::std::stringify!($op))))
    }};
    ($e:expr) => {
        $crate::model::make_assertion(
            ::std::stringify!($e),
            || ::std::result::Result::Ok($crate::model::Value::from($e)),
            || ::std::result::Result::Ok(::std::vec::Vec::new()),
            None,
        )
        .and_then($crate::dsl::is)
    };
}

/// Apply a chained comparison (`=`, `==`, `!=`, `<`, `<=`, `>`, `>=`) to
/// every adjacent pair.
pub fn compare(op: &str, values: &[Value]) -> Result<bool, Raised> {
    let ordered = |a: &Value, b: &Value| -> Result<std::cmp::Ordering, Raised> {
        match (a, b) {
            (Value::Int(x), Value::Int(y)) => Ok(x.cmp(y)),
            (Value::Str(x), Value::Str(y)) => Ok(x.cmp(y)),
            _ => {
                let (x, y) = (a.as_float(), b.as_float());
                match (x, y) {
                    (Some(x), Some(y)) => {
                        x.partial_cmp(&y).ok_or_else(|| Raised::new(format!("{a} and {b} are not comparable")))
                    }
                    _ => Err(Raised::new(format!("{a} and {b} are not comparable"))),
                }
            }
        }
    };
    let mut result = true;
    for pair in values.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let holds = match op {
            "=" | "==" => a == b || ordered(a, b).is_ok_and(|o| o.is_eq()),
            "!=" => !(a == b || ordered(a, b).is_ok_and(|o| o.is_eq())),
            "<" => ordered(a, b)?.is_lt(),
            "<=" => ordered(a, b)?.is_le(),
            ">" => ordered(a, b)?.is_gt(),
            ">=" => ordered(a, b)?.is_ge(),
            other => return Err(Raised::new(format!("unknown comparison {other}"))),
        };
        result &= holds;
    }
    Ok(result)
}
