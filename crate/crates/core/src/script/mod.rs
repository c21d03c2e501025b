//! Test files on disk.
//!
//! Test modules are written in a small s-expression language whose
//! definition forms (`is`, `test`, `test-suite`, `test-suite-thunk`,
//! `define-test-suite`) send the same runner messages as the Rust API:
//!
//! ```scheme
//! (define-test-suite sample-tests
//!   (test "Test 1"
//!     (is #t))
//!   (test-suite "Nested test suite"
//!     (test "Test 2"
//!       #:metadata '((expected-to-fail? . #t))
//!       (is (= 5 (+ 2 2)))
//!       (is 'hello))))
//! ```

mod eval;
mod read;

use std::path::Path;
use std::sync::Arc;

pub use read::{read_all, Datum, Node, ReadError};

use crate::discovery::{get_all_test_modules, ModulePath, SuiteRegistry};
use crate::error::{Error, Result};
use crate::model::{HierarchyNode, SuiteNode, Value};
use crate::runner::{with_runner, Runner};
use eval::{Ctx, Env};

fn parse(file: &str, text: &str) -> Result<(Arc<Ctx>, Vec<Node>)> {
    let forms = read_all(text).map_err(|e| Error::Script { path: file.into(), line: e.line, message: e.message })?;
    Ok((Arc::new(Ctx { file: file.into(), source: text.into() }), forms))
}

/// Evaluate `text` with ordinary semantics under the current runner and
/// return the value of the last form.
pub fn eval_source(file: &str, text: &str) -> Result<Value> {
    let (ctx, forms) = parse(file, text)?;
    let env = Env::global();
    let mut last = Value::Absent;
    for form in &forms {
        last = ctx.eval(form, &env)?.into_value();
    }
    Ok(last)
}

/// Evaluate a test module without running anything and register the
/// suites it defines, in definition order.
pub fn load_module_source(
    file: &str,
    text: &str,
    module: &ModulePath,
    registry: &SuiteRegistry,
) -> Result<Vec<SuiteNode>> {
    let (ctx, forms) = parse(file, text)?;
    let env = Env::global();
    registry.register_module(module.clone());
    let mut suites = Vec::new();
    for form in &forms {
        if let Some(suite) = ctx.eval_module_form(form, &env)? {
            registry.register(module.clone(), suite.clone());
            suites.push(suite);
        }
    }
    Ok(suites)
}

pub fn load_module_file(path: &Path, module: &ModulePath, registry: &SuiteRegistry) -> Result<Vec<SuiteNode>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    load_module_source(&path.display().to_string(), &text, module, registry)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectLoad {
    pub modules: Vec<ModulePath>,
    pub forest: Vec<HierarchyNode>,
}

/// Discover every test module under `project_root`, register its suites
/// and load them into `runner` without executing any test body.
pub fn load_project(project_root: &Path, runner: &Runner, registry: &SuiteRegistry) -> Result<ProjectLoad> {
    let modules = get_all_test_modules(project_root)?;
    for module in &modules {
        load_module_file(&module.file_path(project_root), module, registry)?;
    }
    for module in &modules {
        for suite in registry.get_module_test_suites(module)? {
            with_runner(runner, || suite.send(false, Some(module.to_string())))?;
        }
    }
    Ok(ProjectLoad { modules, forest: runner.loaded_hierarchy() })
}

#[cfg(test)]
mod tests;
