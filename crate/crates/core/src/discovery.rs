//! Source-to-test module mapping by path convention, and the registry test
//! modules put their suites in.
//!
//! Layout: source modules live under `src/`, test modules under `test/`,
//! with the final segment of a test module ending in `-test`. The module
//! `(my-project tool)` is `src/my-project/tool.scm`; its tests are
//! `(my-project tool-test)` in `test/my-project/tool-test.scm`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Mutex, OnceLock};

use indexmap::IndexMap;
use walkdir::WalkDir;

use crate::error::{Error, Result};
use crate::model::SuiteNode;

pub const SOURCE_ROOT: &str = "src";
pub const TEST_ROOT: &str = "test";
pub const TEST_SUFFIX: &str = "-test";
pub const MODULE_EXTENSION: &str = "scm";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RootKind {
    Source,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModulePath {
    segments: Vec<String>,
    root_kind: RootKind,
}

impl ModulePath {
    pub fn new<I, S>(segments: I, root_kind: RootKind) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let segments: Vec<String> = segments.into_iter().map(Into::into).collect();
        if segments.is_empty() || segments.iter().any(|s| s.is_empty() || s.contains(['/', '\\', ' '])) {
            return Err(Error::Validation(format!("invalid module path {segments:?}")));
        }
        if root_kind == RootKind::Test && !segments[segments.len() - 1].ends_with(TEST_SUFFIX) {
            return Err(Error::Validation(format!("test module {segments:?} must end with a {TEST_SUFFIX:?} segment")));
        }
        Ok(ModulePath { segments, root_kind })
    }

    pub fn source<I: IntoIterator<Item = S>, S: Into<String>>(segments: I) -> Result<Self> {
        Self::new(segments, RootKind::Source)
    }

    pub fn test<I: IntoIterator<Item = S>, S: Into<String>>(segments: I) -> Result<Self> {
        Self::new(segments, RootKind::Test)
    }

    pub fn segments(&self) -> &[String] {
        &self.segments
    }

    pub fn root_kind(&self) -> RootKind {
        self.root_kind
    }

    /// The conventional test counterpart of a source module.
    pub fn test_counterpart(&self) -> Option<ModulePath> {
        if self.root_kind != RootKind::Source {
            return None;
        }
        let mut segments = self.segments.clone();
        let last = segments.last_mut()?;
        last.push_str(TEST_SUFFIX);
        Some(ModulePath { segments, root_kind: RootKind::Test })
    }

    /// The source module a test module covers.
    pub fn source_counterpart(&self) -> Option<ModulePath> {
        if self.root_kind != RootKind::Test {
            return None;
        }
        let mut segments = self.segments.clone();
        let last = segments.last_mut()?;
        let stem = last.strip_suffix(TEST_SUFFIX)?;
        if stem.is_empty() {
            return None;
        }
        *last = stem.to_owned();
        Some(ModulePath { segments, root_kind: RootKind::Source })
    }

    pub fn file_path(&self, project_root: &Path) -> PathBuf {
        let mut path = project_root.join(match self.root_kind {
            RootKind::Source => SOURCE_ROOT,
            RootKind::Test => TEST_ROOT,
        });
        path.extend(&self.segments);
        path.set_extension(MODULE_EXTENSION);
        path
    }

    /// Reverse of [`file_path`](Self::file_path) for files under `test/`.
    pub fn from_test_file(project_root: &Path, file: &Path) -> Option<ModulePath> {
        let relative = file.strip_prefix(project_root.join(TEST_ROOT)).ok()?;
        if relative.extension()? != MODULE_EXTENSION {
            return None;
        }
        let relative = relative.with_extension("");
        let segments: Option<Vec<String>> =
            relative.components().map(|c| c.as_os_str().to_str().map(str::to_owned)).collect();
        ModulePath::test(segments?).ok()
    }
}

impl fmt::Display for ModulePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.segments.join(" "))
    }
}

/// Parses `(my-project tool)` or `my-project/tool`; the root kind follows
/// from the `-test` suffix.
impl FromStr for ModulePath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let segments: Vec<&str> = match s.strip_prefix('(').and_then(|s| s.strip_suffix(')')) {
            Some(inner) => inner.split_whitespace().collect(),
            None => s.split('/').filter(|p| !p.is_empty()).collect(),
        };
        let kind = match segments.last() {
            Some(last) if last.ends_with(TEST_SUFFIX) => RootKind::Test,
            _ => RootKind::Source,
        };
        ModulePath::new(segments, kind)
    }
}

/// Suites registered by test modules, keyed by module, in registration
/// order.
#[derive(Debug, Default)]
pub struct SuiteRegistry {
    modules: Mutex<IndexMap<ModulePath, Vec<SuiteNode>>>,
}

impl SuiteRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// The registry test modules self-register into at initialization.
    pub fn global() -> &'static SuiteRegistry {
        static GLOBAL: OnceLock<SuiteRegistry> = OnceLock::new();
        GLOBAL.get_or_init(SuiteRegistry::new)
    }

    /// Mark a module as present even if it defines no suites.
    pub fn register_module(&self, module: ModulePath) {
        self.lock().entry(module).or_default();
    }

    /// Registering the same description twice replaces the earlier suite in
    /// place, so re-loading a module is idempotent.
    pub fn register(&self, module: ModulePath, suite: SuiteNode) {
        let mut modules = self.lock();
        let suites = modules.entry(module).or_default();
        match suites.iter_mut().find(|s| s.description == suite.description) {
            Some(slot) => *slot = suite,
            None => suites.push(suite),
        }
    }

    pub fn contains(&self, module: &ModulePath) -> bool {
        self.lock().contains_key(module)
    }

    pub fn modules(&self) -> Vec<ModulePath> {
        self.lock().keys().cloned().collect()
    }

    pub fn get_module_test_suites(&self, module: &ModulePath) -> Result<Vec<SuiteNode>> {
        self.lock().get(module).cloned().ok_or_else(|| Error::AbsentModule(module.to_string()))
    }

    pub fn clear(&self) {
        self.lock().clear();
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, IndexMap<ModulePath, Vec<SuiteNode>>> {
        self.modules.lock().unwrap_or_else(|e| e.into_inner())
    }
}

/// The test module covering `source`, if it is registered or exists on
/// disk under `project_root`.
pub fn get_test_module(
    source: &ModulePath,
    registry: &SuiteRegistry,
    project_root: Option<&Path>,
) -> Option<ModulePath> {
    let candidate = source.test_counterpart()?;
    let on_disk = project_root.is_some_and(|root| candidate.file_path(root).is_file());
    (registry.contains(&candidate) || on_disk).then_some(candidate)
}

pub fn get_module_test_suites(module: &ModulePath, registry: &SuiteRegistry) -> Result<Vec<SuiteNode>> {
    registry.get_module_test_suites(module)
}

/// Every test module under `<project_root>/test`, sorted.
pub fn get_all_test_modules(project_root: &Path) -> Result<Vec<ModulePath>> {
    std::fs::read_dir(project_root).map_err(|e| Error::io(project_root, e))?;
    let test_root = project_root.join(TEST_ROOT);
    if !test_root.exists() {
        return Ok(Vec::new());
    }
    let mut modules = Vec::new();
    for entry in WalkDir::new(&test_root).follow_links(true) {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(&test_root).to_path_buf();
            Error::io(path, e.into())
        })?;
        if entry.file_type().is_file() {
            if let Some(module) = ModulePath::from_test_file(project_root, entry.path()) {
                modules.push(module);
            }
        }
    }
    modules.sort();
    modules.dedup();
    Ok(modules)
}
