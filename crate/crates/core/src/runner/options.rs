use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_WORKER_COUNT: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunnerOptions {
    pub preserve_hierarchy: bool,
    pub sequential: bool,
    pub parallel: bool,
    pub worker_count: usize,
    pub fail_fast: bool,
    pub failing_first: bool,
    pub debug_on_failure: bool,
    pub rerun_failed: bool,
    pub filter_query: Option<String>,
    pub seed: Option<u64>,
    /// Emit a failure-context event for every fail/error even without
    /// debug-on-failure.
    pub capture_failure_context: bool,
}

impl Default for RunnerOptions {
    fn default() -> Self {
        RunnerOptions {
            preserve_hierarchy: false,
            sequential: false,
            parallel: false,
            worker_count: DEFAULT_WORKER_COUNT,
            fail_fast: false,
            failing_first: false,
            debug_on_failure: false,
            rerun_failed: false,
            filter_query: None,
            seed: None,
            capture_failure_context: false,
        }
    }
}

impl RunnerOptions {
    pub fn validate(&self) -> Result<()> {
        if self.sequential && self.parallel {
            return Err(Error::Validation("sequential and parallel execution are mutually exclusive".into()));
        }
        if self.parallel && self.worker_count == 0 {
            return Err(Error::Validation("worker_count must be positive".into()));
        }
        Ok(())
    }

    pub fn sequential() -> Self {
        RunnerOptions { sequential: true, ..Default::default() }
    }

    pub fn parallel(workers: usize) -> Self {
        RunnerOptions { parallel: true, worker_count: workers, ..Default::default() }
    }

    /// Number of workers bodies actually run on.
    pub fn effective_workers(&self) -> usize {
        if self.parallel {
            self.worker_count.max(1)
        } else {
            1
        }
    }
}

/// Per-run overrides; absent fields keep the base value.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptionsPatch {
    pub preserve_hierarchy: Option<bool>,
    pub sequential: Option<bool>,
    pub parallel: Option<bool>,
    pub worker_count: Option<usize>,
    pub fail_fast: Option<bool>,
    pub failing_first: Option<bool>,
    pub debug_on_failure: Option<bool>,
    pub rerun_failed: Option<bool>,
    #[serde(alias = "filter")]
    pub filter_query: Option<String>,
    pub seed: Option<u64>,
    pub capture_failure_context: Option<bool>,
}

impl OptionsPatch {
    pub fn apply(&self, base: &RunnerOptions) -> RunnerOptions {
        let mut o = base.clone();
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field { o.$field = v.clone(); })*
            };
        }
        set!(
            preserve_hierarchy,
            sequential,
            parallel,
            worker_count,
            fail_fast,
            failing_first,
            debug_on_failure,
            rerun_failed,
            capture_failure_context
        );
        if let Some(q) = &self.filter_query {
            o.filter_query = (!q.trim().is_empty()).then(|| q.clone());
        }
        if self.seed.is_some() {
            o.seed = self.seed;
        }
        // Turning one execution mode on switches the other off.
        if self.parallel == Some(true) && self.sequential.is_none() {
            o.sequential = false;
        }
        if self.sequential == Some(true) && self.parallel.is_none() {
            o.parallel = false;
        }
        o
    }
}
