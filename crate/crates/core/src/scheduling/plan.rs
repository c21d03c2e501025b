use std::time::{SystemTime, UNIX_EPOCH};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::history::HistoryStore;
use crate::model::{forest_tests, HierarchyNode, TestCase, LATENCY_BUDGET};
use crate::runner::RunnerOptions;

#[derive(Debug, Clone, PartialEq)]
pub struct PlanEntry {
    pub test_id: String,
    pub test: TestCase,
    pub suite_path: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunPlan {
    pub entries: Vec<PlanEntry>,
    pub options: RunnerOptions,
    pub seed_used: u64,
}

impl RunPlan {
    pub fn ids(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.test_id.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// The stringified form of a test the orderless filter runs against: id
/// (which contains the suite path and description), module, last outcome
/// and the latency band of the last duration.
pub fn filter_record(test: &TestCase, history: &HistoryStore) -> String {
    let module = test.module.as_deref().unwrap_or("");
    match history.get(&test.id) {
        Some(record) => {
            format!("{} {} {} {}", test.id, module, record.outcome, LATENCY_BUDGET.band_secs(record.duration).as_str())
        }
        None => format!("{} {} new", test.id, module),
    }
}

/// True iff every whitespace-separated token of `query` occurs in
/// `record`, ignoring case and order.
pub fn filter_match(query: &str, record: &str) -> bool {
    let record = record.to_lowercase();
    query.split_whitespace().all(|token| record.contains(&token.to_lowercase()))
}

pub fn time_seed() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_nanos() as u64).unwrap_or(0)
}

pub fn seeded_shuffle<T>(items: &mut [T], seed: u64) {
    items.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
}

/// 0 for tests whose last outcome demands attention, 1 for tests never
/// seen, 2 for the rest.
pub fn failing_first_rank(test_id: &str, history: &HistoryStore) -> u8 {
    match history.last_outcome(test_id) {
        Some(kind) if kind.demands_attention() => 0,
        None => 1,
        Some(_) => 2,
    }
}

pub fn build_plan(forest: &[HierarchyNode], history: &HistoryStore, options: &RunnerOptions) -> RunPlan {
    let seed_used = options.seed.unwrap_or_else(time_seed);
    let query = options.filter_query.as_deref().unwrap_or("");
    let mut entries: Vec<PlanEntry> = forest_tests(forest)
        .into_iter()
        .filter(|t| filter_match(query, &filter_record(t, history)))
        .map(|t| PlanEntry { test_id: t.id.clone(), test: t.clone(), suite_path: t.suite_path.clone() })
        .collect();

    if options.rerun_failed {
        let failing: Vec<PlanEntry> = entries
            .iter()
            .filter(|e| history.last_outcome(&e.test_id).is_some_and(|k| k.demands_attention()))
            .cloned()
            .collect();
        if !failing.is_empty() {
            entries = failing;
        }
    }

    // Registration order is depth-first, which keeps every suite
    // contiguous; reordering across suites would break that.
    if options.preserve_hierarchy {
        return RunPlan { entries, options: options.clone(), seed_used };
    }
    if !options.sequential {
        seeded_shuffle(&mut entries, seed_used);
    }
    if options.failing_first {
        entries.sort_by_key(|e| failing_first_rank(&e.test_id, history));
    }
    RunPlan { entries, options: options.clone(), seed_used }
}
