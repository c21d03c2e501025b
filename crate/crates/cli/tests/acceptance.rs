//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if
//! any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use flowtest::discovery::{get_all_test_modules, get_test_module, ModulePath, SuiteRegistry};
use flowtest::model::{make_assertion, EventPayload, OutcomeKind, RunEvent, StateCell, SuiteEvent, Value};
use flowtest::reporting::{self, emit_junit, emit_tap, use_all, use_first, EventLog, OutputPort, Reporter};
use flowtest::runner::frame_depth;
use flowtest::scheduling::{build_plan, filter_match, filter_record};
use flowtest::script::load_project;
use flowtest::{
    dsl, metadata, with_runner, Error, ExecControl, HistoryStore, Metadata, RunRecord, RunSummary, Runner,
    RunnerOptions, SuiteNode,
};
use flowtest_daemon::client::Client;
use flowtest_daemon::{Daemon, DaemonConfig};
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::{Config, TestRunner};
use serde_json::{json, Value as Json};

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "sample suite summary and glyph output", sample_reproduction),
        (2, "nesting invariants over generated hierarchies", nesting_invariants),
        (3, "deferred loading runs no test bodies", deferred_loading),
        (4, "scheduling laws", scheduling_laws),
        (5, "parallel speed-up with identical summary", parallel_speedup),
        (6, "sub-second rerun loop", rerun_latency),
        (7, "reporter algebra and report formats", reporter_algebra),
        (8, "discovery convention and filesystem walk", discovery),
        (9, "history round-trip across a daemon restart", history_round_trip),
        (10, "order independence of the summary", order_independence),
    ];
    let mut failed = 0;
    for (n, name, check) in criteria {
        let started = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|p| Err(panic_text(&p)));
        let elapsed = started.elapsed();
        match result {
            Ok(detail) => println!("criterion {n:>2}: PASS  {name} ({detail}; {elapsed:.2?})"),
            Err(reason) => {
                failed += 1;
                println!("criterion {n:>2}: FAIL  {name} ({reason}; {elapsed:.2?})");
            }
        }
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn panic_text(p: &Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<String>()
        .cloned()
        .or_else(|| p.downcast_ref::<&str>().map(|s| (*s).to_owned()))
        .unwrap_or_else(|| "panicked".into())
}

fn ensure(cond: bool, what: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what.into())
    }
}

/// Run a property over `cases` generated inputs.
fn property<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    TestRunner::new(config).run(&strategy, test).map_err(|e| e.to_string())
}

fn silent(options: RunnerOptions) -> Runner {
    Runner::new(reporting::silent(), options).unwrap()
}

fn summary_of(response: flowtest::Response) -> RunSummary {
    response.into_summary().expect("a summary")
}

// 1 ---------------------------------------------------------------------

const SAMPLE_OUTPUT: &str = "┌> sample-tests
| + test Test 1
|┌> Nested test suite
|| + test Test 2
|└> Nested test suite
└> sample-tests

┌Test Test 1
#t
✓
└Test Test 1

┌Test Test 2
(= 5 (+ 2 2))
✗ 5 and 4 are not =
'hello
✓
└Test Test 2
((errors . 0)
 (failures . 1)
 (assertions . 3)
 (tests . 2))
";

fn trim_lines(s: &str) -> String {
    s.lines().map(str::trim_end).collect::<Vec<_>>().join("\n")
}

fn sample_reproduction() -> Outcome {
    let dir = common::project("sample-project");
    let started = Instant::now();
    let runner = Runner::new(reporting::base(), RunnerOptions::sequential()).unwrap();
    let (port, captured) = OutputPort::capture();
    let summary = reporting::with_output_port(port, || {
        load_project(dir.path(), &runner, &SuiteRegistry::new())?;
        runner.execute_loaded(ExecControl::default())
    })
    .map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    ensure(summary == RunSummary { errors: 0, failures: 1, assertions: 3, tests: 2 }, format!("summary {summary:?}"))?;
    let out = captured.contents();
    ensure(trim_lines(&out) == trim_lines(SAMPLE_OUTPUT), format!("output differs:\n{out}"))?;
    ensure(elapsed < Duration::from_secs(1), format!("took {elapsed:?}"))?;
    Ok(format!("{{0, 1, 3, 2}} and glyph output match in {elapsed:.2?}"))
}

// 2, 3 ------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
enum Violation {
    None,
    TestInTest,
    SuiteInTest,
}

#[derive(Debug, Clone)]
enum Tree {
    Test(Violation),
    Suite(Vec<Tree>),
}

fn tree(depth: u32) -> impl Strategy<Value = Tree> {
    let leaf = prop_oneof![
        4 => Just(Tree::Test(Violation::None)),
        1 => Just(Tree::Test(Violation::TestInTest)),
        1 => Just(Tree::Test(Violation::SuiteInTest)),
    ];
    leaf.prop_recursive(depth, 40, 4, |inner| prop::collection::vec(inner, 0..4).prop_map(Tree::Suite))
}

#[derive(Default)]
struct Probes {
    bodies: AtomicUsize,
    nested_errors: Mutex<Vec<String>>,
}

fn define(
    children: &[Tree],
    prefix: &str,
    probes: &Arc<Probes>,
    stray_assertion_at: Option<&str>,
) -> flowtest::Result<()> {
    if stray_assertion_at == Some(prefix) {
        dsl::check("#t", || Ok(Value::Bool(true)))?;
    }
    for (i, child) in children.iter().enumerate() {
        let name = format!("{prefix}{i}");
        match child {
            Tree::Test(violation) => {
                let (probes, violation) = (probes.clone(), *violation);
                dsl::test(&format!("t{name}"), metadata!(), move || {
                    probes.bodies.fetch_add(1, Ordering::SeqCst);
                    let nested = match violation {
                        Violation::None => return Ok(()),
                        Violation::TestInTest => dsl::test("inner", metadata!(), || Ok(())),
                        Violation::SuiteInTest => dsl::test_suite("inner", metadata!(), || Ok(())).map(|_| ()),
                    };
                    match nested {
                        Err(e) => probes.nested_errors.lock().unwrap().push(e.to_string()),
                        Ok(()) => probes.nested_errors.lock().unwrap().push("accepted".into()),
                    }
                    Ok(())
                })?;
            }
            Tree::Suite(kids) => {
                let (kids, probes) = (kids.clone(), probes.clone());
                let prefix = format!("{name}.");
                let stray = stray_assertion_at.map(str::to_owned);
                dsl::test_suite(&format!("s{name}"), metadata!(), move || {
                    define(&kids, &prefix, &probes, stray.as_deref())
                })?;
            }
        }
    }
    Ok(())
}

fn root_suite(children: Vec<Tree>, probes: Arc<Probes>, stray: Option<String>) -> SuiteNode {
    dsl::test_suite_thunk("root", metadata!(), move || define(&children, "", &probes, stray.as_deref())).unwrap()
}

fn leaves(children: &[Tree]) -> Vec<Violation> {
    children
        .iter()
        .flat_map(|c| match c {
            Tree::Test(v) => vec![*v],
            Tree::Suite(kids) => leaves(kids),
        })
        .collect()
}

/// Prefixes of every suite in the tree, including the root's "".
fn suite_prefixes(children: &[Tree], prefix: &str, out: &mut Vec<String>) {
    out.push(prefix.to_owned());
    for (i, c) in children.iter().enumerate() {
        if let Tree::Suite(kids) = c {
            suite_prefixes(kids, &format!("{prefix}{i}."), out);
        }
    }
}

fn nesting_invariants() -> Outcome {
    let started = Instant::now();
    let strategy = (prop::collection::vec(tree(4), 0..5), any::<prop::sample::Index>(), prop::bool::weighted(0.3));
    property(1000, strategy, |(children, pick, stray)| {
        let probes = Arc::new(Probes::default());
        let log = EventLog::new();
        let runner = Runner::new(log.reporter(), RunnerOptions::sequential()).unwrap();
        let mut prefixes = Vec::new();
        suite_prefixes(&children, "", &mut prefixes);
        let stray_at = stray.then(|| pick.get(&prefixes).clone());
        let result = with_runner(&runner, || root_suite(children.clone(), probes.clone(), stray_at.clone()).call());
        prop_assert_eq!(frame_depth(), 0);
        if stray_at.is_some() {
            prop_assert!(matches!(result, Err(Error::InvalidStructure(_))), "{:?}", result);
            prop_assert_eq!(probes.bodies.load(Ordering::SeqCst), 0);
            return Ok(());
        }
        let summary = summary_of(result.map_err(|e| TestCaseError::fail(e.to_string()))?);
        let kinds = leaves(&children);
        let violations = kinds.iter().filter(|v| **v != Violation::None).count();
        let errors = probes.nested_errors.lock().unwrap().clone();
        prop_assert_eq!(errors.len(), violations);
        prop_assert!(errors.iter().all(|e| e.starts_with("invalid-nesting")), "{:?}", errors);
        let events = log.events();
        let nesting_events = events.iter().filter(|e| matches!(e.payload, EventPayload::NestingError(_))).count();
        prop_assert_eq!(nesting_events, violations);
        prop_assert_eq!(summary.tests as usize, kinds.len());
        prop_assert_eq!(summary.errors as usize, violations);
        Ok(())
    })?;
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(10), format!("took {elapsed:?}"))?;
    Ok("1000 cases".into())
}

fn deferred_loading() -> Outcome {
    property(500, prop::collection::vec(tree(4), 0..5), |children| {
        let probes = Arc::new(Probes::default());
        let runner = silent(RunnerOptions::sequential());
        let node = with_runner(&runner, || root_suite(children.clone(), probes.clone(), None).load())
            .map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert!(node.depth() <= 5, "depth {}", node.depth());
        prop_assert_eq!(probes.bodies.load(Ordering::SeqCst), 0);
        prop_assert_eq!(node.tests().len(), leaves(&children).len());
        runner.execute_loaded(ExecControl::default()).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(probes.bodies.load(Ordering::SeqCst), leaves(&children).len());
        Ok(())
    })?;
    Ok("500 cases, depth <= 5".into())
}

// 4 ---------------------------------------------------------------------

const KINDS: [OutcomeKind; 6] = [
    OutcomeKind::Pass,
    OutcomeKind::Fail,
    OutcomeKind::Error,
    OutcomeKind::Skip,
    OutcomeKind::Xfail,
    OutcomeKind::Xpass,
];
const DURATIONS: [(f64, &str); 4] = [(0.05, "instantaneous"), (0.5, "flow"), (5.0, "attention"), (20.0, "lost")];

/// Per test: whether its body fails, and its recorded history if any.
type Fixture = Vec<(bool, Option<(usize, usize)>)>;

fn fixture() -> impl Strategy<Value = Fixture> {
    prop::collection::vec((any::<bool>(), prop::option::of((0..KINDS.len(), 0..DURATIONS.len()))), 1..16)
}

fn fixture_id(i: usize) -> String {
    format!("flat/case {i}")
}

fn load_fixture(runner: &Runner, fx: &Fixture) {
    let fails: Vec<bool> = fx.iter().map(|t| t.0).collect();
    let suite = dsl::test_suite_thunk("flat", metadata!(), move || {
        fails.iter().enumerate().try_for_each(|(i, fail)| {
            let fail = *fail;
            dsl::test(&format!("case {i}"), metadata!(), move || {
                dsl::check("(probe)", move || Ok(Value::Bool(!fail))).map(|_| ())
            })
        })
    })
    .unwrap();
    with_runner(runner, || suite.load()).unwrap();
}

fn fixture_history(fx: &Fixture) -> HistoryStore {
    let mut store = HistoryStore::in_memory();
    let records = fx.iter().enumerate().filter_map(|(i, t)| {
        t.1.map(|(k, d)| RunRecord {
            test_id: fixture_id(i),
            outcome: KINDS[k],
            duration: DURATIONS[d].0,
            run_id: "run-0".into(),
            finished_at: chrono::Utc::now(),
        })
    });
    store.record_run(records).unwrap();
    store
}

fn index_of(id: &str) -> usize {
    id.rsplit(' ').next().unwrap().parse().unwrap()
}

fn attention(fx: &Fixture, i: usize) -> bool {
    matches!(fx[i].1, Some((1 | 2, _)))
}

fn oracle_record(fx: &Fixture, i: usize) -> String {
    match fx[i].1 {
        Some((k, d)) => format!("{} {} {}", fixture_id(i), KINDS[k].as_str(), DURATIONS[d].1),
        None => format!("{} new", fixture_id(i)),
    }
}

fn query() -> impl Strategy<Value = String> {
    let token = prop_oneof![
        Just("case".to_owned()),
        Just("new".to_owned()),
        Just("FAIL".to_owned()),
        Just("pass".to_owned()),
        Just("lost".to_owned()),
        Just("flow".to_owned()),
        (0..16usize).prop_map(|i| i.to_string()),
        "[a-z]{1,2}",
    ];
    prop::collection::vec(token, 0..3).prop_map(|t| t.join(" "))
}

fn scheduling_laws() -> Outcome {
    let forest = |fx: &Fixture| {
        let runner = silent(RunnerOptions::sequential());
        load_fixture(&runner, fx);
        runner.loaded_hierarchy()
    };

    // Fail-fast: sequential runs stop right after the first failing entry;
    // parallel runs dispatch at most one extra test per other worker.
    property(500, (fixture(), 1usize..5, any::<u64>()), |(fx, workers, seed)| {
        let base = if workers == 1 { RunnerOptions::sequential() } else { RunnerOptions::parallel(workers) };
        let log = EventLog::new();
        let runner = Runner::new(log.reporter(), RunnerOptions { fail_fast: true, seed: Some(seed), ..base }).unwrap();
        load_fixture(&runner, &fx);
        runner.execute_loaded(ExecControl::default()).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let events = log.events();
        let planned = events
            .iter()
            .find_map(|e| match &e.payload {
                EventPayload::RunStarted(s) => Some(s.tests.clone()),
                _ => None,
            })
            .unwrap();
        let executed = events.iter().filter(|e| matches!(e.payload, EventPayload::TestLeave(_))).count();
        match planned.iter().position(|id| fx[index_of(id)].0) {
            Some(first) if workers == 1 => prop_assert_eq!(executed, first + 1),
            Some(first) => prop_assert!(executed <= first + workers, "executed {} first {}", executed, first),
            None => prop_assert_eq!(executed, planned.len()),
        }
        Ok(())
    })?;

    // Failing-first: a stable partition of the unordered plan.
    property(500, (fixture(), any::<u64>(), any::<bool>()), |(fx, seed, sequential)| {
        let f = forest(&fx);
        let history = fixture_history(&fx);
        let base = RunnerOptions { seed: Some(seed), sequential, ..Default::default() };
        let unordered = build_plan(&f, &history, &base).ids();
        let ordered = build_plan(&f, &history, &RunnerOptions { failing_first: true, ..base }).ids();
        let rank = |id: &String| {
            let i = index_of(id);
            if attention(&fx, i) {
                0
            } else if fx[i].1.is_none() {
                1
            } else {
                2
            }
        };
        let expected: Vec<String> =
            (0..3).flat_map(|r| unordered.iter().filter(move |id| rank(id) == r).cloned()).collect();
        prop_assert_eq!(ordered, expected);
        Ok(())
    })?;

    // Rerun-failed: exactly the fail/error tests, or everything when none.
    property(500, fixture(), |fx| {
        let f = forest(&fx);
        let history = fixture_history(&fx);
        let plan: BTreeSet<String> =
            build_plan(&f, &history, &RunnerOptions { rerun_failed: true, ..RunnerOptions::sequential() })
                .ids()
                .into_iter()
                .collect();
        let failing: BTreeSet<String> = (0..fx.len()).filter(|i| attention(&fx, *i)).map(fixture_id).collect();
        let expected = if failing.is_empty() { (0..fx.len()).map(fixture_id).collect() } else { failing };
        prop_assert_eq!(plan, expected);
        Ok(())
    })?;

    // Filter: equals the oracle, and adding tokens never widens it.
    property(500, (fixture(), query(), query()), |(fx, a, b)| {
        let f = forest(&fx);
        let history = fixture_history(&fx);
        let select = |q: &str| -> BTreeSet<String> {
            build_plan(&f, &history, &RunnerOptions { filter_query: Some(q.to_owned()), ..RunnerOptions::sequential() })
                .ids()
                .into_iter()
                .collect()
        };
        let tokens: Vec<String> = a.split_whitespace().map(str::to_lowercase).collect();
        let oracle: BTreeSet<String> = (0..fx.len())
            .filter(|i| {
                let record = oracle_record(&fx, *i).to_lowercase();
                tokens.iter().all(|t| record.contains(t.as_str()))
            })
            .map(fixture_id)
            .collect();
        let wide = select(&a);
        prop_assert_eq!(&wide, &oracle);
        let narrow = select(&format!("{a} {b}"));
        prop_assert!(narrow.is_subset(&wide));
        for test in flowtest::model::forest_tests(&f) {
            let record = filter_record(test, &history);
            prop_assert_eq!(filter_match(&a, &record), wide.contains(&test.id));
        }
        Ok(())
    })?;
    Ok("4 laws x 500 cases".into())
}

// 5, 10 -----------------------------------------------------------------

fn sleepy_suite(count: usize, millis: u64) -> SuiteNode {
    dsl::test_suite_thunk("sleepy", metadata!(), move || {
        (0..count).try_for_each(|i| {
            dsl::test(&format!("nap {i}"), metadata!(), move || {
                std::thread::sleep(Duration::from_millis(millis));
                dsl::check("#t", || Ok(Value::Bool(true))).map(|_| ())
            })
        })
    })
    .unwrap()
}

fn timed_run(options: RunnerOptions) -> (Duration, RunSummary) {
    let runner = silent(RunnerOptions::sequential());
    with_runner(&runner, || sleepy_suite(12, 100).load()).unwrap();
    let patch = flowtest::OptionsPatch {
        sequential: Some(options.sequential),
        parallel: Some(options.parallel),
        worker_count: Some(options.worker_count),
        ..Default::default()
    };
    let started = Instant::now();
    let summary = runner.execute_loaded(ExecControl { patch, ..Default::default() }).unwrap();
    (started.elapsed(), summary)
}

fn parallel_speedup() -> Outcome {
    let mut last = String::new();
    for attempt in 1..=3 {
        let (seq, seq_summary) = timed_run(RunnerOptions::sequential());
        let (par, par_summary) = timed_run(RunnerOptions::parallel(4));
        let ok = seq >= Duration::from_millis(1200) && par <= Duration::from_millis(600) && seq_summary == par_summary;
        last = format!("sequential {seq:.2?}, 4 workers {par:.2?}, attempt {attempt}");
        if ok {
            return Ok(last);
        }
    }
    Err(last)
}

fn order_independence() -> Outcome {
    let strategy = prop::collection::vec((0i64..20, 0i64..20, any::<bool>()), 50);
    let mut runner = TestRunner::new(Config { cases: 1, failure_persistence: None, ..Config::default() });
    let cases = strategy.new_tree(&mut runner).map_err(|e| e.to_string())?.current();
    let suite = {
        let cases = cases.clone();
        dsl::test_suite_thunk("generated", metadata!(), move || {
            cases.iter().enumerate().try_for_each(|(i, (a, b, honest))| {
                let (a, b, honest) = (*a, *b, *honest);
                dsl::test(&format!("sum {i}"), metadata!(), move || {
                    let claimed = if honest { a + b } else { a + b + 1 };
                    flowtest::is!(=; claimed, a + b).map(|_| ())
                })
            })
        })
        .unwrap()
    };
    let run = |options: RunnerOptions| {
        let runner = silent(options);
        with_runner(&runner, || suite.load()).unwrap();
        runner.execute_loaded(ExecControl::default()).unwrap()
    };
    let reference = run(RunnerOptions::sequential());
    let expected_failures = cases.iter().filter(|c| !c.2).count() as u64;
    ensure(
        reference == RunSummary { errors: 0, failures: expected_failures, assertions: 50, tests: 50 },
        format!("sequential summary {reference:?}"),
    )?;
    for seed in 0..10u64 {
        let shuffled = run(RunnerOptions { seed: Some(seed * 7919 + 1), ..Default::default() });
        ensure(shuffled == reference, format!("seed {seed}: {shuffled:?}"))?;
    }
    let parallel = run(RunnerOptions { seed: Some(99), ..RunnerOptions::parallel(4) });
    ensure(parallel == reference, format!("parallel: {parallel:?}"))?;
    Ok(format!("50 tests, {expected_failures} failing, 12 schedules agree"))
}

// 6, 9 ------------------------------------------------------------------

fn start_daemon(root: &Path) -> (flowtest_daemon::DaemonHandle, Client) {
    let config = DaemonConfig { root: Some(root.to_path_buf()), ..Default::default() };
    let daemon = Daemon::bind("127.0.0.1:0", config).unwrap().spawn();
    let client = Client::connect(daemon.local_addr()).unwrap();
    client.set_timeout(Some(Duration::from_secs(30))).unwrap();
    (daemon, client)
}

fn run_via(client: &mut Client, op: &str, params: Json) -> Result<Vec<Json>, String> {
    let response = client.request(op, params).map_err(|e| e.to_string())?;
    let run_id = response["run_id"].as_str().ok_or(format!("no run id in {response}"))?.to_owned();
    client.run_frames(&run_id).map_err(|e| e.to_string())
}

fn entered(frames: &[Json]) -> BTreeSet<String> {
    frames.iter().filter(|f| f["type"] == "test-enter").map(|f| f["id"].as_str().unwrap().to_owned()).collect()
}

fn rerun_latency() -> Outcome {
    let dir = common::project("sample-project");
    let (daemon, mut client) = start_daemon(dir.path());
    run_via(&mut client, "run", json!({}))?;
    let mut trials = Vec::with_capacity(20);
    for _ in 0..20 {
        let started = Instant::now();
        let frames = run_via(&mut client, "rerun-failed", json!({}))?;
        trials.push(started.elapsed());
        ensure(
            entered(&frames) == BTreeSet::from(["sample-tests/Nested test suite/Test 2".to_owned()]),
            format!("rerun executed {:?}", entered(&frames)),
        )?;
    }
    daemon.shutdown();
    trials.sort();
    let median = trials[trials.len() / 2];
    ensure(median < Duration::from_millis(100), format!("median rerun {median:?}"))?;

    let cold_dir = common::project("sample-project");
    let started = Instant::now();
    let out = common::flowtest(&["run", "--filter", "Test 2", "--reporter", "dots"], cold_dir.path());
    let cold = started.elapsed();
    ensure(out.status.code() == Some(1), format!("cli exit {:?}", out.status.code()))?;
    ensure(cold < Duration::from_secs(1), format!("cold cli run {cold:?}"))?;
    Ok(format!("median rerun {median:.2?}, cold cli run {cold:.2?}"))
}

const MIXED: &str = r#"
(define-test-suite mixed
  (test "a pass" (is (= 1 1)))
  (test "b fail" (is (= 1 2)))
  (test "c error" (is (error "boom")))
  (test "d pass" (is #t)))
"#;

fn history_round_trip() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let module = dir.path().join("test/mixed/mixed-test.scm");
    std::fs::create_dir_all(module.parent().unwrap()).map_err(|e| e.to_string())?;
    std::fs::write(&module, MIXED).map_err(|e| e.to_string())?;
    let failing: BTreeSet<String> = ["mixed/b fail", "mixed/c error"].map(str::to_owned).into();
    {
        let (daemon, mut client) = start_daemon(dir.path());
        let frames = run_via(&mut client, "run", json!({}))?;
        ensure(entered(&frames).len() == 4, "first run did not execute all tests")?;
        let bye = client.request("shutdown", json!({})).map_err(|e| e.to_string())?;
        ensure(bye["ok"] == true, "shutdown refused")?;
        daemon.join();
    }
    let stored = HistoryStore::load(flowtest::history::default_history_path(dir.path()));
    let stored_failing: BTreeSet<String> =
        stored.latest().values().filter(|r| r.outcome.demands_attention()).map(|r| r.test_id.clone()).collect();
    ensure(stored_failing == failing, format!("persisted failing set {stored_failing:?}"))?;
    let (daemon, mut client) = start_daemon(dir.path());
    let frames = run_via(&mut client, "rerun-failed", json!({}))?;
    daemon.shutdown();
    let rerun = entered(&frames);
    ensure(rerun == failing, format!("rerun executed {rerun:?}"))?;
    Ok(format!("reran {}", rerun.into_iter().collect::<Vec<_>>().join(", ")))
}

// 7 ---------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
enum Step {
    Pass,
    Fail,
    Error,
}

/// Steps, skip and expected-to-fail flags of one generated test.
type Shape = (Vec<Step>, bool, bool);

fn shape() -> impl Strategy<Value = Shape> {
    (
        prop::collection::vec(prop_oneof![3 => Just(Step::Pass), 2 => Just(Step::Fail), 1 => Just(Step::Error)], 0..4),
        prop::bool::weighted(0.15),
        prop::bool::weighted(0.2),
    )
}

fn shape_oracle(shapes: &[Shape]) -> RunSummary {
    let mut s = RunSummary { tests: shapes.len() as u64, ..Default::default() };
    for (steps, skip, xfail) in shapes {
        if *skip {
            continue;
        }
        let fails = steps.iter().filter(|x| **x == Step::Fail).count() as u64;
        let errors = steps.iter().filter(|x| **x == Step::Error).count() as u64;
        s.assertions += steps.len() as u64;
        s.errors += errors;
        match (xfail, fails + errors) {
            (true, 0) => {
                s.assertions += 1;
                s.failures += 1;
            }
            (true, _) => {}
            (false, _) => s.failures += fails,
        }
    }
    s
}

fn shape_suite(shapes: Vec<Shape>) -> SuiteNode {
    dsl::test_suite_thunk("generated", metadata!(), move || {
        shapes.iter().enumerate().try_for_each(|(i, (steps, skip, xfail))| {
            let mut meta = Metadata::new();
            if *skip {
                meta.insert("skip?".into(), true.into());
            }
            if *xfail {
                meta.insert("expected-to-fail?".into(), true.into());
            }
            let steps = steps.clone();
            dsl::test(&format!("t{i} <&>"), meta, move || {
                for step in steps.iter().copied() {
                    dsl::is(make_assertion(
                        format!("{step:?}"),
                        move || match step {
                            Step::Pass => Ok(Value::Bool(true)),
                            Step::Fail => Ok(Value::Bool(false)),
                            Step::Error => Err(flowtest::Raised::new("boom")),
                        },
                        || Ok(vec![]),
                        None,
                    )?)?;
                }
                Ok(())
            })
        })
    })
    .unwrap()
}

/// TAP-14 producer grammar; returns the number of test points.
fn tap_points(tap: &str) -> Result<usize, String> {
    let mut lines = tap.lines().peekable();
    ensure(lines.next() == Some("TAP version 14"), "missing version line")?;
    let plan = lines.next().ok_or("missing plan")?;
    let planned: usize = plan.strip_prefix("1..").and_then(|n| n.parse().ok()).ok_or(format!("bad plan {plan:?}"))?;
    let mut seen = 0;
    while let Some(line) = lines.next() {
        if line.starts_with('#') {
            continue;
        }
        let rest = line
            .strip_prefix("ok ")
            .or_else(|| line.strip_prefix("not ok "))
            .ok_or(format!("unexpected line {line:?}"))?;
        let digits: String = rest.chars().take_while(char::is_ascii_digit).collect();
        ensure(digits.parse::<usize>() == Ok(seen + 1), format!("out of sequence {line:?}"))?;
        seen += 1;
        let tail = &rest[digits.len()..];
        ensure(tail.is_empty() || tail.starts_with(" - ") || tail.starts_with(" # "), format!("bad point {line:?}"))?;
        if lines.peek() == Some(&"  ---") {
            lines.next();
            loop {
                match lines.next() {
                    Some("  ...") => break,
                    Some(l) if l.starts_with("  ") => {}
                    other => return Err(format!("unterminated YAML block at {other:?}")),
                }
            }
        }
    }
    ensure(seen == planned, format!("plan {planned}, saw {seen}"))?;
    Ok(seen)
}

fn counting(counter: &Arc<AtomicUsize>, handles: bool) -> Reporter {
    let counter = counter.clone();
    Reporter::new("counting", move |_| {
        counter.fetch_add(1, Ordering::SeqCst);
        handles
    })
}

fn replay(events: &[RunEvent], reporter: &Reporter) -> (Vec<bool>, String) {
    let cell = StateCell::new();
    let (port, captured) = OutputPort::capture();
    let flags = reporting::with_output_port(port, || {
        events.iter().map(|e| reporter.handle(&RunEvent { state_cell: cell.clone(), ..e.clone() })).collect()
    });
    (flags, captured.contents())
}

fn reporter_algebra() -> Outcome {
    let probe = RunEvent {
        run_id: "run-probe".into(),
        sequence: 0,
        payload: EventPayload::SuiteEnter(SuiteEvent {
            description: "s".into(),
            suite_path: vec!["s".into()],
            metadata: Metadata::new(),
        }),
        state_cell: StateCell::new(),
    };
    let (a, b) = (Arc::new(AtomicUsize::new(0)), Arc::new(AtomicUsize::new(0)));
    let first = use_first(vec![counting(&a, true), counting(&b, true)]).unwrap();
    ensure(first.handle(&probe), "use_first lost the handled flag")?;
    ensure((a.load(Ordering::SeqCst), b.load(Ordering::SeqCst)) == (1, 0), "use_first did not short-circuit")?;
    let all = use_all(vec![counting(&a, false), counting(&b, true)]).unwrap();
    ensure(all.handle(&probe), "use_all lost the handled flag")?;
    ensure((a.load(Ordering::SeqCst), b.load(Ordering::SeqCst)) == (2, 1), "use_all skipped a reporter")?;
    ensure(!use_all(vec![counting(&a, false)]).unwrap().handle(&probe), "use_all invented a handled flag")?;

    property(300, prop::collection::vec(shape(), 0..8), |shapes| {
        let log = EventLog::new();
        let runner = Runner::new(log.reporter(), RunnerOptions::sequential()).unwrap();
        let summary = with_runner(&runner, || shape_suite(shapes.clone()).call())
            .map(summary_of)
            .map_err(|e| TestCaseError::fail(e.to_string()))?;
        let expected = shape_oracle(&shapes);
        prop_assert_eq!(summary, expected);
        let events = log.events();

        let compound = use_first(vec![
            use_all(vec![reporting::verbose(), reporting::hierarchy()]).unwrap(),
            reporting::unhandled(),
        ])
        .unwrap();
        let base = replay(&events, &reporting::base());
        prop_assert_eq!(&base, &replay(&events, &compound));
        let trailer = format!("{expected}\n");
        prop_assert!(base.1.ends_with(&trailer));

        let tap = emit_tap(&events).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let points = tap_points(&tap).map_err(|e| TestCaseError::fail(format!("{e}\n{tap}")))?;
        prop_assert_eq!(points as u64, expected.tests);

        let xml = emit_junit(&events).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let doc = roxmltree::Document::parse(&xml).map_err(|e| TestCaseError::fail(format!("{e}\n{xml}")))?;
        let root = doc.root_element();
        let attr = |n: &str| root.attribute(n).and_then(|v| v.parse::<u64>().ok());
        prop_assert_eq!(
            (attr("tests"), attr("failures"), attr("errors")),
            (Some(expected.tests), Some(expected.failures), Some(expected.errors))
        );
        let count = |tag: &str| doc.descendants().filter(|n| n.has_tag_name(tag)).count() as u64;
        prop_assert_eq!(
            (count("testcase"), count("failure"), count("error")),
            (expected.tests, expected.failures, expected.errors)
        );
        Ok(())
    })?;
    Ok("combinators instrumented, 300 randomized runs through TAP and JUnit".into())
}

// 8 ---------------------------------------------------------------------

fn walk(dir: &Path, segments: &mut Vec<String>, out: &mut BTreeSet<String>) {
    let Ok(entries) = std::fs::read_dir(dir) else { return };
    for entry in entries.flatten() {
        let name = entry.file_name().to_string_lossy().into_owned();
        if entry.path().is_dir() {
            segments.push(name);
            walk(&entry.path(), segments, out);
            segments.pop();
        } else if let Some(stem) = name.strip_suffix("-test.scm") {
            if !stem.is_empty() {
                let mut all = segments.clone();
                all.push(format!("{stem}-test"));
                out.insert(format!("({})", all.join(" ")));
            }
        }
    }
}

fn discovery() -> Outcome {
    let dir = common::project("my-project");
    let root = dir.path();
    let found: BTreeSet<String> =
        get_all_test_modules(root).map_err(|e| e.to_string())?.iter().map(ToString::to_string).collect();
    let mut oracle = BTreeSet::new();
    walk(&root.join("test"), &mut Vec::new(), &mut oracle);
    ensure(found == oracle, format!("discovered {found:?}, walk found {oracle:?}"))?;
    ensure(found == BTreeSet::from(["(my-project tool-test)".to_owned()]), format!("discovered {found:?}"))?;

    let source: ModulePath = "(my-project tool)".parse().map_err(|e: Error| e.to_string())?;
    let registry = SuiteRegistry::new();
    let on_disk = get_test_module(&source, &registry, Some(root)).map(|m| m.to_string());
    ensure(on_disk.as_deref() == Some("(my-project tool-test)"), format!("on-disk lookup gave {on_disk:?}"))?;
    let runner = silent(RunnerOptions::sequential());
    load_project(root, &runner, &registry).map_err(|e| e.to_string())?;
    let registered = get_test_module(&source, &registry, None).map(|m| m.to_string());
    ensure(registered.as_deref() == Some("(my-project tool-test)"), format!("registry lookup gave {registered:?}"))?;
    let suites = registry.get_module_test_suites(&source.test_counterpart().unwrap()).map_err(|e| e.to_string())?;
    ensure(suites.len() == 1 && suites[0].description == "tool-tests", "wrong suites for the module")?;
    let missing = "(my-project helpers)".parse::<ModulePath>().unwrap();
    ensure(get_test_module(&missing, &registry, Some(root)).is_none(), "helpers resolved to a test module")?;
    Ok("(my-project tool) -> (my-project tool-test)".into())
}
