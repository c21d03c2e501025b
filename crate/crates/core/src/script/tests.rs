use super::*;
use crate::model::{OutcomeKind, RunSummary};
use crate::reporting::{self, OutputPort};
use crate::runner::RunnerOptions;

const SAMPLE: &str = r#"
(define-test-suite sample-tests
  (test "Test 1"
    (is #t))
  (test-suite "Nested test suite"
    (test "Test 2"
      (is (= 5 (+ 2 2)))
      (is 'hello))))
(sample-tests)
"#;

#[test]
fn sample_file_reproduces_the_reference_output() {
    let runner = Runner::new(reporting::base(), RunnerOptions::sequential()).unwrap();
    let (port, captured) = OutputPort::capture();
    reporting::with_output_port(port, || with_runner(&runner, || eval_source("sample.scm", SAMPLE))).unwrap();
    let out = captured.contents();
    assert!(out.starts_with("┌> sample-tests\n| + test Test 1\n|┌> Nested test suite\n"), "{out}");
    assert!(out.contains("┌Test Test 2\n(= 5 (+ 2 2))\n✗ 5 and 4 are not =\n'hello\n✓\n└Test Test 2\n"), "{out}");
    assert!(out.ends_with("((errors . 0)\n (failures . 1)\n (assertions . 3)\n (tests . 2))\n"), "{out}");
}

#[test]
fn module_loading_defers_everything() {
    let runner = Runner::new(reporting::silent(), RunnerOptions::sequential()).unwrap();
    let registry = SuiteRegistry::new();
    let module: ModulePath = "(sample sample-test)".parse().unwrap();
    let src = format!("{SAMPLE}\n(test-suite \"second\" (test \"x\" (is (sleep-ms 0))))");
    let suites = with_runner(&runner, || load_module_source("s.scm", &src, &module, &registry)).unwrap();
    let names: Vec<_> = suites.iter().map(|s| s.description.as_str()).collect();
    assert_eq!(names, ["sample-tests", "second"]);
    assert!(runner.loaded_hierarchy().is_empty());
    assert!(runner.history().is_empty());
}

#[test]
fn top_level_tests_in_modules_are_rejected() {
    let registry = SuiteRegistry::new();
    let module: ModulePath = "(m m-test)".parse().unwrap();
    let err = load_module_source("m.scm", "\n(test \"t\" (is #t))", &module, &registry).unwrap_err();
    assert!(matches!(err, Error::Script { line: 2, .. }), "{err:?}");
}

#[test]
fn metadata_and_descriptions() {
    let runner = Runner::new(reporting::silent(), RunnerOptions::sequential()).unwrap();
    let src = r#"
(test-suite "meta"
  (test "skipped" #:metadata '((skip? . #t)) (error "never"))
  (test "xfail" #:metadata (list (list 'expected-to-fail? #t)) (is (= 1 2)))
  (test "described" (is (with-description (= 4 (+ 2 2)) "school math")))
  (test "inspect" #:metadata '((inspect? . #t) (no-failure? . #t)) (is #f)))
"#;
    let summary = with_runner(&runner, || eval_source("meta.scm", src));
    summary.unwrap();
    assert_eq!(runner.last_outcome("meta/skipped"), Some(OutcomeKind::Skip));
    assert_eq!(runner.last_outcome("meta/xfail"), Some(OutcomeKind::Xfail));
    assert_eq!(runner.last_outcome("meta/described"), Some(OutcomeKind::Pass));
    assert_eq!(runner.last_outcome("meta/inspect"), Some(OutcomeKind::Pass));
}

#[test]
fn nesting_rules_apply_to_scripts() {
    let runner = Runner::new(reporting::silent(), RunnerOptions::sequential()).unwrap();
    let src = r#"
(test-suite "n"
  (test "outer" (test "inner" (is #t)))
  (test "suite inside" (test-suite "s" (test "t" (is #t)))))
"#;
    with_runner(&runner, || eval_source("n.scm", src)).unwrap();
    assert_eq!(runner.last_outcome("n/outer"), Some(OutcomeKind::Error));
    assert_eq!(runner.last_outcome("n/suite inside"), Some(OutcomeKind::Error));
    let err = with_runner(&runner, || eval_source("s.scm", "(test-suite \"s\" (is #t))")).unwrap_err();
    assert!(matches!(err, Error::InvalidStructure(_)), "{err:?}");
}

#[test]
fn bodies_can_run_in_parallel() {
    let runner = Runner::new(reporting::silent(), RunnerOptions::parallel(4)).unwrap();
    let src = r#"
(define (square x) (* x x))
(define-test-suite par
  (test "a" (is (= (square 3) 9)))
  (test "b" (is (= (square 4) 16)))
  (test "c" (is (equal? (list 1 2) '(1 2))))
  (test "d" (is (= (square 5) 24))))
(par)
"#;
    with_runner(&runner, || eval_source("p.scm", src)).unwrap();
    assert_eq!(runner.history().len(), 4);
    assert_eq!(runner.last_outcome("par/d"), Some(OutcomeKind::Fail));
    let summary = runner.rerun_last().unwrap();
    assert_eq!(summary, RunSummary { errors: 0, failures: 1, assertions: 4, tests: 4 });
}
