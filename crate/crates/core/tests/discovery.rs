//! Module discovery over generated project trees, compared with a plain
//! recursive directory walk.

use std::fs;
use std::path::Path;

use flowtest::discovery::{get_all_test_modules, get_test_module, ModulePath, SuiteRegistry};
use flowtest::reporting;
use flowtest::script::load_project;
use flowtest::{ExecControl, Runner, RunnerOptions};
use proptest::prelude::*;

fn write(root: &Path, rel: &str, body: &str) {
    let path = root.join(rel);
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, body).unwrap();
}

/// Independent walk: every `*-test.scm` file below `test/`, rendered as
/// its parenthesised module name.
fn walk(dir: &Path, segments: &mut Vec<String>, out: &mut Vec<String>) {
    let Ok(entries) = fs::read_dir(dir) else { return };
    for entry in entries.flatten() {
        let name = entry.file_name().to_string_lossy().into_owned();
        let path = entry.path();
        if path.is_dir() {
            segments.push(name);
            walk(&path, segments, out);
            segments.pop();
        } else if let Some(stem) = name.strip_suffix(".scm") {
            if stem.ends_with("-test") && stem.len() > "-test".len() {
                let mut all = segments.clone();
                all.push(stem.to_owned());
                out.push(format!("({})", all.join(" ")));
            }
        }
    }
}

fn segment() -> impl Strategy<Value = String> {
    "[a-c]{1,3}"
}

fn file() -> impl Strategy<Value = String> {
    (
        prop_oneof![Just("test"), Just("src")],
        prop::collection::vec(segment(), 0..3),
        segment(),
        prop_oneof![Just("-test.scm"), Just(".scm"), Just("-test.txt"), Just("-test.scm.bak")],
    )
        .prop_map(|(root, dirs, stem, ext)| {
            let mut parts = vec![root.to_owned()];
            parts.extend(dirs);
            parts.push(format!("{stem}{ext}"));
            parts.join("/")
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn discovery_matches_a_plain_walk(files in prop::collection::vec(file(), 0..12)) {
        let dir = tempfile::tempdir().unwrap();
        for f in &files {
            // A later file may want a directory where an earlier one wrote a file.
            if let Some(parent) = dir.path().join(f).parent() {
                if fs::create_dir_all(parent).is_err() {
                    continue;
                }
            }
            if !dir.path().join(f).is_dir() {
                fs::write(dir.path().join(f), "").unwrap();
            }
        }
        let mut expected = Vec::new();
        walk(&dir.path().join("test"), &mut Vec::new(), &mut expected);
        expected.sort();
        let mut got: Vec<String> = get_all_test_modules(dir.path()).unwrap().iter().map(ToString::to_string).collect();
        got.sort();
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn module_paths_round_trip(segments in prop::collection::vec(segment(), 1..4)) {
        let source = ModulePath::source(segments.clone()).unwrap();
        let test = source.test_counterpart().unwrap();
        prop_assert_eq!(test.source_counterpart().unwrap(), source.clone());
        let root = Path::new("/project");
        prop_assert_eq!(ModulePath::from_test_file(root, &test.file_path(root)).unwrap(), test.clone());
        prop_assert_eq!(test.to_string().parse::<ModulePath>().unwrap(), test.clone());
        prop_assert_eq!(segments.join("/").parse::<ModulePath>().unwrap(), source);
    }
}

#[test]
fn a_project_loads_without_running_and_executes_on_demand() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "src/my-project/tool.scm", "(define (double x) (* 2 x))\n");
    write(
        dir.path(),
        "test/my-project/tool-test.scm",
        "(define-test-suite tool-tests\n  (test \"doubles\" (is (= 4 (* 2 2))))\n  (test \"fails\" (is (= 5 (* 2 2)))))\n",
    );
    write(dir.path(), "test/my-project/notes.txt", "not a module");
    write(dir.path(), "test/my-project/helper.scm", "(define x 1)\n");

    let runner = Runner::new(reporting::silent(), RunnerOptions::sequential()).unwrap();
    let registry = SuiteRegistry::new();
    let load = load_project(dir.path(), &runner, &registry).unwrap();
    assert_eq!(load.modules.iter().map(ToString::to_string).collect::<Vec<_>>(), vec!["(my-project tool-test)"]);
    assert_eq!(load.forest.len(), 1);
    let tests = load.forest[0].tests();
    assert_eq!(tests.len(), 2);
    assert!(tests.iter().all(|t| t.module.as_deref() == Some("(my-project tool-test)")));

    let source = ModulePath::source(["my-project", "tool"]).unwrap();
    assert_eq!(get_test_module(&source, &registry, None).unwrap().to_string(), "(my-project tool-test)");
    let other = ModulePath::source(["my-project", "other"]).unwrap();
    assert_eq!(get_test_module(&other, &registry, Some(dir.path())), None);

    let summary = runner.execute_loaded(ExecControl::default()).unwrap();
    assert_eq!((summary.tests, summary.assertions, summary.failures, summary.errors), (2, 2, 1, 0));
}

#[test]
fn missing_roots_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    assert!(get_all_test_modules(&dir.path().join("absent")).is_err());
    assert!(get_all_test_modules(dir.path()).unwrap().is_empty());
}
