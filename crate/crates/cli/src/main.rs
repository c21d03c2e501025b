mod args;

use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use flowtest::discovery::{get_all_test_modules, SuiteRegistry};
use flowtest::history::default_history_path;
use flowtest::model::{EventPayload, FailureContext, RunEvent};
use flowtest::reporting::{self, emit_junit, emit_tap, use_all, EventLog};
use flowtest::script::load_project;
use flowtest::{Error, ExecControl, HistoryStore, Runner, RunnerOptions};
use flowtest_daemon::protocol::describe;
use flowtest_daemon::{Daemon, DaemonConfig};

use args::{Cli, Command, DaemonArgs, ListArgs, RootArgs, RunArgs};

const EXIT_FAILURES: u8 = 1;
const EXIT_USAGE: u8 = 2;
/// Backtrace frames printed for a debug-on-failure stop.
const SHOWN_FRAMES: usize = 8;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::RerunFailed(mut args) => {
            args.options.rerun_failed = true;
            run(args)
        }
        Command::List(args) => list(args),
        Command::Discover(args) => discover(args),
        Command::Daemon(args) => daemon(args),
    };
    match result {
        Ok(code) => code,
        Err(message) => {
            eprintln!("flowtest: {message}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn check_root(root: &RootArgs) -> Result<&Path, String> {
    if root.root.is_dir() {
        Ok(&root.root)
    } else {
        Err(format!("project root {} is not a directory", root.root.display()))
    }
}

fn loaded_runner(root: &Path, reporter: flowtest::Reporter, options: RunnerOptions) -> Result<Runner, String> {
    let runner = Runner::new(reporter, options).map_err(|e| e.to_string())?;
    runner.attach_history(HistoryStore::load(default_history_path(root)));
    load_project(root, &runner, &SuiteRegistry::new()).map_err(|e| e.to_string())?;
    Ok(runner)
}

fn run(args: RunArgs) -> Result<ExitCode, String> {
    let root = check_root(&args.root)?;
    let options = args.options.options();
    options.validate().map_err(|e| e.to_string())?;
    let log = EventLog::new();
    let reporter =
        use_all(vec![log.reporter(), reporting::builtin(args.reporter.into())]).map_err(|e| e.to_string())?;
    let runner = loaded_runner(root, reporter, options.clone())?;

    let outcome = runner.execute_loaded(ExecControl::default());
    let _ = std::io::stdout().flush();
    let events = log.events();
    let run_events = execution_events(&events);
    if let Some(seed) = run_events.iter().find_map(|e| match &e.payload {
        EventPayload::RunStarted(s) => Some(s.seed),
        _ => None,
    }) {
        if !options.sequential && !options.preserve_hierarchy {
            eprintln!("flowtest: seed {seed}");
        }
    }
    let summary = match outcome {
        Ok(summary) => Some(summary),
        Err(Error::FailureSignal(context)) => {
            print_failure_context(&context);
            None
        }
        Err(e) => return Err(e.to_string()),
    };
    if let Some(path) = &args.tap {
        let tap = emit_tap(&run_events).map_err(|e| e.to_string())?;
        fs::write(path, tap).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    if let Some(path) = &args.junit {
        let xml = emit_junit(&run_events).map_err(|e| e.to_string())?;
        fs::write(path, xml).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    Ok(match summary {
        Some(s) if s.is_success() => ExitCode::SUCCESS,
        _ => ExitCode::from(EXIT_FAILURES),
    })
}

/// Events of the execution run: the last run that started.
fn execution_events(events: &[RunEvent]) -> Vec<RunEvent> {
    let run_id = events.iter().rev().find_map(|e| match e.payload {
        EventPayload::RunStarted(_) => Some(e.run_id.clone()),
        _ => None,
    });
    events.iter().filter(|e| Some(&e.run_id) == run_id.as_ref()).cloned().collect()
}

fn print_failure_context(context: &FailureContext) {
    eprintln!("flowtest: stopped at the first failure in {}", context.test_id);
    eprintln!("  expression: {}", context.expression_text);
    if !context.argument_values.is_empty() {
        eprintln!("  arguments: {}", context.argument_values.join(" "));
    }
    if let Some(detail) = &context.outcome.detail {
        eprintln!("  {} {detail}", context.outcome.kind);
    }
    for frame in context.backtrace.iter().take(SHOWN_FRAMES) {
        match &frame.location {
            Some(location) => eprintln!("    at {} ({location})", frame.function),
            None => eprintln!("    at {}", frame.function),
        }
    }
    if context.backtrace.len() > SHOWN_FRAMES {
        eprintln!("    ... {} more frames", context.backtrace.len() - SHOWN_FRAMES);
    }
}

fn list(args: ListArgs) -> Result<ExitCode, String> {
    let root = check_root(&args.root)?;
    let runner = loaded_runner(root, reporting::silent(), RunnerOptions::default())?;
    let tests = describe(&runner.loaded_hierarchy(), &runner.history(), &args.filter);
    let mut out = std::io::stdout().lock();
    for t in &tests {
        let status = match (t.last_outcome, t.last_duration_s) {
            (Some(kind), Some(secs)) => format!("{kind} {secs:.3}s"),
            _ => "new".to_owned(),
        };
        let _ = writeln!(out, "{}\t{status}", t.id);
    }
    Ok(ExitCode::SUCCESS)
}

fn discover(args: RootArgs) -> Result<ExitCode, String> {
    let root = check_root(&args)?;
    let modules = get_all_test_modules(root).map_err(|e| e.to_string())?;
    let mut out = std::io::stdout().lock();
    for m in &modules {
        let _ = writeln!(out, "{m}\t{}", m.file_path(root).display());
    }
    Ok(ExitCode::SUCCESS)
}

fn daemon(args: DaemonArgs) -> Result<ExitCode, String> {
    let root = check_root(&args.root)?;
    let options = args.options.options();
    options.validate().map_err(|e| e.to_string())?;
    let config = DaemonConfig { root: Some(root.to_path_buf()), options, ui_dir: args.ui_dir };
    let daemon = Daemon::bind(("127.0.0.1", args.port), config).map_err(|e| e.to_string())?;
    println!("flowtest daemon listening on {}", daemon.local_addr());
    let _ = std::io::stdout().flush();
    daemon.serve();
    Ok(ExitCode::SUCCESS)
}
