use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use flowtest::reporting::ReporterKind;
use flowtest::runner::DEFAULT_WORKER_COUNT;
use flowtest::RunnerOptions;

#[derive(Debug, Parser)]
#[command(name = "flowtest", version, about = "Runtime-first interactive test runner")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Discover, load and run the project's tests.
    Run(RunArgs),
    /// Run only the tests whose last recorded outcome was a failure or error.
    RerunFailed(RunArgs),
    /// List loaded tests with their last outcome.
    List(ListArgs),
    /// List the project's test modules.
    Discover(RootArgs),
    /// Serve the runner over the line protocol.
    Daemon(DaemonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RootArgs {
    /// Project root containing `src/` and `test/`.
    #[arg(long, env = "FLOWTEST_ROOT", default_value = ".")]
    pub root: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct OptionArgs {
    /// Only run tests whose id, module, last outcome or latency band
    /// contain every word of the query.
    #[arg(long, value_name = "QUERY")]
    pub filter: Option<String>,
    /// Stop dispatching after the first failing or erroring test
    #[arg(long)]
    pub fail_fast: bool,
    /// Run tests that failed last time first, then new ones, then the rest
    #[arg(long)]
    pub failing_first: bool,
    /// Narrow the run to tests whose last outcome was a failure or error
    #[arg(long)]
    pub rerun_failed: bool,
    /// Run in registration order on one thread.
    #[arg(long, conflicts_with = "parallel")]
    pub sequential: bool,
    /// Run bodies on N workers (4 when N is omitted).
    #[arg(long, value_name = "N", num_args = 0..=1, default_missing_value = "4",
          value_parser = clap::value_parser!(u64).range(1..))]
    pub parallel: Option<u64>,
    /// Seed for the shuffled order.
    #[arg(long, value_name = "S")]
    pub seed: Option<u64>,
    /// Keep registration order and report each suite contiguously
    #[arg(long)]
    pub preserve_hierarchy: bool,
    /// Stop at the first failing assertion and print its context.
    #[arg(long)]
    pub debug_on_failure: bool,
}

impl OptionArgs {
    pub fn options(&self) -> RunnerOptions {
        RunnerOptions {
            preserve_hierarchy: self.preserve_hierarchy,
            sequential: self.sequential,
            parallel: self.parallel.is_some(),
            worker_count: self.parallel.map_or(DEFAULT_WORKER_COUNT, |n| n as usize),
            fail_fast: self.fail_fast,
            failing_first: self.failing_first,
            debug_on_failure: self.debug_on_failure,
            rerun_failed: self.rerun_failed,
            filter_query: self.filter.clone().filter(|f| !f.trim().is_empty()),
            seed: self.seed,
            capture_failure_context: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReporterChoice {
    Verbose,
    Dots,
    Silent,
    Hierarchy,
    Base,
}

impl From<ReporterChoice> for ReporterKind {
    fn from(choice: ReporterChoice) -> Self {
        match choice {
            ReporterChoice::Verbose => ReporterKind::Verbose,
            ReporterChoice::Dots => ReporterKind::Dots,
            ReporterChoice::Silent => ReporterKind::Silent,
            ReporterChoice::Hierarchy => ReporterKind::Hierarchy,
            ReporterChoice::Base => ReporterKind::Base,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub root: RootArgs,
    #[command(flatten)]
    pub options: OptionArgs,
    /// Console reporter
    #[arg(long, value_enum, default_value = "base")]
    pub reporter: ReporterChoice,
    /// Also write a TAP version 14 report.
    #[arg(long, value_name = "PATH")]
    pub tap: Option<PathBuf>,
    /// Also write a JUnit XML report.
    #[arg(long, value_name = "PATH")]
    pub junit: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ListArgs {
    #[command(flatten)]
    pub root: RootArgs,
    #[arg(long, value_name = "QUERY", default_value = "")]
    pub filter: String,
}

#[derive(Debug, Clone, Args)]
pub struct DaemonArgs {
    #[command(flatten)]
    pub root: RootArgs,
    #[command(flatten)]
    pub options: OptionArgs,
    /// Loopback port; 0 picks a free one.
    #[arg(long, env = "FLOWTEST_PORT", default_value_t = 0)]
    pub port: u16,
    /// Built dashboard assets served at `/`.
    #[arg(long, value_name = "DIR")]
    pub ui_dir: Option<PathBuf>,
}
