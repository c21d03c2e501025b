//! From a loaded hierarchy, history and options to an ordered plan, and
//! from a plan to a summary.

mod execute;
mod plan;

pub(crate) use execute::execute_plan;
pub use plan::{
    build_plan, failing_first_rank, filter_match, filter_record, seeded_shuffle, time_seed, PlanEntry, RunPlan,
};
