//! Interleaving interpreter. Threads are interleaved at the granularity of
//! state-changing commands (assignments and the two semaphore primitives);
//! control flow between them runs without consuming a scheduling decision.

mod exec;
mod log;
mod machine;
mod schedule;

pub use exec::{
    control_after, outcome_of, replay, replay_path, replay_range, run, step_machine, trace, Execution, Outcome,
    ReplayError, RunError, StepError, Stepped, Trace,
};
pub use log::{
    BlockEntry, BlockEntryView, EntryKind, ExecutionLog, ExecutionLogView, PathEntry, PathEntryView, Switch,
    SwitchView,
};
pub use machine::{apply, reads, Loc, LocDisplay, Machine, RuntimeError, ThreadStatus};
pub use schedule::{Schedule, ScheduleError, Scheduler};
