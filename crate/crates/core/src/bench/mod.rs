//! Benchmark harness: fixtures, schedules, closed-form expectations and
//! the multi-engine runner.

pub mod fixture;
pub mod formulas;
pub mod oracle;
pub mod runner;
pub mod schedules;

pub use runner::{run_benchmark, sweep, BenchConfig, BenchError, BenchReport, BenchRow, BenchSchedule};
