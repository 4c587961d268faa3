use std::sync::Arc;

use thiserror::Error;

use super::log::{BlockEntry, EntryKind, ExecutionLog, PathEntry, Switch};
use super::machine::{Loc, Machine, RuntimeError, ThreadStatus};
use super::schedule::{Schedule, ScheduleError, Scheduler};
use crate::lang::{BinOp, CmdId, CommandKind, Expr, LValue, Program, Target, ThreadId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StepError {
    #[error("thread `{thread}` is not enabled ({status:?})")]
    NotEnabled { thread: String, status: ThreadStatus },
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
}

/// Computes the next step of `thread` and applies it to `machine`.
/// On error the machine is left untouched.
pub fn step_machine(
    program: &Program,
    machine: &mut Machine,
    thread: ThreadId,
    seq: usize,
) -> Result<(PathEntry, Vec<CmdId>), StepError> {
    let not_enabled = |status| StepError::NotEnabled { thread: program.thread(thread).name.clone(), status };
    let ahead = machine.look_ahead(program, thread)?;
    let Some(id) = ahead.pending else {
        return Err(not_enabled(ThreadStatus::Finished));
    };
    let cmd = program.command(id);
    let (lhs, rhs, kind) = match &cmd.kind {
        CommandKind::Assign { lhs, rhs } => {
            let lhs = match lhs {
                LValue::Var(v) => Loc::Var(*v),
                LValue::Index(v, idx) => machine.cell(program, *v, idx)?,
            };
            (lhs, machine.concretize(program, rhs)?, EntryKind::PlainAssign)
        }
        CommandKind::Wait(s) => {
            if machine.get(program, Loc::Var(*s)) <= 0 {
                return Err(not_enabled(ThreadStatus::Blocked));
            }
            (Loc::Var(*s), Expr::bin(BinOp::Sub, Expr::Var(*s), Expr::Lit(1)), EntryKind::WaitDecrement)
        }
        CommandKind::Signal(s) => {
            (Loc::Var(*s), Expr::bin(BinOp::Add, Expr::Var(*s), Expr::Lit(1)), EntryKind::SignalIncrement)
        }
        _ => unreachable!("look-ahead stops at state-changing commands"),
    };
    let value = machine.eval(program, &rhs)?;
    machine.set(program, lhs, value);
    machine.set_control(thread, program.node(id).succ);
    let entry = PathEntry { seq, thread, command: id, line: cmd.line, lhs, rhs, kind };
    Ok((entry, ahead.blocks))
}

/// Where `thread` resumes after the first `len` entries of `path`.
pub fn control_after(program: &Program, path: &[PathEntry], thread: ThreadId) -> Target {
    path.iter()
        .rev()
        .find(|e| e.thread == thread)
        .map_or(Target::Cmd(program.thread(thread).body.id), |e| program.node(e.command).succ)
}

/// What a forward step produced besides the new path entry.
#[derive(Debug, Clone)]
pub struct Stepped {
    /// Machine state immediately before the step.
    pub before: Machine,
    pub blocks: Vec<BlockEntry>,
    pub switch: Option<Switch>,
}

/// A program under execution: current state, the path executed so far
/// and the control-flow log.
#[derive(Debug, Clone)]
pub struct Execution {
    program: Arc<Program>,
    machine: Machine,
    path: Vec<PathEntry>,
    log: ExecutionLog,
}

impl Execution {
    pub fn new(program: Arc<Program>) -> Execution {
        let machine = Machine::new(&program);
        Execution { program, machine, path: Vec::new(), log: ExecutionLog::default() }
    }

    pub fn program(&self) -> &Arc<Program> {
        &self.program
    }

    pub fn machine(&self) -> &Machine {
        &self.machine
    }

    pub fn path(&self) -> &[PathEntry] {
        &self.path
    }

    pub fn log(&self) -> &ExecutionLog {
        &self.log
    }

    pub fn len(&self) -> usize {
        self.path.len()
    }

    pub fn is_empty(&self) -> bool {
        self.path.is_empty()
    }

    pub fn enabled_threads(&self) -> Vec<ThreadId> {
        self.machine.enabled_threads(&self.program)
    }

    pub fn step(&mut self, thread: ThreadId) -> Result<Stepped, StepError> {
        let before = self.machine.clone();
        let seq = self.path.len() + 1;
        let (entry, blocks) = step_machine(&self.program, &mut self.machine, thread, seq)?;
        let prev = self.path.last().map(|e| e.thread);
        let switch = (prev != Some(thread)).then_some(Switch { seq, from: prev, to: thread });
        if let Some(s) = switch {
            self.log.switches.push(s);
        }
        let blocks: Vec<BlockEntry> = blocks.into_iter().map(|block| BlockEntry { step: seq, thread, block }).collect();
        self.log.block_entries.extend(blocks.iter().copied());
        self.log.len = seq;
        self.path.push(entry);
        Ok(Stepped { before, blocks, switch })
    }

    /// Removes the last entry. `restored` carries the data values from
    /// before that entry; control points are recomputed from the path.
    pub fn retract(&mut self, restored: &Machine) -> Option<PathEntry> {
        let entry = self.path.pop()?;
        self.machine.set_values(restored.values());
        let target = control_after(&self.program, &self.path, entry.thread);
        self.machine.set_control(entry.thread, target);
        self.log.truncate(self.path.len());
        Some(entry)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Terminated,
    /// Unfinished threads remain but none can run.
    Deadlock { blocked: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RunError {
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("step {seq}: {error}")]
    Runtime { seq: usize, error: RuntimeError },
}

pub fn outcome_of(program: &Program, machine: &Machine) -> Option<Outcome> {
    if !machine.enabled_threads(program).is_empty() {
        return None;
    }
    let blocked: Vec<String> = program
        .thread_ids()
        .filter(|t| machine.status(program, *t) == ThreadStatus::Blocked)
        .map(|t| program.thread(t).name.clone())
        .collect();
    Some(if blocked.is_empty() { Outcome::Terminated } else { Outcome::Deadlock { blocked } })
}

/// Runs `program` to completion (or deadlock) under `schedule`.
pub fn run(program: Arc<Program>, schedule: &Schedule) -> Result<(Execution, Outcome), RunError> {
    let mut exec = Execution::new(program);
    let mut scheduler = Scheduler::new(schedule.clone());
    loop {
        let enabled = exec.enabled_threads();
        if enabled.is_empty() {
            let outcome = outcome_of(exec.program(), exec.machine()).expect("no thread enabled");
            return Ok((exec, outcome));
        }
        let thread = scheduler.choose(exec.program(), &enabled)?;
        exec.step(thread).map_err(|e| match e {
            StepError::Runtime(error) => RunError::Runtime { seq: exec.len() + 1, error },
            StepError::NotEnabled { .. } => unreachable!("scheduler picks enabled threads"),
        })?;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error("replay target {upto} is beyond the {len} recorded entries")]
    OutOfRange { upto: usize, len: usize },
    #[error("replay diverged from the log at entry {seq}: {reason}")]
    Divergence { seq: usize, reason: String },
}

/// Re-executes entries `from+1 ..= to`, starting from `start` (the state
/// after entry `from`), steering every decision from `log`.
pub fn replay_range(
    program: &Program,
    start: Machine,
    log: &ExecutionLog,
    from: usize,
    to: usize,
) -> Result<(Machine, Vec<PathEntry>), ReplayError> {
    if to > log.len {
        return Err(ReplayError::OutOfRange { upto: to, len: log.len });
    }
    let mut machine = start;
    let mut entries = Vec::with_capacity(to.saturating_sub(from));
    for seq in from + 1..=to {
        let diverged = |reason: String| ReplayError::Divergence { seq, reason };
        let thread = log.thread_at(seq).ok_or_else(|| diverged("no thread recorded".into()))?;
        let (entry, blocks) =
            step_machine(program, &mut machine, thread, seq).map_err(|e| diverged(e.to_string()))?;
        let recorded: Vec<CmdId> = log.blocks_for(seq).filter(|b| b.thread == thread).map(|b| b.block).collect();
        if recorded != blocks {
            return Err(diverged(format!("block entries {blocks:?} differ from recorded {recorded:?}")));
        }
        entries.push(entry);
    }
    Ok((machine, entries))
}

/// Rebuilds the state just after entry `upto` from the program and the log
/// alone.
pub fn replay(program: &Program, log: &ExecutionLog, upto: usize) -> Result<Machine, ReplayError> {
    replay_range(program, Machine::new(program), log, 0, upto).map(|(m, _)| m)
}

/// Rebuilds the full execution path from the program and the log.
pub fn replay_path(program: &Program, log: &ExecutionLog) -> Result<Vec<PathEntry>, ReplayError> {
    replay_range(program, Machine::new(program), log, 0, log.len).map(|(_, p)| p)
}

/// A run together with a full snapshot of the machine after every entry:
/// `snapshots[k]` is the state just after `ε(k)`, `snapshots[0]` the
/// initial state. Used as the reference oracle for backtracking.
#[derive(Debug, Clone)]
pub struct Trace {
    pub execution: Execution,
    /// `None` when a scripted schedule ran out first.
    pub outcome: Option<Outcome>,
    pub snapshots: Vec<Machine>,
}

/// Like [`run`], recording every intermediate state. A scripted schedule
/// that runs out before the program ends simply stops the trace there.
pub fn trace(program: Arc<Program>, schedule: &Schedule) -> Result<Trace, RunError> {
    let mut exec = Execution::new(program);
    let mut scheduler = Scheduler::new(schedule.clone());
    let mut snapshots = vec![exec.machine().clone()];
    loop {
        let enabled = exec.enabled_threads();
        if enabled.is_empty() || scheduler.is_exhausted() {
            let outcome = outcome_of(exec.program(), exec.machine());
            return Ok(Trace { execution: exec, outcome, snapshots });
        }
        let thread = scheduler.choose(exec.program(), &enabled)?;
        exec.step(thread).map_err(|e| match e {
            StepError::Runtime(error) => RunError::Runtime { seq: exec.len() + 1, error },
            StepError::NotEnabled { .. } => unreachable!("scheduler picks enabled threads"),
        })?;
        snapshots.push(exec.machine().clone());
    }
}
