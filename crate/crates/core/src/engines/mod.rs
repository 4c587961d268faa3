//! The five backtracking methods behind one interface. Each engine watches
//! forward steps, undoes the last one on request, and accounts the
//! integers it stores for that purpose.

mod checkpointing;
mod rcg;
mod saving;
mod timeline;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interp::{ExecutionLog, Machine, PathEntry, ReplayError, RuntimeError};
use crate::lang::{CmdId, CommandKind, Program};
use crate::revgen::DEFAULT_BUDGET;

pub use checkpointing::Checkpointing;
pub use rcg::{DynamicRcg, StaticRcg};
pub use saving::{BasicSs, IncrementalSs};
pub use timeline::{BackError, Timeline};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EngineKind {
    BasicSs,
    IncrementalSs,
    Checkpointing,
    StaticRcg,
    DynamicRcg,
}

impl EngineKind {
    /// Most to least memory-hungry, the order the reports use.
    pub const ALL: [EngineKind; 5] = [
        EngineKind::BasicSs,
        EngineKind::IncrementalSs,
        EngineKind::Checkpointing,
        EngineKind::StaticRcg,
        EngineKind::DynamicRcg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EngineKind::BasicSs => "basic-ss",
            EngineKind::IncrementalSs => "incremental-ss",
            EngineKind::Checkpointing => "checkpointing",
            EngineKind::StaticRcg => "static-rcg",
            EngineKind::DynamicRcg => "dynamic-rcg",
        }
    }
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EngineKind {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EngineKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| EngineError::UnknownEngine(s.to_string()))
    }
}

/// Tunables shared by all engine constructors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngineConfig {
    /// Checkpoint commands; `None` picks the first state-changing command
    /// of every thread.
    pub checkpoints: Option<BTreeSet<CmdId>>,
    /// Reverse code kept for the last `n` entries; `None` keeps all.
    pub retention: Option<usize>,
    pub budget: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig { checkpoints: None, retention: None, budget: DEFAULT_BUDGET }
    }
}

/// Memory accounting in integer units.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryLedger {
    pub engine: String,
    /// Integers currently stored to restore data values.
    pub saved_ints: usize,
    /// Size of the shared control-flow log; kept by every engine alike.
    pub aux_log_ints: usize,
    /// Reverse-code assignments currently held.
    pub retained_revcode_cmds: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("unknown engine `{0}`")]
    UnknownEngine(String),
    #[error("checkpoint {0} is not a state-changing command of the program")]
    UnknownCheckpoint(CmdId),
    #[error("checkpoint set is empty")]
    NoCheckpoints,
    #[error("already at the origin")]
    AtOrigin,
    #[error("entry {got} observed out of order (expected {expected})")]
    OutOfOrder { expected: usize, got: usize },
    #[error("reverse execution of entry {seq} failed: {error}")]
    Reverse { seq: usize, error: RuntimeError },
    #[error("re-execution from a checkpoint failed: {0}")]
    Replay(#[from] ReplayError),
    #[error("entry {0} has neither a saved value nor reverse code")]
    Unrecoverable(usize),
}

/// A backtracking method.
///
/// `path` always ends with the entry concerned: the one just executed
/// (`on_forward`) or the one to undo (`back`). `log` covers `path`.
pub trait Engine: Send {
    fn kind(&self) -> EngineKind;

    /// Observes the step that produced `path.last()`; `before` is the
    /// machine just before it.
    fn on_forward(&mut self, program: &Program, path: &[PathEntry], before: &Machine) -> Result<(), EngineError>;

    /// Turns `machine`, the state after `path.last()`, into the state
    /// before it (data values; control points are the caller's job), and
    /// releases what is no longer needed.
    fn back(
        &mut self,
        program: &Program,
        path: &[PathEntry],
        log: &ExecutionLog,
        machine: &mut Machine,
    ) -> Result<(), EngineError>;

    fn saved_ints(&self) -> usize;

    fn retained_revcode_cmds(&self) -> usize {
        0
    }

    fn ledger(&self, log: &ExecutionLog) -> MemoryLedger {
        MemoryLedger {
            engine: self.kind().name().to_string(),
            saved_ints: self.saved_ints(),
            aux_log_ints: log.size_ints(),
            retained_revcode_cmds: self.retained_revcode_cmds(),
        }
    }
}

/// Checks a forward observation arrives in sequence.
pub(crate) fn expect_seq(observed: usize, path: &[PathEntry]) -> Result<&PathEntry, EngineError> {
    let entry = path.last().ok_or(EngineError::OutOfOrder { expected: observed + 1, got: 0 })?;
    if entry.seq != observed + 1 {
        return Err(EngineError::OutOfOrder { expected: observed + 1, got: entry.seq });
    }
    Ok(entry)
}

/// First state-changing command of every thread.
pub fn default_checkpoints(program: &Program) -> BTreeSet<CmdId> {
    program
        .threads()
        .iter()
        .filter_map(|t| {
            let mut first = None;
            t.body.walk(&mut |c| {
                if first.is_none() && c.is_state_changing() {
                    first = Some(c.id);
                }
            });
            first
        })
        .collect()
}

/// Validates a checkpoint set against the program.
pub fn set_checkpoints(program: &Program, points: BTreeSet<CmdId>) -> Result<BTreeSet<CmdId>, EngineError> {
    if points.is_empty() {
        return Err(EngineError::NoCheckpoints);
    }
    for &id in &points {
        let ok = (id.0 as usize) < program.command_count()
            && matches!(
                program.command(id).kind,
                CommandKind::Assign { .. } | CommandKind::Wait(_) | CommandKind::Signal(_)
            );
        if !ok {
            return Err(EngineError::UnknownCheckpoint(id));
        }
    }
    Ok(points)
}

pub fn build(kind: EngineKind, program: &Program, config: &EngineConfig) -> Result<Box<dyn Engine>, EngineError> {
    Ok(match kind {
        EngineKind::BasicSs => Box::new(BasicSs::default()),
        EngineKind::IncrementalSs => Box::new(IncrementalSs::default()),
        EngineKind::Checkpointing => {
            let points = match &config.checkpoints {
                Some(p) => set_checkpoints(program, p.clone())?,
                None => set_checkpoints(program, default_checkpoints(program))?,
            };
            Box::new(Checkpointing::new(points))
        }
        EngineKind::StaticRcg => Box::new(StaticRcg::new(program)),
        EngineKind::DynamicRcg => Box::new(DynamicRcg::new(config.retention, config.budget)),
    })
}

pub fn build_all(program: &Program, config: &EngineConfig) -> Result<Vec<Box<dyn Engine>>, EngineError> {
    EngineKind::ALL.into_iter().map(|k| build(k, program, config)).collect()
}
