use serde::{Deserialize, Serialize};

use super::machine::Loc;
use crate::lang::{expr_to_string, CmdId, Expr, Program, ThreadId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntryKind {
    PlainAssign,
    WaitDecrement,
    SignalIncrement,
}

/// One executed state-changing command. Array indices are concretized;
/// no data values of the touched locations are stored.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PathEntry {
    /// 1-based position in the path.
    pub seq: usize,
    pub thread: ThreadId,
    pub command: CmdId,
    pub line: u32,
    pub lhs: Loc,
    pub rhs: Expr,
    pub kind: EntryKind,
}

impl PathEntry {
    /// `lhs := rhs` in source syntax, indices concretized.
    pub fn render(&self, program: &Program) -> String {
        format!("{} := {}", self.lhs.display(program), expr_to_string(program, &self.rhs))
    }

    pub fn view(&self, program: &Program) -> PathEntryView {
        PathEntryView {
            seq: self.seq,
            thread: program.thread(self.thread).name.clone(),
            command_id: self.command.0,
            line: self.line,
            lhs: self.lhs.display(program).to_string(),
            rhs: expr_to_string(program, &self.rhs),
            kind: self.kind,
        }
    }
}

/// Name-resolved form of a [`PathEntry`] for export.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathEntryView {
    pub seq: usize,
    pub thread: String,
    pub command_id: u32,
    pub line: u32,
    pub lhs: String,
    pub rhs: String,
    pub kind: EntryKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BlockEntry {
    /// Seq of the path entry whose step entered the block.
    pub step: usize,
    pub thread: ThreadId,
    pub block: CmdId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Switch {
    /// Seq of the first entry executed by `to`.
    pub seq: usize,
    pub from: Option<ThreadId>,
    pub to: ThreadId,
}

/// Control-flow log kept by every backtracking method: basic-block
/// entries and context-switch points. Together with the program it
/// determines the execution path.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct ExecutionLog {
    pub block_entries: Vec<BlockEntry>,
    pub switches: Vec<Switch>,
    /// Number of path entries the log covers.
    pub len: usize,
}

impl ExecutionLog {
    /// Thread that executed entry `seq`.
    pub fn thread_at(&self, seq: usize) -> Option<ThreadId> {
        let i = self.switches.partition_point(|s| s.seq <= seq);
        (i > 0).then(|| self.switches[i - 1].to)
    }

    pub fn blocks_for(&self, step: usize) -> impl Iterator<Item = &BlockEntry> {
        let start = self.block_entries.partition_point(|b| b.step < step);
        self.block_entries[start..].iter().take_while(move |b| b.step == step)
    }

    /// Drops everything recorded after entry `len`.
    pub fn truncate(&mut self, len: usize) {
        self.block_entries.retain(|b| b.step <= len);
        self.switches.retain(|s| s.seq <= len);
        self.len = self.len.min(len);
    }

    /// Size of the log in integer units: two per block entry, three per
    /// switch record.
    pub fn size_ints(&self) -> usize {
        2 * self.block_entries.len() + 3 * self.switches.len()
    }

    pub fn view(&self, program: &Program) -> ExecutionLogView {
        let name = |t: ThreadId| program.thread(t).name.clone();
        ExecutionLogView {
            entries: self.len,
            block_entries: self
                .block_entries
                .iter()
                .map(|b| BlockEntryView { step: b.step, thread: name(b.thread), block: b.block.0 })
                .collect(),
            switches: self
                .switches
                .iter()
                .map(|s| SwitchView { seq: s.seq, from: s.from.map(name), to: name(s.to) })
                .collect(),
        }
    }

    pub fn from_view(program: &Program, view: &ExecutionLogView) -> Result<ExecutionLog, String> {
        let thread = |n: &str| program.thread_by_name(n).ok_or_else(|| format!("unknown thread `{n}`"));
        let block_entries = view
            .block_entries
            .iter()
            .map(|b| {
                if b.block as usize >= program.command_count() {
                    return Err(format!("unknown block {}", b.block));
                }
                Ok(BlockEntry { step: b.step, thread: thread(&b.thread)?, block: CmdId(b.block) })
            })
            .collect::<Result<_, _>>()?;
        let switches = view
            .switches
            .iter()
            .map(|s| {
                Ok(Switch { seq: s.seq, from: s.from.as_deref().map(thread).transpose()?, to: thread(&s.to)? })
            })
            .collect::<Result<_, String>>()?;
        Ok(ExecutionLog { block_entries, switches, len: view.entries })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockEntryView {
    pub step: usize,
    pub thread: String,
    pub block: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchView {
    pub seq: usize,
    pub from: Option<String>,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionLogView {
    pub entries: usize,
    pub block_entries: Vec<BlockEntryView>,
    pub switches: Vec<SwitchView>,
}
