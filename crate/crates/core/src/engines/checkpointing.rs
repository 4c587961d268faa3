use std::collections::{BTreeMap, BTreeSet};

use super::{expect_seq, Engine, EngineError, EngineKind};
use crate::interp::{control_after, replay_range, ExecutionLog, Loc, Machine, PathEntry};
use crate::lang::{CmdId, Program};

/// Values overwritten since the interval began, first write wins.
#[derive(Debug)]
struct Interval {
    /// Seq of the first entry in the interval.
    start: usize,
    /// Old value and the seq of the first write.
    saved: BTreeMap<Loc, (i64, usize)>,
}

/// Incremental checkpointing: a new interval begins whenever a checkpoint
/// command executes, and each location is saved once per interval. Going
/// back restores the interval's starting state and re-executes forward,
/// steered by the log.
#[derive(Debug)]
pub struct Checkpointing {
    points: BTreeSet<CmdId>,
    intervals: Vec<Interval>,
    observed: usize,
}

impl Checkpointing {
    pub fn new(points: BTreeSet<CmdId>) -> Self {
        Checkpointing { points, intervals: Vec::new(), observed: 0 }
    }

    pub fn points(&self) -> &BTreeSet<CmdId> {
        &self.points
    }
}

impl Engine for Checkpointing {
    fn kind(&self) -> EngineKind {
        EngineKind::Checkpointing
    }

    fn on_forward(&mut self, program: &Program, path: &[PathEntry], before: &Machine) -> Result<(), EngineError> {
        let entry = expect_seq(self.observed, path)?;
        self.observed += 1;
        if self.intervals.is_empty() || self.points.contains(&entry.command) {
            self.intervals.push(Interval { start: entry.seq, saved: BTreeMap::new() });
        }
        let current = self.intervals.last_mut().expect("an interval is open");
        current.saved.entry(entry.lhs).or_insert((before.get(program, entry.lhs), entry.seq));
        Ok(())
    }

    fn back(
        &mut self,
        program: &Program,
        path: &[PathEntry],
        log: &ExecutionLog,
        machine: &mut Machine,
    ) -> Result<(), EngineError> {
        let entry = path.last().ok_or(EngineError::AtOrigin)?;
        let n = entry.seq;
        let interval = self.intervals.last_mut().ok_or(EngineError::AtOrigin)?;
        // every location written since the interval began has its old value
        // saved; nothing else changed
        let mut start = machine.clone();
        for (loc, (value, _)) in &interval.saved {
            start.set(program, *loc, *value);
        }
        let prefix = &path[..interval.start - 1];
        for t in program.thread_ids() {
            start.set_control(t, control_after(program, prefix, t));
        }
        let (restored, _) = replay_range(program, start, log, interval.start - 1, n - 1)?;
        machine.set_values(restored.values());

        if interval.saved.get(&entry.lhs).is_some_and(|(_, first)| *first == n) {
            interval.saved.remove(&entry.lhs);
        }
        if interval.start == n {
            self.intervals.pop();
        }
        self.observed -= 1;
        Ok(())
    }

    fn saved_ints(&self) -> usize {
        self.intervals.iter().map(|i| i.saved.len()).sum()
    }
}
