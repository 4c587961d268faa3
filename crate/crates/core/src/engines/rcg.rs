use std::collections::{BTreeMap, VecDeque};

use super::{expect_seq, Engine, EngineError, EngineKind};
use crate::interp::{ExecutionLog, Loc, Machine, PathEntry};
use crate::lang::{CmdId, Program};
use crate::revgen::{classify_static, execute_reverse, gen_reverse, static_reverse, Reversal, ReverseCode, StaticClass};

/// Fallback saves shared by both reverse-code engines: `(seq, loc, old)`.
#[derive(Debug, Default)]
struct Saves(Vec<(usize, Loc, i64)>);

impl Saves {
    /// Restores `seq` from a saved value if there is one.
    fn pop_for(&mut self, program: &Program, seq: usize, machine: &mut Machine) -> bool {
        match self.0.last() {
            Some(&(s, loc, value)) if s == seq => {
                machine.set(program, loc, value);
                self.0.pop();
                true
            }
            _ => false,
        }
    }
}

/// Static reverse code: self-defined invertible assignments and semaphore
/// operations are reversed by their inverse; every other command saves
/// the value it overwrites.
#[derive(Debug)]
pub struct StaticRcg {
    classes: BTreeMap<CmdId, StaticClass>,
    saves: Saves,
    observed: usize,
}

impl StaticRcg {
    pub fn new(program: &Program) -> Self {
        StaticRcg { classes: classify_static(program), saves: Saves::default(), observed: 0 }
    }
}

impl Engine for StaticRcg {
    fn kind(&self) -> EngineKind {
        EngineKind::StaticRcg
    }

    fn on_forward(&mut self, program: &Program, path: &[PathEntry], before: &Machine) -> Result<(), EngineError> {
        let entry = expect_seq(self.observed, path)?;
        self.observed += 1;
        if self.classes.get(&entry.command) != Some(&StaticClass::SelfInverse) {
            self.saves.0.push((entry.seq, entry.lhs, before.get(program, entry.lhs)));
        }
        Ok(())
    }

    fn back(&mut self, program: &Program, path: &[PathEntry], _: &ExecutionLog, machine: &mut Machine) -> Result<(), EngineError> {
        let entry = path.last().ok_or(EngineError::AtOrigin)?;
        self.observed -= 1;
        if self.saves.pop_for(program, entry.seq, machine) {
            return Ok(());
        }
        let rhs = static_reverse(entry).ok_or(EngineError::Unrecoverable(entry.seq))?;
        let value = machine
            .eval(program, &rhs)
            .map_err(|error| EngineError::Reverse { seq: entry.seq, error })?;
        machine.set(program, entry.lhs, value);
        Ok(())
    }

    fn saved_ints(&self) -> usize {
        self.saves.0.len()
    }
}

/// Dynamic reverse code: generated from the execution path at every step;
/// a value is saved only when generation fails. With a retention window
/// only the code for the most recent entries is kept; older code is
/// regenerated from the path when backtracking reaches it.
#[derive(Debug)]
pub struct DynamicRcg {
    retention: Option<usize>,
    budget: usize,
    retained: VecDeque<ReverseCode>,
    saves: Saves,
    observed: usize,
    regenerated: usize,
}

impl DynamicRcg {
    pub fn new(retention: Option<usize>, budget: usize) -> Self {
        DynamicRcg { retention, budget, retained: VecDeque::new(), saves: Saves::default(), observed: 0, regenerated: 0 }
    }

    /// Number of times discarded code had to be regenerated.
    pub fn regenerated(&self) -> usize {
        self.regenerated
    }

    fn trim(&mut self) {
        if let Some(w) = self.retention {
            while self.retained.len() > w {
                self.retained.pop_front();
            }
        }
    }
}

impl Engine for DynamicRcg {
    fn kind(&self) -> EngineKind {
        EngineKind::DynamicRcg
    }

    fn on_forward(&mut self, program: &Program, path: &[PathEntry], before: &Machine) -> Result<(), EngineError> {
        let entry = expect_seq(self.observed, path)?;
        self.observed += 1;
        match gen_reverse(program, path, entry.seq, self.budget).expect("entry is in the path") {
            Reversal::Code(code) => {
                self.retained.push_back(code);
                self.trim();
            }
            Reversal::NeedsStateSaving => self.saves.0.push((entry.seq, entry.lhs, before.get(program, entry.lhs))),
        }
        Ok(())
    }

    fn back(&mut self, program: &Program, path: &[PathEntry], _: &ExecutionLog, machine: &mut Machine) -> Result<(), EngineError> {
        let entry = path.last().ok_or(EngineError::AtOrigin)?;
        let n = entry.seq;
        self.observed -= 1;
        if self.saves.pop_for(program, n, machine) {
            return Ok(());
        }
        let code = match self.retained.back() {
            Some(c) if c.seq == n => self.retained.pop_back().expect("non-empty"),
            _ => {
                self.regenerated += 1;
                match gen_reverse(program, path, n, self.budget).expect("entry is in the path") {
                    Reversal::Code(code) => code,
                    Reversal::NeedsStateSaving => return Err(EngineError::Unrecoverable(n)),
                }
            }
        };
        execute_reverse(program, machine, &code).map_err(|error| EngineError::Reverse { seq: n, error })
    }

    fn saved_ints(&self) -> usize {
        self.saves.0.len()
    }

    fn retained_revcode_cmds(&self) -> usize {
        self.retained.iter().map(ReverseCode::len).sum()
    }
}
