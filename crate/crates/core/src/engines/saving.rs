use super::{expect_seq, Engine, EngineError, EngineKind};
use crate::interp::{ExecutionLog, Loc, Machine, PathEntry};
use crate::lang::Program;

/// Saves the whole state vector before every state change.
#[derive(Debug, Default)]
pub struct BasicSs {
    stack: Vec<Vec<i64>>,
}

impl Engine for BasicSs {
    fn kind(&self) -> EngineKind {
        EngineKind::BasicSs
    }

    fn on_forward(&mut self, _: &Program, path: &[PathEntry], before: &Machine) -> Result<(), EngineError> {
        expect_seq(self.stack.len(), path)?;
        self.stack.push(before.values().to_vec());
        Ok(())
    }

    fn back(&mut self, _: &Program, _: &[PathEntry], _: &ExecutionLog, machine: &mut Machine) -> Result<(), EngineError> {
        let values = self.stack.pop().ok_or(EngineError::AtOrigin)?;
        machine.set_values(&values);
        Ok(())
    }

    fn saved_ints(&self) -> usize {
        self.stack.iter().map(Vec::len).sum()
    }
}

/// Saves only the value each state change overwrites.
#[derive(Debug, Default)]
pub struct IncrementalSs {
    stack: Vec<(Loc, i64)>,
}

impl Engine for IncrementalSs {
    fn kind(&self) -> EngineKind {
        EngineKind::IncrementalSs
    }

    fn on_forward(&mut self, program: &Program, path: &[PathEntry], before: &Machine) -> Result<(), EngineError> {
        let entry = expect_seq(self.stack.len(), path)?;
        self.stack.push((entry.lhs, before.get(program, entry.lhs)));
        Ok(())
    }

    fn back(&mut self, program: &Program, _: &[PathEntry], _: &ExecutionLog, machine: &mut Machine) -> Result<(), EngineError> {
        let (loc, value) = self.stack.pop().ok_or(EngineError::AtOrigin)?;
        machine.set(program, loc, value);
        Ok(())
    }

    fn saved_ints(&self) -> usize {
        self.stack.len()
    }
}
