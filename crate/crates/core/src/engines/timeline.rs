use std::sync::Arc;

use thiserror::Error;

use super::{Engine, EngineError, EngineKind, MemoryLedger};
use crate::interp::{Execution, PathEntry, StepError, Stepped};
use crate::lang::{Program, ThreadId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackError {
    #[error("already at the origin")]
    AtOrigin,
    #[error("{engine}: {error}")]
    Engine { engine: EngineKind, error: EngineError },
    #[error("{engine} restored a different state than {primary}")]
    Disagreement { engine: EngineKind, primary: EngineKind },
}

/// An execution observed by a set of engines. Going back asks every engine
/// to restore the previous state and requires them all to agree; the
/// primary engine's state is the one adopted.
pub struct Timeline {
    exec: Execution,
    engines: Vec<Box<dyn Engine>>,
    primary: usize,
}

impl Timeline {
    /// `engines` must be non-empty; the first one of kind `primary` (or the
    /// first engine) drives restoration.
    pub fn new(program: Arc<Program>, engines: Vec<Box<dyn Engine>>, primary: EngineKind) -> Self {
        assert!(!engines.is_empty(), "a timeline needs at least one engine");
        let primary = engines.iter().position(|e| e.kind() == primary).unwrap_or(0);
        Timeline { exec: Execution::new(program), engines, primary }
    }

    pub fn execution(&self) -> &Execution {
        &self.exec
    }

    pub fn program(&self) -> &Arc<Program> {
        self.exec.program()
    }

    pub fn primary(&self) -> EngineKind {
        self.engines[self.primary].kind()
    }

    pub fn engines(&self) -> &[Box<dyn Engine>] {
        &self.engines
    }

    pub fn step(&mut self, thread: ThreadId) -> Result<Stepped, StepError> {
        let stepped = self.exec.step(thread)?;
        let program = self.exec.program().clone();
        for engine in &mut self.engines {
            engine
                .on_forward(&program, self.exec.path(), &stepped.before)
                .expect("engines observe every step in order");
        }
        Ok(stepped)
    }

    /// Undoes the last entry.
    pub fn back(&mut self) -> Result<PathEntry, BackError> {
        if self.exec.is_empty() {
            return Err(BackError::AtOrigin);
        }
        let program = self.exec.program().clone();
        let mut restored = Vec::with_capacity(self.engines.len());
        for engine in &mut self.engines {
            let mut machine = self.exec.machine().clone();
            engine
                .back(&program, self.exec.path(), self.exec.log(), &mut machine)
                .map_err(|error| BackError::Engine { engine: engine.kind(), error })?;
            restored.push(machine);
        }
        let primary = &restored[self.primary];
        for (engine, machine) in self.engines.iter().zip(&restored) {
            if machine.values() != primary.values() {
                return Err(BackError::Disagreement { engine: engine.kind(), primary: self.primary() });
            }
        }
        Ok(self.exec.retract(primary).expect("path is non-empty"))
    }

    pub fn ledgers(&self) -> Vec<MemoryLedger> {
        self.engines.iter().map(|e| e.ledger(self.exec.log())).collect()
    }

    pub fn ledger(&self, kind: EngineKind) -> Option<MemoryLedger> {
        self.engines.iter().find(|e| e.kind() == kind).map(|e| e.ledger(self.exec.log()))
    }
}
