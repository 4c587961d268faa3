use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lang::{Program, ThreadId};

/// How scheduling decisions are made. One decision is consumed per
/// state-changing command.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Schedule {
    Scripted { choices: Vec<String> },
    Seeded { seed: u64 },
    /// Decisions come from outside (the debugger user).
    Interactive,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
pub enum ScheduleError {
    #[error("decision {decision}: thread `{thread}` is not enabled")]
    NotEnabled { decision: usize, thread: String },
    #[error("decision {decision}: unknown thread `{thread}`")]
    UnknownThread { decision: usize, thread: String },
    #[error("decision {decision}: scripted schedule exhausted")]
    Exhausted { decision: usize },
    #[error("decision {decision}: a thread choice is required")]
    ChoiceRequired { decision: usize },
}

/// Stateful cursor over a [`Schedule`].
#[derive(Debug, Clone)]
pub struct Scheduler {
    schedule: Schedule,
    rng: Option<ChaCha8Rng>,
    consumed: usize,
}

impl Scheduler {
    pub fn new(schedule: Schedule) -> Scheduler {
        let rng = match &schedule {
            Schedule::Seeded { seed } => Some(ChaCha8Rng::seed_from_u64(*seed)),
            _ => None,
        };
        Scheduler { schedule, rng, consumed: 0 }
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn consumed(&self) -> usize {
        self.consumed
    }

    /// Picks the next thread among `enabled` (non-empty, in thread order).
    /// `decision` is the 1-based number reported in errors.
    pub fn choose(&mut self, program: &Program, enabled: &[ThreadId]) -> Result<ThreadId, ScheduleError> {
        let decision = self.consumed + 1;
        let chosen = match &self.schedule {
            Schedule::Scripted { choices } => {
                let name = choices.get(self.consumed).ok_or(ScheduleError::Exhausted { decision })?;
                let t = program
                    .thread_by_name(name)
                    .ok_or_else(|| ScheduleError::UnknownThread { decision, thread: name.clone() })?;
                if !enabled.contains(&t) {
                    return Err(ScheduleError::NotEnabled { decision, thread: name.clone() });
                }
                t
            }
            Schedule::Seeded { .. } => {
                let rng = self.rng.as_mut().expect("seeded scheduler has an rng");
                enabled[rng.gen_range(0..enabled.len())]
            }
            Schedule::Interactive => return Err(ScheduleError::ChoiceRequired { decision }),
        };
        self.consumed += 1;
        Ok(chosen)
    }

    /// True when a scripted schedule has no decisions left.
    pub fn is_exhausted(&self) -> bool {
        matches!(&self.schedule, Schedule::Scripted { choices } if self.consumed >= choices.len())
    }
}
