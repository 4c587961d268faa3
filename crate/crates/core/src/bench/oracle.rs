//! Randomized round-trip trials: run `k` steps forward, go back `j`, and
//! compare against states recorded by a plain forward run.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::fixture::{auxiliary, bounded_buffer, default_src};
use crate::engines::{build_all, EngineConfig, EngineKind, Timeline};
use crate::interp::{trace, Schedule};
use crate::lang::Program;
use crate::par::{self, Exec};

#[derive(Debug, Clone)]
pub struct Trial {
    pub program: String,
    pub seed: u64,
    /// Forward steps (clamped to the run length).
    pub k: usize,
    /// Backward steps, at most `k`.
    pub j: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrialFailure {
    pub program: String,
    pub seed: u64,
    pub k: usize,
    pub j: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SuiteReport {
    pub trials: usize,
    pub programs: Vec<String>,
    pub failures: Vec<TrialFailure>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.trials > 0 && self.failures.is_empty()
    }
}

/// The programs the suite draws from: the auxiliary fixtures plus a few
/// bounded-buffer sizes.
pub fn corpus() -> Vec<(String, Arc<Program>)> {
    let mut out: Vec<(String, Arc<Program>)> = auxiliary().into_iter().map(|(n, p)| (n.to_string(), p)).collect();
    for (m, n) in [(1, 2), (2, 3), (3, 5)] {
        let p = bounded_buffer(m, n, &default_src(n as usize)).expect("valid sizes");
        out.push((format!("bounded-buffer-{m}x{n}"), p));
    }
    out
}

/// `count` trials spread round-robin over `corpus`, reproducible from `seed`.
pub fn generate(corpus: &[(String, Arc<Program>)], count: usize, seed: u64) -> Vec<Trial> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let (name, program) = &corpus[i % corpus.len()];
            let run_seed = rng.gen();
            let len = trace(program.clone(), &Schedule::Seeded { seed: run_seed }).map_or(0, |t| t.execution.len());
            let k = rng.gen_range(0..=len);
            let j = rng.gen_range(0..=k);
            Trial { program: name.clone(), seed: run_seed, k, j }
        })
        .collect()
}

/// Runs one trial with every engine observing; `Ok` or a failure reason.
pub fn run_trial(program: &Arc<Program>, trial: &Trial, config: &EngineConfig) -> Result<(), String> {
    let t = trace(program.clone(), &Schedule::Seeded { seed: trial.seed }).map_err(|e| e.to_string())?;
    let path = t.execution.path();
    let k = trial.k.min(path.len());
    let j = trial.j.min(k);
    let engines = build_all(program, config).map_err(|e| e.to_string())?;
    let mut tl = Timeline::new(program.clone(), engines, EngineKind::DynamicRcg);
    for e in &path[..k] {
        tl.step(e.thread).map_err(|e| e.to_string())?;
    }
    for back in 0..j {
        tl.back().map_err(|e| format!("back {}: {e}", back + 1))?;
        let at = k - back - 1;
        if tl.execution().machine() != &t.snapshots[at] {
            return Err(format!("state after back {} differs from forward state {at}", back + 1));
        }
        if tl.execution().path() != &path[..at] {
            return Err(format!("path after back {} is not the prefix of length {at}", back + 1));
        }
    }
    // Re-executing the undone entries must land in the same states.
    for (i, e) in path[k - j..k].iter().enumerate() {
        tl.step(e.thread).map_err(|e| e.to_string())?;
        if tl.execution().machine() != &t.snapshots[k - j + i + 1] {
            return Err(format!("replayed state {} differs", k - j + i + 1));
        }
    }
    Ok(())
}

/// Runs every trial; independent trials are spread over threads per `exec`.
pub fn run_suite(corpus: &[(String, Arc<Program>)], trials: &[Trial], config: &EngineConfig, exec: Exec) -> SuiteReport {
    let results = par::map(exec, trials, |trial| {
        let program = &corpus.iter().find(|(n, _)| *n == trial.program).expect("trial names a corpus program").1;
        run_trial(program, trial, config).err().map(|reason| TrialFailure {
            program: trial.program.clone(),
            seed: trial.seed,
            k: trial.k,
            j: trial.j,
            reason,
        })
    });
    let mut programs: Vec<String> = trials.iter().map(|t| t.program.clone()).collect();
    programs.sort();
    programs.dedup();
    SuiteReport { trials: trials.len(), programs, failures: results.into_iter().flatten().collect() }
}
