use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use super::fixture::{bounded_buffer, default_src, FixtureError};
use super::formulas::{closed_form, Applies};
use super::schedules::{s_opt, s_seq};
use crate::engines::{build, EngineConfig, EngineError, EngineKind};
use crate::interp::{trace, Loc, Outcome, PathEntry, RunError, Schedule};
use crate::par::{self, Exec};

/// Schedules a benchmark can run under.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BenchSchedule {
    SSeq,
    SOpt,
    Seeded(u64),
    Custom(Schedule),
}

impl BenchSchedule {
    /// `s-seq`, `s-opt`, `seed:<u64>`, or inline schedule JSON.
    pub fn parse(s: &str) -> Result<Self, String> {
        match s {
            "s-seq" => Ok(BenchSchedule::SSeq),
            "s-opt" => Ok(BenchSchedule::SOpt),
            _ => {
                if let Some(seed) = s.strip_prefix("seed:") {
                    return seed.parse().map(BenchSchedule::Seeded).map_err(|e| format!("bad seed `{seed}`: {e}"));
                }
                serde_json::from_str(s)
                    .map(BenchSchedule::Custom)
                    .map_err(|e| format!("unknown schedule `{s}` (expected s-seq, s-opt, seed:<n> or JSON): {e}"))
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            BenchSchedule::SSeq => "s-seq".into(),
            BenchSchedule::SOpt => "s-opt".into(),
            BenchSchedule::Seeded(seed) => format!("seed:{seed}"),
            BenchSchedule::Custom(_) => "custom".into(),
        }
    }

    pub fn schedule(&self, n: usize) -> Schedule {
        match self {
            BenchSchedule::SSeq => s_seq(n),
            BenchSchedule::SOpt => s_opt(n),
            BenchSchedule::Seeded(seed) => Schedule::Seeded { seed: *seed },
            BenchSchedule::Custom(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub m: i64,
    pub n: i64,
    pub src: Vec<i64>,
    pub schedule: BenchSchedule,
    pub engines: Vec<EngineKind>,
    pub engine_config: EngineConfig,
    /// How engines are run over the recorded path.
    pub exec: Exec,
}

impl BenchConfig {
    /// S-opt, all five engines, `src = 10, 20, ...`.
    pub fn new(m: i64, n: i64) -> Self {
        BenchConfig {
            m,
            n,
            src: default_src(n.max(0) as usize),
            schedule: BenchSchedule::SOpt,
            engines: EngineKind::ALL.to_vec(),
            engine_config: EngineConfig::default(),
            exec: Exec::default(),
        }
    }

    /// Whether `kind`'s closed form is valid for this configuration.
    fn closed_form_applies(&self, kind: EngineKind) -> bool {
        match closed_form(kind, 0, 0).applies {
            Applies::AnySchedule => true,
            Applies::SOptOnly => {
                self.schedule == BenchSchedule::SOpt
                    && (kind != EngineKind::Checkpointing || self.engine_config.checkpoints.is_none())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub engine: String,
    pub saved_ints: usize,
    pub closed_form: Option<u64>,
    #[serde(rename = "match")]
    pub matches: Option<bool>,
    pub aux_log_ints: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub m: i64,
    pub n: i64,
    pub schedule: String,
    pub path_len: usize,
    /// Hash of the path every engine observed.
    pub path_hash: u64,
    /// `dst[i] = src[i] + 1` for every `i`.
    pub dst_ok: bool,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    /// True when every applicable closed form matched.
    pub fn all_match(&self) -> bool {
        self.rows.iter().all(|r| r.matches != Some(false))
    }

    pub fn saved(&self, kind: EngineKind) -> Option<usize> {
        self.rows.iter().find(|r| r.engine == kind.name()).map(|r| r.saved_ints)
    }

    /// CSV with header `engine,saved_ints,closed_form,match,aux_log_ints,wall_ms`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        if self.rows.is_empty() {
            w.write_record(["engine", "saved_ints", "closed_form", "match", "aux_log_ints", "wall_ms"])
                .expect("in-memory write");
        }
        for row in &self.rows {
            w.serialize(row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BenchError {
    #[error(transparent)]
    Fixture(#[from] FixtureError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("the schedule ended before the program did ({0} entries)")]
    Incomplete(usize),
    #[error("the run deadlocked with {0:?} blocked")]
    Deadlock(Vec<String>),
    #[error("{engine}: {error}")]
    Engine { engine: EngineKind, error: EngineError },
    #[error("{0} observed a different path")]
    PathMismatch(EngineKind),
}

fn path_hash(path: &[PathEntry]) -> u64 {
    let mut h = DefaultHasher::new();
    path.hash(&mut h);
    h.finish()
}

/// Records one forward run and lets every configured engine observe it.
pub fn run_benchmark(config: &BenchConfig) -> Result<BenchReport, BenchError> {
    let program = bounded_buffer(config.m, config.n, &config.src)?;
    let t = trace(program.clone(), &config.schedule.schedule(config.n as usize))?;
    match t.outcome {
        None => return Err(BenchError::Incomplete(t.execution.len())),
        Some(Outcome::Deadlock { blocked }) => return Err(BenchError::Deadlock(blocked)),
        Some(Outcome::Terminated) => {}
    }
    let path = t.execution.path();
    let log = t.execution.log();
    let hash = path_hash(path);

    let dst = program.lookup(program.thread_by_name("Consumer"), "dst").expect("fixture declares dst");
    let final_state = t.execution.machine();
    let dst_ok = config
        .src
        .iter()
        .enumerate()
        .all(|(i, s)| final_state.get(&program, Loc::Cell(dst, i)) == s + 1);

    let results = par::map(config.exec, &config.engines, |&kind| {
        let err = |error| BenchError::Engine { engine: kind, error };
        let started = Instant::now();
        let mut engine = build(kind, &program, &config.engine_config).map_err(err)?;
        for k in 1..=path.len() {
            engine.on_forward(&program, &path[..k], &t.snapshots[k - 1]).map_err(err)?;
        }
        // microsecond resolution keeps the CSV readable
        let wall_ms = (started.elapsed().as_secs_f64() * 1e6).round() / 1e3;
        if path_hash(path) != hash {
            return Err(BenchError::PathMismatch(kind));
        }
        Ok((engine.ledger(log), wall_ms))
    });

    let mut rows = Vec::with_capacity(results.len());
    for (&kind, result) in config.engines.iter().zip(results) {
        let (ledger, wall_ms) = result?;
        let closed = config
            .closed_form_applies(kind)
            .then(|| closed_form(kind, config.m as u64, config.n as u64).value);
        rows.push(BenchRow {
            engine: ledger.engine,
            saved_ints: ledger.saved_ints,
            closed_form: closed,
            matches: closed.map(|c| c == ledger.saved_ints as u64),
            aux_log_ints: ledger.aux_log_ints,
            wall_ms,
        });
    }
    Ok(BenchReport {
        m: config.m,
        n: config.n,
        schedule: config.schedule.name(),
        path_len: path.len(),
        path_hash: hash,
        dst_ok,
        rows,
    })
}

/// Runs every `(m, n)` pair; the pairs are spread over threads per `exec`
/// while each run observes its engines sequentially.
pub fn sweep(
    ms: &[i64],
    ns: &[i64],
    schedule: &BenchSchedule,
    exec: Exec,
) -> Vec<Result<BenchReport, BenchError>> {
    let grid: Vec<(i64, i64)> = ms.iter().flat_map(|&m| ns.iter().map(move |&n| (m, n))).collect();
    par::map(exec, &grid, |&(m, n)| {
        let config = BenchConfig { schedule: schedule.clone(), exec: Exec::Sequential, ..BenchConfig::new(m, n) };
        run_benchmark(&config)
    })
}
