use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::bench::fixture::{auxiliary, bounded_buffer, default_src, FixtureError};
use crate::engines::{build, set_checkpoints, BackError, EngineConfig, EngineError, EngineKind, Timeline};
use crate::interp::{outcome_of, Outcome, RuntimeError, Schedule, ScheduleError, Scheduler, StepError, Stepped};
use crate::lang::{parse_program, ParseError, Program, ThreadId};
use crate::revgen::{gen_reverse, Reversal, RevgenError, DEFAULT_BUDGET};

/// Steps `continue` takes before giving up.
const CONTINUE_LIMIT: usize = 1_000_000;

/// Engine selection: `"all"` or a list of names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EngineSelection {
    All(AllEngines),
    List(Vec<EngineKind>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllEngines {
    All,
}

impl EngineSelection {
    pub fn kinds(&self) -> Vec<EngineKind> {
        match self {
            EngineSelection::All(_) => EngineKind::ALL.to_vec(),
            EngineSelection::List(l) => l.clone(),
        }
    }
}

/// Arguments of `load`. Exactly one of `fixture`, `path`, `source`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadSpec {
    /// `bounded-buffer` (constants default to M=3, N=5) or an auxiliary
    /// fixture name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default)]
    pub constants: BTreeMap<String, i64>,
    /// Initial contents overriding the declarations, e.g. `{"src": [1, 2]}`.
    #[serde(default)]
    pub init: BTreeMap<String, Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub engines: Option<EngineSelection>,
    /// Engine whose restored state is adopted; defaults to dynamic-rcg when
    /// selected, else the first engine.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub primary: Option<EngineKind>,
    /// Consulted by `step` without a thread and by `continue`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Schedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retention: Option<usize>,
    /// Checkpoint lines for the checkpointing engine.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
}

impl LoadSpec {
    pub fn fixture(name: &str) -> Self {
        LoadSpec { fixture: Some(name.into()), ..Default::default() }
    }

    pub fn source(text: &str) -> Self {
        LoadSpec { source: Some(text.into()), ..Default::default() }
    }

    fn program(&self) -> Result<Program, SessionError> {
        let text = match (&self.fixture, &self.path, &self.source) {
            (Some(name), None, None) => return self.fixture_program(name),
            (None, Some(path), None) => {
                std::fs::read_to_string(path).map_err(|e| SessionError::Load(format!("{path}: {e}")))?
            }
            (None, None, Some(text)) => text.clone(),
            _ => return Err(SessionError::BadArgs("load needs exactly one of fixture, path, source".into())),
        };
        let mut program = parse_program(&text, &self.constants)?;
        self.apply_init(&mut program)?;
        Ok(program)
    }

    fn fixture_program(&self, name: &str) -> Result<Program, SessionError> {
        let mut program = if name == "bounded-buffer" {
            let m = self.constants.get("M").copied().unwrap_or(3);
            let n = self.constants.get("N").copied().unwrap_or(5);
            let src = self.init.get("src").cloned().unwrap_or_else(|| default_src(n.max(0) as usize));
            (*bounded_buffer(m, n, &src)?).clone()
        } else {
            let (_, p) = auxiliary()
                .into_iter()
                .find(|(n, _)| *n == name)
                .ok_or_else(|| SessionError::Load(format!("unknown fixture `{name}`")))?;
            (*p).clone()
        };
        self.apply_init(&mut program)?;
        Ok(program)
    }

    fn apply_init(&self, program: &mut Program) -> Result<(), SessionError> {
        for (name, values) in &self.init {
            program.set_initial(name, values).map_err(SessionError::Load)?;
        }
        Ok(())
    }

    fn engine_config(&self, program: &Program) -> Result<EngineConfig, SessionError> {
        let checkpoints = match &self.checkpoints {
            None => None,
            Some(lines) => {
                let mut ids = BTreeSet::new();
                for line in lines {
                    let at = program.state_changing_at_line(*line);
                    if at.is_empty() {
                        return Err(SessionError::UnknownLine { thread: None, line: *line });
                    }
                    ids.extend(at);
                }
                Some(set_checkpoints(program, ids)?)
            }
        };
        Ok(EngineConfig { checkpoints, retention: self.retention, budget: self.budget.unwrap_or(DEFAULT_BUDGET) })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("unknown command `{0}`")]
    UnknownCommand(String),
    #[error("no program loaded")]
    NotLoaded,
    #[error("bad arguments: {0}")]
    BadArgs(String),
    #[error("{0}")]
    Load(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Fixture(#[from] FixtureError),
    #[error("unknown thread `{0}`")]
    UnknownThread(String),
    #[error("several threads are enabled ({}); pass a thread", .0.join(", "))]
    AmbiguousThread(Vec<String>),
    #[error("no thread is enabled")]
    NoEnabledThread,
    #[error("thread `{0}` is not enabled")]
    NotEnabled(String),
    #[error("already at the origin")]
    AtOrigin,
    #[error("entry {n} is out of range (path has {len})")]
    OutOfRange { n: usize, len: usize },
    #[error("no state-changing command on line {line}{}", .thread.as_ref().map(|t| format!(" of {t}")).unwrap_or_default())]
    UnknownLine { thread: Option<String>, line: u32 },
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Back(BackError),
}

impl SessionError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::UnknownCommand(_) => "unknown-command",
            SessionError::NotLoaded => "not-loaded",
            SessionError::BadArgs(_) => "bad-args",
            SessionError::Load(_) | SessionError::Fixture(_) => "load",
            SessionError::Parse(_) => "parse",
            SessionError::UnknownThread(_) => "unknown-thread",
            SessionError::AmbiguousThread(_) => "ambiguous-thread",
            SessionError::NoEnabledThread => "no-enabled-thread",
            SessionError::NotEnabled(_) => "not-enabled",
            SessionError::AtOrigin => "at-origin",
            SessionError::OutOfRange { .. } => "out-of-range",
            SessionError::UnknownLine { .. } => "unknown-line",
            SessionError::Runtime(_) => "runtime",
            SessionError::Schedule(_) => "schedule",
            SessionError::Engine(_) | SessionError::Back(_) => "engine",
        }
    }
}

impl From<BackError> for SessionError {
    fn from(e: BackError) -> Self {
        match e {
            BackError::AtOrigin => SessionError::AtOrigin,
            e => SessionError::Back(e),
        }
    }
}

/// Unsolicited notification produced while executing a command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub event: &'static str,
    pub data: Value,
}

/// Result of a successful command.
#[derive(Debug, Clone, PartialEq)]
pub struct Reply {
    pub payload: Value,
    pub events: Vec<Event>,
}

impl Reply {
    fn new(payload: Value) -> Self {
        Reply { payload, events: Vec::new() }
    }
}

struct Loaded {
    spec: LoadSpec,
    program: Arc<Program>,
    config: EngineConfig,
    engines: Vec<EngineKind>,
    primary: EngineKind,
    timeline: Timeline,
    scheduler: Option<Scheduler>,
    /// Scheduler before each path entry, so `back` rewinds decisions too.
    history: Vec<Option<Scheduler>>,
}

impl Loaded {
    fn new(spec: LoadSpec) -> Result<Loaded, SessionError> {
        let program = Arc::new(spec.program()?);
        let config = spec.engine_config(&program)?;
        let engines = spec.engines.as_ref().map_or(EngineKind::ALL.to_vec(), EngineSelection::kinds);
        if engines.is_empty() {
            return Err(SessionError::BadArgs("at least one engine is required".into()));
        }
        let primary = match spec.primary {
            Some(p) if !engines.contains(&p) => {
                return Err(SessionError::BadArgs(format!("primary engine {p} is not selected")))
            }
            Some(p) => p,
            None if engines.contains(&EngineKind::DynamicRcg) => EngineKind::DynamicRcg,
            None => engines[0],
        };
        let mut loaded = Loaded {
            timeline: Self::timeline(&program, &config, &engines, primary)?,
            scheduler: None,
            history: Vec::new(),
            spec,
            program,
            config,
            engines,
            primary,
        };
        loaded.scheduler = loaded.fresh_scheduler();
        Ok(loaded)
    }

    fn timeline(
        program: &Arc<Program>,
        config: &EngineConfig,
        engines: &[EngineKind],
        primary: EngineKind,
    ) -> Result<Timeline, SessionError> {
        let built = engines.iter().map(|k| build(*k, program, config)).collect::<Result<Vec<_>, _>>()?;
        Ok(Timeline::new(program.clone(), built, primary))
    }

    fn fresh_scheduler(&self) -> Option<Scheduler> {
        match &self.spec.schedule {
            None | Some(Schedule::Interactive) => None,
            Some(s) => Some(Scheduler::new(s.clone())),
        }
    }

    fn reset(&mut self) -> Result<(), SessionError> {
        self.timeline = Self::timeline(&self.program, &self.config, &self.engines, self.primary)?;
        self.scheduler = self.fresh_scheduler();
        self.history.clear();
        Ok(())
    }

    fn thread(&self, name: &str) -> Result<ThreadId, SessionError> {
        self.program.thread_by_name(name).ok_or_else(|| SessionError::UnknownThread(name.into()))
    }

    fn name(&self, t: ThreadId) -> String {
        self.program.thread(t).name.clone()
    }

    /// The thread to run next and the scheduler state after choosing it.
    fn pick(&self, requested: Option<&str>) -> Result<(ThreadId, Option<Scheduler>), SessionError> {
        let enabled = self.timeline.execution().enabled_threads();
        if let Some(name) = requested {
            let t = self.thread(name)?;
            if !enabled.contains(&t) {
                return Err(SessionError::NotEnabled(name.into()));
            }
            return Ok((t, self.scheduler.clone()));
        }
        match enabled.as_slice() {
            [] => Err(SessionError::NoEnabledThread),
            [only] => Ok((*only, self.scheduler.clone())),
            _ => match &self.scheduler {
                Some(s) => {
                    let mut s = s.clone();
                    let t = s.choose(&self.program, &enabled)?;
                    Ok((t, Some(s)))
                }
                None => Err(SessionError::AmbiguousThread(enabled.iter().map(|t| self.name(*t)).collect())),
            },
        }
    }

    fn step(&mut self, thread: ThreadId, next: Option<Scheduler>, events: &mut Vec<Event>) -> Result<Value, SessionError> {
        let stepped = self.timeline.step(thread).map_err(|e| match e {
            StepError::Runtime(r) => SessionError::Runtime(r),
            StepError::NotEnabled { thread, .. } => SessionError::NotEnabled(thread),
        })?;
        self.history.push(std::mem::replace(&mut self.scheduler, next));
        self.push_events(&stepped, events);
        let entry = self.timeline.execution().path().last().expect("just stepped");
        Ok(serde_json::to_value(entry.view(&self.program)).expect("views serialize"))
    }

    fn push_events(&self, stepped: &Stepped, events: &mut Vec<Event>) {
        let p = &self.program;
        if let Some(s) = stepped.switch {
            events.push(Event {
                event: "switch",
                data: json!({ "seq": s.seq, "from": s.from.map(|t| self.name(t)), "to": self.name(s.to) }),
            });
        }
        for b in &stepped.blocks {
            events.push(Event {
                event: "block-entry",
                data: json!({
                    "step": b.step,
                    "thread": self.name(b.thread),
                    "block": b.block.0,
                    "line": p.command(b.block).line,
                }),
            });
        }
        let exec = self.timeline.execution();
        match outcome_of(p, exec.machine()) {
            Some(Outcome::Terminated) => events.push(Event { event: "terminated", data: json!({ "position": exec.len() }) }),
            Some(Outcome::Deadlock { blocked }) => {
                events.push(Event { event: "deadlock", data: json!({ "position": exec.len(), "blocked": blocked }) })
            }
            None => {}
        }
    }

    fn back(&mut self) -> Result<Value, SessionError> {
        let entry = self.timeline.back()?;
        self.scheduler = self.history.pop().expect("history follows the path");
        Ok(serde_json::to_value(entry.view(&self.program)).expect("views serialize"))
    }

    fn outcome(&self) -> Value {
        match outcome_of(&self.program, self.timeline.execution().machine()) {
            None => Value::Null,
            Some(Outcome::Terminated) => json!("terminated"),
            Some(Outcome::Deadlock { blocked }) => json!({ "deadlock": blocked }),
        }
    }

    fn state(&self) -> Value {
        let p = &self.program;
        let machine = self.timeline.execution().machine();
        let vars: Vec<Value> = p
            .vars()
            .map(|(_, v)| {
                let cells = &machine.values()[v.offset..v.offset + v.len];
                let value = if v.is_array { json!(cells) } else { json!(cells[0]) };
                json!({ "name": v.decl.name, "scope": v.owner.map(|t| self.name(t)), "value": value })
            })
            .collect();
        let threads: Vec<Value> = p
            .thread_ids()
            .map(|t| {
                json!({
                    "name": self.name(t),
                    "status": machine.status(p, t),
                    "line": machine.pending_line(p, t),
                })
            })
            .collect();
        json!({
            "position": self.timeline.execution().len(),
            "vars": vars,
            "threads": threads,
            "outcome": self.outcome(),
        })
    }

    fn enabled(&self) -> Value {
        let names: Vec<String> = self.timeline.execution().enabled_threads().into_iter().map(|t| self.name(t)).collect();
        json!(names)
    }

    /// Checks that the log alone reproduces the current state.
    #[cfg(debug_assertions)]
    fn check_consistency(&self) {
        let exec = self.timeline.execution();
        let replayed = crate::interp::replay(&self.program, exec.log(), exec.len()).expect("log replays");
        debug_assert_eq!(&replayed, exec.machine(), "session state diverged from its log");
    }
}

/// A debugging session: one loaded program, its engines and breakpoints.
/// Breakpoints are `(thread, line)` pairs and stop `continue` before the
/// pending command on that line changes any state.
#[derive(Default)]
pub struct Session {
    loaded: Option<Loaded>,
    breakpoints: BTreeSet<(ThreadId, u32)>,
}

impl Session {
    pub fn new() -> Self {
        Session::default()
    }

    pub fn with_program(spec: LoadSpec) -> Result<Self, SessionError> {
        let mut s = Session::new();
        s.load(spec)?;
        Ok(s)
    }

    pub fn is_loaded(&self) -> bool {
        self.loaded.is_some()
    }

    pub fn program(&self) -> Option<&Arc<Program>> {
        self.loaded.as_ref().map(|l| &l.program)
    }

    pub fn timeline(&self) -> Option<&Timeline> {
        self.loaded.as_ref().map(|l| &l.timeline)
    }

    pub fn load(&mut self, spec: LoadSpec) -> Result<Value, SessionError> {
        let loaded = Loaded::new(spec)?;
        let summary = json!({
            "threads": loaded.program.threads().iter().map(|t| t.name.clone()).collect::<Vec<_>>(),
            "engines": loaded.engines,
            "primary": loaded.primary,
            "state_size": loaded.program.state_size(),
            "state": loaded.state(),
        });
        self.loaded = Some(loaded);
        self.breakpoints.clear();
        Ok(summary)
    }

    /// Runs one command. `args` is `null` or an object.
    pub fn execute(&mut self, cmd: &str, args: &Value) -> Result<Reply, SessionError> {
        let reply = self.dispatch(cmd, args)?;
        #[cfg(debug_assertions)]
        if let Some(l) = &self.loaded {
            l.check_consistency();
        }
        Ok(reply)
    }

    fn dispatch(&mut self, cmd: &str, args: &Value) -> Result<Reply, SessionError> {
        if cmd == "load" {
            let spec: LoadSpec = serde_json::from_value(args.clone()).map_err(|e| SessionError::BadArgs(e.to_string()))?;
            return self.load(spec).map(Reply::new);
        }
        if !KNOWN.contains(&cmd) {
            return Err(SessionError::UnknownCommand(cmd.into()));
        }
        let loaded = self.loaded.as_mut().ok_or(SessionError::NotLoaded)?;
        match cmd {
            "step" => {
                let mut events = Vec::new();
                let (t, next) = loaded.pick(str_arg(args, "thread")?)?;
                let entry = loaded.step(t, next, &mut events)?;
                Ok(Reply { payload: json!({ "entry": entry, "state": loaded.state() }), events })
            }
            "back" => {
                let count = usize_arg(args, "count")?.unwrap_or(1);
                if count > loaded.timeline.execution().len() {
                    return Err(SessionError::AtOrigin);
                }
                let undone = (0..count).map(|_| loaded.back()).collect::<Result<Vec<_>, _>>()?;
                Ok(Reply::new(json!({ "undone": undone, "state": loaded.state() })))
            }
            "state" => Ok(Reply::new(loaded.state())),
            "enabled" => Ok(Reply::new(loaded.enabled())),
            "revcode" => {
                let path = loaded.timeline.execution().path();
                let n = usize_arg(args, "seq")?.unwrap_or(path.len());
                let reversal = gen_reverse(&loaded.program, path, n, loaded.config.budget).map_err(|e| match e {
                    RevgenError::OutOfRange { n, len } => SessionError::OutOfRange { n, len },
                })?;
                let entry = path[n - 1].view(&loaded.program);
                Ok(Reply::new(match reversal {
                    Reversal::Code(code) => {
                        json!({ "seq": n, "entry": entry, "status": "code", "code": code.view(&loaded.program) })
                    }
                    Reversal::NeedsStateSaving => json!({ "seq": n, "entry": entry, "status": "needs-state-saving" }),
                }))
            }
            "mem" => {
                let exec = loaded.timeline.execution();
                Ok(Reply::new(json!({
                    "position": exec.len(),
                    "aux_log_ints": exec.log().size_ints(),
                    "ledgers": loaded.timeline.ledgers(),
                })))
            }
            "path" => {
                let exec = loaded.timeline.execution();
                let entries: Vec<_> = exec.path().iter().map(|e| e.view(&loaded.program)).collect();
                Ok(Reply::new(json!({ "entries": entries, "log": exec.log().view(&loaded.program) })))
            }
            "break" => {
                if let (Some(name), Some(line)) = (str_arg(args, "thread")?, usize_arg(args, "line")?) {
                    let t = loaded.thread(name)?;
                    let line = line as u32;
                    if bool_arg(args, "remove")? {
                        self.breakpoints.remove(&(t, line));
                    } else {
                        if loaded.program.commands_at_line(t, line).is_empty() {
                            return Err(SessionError::UnknownLine { thread: Some(name.into()), line });
                        }
                        self.breakpoints.insert((t, line));
                    }
                } else if bool_arg(args, "clear")? {
                    self.breakpoints.clear();
                } else if !args.is_null() && args.as_object().is_some_and(|o| !o.is_empty()) {
                    return Err(SessionError::BadArgs("break takes {thread, line[, remove]} or {clear}".into()));
                }
                let list: Vec<Value> =
                    self.breakpoints.iter().map(|(t, l)| json!({ "thread": loaded.name(*t), "line": l })).collect();
                Ok(Reply::new(json!(list)))
            }
            "continue" => {
                let mut events = Vec::new();
                let mut steps = 0;
                let reason = loop {
                    if steps == CONTINUE_LIMIT {
                        break json!("limit");
                    }
                    let (t, next) = match loaded.pick(None) {
                        Ok(choice) => choice,
                        Err(SessionError::NoEnabledThread) => break loaded.outcome(),
                        Err(SessionError::AmbiguousThread(_) | SessionError::Schedule(ScheduleError::Exhausted { .. }))
                            if steps > 0 =>
                        {
                            break json!("choice-required")
                        }
                        Err(e) => return Err(e),
                    };
                    let machine = loaded.timeline.execution().machine();
                    if let Some(line) = machine.pending_line(&loaded.program, t) {
                        if steps > 0 && self.breakpoints.contains(&(t, line)) {
                            break json!({ "breakpoint": { "thread": loaded.name(t), "line": line } });
                        }
                    }
                    loaded.step(t, next, &mut events)?;
                    steps += 1;
                };
                Ok(Reply { payload: json!({ "steps": steps, "reason": reason, "state": loaded.state() }), events })
            }
            "reset" => {
                loaded.reset()?;
                Ok(Reply::new(loaded.state()))
            }
            _ => unreachable!("checked against KNOWN"),
        }
    }
}

/// Commands other than `load`.
const KNOWN: [&str; 10] = ["step", "back", "state", "enabled", "revcode", "mem", "path", "break", "continue", "reset"];

fn field<'a>(args: &'a Value, key: &str) -> Option<&'a Value> {
    args.get(key).filter(|v| !v.is_null())
}

fn str_arg<'a>(args: &'a Value, key: &str) -> Result<Option<&'a str>, SessionError> {
    field(args, key)
        .map(|v| v.as_str().ok_or_else(|| SessionError::BadArgs(format!("`{key}` must be a string"))))
        .transpose()
}

fn usize_arg(args: &Value, key: &str) -> Result<Option<usize>, SessionError> {
    field(args, key)
        .map(|v| {
            v.as_u64()
                .map(|n| n as usize)
                .ok_or_else(|| SessionError::BadArgs(format!("`{key}` must be a non-negative integer")))
        })
        .transpose()
}

fn bool_arg(args: &Value, key: &str) -> Result<bool, SessionError> {
    field(args, key)
        .map(|v| v.as_bool().ok_or_else(|| SessionError::BadArgs(format!("`{key}` must be a boolean"))))
        .transpose()
        .map(|b| b.unwrap_or(false))
}
