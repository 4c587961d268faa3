use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lang::{BinOp, CmpOp, CommandKind, Cond, Expr, Program, Target, ThreadId, VarId};

/// A concrete storage location: a scalar, or one cell of an array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Loc {
    Var(VarId),
    Cell(VarId, usize),
}

impl Loc {
    pub fn var(self) -> VarId {
        match self {
            Loc::Var(v) | Loc::Cell(v, _) => v,
        }
    }

    pub fn slot(self, program: &Program) -> usize {
        match self {
            Loc::Var(v) => program.var(v).offset,
            Loc::Cell(v, i) => program.var(v).offset + i,
        }
    }

    /// Inverse of [`Loc::slot`].
    pub fn from_slot(program: &Program, slot: usize) -> Loc {
        let (id, info) = program
            .vars()
            .find(|(_, v)| slot >= v.offset && slot < v.offset + v.len)
            .expect("slot within state vector");
        if info.is_array {
            Loc::Cell(id, slot - info.offset)
        } else {
            Loc::Var(id)
        }
    }

    pub fn display<'p>(self, program: &'p Program) -> LocDisplay<'p> {
        LocDisplay { loc: self, program }
    }

    /// Expression that reads this location.
    pub fn to_expr(self) -> Expr {
        match self {
            Loc::Var(v) => Expr::Var(v),
            Loc::Cell(v, i) => Expr::Index(v, Box::new(Expr::Lit(i as i64))),
        }
    }
}

pub struct LocDisplay<'p> {
    loc: Loc,
    program: &'p Program,
}

impl fmt::Display for LocDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.loc {
            Loc::Var(v) => f.write_str(self.program.var_name(v)),
            Loc::Cell(v, i) => write!(f, "{}[{i}]", self.program.var_name(v)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
pub enum RuntimeError {
    #[error("arithmetic overflow in `{0}`")]
    Overflow(&'static str),
    #[error("division by zero")]
    DivisionByZero,
    #[error("remainder by zero")]
    RemainderByZero,
    #[error("index {index} out of bounds for `{array}` of length {len}")]
    IndexOutOfBounds { array: String, index: i64, len: usize },
    #[error("thread `{0}` runs control flow forever without changing state")]
    Livelock(String),
}

/// Status of a thread as seen from the current state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThreadStatus {
    Runnable,
    Blocked,
    Finished,
}

/// Full debuggee state: every declared slot plus, per thread, where
/// control resumes (the successor of the last state-changing command the
/// thread executed).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Machine {
    values: Vec<i64>,
    next: Vec<Target>,
}

pub(crate) const CONTROL_FUEL: usize = 100_000;

/// Result of walking a thread's control flow up to its next atomic action.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Lookahead {
    /// The pending state-changing command, or `None` when the thread has
    /// run off its end.
    pub pending: Option<crate::lang::CmdId>,
    /// Blocks entered on the way.
    pub blocks: Vec<crate::lang::CmdId>,
}

impl Machine {
    /// Every declared location at its initial value; every thread at its
    /// body entry.
    pub fn new(program: &Program) -> Machine {
        let mut values = vec![0; program.state_size()];
        for (_, v) in program.vars() {
            values[v.offset..v.offset + v.len].copy_from_slice(&v.initial);
        }
        let next = program.threads().iter().map(|t| Target::Cmd(t.body.id)).collect();
        Machine { values, next }
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    pub fn get(&self, program: &Program, loc: Loc) -> i64 {
        self.values[loc.slot(program)]
    }

    pub fn set(&mut self, program: &Program, loc: Loc, value: i64) {
        self.values[loc.slot(program)] = value;
    }

    pub(crate) fn set_values(&mut self, values: &[i64]) {
        self.values.copy_from_slice(values);
    }

    pub fn control(&self, thread: ThreadId) -> Target {
        self.next[thread.0]
    }

    pub(crate) fn set_control(&mut self, thread: ThreadId, target: Target) {
        self.next[thread.0] = target;
    }

    pub fn eval(&self, program: &Program, e: &Expr) -> Result<i64, RuntimeError> {
        Ok(match e {
            Expr::Lit(n) => *n,
            Expr::Const { value, .. } => *value,
            Expr::Var(v) => self.values[program.var(*v).offset],
            Expr::Index(v, idx) => {
                let i = self.eval(program, idx)?;
                let info = program.var(*v);
                let i = check_index(program, *v, i)?;
                self.values[info.offset + i]
            }
            Expr::Bin(op, l, r) => apply(*op, self.eval(program, l)?, self.eval(program, r)?)?,
        })
    }

    pub fn eval_cond(&self, program: &Program, c: &Cond) -> Result<bool, RuntimeError> {
        Ok(match c {
            Cond::True => true,
            Cond::False => false,
            Cond::Not(inner) => !self.eval_cond(program, inner)?,
            Cond::Cmp(op, l, r) => {
                let (a, b) = (self.eval(program, l)?, self.eval(program, r)?);
                match op {
                    CmpOp::Eq => a == b,
                    CmpOp::Ne => a != b,
                    CmpOp::Lt => a < b,
                    CmpOp::Le => a <= b,
                    CmpOp::Gt => a > b,
                    CmpOp::Ge => a >= b,
                }
            }
        })
    }

    /// The array cell `v[idx]` under the current state.
    pub fn cell(&self, program: &Program, v: VarId, idx: &Expr) -> Result<Loc, RuntimeError> {
        Ok(Loc::Cell(v, check_index(program, v, self.eval(program, idx)?)?))
    }

    /// Replaces every index expression with its current value, producing
    /// an expression whose reads are all concrete locations.
    pub fn concretize(&self, program: &Program, e: &Expr) -> Result<Expr, RuntimeError> {
        Ok(match e {
            Expr::Lit(_) | Expr::Const { .. } | Expr::Var(_) => e.clone(),
            Expr::Index(v, idx) => {
                let i = check_index(program, *v, self.eval(program, idx)?)?;
                Expr::Index(*v, Box::new(Expr::Lit(i as i64)))
            }
            Expr::Bin(op, l, r) => Expr::bin(*op, self.concretize(program, l)?, self.concretize(program, r)?),
        })
    }

    /// Walks `thread`'s control flow from its resume point to the next
    /// state-changing command without mutating anything.
    pub(crate) fn look_ahead(&self, program: &Program, thread: ThreadId) -> Result<Lookahead, RuntimeError> {
        let mut blocks = Vec::new();
        let mut at = self.next[thread.0];
        let root = program.thread(thread).body.id;
        for _ in 0..CONTROL_FUEL {
            let id = match at {
                Target::End => return Ok(Lookahead { pending: None, blocks }),
                Target::Cmd(id) => id,
            };
            if id == root {
                blocks.push(id);
            }
            let cmd = program.command(id);
            let succ = program.node(id).succ;
            at = match &cmd.kind {
                CommandKind::Assign { .. } | CommandKind::Wait(_) | CommandKind::Signal(_) => {
                    return Ok(Lookahead { pending: Some(id), blocks })
                }
                CommandKind::Skip => succ,
                CommandKind::Seq(children) => children.first().map_or(succ, |c| Target::Cmd(c.id)),
                CommandKind::If { guard, then, els } => {
                    let arm = if self.eval_cond(program, guard)? { then.id } else { els.id };
                    blocks.push(arm);
                    Target::Cmd(arm)
                }
                CommandKind::While { guard, body } => {
                    if self.eval_cond(program, guard)? {
                        blocks.push(body.id);
                        Target::Cmd(body.id)
                    } else {
                        blocks.push(id);
                        succ
                    }
                }
            };
        }
        Err(RuntimeError::Livelock(program.thread(thread).name.clone()))
    }

    pub fn status(&self, program: &Program, thread: ThreadId) -> ThreadStatus {
        match self.look_ahead(program, thread) {
            Ok(Lookahead { pending: None, .. }) => ThreadStatus::Finished,
            Ok(Lookahead { pending: Some(id), .. }) => match program.command(id).kind {
                CommandKind::Wait(s) if self.values[program.var(s).offset] <= 0 => ThreadStatus::Blocked,
                _ => ThreadStatus::Runnable,
            },
            // surfaced when the thread is stepped
            Err(_) => ThreadStatus::Runnable,
        }
    }

    /// Source line of the thread's pending state-changing command.
    pub fn pending_line(&self, program: &Program, thread: ThreadId) -> Option<u32> {
        self.look_ahead(program, thread)
            .ok()
            .and_then(|l| l.pending)
            .map(|id| program.command(id).line)
    }

    pub fn enabled_threads(&self, program: &Program) -> Vec<ThreadId> {
        program
            .thread_ids()
            .filter(|t| self.status(program, *t) == ThreadStatus::Runnable)
            .collect()
    }

    pub fn all_finished(&self, program: &Program) -> bool {
        program.thread_ids().all(|t| self.status(program, t) == ThreadStatus::Finished)
    }
}

fn check_index(program: &Program, v: VarId, i: i64) -> Result<usize, RuntimeError> {
    let info = program.var(v);
    if i < 0 || i as usize >= info.len {
        return Err(RuntimeError::IndexOutOfBounds { array: info.decl.name.clone(), index: i, len: info.len });
    }
    Ok(i as usize)
}

/// Checked 64-bit arithmetic; `/` and `%` truncate toward zero.
pub fn apply(op: BinOp, a: i64, b: i64) -> Result<i64, RuntimeError> {
    match op {
        BinOp::Add => a.checked_add(b).ok_or(RuntimeError::Overflow("+")),
        BinOp::Sub => a.checked_sub(b).ok_or(RuntimeError::Overflow("-")),
        BinOp::Mul => a.checked_mul(b).ok_or(RuntimeError::Overflow("*")),
        BinOp::Div if b == 0 => Err(RuntimeError::DivisionByZero),
        BinOp::Div => a.checked_div(b).ok_or(RuntimeError::Overflow("/")),
        BinOp::Rem if b == 0 => Err(RuntimeError::RemainderByZero),
        BinOp::Rem => a.checked_rem(b).ok_or(RuntimeError::Overflow("%")),
    }
}

/// Concrete locations read by a concretized expression.
pub fn reads(e: &Expr) -> Vec<Loc> {
    let mut out = Vec::new();
    collect(e, &mut out);
    out
}

fn collect(e: &Expr, out: &mut Vec<Loc>) {
    match e {
        Expr::Lit(_) | Expr::Const { .. } => {}
        Expr::Var(v) => push_unique(out, Loc::Var(*v)),
        Expr::Index(v, idx) => match **idx {
            Expr::Lit(i) if i >= 0 => push_unique(out, Loc::Cell(*v, i as usize)),
            _ => collect(idx, out),
        },
        Expr::Bin(_, l, r) => {
            collect(l, out);
            collect(r, out);
        }
    }
}

fn push_unique(out: &mut Vec<Loc>, loc: Loc) {
    if !out.contains(&loc) {
        out.push(loc);
    }
}
