//! Reverse-code generation from a concrete execution path.
//!
//! The generator answers one question recursively: "which expression,
//! evaluated in the current state, yields the value location `l` held just
//! after entry `t`?" It never looks at runtime values, only at the path
//! (concretized commands) and the program's declarations.
//!
//! Techniques, tried in order for each (location, time) query:
//! - the location is not written after `t`: its current value is the answer;
//! - self-inverse: the first later write is an invertible self-defined
//!   assignment (`x := x + 1`, semaphore operations), so invert it;
//! - redefine: re-evaluate the reaching definition, each operand queried at
//!   the definition's time (declarations act as initializing definitions);
//! - extract-from-use: a later command `y := f(l, ..)` read `l` in an
//!   invertible form, so `l = f⁻¹(y, ..)`.
//!
//! A location already being resolved further up the recursion is not
//! re-entered, and a budget bounds the number of technique applications.
//! When every route fails the entry needs state saving.

mod classify;
mod forms;

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::interp::{Loc, Machine, PathEntry, RuntimeError};
use crate::lang::{expr_to_string, Expr, Program};

pub use classify::{classify_static, static_reverse, StaticClass};

/// Default number of technique applications per generation.
pub const DEFAULT_BUDGET: usize = 64;

/// The definition of a location that reaches a point of the path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Definition {
    /// The declaration's initializer.
    Init,
    At(usize),
}

/// Greatest `r < before` with `lhs(ε(r)) = target`, or the initializing
/// definition. Array cells match on concrete index.
pub fn reaching_definition(path: &[PathEntry], target: Loc, before: usize) -> Definition {
    path[..before.saturating_sub(1).min(path.len())]
        .iter()
        .rev()
        .find(|e| e.lhs == target)
        .map_or(Definition::Init, |e| Definition::At(e.seq))
}

/// How a value was recovered.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "technique", rename_all = "kebab-case")]
pub enum Provenance {
    /// Not modified since: read it from the current state.
    Current { loc: String },
    InitDef { loc: String, value: i64 },
    Redefine { loc: String, seq: usize, line: u32, operands: Vec<Provenance> },
    SelfInverse { loc: String, seq: usize, line: u32, operands: Vec<Provenance> },
    ExtractFromUse { loc: String, seq: usize, line: u32, operands: Vec<Provenance> },
}

impl Provenance {
    pub fn technique(&self) -> &'static str {
        match self {
            Provenance::Current { .. } => "current",
            Provenance::InitDef { .. } => "init-def",
            Provenance::Redefine { .. } => "redefine",
            Provenance::SelfInverse { .. } => "self-inverse",
            Provenance::ExtractFromUse { .. } => "extract-from-use",
        }
    }

    fn summary(&self) -> String {
        match self {
            Provenance::Current { loc } => format!("{loc}: current value"),
            Provenance::InitDef { loc, value } => format!("{loc}: declared initial value {value}"),
            Provenance::Redefine { loc, seq, line, .. } => {
                format!("{loc}: redefine from entry {seq} (line {line})")
            }
            Provenance::SelfInverse { loc, seq, line, .. } => {
                format!("{loc}: invert self-defined entry {seq} (line {line})")
            }
            Provenance::ExtractFromUse { loc, seq, line, .. } => {
                format!("{loc}: extract from use at entry {seq} (line {line})")
            }
        }
    }

    fn operands(&self) -> &[Provenance] {
        match self {
            Provenance::Current { .. } | Provenance::InitDef { .. } => &[],
            Provenance::Redefine { operands, .. }
            | Provenance::SelfInverse { operands, .. }
            | Provenance::ExtractFromUse { operands, .. } => operands,
        }
    }

    fn write_tree(&self, depth: usize, out: &mut String) {
        out.push_str(&format!("//{} {}\n", "  ".repeat(depth + 1), self.summary()));
        for op in self.operands() {
            op.write_tree(depth + 1, out);
        }
    }
}

/// One concretized reverse assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReverseStep {
    pub lhs: Loc,
    pub rhs: Expr,
}

/// Reverse code for entry `seq`, to be executed in the state just after it.
/// The reference generator fuses everything into at most one assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReverseCode {
    pub seq: usize,
    pub target: Loc,
    pub steps: Vec<ReverseStep>,
    pub provenance: Provenance,
}

impl ReverseCode {
    /// Source-language text, one assignment per line, each followed by the
    /// provenance tree as comments.
    pub fn render(&self, program: &Program) -> String {
        let mut out = String::new();
        if self.steps.is_empty() {
            out.push_str(&format!("skip // {} unchanged by entry {}\n", self.target.display(program), self.seq));
        }
        for s in &self.steps {
            out.push_str(&format!(
                "{} := {} // {}\n",
                s.lhs.display(program),
                expr_to_string(program, &s.rhs),
                self.provenance.technique()
            ));
            self.provenance.write_tree(0, &mut out);
        }
        out
    }

    /// Number of assignments held in memory for this code.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn view(&self, program: &Program) -> ReverseCodeView {
        ReverseCodeView {
            seq: self.seq,
            target: self.target.display(program).to_string(),
            steps: self
                .steps
                .iter()
                .map(|s| ReverseStepView {
                    lhs: s.lhs.display(program).to_string(),
                    rhs: expr_to_string(program, &s.rhs),
                })
                .collect(),
            provenance: self.provenance.clone(),
            text: self.render(program),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReverseStepView {
    pub lhs: String,
    pub rhs: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReverseCodeView {
    pub seq: usize,
    pub target: String,
    pub steps: Vec<ReverseStepView>,
    pub provenance: Provenance,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reversal {
    Code(ReverseCode),
    NeedsStateSaving,
}

impl Reversal {
    pub fn code(&self) -> Option<&ReverseCode> {
        match self {
            Reversal::Code(c) => Some(c),
            Reversal::NeedsStateSaving => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RevgenError {
    #[error("entry {n} is outside the path (length {len})")]
    OutOfRange { n: usize, len: usize },
}

/// Generates reverse code for `ε(n)`, considering only `path[..n]`.
pub fn gen_reverse(program: &Program, path: &[PathEntry], n: usize, budget: usize) -> Result<Reversal, RevgenError> {
    if n == 0 || n > path.len() {
        return Err(RevgenError::OutOfRange { n, len: path.len() });
    }
    let target = path[n - 1].lhs;
    let mut gen = Generator::new(program, &path[..n], budget);
    Ok(match gen.value(target, n - 1) {
        None => Reversal::NeedsStateSaving,
        Some(node) => {
            let steps = if node.expr == target.to_expr() {
                Vec::new()
            } else {
                vec![ReverseStep { lhs: target, rhs: node.expr }]
            };
            Reversal::Code(ReverseCode { seq: n, target, steps, provenance: node.prov })
        }
    })
}

/// Runs reverse code in place. An arithmetic error here means the code was
/// wrong; it is surfaced, never absorbed.
pub fn execute_reverse(program: &Program, machine: &mut Machine, code: &ReverseCode) -> Result<(), RuntimeError> {
    for step in &code.steps {
        let v = machine.eval(program, &step.rhs)?;
        machine.set(program, step.lhs, v);
    }
    Ok(())
}

/// `f⁻¹(y)` for `f` a composition of the invertible forms in `x`, with
/// every other operand read as it is. `None` when `f` is not invertible
/// in `x`.
pub fn invert_form(f: &Expr, x: Loc, y: Expr) -> Option<Expr> {
    let layers = forms::peel(f, x)?;
    forms::invert(&layers, y, |o| Some(o.clone()))
}

struct Node {
    expr: Expr,
    prov: Provenance,
}

struct Generator<'a> {
    program: &'a Program,
    path: &'a [PathEntry],
    writes: HashMap<Loc, Vec<usize>>,
    budget: usize,
    resolving: Vec<Loc>,
}

impl<'a> Generator<'a> {
    fn new(program: &'a Program, path: &'a [PathEntry], budget: usize) -> Self {
        let mut writes: HashMap<Loc, Vec<usize>> = HashMap::new();
        for e in path {
            writes.entry(e.lhs).or_default().push(e.seq);
        }
        Generator { program, path, writes, budget, resolving: Vec::new() }
    }

    fn entry(&self, seq: usize) -> &'a PathEntry {
        &self.path[seq - 1]
    }

    fn name(&self, loc: Loc) -> String {
        loc.display(self.program).to_string()
    }

    fn first_write_after(&self, loc: Loc, t: usize) -> Option<usize> {
        let ws = self.writes.get(&loc)?;
        ws.get(ws.partition_point(|&s| s <= t)).copied()
    }

    fn last_write_upto(&self, loc: Loc, t: usize) -> Option<usize> {
        let ws = self.writes.get(&loc)?;
        ws[..ws.partition_point(|&s| s <= t)].last().copied()
    }

    fn current(&self, loc: Loc) -> Node {
        Node { expr: loc.to_expr(), prov: Provenance::Current { loc: self.name(loc) } }
    }

    /// Expression for the value `loc` held just after entry `t`.
    fn value(&mut self, loc: Loc, t: usize) -> Option<Node> {
        if self.first_write_after(loc, t).is_none() {
            return Some(self.current(loc));
        }
        if self.resolving.contains(&loc) {
            return None;
        }
        self.resolving.push(loc);
        let found = self.resolve(loc, t);
        self.resolving.pop();
        found
    }

    /// Like [`Generator::value`] for a location already being resolved.
    fn value_again(&mut self, loc: Loc, t: usize) -> Option<Node> {
        if self.first_write_after(loc, t).is_none() {
            return Some(self.current(loc));
        }
        self.resolve(loc, t)
    }

    fn resolve(&mut self, loc: Loc, t: usize) -> Option<Node> {
        if self.budget == 0 {
            return None;
        }
        self.budget -= 1;
        let w = self.first_write_after(loc, t)?;
        if let Some(node) = self.self_inverse(loc, w) {
            return Some(node);
        }
        if let Some(node) = self.redefine(loc, t) {
            return Some(node);
        }
        self.extract_from_use(loc, t, w)
    }

    /// `loc` before `w` from `loc` after `w`, when `w` is `loc := f(loc)`
    /// with `f` invertible.
    fn self_inverse(&mut self, loc: Loc, w: usize) -> Option<Node> {
        let entry = self.entry(w);
        let layers = forms::peel(&entry.rhs, loc)?;
        let after = self.value_again(loc, w)?;
        let mut operands = vec![after.prov];
        let expr = forms::invert(&layers, after.expr, |o| {
            let (e, provs) = self.substitute(o, w - 1)?;
            operands.extend(provs);
            Some(e)
        })?;
        let prov = Provenance::SelfInverse { loc: self.name(loc), seq: w, line: entry.line, operands };
        Some(Node { expr, prov })
    }

    fn redefine(&mut self, loc: Loc, t: usize) -> Option<Node> {
        let Some(r) = self.last_write_upto(loc, t) else {
            let value = self.initial(loc);
            return Some(Node { expr: Expr::Lit(value), prov: Provenance::InitDef { loc: self.name(loc), value } });
        };
        let entry = self.entry(r);
        let (expr, operands) = self.substitute(&entry.rhs, r - 1)?;
        Some(Node { expr, prov: Provenance::Redefine { loc: self.name(loc), seq: r, line: entry.line, operands } })
    }

    /// Looks for `u` in `(r, w]`, latest first, where `ε(u) = y := f(loc, ..)`
    /// with `f` invertible in `loc`. `loc` is constant over `[r, w)`, so its
    /// value just before `u` is the one sought.
    fn extract_from_use(&mut self, loc: Loc, t: usize, w: usize) -> Option<Node> {
        let r = self.last_write_upto(loc, t).unwrap_or(0);
        for u in (r + 1..=w).rev() {
            let entry = self.entry(u);
            if entry.lhs == loc {
                continue;
            }
            let Some(layers) = forms::peel(&entry.rhs, loc) else { continue };
            if self.budget == 0 {
                return None;
            }
            let Some(y) = self.value(entry.lhs, u) else { continue };
            let mut operands = vec![y.prov];
            let inverted = forms::invert(&layers, y.expr, |o| {
                let (e, provs) = self.substitute(o, u - 1)?;
                operands.extend(provs);
                Some(e)
            });
            if let Some(expr) = inverted {
                let prov = Provenance::ExtractFromUse { loc: self.name(loc), seq: u, line: entry.line, operands };
                return Some(Node { expr, prov });
            }
        }
        None
    }

    /// Rewrites `e` so every read yields its value just after entry `t`.
    fn substitute(&mut self, e: &Expr, t: usize) -> Option<(Expr, Vec<Provenance>)> {
        let mut provs = Vec::new();
        let expr = self.substitute_into(e, t, &mut provs)?;
        Some((expr, provs))
    }

    fn substitute_into(&mut self, e: &Expr, t: usize, provs: &mut Vec<Provenance>) -> Option<Expr> {
        let read = |loc: Loc, this: &mut Self, provs: &mut Vec<Provenance>| {
            let node = this.value(loc, t)?;
            provs.push(node.prov);
            Some(node.expr)
        };
        match e {
            Expr::Lit(_) | Expr::Const { .. } => Some(e.clone()),
            Expr::Var(v) => read(Loc::Var(*v), self, provs),
            Expr::Index(v, idx) => match **idx {
                Expr::Lit(i) if i >= 0 => read(Loc::Cell(*v, i as usize), self, provs),
                // path entries are concretized
                _ => None,
            },
            Expr::Bin(op, l, r) => {
                let l = self.substitute_into(l, t, provs)?;
                let r = self.substitute_into(r, t, provs)?;
                Some(Expr::bin(*op, l, r))
            }
        }
    }

    fn initial(&self, loc: Loc) -> i64 {
        match loc {
            Loc::Var(v) => self.program.var(v).initial[0],
            Loc::Cell(v, i) => self.program.var(v).initial[i],
        }
    }
}

#[cfg(test)]
mod tests;
