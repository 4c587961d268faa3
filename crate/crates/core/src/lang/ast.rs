//! Syntax tree of the minimal concurrent language.
//!
//! Variables are resolved to [`VarId`]s at parse time, so a tree is only
//! meaningful together with the [`Program`] that owns its variable table.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ThreadId(pub usize);

/// Pre-order index of a command node, counted across all threads in
/// declaration order. Identical source text always yields identical ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CmdId(pub u32);

impl fmt::Display for CmdId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SizeSpec {
    Literal(usize),
    Constant(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScalarInit {
    Literal(i64),
    Constant(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Initializer {
    Scalar(ScalarInit),
    List(Vec<i64>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DeclKind {
    Scalar,
    Array(SizeSpec),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Declaration {
    pub name: String,
    pub kind: DeclKind,
    pub init: Option<Initializer>,
    pub line: u32,
}

/// A declared variable with its storage resolved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarInfo {
    pub decl: Declaration,
    /// `None` for globals.
    pub owner: Option<ThreadId>,
    /// First slot of this variable in the flat state vector.
    pub offset: usize,
    /// 1 for scalars, the bound size for arrays.
    pub len: usize,
    pub is_array: bool,
    /// Initial value of each slot.
    pub initial: Vec<i64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
        }
    }

    pub(crate) fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

/// Arithmetic expression.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Lit(i64),
    Const { name: String, value: i64 },
    Var(VarId),
    Index(VarId, Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn bin(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Bin(op, Box::new(lhs), Box::new(rhs))
    }

    /// Visits every variable occurrence, including those inside index
    /// expressions.
    pub fn for_each_var(&self, f: &mut impl FnMut(VarId)) {
        match self {
            Expr::Lit(_) | Expr::Const { .. } => {}
            Expr::Var(v) => f(*v),
            Expr::Index(v, idx) => {
                f(*v);
                idx.for_each_var(f);
            }
            Expr::Bin(_, l, r) => {
                l.for_each_var(f);
                r.for_each_var(f);
            }
        }
    }
}

/// Boolean guard. Only appears in `if`/`while`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Cond {
    True,
    False,
    Not(Box<Cond>),
    Cmp(CmpOp, Expr, Expr),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LValue {
    Var(VarId),
    Index(VarId, Expr),
}

impl LValue {
    pub fn var(&self) -> VarId {
        match self {
            LValue::Var(v) | LValue::Index(v, _) => *v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Command {
    pub id: CmdId,
    pub line: u32,
    pub kind: CommandKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CommandKind {
    Assign { lhs: LValue, rhs: Expr },
    Skip,
    Seq(Vec<Command>),
    If { guard: Cond, then: Box<Command>, els: Box<Command> },
    While { guard: Cond, body: Box<Command> },
    Wait(VarId),
    Signal(VarId),
}

impl Command {
    /// Pre-order walk over this node and all descendants.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Command)) {
        f(self);
        match &self.kind {
            CommandKind::Seq(children) => children.iter().for_each(|c| c.walk(f)),
            CommandKind::If { then, els, .. } => {
                then.walk(f);
                els.walk(f);
            }
            CommandKind::While { body, .. } => body.walk(f),
            _ => {}
        }
    }

    pub fn is_state_changing(&self) -> bool {
        matches!(
            self.kind,
            CommandKind::Assign { .. } | CommandKind::Wait(_) | CommandKind::Signal(_)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThreadDef {
    pub name: String,
    pub locals: Vec<VarId>,
    pub body: Command,
    pub line: u32,
}

/// Where control goes once a command has completed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Target {
    Cmd(CmdId),
    End,
}

/// Per-command facts needed by the interpreter, indexed by [`CmdId`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeInfo {
    pub thread: ThreadId,
    pub line: u32,
    pub succ: Target,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub(crate) constants: BTreeMap<String, i64>,
    pub(crate) vars: Vec<VarInfo>,
    pub(crate) globals: Vec<VarId>,
    pub(crate) threads: Vec<ThreadDef>,
    pub(crate) nodes: Vec<NodeInfo>,
    pub(crate) commands: Vec<Command>,
    pub(crate) state_size: usize,
}

impl Program {
    pub fn constants(&self) -> &BTreeMap<String, i64> {
        &self.constants
    }

    pub fn globals(&self) -> &[VarId] {
        &self.globals
    }

    pub fn threads(&self) -> &[ThreadDef] {
        &self.threads
    }

    pub fn thread(&self, id: ThreadId) -> &ThreadDef {
        &self.threads[id.0]
    }

    pub fn thread_ids(&self) -> impl Iterator<Item = ThreadId> {
        (0..self.threads.len()).map(ThreadId)
    }

    pub fn thread_by_name(&self, name: &str) -> Option<ThreadId> {
        self.threads.iter().position(|t| t.name == name).map(ThreadId)
    }

    pub fn var(&self, id: VarId) -> &VarInfo {
        &self.vars[id.0 as usize]
    }

    pub fn vars(&self) -> impl Iterator<Item = (VarId, &VarInfo)> {
        self.vars.iter().enumerate().map(|(i, v)| (VarId(i as u32), v))
    }

    pub fn var_name(&self, id: VarId) -> &str {
        &self.var(id).decl.name
    }

    /// Resolves `name` as seen from inside `thread` (locals first, then
    /// globals).
    pub fn lookup(&self, thread: Option<ThreadId>, name: &str) -> Option<VarId> {
        if let Some(t) = thread {
            if let Some(v) = self.thread(t).locals.iter().find(|v| self.var_name(**v) == name) {
                return Some(*v);
            }
        }
        self.globals.iter().copied().find(|v| self.var_name(*v) == name)
    }

    /// Number of integer slots in a full state vector.
    pub fn state_size(&self) -> usize {
        self.state_size
    }

    pub fn command(&self, id: CmdId) -> &Command {
        &self.commands[id.0 as usize]
    }

    pub fn node(&self, id: CmdId) -> &NodeInfo {
        &self.nodes[id.0 as usize]
    }

    pub fn command_count(&self) -> usize {
        self.commands.len()
    }

    /// State-changing commands of `thread` located on `line`.
    pub fn commands_at_line(&self, thread: ThreadId, line: u32) -> Vec<CmdId> {
        self.commands
            .iter()
            .filter(|c| {
                c.is_state_changing() && c.line == line && self.node(c.id).thread == thread
            })
            .map(|c| c.id)
            .collect()
    }

    /// State-changing commands on `line` in any thread.
    pub fn state_changing_at_line(&self, line: u32) -> Vec<CmdId> {
        self.commands
            .iter()
            .filter(|c| c.is_state_changing() && c.line == line)
            .map(|c| c.id)
            .collect()
    }

    /// Overrides the initial contents of a variable. Used to seed input
    /// arrays (e.g. `src`) without editing the source.
    pub fn set_initial(&mut self, name: &str, values: &[i64]) -> Result<(), String> {
        let var = self
            .vars
            .iter_mut()
            .find(|v| v.decl.name == name)
            .ok_or_else(|| format!("unknown variable `{name}`"))?;
        if values.len() != var.len {
            return Err(format!(
                "`{name}` has {} slot(s), {} value(s) given",
                var.len,
                values.len()
            ));
        }
        var.initial = values.to_vec();
        var.decl.init = Some(if var.is_array {
            Initializer::List(values.to_vec())
        } else {
            Initializer::Scalar(ScalarInit::Literal(values[0]))
        });
        Ok(())
    }

    /// Copy with every source line zeroed, for structural comparison.
    pub fn without_lines(&self) -> Program {
        let mut p = self.clone();
        for v in &mut p.vars {
            v.decl.line = 0;
        }
        for t in &mut p.threads {
            t.line = 0;
            erase_lines(&mut t.body);
        }
        for n in &mut p.nodes {
            n.line = 0;
        }
        for c in &mut p.commands {
            erase_lines(c);
        }
        p
    }
}

fn erase_lines(c: &mut Command) {
    c.line = 0;
    match &mut c.kind {
        CommandKind::Seq(children) => children.iter_mut().for_each(erase_lines),
        CommandKind::If { then, els, .. } => {
            erase_lines(then);
            erase_lines(els);
        }
        CommandKind::While { body, .. } => erase_lines(body),
        _ => {}
    }
}
