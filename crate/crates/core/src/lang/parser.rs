//! Recursive-descent parser. Parsing happens in two passes: a purely
//! syntactic pass producing a name-based tree, then a resolution pass that
//! builds the variable table, checks scoping rules and numbers commands.

use std::collections::{BTreeMap, HashSet};

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::ParseError;

#[derive(Debug)]
enum RawExpr {
    Lit(i64),
    Name(String, u32, u32),
    Index(String, Box<RawExpr>, u32, u32),
    Bin(BinOp, Box<RawExpr>, Box<RawExpr>),
}

#[derive(Debug)]
enum RawCond {
    True,
    False,
    Not(Box<RawCond>),
    Cmp(CmpOp, RawExpr, RawExpr),
}

#[derive(Debug)]
struct RawCmd {
    line: u32,
    col: u32,
    kind: RawKind,
}

#[derive(Debug)]
enum RawKind {
    Assign { name: String, index: Option<RawExpr>, rhs: RawExpr },
    Skip,
    Block(Vec<RawCmd>),
    If { guard: RawCond, then: Box<RawCmd>, els: Box<RawCmd> },
    While { guard: RawCond, body: Box<RawCmd> },
    Wait(String),
    Signal(String),
}

#[derive(Debug)]
struct RawThread {
    name: String,
    line: u32,
    locals: Vec<Declaration>,
    body: RawCmd,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

const KEYWORDS: &[&str] = &[
    "int", "thread", "while", "if", "else", "skip", "wait", "signal", "true", "false",
];

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn here(&self) -> (u32, u32) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error(&self, msg: impl Into<String>) -> ParseError {
        let (line, col) = self.here();
        ParseError::syntax(line, col, msg)
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<Token, ParseError> {
        if *self.peek() == tok {
            Ok(self.advance())
        } else {
            Err(self.error(format!("expected {what}, found {}", describe(self.peek()))))
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.advance();
                Ok(s)
            }
            other => Err(self.error(format!("expected {what}, found {}", describe(&other)))),
        }
    }

    fn program(&mut self) -> Result<(Vec<Declaration>, Vec<RawThread>), ParseError> {
        let mut globals = Vec::new();
        let mut threads = Vec::new();
        loop {
            if *self.peek() == Tok::Eof {
                break;
            } else if self.is_keyword("int") {
                globals.push(self.declaration()?);
            } else if self.is_keyword("thread") {
                threads.push(self.thread()?);
            } else {
                return Err(self.error(format!(
                    "expected `int` or `thread`, found {}",
                    describe(self.peek())
                )));
            }
        }
        Ok((globals, threads))
    }

    fn declaration(&mut self) -> Result<Declaration, ParseError> {
        let (line, _) = self.here();
        self.advance(); // int
        let name = self.ident("variable name")?;
        let kind = if *self.peek() == Tok::LBracket {
            self.advance();
            let size = match self.peek().clone() {
                Tok::Int(n) => {
                    self.advance();
                    SizeSpec::Literal(n as usize)
                }
                Tok::Ident(c) if !KEYWORDS.contains(&c.as_str()) => {
                    self.advance();
                    SizeSpec::Constant(c)
                }
                _ => {
                    let (l, _) = self.here();
                    return Err(ParseError::BadArraySize {
                        line: l,
                        name,
                        message: "size must be an integer literal or a named constant".into(),
                    });
                }
            };
            self.expect(Tok::RBracket, "`]`")?;
            DeclKind::Array(size)
        } else {
            DeclKind::Scalar
        };
        let init = if *self.peek() == Tok::Assign {
            self.advance();
            Some(if *self.peek() == Tok::LBrace {
                self.advance();
                let mut items = Vec::new();
                if *self.peek() != Tok::RBrace {
                    loop {
                        items.push(self.signed_literal()?);
                        if *self.peek() == Tok::Comma {
                            self.advance();
                        } else {
                            break;
                        }
                    }
                }
                self.expect(Tok::RBrace, "`}`")?;
                Initializer::List(items)
            } else if let Tok::Ident(c) = self.peek().clone() {
                self.advance();
                Initializer::Scalar(ScalarInit::Constant(c))
            } else {
                Initializer::Scalar(ScalarInit::Literal(self.signed_literal()?))
            })
        } else {
            None
        };
        self.expect(Tok::Semi, "`;` after declaration")?;
        Ok(Declaration { name, kind, init, line })
    }

    fn signed_literal(&mut self) -> Result<i64, ParseError> {
        let neg = if *self.peek() == Tok::Minus {
            self.advance();
            true
        } else {
            false
        };
        match self.peek().clone() {
            Tok::Int(n) => {
                self.advance();
                Ok(if neg { -n } else { n })
            }
            other => Err(self.error(format!("expected integer literal, found {}", describe(&other)))),
        }
    }

    fn thread(&mut self) -> Result<RawThread, ParseError> {
        let (line, col) = self.here();
        self.advance(); // thread
        let name = self.ident("thread name")?;
        self.expect(Tok::LBrace, "`{`")?;
        let mut locals = Vec::new();
        while self.is_keyword("int") {
            locals.push(self.declaration()?);
        }
        let stmts = self.statements()?;
        self.expect(Tok::RBrace, "`}`")?;
        Ok(RawThread { name, line, locals, body: RawCmd { line, col, kind: RawKind::Block(stmts) } })
    }

    /// Statements up to (not including) the closing `}`. Simple statements
    /// are separated by `;`; a trailing `;` is allowed.
    fn statements(&mut self) -> Result<Vec<RawCmd>, ParseError> {
        let mut out = Vec::new();
        loop {
            while *self.peek() == Tok::Semi {
                self.advance();
            }
            if matches!(self.peek(), Tok::RBrace | Tok::Eof) {
                return Ok(out);
            }
            if self.is_keyword("int") {
                return Err(self.error("declarations must precede statements"));
            }
            let cmd = self.statement()?;
            let compound = matches!(cmd.kind, RawKind::If { .. } | RawKind::While { .. } | RawKind::Block(_));
            out.push(cmd);
            if !compound && !matches!(self.peek(), Tok::Semi | Tok::RBrace) {
                return Err(self.error(format!("expected `;`, found {}", describe(self.peek()))));
            }
        }
    }

    fn block(&mut self) -> Result<RawCmd, ParseError> {
        let (line, col) = self.here();
        self.expect(Tok::LBrace, "`{`")?;
        let stmts = self.statements()?;
        self.expect(Tok::RBrace, "`}`")?;
        Ok(RawCmd { line, col, kind: RawKind::Block(stmts) })
    }

    fn statement(&mut self) -> Result<RawCmd, ParseError> {
        let (line, col) = self.here();
        let kind = match self.peek().clone() {
            Tok::LBrace => return self.block(),
            Tok::Ident(kw) if kw == "skip" => {
                self.advance();
                RawKind::Skip
            }
            Tok::Ident(kw) if kw == "while" => {
                self.advance();
                self.expect(Tok::LParen, "`(`")?;
                let guard = self.cond()?;
                self.expect(Tok::RParen, "`)`")?;
                let body = self.block()?;
                RawKind::While { guard, body: Box::new(body) }
            }
            Tok::Ident(kw) if kw == "if" => {
                self.advance();
                self.expect(Tok::LParen, "`(`")?;
                let guard = self.cond()?;
                self.expect(Tok::RParen, "`)`")?;
                let then = self.block()?;
                let els = if self.is_keyword("else") {
                    self.advance();
                    self.block()?
                } else {
                    let (l, c) = self.here();
                    RawCmd { line: l, col: c, kind: RawKind::Block(Vec::new()) }
                };
                RawKind::If { guard, then: Box::new(then), els: Box::new(els) }
            }
            Tok::Ident(kw) if kw == "wait" || kw == "signal" => {
                self.advance();
                self.expect(Tok::LParen, "`(`")?;
                let target = self.ident("semaphore name")?;
                self.expect(Tok::RParen, "`)`")?;
                if kw == "wait" {
                    RawKind::Wait(target)
                } else {
                    RawKind::Signal(target)
                }
            }
            Tok::Ident(_) => {
                let name = self.ident("assignment target")?;
                let index = if *self.peek() == Tok::LBracket {
                    self.advance();
                    let e = self.expr()?;
                    self.expect(Tok::RBracket, "`]`")?;
                    Some(e)
                } else {
                    None
                };
                self.expect(Tok::Assign, "`:=`")?;
                let rhs = self.expr()?;
                RawKind::Assign { name, index, rhs }
            }
            other => return Err(self.error(format!("expected a command, found {}", describe(&other)))),
        };
        Ok(RawCmd { line, col, kind })
    }

    fn cond(&mut self) -> Result<RawCond, ParseError> {
        match self.peek().clone() {
            Tok::Bang => {
                self.advance();
                let inner = match self.peek() {
                    Tok::LParen => {
                        self.advance();
                        let c = self.cond()?;
                        self.expect(Tok::RParen, "`)`")?;
                        c
                    }
                    _ => self.cond()?,
                };
                Ok(RawCond::Not(Box::new(inner)))
            }
            Tok::Ident(kw) if kw == "true" => {
                self.advance();
                Ok(RawCond::True)
            }
            Tok::Ident(kw) if kw == "false" => {
                self.advance();
                Ok(RawCond::False)
            }
            _ => {
                let lhs = self.expr()?;
                let op = match self.peek() {
                    Tok::EqEq => CmpOp::Eq,
                    Tok::NotEq => CmpOp::Ne,
                    Tok::Lt => CmpOp::Lt,
                    Tok::Le => CmpOp::Le,
                    Tok::Gt => CmpOp::Gt,
                    Tok::Ge => CmpOp::Ge,
                    other => {
                        return Err(self.error(format!(
                            "expected a comparison operator, found {}",
                            describe(other)
                        )))
                    }
                };
                self.advance();
                let rhs = self.expr()?;
                Ok(RawCond::Cmp(op, lhs, rhs))
            }
        }
    }

    fn expr(&mut self) -> Result<RawExpr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.term()?;
            lhs = RawExpr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<RawExpr, ParseError> {
        let mut lhs = self.atom()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                Tok::Percent => BinOp::Rem,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.atom()?;
            lhs = RawExpr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn atom(&mut self) -> Result<RawExpr, ParseError> {
        let (line, col) = self.here();
        match self.peek().clone() {
            Tok::Int(n) => {
                self.advance();
                Ok(RawExpr::Lit(n))
            }
            Tok::Minus => {
                self.advance();
                if let Tok::Int(n) = *self.peek() {
                    self.advance();
                    Ok(RawExpr::Lit(-n))
                } else {
                    let inner = self.atom()?;
                    Ok(RawExpr::Bin(BinOp::Sub, Box::new(RawExpr::Lit(0)), Box::new(inner)))
                }
            }
            Tok::LParen => {
                self.advance();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) if !KEYWORDS.contains(&name.as_str()) => {
                self.advance();
                if *self.peek() == Tok::LBracket {
                    self.advance();
                    let idx = self.expr()?;
                    self.expect(Tok::RBracket, "`]`")?;
                    Ok(RawExpr::Index(name, Box::new(idx), line, col))
                } else {
                    Ok(RawExpr::Name(name, line, col))
                }
            }
            other => Err(self.error(format!("expected an expression, found {}", describe(&other)))),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Int(n) => format!("`{n}`"),
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Eof => "end of input".into(),
        other => format!("{other:?}"),
    }
}

/// Parses `text` with the given named constants bound (symbolic sizes such
/// as `M` and `N`).
pub fn parse_program(text: &str, constants: &BTreeMap<String, i64>) -> Result<Program, ParseError> {
    let toks = tokenize(text)?;
    let mut p = Parser { toks, pos: 0 };
    let (globals, threads) = p.program()?;
    Resolver::new(constants).resolve(globals, threads)
}

struct Resolver<'c> {
    constants: &'c BTreeMap<String, i64>,
    vars: Vec<VarInfo>,
    globals: Vec<VarId>,
    offset: usize,
}

impl<'c> Resolver<'c> {
    fn new(constants: &'c BTreeMap<String, i64>) -> Self {
        Self { constants, vars: Vec::new(), globals: Vec::new(), offset: 0 }
    }

    fn declare(&mut self, decl: Declaration, owner: Option<ThreadId>) -> Result<VarId, ParseError> {
        let line = decl.line;
        if self.constants.contains_key(&decl.name) {
            return Err(ParseError::Duplicate { line, name: decl.name });
        }
        let (is_array, len) = match &decl.kind {
            DeclKind::Scalar => (false, 1),
            DeclKind::Array(size) => {
                let n = match size {
                    SizeSpec::Literal(n) => *n as i64,
                    SizeSpec::Constant(c) => *self.constants.get(c).ok_or_else(|| ParseError::BadArraySize {
                        line,
                        name: decl.name.clone(),
                        message: format!("`{c}` is not a bound constant"),
                    })?,
                };
                if n <= 0 {
                    return Err(ParseError::BadArraySize {
                        line,
                        name: decl.name.clone(),
                        message: format!("size must be positive, got {n}"),
                    });
                }
                (true, n as usize)
            }
        };
        let bad_init = |message: String| ParseError::BadInitializer { line, name: decl.name.clone(), message };
        let initial = match (&decl.init, is_array) {
            (None, _) => vec![0; len],
            (Some(Initializer::Scalar(s)), false) => vec![match s {
                ScalarInit::Literal(v) => *v,
                ScalarInit::Constant(c) => *self
                    .constants
                    .get(c)
                    .ok_or_else(|| bad_init(format!("`{c}` is not a bound constant")))?,
            }],
            (Some(Initializer::List(items)), true) => {
                if items.len() != len {
                    return Err(bad_init(format!("{} value(s) for an array of size {len}", items.len())));
                }
                items.clone()
            }
            (Some(Initializer::Scalar(_)), true) => {
                return Err(bad_init("array initializer must be a `{...}` list".into()))
            }
            (Some(Initializer::List(_)), false) => {
                return Err(bad_init("scalar initializer must be a single value".into()))
            }
        };
        let id = VarId(self.vars.len() as u32);
        self.vars.push(VarInfo { decl, owner, offset: self.offset, len, is_array, initial });
        self.offset += len;
        Ok(id)
    }

    fn resolve(mut self, globals: Vec<Declaration>, raw_threads: Vec<RawThread>) -> Result<Program, ParseError> {
        if raw_threads.is_empty() {
            return Err(ParseError::NoThreads);
        }
        let mut seen = HashSet::new();
        for d in globals {
            if !seen.insert(d.name.clone()) {
                return Err(ParseError::Duplicate { line: d.line, name: d.name });
            }
            let id = self.declare(d, None)?;
            self.globals.push(id);
        }
        let global_names = seen;

        let mut thread_names = HashSet::new();
        let mut locals_per_thread = Vec::new();
        for (t, raw) in raw_threads.iter().enumerate() {
            if !thread_names.insert(raw.name.clone()) {
                return Err(ParseError::Duplicate { line: raw.line, name: raw.name.clone() });
            }
            let mut local_names = HashSet::new();
            let mut ids = Vec::new();
            for d in &raw.locals {
                if global_names.contains(&d.name) {
                    return Err(ParseError::Shadowing { line: d.line, name: d.name.clone() });
                }
                if !local_names.insert(d.name.clone()) {
                    return Err(ParseError::Duplicate { line: d.line, name: d.name.clone() });
                }
                ids.push(self.declare(d.clone(), Some(ThreadId(t)))?);
            }
            locals_per_thread.push(ids);
        }

        let mut next_id = 0u32;
        let mut threads = Vec::new();
        for (raw, locals) in raw_threads.into_iter().zip(locals_per_thread) {
            let scope = Scope { resolver: &self, locals: &locals };
            let body = scope.command(raw.body, &mut next_id)?;
            threads.push(ThreadDef { name: raw.name, locals, body, line: raw.line });
        }

        let count = next_id as usize;
        let mut commands: Vec<Option<Command>> = vec![None; count];
        let mut nodes: Vec<Option<NodeInfo>> = vec![None; count];
        for (t, th) in threads.iter().enumerate() {
            th.body.walk(&mut |c| commands[c.id.0 as usize] = Some(c.clone()));
            link(&th.body, Target::End, ThreadId(t), &mut nodes);
        }

        Ok(Program {
            constants: self.constants.clone(),
            vars: self.vars,
            globals: self.globals,
            threads,
            nodes: nodes.into_iter().map(|n| n.expect("every node linked")).collect(),
            commands: commands.into_iter().map(|c| c.expect("every node collected")).collect(),
            state_size: self.offset,
        })
    }
}

/// Fills in the successor of every node: where control goes after it
/// completes.
fn link(cmd: &Command, succ: Target, thread: ThreadId, nodes: &mut [Option<NodeInfo>]) {
    nodes[cmd.id.0 as usize] = Some(NodeInfo { thread, line: cmd.line, succ });
    match &cmd.kind {
        CommandKind::Seq(children) => {
            for (i, c) in children.iter().enumerate() {
                let next = children.get(i + 1).map_or(succ, |n| Target::Cmd(n.id));
                link(c, next, thread, nodes);
            }
        }
        CommandKind::If { then, els, .. } => {
            link(then, succ, thread, nodes);
            link(els, succ, thread, nodes);
        }
        CommandKind::While { body, .. } => link(body, Target::Cmd(cmd.id), thread, nodes),
        _ => {}
    }
}

struct Scope<'a, 'c> {
    resolver: &'a Resolver<'c>,
    locals: &'a [VarId],
}

impl Scope<'_, '_> {
    fn lookup(&self, name: &str) -> Option<VarId> {
        self.locals
            .iter()
            .chain(self.resolver.globals.iter())
            .copied()
            .find(|v| self.resolver.vars[v.0 as usize].decl.name == name)
    }

    fn info(&self, v: VarId) -> &VarInfo {
        &self.resolver.vars[v.0 as usize]
    }

    fn scalar(&self, name: &str, line: u32, col: u32) -> Result<VarId, ParseError> {
        let v = self.lookup(name).ok_or_else(|| ParseError::Undeclared { line, col, name: name.into() })?;
        if self.info(v).is_array {
            return Err(ParseError::KindMismatch { line, col, name: name.into(), message: "array used without an index".into() });
        }
        Ok(v)
    }

    fn array(&self, name: &str, line: u32, col: u32) -> Result<VarId, ParseError> {
        let v = self.lookup(name).ok_or_else(|| ParseError::Undeclared { line, col, name: name.into() })?;
        if !self.info(v).is_array {
            return Err(ParseError::KindMismatch { line, col, name: name.into(), message: "scalar cannot be indexed".into() });
        }
        Ok(v)
    }

    fn expr(&self, e: RawExpr) -> Result<Expr, ParseError> {
        Ok(match e {
            RawExpr::Lit(n) => Expr::Lit(n),
            RawExpr::Name(name, line, col) => {
                if self.lookup(&name).is_none() {
                    if let Some(v) = self.resolver.constants.get(&name) {
                        return Ok(Expr::Const { name, value: *v });
                    }
                }
                Expr::Var(self.scalar(&name, line, col)?)
            }
            RawExpr::Index(name, idx, line, col) => {
                let v = self.array(&name, line, col)?;
                Expr::Index(v, Box::new(self.expr(*idx)?))
            }
            RawExpr::Bin(op, l, r) => Expr::bin(op, self.expr(*l)?, self.expr(*r)?),
        })
    }

    fn cond(&self, c: RawCond) -> Result<Cond, ParseError> {
        Ok(match c {
            RawCond::True => Cond::True,
            RawCond::False => Cond::False,
            RawCond::Not(inner) => Cond::Not(Box::new(self.cond(*inner)?)),
            RawCond::Cmp(op, l, r) => Cond::Cmp(op, self.expr(l)?, self.expr(r)?),
        })
    }

    fn semaphore(&self, name: &str, line: u32, col: u32) -> Result<VarId, ParseError> {
        let v = self.lookup(name).ok_or_else(|| ParseError::Undeclared { line, col, name: name.into() })?;
        let info = self.info(v);
        if info.owner.is_some() || info.is_array {
            return Err(ParseError::BadSemaphore { line, name: name.into() });
        }
        Ok(v)
    }

    fn command(&self, raw: RawCmd, next_id: &mut u32) -> Result<Command, ParseError> {
        let id = CmdId(*next_id);
        *next_id += 1;
        let (line, col) = (raw.line, raw.col);
        let kind = match raw.kind {
            RawKind::Skip => CommandKind::Skip,
            RawKind::Assign { name, index, rhs } => {
                let lhs = match index {
                    None => LValue::Var(self.scalar(&name, line, col)?),
                    Some(i) => LValue::Index(self.array(&name, line, col)?, self.expr(i)?),
                };
                CommandKind::Assign { lhs, rhs: self.expr(rhs)? }
            }
            RawKind::Block(stmts) => {
                let mut children = Vec::with_capacity(stmts.len());
                for s in stmts {
                    children.push(self.command(s, next_id)?);
                }
                CommandKind::Seq(children)
            }
            RawKind::If { guard, then, els } => {
                let guard = self.cond(guard)?;
                let then = Box::new(self.command(*then, next_id)?);
                let els = Box::new(self.command(*els, next_id)?);
                CommandKind::If { guard, then, els }
            }
            RawKind::While { guard, body } => {
                let guard = self.cond(guard)?;
                CommandKind::While { guard, body: Box::new(self.command(*body, next_id)?) }
            }
            RawKind::Wait(s) => CommandKind::Wait(self.semaphore(&s, line, col)?),
            RawKind::Signal(s) => CommandKind::Signal(self.semaphore(&s, line, col)?),
        };
        Ok(Command { id, line, kind })
    }
}
