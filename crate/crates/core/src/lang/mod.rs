//! Front end for the minimal concurrent language: integers, scalar and
//! array variables, `:=`, `skip`, sequencing, `if`, `while`, and the two
//! atomic semaphore primitives `wait`/`signal`.

mod ast;
mod lexer;
mod parser;
mod pretty;

use std::collections::HashSet;

use thiserror::Error;

pub use ast::*;
pub use parser::parse_program;
pub use pretty::{command_head, cond_to_string, expr_to_string, lvalue_to_string, pretty_print};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: syntax error: {message}")]
    Syntax { line: u32, col: u32, message: String },
    #[error("{line}:{col}: `{name}` is not declared")]
    Undeclared { line: u32, col: u32, name: String },
    #[error("{line}: `{name}` is declared more than once")]
    Duplicate { line: u32, name: String },
    #[error("{line}: local `{name}` shadows a global")]
    Shadowing { line: u32, name: String },
    #[error("{line}: array `{name}`: {message}")]
    BadArraySize { line: u32, name: String, message: String },
    #[error("{line}: `{name}`: {message}")]
    BadInitializer { line: u32, name: String, message: String },
    #[error("{line}: wait/signal target `{name}` must be a global scalar")]
    BadSemaphore { line: u32, name: String },
    #[error("{line}:{col}: `{name}`: {message}")]
    KindMismatch { line: u32, col: u32, name: String, message: String },
    #[error("program declares no threads")]
    NoThreads,
}

impl ParseError {
    pub(crate) fn syntax(line: u32, col: u32, message: impl Into<String>) -> Self {
        ParseError::Syntax { line, col, message: message.into() }
    }

    /// Source line the error points at, if any.
    pub fn line(&self) -> Option<u32> {
        match self {
            ParseError::Syntax { line, .. }
            | ParseError::Undeclared { line, .. }
            | ParseError::Duplicate { line, .. }
            | ParseError::Shadowing { line, .. }
            | ParseError::BadArraySize { line, .. }
            | ParseError::BadInitializer { line, .. }
            | ParseError::BadSemaphore { line, .. }
            | ParseError::KindMismatch { line, .. } => Some(*line),
            ParseError::NoThreads => None,
        }
    }
}

/// A location as it appears in source: array indices are still expressions.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SyntacticLoc {
    Var(VarId),
    Cell(VarId, Expr),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("command {0} is not an assignment")]
pub struct NotAnAssignment(pub CmdId);

/// Left-hand side of an assignment node.
pub fn lhs_of(cmd: &Command) -> Result<SyntacticLoc, NotAnAssignment> {
    match &cmd.kind {
        CommandKind::Assign { lhs: LValue::Var(v), .. } => Ok(SyntacticLoc::Var(*v)),
        CommandKind::Assign { lhs: LValue::Index(v, idx), .. } => Ok(SyntacticLoc::Cell(*v, idx.clone())),
        _ => Err(NotAnAssignment(cmd.id)),
    }
}

/// Locations read by an assignment: everything in the right-hand side plus
/// whatever the left-hand side's index expression reads. Order of first
/// occurrence, no duplicates.
pub fn rhs_vars(cmd: &Command) -> Result<Vec<SyntacticLoc>, NotAnAssignment> {
    let CommandKind::Assign { lhs, rhs } = &cmd.kind else {
        return Err(NotAnAssignment(cmd.id));
    };
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    collect_reads(rhs, &mut out, &mut seen);
    if let LValue::Index(_, idx) = lhs {
        collect_reads(idx, &mut out, &mut seen);
    }
    Ok(out)
}

fn collect_reads(e: &Expr, out: &mut Vec<SyntacticLoc>, seen: &mut HashSet<SyntacticLoc>) {
    let mut push = |loc: SyntacticLoc| {
        if seen.insert(loc.clone()) {
            out.push(loc);
        }
    };
    match e {
        Expr::Lit(_) | Expr::Const { .. } => {}
        Expr::Var(v) => push(SyntacticLoc::Var(*v)),
        Expr::Index(v, idx) => {
            push(SyntacticLoc::Cell(*v, (**idx).clone()));
            collect_reads(idx, out, seen);
        }
        Expr::Bin(_, l, r) => {
            collect_reads(l, out, seen);
            collect_reads(r, out, seen);
        }
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;

    fn parse(src: &str) -> Result<Program, ParseError> {
        parse_program(src, &BTreeMap::new())
    }

    fn consts(pairs: &[(&str, i64)]) -> BTreeMap<String, i64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn first_assign(p: &Program) -> &Command {
        (0..p.command_count())
            .map(|i| p.command(CmdId(i as u32)))
            .find(|c| matches!(c.kind, CommandKind::Assign { .. }))
            .unwrap()
    }

    #[test]
    fn minimal_program() {
        let p = parse("thread T { int x:=0; skip }").unwrap();
        assert_eq!(p.threads().len(), 1);
        assert_eq!(p.thread(ThreadId(0)).locals.len(), 1);
        assert_eq!(p.state_size(), 1);
    }

    #[test]
    fn undeclared_variable() {
        let err = parse("thread T { x:=1 }").unwrap_err();
        assert!(matches!(err, ParseError::Undeclared { ref name, .. } if name == "x"), "{err}");
    }

    #[test]
    fn shadowing_and_duplicates() {
        assert!(matches!(
            parse("int g; thread T { int g; skip }").unwrap_err(),
            ParseError::Shadowing { .. }
        ));
        assert!(matches!(parse("int g; int g; thread T { skip }").unwrap_err(), ParseError::Duplicate { .. }));
        assert!(matches!(
            parse("thread T { int a; int a; skip }").unwrap_err(),
            ParseError::Duplicate { .. }
        ));
        // same local name in two threads is fine
        parse("thread A { int i; i := 1 } thread B { int i; i := 2 }").unwrap();
    }

    #[test]
    fn array_sizes() {
        assert!(matches!(
            parse("int a[K]; thread T { skip }").unwrap_err(),
            ParseError::BadArraySize { .. }
        ));
        assert!(matches!(
            parse_program("int a[M]; thread T { skip }", &consts(&[("M", 0)])).unwrap_err(),
            ParseError::BadArraySize { .. }
        ));
        assert!(matches!(
            parse("int a[x]; thread T { skip }").unwrap_err(),
            ParseError::BadArraySize { .. }
        ));
        let p = parse_program("int a[M] := {1, 2}; thread T { skip }", &consts(&[("M", 2)])).unwrap();
        assert_eq!(p.var(VarId(0)).initial, vec![1, 2]);
        assert!(matches!(
            parse("int a[3] := {1}; thread T { skip }").unwrap_err(),
            ParseError::BadInitializer { .. }
        ));
    }

    #[test]
    fn semaphore_targets() {
        assert!(matches!(
            parse("thread T { int s; wait(s) }").unwrap_err(),
            ParseError::BadSemaphore { .. }
        ));
        assert!(matches!(
            parse("int s[2]; thread T { signal(s) }").unwrap_err(),
            ParseError::BadSemaphore { .. }
        ));
        parse("int s := 1; thread T { wait(s); signal(s) }").unwrap();
    }

    #[test]
    fn no_threads() {
        assert_eq!(parse("int g;").unwrap_err(), ParseError::NoThreads);
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse("thread T {\n  int x;\n  x := := 2\n}").unwrap_err();
        match err {
            ParseError::Syntax { line, col, .. } => assert_eq!((line, col), (3, 8)),
            other => panic!("unexpected {other}"),
        }
        // booleans are not arithmetic
        assert!(parse("thread T { int x; x := true }").is_err());
        assert!(parse("thread T { int x; while (x) { skip } }").is_err());
    }

    #[test]
    fn lhs_and_rhs_sets() {
        let p = parse("int g; thread T { int d; d := g * 3 }").unwrap();
        let c = first_assign(&p);
        let d = p.lookup(Some(ThreadId(0)), "d").unwrap();
        let g = p.lookup(None, "g").unwrap();
        assert_eq!(lhs_of(c).unwrap(), SyntacticLoc::Var(d));
        assert_eq!(rhs_vars(c).unwrap(), vec![SyntacticLoc::Var(g)]);

        let p = parse("thread T { int x; x := x }").unwrap();
        let c = first_assign(&p);
        let x = SyntacticLoc::Var(VarId(0));
        assert_eq!(lhs_of(c).unwrap(), x);
        assert_eq!(rhs_vars(c).unwrap(), vec![x]);

        let p = parse("thread T { int x; x := 7 }").unwrap();
        assert!(rhs_vars(first_assign(&p)).unwrap().is_empty());
        assert!(lhs_of(p.command(CmdId(0))).is_err());
    }

    #[test]
    fn indexed_reads_include_lhs_index() {
        let p = parse("int buf[2]; thread T { int dst[2]; int c; int front; dst[c] := buf[front] + 1 }").unwrap();
        let c = first_assign(&p);
        let t = Some(ThreadId(0));
        let var = |n: &str| p.lookup(t, n).unwrap();
        assert_eq!(
            lhs_of(c).unwrap(),
            SyntacticLoc::Cell(var("dst"), Expr::Var(var("c")))
        );
        let reads: HashSet<_> = rhs_vars(c).unwrap().into_iter().collect();
        let expected: HashSet<_> = [
            SyntacticLoc::Var(var("c")),
            SyntacticLoc::Cell(var("buf"), Expr::Var(var("front"))),
            SyntacticLoc::Var(var("front")),
        ]
        .into_iter()
        .collect();
        assert_eq!(reads, expected);
    }

    #[test]
    fn command_ids_are_stable_and_preorder() {
        let src = "int s := 1;\nthread A { int x; while (x < 3) { wait(s); x := x + 1; signal(s) } }\nthread B { if (s > 0) { skip } else { s := 0 } }";
        let a = parse(src).unwrap();
        let b = parse(src).unwrap();
        assert_eq!(a, b);
        for i in 0..a.command_count() {
            assert_eq!(a.command(CmdId(i as u32)).id, CmdId(i as u32));
        }
        // thread A body is id 0, its while is id 1
        assert!(matches!(a.command(CmdId(1)).kind, CommandKind::While { .. }));
    }

    #[test]
    fn successor_links() {
        let p = parse("thread A { int x; while (x < 3) { x := x + 1; x := x } ; skip }").unwrap();
        // ids: 0 body, 1 while, 2 loop block, 3 x:=x+1, 4 x:=x, 5 skip
        assert_eq!(p.node(CmdId(3)).succ, Target::Cmd(CmdId(4)));
        assert_eq!(p.node(CmdId(4)).succ, Target::Cmd(CmdId(1)));
        assert_eq!(p.node(CmdId(1)).succ, Target::Cmd(CmdId(5)));
        assert_eq!(p.node(CmdId(5)).succ, Target::End);
    }

    #[test]
    fn unicode_operators_and_comments() {
        let p = parse("/* header\n */ int g; // trailing\nthread T { int d; d := g × 3 − 1 }").unwrap();
        let c = first_assign(&p);
        assert_eq!(command_head(&p, c), "d := g * 3 - 1");
    }

    #[test]
    fn pretty_print_round_trips() {
        let src = "int g := -4; int a[3] := {1, -2, 3};\nthread T { int x; int y := 2;\n while (!(x >= 5)) { x := (x + 1) * (y - (2 - x)); a[x % 3] := a[0] / 2 - -1 }\n if (true) { skip } }";
        let p = parse(src).unwrap();
        let printed = pretty_print(&p);
        let q = parse(&printed).unwrap();
        assert_eq!(p.without_lines(), q.without_lines());
        assert_eq!(printed, pretty_print(&q));
    }
}
