use std::fmt::Write;

use super::ast::*;

/// Renders an expression with the minimum parentheses needed to reparse to
/// the same tree.
pub fn expr_to_string(program: &Program, e: &Expr) -> String {
    let mut out = String::new();
    write_expr(program, e, 0, &mut out);
    out
}

fn write_expr(program: &Program, e: &Expr, min_prec: u8, out: &mut String) {
    match e {
        Expr::Lit(n) => {
            let _ = write!(out, "{n}");
        }
        Expr::Const { name, .. } => out.push_str(name),
        Expr::Var(v) => out.push_str(program.var_name(*v)),
        Expr::Index(v, idx) => {
            out.push_str(program.var_name(*v));
            out.push('[');
            write_expr(program, idx, 0, out);
            out.push(']');
        }
        Expr::Bin(op, l, r) => {
            let prec = op.precedence();
            let paren = prec < min_prec;
            if paren {
                out.push('(');
            }
            write_expr(program, l, prec, out);
            let _ = write!(out, " {} ", op.symbol());
            write_expr(program, r, prec + 1, out);
            if paren {
                out.push(')');
            }
        }
    }
}

pub fn cond_to_string(program: &Program, c: &Cond) -> String {
    match c {
        Cond::True => "true".into(),
        Cond::False => "false".into(),
        Cond::Not(inner) => format!("!({})", cond_to_string(program, inner)),
        Cond::Cmp(op, l, r) => format!(
            "{} {} {}",
            expr_to_string(program, l),
            op.symbol(),
            expr_to_string(program, r)
        ),
    }
}

pub fn lvalue_to_string(program: &Program, lv: &LValue) -> String {
    match lv {
        LValue::Var(v) => program.var_name(*v).to_string(),
        LValue::Index(v, idx) => format!("{}[{}]", program.var_name(*v), expr_to_string(program, idx)),
    }
}

/// One-line rendering of a state-changing command (used in paths and
/// listings).
pub fn command_head(program: &Program, c: &Command) -> String {
    match &c.kind {
        CommandKind::Assign { lhs, rhs } => {
            format!("{} := {}", lvalue_to_string(program, lhs), expr_to_string(program, rhs))
        }
        CommandKind::Skip => "skip".into(),
        CommandKind::Wait(s) => format!("wait({})", program.var_name(*s)),
        CommandKind::Signal(s) => format!("signal({})", program.var_name(*s)),
        CommandKind::If { guard, .. } => format!("if ({})", cond_to_string(program, guard)),
        CommandKind::While { guard, .. } => format!("while ({})", cond_to_string(program, guard)),
        CommandKind::Seq(_) => "{ ... }".into(),
    }
}

fn write_decl(d: &Declaration, indent: &str, out: &mut String) {
    out.push_str(indent);
    out.push_str("int ");
    out.push_str(&d.name);
    if let DeclKind::Array(size) = &d.kind {
        match size {
            SizeSpec::Literal(n) => {
                let _ = write!(out, "[{n}]");
            }
            SizeSpec::Constant(c) => {
                let _ = write!(out, "[{c}]");
            }
        }
    }
    match &d.init {
        None => {}
        Some(Initializer::Scalar(ScalarInit::Literal(v))) => {
            let _ = write!(out, " := {v}");
        }
        Some(Initializer::Scalar(ScalarInit::Constant(c))) => {
            let _ = write!(out, " := {c}");
        }
        Some(Initializer::List(items)) => {
            let items: Vec<String> = items.iter().map(|v| v.to_string()).collect();
            let _ = write!(out, " := {{{}}}", items.join(", "));
        }
    }
    out.push_str(";\n");
}

fn write_block(program: &Program, children: &[Command], depth: usize, out: &mut String) {
    for c in children {
        write_command(program, c, depth, out);
    }
}

fn write_command(program: &Program, c: &Command, depth: usize, out: &mut String) {
    let indent = "    ".repeat(depth);
    match &c.kind {
        CommandKind::Seq(children) => {
            out.push_str(&indent);
            out.push_str("{\n");
            write_block(program, children, depth + 1, out);
            out.push_str(&indent);
            out.push_str("}\n");
        }
        CommandKind::If { guard, then, els } => {
            let _ = writeln!(out, "{indent}if ({}) {{", cond_to_string(program, guard));
            write_body(program, then, depth + 1, out);
            let _ = writeln!(out, "{indent}}} else {{");
            write_body(program, els, depth + 1, out);
            let _ = writeln!(out, "{indent}}}");
        }
        CommandKind::While { guard, body } => {
            let _ = writeln!(out, "{indent}while ({}) {{", cond_to_string(program, guard));
            write_body(program, body, depth + 1, out);
            let _ = writeln!(out, "{indent}}}");
        }
        _ => {
            let _ = writeln!(out, "{indent}{};", command_head(program, c));
        }
    }
}

/// Branch and loop bodies are always blocks; print their children directly.
fn write_body(program: &Program, c: &Command, depth: usize, out: &mut String) {
    match &c.kind {
        CommandKind::Seq(children) => write_block(program, children, depth, out),
        _ => write_command(program, c, depth, out),
    }
}

/// Renders the whole program back to source text.
pub fn pretty_print(program: &Program) -> String {
    let mut out = String::new();
    for g in program.globals() {
        write_decl(&program.var(*g).decl, "", &mut out);
    }
    for t in program.threads() {
        out.push('\n');
        let _ = writeln!(out, "thread {} {{", t.name);
        for l in &t.locals {
            write_decl(&program.var(*l).decl, "    ", &mut out);
        }
        write_body(program, &t.body, 1, &mut out);
        out.push_str("}\n");
    }
    out
}
