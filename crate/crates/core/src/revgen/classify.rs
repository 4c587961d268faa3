use std::collections::{BTreeMap, HashSet};

use serde::Serialize;

use super::forms::{invert, peel, Peel};
use crate::interp::{Loc, PathEntry};
use crate::lang::{CmdId, CommandKind, Expr, LValue, Program, VarId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StaticClass {
    SelfInverse,
    StateSave,
}

/// Classifies every state-changing command without looking at any path.
///
/// An assignment is self-inverse when its lhs is a scalar read exactly once
/// in its rhs through invertible forms whose other operands are literals,
/// constants, or scalars no thread ever writes. Semaphore operations are
/// always self-inverse. Everything else has to save the old value.
pub fn classify_static(program: &Program) -> BTreeMap<CmdId, StaticClass> {
    let mut written = HashSet::new();
    for t in program.threads() {
        t.body.walk(&mut |c| match &c.kind {
            CommandKind::Assign { lhs, .. } => {
                written.insert(lhs.var());
            }
            CommandKind::Wait(s) | CommandKind::Signal(s) => {
                written.insert(*s);
            }
            _ => {}
        });
    }
    let mut out = BTreeMap::new();
    for t in program.threads() {
        t.body.walk(&mut |c| {
            let class = match &c.kind {
                CommandKind::Wait(_) | CommandKind::Signal(_) => StaticClass::SelfInverse,
                CommandKind::Assign { lhs: LValue::Var(v), rhs } if self_inverse(rhs, *v, &written) => {
                    StaticClass::SelfInverse
                }
                CommandKind::Assign { .. } => StaticClass::StateSave,
                _ => return,
            };
            out.insert(c.id, class);
        });
    }
    out
}

fn self_inverse(rhs: &Expr, lhs: VarId, written: &HashSet<VarId>) -> bool {
    let Some(layers) = peel(rhs, Loc::Var(lhs)) else { return false };
    layers.iter().all(|layer| {
        let (Peel::Sub(o) | Peel::Add(o) | Peel::SubFrom(o) | Peel::Div(o)) = *layer;
        invariant(o, written)
    })
}

/// Reads nothing any thread may change.
fn invariant(e: &Expr, written: &HashSet<VarId>) -> bool {
    match e {
        Expr::Lit(_) | Expr::Const { .. } => true,
        Expr::Var(v) => !written.contains(v),
        Expr::Index(..) => false,
        Expr::Bin(_, l, r) => invariant(l, written) && invariant(r, written),
    }
}

/// The reverse expression of a self-inverse entry, evaluated in the state
/// just after it. `None` for entries that are not self-defined invertible.
pub fn static_reverse(entry: &PathEntry) -> Option<Expr> {
    let layers = peel(&entry.rhs, entry.lhs)?;
    invert(&layers, entry.lhs.to_expr(), |o| Some(o.clone()))
}
