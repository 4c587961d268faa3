//! The five linear forms `x+e`, `e+x`, `x-e`, `e-x`, `x*e` and their
//! inverses, applied by peeling one operator at a time.

use crate::interp::Loc;
use crate::lang::{BinOp, Expr};

/// True when `e` reads `loc`.
pub(crate) fn reads_loc(e: &Expr, loc: Loc) -> bool {
    occurrences(e, loc) > 0
}

/// Number of times a concretized expression reads `loc`.
pub(crate) fn occurrences(e: &Expr, loc: Loc) -> usize {
    match e {
        Expr::Lit(_) | Expr::Const { .. } => 0,
        Expr::Var(v) => usize::from(loc == Loc::Var(*v)),
        Expr::Index(v, idx) => match **idx {
            Expr::Lit(i) if i >= 0 => usize::from(loc == Loc::Cell(*v, i as usize)),
            _ => occurrences(idx, loc),
        },
        Expr::Bin(_, l, r) => occurrences(l, loc) + occurrences(r, loc),
    }
}

/// A nonzero literal or named constant: the only factors `x*e` may be
/// divided by without knowing runtime values.
fn nonzero_factor(e: &Expr) -> bool {
    matches!(e, Expr::Lit(n) | Expr::Const { value: n, .. } if *n != 0)
}

/// One peeled layer of `f`: what to do to the produced value to move one
/// operator closer to `x`. `other` is the operand not containing `x`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Peel<'e> {
    /// `x + other` or `other + x`: subtract.
    Sub(&'e Expr),
    /// `x - other`: add.
    Add(&'e Expr),
    /// `other - x`: `other - y`.
    SubFrom(&'e Expr),
    /// `x * other` or `other * x`: divide.
    Div(&'e Expr),
}

/// Decomposes `f` (a function of `x` read exactly once) into peels, outermost
/// first. `None` if `f` is not built from invertible forms alone.
pub(crate) fn peel(f: &Expr, x: Loc) -> Option<Vec<Peel<'_>>> {
    if occurrences(f, x) != 1 {
        return None;
    }
    let mut layers = Vec::new();
    let mut cur = f;
    loop {
        if occurrences(cur, x) == 1 && matches!(cur, Expr::Var(_) | Expr::Index(..)) {
            return Some(layers);
        }
        let Expr::Bin(op, l, r) = cur else { return None };
        let left = reads_loc(l, x);
        let (inner, other) = if left { (&**l, &**r) } else { (&**r, &**l) };
        layers.push(match (op, left) {
            (BinOp::Add, _) => Peel::Sub(other),
            (BinOp::Sub, true) => Peel::Add(other),
            (BinOp::Sub, false) => Peel::SubFrom(other),
            (BinOp::Mul, _) if nonzero_factor(other) => Peel::Div(other),
            _ => return None,
        });
        cur = inner;
    }
}

/// Builds `f⁻¹(y)` from the peels of `f`, mapping every `other` operand
/// through `other_value` (which may fail).
pub(crate) fn invert<'e>(
    layers: &[Peel<'e>],
    y: Expr,
    mut other_value: impl FnMut(&'e Expr) -> Option<Expr>,
) -> Option<Expr> {
    let mut acc = y;
    for layer in layers {
        acc = match *layer {
            Peel::Sub(o) => Expr::bin(BinOp::Sub, acc, other_value(o)?),
            Peel::Add(o) => Expr::bin(BinOp::Add, acc, other_value(o)?),
            Peel::SubFrom(o) => Expr::bin(BinOp::Sub, other_value(o)?, acc),
            Peel::Div(o) => Expr::bin(BinOp::Div, acc, other_value(o)?),
        };
    }
    Some(acc)
}
