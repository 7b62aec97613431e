//! Conservative facts used by the applicability predicates.

use std::collections::BTreeSet;

use minilang::{eval_const, BinOp, Block, Expr, Stmt, Value};

/// Names bound on every path reaching a program point.
pub type Bound = BTreeSet<String>;

/// Definitely-bound set after `s` completes normally, given `bound` before.
pub fn after_stmt(s: &Stmt, bound: &Bound) -> Bound {
    match s {
        Stmt::Let { name, .. } => {
            let mut b = bound.clone();
            b.insert(name.clone());
            b
        }
        Stmt::If {
            then_block, else_block, ..
        } => {
            let t = after_block(then_block, bound);
            let e = after_block(else_block, bound);
            t.intersection(&e).cloned().collect()
        }
        // the body may run zero times; assignment needs an existing binding
        _ => bound.clone(),
    }
}

pub fn after_block(block: &Block, bound: &Bound) -> Bound {
    block.iter().fold(bound.clone(), |b, s| after_stmt(s, &b))
}

/// Bound set before each statement of `block`.
pub fn entry_sets(block: &Block, bound: &Bound) -> Vec<Bound> {
    let mut out = Vec::with_capacity(block.len());
    let mut cur = bound.clone();
    for s in block {
        let next = after_stmt(s, &cur);
        out.push(cur);
        cur = next;
    }
    out
}

/// Evaluation of `e` cannot fail or diverge when every name in `bound` holds a
/// value.
pub fn infallible(e: &Expr, bound: &Bound) -> bool {
    match e {
        Expr::Int(_) | Expr::Bool(_) => true,
        Expr::Var(n) => bound.contains(n),
        _ => matches!(eval_const(e), Some(Ok(_))),
    }
}

/// No calls and no operator that can divide by zero.
pub fn pure(e: &Expr) -> bool {
    !e.contains_call() && !e.contains_op(&[BinOp::Div, BinOp::Rem])
}

pub fn fold_value(v: Value) -> Expr {
    match v {
        Value::Int(i) => Expr::int_literal(i),
        Value::Bool(b) => Expr::Bool(b),
    }
}

/// The literal a constant subtree folds to, if it evaluates without error.
pub fn folded(e: &Expr) -> Option<Expr> {
    match eval_const(e)? {
        Ok(v) => Some(fold_value(v)),
        Err(_) => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use minilang::parse;

    fn names(xs: &[&str]) -> Bound {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn branches_intersect() {
        let p = parse("fn f(a){ if (a) { let x = 1; let y = 2; } else { let x = 3; } return x; }").unwrap();
        let body = &p.functions[0].body;
        let sets = entry_sets(body, &names(&["a"]));
        assert_eq!(sets[1], names(&["a", "x"]));
    }

    #[test]
    fn loops_bind_nothing() {
        let p = parse("fn f(a){ while (a) { let x = 1; } return x; }").unwrap();
        let sets = entry_sets(&p.functions[0].body, &names(&["a"]));
        assert_eq!(sets[1], names(&["a"]));
    }

    #[test]
    fn infallibility() {
        let b = names(&["a"]);
        assert!(infallible(&Expr::var("a"), &b));
        assert!(!infallible(&Expr::var("z"), &b));
        assert!(infallible(&Expr::binary(BinOp::Add, Expr::Int(1), Expr::Int(2)), &b));
        assert!(!infallible(&Expr::binary(BinOp::Div, Expr::Int(1), Expr::Int(0)), &b));
        assert!(!infallible(&Expr::binary(BinOp::Add, Expr::var("a"), Expr::Int(1)), &b));
    }
}
