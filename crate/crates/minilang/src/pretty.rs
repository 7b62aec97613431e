//! Canonical formatting: one statement per line, two-space indent, single
//! spaces around binary operators, minimal parentheses.

use std::fmt::Write;

use crate::ast::{Block, Expr, FnDef, Program, Stmt};

const UNARY_PREC: u8 = 6;
const ATOM_PREC: u8 = 7;

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Binary(op, ..) => op.precedence(),
        Expr::Unary(..) => UNARY_PREC,
        _ => ATOM_PREC,
    }
}

pub fn pretty_expr(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e);
    s
}

fn write_wrapped(out: &mut String, e: &Expr, parens: bool) {
    if parens {
        out.push('(');
        write_expr(out, e);
        out.push(')');
    } else {
        write_expr(out, e);
    }
}

fn write_expr(out: &mut String, e: &Expr) {
    match e {
        // negative values only arise from the two's-complement reading of
        // large literals
        Expr::Int(v) => write!(out, "{}", *v as u64).unwrap(),
        Expr::Bool(b) => write!(out, "{b}").unwrap(),
        Expr::Var(n) => out.push_str(n),
        Expr::Unary(op, inner) => {
            out.push_str(op.symbol());
            write_wrapped(out, inner, prec(inner) < UNARY_PREC);
        }
        Expr::Binary(op, l, r) => {
            let p = op.precedence();
            let left_parens = prec(l) < p || (op.is_comparison() && prec(l) == p);
            write_wrapped(out, l, left_parens);
            write!(out, " {} ", op.symbol()).unwrap();
            write_wrapped(out, r, prec(r) <= p);
        }
        Expr::Call(name, args) => {
            out.push_str(name);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(out, a);
            }
            out.push(')');
        }
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn write_block(out: &mut String, block: &Block, depth: usize) {
    out.push_str("{\n");
    for s in block {
        write_stmt(out, s, depth + 1);
    }
    indent(out, depth);
    out.push('}');
}

fn write_stmt(out: &mut String, s: &Stmt, depth: usize) {
    indent(out, depth);
    match s {
        Stmt::Let { name, value } => {
            write!(out, "let {name} = {};", pretty_expr(value)).unwrap();
        }
        Stmt::Assign { name, value } => {
            write!(out, "{name} = {};", pretty_expr(value)).unwrap();
        }
        Stmt::If {
            cond,
            then_block,
            else_block,
        } => {
            write!(out, "if ({}) ", pretty_expr(cond)).unwrap();
            write_block(out, then_block, depth);
            if !else_block.is_empty() {
                out.push_str(" else ");
                write_block(out, else_block, depth);
            }
        }
        Stmt::While { cond, body } => {
            write!(out, "while ({}) ", pretty_expr(cond)).unwrap();
            write_block(out, body, depth);
        }
        Stmt::Return(e) => {
            write!(out, "return {};", pretty_expr(e)).unwrap();
        }
    }
    out.push('\n');
}

pub fn pretty_fn(f: &FnDef) -> String {
    let mut out = String::new();
    write!(out, "fn {}({}) ", f.name, f.params.join(", ")).unwrap();
    write_block(&mut out, &f.body, 0);
    out.push('\n');
    out
}

/// Formats a program; functions are separated by a blank line.
pub fn pretty(p: &Program) -> String {
    p.functions.iter().map(pretty_fn).collect::<Vec<_>>().join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{BinOp, UnaryOp};
    use crate::parse;

    #[test]
    fn canonical_single_return() {
        let p = Program {
            functions: vec![FnDef {
                name: "f".into(),
                params: vec![],
                body: vec![Stmt::Return(Expr::Int(1))],
            }],
        };
        assert_eq!(pretty(&p), "fn f() {\n  return 1;\n}\n");
    }

    #[test]
    fn parenthesizes_only_when_needed() {
        let e = Expr::binary(
            BinOp::Mul,
            Expr::binary(BinOp::Add, Expr::var("a"), Expr::Int(1)),
            Expr::binary(BinOp::Sub, Expr::var("b"), Expr::Int(2)),
        );
        assert_eq!(pretty_expr(&e), "(a + 1) * (b - 2)");
        let e = Expr::binary(
            BinOp::Sub,
            Expr::var("a"),
            Expr::binary(BinOp::Sub, Expr::var("b"), Expr::var("c")),
        );
        assert_eq!(pretty_expr(&e), "a - (b - c)");
        let e = Expr::unary(UnaryOp::Not, Expr::binary(BinOp::Lt, Expr::var("x"), Expr::Int(0)));
        assert_eq!(pretty_expr(&e), "!(x < 0)");
    }

    #[test]
    fn nested_comparison_keeps_parens() {
        let src = "fn f(a) {\n  return (a < 1) == (a > 2);\n}\n";
        assert_eq!(pretty(&parse(src).unwrap()), src);
    }

    #[test]
    fn extreme_literals_round_trip() {
        for v in [i64::MIN, i64::MAX, -1, 0] {
            let p = Program {
                functions: vec![FnDef {
                    name: "f".into(),
                    params: vec![],
                    body: vec![Stmt::Return(Expr::int_literal(v))],
                }],
            };
            assert_eq!(parse(&pretty(&p)).unwrap(), p);
        }
    }

    #[test]
    fn else_blocks_and_loops() {
        let src = "fn main(a) {\n  while (a > 0) {\n    a = a - 1;\n  }\n  if (a == 0) {\n    return 1;\n  } else {\n    return 2;\n  }\n}\n";
        assert_eq!(pretty(&parse(src).unwrap()), src);
    }
}
