#![allow(dead_code)]

use minilang::{BinOp, Block, Expr, FnDef, Program, Stmt, UnaryOp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const NAMES: [&str; 6] = ["a", "b", "n", "acc", "i", "tmp"];

const OPS: [BinOp; 13] = [
    BinOp::Or,
    BinOp::And,
    BinOp::Eq,
    BinOp::Ne,
    BinOp::Lt,
    BinOp::Le,
    BinOp::Gt,
    BinOp::Ge,
    BinOp::Add,
    BinOp::Sub,
    BinOp::Mul,
    BinOp::Div,
    BinOp::Rem,
];

fn gen_expr(rng: &mut ChaCha8Rng, depth: u32, fns: &[(String, usize)]) -> Expr {
    if depth == 0 || rng.random_bool(0.3) {
        return match rng.random_range(0..5) {
            0 | 1 => Expr::Int(rng.random_range(0..6)),
            2 => Expr::Bool(rng.random_bool(0.5)),
            _ => Expr::var(NAMES[rng.random_range(0..NAMES.len())]),
        };
    }
    match rng.random_range(0..10) {
        0 => Expr::unary(
            if rng.random_bool(0.5) {
                UnaryOp::Not
            } else {
                UnaryOp::Neg
            },
            gen_expr(rng, depth - 1, fns),
        ),
        1 if !fns.is_empty() => {
            let (name, arity) = &fns[rng.random_range(0..fns.len())];
            Expr::Call(
                name.clone(),
                (0..*arity).map(|_| gen_expr(rng, depth - 1, fns)).collect(),
            )
        }
        _ => Expr::binary(
            OPS[rng.random_range(0..OPS.len())],
            gen_expr(rng, depth - 1, fns),
            gen_expr(rng, depth - 1, fns),
        ),
    }
}

fn gen_block(rng: &mut ChaCha8Rng, depth: u32, fns: &[(String, usize)]) -> Block {
    let n = rng.random_range(0..4);
    let mut out = Vec::new();
    for _ in 0..n {
        let name = NAMES[rng.random_range(0..NAMES.len())].to_string();
        let s = match rng.random_range(0..6) {
            0 | 1 => Stmt::Let {
                name,
                value: gen_expr(rng, 2, fns),
            },
            2 => Stmt::Assign {
                name,
                value: gen_expr(rng, 2, fns),
            },
            3 if depth > 0 => Stmt::If {
                cond: gen_expr(rng, 2, fns),
                then_block: gen_block(rng, depth - 1, fns),
                else_block: if rng.random_bool(0.5) {
                    gen_block(rng, depth - 1, fns)
                } else {
                    vec![]
                },
            },
            4 if depth > 0 => Stmt::While {
                cond: gen_expr(rng, 2, fns),
                body: gen_block(rng, depth - 1, fns),
            },
            _ => Stmt::Return(gen_expr(rng, 2, fns)),
        };
        out.push(s);
    }
    out
}

/// Random, usually ill-behaved programs: unbound reads, type errors and
/// division by zero are all common, which is what stresses the
/// applicability predicates.
pub fn gen_program(seed: u64) -> Program {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fns: Vec<(String, usize)> = Vec::new();
    let mut functions = Vec::new();
    let count = rng.random_range(1..3);
    for k in 0..count {
        let name = if k + 1 == count {
            "main".to_string()
        } else {
            format!("helper{k}")
        };
        let arity = rng.random_range(0..3);
        let params = NAMES[..arity].iter().map(|s| s.to_string()).collect();
        let mut body = gen_block(&mut rng, 2, &fns);
        body.push(Stmt::Return(gen_expr(&mut rng, 2, &fns)));
        fns.push((name.clone(), arity));
        functions.push(FnDef { name, params, body });
    }
    Program { functions }
}
