//! Code transforms T1..T8.

use std::collections::{BTreeMap, BTreeSet};

use minilang::{BinOp, Block, Expr, FnDef, Program, Stmt, UnaryOp};

use super::analysis::{entry_sets, folded, infallible, pure, Bound};
use super::path::{block_mut, expr_mut, stmt_mut};
use super::{TransformError, TransformKind as K, TransformSite};

struct Enumerator<'a> {
    f: &'a FnDef,
    reads: BTreeSet<String>,
    assigns: BTreeSet<String>,
    out: Vec<TransformSite>,
}

impl Enumerator<'_> {
    fn push(&mut self, kind: K, path: &[usize], param: usize) {
        self.out.push(TransformSite::new(kind, path.to_vec(), param));
    }

    fn block(&mut self, path: &mut Vec<usize>, block: &Block, bound: &Bound) {
        let entry = entry_sets(block, bound);
        self.push(K::DeadLetInsert, path, 0);
        for (i, s) in block.iter().enumerate() {
            if let Stmt::Let { name, value } = s {
                let trivial = value.is_literal() || matches!(value, Expr::Var(n) if entry[i].contains(n));
                if trivial && !self.reads.contains(name) && !self.assigns.contains(name) {
                    self.push(K::DeadLetRemove, path, i);
                }
            }
        }
        for i in 0..block.len().saturating_sub(1) {
            if reorderable(&block[i], &block[i + 1], &entry[i]) {
                self.push(K::StmtReorder, path, i);
            }
        }
        for (i, s) in block.iter().enumerate() {
            path.push(i);
            self.stmt(path, s, &entry[i]);
            path.pop();
        }
    }

    fn stmt(&mut self, path: &mut Vec<usize>, s: &Stmt, bound: &Bound) {
        match s {
            Stmt::If { .. } => self.push(K::FlipIf, path, 0),
            Stmt::While { .. } => self.push(K::UnrollWhileOnce, path, 0),
            _ => {}
        }
        let (cond_or_value, blocks): (&Expr, Vec<&Block>) = match s {
            Stmt::Let { value, .. } | Stmt::Assign { value, .. } => (value, vec![]),
            Stmt::Return(e) => (e, vec![]),
            Stmt::If {
                cond,
                then_block,
                else_block,
            } => (cond, vec![then_block, else_block]),
            Stmt::While { cond, body } => (cond, vec![body]),
        };
        path.push(0);
        self.expr(path, cond_or_value, bound, false);
        path.pop();
        for (i, b) in blocks.into_iter().enumerate() {
            path.push(i + 1);
            self.block(path, b, bound);
            path.pop();
        }
    }

    fn expr(&mut self, path: &mut Vec<usize>, e: &Expr, bound: &Bound, parent_folds: bool) {
        if let Expr::Binary(BinOp::Add | BinOp::Mul, l, r) = e {
            if !l.contains_call() && !r.contains_call() && l != r && (infallible(l, bound) || infallible(r, bound)) {
                self.push(K::CommutativeSwap, path, 0);
            }
        }
        let fold = if e.is_literal() { None } else { folded(e) };
        if let Some(lit) = &fold {
            if !parent_folds && lit != e {
                self.push(K::ConstantFold, path, 0);
            }
        }
        for (i, c) in e.children().into_iter().enumerate() {
            path.push(i);
            self.expr(path, c, bound, fold.is_some());
            path.pop();
        }
    }
}

fn def_and_value(s: &Stmt) -> Option<(&String, &Expr, bool)> {
    match s {
        Stmt::Let { name, value } => Some((name, value, true)),
        Stmt::Assign { name, value } => Some((name, value, false)),
        _ => None,
    }
}

/// Adjacent Let/Assign statements with pure right-hand sides, distinct
/// targets and disjoint def/use in both directions. At least one of the two
/// must be unable to fail, so that swapping cannot change which error is
/// reported first.
fn reorderable(a: &Stmt, b: &Stmt, bound: &Bound) -> bool {
    let (Some((da, va, la)), Some((db, vb, lb))) = (def_and_value(a), def_and_value(b)) else {
        return false;
    };
    if !pure(va) || !pure(vb) || da == db {
        return false;
    }
    if va.read_set().contains(db) || vb.read_set().contains(da) {
        return false;
    }
    let safe = |def: &String, v: &Expr, is_let: bool| infallible(v, bound) && (is_let || bound.contains(def));
    safe(da, va, la) || safe(db, vb, lb)
}

/// All applicable sites in preorder; at each node, kinds ascend.
pub fn enumerate_applicable(p: &Program) -> Vec<TransformSite> {
    let mut out = Vec::new();
    for (fi, f) in p.functions.iter().enumerate() {
        let mut en = Enumerator {
            f,
            reads: f.read_names(),
            assigns: f.assigned_names(),
            out: Vec::new(),
        };
        if !f.binders().is_empty() {
            en.push(K::RenameIdents, &[fi], 0);
        }
        let params: Bound = en.f.params.iter().cloned().collect();
        en.block(&mut vec![fi], &f.body, &params);
        out.extend(en.out);
    }
    out
}

fn fresh_names(taken: &BTreeSet<String>, prefix: &str, seed: u64, count: usize) -> Vec<String> {
    let mut out = Vec::with_capacity(count);
    let mut k = 0usize;
    while out.len() < count {
        let cand = format!("{prefix}{seed}_{k}");
        k += 1;
        if !taken.contains(&cand) {
            out.push(cand);
        }
    }
    out
}

fn rename_expr(e: &mut Expr, map: &BTreeMap<String, String>) {
    match e {
        Expr::Var(n) => {
            if let Some(m) = map.get(n) {
                *n = m.clone();
            }
        }
        Expr::Int(_) | Expr::Bool(_) => {}
        Expr::Unary(_, inner) => rename_expr(inner, map),
        Expr::Binary(_, l, r) => {
            rename_expr(l, map);
            rename_expr(r, map);
        }
        Expr::Call(_, args) => args.iter_mut().for_each(|a| rename_expr(a, map)),
    }
}

fn rename_block(block: &mut Block, map: &BTreeMap<String, String>) {
    for s in block {
        match s {
            Stmt::Let { name, value } | Stmt::Assign { name, value } => {
                if let Some(m) = map.get(name) {
                    *name = m.clone();
                }
                rename_expr(value, map);
            }
            Stmt::Return(e) => rename_expr(e, map),
            Stmt::If {
                cond,
                then_block,
                else_block,
            } => {
                rename_expr(cond, map);
                rename_block(then_block, map);
                rename_block(else_block, map);
            }
            Stmt::While { cond, body } => {
                rename_expr(cond, map);
                rename_block(body, map);
            }
        }
    }
}

/// Applies `site`, which must be one of `enumerate_applicable(p)`. The seed
/// picks fresh names (T1, T5) and the insertion point (T5).
pub fn apply_transform(p: &Program, site: &TransformSite, seed: u64) -> Result<Program, TransformError> {
    if site.kind.is_prompt() {
        return Err(TransformError::WrongModality(site.kind));
    }
    if !enumerate_applicable(p).contains(site) {
        return Err(TransformError::Inapplicable(site.clone()));
    }
    let mut out = p.clone();
    let taken = p.identifiers();
    let bad = || TransformError::Inapplicable(site.clone());
    match site.kind {
        K::RenameIdents => {
            let f = &mut out.functions[site.path[0]];
            let binders = f.binders();
            let fresh = fresh_names(&taken, "v", seed, binders.len());
            let map: BTreeMap<String, String> = binders.into_iter().zip(fresh).collect();
            for param in &mut f.params {
                *param = map[param.as_str()].clone();
            }
            rename_block(&mut f.body, &map);
        }
        K::FlipIf => {
            let Some(Stmt::If {
                cond,
                then_block,
                else_block,
            }) = stmt_mut(&mut out, &site.path)
            else {
                return Err(bad());
            };
            let c = std::mem::replace(cond, Expr::Bool(true));
            *cond = Expr::unary(UnaryOp::Not, c);
            std::mem::swap(then_block, else_block);
        }
        K::UnrollWhileOnce => {
            let s = stmt_mut(&mut out, &site.path).ok_or_else(bad)?;
            let Stmt::While { cond, body } = s.clone() else {
                return Err(bad());
            };
            let mut then_block = body;
            then_block.push(s.clone());
            *s = Stmt::If {
                cond,
                then_block,
                else_block: vec![],
            };
        }
        K::CommutativeSwap => {
            let Some(Expr::Binary(_, l, r)) = expr_mut(&mut out, &site.path) else {
                return Err(bad());
            };
            std::mem::swap(l, r);
        }
        K::DeadLetInsert => {
            let block = block_mut(&mut out, &site.path).ok_or_else(bad)?;
            let at = (seed % (block.len() as u64 + 1)) as usize;
            let name = fresh_names(&taken, "dead", seed, 1).remove(0);
            let value = Expr::Int((seed % 10) as i64);
            block.insert(at, Stmt::Let { name, value });
        }
        K::DeadLetRemove => {
            block_mut(&mut out, &site.path).ok_or_else(bad)?.remove(site.param);
        }
        K::StmtReorder => {
            block_mut(&mut out, &site.path)
                .ok_or_else(bad)?
                .swap(site.param, site.param + 1);
        }
        K::ConstantFold => {
            let e = expr_mut(&mut out, &site.path).ok_or_else(bad)?;
            *e = folded(e).ok_or_else(bad)?;
        }
        _ => unreachable!("prompt kinds rejected above"),
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use minilang::{parse, pretty};

    fn sites_of(src: &str, kind: K) -> Vec<TransformSite> {
        enumerate_applicable(&parse(src).unwrap())
            .into_iter()
            .filter(|s| s.kind == kind)
            .collect()
    }

    fn apply_first(src: &str, kind: K, seed: u64) -> String {
        let p = parse(src).unwrap();
        let site = sites_of(src, kind).remove(0);
        pretty(&apply_transform(&p, &site, seed).unwrap())
    }

    #[test]
    fn flip_if_negates_and_swaps() {
        let out = apply_first("fn f(x){ if (x<0) {return 1;} else {return 2;} }", K::FlipIf, 0);
        let want = parse("fn f(x){ if (!(x<0)) {return 2;} else {return 1;} }").unwrap();
        assert_eq!(out, pretty(&want));
    }

    #[test]
    fn flip_if_without_else_materializes_it() {
        let out = apply_first("fn f(x){ if (x) {return 1;} return 2; }", K::FlipIf, 0);
        assert_eq!(
            out,
            "fn f(x) {\n  if (!x) {\n  } else {\n    return 1;\n  }\n  return 2;\n}\n"
        );
    }

    #[test]
    fn constant_fold_whole_expression() {
        let out = apply_first("fn f(){ return 2+3*4; }", K::ConstantFold, 0);
        assert_eq!(out, "fn f() {\n  return 14;\n}\n");
    }

    #[test]
    fn constant_fold_skips_raising_subtrees() {
        let sites = sites_of("fn f(){ return (2+3)/0; }", K::ConstantFold);
        // only the inner sum folds
        assert_eq!(sites.len(), 1);
        assert_eq!(sites[0].path, vec![0, 0, 0, 0]);
        assert!(sites_of("fn f(){ return 1 + true; }", K::ConstantFold).is_empty());
        assert!(sites_of("fn f(){ return -5; }", K::ConstantFold).is_empty());
    }

    #[test]
    fn unroll_while_once() {
        let out = apply_first("fn f(c){ while (c) { c = false; } return 1; }", K::UnrollWhileOnce, 0);
        let want = parse("fn f(c){ if (c) { c = false; while (c) { c = false; } } return 1; }").unwrap();
        assert_eq!(out, pretty(&want));
    }

    #[test]
    fn rename_is_consistent_and_deterministic() {
        let src = "fn f(a){ let b = a + 1; b = b * a; return b; }";
        let once = apply_first(src, K::RenameIdents, 7);
        assert_eq!(once, apply_first(src, K::RenameIdents, 7));
        let want = parse("fn f(v7_0){ let v7_1 = v7_0 + 1; v7_1 = v7_1 * v7_0; return v7_1; }").unwrap();
        assert_eq!(once, pretty(&want));
    }

    #[test]
    fn rename_avoids_existing_names() {
        let out = apply_first("fn f(v7_0){ return v7_0; }", K::RenameIdents, 7);
        assert!(out.contains("v7_1"));
        // called function names are untouched
        let out = apply_first("fn g(a){ return a; }\nfn f(g1){ return g(g1); }", K::RenameIdents, 1);
        assert!(out.contains("return g(v1_0)") || out.contains("fn g(v1_0)"));
    }

    #[test]
    fn reorder_of_independent_lets() {
        let src = "fn f(){ let a = 1; let b = 2; return a + b; }";
        let sites = sites_of(src, K::StmtReorder);
        assert_eq!(sites, vec![TransformSite::new(K::StmtReorder, vec![0], 0)]);
        assert!(sites_of("fn f(){ let a = 1; let b = a; return b; }", K::StmtReorder).is_empty());
        assert!(sites_of("fn f(){ let a = 1 / 1; let b = 2; return b; }", K::StmtReorder).is_empty());
        // both sides could fail: order of errors would change
        assert!(sites_of("fn f(){ let a = x + 1; let b = y + 1; return 0; }", K::StmtReorder).is_empty());
    }

    #[test]
    fn dead_let_remove_requires_unread_name() {
        assert_eq!(sites_of("fn f(q){ let t = q; return 1; }", K::DeadLetRemove).len(), 1);
        assert!(sites_of("fn f(q){ let t = q; return t; }", K::DeadLetRemove).is_empty());
        assert!(sites_of("fn f(){ let t = zz; return 1; }", K::DeadLetRemove).is_empty());
        assert!(sites_of("fn f(){ let t = 1 + 1; return 1; }", K::DeadLetRemove).is_empty());
    }

    #[test]
    fn commutative_swap_rules() {
        assert_eq!(sites_of("fn f(a){ return a + 1; }", K::CommutativeSwap).len(), 1);
        assert!(sites_of("fn f(a){ return a - 1; }", K::CommutativeSwap).is_empty());
        assert!(sites_of("fn f(a){ return f(a) * 2; }", K::CommutativeSwap).is_empty());
        assert!(sites_of("fn f(a){ return a * a; }", K::CommutativeSwap).is_empty());
    }

    #[test]
    fn dead_let_insert_is_seeded() {
        let src = "fn f(){ return 1; }";
        let a = apply_first(src, K::DeadLetInsert, 3);
        assert_eq!(a, "fn f() {\n  return 1;\n  let dead3_0 = 3;\n}\n");
        let b = apply_first(src, K::DeadLetInsert, 4);
        assert_eq!(b, "fn f() {\n  let dead4_0 = 4;\n  return 1;\n}\n");
    }

    #[test]
    fn inapplicable_sites_are_errors() {
        let p = parse("fn f(){ return 1; }").unwrap();
        let site = TransformSite::new(K::FlipIf, vec![0, 0], 0);
        assert!(matches!(
            apply_transform(&p, &site, 0),
            Err(TransformError::Inapplicable(_))
        ));
        let site = TransformSite::new(K::Normalize, vec![], 0);
        assert!(matches!(
            apply_transform(&p, &site, 0),
            Err(TransformError::WrongModality(_))
        ));
    }

    #[test]
    fn enumeration_counts() {
        let src = "fn f(x){ if (x<0) {return 1;} else {return 2;} }";
        assert_eq!(sites_of(src, K::FlipIf).len(), 1);
        assert!(sites_of(src, K::UnrollWhileOnce).is_empty());
        // one site per block: body, then, else
        assert_eq!(sites_of(src, K::DeadLetInsert).len(), 3);
    }
}
