//! AST paths.
//!
//! A path starts with a function index, which addresses that function's body
//! block. From a block, the next index picks a statement. From a statement
//! the next index picks a child: `If` has cond (0), then (1), else (2);
//! `While` has cond (0), body (1); `Let`, `Assign` and `Return` have their
//! expression at 0. Expression children are operands or call arguments in
//! order.

use minilang::{Block, Expr, Program, Stmt};

#[derive(Debug, Clone, Copy)]
pub enum Node<'a> {
    Block(&'a Block),
    Stmt(&'a Stmt),
    Expr(&'a Expr),
}

pub enum NodeMut<'a> {
    Block(&'a mut Block),
    Stmt(&'a mut Stmt),
    Expr(&'a mut Expr),
}

fn stmt_child(s: &Stmt, i: usize) -> Option<Node<'_>> {
    match (s, i) {
        (Stmt::Let { value, .. } | Stmt::Assign { value, .. }, 0) => Some(Node::Expr(value)),
        (Stmt::Return(e), 0) => Some(Node::Expr(e)),
        (Stmt::If { cond, .. } | Stmt::While { cond, .. }, 0) => Some(Node::Expr(cond)),
        (Stmt::If { then_block, .. }, 1) => Some(Node::Block(then_block)),
        (Stmt::If { else_block, .. }, 2) => Some(Node::Block(else_block)),
        (Stmt::While { body, .. }, 1) => Some(Node::Block(body)),
        _ => None,
    }
}

fn stmt_child_mut(s: &mut Stmt, i: usize) -> Option<NodeMut<'_>> {
    match (s, i) {
        (Stmt::Let { value, .. } | Stmt::Assign { value, .. }, 0) => Some(NodeMut::Expr(value)),
        (Stmt::Return(e), 0) => Some(NodeMut::Expr(e)),
        (Stmt::If { cond, .. } | Stmt::While { cond, .. }, 0) => Some(NodeMut::Expr(cond)),
        (Stmt::If { then_block, .. }, 1) => Some(NodeMut::Block(then_block)),
        (Stmt::If { else_block, .. }, 2) => Some(NodeMut::Block(else_block)),
        (Stmt::While { body, .. }, 1) => Some(NodeMut::Block(body)),
        _ => None,
    }
}

fn expr_child(e: &Expr, i: usize) -> Option<&Expr> {
    match e {
        Expr::Unary(_, inner) if i == 0 => Some(inner),
        Expr::Binary(_, l, _) if i == 0 => Some(l),
        Expr::Binary(_, _, r) if i == 1 => Some(r),
        Expr::Call(_, args) => args.get(i),
        _ => None,
    }
}

fn expr_child_mut(e: &mut Expr, i: usize) -> Option<&mut Expr> {
    match e {
        Expr::Unary(_, inner) if i == 0 => Some(inner),
        Expr::Binary(_, l, _) if i == 0 => Some(l),
        Expr::Binary(_, _, r) if i == 1 => Some(r),
        Expr::Call(_, args) => args.get_mut(i),
        _ => None,
    }
}

pub fn resolve<'a>(p: &'a Program, path: &[usize]) -> Option<Node<'a>> {
    let (&f, rest) = path.split_first()?;
    let mut node = Node::Block(&p.functions.get(f)?.body);
    for &i in rest {
        node = match node {
            Node::Block(b) => Node::Stmt(b.get(i)?),
            Node::Stmt(s) => stmt_child(s, i)?,
            Node::Expr(e) => Node::Expr(expr_child(e, i)?),
        };
    }
    Some(node)
}

pub fn resolve_mut<'a>(p: &'a mut Program, path: &[usize]) -> Option<NodeMut<'a>> {
    let (&f, rest) = path.split_first()?;
    let mut node = NodeMut::Block(&mut p.functions.get_mut(f)?.body);
    for &i in rest {
        node = match node {
            NodeMut::Block(b) => NodeMut::Stmt(b.get_mut(i)?),
            NodeMut::Stmt(s) => stmt_child_mut(s, i)?,
            NodeMut::Expr(e) => NodeMut::Expr(expr_child_mut(e, i)?),
        };
    }
    Some(node)
}

pub fn block_mut<'a>(p: &'a mut Program, path: &[usize]) -> Option<&'a mut Block> {
    match resolve_mut(p, path)? {
        NodeMut::Block(b) => Some(b),
        _ => None,
    }
}

pub fn stmt_mut<'a>(p: &'a mut Program, path: &[usize]) -> Option<&'a mut Stmt> {
    match resolve_mut(p, path)? {
        NodeMut::Stmt(s) => Some(s),
        _ => None,
    }
}

pub fn expr_mut<'a>(p: &'a mut Program, path: &[usize]) -> Option<&'a mut Expr> {
    match resolve_mut(p, path)? {
        NodeMut::Expr(e) => Some(e),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use minilang::parse;

    #[test]
    fn resolves_nested_nodes() {
        let p = parse("fn f(a){ if (a < 1) { return a + 2; } return 0; }").unwrap();
        assert!(matches!(resolve(&p, &[0]), Some(Node::Block(b)) if b.len() == 2));
        assert!(matches!(resolve(&p, &[0, 0]), Some(Node::Stmt(Stmt::If { .. }))));
        assert!(matches!(resolve(&p, &[0, 0, 0]), Some(Node::Expr(Expr::Binary(..)))));
        assert!(matches!(
            resolve(&p, &[0, 0, 1, 0, 0, 1]),
            Some(Node::Expr(Expr::Int(2)))
        ));
        assert!(resolve(&p, &[0, 0, 3]).is_none());
        assert!(resolve(&p, &[1]).is_none());
        assert!(resolve(&p, &[]).is_none());
    }
}
