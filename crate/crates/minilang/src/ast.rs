//! Abstract syntax tree.
//!
//! An `if` without `else` is represented with an empty else block; the
//! pretty-printer omits empty else blocks, so the two spellings are the same
//! tree.

use std::collections::BTreeSet;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Program {
    pub functions: Vec<FnDef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FnDef {
    pub name: String,
    pub params: Vec<String>,
    pub body: Block,
}

pub type Block = Vec<Stmt>;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Stmt {
    Let {
        name: String,
        value: Expr,
    },
    Assign {
        name: String,
        value: Expr,
    },
    If {
        cond: Expr,
        then_block: Block,
        else_block: Block,
    },
    While {
        cond: Expr,
        body: Block,
    },
    Return(Expr),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UnaryOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
    Rem,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Int(i64),
    Bool(bool),
    Var(String),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
}

impl UnaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            UnaryOp::Not => "!",
            UnaryOp::Neg => "-",
        }
    }
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Or => "||",
            BinOp::And => "&&",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
        }
    }

    /// Binding strength; higher binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 3,
            BinOp::Add | BinOp::Sub => 4,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 5,
        }
    }

    pub fn is_comparison(self) -> bool {
        self.precedence() == 3
    }
}

impl fmt::Display for BinOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl Expr {
    pub fn int(v: i64) -> Expr {
        Expr::Int(v)
    }

    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn unary(op: UnaryOp, e: Expr) -> Expr {
        Expr::Unary(op, Box::new(e))
    }

    pub fn binary(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }

    /// Canonical literal expression for an integer: negative values other
    /// than `i64::MIN` become `-(n)`, so that folding never produces a tree
    /// the parser could not.
    pub fn int_literal(v: i64) -> Expr {
        if v < 0 && v != i64::MIN {
            Expr::unary(UnaryOp::Neg, Expr::Int(-v))
        } else {
            Expr::Int(v)
        }
    }

    pub fn is_literal(&self) -> bool {
        matches!(self, Expr::Int(_) | Expr::Bool(_))
    }

    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Int(_) | Expr::Bool(_) | Expr::Var(_) => vec![],
            Expr::Unary(_, e) => vec![e],
            Expr::Binary(_, l, r) => vec![l, r],
            Expr::Call(_, args) => args.iter().collect(),
        }
    }

    pub fn any(&self, pred: &mut impl FnMut(&Expr) -> bool) -> bool {
        pred(self) || self.children().into_iter().any(|c| c.any(pred))
    }

    pub fn contains_call(&self) -> bool {
        self.any(&mut |e| matches!(e, Expr::Call(..)))
    }

    pub fn contains_op(&self, ops: &[BinOp]) -> bool {
        self.any(&mut |e| matches!(e, Expr::Binary(op, ..) if ops.contains(op)))
    }

    /// Variable names read by this expression.
    pub fn reads(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Var(n) => {
                out.insert(n.clone());
            }
            _ => self.children().into_iter().for_each(|c| c.reads(out)),
        }
    }

    pub fn read_set(&self) -> BTreeSet<String> {
        let mut s = BTreeSet::new();
        self.reads(&mut s);
        s
    }
}

impl Stmt {
    pub fn exprs(&self) -> Vec<&Expr> {
        match self {
            Stmt::Let { value, .. } | Stmt::Assign { value, .. } => vec![value],
            Stmt::If { cond, .. } | Stmt::While { cond, .. } => vec![cond],
            Stmt::Return(e) => vec![e],
        }
    }

    pub fn blocks(&self) -> Vec<&Block> {
        match self {
            Stmt::If {
                then_block, else_block, ..
            } => vec![then_block, else_block],
            Stmt::While { body, .. } => vec![body],
            _ => vec![],
        }
    }
}

/// Visits every statement of a block in preorder.
pub fn walk_stmts<'a>(block: &'a Block, f: &mut impl FnMut(&'a Stmt)) {
    for s in block {
        f(s);
        for b in s.blocks() {
            walk_stmts(b, f);
        }
    }
}

/// Visits every expression node (including subexpressions) of a block.
pub fn walk_exprs<'a>(block: &'a Block, f: &mut impl FnMut(&'a Expr)) {
    fn go<'a>(e: &'a Expr, f: &mut impl FnMut(&'a Expr)) {
        f(e);
        for c in e.children() {
            go(c, f);
        }
    }
    walk_stmts(block, &mut |s| {
        for e in s.exprs() {
            go(e, f);
        }
    });
}

impl FnDef {
    /// Parameters and `let`-bound names, in first-occurrence order.
    pub fn binders(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for p in &self.params {
            if !out.contains(p) {
                out.push(p.clone());
            }
        }
        walk_stmts(&self.body, &mut |s| {
            if let Stmt::Let { name, .. } = s {
                if !out.contains(name) {
                    out.push(name.clone());
                }
            }
        });
        out
    }

    /// Every identifier spelled anywhere in the function, including called
    /// function names.
    pub fn identifiers(&self) -> BTreeSet<String> {
        let mut out: BTreeSet<String> = self.params.iter().cloned().collect();
        out.insert(self.name.clone());
        walk_stmts(&self.body, &mut |s| match s {
            Stmt::Let { name, .. } | Stmt::Assign { name, .. } => {
                out.insert(name.clone());
            }
            _ => {}
        });
        walk_exprs(&self.body, &mut |e| match e {
            Expr::Var(n) | Expr::Call(n, _) => {
                out.insert(n.clone());
            }
            _ => {}
        });
        out
    }

    /// Names read anywhere in the body.
    pub fn read_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        walk_exprs(&self.body, &mut |e| {
            if let Expr::Var(n) = e {
                out.insert(n.clone());
            }
        });
        out
    }

    /// Names that are targets of assignment (not `let`) anywhere in the body.
    pub fn assigned_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        walk_stmts(&self.body, &mut |s| {
            if let Stmt::Assign { name, .. } = s {
                out.insert(name.clone());
            }
        });
        out
    }
}

impl Program {
    pub fn function(&self, name: &str) -> Option<&FnDef> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn function_names(&self) -> BTreeSet<String> {
        self.functions.iter().map(|f| f.name.clone()).collect()
    }

    pub fn identifiers(&self) -> BTreeSet<String> {
        self.functions.iter().flat_map(|f| f.identifiers()).collect()
    }

    /// Number of AST nodes; a rough size measure.
    pub fn size(&self) -> usize {
        let mut n = 0;
        for f in &self.functions {
            n += 1;
            walk_stmts(&f.body, &mut |_| n += 1);
            walk_exprs(&f.body, &mut |_| n += 1);
        }
        n
    }
}
