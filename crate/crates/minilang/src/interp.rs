//! Fuel-bounded interpreter.
//!
//! Evaluation runs on an explicit task stack rather than Rust recursion, so
//! deep MiniLang recursion is bounded only by fuel. Every statement
//! execution (including each re-check of a `while` condition) and every
//! operator or call application consumes one unit of fuel.

use std::collections::HashMap;
use std::fmt;

use crate::ast::{BinOp, Block, Expr, Program, Stmt, UnaryOp};

pub const DEFAULT_FUEL: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Int(i64),
    Bool(bool),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RuntimeError {
    DivByZero,
    TypeError,
    UndefinedVar,
    UndefinedFn,
    ArityMismatch,
    NoReturn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    Ok(Value),
    Error(RuntimeError),
    FuelExhausted,
}

impl Outcome {
    pub fn is_fuel_exhausted(&self) -> bool {
        matches!(self, Outcome::FuelExhausted)
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Ok(Value::Int(v)) => write!(f, "ok:int:{v}"),
            Outcome::Ok(Value::Bool(b)) => write!(f, "ok:bool:{b}"),
            Outcome::Error(e) => write!(f, "error:{e:?}"),
            Outcome::FuelExhausted => f.write_str("fuel"),
        }
    }
}

pub fn apply_unary(op: UnaryOp, v: Value) -> Result<Value, RuntimeError> {
    match (op, v) {
        (UnaryOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
        (UnaryOp::Neg, Value::Int(i)) => Ok(Value::Int(i.wrapping_neg())),
        _ => Err(RuntimeError::TypeError),
    }
}

/// Applies a binary operator to already-evaluated operands. Types are checked
/// before the zero-divisor test.
pub fn apply_binary(op: BinOp, l: Value, r: Value) -> Result<Value, RuntimeError> {
    use BinOp::*;
    use Value::{Bool, Int};
    match (op, l, r) {
        (Or, Bool(a), Bool(b)) => Ok(Bool(a || b)),
        (And, Bool(a), Bool(b)) => Ok(Bool(a && b)),
        (Eq, Int(a), Int(b)) => Ok(Bool(a == b)),
        (Eq, Bool(a), Bool(b)) => Ok(Bool(a == b)),
        (Ne, Int(a), Int(b)) => Ok(Bool(a != b)),
        (Ne, Bool(a), Bool(b)) => Ok(Bool(a != b)),
        (Lt, Int(a), Int(b)) => Ok(Bool(a < b)),
        (Le, Int(a), Int(b)) => Ok(Bool(a <= b)),
        (Gt, Int(a), Int(b)) => Ok(Bool(a > b)),
        (Ge, Int(a), Int(b)) => Ok(Bool(a >= b)),
        (Add, Int(a), Int(b)) => Ok(Int(a.wrapping_add(b))),
        (Sub, Int(a), Int(b)) => Ok(Int(a.wrapping_sub(b))),
        (Mul, Int(a), Int(b)) => Ok(Int(a.wrapping_mul(b))),
        (Div | Rem, Int(_), Int(0)) => Err(RuntimeError::DivByZero),
        (Div, Int(a), Int(b)) => Ok(Int(a.wrapping_div(b))),
        (Rem, Int(a), Int(b)) => Ok(Int(a.wrapping_rem(b))),
        _ => Err(RuntimeError::TypeError),
    }
}

/// Evaluates an expression built only from literals and operators. Returns
/// `None` if it mentions a variable or a call.
pub fn eval_const(e: &Expr) -> Option<Result<Value, RuntimeError>> {
    Some(match e {
        Expr::Int(v) => Ok(Value::Int(*v)),
        Expr::Bool(b) => Ok(Value::Bool(*b)),
        Expr::Var(_) | Expr::Call(..) => return None,
        Expr::Unary(op, inner) => match eval_const(inner)? {
            Ok(v) => apply_unary(*op, v),
            Err(err) => Err(err),
        },
        Expr::Binary(op, l, r) => {
            let l = eval_const(l)?;
            let r = eval_const(r)?;
            match (l, r) {
                (Err(err), _) | (_, Err(err)) => Err(err),
                (Ok(a), Ok(b)) => apply_binary(*op, a, b),
            }
        }
    })
}

enum Task<'a> {
    Eval(&'a Expr),
    Unary(UnaryOp),
    Binary(BinOp),
    Call(&'a str, usize),
    Exec(&'a Stmt),
    Block(&'a Block, usize),
    Bind(&'a str),
    Assign(&'a str),
    Branch(&'a Block, &'a Block),
    Loop(&'a Stmt, &'a Block),
    Return,
    FrameEnd,
}

struct Frame<'a> {
    env: HashMap<&'a str, Value>,
    task_base: usize,
    value_base: usize,
}

struct Machine<'a> {
    program: &'a Program,
    tasks: Vec<Task<'a>>,
    values: Vec<Value>,
    frames: Vec<Frame<'a>>,
    fuel: u64,
}

enum Halt {
    Done(Value),
    Fail(RuntimeError),
    OutOfFuel,
}

impl<'a> Machine<'a> {
    fn tick(&mut self) -> Result<(), Halt> {
        if self.fuel == 0 {
            return Err(Halt::OutOfFuel);
        }
        self.fuel -= 1;
        Ok(())
    }

    fn enter(&mut self, name: &str, args: Vec<Value>) -> Result<(), Halt> {
        let f = self
            .program
            .function(name)
            .ok_or(Halt::Fail(RuntimeError::UndefinedFn))?;
        if f.params.len() != args.len() {
            return Err(Halt::Fail(RuntimeError::ArityMismatch));
        }
        let env = f.params.iter().map(String::as_str).zip(args).collect();
        self.frames.push(Frame {
            env,
            task_base: self.tasks.len(),
            value_base: self.values.len(),
        });
        self.tasks.push(Task::FrameEnd);
        self.tasks.push(Task::Block(&f.body, 0));
        Ok(())
    }

    fn pop(&mut self) -> Value {
        self.values.pop().expect("value stack underflow")
    }

    fn env(&mut self) -> &mut HashMap<&'a str, Value> {
        &mut self.frames.last_mut().expect("no active frame").env
    }

    fn step(&mut self, task: Task<'a>) -> Result<(), Halt> {
        match task {
            Task::Eval(e) => match e {
                Expr::Int(v) => self.values.push(Value::Int(*v)),
                Expr::Bool(b) => self.values.push(Value::Bool(*b)),
                Expr::Var(n) => {
                    let v = *self
                        .env()
                        .get(n.as_str())
                        .ok_or(Halt::Fail(RuntimeError::UndefinedVar))?;
                    self.values.push(v);
                }
                Expr::Unary(op, inner) => {
                    self.tasks.push(Task::Unary(*op));
                    self.tasks.push(Task::Eval(inner));
                }
                Expr::Binary(op, l, r) => {
                    self.tasks.push(Task::Binary(*op));
                    self.tasks.push(Task::Eval(r));
                    self.tasks.push(Task::Eval(l));
                }
                Expr::Call(name, args) => {
                    self.tasks.push(Task::Call(name, args.len()));
                    for a in args.iter().rev() {
                        self.tasks.push(Task::Eval(a));
                    }
                }
            },
            Task::Unary(op) => {
                self.tick()?;
                let v = self.pop();
                self.values.push(apply_unary(op, v).map_err(Halt::Fail)?);
            }
            Task::Binary(op) => {
                self.tick()?;
                let r = self.pop();
                let l = self.pop();
                self.values.push(apply_binary(op, l, r).map_err(Halt::Fail)?);
            }
            Task::Call(name, n) => {
                self.tick()?;
                let args = self.values.split_off(self.values.len() - n);
                self.enter(name, args)?;
            }
            Task::Block(block, i) => {
                if let Some(s) = block.get(i) {
                    self.tasks.push(Task::Block(block, i + 1));
                    self.tasks.push(Task::Exec(s));
                }
            }
            Task::Exec(s) => {
                self.tick()?;
                match s {
                    Stmt::Let { name, value } => {
                        self.tasks.push(Task::Bind(name));
                        self.tasks.push(Task::Eval(value));
                    }
                    Stmt::Assign { name, value } => {
                        self.tasks.push(Task::Assign(name));
                        self.tasks.push(Task::Eval(value));
                    }
                    Stmt::If {
                        cond,
                        then_block,
                        else_block,
                    } => {
                        self.tasks.push(Task::Branch(then_block, else_block));
                        self.tasks.push(Task::Eval(cond));
                    }
                    Stmt::While { cond, body } => {
                        self.tasks.push(Task::Loop(s, body));
                        self.tasks.push(Task::Eval(cond));
                    }
                    Stmt::Return(e) => {
                        self.tasks.push(Task::Return);
                        self.tasks.push(Task::Eval(e));
                    }
                }
            }
            Task::Bind(name) => {
                let v = self.pop();
                self.env().insert(name, v);
            }
            Task::Assign(name) => {
                let v = self.pop();
                match self.env().get_mut(name) {
                    Some(slot) => *slot = v,
                    None => return Err(Halt::Fail(RuntimeError::UndefinedVar)),
                }
            }
            Task::Branch(then_block, else_block) => match self.pop() {
                Value::Bool(true) => self.tasks.push(Task::Block(then_block, 0)),
                Value::Bool(false) => self.tasks.push(Task::Block(else_block, 0)),
                Value::Int(_) => return Err(Halt::Fail(RuntimeError::TypeError)),
            },
            Task::Loop(stmt, body) => match self.pop() {
                Value::Bool(true) => {
                    self.tasks.push(Task::Exec(stmt));
                    self.tasks.push(Task::Block(body, 0));
                }
                Value::Bool(false) => {}
                Value::Int(_) => return Err(Halt::Fail(RuntimeError::TypeError)),
            },
            Task::Return => {
                let v = self.pop();
                let frame = self.frames.pop().expect("return outside frame");
                if self.frames.is_empty() {
                    return Err(Halt::Done(v));
                }
                self.tasks.truncate(frame.task_base);
                self.values.truncate(frame.value_base);
                self.values.push(v);
            }
            Task::FrameEnd => return Err(Halt::Fail(RuntimeError::NoReturn)),
        }
        Ok(())
    }

    fn run(mut self, entry: &str, args: &[Value]) -> Outcome {
        let halt = match self.enter(entry, args.to_vec()) {
            Err(h) => h,
            Ok(()) => loop {
                let task = self.tasks.pop().expect("task stack drained without halting");
                if let Err(h) = self.step(task) {
                    break h;
                }
            },
        };
        match halt {
            Halt::Done(v) => Outcome::Ok(v),
            Halt::Fail(e) => Outcome::Error(e),
            Halt::OutOfFuel => Outcome::FuelExhausted,
        }
    }
}

/// Runs `entry(args)` with at most `fuel` steps. Never panics on program
/// errors; they are returned as [`Outcome::Error`].
pub fn interpret(program: &Program, entry: &str, args: &[Value], fuel: u64) -> Outcome {
    Machine {
        program,
        tasks: Vec::new(),
        values: Vec::new(),
        frames: Vec::new(),
        fuel,
    }
    .run(entry, args)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse;

    fn run(src: &str, args: &[i64]) -> Outcome {
        let p = parse(src).unwrap();
        let args: Vec<Value> = args.iter().map(|&v| Value::Int(v)).collect();
        interpret(&p, "main", &args, DEFAULT_FUEL)
    }

    #[test]
    fn absolute_value() {
        let src = "fn main(a){ if(a<0){return 0-a;} else {return a;} }";
        assert_eq!(run(src, &[-5]), Outcome::Ok(Value::Int(5)));
        assert_eq!(run(src, &[7]), Outcome::Ok(Value::Int(7)));
    }

    #[test]
    fn division_by_zero() {
        assert_eq!(
            run("fn main(){return 1/0;}", &[]),
            Outcome::Error(RuntimeError::DivByZero)
        );
        assert_eq!(
            run("fn main(){return 1%0;}", &[]),
            Outcome::Error(RuntimeError::DivByZero)
        );
    }

    #[test]
    fn wrapping_arithmetic() {
        assert_eq!(
            run("fn main(){return 9223372036854775807+1;}", &[]),
            Outcome::Ok(Value::Int(i64::MIN))
        );
        assert_eq!(
            run("fn main(a){return a / (0 - 1);}", &[i64::MIN]),
            Outcome::Ok(Value::Int(i64::MIN))
        );
    }

    #[test]
    fn type_check_happens_after_both_operands() {
        // right operand error wins over the left operand's wrong type
        assert_eq!(
            run("fn main(){return true + (1/0);}", &[]),
            Outcome::Error(RuntimeError::DivByZero)
        );
        assert_eq!(
            run("fn main(){return true + 1;}", &[]),
            Outcome::Error(RuntimeError::TypeError)
        );
        // no short circuit
        assert_eq!(
            run("fn main(){return false && (1/0 == 1);}", &[]),
            Outcome::Error(RuntimeError::DivByZero)
        );
    }

    #[test]
    fn error_kinds() {
        assert_eq!(
            run("fn main(){return x;}", &[]),
            Outcome::Error(RuntimeError::UndefinedVar)
        );
        assert_eq!(
            run("fn main(){x = 1; return 0;}", &[]),
            Outcome::Error(RuntimeError::UndefinedVar)
        );
        assert_eq!(
            run("fn main(){return g(1);}", &[]),
            Outcome::Error(RuntimeError::UndefinedFn)
        );
        assert_eq!(
            run("fn g(a){return a;} fn main(){return g();}", &[]),
            Outcome::Error(RuntimeError::ArityMismatch)
        );
        assert_eq!(
            run("fn main(){let a = 1;}", &[]),
            Outcome::Error(RuntimeError::NoReturn)
        );
        assert_eq!(
            run("fn main(){if (1) {return 1;} return 0;}", &[]),
            Outcome::Error(RuntimeError::TypeError)
        );
        assert_eq!(
            run("fn main(){return 0;}", &[1]),
            Outcome::Error(RuntimeError::ArityMismatch)
        );
    }

    #[test]
    fn calls_and_recursion() {
        let src = "fn fact(n){ if (n <= 1) { return 1; } return n * fact(n - 1); }
                   fn main(n){ return fact(n); }";
        assert_eq!(run(src, &[10]), Outcome::Ok(Value::Int(3628800)));
    }

    #[test]
    fn deep_recursion_runs_out_of_fuel_not_stack() {
        let src = "fn main(n){ return main(n + 1); }";
        assert_eq!(run(src, &[0]), Outcome::FuelExhausted);
    }

    #[test]
    fn callee_environment_is_isolated() {
        let src = "fn g(){ return a; } fn main(a){ return g(); }";
        assert_eq!(run(src, &[1]), Outcome::Error(RuntimeError::UndefinedVar));
    }

    #[test]
    fn empty_loop_consumes_fuel() {
        let p = parse("fn main(){ while (true) {} return 0; }").unwrap();
        assert_eq!(interpret(&p, "main", &[], 1000), Outcome::FuelExhausted);
    }

    #[test]
    fn fuel_accounting_is_exact() {
        // let (1) + add (1) + return (1)
        let p = parse("fn main(){ let a = 1 + 2; return a; }").unwrap();
        assert_eq!(interpret(&p, "main", &[], 2), Outcome::FuelExhausted);
        assert_eq!(interpret(&p, "main", &[], 3), Outcome::Ok(Value::Int(3)));
    }

    #[test]
    fn const_eval() {
        let p = parse("fn f(){return 2+3*4;}").unwrap();
        let Stmt::Return(e) = &p.functions[0].body[0] else {
            unreachable!()
        };
        assert_eq!(eval_const(e), Some(Ok(Value::Int(14))));
        assert_eq!(eval_const(&Expr::var("x")), None);
    }
}
