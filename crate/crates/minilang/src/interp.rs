//! Tree-walking interpreter with line tracing and branch-distance
//! instrumentation.
//!
//! Every executed statement costs one step and appends its line to the trace;
//! a `while` statement is charged once per condition check. Each evaluation
//! of an `if`/`while` condition inside a project function is recorded as a
//! [`BranchHit`] carrying the raw distances to both outcomes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ast::*;
use crate::typeck::{DeclRef, FileId, TypedProgram, BUILTIN_LEN};
use crate::value::{RecordValue, Value};

pub const DEFAULT_STEP_BUDGET: u64 = 100_000;

/// Maximum nesting of MiniLang calls before a `StackOverflow` runtime error.
pub const MAX_CALL_DEPTH: u32 = 200;

/// Constant added to unsatisfied relational predicates.
const K: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RuntimeErrorKind {
    DivisionByZero,
    IndexOutOfRange,
    AssertionFailed,
    ExpectedErrorNotRaised,
    ArithmeticOverflow,
    StackOverflow,
}

impl std::fmt::Display for RuntimeErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RuntimeErrorKind::DivisionByZero => "division by zero",
            RuntimeErrorKind::IndexOutOfRange => "index out of range",
            RuntimeErrorKind::AssertionFailed => "assertion failed",
            RuntimeErrorKind::ExpectedErrorNotRaised => "expected an error but none was raised",
            RuntimeErrorKind::ArithmeticOverflow => "arithmetic overflow",
            RuntimeErrorKind::StackOverflow => "call depth exceeded",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Outcome {
    Normal(Value),
    RuntimeError { kind: RuntimeErrorKind, line: Line },
    StepLimitExceeded,
}

impl Outcome {
    /// Failure text as shown to users, or `None` for normal completion.
    pub fn error_message(&self) -> Option<String> {
        match self {
            Outcome::Normal(_) => None,
            Outcome::RuntimeError { kind, line } => Some(format!("line {line}: {kind}")),
            Outcome::StepLimitExceeded => Some("step limit exceeded".to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TracePoint {
    pub file: FileId,
    pub line: Line,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchHit {
    pub function: DeclRef,
    pub branch: BranchId,
    pub taken: bool,
    /// Raw (unnormalised) distance to making the condition true.
    pub distance_true: f64,
    pub distance_false: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub outcome: Outcome,
    pub trace: Vec<TracePoint>,
    pub steps: u64,
    pub branches: Vec<BranchHit>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EntryError {
    #[error("unknown function '{0}'")]
    UnknownFunction(String),
    #[error("unknown test '{0}'")]
    UnknownTest(String),
    #[error("function '{name}' expects {expected} arguments, found {found}")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("entry must be a function call")]
    NotACall,
}

/// Calls `function` with already-evaluated arguments.
pub fn call_function(
    program: &TypedProgram,
    function: &str,
    args: Vec<Value>,
    step_budget: u64,
) -> Result<ExecutionResult, EntryError> {
    let fref = program
        .function_ref(function)
        .ok_or_else(|| EntryError::UnknownFunction(function.to_string()))?;
    let decl = program.function_by_ref(fref);
    if decl.params.len() != args.len() {
        return Err(EntryError::Arity {
            name: function.to_string(),
            expected: decl.params.len(),
            found: args.len(),
        });
    }
    let mut m = Machine::new(program, step_budget);
    let result = m.invoke(fref, args, 0);
    Ok(m.finish(result))
}

/// Evaluates an entry call expression such as `inc(41)`; arguments are
/// evaluated in an empty environment.
pub fn interpret(
    program: &TypedProgram,
    entry: &Expr,
    step_budget: u64,
) -> Result<ExecutionResult, EntryError> {
    let ExprKind::Call(name, _) = &entry.kind else {
        return Err(EntryError::NotACall);
    };
    if name != BUILTIN_LEN && program.function_ref(name).is_none() {
        return Err(EntryError::UnknownFunction(name.clone()));
    }
    let mut m = Machine::new(program, step_budget);
    let mut env = Env::default();
    let ctx = Ctx {
        file: FileId(u32::MAX),
        owner: None,
    };
    let result = m.eval(entry, &mut env, ctx);
    Ok(m.finish(result))
}

/// Runs a test body. Normal completion means every assertion held.
pub fn run_test(
    program: &TypedProgram,
    test: &str,
    step_budget: u64,
) -> Result<ExecutionResult, EntryError> {
    let (decl, tref) = program
        .test(test)
        .ok_or_else(|| EntryError::UnknownTest(test.to_string()))?;
    let mut m = Machine::new(program, step_budget);
    let mut env = Env::default();
    let ctx = Ctx {
        file: tref.file,
        owner: None,
    };
    let result = m
        .exec_block(&decl.body, &mut env, ctx)
        .map(|flow| match flow {
            Flow::Return(v) => v,
            Flow::Next => Value::Unit,
        });
    Ok(m.finish(result))
}

/// Raw branch distance for a relational comparison, K = 1.
///
/// Integer operands follow the usual rules (`a < b`: 0 if satisfied else
/// `a - b + 1`; `a == b`: `|a - b|`; `a != b`: 0 or 1). Non-integer operands
/// are only comparable for (in)equality and score 0 or 1.
pub fn branch_distance(op: BinOp, lhs: &Value, rhs: &Value, desired: bool) -> f64 {
    let (t, f) = relational_distances(op, lhs, rhs);
    if desired {
        t
    } else {
        f
    }
}

fn relational_distances(op: BinOp, lhs: &Value, rhs: &Value) -> (f64, f64) {
    if let (Value::Int(a), Value::Int(b)) = (lhs, rhs) {
        let (a, b) = (*a as f64, *b as f64);
        let lt = |x: f64, y: f64| if x < y { 0.0 } else { x - y + K };
        let le = |x: f64, y: f64| if x <= y { 0.0 } else { x - y };
        let eq = |x: f64, y: f64| (x - y).abs();
        let ne = |x: f64, y: f64| if x != y { 0.0 } else { K };
        return match op {
            BinOp::Lt => (lt(a, b), le(b, a)),
            BinOp::Le => (le(a, b), lt(b, a)),
            BinOp::Gt => (lt(b, a), le(a, b)),
            BinOp::Ge => (le(b, a), lt(a, b)),
            BinOp::Eq => (eq(a, b), ne(a, b)),
            BinOp::Ne => (ne(a, b), eq(a, b)),
            _ => (0.0, 0.0),
        };
    }
    let equal = lhs == rhs;
    let holds = match op {
        BinOp::Eq => equal,
        BinOp::Ne => !equal,
        _ => false,
    };
    if holds {
        (0.0, K)
    } else {
        (K, 0.0)
    }
}

enum Halt {
    Error(RuntimeErrorKind, Line),
    StepLimit,
}

enum Flow {
    Next,
    Return(Value),
}

#[derive(Clone, Copy)]
struct Ctx {
    file: FileId,
    /// Function whose body is executing; `None` in tests and entry exprs.
    owner: Option<DeclRef>,
}

#[derive(Default)]
struct Env {
    scopes: Vec<Vec<(String, Value)>>,
}

impl Env {
    fn get(&self, name: &str) -> Option<&Value> {
        self.scopes
            .iter()
            .rev()
            .flat_map(|s| s.iter().rev())
            .find(|(n, _)| n == name)
            .map(|(_, v)| v)
    }

    fn get_mut(&mut self, name: &str) -> Option<&mut Value> {
        self.scopes
            .iter_mut()
            .rev()
            .flat_map(|s| s.iter_mut().rev())
            .find(|(n, _)| n == name)
            .map(|(_, v)| v)
    }

    fn define(&mut self, name: &str, value: Value) {
        if self.scopes.is_empty() {
            self.scopes.push(Vec::new());
        }
        self.scopes
            .last_mut()
            .unwrap()
            .push((name.to_string(), value));
    }
}

struct Machine<'p> {
    program: &'p TypedProgram,
    budget: u64,
    steps: u64,
    trace: Vec<TracePoint>,
    branches: Vec<BranchHit>,
}

type Eval<T> = Result<T, Halt>;

impl<'p> Machine<'p> {
    fn new(program: &'p TypedProgram, budget: u64) -> Self {
        Machine {
            program,
            budget,
            steps: 0,
            trace: Vec::new(),
            branches: Vec::new(),
        }
    }

    fn finish(self, result: Eval<Value>) -> ExecutionResult {
        let outcome = match result {
            Ok(v) => Outcome::Normal(v),
            Err(Halt::Error(kind, line)) => Outcome::RuntimeError { kind, line },
            Err(Halt::StepLimit) => Outcome::StepLimitExceeded,
        };
        ExecutionResult {
            outcome,
            trace: self.trace,
            steps: self.steps,
            branches: self.branches,
        }
    }

    fn tick(&mut self, line: Line, ctx: Ctx) -> Eval<()> {
        if self.steps >= self.budget {
            return Err(Halt::StepLimit);
        }
        self.steps += 1;
        self.trace.push(TracePoint {
            file: ctx.file,
            line,
        });
        Ok(())
    }

    fn invoke(&mut self, fref: DeclRef, args: Vec<Value>, depth: u32) -> Eval<Value> {
        let decl: &'p FunctionDecl = self.program.function_by_ref(fref);
        let mut env = Env::default();
        env.scopes.push(
            decl.params
                .iter()
                .map(|p| p.name.clone())
                .zip(args)
                .collect(),
        );
        let ctx = Ctx {
            file: fref.file,
            owner: Some(fref),
        };
        self.depth_guard(depth, decl.span.first_line)?;
        match self.exec_block_at(&decl.body, &mut env, ctx, depth)? {
            Flow::Return(v) => Ok(v),
            // unreachable for type-checked functions
            Flow::Next => Ok(Value::Unit),
        }
    }

    fn depth_guard(&self, depth: u32, line: Line) -> Eval<()> {
        if depth >= MAX_CALL_DEPTH {
            Err(Halt::Error(RuntimeErrorKind::StackOverflow, line))
        } else {
            Ok(())
        }
    }

    fn exec_block(&mut self, block: &'p Block, env: &mut Env, ctx: Ctx) -> Eval<Flow> {
        self.exec_block_at(block, env, ctx, 0)
    }

    fn exec_block_at(
        &mut self,
        block: &'p Block,
        env: &mut Env,
        ctx: Ctx,
        depth: u32,
    ) -> Eval<Flow> {
        env.scopes.push(Vec::new());
        let mut result = Ok(Flow::Next);
        for stmt in &block.stmts {
            match self.exec_stmt(stmt, env, ctx, depth) {
                Ok(Flow::Next) => {}
                other => {
                    result = other;
                    break;
                }
            }
        }
        env.scopes.pop();
        result
    }

    fn exec_stmt(&mut self, stmt: &'p Stmt, env: &mut Env, ctx: Ctx, depth: u32) -> Eval<Flow> {
        let line = stmt.line;
        self.tick(line, ctx)?;
        match &stmt.kind {
            StmtKind::Let { name, value, .. } => {
                let v = self.eval_at(value, env, ctx, depth)?;
                env.define(name, v);
            }
            StmtKind::Assign { name, value } => {
                let v = self.eval_at(value, env, ctx, depth)?;
                if let Some(slot) = env.get_mut(name) {
                    *slot = v;
                }
            }
            StmtKind::IndexAssign { name, index, value } => {
                let idx = self.eval_int(index, env, ctx, depth)?;
                let v = self.eval_int(value, env, ctx, depth)?;
                if let Some(Value::Array(items)) = env.get_mut(name) {
                    let slot = usize::try_from(idx)
                        .ok()
                        .and_then(|i| items.get_mut(i))
                        .ok_or(Halt::Error(RuntimeErrorKind::IndexOutOfRange, line))?;
                    *slot = v;
                }
            }
            StmtKind::If {
                cond,
                then_block,
                else_block,
                branch,
            } => {
                let taken = self.eval_condition(cond, *branch, env, ctx, depth)?;
                if taken {
                    return self.exec_block_at(then_block, env, ctx, depth);
                } else if let Some(b) = else_block {
                    return self.exec_block_at(b, env, ctx, depth);
                }
            }
            StmtKind::While { cond, body, branch } => {
                let mut first = true;
                loop {
                    if !first {
                        self.tick(line, ctx)?;
                    }
                    first = false;
                    if !self.eval_condition(cond, *branch, env, ctx, depth)? {
                        break;
                    }
                    if let Flow::Return(v) = self.exec_block_at(body, env, ctx, depth)? {
                        return Ok(Flow::Return(v));
                    }
                }
            }
            StmtKind::Return(value) => {
                let v = match value {
                    Some(e) => self.eval_at(e, env, ctx, depth)?,
                    None => Value::Unit,
                };
                return Ok(Flow::Return(v));
            }
            StmtKind::Assert(e) => {
                if !self.eval_bool(e, env, ctx, depth)? {
                    return Err(Halt::Error(RuntimeErrorKind::AssertionFailed, line));
                }
            }
            StmtKind::ExpectError(e) => match self.eval_at(e, env, ctx, depth) {
                Ok(_) => return Err(Halt::Error(RuntimeErrorKind::ExpectedErrorNotRaised, line)),
                Err(Halt::Error(..)) => {}
                Err(Halt::StepLimit) => return Err(Halt::StepLimit),
            },
            StmtKind::Expr(e) => {
                self.eval_at(e, env, ctx, depth)?;
            }
        }
        Ok(Flow::Next)
    }

    /// Evaluates an `if`/`while` condition, recording a branch hit when
    /// running inside a project function.
    fn eval_condition(
        &mut self,
        cond: &'p Expr,
        branch: BranchId,
        env: &mut Env,
        ctx: Ctx,
        depth: u32,
    ) -> Eval<bool> {
        let (taken, dt, df) = self.eval_distances(cond, env, ctx, depth)?;
        if let Some(function) = ctx.owner {
            self.branches.push(BranchHit {
                function,
                branch,
                taken,
                distance_true: dt,
                distance_false: df,
            });
        }
        Ok(taken)
    }

    /// Evaluates a boolean expression and its distances to true and false.
    /// Short-circuited operands are not evaluated; their distance counts as K.
    fn eval_distances(
        &mut self,
        e: &'p Expr,
        env: &mut Env,
        ctx: Ctx,
        depth: u32,
    ) -> Eval<(bool, f64, f64)> {
        match &e.kind {
            ExprKind::Unary(UnaryOp::Not, inner) => {
                let (v, t, f) = self.eval_distances(inner, env, ctx, depth)?;
                Ok((!v, f, t))
            }
            ExprKind::Binary(BinOp::And, l, r) => {
                let (lv, lt, lf) = self.eval_distances(l, env, ctx, depth)?;
                if !lv {
                    return Ok((false, lt + K, 0.0));
                }
                let (rv, rt, rf) = self.eval_distances(r, env, ctx, depth)?;
                Ok((rv, lt + rt, lf.min(rf)))
            }
            ExprKind::Binary(BinOp::Or, l, r) => {
                let (lv, lt, lf) = self.eval_distances(l, env, ctx, depth)?;
                if lv {
                    return Ok((true, 0.0, lf + K));
                }
                let (rv, rt, rf) = self.eval_distances(r, env, ctx, depth)?;
                Ok((rv, lt.min(rt), lf + rf))
            }
            ExprKind::Binary(op, l, r) if op.is_relational() => {
                let a = self.eval_at(l, env, ctx, depth)?;
                let b = self.eval_at(r, env, ctx, depth)?;
                let v = compare(*op, &a, &b);
                let (t, f) = relational_distances(*op, &a, &b);
                Ok((v, t, f))
            }
            _ => {
                let v = self.eval_bool(e, env, ctx, depth)?;
                Ok(if v { (true, 0.0, K) } else { (false, K, 0.0) })
            }
        }
    }

    fn eval(&mut self, e: &'p Expr, env: &mut Env, ctx: Ctx) -> Eval<Value> {
        self.eval_at(e, env, ctx, 0)
    }

    fn eval_int(&mut self, e: &'p Expr, env: &mut Env, ctx: Ctx, depth: u32) -> Eval<i64> {
        match self.eval_at(e, env, ctx, depth)? {
            Value::Int(n) => Ok(n),
            _ => Ok(0),
        }
    }

    fn eval_bool(&mut self, e: &'p Expr, env: &mut Env, ctx: Ctx, depth: u32) -> Eval<bool> {
        match self.eval_at(e, env, ctx, depth)? {
            Value::Bool(b) => Ok(b),
            _ => Ok(false),
        }
    }

    fn eval_at(&mut self, e: &'p Expr, env: &mut Env, ctx: Ctx, depth: u32) -> Eval<Value> {
        let line = e.line;
        let overflow = Halt::Error(RuntimeErrorKind::ArithmeticOverflow, line);
        Ok(match &e.kind {
            ExprKind::Int(n) => Value::Int(*n),
            ExprKind::Bool(b) => Value::Bool(*b),
            ExprKind::Array(items) => {
                let mut out = Vec::with_capacity(items.len());
                for item in items {
                    out.push(self.eval_int(item, env, ctx, depth)?);
                }
                Value::Array(out)
            }
            ExprKind::Record { name, fields } => {
                let mut given = Vec::with_capacity(fields.len());
                for (fname, value) in fields {
                    given.push((fname.as_str(), self.eval_at(value, env, ctx, depth)?));
                }
                let layout = self
                    .program
                    .record_info(name)
                    .map(|i| i.fields.as_slice())
                    .unwrap_or(&[]);
                let fields = layout
                    .iter()
                    .filter_map(|(fname, _)| {
                        given
                            .iter()
                            .position(|(g, _)| g == fname)
                            .map(|i| (fname.clone(), given[i].1.clone()))
                    })
                    .collect();
                Value::Record(RecordValue {
                    type_name: name.clone(),
                    fields,
                })
            }
            ExprKind::Var(name) => env.get(name).cloned().unwrap_or(Value::Unit),
            ExprKind::Field(base, field) => match self.eval_at(base, env, ctx, depth)? {
                Value::Record(r) => r.get(field).cloned().unwrap_or(Value::Unit),
                _ => Value::Unit,
            },
            ExprKind::Index(base, idx) => {
                let b = self.eval_at(base, env, ctx, depth)?;
                let i = self.eval_int(idx, env, ctx, depth)?;
                match b {
                    Value::Array(items) => usize::try_from(i)
                        .ok()
                        .and_then(|i| items.get(i).copied())
                        .map(Value::Int)
                        .ok_or(Halt::Error(RuntimeErrorKind::IndexOutOfRange, line))?,
                    _ => Value::Unit,
                }
            }
            ExprKind::Call(name, args) => {
                let mut values = Vec::with_capacity(args.len());
                for a in args {
                    values.push(self.eval_at(a, env, ctx, depth)?);
                }
                if name == BUILTIN_LEN {
                    return Ok(match values.first() {
                        Some(Value::Array(items)) => Value::Int(items.len() as i64),
                        _ => Value::Int(0),
                    });
                }
                let Some(fref) = self.program.function_ref(name) else {
                    return Ok(Value::Unit);
                };
                self.depth_guard(depth + 1, line)?;
                self.invoke(fref, values, depth + 1)?
            }
            ExprKind::Unary(UnaryOp::Neg, inner) => {
                let n = self.eval_int(inner, env, ctx, depth)?;
                Value::Int(n.checked_neg().ok_or(overflow)?)
            }
            ExprKind::Unary(UnaryOp::Not, inner) => {
                Value::Bool(!self.eval_bool(inner, env, ctx, depth)?)
            }
            ExprKind::Binary(BinOp::And, l, r) => Value::Bool(
                self.eval_bool(l, env, ctx, depth)? && self.eval_bool(r, env, ctx, depth)?,
            ),
            ExprKind::Binary(BinOp::Or, l, r) => Value::Bool(
                self.eval_bool(l, env, ctx, depth)? || self.eval_bool(r, env, ctx, depth)?,
            ),
            ExprKind::Binary(op, l, r) if op.is_relational() => {
                let a = self.eval_at(l, env, ctx, depth)?;
                let b = self.eval_at(r, env, ctx, depth)?;
                Value::Bool(compare(*op, &a, &b))
            }
            ExprKind::Binary(op, l, r) => {
                let a = self.eval_int(l, env, ctx, depth)?;
                let b = self.eval_int(r, env, ctx, depth)?;
                let div0 = Halt::Error(RuntimeErrorKind::DivisionByZero, line);
                Value::Int(match op {
                    BinOp::Add => a.checked_add(b).ok_or(overflow)?,
                    BinOp::Sub => a.checked_sub(b).ok_or(overflow)?,
                    BinOp::Mul => a.checked_mul(b).ok_or(overflow)?,
                    BinOp::Div if b == 0 => return Err(div0),
                    BinOp::Div => a.checked_div(b).ok_or(overflow)?,
                    BinOp::Rem if b == 0 => return Err(div0),
                    BinOp::Rem => a.checked_rem(b).ok_or(overflow)?,
                    _ => unreachable!("logical and relational operators handled above"),
                })
            }
        })
    }
}

fn compare(op: BinOp, a: &Value, b: &Value) -> bool {
    match (op, a, b) {
        (BinOp::Eq, _, _) => a == b,
        (BinOp::Ne, _, _) => a != b,
        (BinOp::Lt, Value::Int(x), Value::Int(y)) => x < y,
        (BinOp::Le, Value::Int(x), Value::Int(y)) => x <= y,
        (BinOp::Gt, Value::Int(x), Value::Int(y)) => x > y,
        (BinOp::Ge, Value::Int(x), Value::Int(y)) => x >= y,
        _ => false,
    }
}
