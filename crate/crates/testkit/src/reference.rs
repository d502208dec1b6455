//! A deliberately plain second interpreter used as an oracle for traces and
//! outcomes. It shares only the AST with the production interpreter and keeps
//! its own value representation, environment and record layout logic.
//!
//! Recursion depth is not limited, so it should only be fed programs whose
//! call graph is acyclic (the generator guarantees that).

use std::collections::BTreeMap;

use minilang::ast::{BinOp, Block, ExprKind, StmtKind, UnaryOp};
use minilang::{Expr, Program, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RVal {
    Int(i64),
    Bool(bool),
    Arr(Vec<i64>),
    Rec(String, BTreeMap<String, RVal>),
    Unit,
}

impl RVal {
    pub fn from_value(v: &Value) -> RVal {
        match v {
            Value::Int(n) => RVal::Int(*n),
            Value::Bool(b) => RVal::Bool(*b),
            Value::Array(a) => RVal::Arr(a.clone()),
            Value::Record(r) => RVal::Rec(
                r.type_name.clone(),
                r.fields
                    .iter()
                    .map(|(k, v)| (k.clone(), RVal::from_value(v)))
                    .collect(),
            ),
            Value::Unit => RVal::Unit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Failure {
    DivByZero,
    OutOfRange,
    AssertFailed,
    NoErrorRaised,
    Overflow,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stop {
    Failed(Failure, u32),
    Limit,
}

/// Which declaration a traced line belongs to.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Owner {
    Function(String),
    Test(String),
}

#[derive(Debug, Clone)]
pub struct RefRun {
    pub result: Result<RVal, Stop>,
    pub trace: Vec<(Owner, u32)>,
    pub steps: u64,
}

impl RefRun {
    /// Lines executed inside project functions.
    pub fn function_lines(&self) -> std::collections::BTreeSet<u32> {
        self.trace
            .iter()
            .filter(|(o, _)| matches!(o, Owner::Function(_)))
            .map(|(_, l)| *l)
            .collect()
    }
}

pub fn call(program: &Program, function: &str, args: Vec<RVal>, budget: u64) -> RefRun {
    let mut m = Ref {
        program,
        budget,
        steps: 0,
        trace: Vec::new(),
    };
    let result = m.call(function, args);
    RefRun {
        result,
        trace: m.trace,
        steps: m.steps,
    }
}

pub fn test(program: &Program, name: &str, budget: u64) -> RefRun {
    let mut m = Ref {
        program,
        budget,
        steps: 0,
        trace: Vec::new(),
    };
    let body = &program
        .tests
        .iter()
        .find(|t| t.name == name)
        .expect("test exists")
        .body;
    let mut frame = Frame {
        owner: Owner::Test(name.to_string()),
        vars: vec![BTreeMap::new()],
    };
    let result = match m.block(body, &mut frame) {
        Ok(_) => Ok(RVal::Unit),
        Err(Unwind::Stop(s)) => Err(s),
        Err(Unwind::Return(_)) => Ok(RVal::Unit),
    };
    RefRun {
        result,
        trace: m.trace,
        steps: m.steps,
    }
}

enum Unwind {
    Return(RVal),
    Stop(Stop),
}

impl From<Stop> for Unwind {
    fn from(s: Stop) -> Self {
        Unwind::Stop(s)
    }
}

struct Frame {
    owner: Owner,
    vars: Vec<BTreeMap<String, RVal>>,
}

impl Frame {
    fn lookup(&mut self, name: &str) -> &mut RVal {
        for scope in self.vars.iter_mut().rev() {
            if let Some(v) = scope.get_mut(name) {
                return v;
            }
        }
        panic!("unbound variable {name}")
    }
}

struct Ref<'a> {
    program: &'a Program,
    budget: u64,
    steps: u64,
    trace: Vec<(Owner, u32)>,
}

impl<'a> Ref<'a> {
    fn call(&mut self, name: &str, args: Vec<RVal>) -> Result<RVal, Stop> {
        let f = self
            .program
            .functions
            .iter()
            .find(|f| f.name == name)
            .expect("function exists");
        let mut top = BTreeMap::new();
        for (p, a) in f.params.iter().zip(args) {
            top.insert(p.name.clone(), a);
        }
        let mut frame = Frame {
            owner: Owner::Function(name.to_string()),
            vars: vec![top],
        };
        match self.block(&f.body, &mut frame) {
            Ok(()) => Ok(RVal::Unit),
            Err(Unwind::Return(v)) => Ok(v),
            Err(Unwind::Stop(s)) => Err(s),
        }
    }

    fn step(&mut self, owner: &Owner, line: u32) -> Result<(), Stop> {
        if self.steps == self.budget {
            return Err(Stop::Limit);
        }
        self.steps += 1;
        self.trace.push((owner.clone(), line));
        Ok(())
    }

    fn block(&mut self, block: &Block, frame: &mut Frame) -> Result<(), Unwind> {
        frame.vars.push(BTreeMap::new());
        let mut result = Ok(());
        for stmt in &block.stmts {
            result = self.stmt(stmt, frame);
            if result.is_err() {
                break;
            }
        }
        frame.vars.pop();
        result
    }

    fn stmt(&mut self, stmt: &minilang::Stmt, frame: &mut Frame) -> Result<(), Unwind> {
        let line = stmt.line;
        let owner = frame.owner.clone();
        self.step(&owner, line)?;
        match &stmt.kind {
            StmtKind::Let { name, value, .. } => {
                let v = self.eval(value, frame, line)?;
                frame.vars.last_mut().unwrap().insert(name.clone(), v);
            }
            StmtKind::Assign { name, value } => {
                let v = self.eval(value, frame, line)?;
                *frame.lookup(name) = v;
            }
            StmtKind::IndexAssign { name, index, value } => {
                let i = self.int(index, frame, line)?;
                let v = self.int(value, frame, line)?;
                let RVal::Arr(items) = frame.lookup(name) else {
                    panic!("not an array")
                };
                if i < 0 || i as usize >= items.len() {
                    return Err(Stop::Failed(Failure::OutOfRange, line).into());
                }
                items[i as usize] = v;
            }
            StmtKind::If {
                cond,
                then_block,
                else_block,
                ..
            } => {
                if self.truth(cond, frame, line)? {
                    self.block(then_block, frame)?;
                } else if let Some(e) = else_block {
                    self.block(e, frame)?;
                }
            }
            StmtKind::While { cond, body, .. } => {
                let mut again = false;
                loop {
                    if again {
                        self.step(&owner, line)?;
                    }
                    again = true;
                    if !self.truth(cond, frame, line)? {
                        break;
                    }
                    self.block(body, frame)?;
                }
            }
            StmtKind::Return(value) => {
                let v = match value {
                    Some(e) => self.eval(e, frame, line)?,
                    None => RVal::Unit,
                };
                return Err(Unwind::Return(v));
            }
            StmtKind::Assert(e) => {
                if !self.truth(e, frame, line)? {
                    return Err(Stop::Failed(Failure::AssertFailed, line).into());
                }
            }
            StmtKind::ExpectError(e) => match self.eval(e, frame, line) {
                Ok(_) => return Err(Stop::Failed(Failure::NoErrorRaised, line).into()),
                Err(Stop::Limit) => return Err(Stop::Limit.into()),
                Err(Stop::Failed(..)) => {}
            },
            StmtKind::Expr(e) => {
                self.eval(e, frame, line)?;
            }
        }
        Ok(())
    }

    fn int(&mut self, e: &Expr, frame: &mut Frame, line: u32) -> Result<i64, Stop> {
        match self.eval(e, frame, line)? {
            RVal::Int(n) => Ok(n),
            other => panic!("expected int, got {other:?}"),
        }
    }

    fn truth(&mut self, e: &Expr, frame: &mut Frame, line: u32) -> Result<bool, Stop> {
        match self.eval(e, frame, line)? {
            RVal::Bool(b) => Ok(b),
            other => panic!("expected bool, got {other:?}"),
        }
    }

    fn layout(&self, record: &str) -> Vec<String> {
        let decl = self
            .program
            .records
            .iter()
            .find(|r| r.name == record)
            .expect("record exists");
        let mut fields = match &decl.extends {
            Some(parent) => self.layout(parent),
            None => Vec::new(),
        };
        fields.extend(decl.fields.iter().map(|f| f.name.clone()));
        fields
    }

    fn eval(&mut self, e: &Expr, frame: &mut Frame, line: u32) -> Result<RVal, Stop> {
        let fail = |f| Stop::Failed(f, line);
        match &e.kind {
            ExprKind::Int(n) => Ok(RVal::Int(*n)),
            ExprKind::Bool(b) => Ok(RVal::Bool(*b)),
            ExprKind::Array(items) => {
                let mut out = Vec::new();
                for item in items {
                    out.push(self.int(item, frame, line)?);
                }
                Ok(RVal::Arr(out))
            }
            ExprKind::Record { name, fields } => {
                let mut map = BTreeMap::new();
                for (f, v) in fields {
                    let v = self.eval(v, frame, line)?;
                    map.insert(f.clone(), v);
                }
                assert_eq!(map.len(), self.layout(name).len());
                Ok(RVal::Rec(name.clone(), map))
            }
            ExprKind::Var(name) => Ok(frame.lookup(name).clone()),
            ExprKind::Field(base, field) => match self.eval(base, frame, line)? {
                RVal::Rec(_, map) => Ok(map[field].clone()),
                other => panic!("field of {other:?}"),
            },
            ExprKind::Index(base, idx) => {
                let RVal::Arr(items) = self.eval(base, frame, line)? else {
                    panic!("index of non-array")
                };
                let i = self.int(idx, frame, line)?;
                if i < 0 || i as usize >= items.len() {
                    return Err(fail(Failure::OutOfRange));
                }
                Ok(RVal::Int(items[i as usize]))
            }
            ExprKind::Call(name, args) => {
                let mut values = Vec::new();
                for a in args {
                    values.push(self.eval(a, frame, line)?);
                }
                if name == "len" {
                    let RVal::Arr(items) = &values[0] else {
                        panic!("len of non-array")
                    };
                    return Ok(RVal::Int(items.len() as i64));
                }
                self.call(name, values)
            }
            ExprKind::Unary(UnaryOp::Neg, inner) => {
                let n = self.int(inner, frame, line)?;
                n.checked_neg()
                    .map(RVal::Int)
                    .ok_or(fail(Failure::Overflow))
            }
            ExprKind::Unary(UnaryOp::Not, inner) => {
                Ok(RVal::Bool(!self.truth(inner, frame, line)?))
            }
            ExprKind::Binary(op, l, r) => match op {
                BinOp::And => {
                    let v = self.truth(l, frame, line)? && self.truth(r, frame, line)?;
                    Ok(RVal::Bool(v))
                }
                BinOp::Or => {
                    let v = self.truth(l, frame, line)? || self.truth(r, frame, line)?;
                    Ok(RVal::Bool(v))
                }
                BinOp::Eq | BinOp::Ne => {
                    let a = self.eval(l, frame, line)?;
                    let b = self.eval(r, frame, line)?;
                    Ok(RVal::Bool((a == b) == (*op == BinOp::Eq)))
                }
                _ => {
                    let a = self.int(l, frame, line)?;
                    let b = self.int(r, frame, line)?;
                    let res = match op {
                        BinOp::Lt => return Ok(RVal::Bool(a < b)),
                        BinOp::Le => return Ok(RVal::Bool(a <= b)),
                        BinOp::Gt => return Ok(RVal::Bool(a > b)),
                        BinOp::Ge => return Ok(RVal::Bool(a >= b)),
                        BinOp::Add => a.checked_add(b),
                        BinOp::Sub => a.checked_sub(b),
                        BinOp::Mul => a.checked_mul(b),
                        BinOp::Div | BinOp::Rem if b == 0 => return Err(fail(Failure::DivByZero)),
                        BinOp::Div => a.checked_div(b),
                        BinOp::Rem => a.checked_rem(b),
                        _ => unreachable!(),
                    };
                    res.map(RVal::Int).ok_or(fail(Failure::Overflow))
                }
            },
        }
    }
}
