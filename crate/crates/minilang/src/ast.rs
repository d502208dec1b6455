//! Syntax tree for MiniLang source files.
//!
//! Every statement carries the source line it starts on. Line numbers are the
//! unit of coverage, so the renderer emits one statement per line and a
//! rendered program re-parses with stable line numbers.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

/// 1-based source line number.
pub type Line = u32;

/// Per-declaration index of an `if`/`while` statement, assigned in pre-order
/// by the parser. Identifies a branch point independently of line layout.
pub type BranchId = u32;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Type {
    Int,
    Bool,
    IntArray,
    Record(String),
    /// Result type of test bodies and statements; not writable in source.
    Unit,
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Int => f.write_str("int"),
            Type::Bool => f.write_str("bool"),
            Type::IntArray => f.write_str("int[]"),
            Type::Record(name) => f.write_str(name),
            Type::Unit => f.write_str("unit"),
        }
    }
}

/// Byte range and line range of a top-level declaration in its source text.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub first_line: Line,
    pub last_line: Line,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Program {
    pub records: Vec<RecordDecl>,
    pub functions: Vec<FunctionDecl>,
    pub tests: Vec<TestDecl>,
    pub source_file: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordDecl {
    pub name: String,
    pub extends: Option<String>,
    pub fields: Vec<Field>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub name: String,
    pub ty: Type,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub ty: Type,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionDecl {
    pub name: String,
    pub params: Vec<Param>,
    pub return_type: Type,
    pub body: Block,
    pub span: Span,
}

impl FunctionDecl {
    pub fn line_span(&self) -> (Line, Line) {
        (self.span.first_line, self.span.last_line)
    }

    pub fn contains_line(&self, line: Line) -> bool {
        line >= self.span.first_line && line <= self.span.last_line
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestDecl {
    pub name: String,
    pub body: Block,
    pub span: Span,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub stmts: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stmt {
    pub kind: StmtKind,
    pub line: Line,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StmtKind {
    Let {
        name: String,
        ty: Type,
        value: Expr,
    },
    Assign {
        name: String,
        value: Expr,
    },
    IndexAssign {
        name: String,
        index: Expr,
        value: Expr,
    },
    If {
        cond: Expr,
        then_block: Block,
        else_block: Option<Block>,
        branch: BranchId,
    },
    While {
        cond: Expr,
        body: Block,
        branch: BranchId,
    },
    Return(Option<Expr>),
    Assert(Expr),
    ExpectError(Expr),
    Expr(Expr),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expr {
    pub kind: ExprKind,
    pub line: Line,
    /// Filled in by the type checker.
    pub ty: Option<Type>,
}

impl Expr {
    pub fn new(kind: ExprKind, line: Line) -> Self {
        Expr {
            kind,
            line,
            ty: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ExprKind {
    Int(i64),
    Bool(bool),
    Array(Vec<Expr>),
    Record {
        name: String,
        fields: Vec<(String, Expr)>,
    },
    Var(String),
    Field(Box<Expr>, String),
    Index(Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub const ARITHMETIC: [BinOp; 5] = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Rem];
    pub const RELATIONAL: [BinOp; 6] = [
        BinOp::Lt,
        BinOp::Le,
        BinOp::Gt,
        BinOp::Ge,
        BinOp::Eq,
        BinOp::Ne,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 6,
        }
    }

    pub fn is_arithmetic(self) -> bool {
        Self::ARITHMETIC.contains(&self)
    }

    pub fn is_relational(self) -> bool {
        Self::RELATIONAL.contains(&self)
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or)
    }
}

impl Program {
    pub fn empty(source_file: impl Into<PathBuf>) -> Self {
        Program {
            records: Vec::new(),
            functions: Vec::new(),
            tests: Vec::new(),
            source_file: source_file.into(),
        }
    }

    pub fn function(&self, name: &str) -> Option<&FunctionDecl> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn record(&self, name: &str) -> Option<&RecordDecl> {
        self.records.iter().find(|r| r.name == name)
    }

    pub fn test(&self, name: &str) -> Option<&TestDecl> {
        self.tests.iter().find(|t| t.name == name)
    }

    /// All top-level names in declaration-kind order.
    pub fn top_level_names(&self) -> impl Iterator<Item = &str> {
        self.records
            .iter()
            .map(|r| r.name.as_str())
            .chain(self.functions.iter().map(|f| f.name.as_str()))
            .chain(self.tests.iter().map(|t| t.name.as_str()))
    }

    /// Copy with positions and type annotations cleared, for structural
    /// comparison of programs that differ only in layout.
    pub fn erased(&self) -> Program {
        let mut p = self.clone();
        p.source_file = PathBuf::new();
        for r in &mut p.records {
            r.span = Span::default();
        }
        for f in &mut p.functions {
            f.span = Span::default();
            erase_block(&mut f.body);
        }
        for t in &mut p.tests {
            t.span = Span::default();
            erase_block(&mut t.body);
        }
        p
    }

    pub fn structurally_eq(&self, other: &Program) -> bool {
        self.erased() == other.erased()
    }
}

fn erase_block(block: &mut Block) {
    for stmt in &mut block.stmts {
        stmt.line = 0;
        walk_stmt_exprs_mut(stmt, &mut |e| {
            e.line = 0;
            e.ty = None;
        });
        match &mut stmt.kind {
            StmtKind::If {
                then_block,
                else_block,
                ..
            } => {
                erase_block(then_block);
                if let Some(b) = else_block {
                    erase_block(b);
                }
            }
            StmtKind::While { body, .. } => erase_block(body),
            _ => {}
        }
    }
}

/// Visits every expression node directly owned by `stmt` (not nested blocks),
/// children before parents.
pub fn walk_stmt_exprs_mut(stmt: &mut Stmt, f: &mut dyn FnMut(&mut Expr)) {
    match &mut stmt.kind {
        StmtKind::Let { value, .. } | StmtKind::Assign { value, .. } => walk_expr_mut(value, f),
        StmtKind::IndexAssign { index, value, .. } => {
            walk_expr_mut(index, f);
            walk_expr_mut(value, f);
        }
        StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => walk_expr_mut(cond, f),
        StmtKind::Return(Some(e))
        | StmtKind::Assert(e)
        | StmtKind::ExpectError(e)
        | StmtKind::Expr(e) => walk_expr_mut(e, f),
        StmtKind::Return(None) => {}
    }
}

pub fn walk_expr_mut(expr: &mut Expr, f: &mut dyn FnMut(&mut Expr)) {
    match &mut expr.kind {
        ExprKind::Int(_) | ExprKind::Bool(_) | ExprKind::Var(_) => {}
        ExprKind::Array(items) => items.iter_mut().for_each(|e| walk_expr_mut(e, f)),
        ExprKind::Record { fields, .. } => fields.iter_mut().for_each(|(_, e)| walk_expr_mut(e, f)),
        ExprKind::Field(base, _) => walk_expr_mut(base, f),
        ExprKind::Index(base, idx) => {
            walk_expr_mut(base, f);
            walk_expr_mut(idx, f);
        }
        ExprKind::Call(_, args) => args.iter_mut().for_each(|e| walk_expr_mut(e, f)),
        ExprKind::Unary(_, e) => walk_expr_mut(e, f),
        ExprKind::Binary(_, l, r) => {
            walk_expr_mut(l, f);
            walk_expr_mut(r, f);
        }
    }
    f(expr);
}

/// Read-only pre-order walk over every expression in a block, including
/// nested blocks.
pub fn visit_block_exprs<'a>(block: &'a Block, f: &mut dyn FnMut(&'a Expr)) {
    for stmt in &block.stmts {
        visit_stmt_exprs(stmt, f);
    }
}

pub fn visit_stmt_exprs<'a>(stmt: &'a Stmt, f: &mut dyn FnMut(&'a Expr)) {
    match &stmt.kind {
        StmtKind::Let { value, .. } | StmtKind::Assign { value, .. } => visit_expr(value, f),
        StmtKind::IndexAssign { index, value, .. } => {
            visit_expr(index, f);
            visit_expr(value, f);
        }
        StmtKind::If {
            cond,
            then_block,
            else_block,
            ..
        } => {
            visit_expr(cond, f);
            visit_block_exprs(then_block, f);
            if let Some(b) = else_block {
                visit_block_exprs(b, f);
            }
        }
        StmtKind::While { cond, body, .. } => {
            visit_expr(cond, f);
            visit_block_exprs(body, f);
        }
        StmtKind::Return(Some(e))
        | StmtKind::Assert(e)
        | StmtKind::ExpectError(e)
        | StmtKind::Expr(e) => visit_expr(e, f),
        StmtKind::Return(None) => {}
    }
}

pub fn visit_expr<'a>(expr: &'a Expr, f: &mut dyn FnMut(&'a Expr)) {
    f(expr);
    match &expr.kind {
        ExprKind::Int(_) | ExprKind::Bool(_) | ExprKind::Var(_) => {}
        ExprKind::Array(items) => items.iter().for_each(|e| visit_expr(e, f)),
        ExprKind::Record { fields, .. } => fields.iter().for_each(|(_, e)| visit_expr(e, f)),
        ExprKind::Field(base, _) => visit_expr(base, f),
        ExprKind::Index(base, idx) => {
            visit_expr(base, f);
            visit_expr(idx, f);
        }
        ExprKind::Call(_, args) => args.iter().for_each(|e| visit_expr(e, f)),
        ExprKind::Unary(_, e) => visit_expr(e, f),
        ExprKind::Binary(_, l, r) => {
            visit_expr(l, f);
            visit_expr(r, f);
        }
    }
}

/// Names of functions called anywhere in `block`, in first-occurrence order.
pub fn called_functions(block: &Block) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    visit_block_exprs(block, &mut |e| {
        if let ExprKind::Call(name, _) = &e.kind {
            if !out.iter().any(|n| n == name) {
                out.push(name.clone());
            }
        }
    });
    out
}

/// Pre-order list of every statement line in `block`.
pub fn statement_lines(block: &Block) -> Vec<Line> {
    let mut out = Vec::new();
    fn go(block: &Block, out: &mut Vec<Line>) {
        for stmt in &block.stmts {
            out.push(stmt.line);
            match &stmt.kind {
                StmtKind::If {
                    then_block,
                    else_block,
                    ..
                } => {
                    go(then_block, out);
                    if let Some(b) = else_block {
                        go(b, out);
                    }
                }
                StmtKind::While { body, .. } => go(body, out),
                _ => {}
            }
        }
    }
    go(block, &mut out);
    out
}

/// Number of statements in `block`, nested blocks included.
pub fn statement_count(block: &Block) -> usize {
    statement_lines(block).len()
}
