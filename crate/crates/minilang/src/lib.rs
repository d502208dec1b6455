//! MiniLang: the reference language that tests are generated for.
//!
//! Files map to the "class" granularity, functions to "method" and source
//! lines to "line". The crate provides the whole frontend (lexing, parsing,
//! type checking), a canonical renderer, a tracing interpreter, and mutation
//! operators.

pub mod ast;
pub mod error;
pub mod interp;
pub mod lexer;
pub mod mutate;
pub mod parser;
pub mod render;
pub mod typeck;
pub mod value;

pub use ast::{
    BinOp, Block, BranchId, Expr, ExprKind, FunctionDecl, Line, Program, RecordDecl, Stmt,
    StmtKind, TestDecl, Type,
};
pub use error::{CompileError, ParseError, TypeError};
pub use interp::{
    branch_distance, call_function, interpret, run_test, BranchHit, ExecutionResult, Outcome,
    RuntimeErrorKind, TracePoint, DEFAULT_STEP_BUDGET,
};
pub use mutate::{generate_mutants, Mutant, MutationOperator};
pub use parser::{parse, parse_expr, parse_file};
pub use render::{render, render_expr, render_function, render_test, render_value};
pub use typeck::{typecheck, typecheck_project, DeclRef, FileId, TypedProgram};
pub use value::{RecordValue, Value};

/// Parses and type checks a single in-memory source file.
pub fn compile(source: &str) -> Result<TypedProgram, CompileError> {
    let program = parse(source)?;
    typecheck(program).map_err(CompileError::Type)
}
