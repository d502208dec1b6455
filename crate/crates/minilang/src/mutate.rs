//! First-order mutant generation.
//!
//! Sites are visited in source order within one function; each applicable
//! operator instance yields one mutant. Candidates that fail to type check
//! (for example `<` applied to booleans) are dropped.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ast::*;
use crate::render::render_expr;
use crate::typeck::{FileId, TypedProgram};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MutationOperator {
    /// Arithmetic operator replacement.
    Aor,
    /// Relational operator replacement.
    Ror,
    /// Logical connector replacement.
    Lcr,
    ConstPerturb,
    NegateCondition,
}

impl std::fmt::Display for MutationOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MutationOperator::Aor => "AOR",
            MutationOperator::Ror => "ROR",
            MutationOperator::Lcr => "LCR",
            MutationOperator::ConstPerturb => "ConstPerturb",
            MutationOperator::NegateCondition => "NegateCondition",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mutant {
    pub id: String,
    pub operator: MutationOperator,
    pub function: String,
    pub file: FileId,
    pub line: Line,
    pub original_fragment: String,
    pub mutated_fragment: String,
    /// The mutated version of the file containing `function`.
    pub program: Program,
}

impl Mutant {
    /// The project with this mutant's file swapped in.
    pub fn apply(&self, base: &TypedProgram) -> Result<TypedProgram, Vec<crate::error::TypeError>> {
        base.replace_file(self.file, self.program.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MutateError {
    #[error("unknown function '{0}'")]
    UnknownFunction(String),
}

/// A replacement at one site: the expression that will take the place of the
/// site's current expression.
struct Candidate {
    site: usize,
    operator: MutationOperator,
    replacement: Expr,
}

pub fn generate_mutants(
    program: &TypedProgram,
    function: &str,
) -> Result<Vec<Mutant>, MutateError> {
    let fref = program
        .function_ref(function)
        .ok_or_else(|| MutateError::UnknownFunction(function.to_string()))?;
    let file = program.file(fref.file);
    let decl = &file.functions[fref.index as usize];

    let mut sites: Vec<Site> = Vec::new();
    collect_sites(&decl.body, &mut sites);

    let mut candidates = Vec::new();
    for (i, site) in sites.iter().enumerate() {
        for (operator, replacement) in replacements(site) {
            candidates.push(Candidate {
                site: i,
                operator,
                replacement,
            });
        }
    }

    let mut out = Vec::new();
    for cand in candidates {
        let site = &sites[cand.site];
        let mut mutated = file.clone();
        let body = &mut mutated.functions[fref.index as usize].body;
        let mut counter = 0usize;
        replace_site(body, cand.site, &mut counter, &cand.replacement);
        strip_types(&mut mutated);
        let original_fragment = render_expr(&site.expr);
        let mutated_fragment = render_expr(&cand.replacement);
        if program.replace_file(fref.file, mutated.clone()).is_err() {
            continue;
        }
        out.push(Mutant {
            id: format!("{function}#m{}", out.len() + 1),
            operator: cand.operator,
            function: function.to_string(),
            file: fref.file,
            line: site.line,
            original_fragment,
            mutated_fragment,
            program: mutated,
        });
    }
    Ok(out)
}

struct Site {
    expr: Expr,
    line: Line,
    /// Set when the site is the full condition of an `if`/`while`.
    is_condition: bool,
}

/// Sites in pre-order: a statement's condition first, then its expression
/// tree, then nested blocks.
fn collect_sites(block: &Block, out: &mut Vec<Site>) {
    for stmt in &block.stmts {
        let mut exprs: Vec<(&Expr, bool)> = Vec::new();
        match &stmt.kind {
            StmtKind::Let { value, .. } | StmtKind::Assign { value, .. } => {
                exprs.push((value, false))
            }
            StmtKind::IndexAssign { index, value, .. } => {
                exprs.push((index, false));
                exprs.push((value, false));
            }
            StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => exprs.push((cond, true)),
            StmtKind::Return(Some(e))
            | StmtKind::Assert(e)
            | StmtKind::ExpectError(e)
            | StmtKind::Expr(e) => exprs.push((e, false)),
            StmtKind::Return(None) => {}
        }
        for (root, is_cond) in exprs {
            if is_cond {
                out.push(Site {
                    expr: root.clone(),
                    line: stmt.line,
                    is_condition: true,
                });
            }
            visit_expr(root, &mut |e| {
                if is_mutable_node(e) {
                    out.push(Site {
                        expr: e.clone(),
                        line: stmt.line,
                        is_condition: false,
                    });
                }
            });
        }
        match &stmt.kind {
            StmtKind::If {
                then_block,
                else_block,
                ..
            } => {
                collect_sites(then_block, out);
                if let Some(b) = else_block {
                    collect_sites(b, out);
                }
            }
            StmtKind::While { body, .. } => collect_sites(body, out),
            _ => {}
        }
    }
}

fn is_mutable_node(e: &Expr) -> bool {
    matches!(e.kind, ExprKind::Int(_) | ExprKind::Binary(..))
}

fn replacements(site: &Site) -> Vec<(MutationOperator, Expr)> {
    let e = &site.expr;
    let line = e.line;
    let mut out = Vec::new();
    if site.is_condition {
        let negated = Expr::new(ExprKind::Unary(UnaryOp::Not, Box::new(e.clone())), line);
        out.push((MutationOperator::NegateCondition, negated));
        return out;
    }
    match &e.kind {
        ExprKind::Int(n) => {
            let mut values: Vec<i64> = Vec::new();
            for v in [n.checked_sub(1), n.checked_add(1), Some(0)]
                .into_iter()
                .flatten()
            {
                if v != *n && !values.contains(&v) {
                    values.push(v);
                }
            }
            for v in values {
                out.push((
                    MutationOperator::ConstPerturb,
                    Expr::new(ExprKind::Int(v), line),
                ));
            }
        }
        ExprKind::Binary(op, l, r) => {
            let (operator, alternatives): (MutationOperator, Vec<BinOp>) = if op.is_arithmetic() {
                (MutationOperator::Aor, BinOp::ARITHMETIC.to_vec())
            } else if op.is_relational() {
                (MutationOperator::Ror, BinOp::RELATIONAL.to_vec())
            } else {
                (MutationOperator::Lcr, vec![BinOp::And, BinOp::Or])
            };
            for alt in alternatives.into_iter().filter(|a| a != op) {
                out.push((
                    operator,
                    Expr::new(ExprKind::Binary(alt, l.clone(), r.clone()), line),
                ));
            }
        }
        _ => {}
    }
    out
}

/// Replaces the `target`-th site (same numbering as [`collect_sites`]).
fn replace_site(block: &mut Block, target: usize, counter: &mut usize, replacement: &Expr) -> bool {
    for stmt in &mut block.stmts {
        let is_cond = matches!(stmt.kind, StmtKind::If { .. } | StmtKind::While { .. });
        let roots: Vec<&mut Expr> = match &mut stmt.kind {
            StmtKind::Let { value, .. } | StmtKind::Assign { value, .. } => vec![value],
            StmtKind::IndexAssign { index, value, .. } => vec![index, value],
            StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => vec![cond],
            StmtKind::Return(Some(e))
            | StmtKind::Assert(e)
            | StmtKind::ExpectError(e)
            | StmtKind::Expr(e) => vec![e],
            StmtKind::Return(None) => vec![],
        };
        for root in roots {
            if is_cond {
                if *counter == target {
                    *root = replacement.clone();
                    return true;
                }
                *counter += 1;
            }
            if replace_in_expr(root, target, counter, replacement) {
                return true;
            }
        }
        let nested: Vec<&mut Block> = match &mut stmt.kind {
            StmtKind::If {
                then_block,
                else_block,
                ..
            } => {
                let mut v = vec![then_block];
                if let Some(b) = else_block {
                    v.push(b);
                }
                v
            }
            StmtKind::While { body, .. } => vec![body],
            _ => vec![],
        };
        for b in nested {
            if replace_site(b, target, counter, replacement) {
                return true;
            }
        }
    }
    false
}

/// Pre-order, matching `visit_expr`.
fn replace_in_expr(e: &mut Expr, target: usize, counter: &mut usize, replacement: &Expr) -> bool {
    if is_mutable_node(e) {
        if *counter == target {
            *e = replacement.clone();
            return true;
        }
        *counter += 1;
    }
    let children: Vec<&mut Expr> = match &mut e.kind {
        ExprKind::Int(_) | ExprKind::Bool(_) | ExprKind::Var(_) => vec![],
        ExprKind::Array(items) => items.iter_mut().collect(),
        ExprKind::Record { fields, .. } => fields.iter_mut().map(|(_, v)| v).collect(),
        ExprKind::Field(base, _) => vec![base.as_mut()],
        ExprKind::Index(base, idx) => vec![base.as_mut(), idx.as_mut()],
        ExprKind::Call(_, args) => args.iter_mut().collect(),
        ExprKind::Unary(_, inner) => vec![inner.as_mut()],
        ExprKind::Binary(_, l, r) => vec![l.as_mut(), r.as_mut()],
    };
    for child in children {
        if replace_in_expr(child, target, counter, replacement) {
            return true;
        }
    }
    false
}

fn strip_types(program: &mut Program) {
    fn block(b: &mut Block) {
        for stmt in &mut b.stmts {
            walk_stmt_exprs_mut(stmt, &mut |e| e.ty = None);
            match &mut stmt.kind {
                StmtKind::If {
                    then_block,
                    else_block,
                    ..
                } => {
                    block(then_block);
                    if let Some(e) = else_block {
                        block(e);
                    }
                }
                StmtKind::While { body, .. } => block(body),
                _ => {}
            }
        }
    }
    for f in &mut program.functions {
        block(&mut f.body);
    }
    for t in &mut program.tests {
        block(&mut t.body);
    }
}
