//! Canonical pretty-printer. Output is one statement per line with
//! four-space indentation, so re-parsing yields stable line numbers.

use std::fmt::Write;

use crate::ast::*;
use crate::value::Value;

const INDENT: &str = "    ";

pub fn render(program: &Program) -> String {
    let mut items: Vec<String> = Vec::new();
    items.extend(program.records.iter().map(render_record));
    items.extend(program.functions.iter().map(render_function));
    items.extend(program.tests.iter().map(render_test));
    items.join("\n")
}

pub fn render_record(record: &RecordDecl) -> String {
    let mut out = format!("record {}", record.name);
    if let Some(parent) = &record.extends {
        let _ = write!(out, " extends {parent}");
    }
    out.push_str(" {\n");
    for field in &record.fields {
        let _ = writeln!(out, "{INDENT}{}: {};", field.name, field.ty);
    }
    out.push_str("}\n");
    out
}

/// Signature line without body, e.g. `fn inc(x: int) -> int`.
pub fn render_signature(function: &FunctionDecl) -> String {
    let params: Vec<String> = function
        .params
        .iter()
        .map(|p| format!("{}: {}", p.name, p.ty))
        .collect();
    format!(
        "fn {}({}) -> {}",
        function.name,
        params.join(", "),
        function.return_type
    )
}

pub fn render_function(function: &FunctionDecl) -> String {
    let mut out = render_signature(function);
    out.push(' ');
    render_block(&function.body, 0, &mut out);
    out.push('\n');
    out
}

pub fn render_test(test: &TestDecl) -> String {
    let mut out = format!("test fn {}() ", test.name);
    render_block(&test.body, 0, &mut out);
    out.push('\n');
    out
}

fn render_block(block: &Block, depth: usize, out: &mut String) {
    out.push_str("{\n");
    for stmt in &block.stmts {
        render_stmt(stmt, depth + 1, out);
    }
    out.push_str(&INDENT.repeat(depth));
    out.push('}');
}

/// First rendered line of a statement, e.g. `if (x < 0) {`.
pub fn render_statement_head(stmt: &Stmt) -> String {
    let mut out = String::new();
    render_stmt(stmt, 0, &mut out);
    out.lines().next().unwrap_or_default().to_string()
}

fn render_stmt(stmt: &Stmt, depth: usize, out: &mut String) {
    out.push_str(&INDENT.repeat(depth));
    match &stmt.kind {
        StmtKind::Let { name, ty, value } => {
            let _ = write!(out, "let {name}: {ty} = {};", render_expr(value));
        }
        StmtKind::Assign { name, value } => {
            let _ = write!(out, "{name} = {};", render_expr(value));
        }
        StmtKind::IndexAssign { name, index, value } => {
            let _ = write!(
                out,
                "{name}[{}] = {};",
                render_expr(index),
                render_expr(value)
            );
        }
        StmtKind::If {
            cond,
            then_block,
            else_block,
            ..
        } => {
            let _ = write!(out, "if ({}) ", render_expr(cond));
            render_block(then_block, depth, out);
            if let Some(else_block) = else_block {
                out.push_str(" else ");
                render_block(else_block, depth, out);
            }
        }
        StmtKind::While { cond, body, .. } => {
            let _ = write!(out, "while ({}) ", render_expr(cond));
            render_block(body, depth, out);
        }
        StmtKind::Return(None) => out.push_str("return;"),
        StmtKind::Return(Some(e)) => {
            let _ = write!(out, "return {};", render_expr(e));
        }
        StmtKind::Assert(e) => {
            let _ = write!(out, "assert {};", render_expr(e));
        }
        StmtKind::ExpectError(e) => {
            let _ = write!(out, "expect_error {};", render_expr(e));
        }
        StmtKind::Expr(e) => {
            let _ = write!(out, "{};", render_expr(e));
        }
    }
    out.push('\n');
}

const UNARY_PREC: u8 = 7;
const POSTFIX_PREC: u8 = 8;

fn expr_prec(expr: &Expr) -> u8 {
    match &expr.kind {
        ExprKind::Binary(op, _, _) => op.precedence(),
        ExprKind::Unary(_, _) => UNARY_PREC,
        ExprKind::Int(n) if *n < 0 => {
            if *n == i64::MIN {
                BinOp::Sub.precedence()
            } else {
                UNARY_PREC
            }
        }
        _ => POSTFIX_PREC,
    }
}

pub fn render_expr(expr: &Expr) -> String {
    let mut out = String::new();
    write_expr(expr, &mut out);
    out
}

fn write_child(expr: &Expr, min_prec: u8, out: &mut String) {
    if expr_prec(expr) < min_prec {
        out.push('(');
        write_expr(expr, out);
        out.push(')');
    } else {
        write_expr(expr, out);
    }
}

fn write_expr(expr: &Expr, out: &mut String) {
    match &expr.kind {
        ExprKind::Int(n) => out.push_str(&int_literal(*n)),
        ExprKind::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        ExprKind::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(item, out);
            }
            out.push(']');
        }
        ExprKind::Record { name, fields } => {
            out.push_str(name);
            out.push_str(" {");
            for (i, (fname, value)) in fields.iter().enumerate() {
                out.push_str(if i > 0 { ", " } else { " " });
                out.push_str(fname);
                out.push_str(": ");
                write_expr(value, out);
            }
            out.push_str(if fields.is_empty() { "}" } else { " }" });
        }
        ExprKind::Var(name) => out.push_str(name),
        ExprKind::Field(base, field) => {
            write_child(base, POSTFIX_PREC, out);
            out.push('.');
            out.push_str(field);
        }
        ExprKind::Index(base, idx) => {
            write_child(base, POSTFIX_PREC, out);
            out.push('[');
            write_expr(idx, out);
            out.push(']');
        }
        ExprKind::Call(name, args) => {
            out.push_str(name);
            out.push('(');
            for (i, arg) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(arg, out);
            }
            out.push(')');
        }
        ExprKind::Unary(op, operand) => {
            out.push(match op {
                UnaryOp::Neg => '-',
                UnaryOp::Not => '!',
            });
            // `- -x` must not lex as a single token sequence that changes meaning;
            // nested unary operators are always parenthesised.
            if matches!(operand.kind, ExprKind::Unary(..))
                || matches!(operand.kind, ExprKind::Int(n) if n < 0)
            {
                out.push('(');
                write_expr(operand, out);
                out.push(')');
            } else {
                write_child(operand, UNARY_PREC, out);
            }
        }
        ExprKind::Binary(op, lhs, rhs) => {
            let prec = op.precedence();
            write_child(lhs, prec, out);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            write_child(rhs, prec + 1, out);
        }
    }
}

/// Source text for an integer. Negative values become unary negation;
/// `i64::MIN` has no positive counterpart and is spelled as a subtraction.
pub fn int_literal(n: i64) -> String {
    if n == i64::MIN {
        format!("-{} - 1", i64::MAX)
    } else {
        n.to_string()
    }
}

/// Literal source text for a runtime value. Records list their fields in the
/// value's stored order.
pub fn render_value(value: &Value) -> String {
    match value {
        Value::Int(n) => {
            if *n == i64::MIN {
                format!("({})", int_literal(*n))
            } else {
                int_literal(*n)
            }
        }
        Value::Bool(b) => b.to_string(),
        Value::Array(items) => {
            let parts: Vec<String> = items
                .iter()
                .map(|n| render_value(&Value::Int(*n)))
                .collect();
            format!("[{}]", parts.join(", "))
        }
        Value::Record(rec) => {
            if rec.fields.is_empty() {
                return format!("{} {{}}", rec.type_name);
            }
            let parts: Vec<String> = rec
                .fields
                .iter()
                .map(|(k, v)| format!("{k}: {}", render_value(v)))
                .collect();
            format!("{} {{ {} }}", rec.type_name, parts.join(", "))
        }
        Value::Unit => "()".to_string(),
    }
}
