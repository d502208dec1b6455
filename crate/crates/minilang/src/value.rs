use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ast::{BinOp, Expr, ExprKind, UnaryOp};

/// Runtime value. Records and arrays have value semantics.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Array(Vec<i64>),
    Record(RecordValue),
    /// Result of test bodies and value-less returns.
    Unit,
}

/// A record instance. `fields` holds every field of `type_name`, inherited
/// ones first, in declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RecordValue {
    pub type_name: String,
    pub fields: Vec<(String, Value)>,
}

impl RecordValue {
    pub fn get(&self, field: &str) -> Option<&Value> {
        self.fields.iter().find(|(k, _)| k == field).map(|(_, v)| v)
    }
}

impl Value {
    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    /// Rough structural size, used to prefer smaller tests.
    pub fn size(&self) -> usize {
        match self {
            Value::Int(_) | Value::Bool(_) | Value::Unit => 1,
            Value::Array(items) => 1 + items.len(),
            Value::Record(r) => 1 + r.fields.iter().map(|(_, v)| v.size()).sum::<usize>(),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::render::render_value(self))
    }
}

/// Evaluates an integer literal expression as produced by [`render_value`]
/// (`3`, `-3`, `-9223372036854775807 - 1`).
///
/// [`render_value`]: crate::render::render_value
pub fn fold_int_literal(expr: &Expr) -> Option<i64> {
    match &expr.kind {
        ExprKind::Int(n) => Some(*n),
        ExprKind::Unary(UnaryOp::Neg, inner) => fold_int_literal(inner)?.checked_neg(),
        ExprKind::Binary(BinOp::Sub, l, r) => {
            fold_int_literal(l)?.checked_sub(fold_int_literal(r)?)
        }
        _ => None,
    }
}
