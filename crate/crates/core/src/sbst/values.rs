//! Random generation and mutation of argument values.

use minilang::ast::{visit_block_exprs, ExprKind, FunctionDecl, UnaryOp};
use minilang::{RecordValue, Type, TypedProgram, Value};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Nesting depth after which records stop picking subtypes.
const MAX_RECORD_DEPTH: usize = 4;
const MAX_ARRAY_LEN: usize = 6;

/// Integer constants appearing in the unit, each with its neighbours.
pub fn constant_pool(function: &FunctionDecl) -> Vec<i64> {
    let mut pool = vec![0];
    visit_block_exprs(&function.body, &mut |e| {
        let n = match &e.kind {
            ExprKind::Int(n) => Some(*n),
            ExprKind::Unary(UnaryOp::Neg, inner) => match inner.kind {
                ExprKind::Int(n) => n.checked_neg(),
                _ => None,
            },
            _ => None,
        };
        if let Some(n) = n {
            for v in [Some(n), n.checked_sub(1), n.checked_add(1)]
                .into_iter()
                .flatten()
            {
                pool.push(v);
            }
        }
    });
    pool.sort_unstable();
    pool.dedup();
    pool
}

pub struct ValueGen<'a> {
    pub program: &'a TypedProgram,
    pub pool: &'a [i64],
}

impl ValueGen<'_> {
    pub fn int(&self, rng: &mut ChaCha8Rng) -> i64 {
        match rng.gen_range(0..10) {
            0..=2 => *self.pool.choose(rng).unwrap_or(&0),
            3 => rng.gen_range(-10_000..=10_000),
            _ => rng.gen_range(-100..=100),
        }
    }

    pub fn random(&self, ty: &Type, rng: &mut ChaCha8Rng) -> Value {
        self.random_at(ty, rng, 0)
    }

    fn random_at(&self, ty: &Type, rng: &mut ChaCha8Rng, depth: usize) -> Value {
        match ty {
            Type::Int => Value::Int(self.int(rng)),
            Type::Bool => Value::Bool(rng.gen_bool(0.5)),
            Type::IntArray => {
                let len = rng.gen_range(0..=MAX_ARRAY_LEN);
                Value::Array((0..len).map(|_| self.int(rng)).collect())
            }
            Type::Record(name) => {
                let concrete = if depth >= MAX_RECORD_DEPTH {
                    name.clone()
                } else {
                    let options = self.program.concrete_types_for(name);
                    options
                        .choose(rng)
                        .map(|s| s.to_string())
                        .unwrap_or_else(|| name.clone())
                };
                self.record(&concrete, rng, depth)
            }
            Type::Unit => Value::Unit,
        }
    }

    fn record(&self, name: &str, rng: &mut ChaCha8Rng, depth: usize) -> Value {
        let fields = self
            .program
            .record_info(name)
            .map(|info| {
                info.fields
                    .iter()
                    .map(|(f, t)| (f.clone(), self.random_at(t, rng, depth + 1)))
                    .collect()
            })
            .unwrap_or_default();
        Value::Record(RecordValue {
            type_name: name.to_string(),
            fields,
        })
    }

    /// A neighbour of `value` conforming to `declared`. May occasionally
    /// return an equal value; callers wanting a change must check.
    pub fn mutate(&self, value: &Value, declared: &Type, rng: &mut ChaCha8Rng) -> Value {
        match value {
            Value::Int(n) => Value::Int(self.mutate_int(*n, rng)),
            Value::Bool(b) => Value::Bool(!b),
            Value::Array(items) => {
                let mut items = items.clone();
                match rng.gen_range(0..3) {
                    0 if items.len() < MAX_ARRAY_LEN * 2 => {
                        let at = rng.gen_range(0..=items.len());
                        items.insert(at, self.int(rng));
                    }
                    1 if !items.is_empty() => {
                        let at = rng.gen_range(0..items.len());
                        items.remove(at);
                    }
                    _ if !items.is_empty() => {
                        let at = rng.gen_range(0..items.len());
                        items[at] = self.mutate_int(items[at], rng);
                    }
                    _ => items.push(self.int(rng)),
                }
                Value::Array(items)
            }
            Value::Record(r) => {
                if r.fields.is_empty() || rng.gen_bool(0.2) {
                    return self.random(declared, rng);
                }
                let k = rng.gen_range(0..r.fields.len());
                let field_ty = self
                    .program
                    .record_info(&r.type_name)
                    .and_then(|info| info.field_type(&r.fields[k].0).cloned())
                    .unwrap_or(Type::Int);
                let mut r = r.clone();
                r.fields[k].1 = self.mutate(&r.fields[k].1, &field_ty, rng);
                Value::Record(r)
            }
            Value::Unit => Value::Unit,
        }
    }

    fn mutate_int(&self, n: i64, rng: &mut ChaCha8Rng) -> i64 {
        match rng.gen_range(0..6) {
            0 => n.saturating_add(1),
            1 => n.saturating_sub(1),
            2 => n.saturating_add(rng.gen_range(-20..=20)),
            3 => n.saturating_neg(),
            4 => *self.pool.choose(rng).unwrap_or(&0),
            _ => n.saturating_add(rng.gen_range(-1000..=1000)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn pool_contains_literals_and_neighbours() {
        let p = minilang::parse("fn f(x: int) -> int { if (x == -7) { return 3; } return 0; }")
            .unwrap();
        let pool = constant_pool(&p.functions[0]);
        for v in [-8, -7, -6, 2, 3, 4, 0, 1, -1] {
            assert!(pool.contains(&v), "{v}");
        }
    }

    #[test]
    fn records_pick_subtypes_and_carry_all_fields() {
        let typed = minilang::compile(
            "record A { x: int; }\nrecord B extends A { y: bool; }\nfn f(a: A) -> int { return a.x; }",
        )
        .unwrap();
        let pool = [0];
        let g = ValueGen {
            program: &typed,
            pool: &pool,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..50 {
            let Value::Record(r) = g.random(&Type::Record("A".into()), &mut rng) else {
                panic!()
            };
            let expected = typed.record_info(&r.type_name).unwrap().fields.len();
            assert_eq!(r.fields.len(), expected);
            seen.insert(r.type_name);
        }
        assert_eq!(seen.len(), 2);
    }
}
