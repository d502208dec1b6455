use forgespark_testkit::{generate, GenConfig};
use minilang::ast::{Block, ExprKind, StmtKind, UnaryOp};
use minilang::{compile, generate_mutants, parse, render, Expr, MutationOperator};

/// Collects the top-most pairs of differing expressions. Statement shapes
/// must agree everywhere.
fn diff_blocks<'a>(a: &'a Block, b: &'a Block, out: &mut Vec<(&'a Expr, &'a Expr)>) {
    assert_eq!(a.stmts.len(), b.stmts.len());
    for (x, y) in a.stmts.iter().zip(&b.stmts) {
        assert_eq!(x.line, y.line);
        match (&x.kind, &y.kind) {
            (
                StmtKind::Let {
                    name: n1,
                    ty: t1,
                    value: v1,
                },
                StmtKind::Let {
                    name: n2,
                    ty: t2,
                    value: v2,
                },
            ) => {
                assert_eq!((n1, t1), (n2, t2));
                diff_exprs(v1, v2, out);
            }
            (
                StmtKind::Assign {
                    name: n1,
                    value: v1,
                },
                StmtKind::Assign {
                    name: n2,
                    value: v2,
                },
            ) => {
                assert_eq!(n1, n2);
                diff_exprs(v1, v2, out);
            }
            (
                StmtKind::IndexAssign {
                    name: n1,
                    index: i1,
                    value: v1,
                },
                StmtKind::IndexAssign {
                    name: n2,
                    index: i2,
                    value: v2,
                },
            ) => {
                assert_eq!(n1, n2);
                diff_exprs(i1, i2, out);
                diff_exprs(v1, v2, out);
            }
            (
                StmtKind::If {
                    cond: c1,
                    then_block: t1,
                    else_block: e1,
                    ..
                },
                StmtKind::If {
                    cond: c2,
                    then_block: t2,
                    else_block: e2,
                    ..
                },
            ) => {
                diff_exprs(c1, c2, out);
                diff_blocks(t1, t2, out);
                assert_eq!(e1.is_some(), e2.is_some());
                if let (Some(e1), Some(e2)) = (e1, e2) {
                    diff_blocks(e1, e2, out);
                }
            }
            (
                StmtKind::While {
                    cond: c1, body: b1, ..
                },
                StmtKind::While {
                    cond: c2, body: b2, ..
                },
            ) => {
                diff_exprs(c1, c2, out);
                diff_blocks(b1, b2, out);
            }
            (StmtKind::Return(None), StmtKind::Return(None)) => {}
            (StmtKind::Return(Some(e1)), StmtKind::Return(Some(e2)))
            | (StmtKind::Assert(e1), StmtKind::Assert(e2))
            | (StmtKind::ExpectError(e1), StmtKind::ExpectError(e2))
            | (StmtKind::Expr(e1), StmtKind::Expr(e2)) => diff_exprs(e1, e2, out),
            (k1, k2) => panic!("statement kinds differ: {k1:?} vs {k2:?}"),
        }
    }
}

fn children(e: &Expr) -> Vec<&Expr> {
    match &e.kind {
        ExprKind::Int(_) | ExprKind::Bool(_) | ExprKind::Var(_) => vec![],
        ExprKind::Array(items) | ExprKind::Call(_, items) => items.iter().collect(),
        ExprKind::Record { fields, .. } => fields.iter().map(|(_, v)| v).collect(),
        ExprKind::Field(base, _) => vec![base],
        ExprKind::Index(a, b) | ExprKind::Binary(_, a, b) => vec![a, b],
        ExprKind::Unary(_, a) => vec![a],
    }
}

fn same_shape(a: &Expr, b: &Expr) -> bool {
    match (&a.kind, &b.kind) {
        (ExprKind::Binary(o1, ..), ExprKind::Binary(o2, ..)) => o1 == o2,
        (ExprKind::Unary(o1, _), ExprKind::Unary(o2, _)) => o1 == o2,
        (ExprKind::Int(x), ExprKind::Int(y)) => x == y,
        _ => {
            std::mem::discriminant(&a.kind) == std::mem::discriminant(&b.kind)
                && children(a).len() == children(b).len()
        }
    }
}

fn diff_exprs<'a>(a: &'a Expr, b: &'a Expr, out: &mut Vec<(&'a Expr, &'a Expr)>) {
    if a == b {
        return;
    }
    if !same_shape(a, b) {
        out.push((a, b));
        return;
    }
    for (x, y) in children(a).into_iter().zip(children(b)) {
        diff_exprs(x, y, out);
    }
}

fn strip(e: &Expr) -> Expr {
    let mut e = e.clone();
    minilang::ast::walk_expr_mut(&mut e, &mut |x| x.ty = None);
    e
}

#[test]
fn every_mutant_changes_exactly_one_node_and_typechecks() {
    let mut total = 0;
    let mut seen_ops = std::collections::BTreeSet::new();
    for seed in 0..120u64 {
        let g = generate(seed, &GenConfig::default());
        let canonical = render(&parse(&g.source).unwrap());
        let typed = compile(&canonical).unwrap();
        let original = parse(&canonical).unwrap();
        for f in &original.functions {
            let mutants = generate_mutants(&typed, &f.name).unwrap();
            for m in &mutants {
                assert!(
                    m.apply(&typed).is_ok(),
                    "mutant {} does not typecheck",
                    m.id
                );
                let text = render(&m.program);
                assert!(
                    compile(&text).is_ok(),
                    "rendered mutant {} does not compile",
                    m.id
                );
                let mf = m.program.function(&f.name).unwrap();
                let mut diffs = Vec::new();
                diff_blocks(&f.body, &mf.body, &mut diffs);
                assert_eq!(
                    diffs.len(),
                    1,
                    "mutant {} differs in {} places",
                    m.id,
                    diffs.len()
                );
                let (before, after) = diffs[0];
                let after = strip(after);
                match m.operator {
                    MutationOperator::NegateCondition => {
                        assert!(
                            matches!(&after.kind, ExprKind::Unary(UnaryOp::Not, inner) if **inner == *before)
                        );
                    }
                    _ => {
                        // one node replaced in place: same children
                        let (bc, ac) = (children(before), children(&after));
                        assert_eq!(bc.len(), ac.len());
                        assert!(bc.iter().zip(&ac).all(|(x, y)| *x == *y));
                    }
                }
                for other in &original.functions {
                    if other.name != f.name {
                        assert_eq!(Some(other), m.program.function(&other.name));
                    }
                }
                seen_ops.insert(m.operator);
            }
            let mut ids: Vec<&str> = mutants.iter().map(|m| m.id.as_str()).collect();
            ids.sort();
            ids.dedup();
            assert_eq!(ids.len(), mutants.len());
            total += mutants.len();
        }
    }
    assert!(total > 500, "only {total} mutants generated");
    assert_eq!(seen_ops.len(), 5);
}
