use forgespark_testkit::{generate, GenConfig};
use minilang::ast::statement_count;
use minilang::{compile, parse, render};
use proptest::prelude::*;

fn noisy() -> GenConfig {
    GenConfig {
        noise: true,
        ..GenConfig::default()
    }
}

fn total_statements(p: &minilang::Program) -> usize {
    p.functions
        .iter()
        .map(|f| statement_count(&f.body))
        .sum::<usize>()
        + p.tests
            .iter()
            .map(|t| statement_count(&t.body))
            .sum::<usize>()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn parse_render_parse_is_a_fixpoint(seed in any::<u64>()) {
        let g = generate(seed, &noisy());
        let first = parse(&g.source).map_err(|e| TestCaseError::fail(format!("{e}\n{}", g.source)))?;
        let text = render(&first);
        let second = parse(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert!(second.structurally_eq(&first), "{}\n---\n{}", g.source, text);
        prop_assert_eq!(total_statements(&first), total_statements(&second));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn render_parse_render_is_stable(seed in any::<u64>()) {
        let g = generate(seed, &noisy());
        let once = render(&parse(&g.source).unwrap());
        let twice = render(&parse(&once).unwrap());
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn generated_programs_typecheck(seed in any::<u64>()) {
        let g = generate(seed, &noisy());
        if let Err(e) = compile(&g.source) {
            return Err(TestCaseError::fail(format!("{:?}\n{}", e.messages(), g.source)));
        }
    }
}

#[test]
fn one_statement_per_line() {
    let g = generate(7, &noisy());
    let text = render(&parse(&g.source).unwrap());
    let p = parse(&text).unwrap();
    let mut lines = Vec::new();
    for f in &p.functions {
        lines.extend(minilang::ast::statement_lines(&f.body));
    }
    let mut dedup = lines.clone();
    dedup.sort();
    dedup.dedup();
    assert_eq!(lines.len(), dedup.len());
}
