use std::collections::BTreeSet;

use forgespark_core::coverage::{
    mutants_for, run_mutation, run_tests, CoverageReport, CoverageScope, MutationStrategy,
    SuiteTest,
};
use forgespark_core::sbst::{run_search, SearchConfig};
use forgespark_testkit::reference::{self, Owner};
use forgespark_testkit::{generate, split_suite, GenConfig};
use minilang::{compile, parse, render, TypedProgram};

const BUDGET: u64 = 5_000;

fn all_functions(p: &TypedProgram) -> Vec<String> {
    p.function_names().into_iter().map(str::to_string).collect()
}

#[test]
fn covered_lines_match_reference() {
    let mut pairs = 0;
    let mut seed = 0;
    let mut failing = 0;
    while pairs < 200 {
        seed += 1;
        let g = generate(seed, &GenConfig::default());
        let (project, suite) = split_suite(&g.source);
        let typed = compile(&project).unwrap();
        let scope = CoverageScope::for_functions(&typed, &all_functions(&typed)).unwrap();
        let tests: Vec<SuiteTest> = suite
            .iter()
            .map(|(name, code)| SuiteTest {
                id: name.clone(),
                code: code.clone(),
            })
            .collect();
        let results = run_tests(&typed, &tests, &scope, BUDGET);
        for (r, (name, code)) in results.iter().zip(&suite) {
            let combined = parse(&format!("{project}\n{code}")).unwrap();
            let run = reference::test(&combined, name, BUDGET);
            assert_eq!(
                r.passed(),
                run.result.is_ok(),
                "seed {seed} {name}: {:?} vs {:?}",
                r.error,
                run.result
            );
            let expected: BTreeSet<u32> = run
                .trace
                .iter()
                .filter(|(o, _)| matches!(o, Owner::Function(_)))
                .map(|(_, l)| *l)
                .collect();
            assert_eq!(r.covered_lines, expected, "seed {seed} {name}");
            failing += usize::from(!r.passed());
            pairs += 1;
        }
    }
    // the corpus exercises both verdicts
    assert!(failing > 0 && failing < pairs);
}

/// Project text plus regression tests produced by the search engine.
fn fixture(seed: u64) -> (String, TypedProgram, Vec<SuiteTest>) {
    let cfg = GenConfig {
        max_tests: 0,
        ..GenConfig::default()
    };
    let g = generate(seed, &cfg);
    let (project, _) = split_suite(&g.source);
    let typed = compile(&project).unwrap();
    let mut tests = Vec::new();
    for f in all_functions(&typed) {
        let config = SearchConfig {
            population_size: 20,
            max_evaluations: 400,
            rng_seed: seed,
            ..SearchConfig::default()
        };
        let out = run_search(&typed, &f, &config).unwrap();
        for t in out.tests {
            tests.push(SuiteTest {
                id: t.name.clone(),
                code: minilang::render::render_test(&t),
            });
        }
    }
    (project, typed, tests)
}

#[test]
fn skip_optimisation_matches_exhaustive_and_reference() {
    let mut mutants_checked = 0;
    let mut kills = 0;
    for seed in 1..=10 {
        let (_, typed, tests) = fixture(seed);
        let scope = CoverageScope::for_functions(&typed, &all_functions(&typed)).unwrap();
        let base = run_tests(&typed, &tests, &scope, BUDGET);
        assert!(
            base.iter().all(|r| r.passed()),
            "seed {seed}: regression tests must pass"
        );
        let mutants = mutants_for(&typed, &scope);
        let skip = run_mutation(
            &typed,
            &tests,
            &base,
            &mutants,
            BUDGET,
            MutationStrategy::SkipUncovered,
        );
        let full = run_mutation(
            &typed,
            &tests,
            &base,
            &mutants,
            BUDGET,
            MutationStrategy::Exhaustive,
        );
        assert_eq!(skip, full, "seed {seed}");
        for (m, result) in mutants.iter().zip(&full) {
            let mutated = render(&m.program);
            let expected: BTreeSet<String> = tests
                .iter()
                .filter(|t| {
                    let name = &t.id;
                    let combined = parse(&format!("{mutated}\n{}", t.code)).unwrap();
                    reference::test(&combined, name, BUDGET).result.is_err()
                })
                .map(|t| t.id.clone())
                .collect();
            assert_eq!(result.killed_by, expected, "seed {seed} mutant {}", m.id);
            kills += result.killed_by.len();
            mutants_checked += 1;
        }
    }
    assert!(
        mutants_checked > 50 && kills > 0,
        "{mutants_checked} mutants, {kills} kills"
    );
}

const CALC: &str = "fn clamp(x: int, lo: int, hi: int) -> int {
    if (x < lo) {
        return lo;
    }
    if (x > hi) {
        return hi;
    }
    return x;
}
";

fn four_tests() -> Vec<SuiteTest> {
    [
        "test fn test_low() {\n    assert clamp(-5, 0, 10) == 0;\n}",
        "test fn test_high() {\n    assert clamp(50, 0, 10) == 10;\n}",
        "test fn test_mid() {\n    assert clamp(5, 0, 10) == 5;\n}",
        "test fn test_wrong() {\n    assert clamp(5, 0, 10) == 6;\n}",
    ]
    .iter()
    .enumerate()
    .map(|(i, c)| SuiteTest {
        id: format!("t{i}"),
        code: c.to_string(),
    })
    .collect()
}

#[test]
fn subset_totals_equal_recomputation() {
    let typed = compile(CALC).unwrap();
    let scope = CoverageScope::for_functions(&typed, &["clamp".to_string()]).unwrap();
    let tests = four_tests();
    let report = CoverageReport::build(&typed, &tests, scope.clone(), BUDGET, true);
    assert!(report.mutants.len() > 10);
    let mut previous: Vec<(BTreeSet<String>, forgespark_core::coverage::Totals)> = Vec::new();
    for mask in 1u32..16 {
        let chosen: Vec<SuiteTest> = tests
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, t)| t.clone())
            .collect();
        let ids: BTreeSet<String> = chosen.iter().map(|t| t.id.clone()).collect();
        let fresh = CoverageReport::build(&typed, &chosen, scope.clone(), BUDGET, true);
        let from_scratch = fresh.totals_all();
        assert_eq!(report.totals(&ids).unwrap(), from_scratch, "subset {ids:?}");
        for (smaller, t) in &previous {
            if smaller.is_subset(&ids) {
                assert!(from_scratch.line_coverage_pct >= t.line_coverage_pct);
                assert!(from_scratch.branch_outcome_pct >= t.branch_outcome_pct);
                assert!(from_scratch.mutation_score_pct >= t.mutation_score_pct);
            }
        }
        previous.push((ids, from_scratch));
    }
    let all = report.totals_all();
    assert_eq!((all.lines_covered, all.lines_total), (5, 5));
    assert_eq!(
        (all.branch_outcomes_covered, all.branch_outcomes_total),
        (4, 4)
    );
}

#[test]
fn per_line_is_transpose_of_per_test() {
    for seed in 1..=5 {
        let (_, typed, tests) = fixture(seed);
        let scope = CoverageScope::for_functions(&typed, &all_functions(&typed)).unwrap();
        let report = CoverageReport::build(&typed, &tests, scope, BUDGET, true);
        let per_line = report.per_line();
        for t in &report.tests {
            for line in &t.covered_lines {
                assert!(per_line[line].covering_tests.contains(&t.id));
            }
        }
        for (line, info) in &per_line {
            for id in &info.covering_tests {
                assert!(report.test(id).unwrap().covered_lines.contains(line));
            }
            for m in &info.mutants {
                assert_eq!(
                    report.mutants.iter().find(|x| &x.id == m).unwrap().line,
                    *line
                );
            }
        }
        // every kill reproduces
        let again = CoverageReport::build(&typed, &tests, report.scope.clone(), BUDGET, true);
        assert_eq!(again.mutants, report.mutants);
    }
}
