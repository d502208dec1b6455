//! Per-test line and branch coverage, mutation kill maps and aggregate
//! metrics over arbitrary test selections.

use std::collections::{BTreeMap, BTreeSet};

use minilang::ast::{statement_lines, Block, StmtKind};
use minilang::{
    parse_file, run_test, BranchId, FileId, Line, Mutant, MutationOperator, Outcome, TypedProgram,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pool::parallel_map;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoverageError {
    #[error("unknown test id '{0}'")]
    UnknownTest(String),
    #[error("unknown function '{0}'")]
    UnknownFunction(String),
    #[error("functions under test must live in one file")]
    MixedFiles,
}

/// The lines and branch outcomes that metrics are computed over.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageScope {
    pub file: FileId,
    pub functions: Vec<String>,
    pub lines: BTreeSet<Line>,
    pub branch_outcomes: BTreeSet<(BranchId, bool)>,
}

fn collect_branches(block: &Block, out: &mut BTreeSet<(BranchId, bool)>) {
    for stmt in &block.stmts {
        match &stmt.kind {
            StmtKind::If {
                then_block,
                else_block,
                branch,
                ..
            } => {
                out.insert((*branch, true));
                out.insert((*branch, false));
                collect_branches(then_block, out);
                if let Some(b) = else_block {
                    collect_branches(b, out);
                }
            }
            StmtKind::While { body, branch, .. } => {
                out.insert((*branch, true));
                out.insert((*branch, false));
                collect_branches(body, out);
            }
            _ => {}
        }
    }
}

impl CoverageScope {
    pub fn for_functions(program: &TypedProgram, names: &[String]) -> Result<Self, CoverageError> {
        let mut file = None;
        let mut lines = BTreeSet::new();
        let mut branch_outcomes = BTreeSet::new();
        for name in names {
            let r = program
                .function_ref(name)
                .ok_or_else(|| CoverageError::UnknownFunction(name.clone()))?;
            if file.is_some_and(|f| f != r.file) {
                return Err(CoverageError::MixedFiles);
            }
            file = Some(r.file);
            let decl = program.function_by_ref(r);
            lines.extend(statement_lines(&decl.body));
            collect_branches(&decl.body, &mut branch_outcomes);
        }
        Ok(CoverageScope {
            file: file.unwrap_or(FileId(0)),
            functions: names.to_vec(),
            lines,
            branch_outcomes,
        })
    }
}

/// A test to execute: one `test fn` plus any helpers it needs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteTest {
    pub id: String,
    pub code: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestStatus {
    Passing,
    Failing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestResult {
    pub id: String,
    pub name: String,
    pub status: TestStatus,
    pub error: Option<String>,
    /// Lines of non-test functions in the scope's file.
    pub covered_lines: BTreeSet<Line>,
    pub covered_branches: BTreeSet<(BranchId, bool)>,
}

impl TestResult {
    pub fn passed(&self) -> bool {
        self.status == TestStatus::Passing
    }
}

/// The project extended with one test's code, and that test's name.
pub fn with_test(
    program: &TypedProgram,
    test: &SuiteTest,
) -> Result<(TypedProgram, String), String> {
    let file =
        parse_file(&test.code, format!("suite/{}.ml", test.id)).map_err(|e| e.to_string())?;
    let [decl] = file.tests.as_slice() else {
        return Err(format!(
            "expected exactly one test, found {}",
            file.tests.len()
        ));
    };
    let name = decl.name.clone();
    let (extended, _) = program.extend(file).map_err(|errs| {
        errs.iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("; ")
    })?;
    Ok((extended, name))
}

/// Whether the test passes on `program`, or why not.
fn verdict(
    program: &TypedProgram,
    test: &SuiteTest,
    budget: u64,
) -> Result<minilang::ExecutionResult, String> {
    let (extended, name) =
        with_test(program, test).map_err(|e| format!("does not compile: {e}"))?;
    run_test(&extended, &name, budget).map_err(|e| e.to_string())
}

pub fn run_one(
    program: &TypedProgram,
    test: &SuiteTest,
    scope: &CoverageScope,
    budget: u64,
) -> TestResult {
    let name = parse_file(&test.code, "")
        .ok()
        .and_then(|p| p.tests.first().map(|t| t.name.clone()))
        .unwrap_or_else(|| test.id.clone());
    let mut result = TestResult {
        id: test.id.clone(),
        name,
        status: TestStatus::Failing,
        error: None,
        covered_lines: BTreeSet::new(),
        covered_branches: BTreeSet::new(),
    };
    match verdict(program, test, budget) {
        Err(e) => result.error = Some(e),
        Ok(exec) => {
            let project_functions: BTreeSet<Line> = program
                .file(scope.file)
                .functions
                .iter()
                .flat_map(|f| statement_lines(&f.body))
                .collect();
            result.covered_lines = exec
                .trace
                .iter()
                .filter(|p| p.file == scope.file && project_functions.contains(&p.line))
                .map(|p| p.line)
                .collect();
            result.covered_branches = exec
                .branches
                .iter()
                .filter(|h| h.function.file == scope.file)
                .map(|h| (h.branch, h.taken))
                .collect();
            match exec.outcome.error_message() {
                None => result.status = TestStatus::Passing,
                Some(e) => result.error = Some(e),
            }
        }
    }
    result
}

pub fn run_tests(
    program: &TypedProgram,
    tests: &[SuiteTest],
    scope: &CoverageScope,
    budget: u64,
) -> Vec<TestResult> {
    parallel_map(tests, |t| run_one(program, t, scope, budget))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationStrategy {
    /// Only tests covering the mutated line run against the mutant.
    SkipUncovered,
    Exhaustive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutantResult {
    pub id: String,
    pub operator: MutationOperator,
    pub function: String,
    pub line: Line,
    pub original: String,
    pub mutated: String,
    pub killed_by: BTreeSet<String>,
}

pub fn mutants_for(program: &TypedProgram, scope: &CoverageScope) -> Vec<Mutant> {
    scope
        .functions
        .iter()
        .flat_map(|f| minilang::generate_mutants(program, f).unwrap_or_default())
        .collect()
}

/// A mutant is killed by a test that passes on the original program and
/// fails, errors or runs out of steps on the mutant.
pub fn run_mutation(
    program: &TypedProgram,
    tests: &[SuiteTest],
    baseline: &[TestResult],
    mutants: &[Mutant],
    budget: u64,
    strategy: MutationStrategy,
) -> Vec<MutantResult> {
    let mutated: Vec<Option<TypedProgram>> = parallel_map(mutants, |m| m.apply(program).ok());
    let mut jobs: Vec<(usize, usize)> = Vec::new();
    for (mi, m) in mutants.iter().enumerate() {
        if mutated[mi].is_none() {
            continue;
        }
        for (ti, base) in baseline.iter().enumerate() {
            let relevant = match strategy {
                MutationStrategy::SkipUncovered => base.covered_lines.contains(&m.line),
                MutationStrategy::Exhaustive => true,
            };
            if base.passed() && relevant {
                jobs.push((mi, ti));
            }
        }
    }
    let killed = parallel_map(&jobs, |&(mi, ti)| {
        let p = mutated[mi].as_ref().expect("applied");
        !matches!(verdict(p, &tests[ti], budget), Ok(exec) if matches!(exec.outcome, Outcome::Normal(_)))
    });
    let mut results: Vec<MutantResult> = mutants
        .iter()
        .map(|m| MutantResult {
            id: m.id.clone(),
            operator: m.operator,
            function: m.function.clone(),
            line: m.line,
            original: m.original_fragment.clone(),
            mutated: m.mutated_fragment.clone(),
            killed_by: BTreeSet::new(),
        })
        .collect();
    for (&(mi, ti), k) in jobs.iter().zip(killed) {
        if k {
            results[mi].killed_by.insert(baseline[ti].id.clone());
        }
    }
    results
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub line_coverage_pct: f64,
    pub branch_outcome_pct: f64,
    pub mutation_score_pct: f64,
    pub lines_covered: usize,
    pub lines_total: usize,
    pub branch_outcomes_covered: usize,
    pub branch_outcomes_total: usize,
    pub mutants_killed: usize,
    pub mutants_total: usize,
}

fn pct(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        100.0 * part as f64 / whole as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LineInfo {
    pub covering_tests: BTreeSet<String>,
    pub mutants: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub scope: CoverageScope,
    pub tests: Vec<TestResult>,
    pub mutants: Vec<MutantResult>,
    pub mutation_ran: bool,
}

impl CoverageReport {
    pub fn build(
        program: &TypedProgram,
        tests: &[SuiteTest],
        scope: CoverageScope,
        budget: u64,
        with_mutation: bool,
    ) -> CoverageReport {
        let results = run_tests(program, tests, &scope, budget);
        let mutants = if with_mutation {
            let mutants = mutants_for(program, &scope);
            run_mutation(
                program,
                tests,
                &results,
                &mutants,
                budget,
                MutationStrategy::SkipUncovered,
            )
        } else {
            Vec::new()
        };
        CoverageReport {
            scope,
            tests: results,
            mutants,
            mutation_ran: with_mutation,
        }
    }

    pub fn test(&self, id: &str) -> Option<&TestResult> {
        self.tests.iter().find(|t| t.id == id)
    }

    pub fn test_ids(&self) -> BTreeSet<String> {
        self.tests.iter().map(|t| t.id.clone()).collect()
    }

    /// Line → covering tests and mutants on that line.
    pub fn per_line(&self) -> BTreeMap<Line, LineInfo> {
        let mut out: BTreeMap<Line, LineInfo> = BTreeMap::new();
        for line in &self.scope.lines {
            out.entry(*line).or_default();
        }
        for t in &self.tests {
            for line in &t.covered_lines {
                out.entry(*line)
                    .or_default()
                    .covering_tests
                    .insert(t.id.clone());
            }
        }
        for m in &self.mutants {
            out.entry(m.line).or_default().mutants.push(m.id.clone());
        }
        out
    }

    pub fn totals(&self, selection: &BTreeSet<String>) -> Result<Totals, CoverageError> {
        let mut lines = BTreeSet::new();
        let mut branches = BTreeSet::new();
        for id in selection {
            let t = self
                .test(id)
                .ok_or_else(|| CoverageError::UnknownTest(id.clone()))?;
            lines.extend(t.covered_lines.intersection(&self.scope.lines).copied());
            branches.extend(
                t.covered_branches
                    .intersection(&self.scope.branch_outcomes)
                    .copied(),
            );
        }
        let killed = self
            .mutants
            .iter()
            .filter(|m| !m.killed_by.is_disjoint(selection))
            .count();
        Ok(Totals {
            line_coverage_pct: pct(lines.len(), self.scope.lines.len()),
            branch_outcome_pct: pct(branches.len(), self.scope.branch_outcomes.len()),
            mutation_score_pct: pct(killed, self.mutants.len()),
            lines_covered: lines.len(),
            lines_total: self.scope.lines.len(),
            branch_outcomes_covered: branches.len(),
            branch_outcomes_total: self.scope.branch_outcomes.len(),
            mutants_killed: killed,
            mutants_total: self.mutants.len(),
        })
    }

    pub fn totals_all(&self) -> Totals {
        self.totals(&self.test_ids()).expect("own ids")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use minilang::compile;

    const ABS: &str = "fn abs(x: int) -> int {
    if (x < 0) {
        return -x;
    }
    return x;
}
fn inc(x: int) -> int {
    return x + 1;
}
";

    fn suite(codes: &[&str]) -> Vec<SuiteTest> {
        codes
            .iter()
            .enumerate()
            .map(|(i, c)| SuiteTest {
                id: format!("t{}", i + 1),
                code: c.to_string(),
            })
            .collect()
    }

    #[test]
    fn passing_and_failing_tests() {
        let p = compile(ABS).unwrap();
        let scope = CoverageScope::for_functions(&p, &["abs".to_string()]).unwrap();
        let tests = suite(&[
            "test fn test_a() {\n    assert abs(-3) == 3;\n}",
            "test fn test_b() {\n    assert inc(1) == 3;\n}",
            "test fn test_c() {\n    assert nope(1) == 3;\n}",
        ]);
        let r = run_tests(&p, &tests, &scope, 1000);
        assert!(r[0].passed());
        assert_eq!(r[0].covered_lines, BTreeSet::from([2, 3]));
        assert_eq!(r[0].covered_branches, BTreeSet::from([(0, true)]));
        assert!(!r[1].passed());
        assert_eq!(r[1].error.as_deref(), Some("line 2: assertion failed"));
        assert_eq!(r[1].covered_lines, BTreeSet::from([8]));
        assert!(r[2]
            .error
            .as_deref()
            .unwrap()
            .starts_with("does not compile"));
    }

    #[test]
    fn ror_mutant_killed_by_zero_input() {
        let p = compile(ABS).unwrap();
        let scope = CoverageScope::for_functions(&p, &["abs".to_string()]).unwrap();
        let tests = suite(&[
            "test fn test_neg() {\n    assert abs(-3) == 3;\n}",
            "test fn test_zero() {\n    let r: int = abs(0);\n    assert r == 0;\n}",
        ]);
        let base = run_tests(&p, &tests, &scope, 1000);
        let mutants: Vec<Mutant> = mutants_for(&p, &scope)
            .into_iter()
            .filter(|m| m.mutated_fragment == "x <= 0")
            .collect();
        assert_eq!(mutants.len(), 1);
        let res = run_mutation(
            &p,
            &tests,
            &base,
            &mutants,
            1000,
            MutationStrategy::SkipUncovered,
        );
        // -0 == 0, so the mutant survives both tests
        assert!(res[0].killed_by.is_empty());
    }

    #[test]
    fn empty_selection_is_zero() {
        let p = compile(ABS).unwrap();
        let scope = CoverageScope::for_functions(&p, &["abs".to_string()]).unwrap();
        let report = CoverageReport::build(
            &p,
            &suite(&["test fn test_a() {\n    assert abs(1) == 1;\n}"]),
            scope,
            1000,
            true,
        );
        let t = report.totals(&BTreeSet::new()).unwrap();
        assert_eq!(
            (
                t.line_coverage_pct,
                t.branch_outcome_pct,
                t.mutation_score_pct
            ),
            (0.0, 0.0, 0.0)
        );
        assert_eq!(
            report
                .totals(&BTreeSet::from(["zz".to_string()]))
                .unwrap_err(),
            CoverageError::UnknownTest("zz".into())
        );
        let all = report.totals_all();
        assert_eq!((all.lines_covered, all.lines_total), (2, 3));
    }
}
