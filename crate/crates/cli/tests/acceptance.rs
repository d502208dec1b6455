//! Runs every primary acceptance criterion and prints one PASS/FAIL line each.

#[path = "../../service/tests/harness/apply_fuzz.rs"]
mod apply_fuzz;

use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use forgespark_core::cfg::{
    line_mode_filter, node_control_dependences, post_dominators, ControlFlowGraph, CoverageGoal,
    Edge, EdgeLabel, FunctionAnalysis, GoalKind,
};
use forgespark_core::coverage::{
    mutants_for, run_mutation, run_tests, CoverageReport, CoverageScope, MutationStrategy,
    SuiteTest,
};
use forgespark_core::llm::{
    build_prompt, repair_loop, ByteHeuristic, FeedbackOutcome, LlmError, PromptDepths,
    PromptRequest, PromptTemplate, RepairLoopConfig, ScriptedProvider, Terminal, SMALLER_UNIT_HINT,
};
use forgespark_core::sbst::{run_search, run_search_observed, SearchConfig, SearchMode};
use forgespark_core::unit::{Technique, Uut};
use forgespark_service::telemetry::read_log;
use forgespark_service::{
    generate, ApplyDestination, EventKind, ForgeConfig, Phase, Region, Session, Telemetry,
};
use forgespark_testkit::graphs::{self, RawGraph};
use forgespark_testkit::reference::{self, Owner};
use forgespark_testkit::{nested, split_suite, GenConfig};
use minilang::{compile, parse, render, TypedProgram};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

const LLM_PROJECT: &str = "fn inc(x: int) -> int {
    return x + 1;
}
fn abs(x: int) -> int {
    if (x < 0) {
        return -x;
    }
    return x;
}
";

fn fenced(body: &str) -> String {
    format!("Here are the tests.\n```minilang\n{body}\n```\n")
}

fn scripted_loop(
    replies: &[String],
    max_iterations: u32,
) -> (Result<FeedbackOutcome, LlmError>, usize) {
    let typed = compile(LLM_PROJECT).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for (i, r) in replies.iter().enumerate() {
        std::fs::write(ScriptedProvider::reply_path(dir.path(), i + 1), r).unwrap();
    }
    let mut provider = ScriptedProvider::new(dir.path());
    let config = RepairLoopConfig {
        max_iterations,
        ..RepairLoopConfig::default()
    };
    let out = repair_loop(
        &typed,
        &PromptRequest::function("abs"),
        &PromptTemplate::default(),
        PromptDepths::default(),
        &config,
        &mut provider,
    );
    (out, provider.replies_used())
}

fn good_test(name: &str, k: usize) -> String {
    match k % 3 {
        0 => format!("test fn {name}() {{\n    assert abs(-{k}) == {k};\n}}"),
        1 => format!("test fn {name}() {{\n    assert inc({k}) == {};\n}}", k + 1),
        _ => format!("fn seed_{k}() -> int {{\n    return {k};\n}}\ntest fn {name}() {{\n    let r: int = abs(seed_{k}());\n    assert r >= 0;\n}}"),
    }
}

fn broken_test(name: &str, k: usize) -> String {
    match k % 4 {
        0 => format!("test fn {name}() {{\n    assert abss({k}) == {k};\n}}"),
        1 => format!("test fn {name}() {{\n    assert abs(true) == 1;\n}}"),
        2 => format!("test fn {name}() {{\n    assert inc({k});\n}}"),
        _ => format!("test fn {name}() {{\n    assert abs({k} == ;\n}}"),
    }
}

/// Transcript `i`: all good, all broken, mixed, broken-then-fixed, or
/// repeated names that force renaming.
fn transcript(i: usize, max_iterations: u32) -> Vec<String> {
    (0..=max_iterations as usize)
        .map(|r| {
            let n = 1 + (i + r) % 3;
            let tests: Vec<String> = (0..n)
                .map(|j| {
                    let name = format!("test_{i}_{r}_{j}");
                    let k = i + r + j;
                    match i % 5 {
                        0 => good_test(&name, k),
                        1 => broken_test(&name, k),
                        2 if j % 2 == 0 => good_test(&name, k),
                        2 => broken_test(&name, k),
                        3 if r == 0 => broken_test(&name, k),
                        3 => good_test(&name, k),
                        _ if j == 0 => broken_test(&name, k),
                        _ => good_test("test_dup", k),
                    }
                })
                .collect();
            fenced(&tests.join("\n"))
        })
        .collect()
}

fn compile_guarantee() -> Check {
    let start = Instant::now();
    let mut terminals = BTreeSet::new();
    let mut saved_total = 0;
    for i in 0..20 {
        let max_iterations = 1 + (i % 3) as u32;
        let (out, used) = scripted_loop(&transcript(i, max_iterations), max_iterations);
        let out = out.map_err(|e| format!("transcript {i}: {e}"))?;
        ensure!(
            out.iterations_used <= max_iterations,
            "transcript {i}: {} iterations",
            out.iterations_used
        );
        ensure!(
            used <= max_iterations as usize,
            "transcript {i}: {used} replies consumed"
        );
        let mut joint = LLM_PROJECT.to_string();
        let mut names = BTreeSet::new();
        for c in &out.saved {
            ensure!(
                names.insert(c.name.clone()),
                "transcript {i}: duplicate saved name {}",
                c.name
            );
            compile(&format!("{LLM_PROJECT}\n{}", c.code))
                .map_err(|e| format!("transcript {i}: saved {} does not typecheck: {e}", c.name))?;
            joint.push('\n');
            joint.push_str(&c.code);
        }
        compile(&joint)
            .map_err(|e| format!("transcript {i}: saved set does not typecheck together: {e}"))?;
        terminals.insert(format!("{:?}", out.terminal));
        saved_total += out.saved.len();
    }
    ensure!(
        terminals.len() == 3,
        "terminal states exercised: {terminals:?}"
    );
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!(
        "20 transcripts, {saved_total} saved tests re-typecheck, {elapsed:.1?}"
    ))
}

fn fallback() -> Check {
    let broken = fenced(&broken_test("test_a", 0));
    for max_iterations in 1..=3u32 {
        let replies = vec![broken.clone(); max_iterations as usize + 1];
        let (out, used) = scripted_loop(&replies, max_iterations);
        let out = out.map_err(|e| e.to_string())?;
        ensure!(
            out.terminal == Terminal::BudgetExhaustedWithNone,
            "max {max_iterations}: {:?}",
            out.terminal
        );
        ensure!(
            out.saved.is_empty(),
            "max {max_iterations}: saved {}",
            out.saved.len()
        );
        ensure!(
            out.iterations_used == max_iterations && used == max_iterations as usize,
            "max {max_iterations}: used {used}"
        );
        let message = out.message.unwrap_or_default();
        ensure!(
            message.contains(SMALLER_UNIT_HINT),
            "max {max_iterations}: message '{message}'"
        );
    }
    let mixed = fenced(&format!(
        "{}\n{}",
        good_test("test_keep", 0),
        broken_test("test_bad", 1)
    ));
    let (out, _) = scripted_loop(&[mixed.clone(), mixed.clone(), mixed], 2);
    let out = out.map_err(|e| e.to_string())?;
    ensure!(
        out.terminal == Terminal::BudgetExhaustedWithSome,
        "mixed: {:?}",
        out.terminal
    );
    let names: Vec<&str> = out.saved.iter().map(|c| c.name.as_str()).collect();
    ensure!(names == ["test_keep"], "mixed saved {names:?}");
    Ok(
        "all-broken x {1,2,3} -> BudgetExhaustedWithNone; mixed -> BudgetExhaustedWithSome"
            .to_string(),
    )
}

fn fields(prefix: &str, n: usize) -> String {
    (0..n)
        .map(|i| format!("    {prefix}_{i}: int;\n"))
        .collect()
}

fn prompt_shrinking() -> Check {
    let src = format!(
        "record Detail {{\n{}}}
record Holder {{\n    detail: Detail;\n    tag: int;\n{}}}
record Shape {{\n    id: int;\n}}
record Circle extends Shape {{\n    radius: int;\n}}
record Square extends Shape {{\n    side: int;\n}}
record Ring extends Circle {{\n    inner: int;\n}}
fn measure(h: Holder, s: Shape) -> int {{\n    return h.tag + s.id;\n}}\n",
        fields("measurement_component", 16),
        fields("holder_slot_value", 30),
    );
    let typed = compile(&src).map_err(|e| e.to_string())?;
    let build = |program: &TypedProgram, uut: &str| {
        build_prompt(
            program,
            &PromptRequest::function(uut),
            &PromptTemplate::default(),
            PromptDepths::new(2, 2),
            500,
            &ByteHeuristic,
        )
    };
    let built = build(&typed, "measure").map_err(|e| e.to_string())?;
    let depths: Vec<(u32, u32)> = built
        .attempts
        .iter()
        .map(|(d, _)| (d.input_depth, d.polymorphism_depth))
        .collect();
    ensure!(
        depths == [(2, 2), (2, 1), (1, 1)],
        "attempts {:?}",
        built.attempts
    );
    let tokens: Vec<usize> = built.attempts.iter().map(|(_, t)| *t).collect();
    ensure!(
        tokens[0] > 500 && tokens[1] > 500 && tokens[2] <= 500,
        "tokens {tokens:?}"
    );
    ensure!(
        built.depths == PromptDepths::new(1, 1),
        "final {:?}",
        built.depths
    );

    let body: String = (0..60)
        .map(|i| format!("    total = total + x * {i};\n"))
        .collect();
    let huge =
        format!("fn sum(x: int) -> int {{\n    let total: int = 0;\n{body}    return total;\n}}\n");
    let typed = compile(&huge).map_err(|e| e.to_string())?;
    match build(&typed, "sum") {
        Err(LlmError::PromptTooLarge(m)) if m.contains(SMALLER_UNIT_HINT) => {}
        other => return Err(format!("(0,0) fixture: {other:?}")),
    }
    Ok(format!(
        "tokens {tokens:?} at (2,2)/(2,1)/(1,1) -> (1,1); (0,0) over budget -> PromptTooLarge"
    ))
}

fn to_cfg(g: &RawGraph) -> ControlFlowGraph {
    let edges = g
        .edges
        .iter()
        .map(|&(from, to, l)| Edge {
            from,
            to,
            label: match l {
                None => EdgeLabel::Unconditional,
                Some(true) => EdgeLabel::True,
                Some(false) => EdgeLabel::False,
            },
        })
        .collect();
    ControlFlowGraph::from_edges(g.n, 0, g.exit(), edges)
}

fn control_dependence() -> Check {
    let start = Instant::now();
    let mut corpus = Vec::new();
    for n in 2..=4 {
        corpus.extend(graphs::exhaustive(n));
    }
    corpus.extend(graphs::random(0x5eed, 3000, 5..=10));
    let mut checked = 0;
    for g in &corpus {
        let cfg = to_cfg(g);
        if !g.every_node_reaches_exit() {
            ensure!(
                post_dominators(&cfg).is_err(),
                "malformed graph accepted: {g:?}"
            );
            continue;
        }
        let pdom = post_dominators(&cfg).map_err(|e| format!("{g:?}: {e}"))?;
        let brute = graphs::brute_post_dominators(g);
        for v in 0..g.n {
            let ours: BTreeSet<usize> = pdom.set(v).into_iter().collect();
            ensure!(ours == brute[v], "post-dominators of {v} in {g:?}");
            ensure!(
                pdom.immediate[v] == graphs::brute_immediate(&brute, v),
                "ipdom of {v} in {g:?}"
            );
        }
        ensure!(
            node_control_dependences(&cfg, &pdom) == graphs::brute_control_dependence(g),
            "dependence in {g:?}"
        );
        checked += 1;
    }
    let elapsed = start.elapsed();
    ensure!(checked >= 5000, "only {checked} graphs");
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!("{checked} graphs, 0 mismatches, {elapsed:.1?}"))
}

fn single_line_mode() -> Check {
    let start = Instant::now();
    let cases = nested::cases();
    ensure!(cases.len() == 10, "{} cases", cases.len());
    let mut worst = 20;
    for case in &cases {
        let typed = compile(case.source).map_err(|e| e.to_string())?;
        let analysis = FunctionAnalysis::new(typed.function(case.function).unwrap())
            .map_err(|e| e.to_string())?;
        let filter = line_mode_filter(&analysis.deps, &analysis.cfg, case.target_line)
            .map_err(|e| e.to_string())?;
        let mut hits = 0;
        for seed in 0..20 {
            let config = SearchConfig {
                rng_seed: seed,
                mode: SearchMode::SingleLine(case.target_line),
                ..SearchConfig::default()
            };
            let mut escaped = BTreeSet::new();
            let out = run_search_observed(&typed, case.function, &config, &mut |p| {
                escaped.extend(p.objectives.activated().difference(&filter).copied());
            })
            .map_err(|e| e.to_string())?;
            ensure!(
                escaped.is_empty(),
                "{} seed {seed}: active goals outside the filter {escaped:?}",
                case.function
            );
            let target = GoalKind::Line {
                line: case.target_line,
            };
            if out
                .archive
                .entries
                .get(&target)
                .is_some_and(|e| e.execution.trace.iter().any(|p| p.line == case.target_line))
            {
                hits += 1;
            }
        }
        ensure!(
            hits >= 19,
            "{}: target reached for {hits}/20 seeds",
            case.function
        );
        worst = worst.min(hits);

        let out = run_search(
            &typed,
            case.function,
            &SearchConfig {
                rng_seed: 7,
                ..SearchConfig::default()
            },
        )
        .map_err(|e| e.to_string())?;
        let covered: BTreeSet<CoverageGoal> = out.summary.covered_goals.iter().copied().collect();
        let infeasible: BTreeSet<CoverageGoal> = case
            .infeasible
            .iter()
            .map(|&(line, outcome)| match outcome {
                None => GoalKind::Line { line },
                Some(outcome) => GoalKind::Branch {
                    node: analysis.cfg.block_of_line(line).unwrap(),
                    outcome,
                },
            })
            .collect();
        let missing: Vec<_> = analysis
            .all_goals()
            .difference(&infeasible)
            .filter(|g| !covered.contains(g))
            .copied()
            .collect();
        ensure!(
            missing.is_empty(),
            "{}: full-unit mode missed {missing:?}",
            case.function
        );
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
    Ok(format!(
        "10 functions, worst {worst}/20 seeds, full-unit covers all feasible goals, {elapsed:.1?}"
    ))
}

const BUDGET: u64 = 5_000;

fn all_functions(p: &TypedProgram) -> Vec<String> {
    p.function_names().into_iter().map(str::to_string).collect()
}

fn coverage_oracles() -> Check {
    let mut pairs = 0;
    let mut seed = 0;
    while pairs < 200 {
        seed += 1;
        let g = forgespark_testkit::generate(seed, &GenConfig::default());
        let (project, suite) = split_suite(&g.source);
        let typed = compile(&project).map_err(|e| format!("seed {seed}: {e}"))?;
        let scope = CoverageScope::for_functions(&typed, &all_functions(&typed))
            .map_err(|e| e.to_string())?;
        let tests: Vec<SuiteTest> = suite
            .iter()
            .map(|(n, c)| SuiteTest {
                id: n.clone(),
                code: c.clone(),
            })
            .collect();
        for (r, (name, code)) in run_tests(&typed, &tests, &scope, BUDGET).iter().zip(&suite) {
            let run = reference::test(&parse(&format!("{project}\n{code}")).unwrap(), name, BUDGET);
            let expected: BTreeSet<u32> = run
                .trace
                .iter()
                .filter(|(o, _)| matches!(o, Owner::Function(_)))
                .map(|(_, l)| *l)
                .collect();
            ensure!(
                r.covered_lines == expected,
                "seed {seed} {name}: lines differ from the reference"
            );
            ensure!(
                r.passed() == run.result.is_ok(),
                "seed {seed} {name}: verdict differs from the reference"
            );
            pairs += 1;
        }
    }

    let mut mutants_checked = 0;
    for seed in 1..=10 {
        let g = forgespark_testkit::generate(
            seed,
            &GenConfig {
                max_tests: 0,
                ..GenConfig::default()
            },
        );
        let (project, _) = split_suite(&g.source);
        let typed = compile(&project).map_err(|e| e.to_string())?;
        let mut tests = Vec::new();
        for f in all_functions(&typed) {
            let config = SearchConfig {
                population_size: 20,
                max_evaluations: 400,
                rng_seed: seed,
                ..SearchConfig::default()
            };
            for t in run_search(&typed, &f, &config)
                .map_err(|e| e.to_string())?
                .tests
            {
                tests.push(SuiteTest {
                    id: t.name.clone(),
                    code: render::render_test(&t),
                });
            }
        }
        let scope = CoverageScope::for_functions(&typed, &all_functions(&typed))
            .map_err(|e| e.to_string())?;
        let base = run_tests(&typed, &tests, &scope, BUDGET);
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
        ensure!(
            skip == full,
            "fixture {seed}: skip-uncovered kill map differs from exhaustive"
        );
        mutants_checked += mutants.len();
    }

    let typed = compile(apply_fuzz::CALC).map_err(|e| e.to_string())?;
    let scope =
        CoverageScope::for_functions(&typed, &["clamp".to_string()]).map_err(|e| e.to_string())?;
    let tests: Vec<SuiteTest> = [
        "assert clamp(-5, 0, 10) == 0;",
        "assert clamp(50, 0, 10) == 10;",
        "assert clamp(5, 0, 10) == 5;",
        "assert clamp(5, 0, 10) == 6;",
    ]
    .iter()
    .enumerate()
    .map(|(i, body)| SuiteTest {
        id: format!("t{i}"),
        code: format!("test fn test_{i}() {{\n    {body}\n}}"),
    })
    .collect();
    let report = CoverageReport::build(&typed, &tests, scope.clone(), BUDGET, true);
    for mask in 1u32..16 {
        let chosen: Vec<SuiteTest> = tests
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, t)| t.clone())
            .collect();
        let ids: BTreeSet<String> = chosen.iter().map(|t| t.id.clone()).collect();
        let fresh =
            CoverageReport::build(&typed, &chosen, scope.clone(), BUDGET, true).totals_all();
        ensure!(
            report.totals(&ids).map_err(|e| e.to_string())? == fresh,
            "subset {ids:?}"
        );
    }
    Ok(format!("200 pairs match the reference; 10 fixtures ({mutants_checked} mutants) skip == exhaustive; 15 subsets"))
}

fn apply_fuzzing() -> Check {
    let stats = apply_fuzz::run(5, 10)?;
    ensure!(stats.operations == 50, "{stats:?}");
    ensure!(
        stats.applied > 0 && stats.refused + stats.rolled_back > 0,
        "{stats:?}"
    );
    Ok(format!(
        "{} operations: {} applied, {} refused, {} rolled back",
        stats.operations, stats.applied, stats.refused, stats.rolled_back
    ))
}

fn mask_timestamp(report: &str) -> String {
    report
        .lines()
        .map(|l| {
            if l.trim_start().starts_with("\"timestamp\":") {
                "  \"timestamp\": \"\","
            } else {
                l
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn cli_generate(root: &Path, out: &str, extra: &[&str]) -> Result<String, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_forgespark"))
        .args(["generate", "--project"])
        .arg(root)
        .args(["--file", "calc.ml", "--out"])
        .arg(root.join(out))
        .args(extra)
        .env_remove("FORGESPARK_SBST_SEED")
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(
        status.status.success(),
        "{extra:?}: {}",
        String::from_utf8_lossy(&status.stderr)
    );
    std::fs::read_to_string(root.join(out)).map_err(|e| e.to_string())
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path();
    std::fs::write(root.join("calc.ml"), apply_fuzz::CALC).map_err(|e| e.to_string())?;
    std::fs::create_dir(root.join("replies")).map_err(|e| e.to_string())?;
    let reply = fenced(&format!(
        "{}\n{}\ntest fn test_clamp_high() {{\n    assert clamp(50, 0, 10) == 10;\n}}",
        good_test("test_abs_neg", 0),
        broken_test("test_bad", 0)
    ));
    std::fs::write(
        ScriptedProvider::reply_path(&root.join("replies"), 1),
        reply,
    )
    .map_err(|e| e.to_string())?;
    let runs: [(&str, Vec<&str>); 2] = [
        ("sbst", vec!["--technique", "sbst", "--seed", "42"]),
        (
            "llm",
            vec![
                "--technique",
                "llm",
                "--llm-provider",
                "scripted",
                "--llm-scripted-dir",
                "replies",
                "--max-repair-iters",
                "1",
                "--function",
                "clamp",
            ],
        ),
    ];
    for (label, args) in &runs {
        let reports: Vec<String> = (0..3)
            .map(|i| cli_generate(root, &format!("{label}-{i}.json"), args))
            .collect::<Result<_, _>>()?;
        ensure!(
            reports[0].contains("\"timestamp\""),
            "{label}: no timestamp field"
        );
        for (i, r) in reports.iter().enumerate().skip(1) {
            ensure!(
                mask_timestamp(r) == mask_timestamp(&reports[0]),
                "{label}: run {i} differs from run 0"
            );
        }
        ensure!(
            reports[0].contains("\"status\": \"passing\""),
            "{label}: no passing test in the report"
        );
    }
    Ok("sbst --seed 42 and scripted llm: 3 identical reports each".to_string())
}

fn telemetry_sequence() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path();
    std::fs::write(root.join("calc.ml"), apply_fuzz::CALC).map_err(|e| e.to_string())?;
    let replies = root.join("replies");
    std::fs::create_dir(&replies).map_err(|e| e.to_string())?;
    let generated = fenced(
        "test fn test_low() {\n    assert clamp(-5, 0, 10) == 0;\n}\ntest fn test_high() {\n    assert clamp(50, 0, 10) == 10;\n}\ntest fn test_mid() {\n    assert clamp(5, 0, 10) == 5;\n}",
    );
    let revised = fenced(
        "test fn test_high() {\n    // above the range\n    assert clamp(11, 0, 10) == 10;\n}",
    );
    for (i, r) in [generated, revised].iter().enumerate() {
        std::fs::write(ScriptedProvider::reply_path(&replies, i + 1), r)
            .map_err(|e| e.to_string())?;
    }
    let mut config = ForgeConfig::default();
    config.llm.provider = "scripted".into();
    config.llm.scripted_dir = Some("replies".into());
    let telemetry = Telemetry::new(root, true);
    let uut = Uut::Function {
        file: "calc.ml".into(),
        function: "clamp".into(),
    };
    let handle = Mutex::new(Session::new("s1".into(), root, uut, Technique::Llm, config));
    generate(&telemetry, &handle);
    let mut s = handle.into_inner().map_err(|e| e.to_string())?;
    ensure!(s.phase == Phase::Ready, "session ended in {:?}", s.phase);

    let edited = s
        .test("t1")
        .map_err(|e| e.to_string())?
        .current_code
        .replace("== 0", ">= 0");
    s.run_test(&telemetry, "t1", Some(edited))
        .map_err(|e| e.to_string())?;
    s.feedback(&telemetry, "t2", "use a value just above the range")
        .map_err(|e| e.to_string())?;
    s.set_flags("t3", Some(false), None)
        .map_err(|e| e.to_string())?;
    let dest = ApplyDestination::NewFile {
        directory: "tests".into(),
        class_name: "ClampTests".into(),
    };
    let applied = s
        .apply(&telemetry, None, &dest)
        .map_err(|e| e.to_string())?;
    ensure!(applied.tests.len() == 2, "applied {:?}", applied.tests);

    let kinds: Vec<EventKind> = read_log(root)
        .into_iter()
        .map(|e| match e.kind {
            EventKind::GenerationFinished {
                technique,
                success,
                tests_count,
                ..
            } => EventKind::GenerationFinished {
                technique,
                success,
                duration_ms: 0,
                tests_count,
            },
            other => other,
        })
        .collect();
    let expected = vec![
        EventKind::GenerationStarted {
            technique: Technique::Llm,
            uut_kind: "function".into(),
        },
        EventKind::GenerationFinished {
            technique: Technique::Llm,
            success: true,
            duration_ms: 0,
            tests_count: 3,
        },
        EventKind::TestModified {
            region: Region::Assertions,
        },
        EventKind::TestRun { passed: true },
        EventKind::LlmFeedbackSent,
        EventKind::TestsIntegrated {
            count: 2,
            technique: Technique::Llm,
        },
    ];
    ensure!(kinds == expected, "events {kinds:?}");
    Ok(format!("{} events in the expected order", kinds.len()))
}

fn main() {
    let checks: [Criterion; 9] = [
        (
            "compile guarantee over scripted transcripts",
            compile_guarantee,
        ),
        ("fallback terminal states", fallback),
        ("prompt shrinking", prompt_shrinking),
        ("control-dependence oracle", control_dependence),
        ("single-line mode", single_line_mode),
        ("coverage and mutation oracles", coverage_oracles),
        ("apply to suite fuzzing", apply_fuzzing),
        ("cli generate determinism", determinism),
        ("telemetry event sequence", telemetry_sequence),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!("{} of 9 acceptance criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
