//! Randomised apply operations checked against a filesystem snapshot and an
//! independent whole-project typecheck.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use forgespark_service::{apply_to_suite, load_project, ApplyDestination};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

pub const CALC: &str = "record Pt {
    x: int;
}
fn abs(x: int) -> int {
    if (x < 0) {
        return -x;
    }
    return x;
}
fn clamp(x: int, lo: int, hi: int) -> int {
    if (x < lo) {
        return lo;
    }
    if (x > hi) {
        return hi;
    }
    return x;
}
";

/// Candidate tests: shared, conflicting and project-shadowing helpers,
/// repeated test names, and one that does not compile.
pub const POOL: &[&str] = &[
    "test fn test_a() {\n    assert abs(-2) == 2;\n}\n",
    "fn mk() -> int {\n    return -2;\n}\ntest fn test_b() {\n    assert abs(mk()) == 2;\n}\n",
    "fn mk() -> int {\n    return 5;\n}\ntest fn test_c() {\n    assert abs(mk()) == 5;\n}\n",
    "fn mk_2() -> int {\n    return -2;\n}\ntest fn test_b() {\n    assert abs(mk_2()) > 0;\n}\n",
    "record Pt {\n    x: int;\n}\nfn mkp() -> Pt {\n    return Pt { x: 1 };\n}\ntest fn test_d() {\n    assert mkp().x == 1;\n}\n",
    "record Pt {\n    y: bool;\n}\ntest fn test_e() {\n    let p: Pt = Pt { y: true };\n    assert p.y;\n    assert abs(-1) == 1;\n}\n",
    "fn abs(x: int) -> int {\n    return x;\n}\ntest fn test_f() {\n    assert abs(3) == 3;\n}\n",
    "fn clamp(x: int, lo: int, hi: int) -> int {\n    if (x < lo) {\n        return lo;\n    }\n    if (x > hi) {\n        return hi;\n    }\n    return x;\n}\ntest fn test_g() {\n    assert clamp(20, 0, 10) == 10;\n}\n",
    "test fn test_h() {\n    let a: int[] = [3, -1];\n    assert abs(a[1]) == 1;\n}\n",
    "test fn test_broken() {\n    assert nope(1) == 1;\n}\n",
];

const DIRS: &[&str] = &["", "tests", "tests/deep", "suite", "../escape", ".hidden"];
const NAMES: &[&str] = &[
    "Suite", "AbsTests", "calc", "T", "Extra", "More", "1bad", "while",
];

#[derive(Debug, Clone)]
pub enum Dest {
    New {
        dir: usize,
        name: usize,
    },
    /// Index into the current source list; one past the end names a
    /// missing file.
    Existing {
        file: usize,
    },
}

#[derive(Debug, Clone)]
pub struct Op {
    pub tests: Vec<usize>,
    pub dest: Dest,
    /// A clashing file appears after the project snapshot was taken.
    pub stale: bool,
}

fn op_strategy() -> impl Strategy<Value = Op> {
    let dest = prop_oneof![
        3 => (0..DIRS.len(), 0..NAMES.len()).prop_map(|(dir, name)| Dest::New { dir, name }),
        2 => (0..3usize).prop_map(|file| Dest::Existing { file }),
    ];
    let test = prop_oneof![12 => 0..POOL.len() - 1, 1 => Just(POOL.len() - 1)];
    (
        prop::collection::vec(test, 1..5),
        dest,
        prop::bool::weighted(0.15),
    )
        .prop_map(|(tests, dest, stale)| Op { tests, dest, stale })
}

#[derive(Debug, Default, Clone, Copy)]
pub struct Stats {
    pub operations: usize,
    pub applied: usize,
    pub refused: usize,
    pub rolled_back: usize,
}

fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    walkdir::WalkDir::new(root)
        .into_iter()
        .map(|e| e.unwrap())
        .filter(|e| e.depth() > 0)
        .map(|e| {
            let bytes = if e.file_type().is_file() {
                std::fs::read(e.path()).unwrap()
            } else {
                b"<dir>".to_vec()
            };
            (e.path().strip_prefix(root).unwrap().to_path_buf(), bytes)
        })
        .collect()
}

/// Independent oracle: every `.ml` file parsed and checked as one program.
fn typechecks(root: &Path) -> Result<(), String> {
    let mut text = String::new();
    for (path, bytes) in snapshot(root) {
        let hidden = path
            .components()
            .any(|c| c.as_os_str().to_string_lossy().starts_with('.'));
        if path.extension().is_some_and(|x| x == "ml") && !hidden {
            text.push_str(&String::from_utf8(bytes).unwrap());
            text.push('\n');
        }
    }
    minilang::compile(&text)
        .map(|_| ())
        .map_err(|e| e.to_string())
}

fn apply_one(root: &Path, op: &Op, step: usize, stats: &mut Stats) -> Result<(), String> {
    let project = load_project(root).map_err(|e| e.to_string())?;
    let late = root.join(format!("late_{step}.ml"));
    if op.stale {
        let first = POOL[op.tests[0]];
        let name = first
            .split("test fn ")
            .nth(1)
            .unwrap()
            .split('(')
            .next()
            .unwrap();
        std::fs::write(&late, format!("fn {name}() -> int {{\n    return 0;\n}}\n")).unwrap();
    }
    let outcome = check_apply(root, &project, op, stats);
    if op.stale {
        std::fs::remove_file(&late).unwrap();
        typechecks(root)
            .map_err(|e| format!("{op:?}: broken after removing the clashing file: {e}"))?;
    }
    outcome
}

fn check_apply(
    root: &Path,
    project: &forgespark_service::Project,
    op: &Op,
    stats: &mut Stats,
) -> Result<(), String> {
    let dest = match &op.dest {
        Dest::New { dir, name } => ApplyDestination::NewFile {
            directory: DIRS[*dir].into(),
            class_name: NAMES[*name].to_string(),
        },
        Dest::Existing { file } => {
            let sources = &project.sources;
            let path = sources
                .get(*file)
                .map_or_else(|| PathBuf::from("missing.ml"), |s| s.path.clone());
            ApplyDestination::ExistingFile { path }
        }
    };
    let codes: Vec<String> = op.tests.iter().map(|&i| POOL[i].to_string()).collect();
    let before = snapshot(root);
    stats.operations += 1;
    match apply_to_suite(project, &codes, &dest) {
        Ok(applied) => {
            stats.applied += 1;
            typechecks(root)
                .map_err(|e| format!("{op:?}: applied but the project is broken: {e}"))?;
            let after = snapshot(root);
            let written = std::fs::read_to_string(root.join(&applied.path)).unwrap();
            for name in &applied.tests {
                if !written.contains(&format!("test fn {name}()")) {
                    return Err(format!(
                        "{op:?}: {name} missing from {}",
                        applied.path.display()
                    ));
                }
            }
            for (path, bytes) in &before {
                if path != &applied.path && after.get(path) != Some(bytes) {
                    return Err(format!("{op:?}: {} changed", path.display()));
                }
                if path == &applied.path && !after[path].starts_with(bytes) {
                    return Err(format!(
                        "{op:?}: existing content of {} not preserved",
                        path.display()
                    ));
                }
            }
        }
        Err(e) => {
            if matches!(e, forgespark_service::ApplyError::RolledBack(_)) {
                stats.rolled_back += 1;
            } else {
                stats.refused += 1;
            }
            if snapshot(root) != before {
                return Err(format!(
                    "{op:?}: failed with '{e}' but the filesystem changed"
                ));
            }
        }
    }
    Ok(())
}

/// `cases` sequences of `per_case` operations, each sequence on a fresh
/// project so that names accumulate within a sequence.
pub fn run(cases: u32, per_case: usize) -> Result<Stats, String> {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner =
        TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    let stats = std::cell::RefCell::new(Stats::default());
    let result = runner.run(&prop::collection::vec(op_strategy(), per_case), |ops| {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("calc.ml"), CALC).unwrap();
        let mut local = Stats::default();
        for (step, op) in ops.iter().enumerate() {
            apply_one(dir.path(), op, step, &mut local).map_err(TestCaseError::fail)?;
        }
        let mut s = stats.borrow_mut();
        s.operations += local.operations;
        s.applied += local.applied;
        s.refused += local.refused;
        s.rolled_back += local.rolled_back;
        Ok(())
    });
    result.map_err(|e| e.to_string())?;
    Ok(stats.into_inner())
}
