//! Integrating selected tests into project files, with rollback when the
//! project no longer typechecks.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use forgespark_core::llm::response::{apply_renames, project_names, rename_collisions};
use minilang::render::render_record;
use minilang::{parse_file, render, render_function, Program, TypedProgram};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::project::{load_project, relative_path, Project, SOURCE_EXTENSION};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ApplyDestination {
    NewFile {
        directory: PathBuf,
        class_name: String,
    },
    ExistingFile {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ApplyError {
    #[error("no tests selected")]
    EmptySelection,
    #[error("test {index} does not compile: {message}")]
    DoesNotCompile { index: usize, message: String },
    #[error("'{0}' is not a valid file name")]
    InvalidName(String),
    #[error("destination '{0}' is outside the project")]
    OutsideProject(String),
    #[error("'{0}' already exists")]
    AlreadyExists(String),
    #[error("'{0}' is not a MiniLang file of the project")]
    NotInProject(String),
    #[error("cannot write '{path}': {message}")]
    Unwritable { path: String, message: String },
    #[error("integration rolled back: {0}")]
    RolledBack(String),
}

#[derive(Debug, Clone)]
pub struct Applied {
    /// Written file, relative to the project root.
    pub path: PathBuf,
    /// Final names of the integrated tests, in selection order.
    pub tests: Vec<String>,
    /// The project as re-loaded after the write.
    pub project: Project,
}

fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    chars
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !minilang::lexer::is_keyword(name)
}

enum Helper<'a> {
    Record(&'a minilang::RecordDecl),
    Function(&'a minilang::FunctionDecl),
}

/// Rendering with the declaration's own name masked, so structurally
/// identical helpers compare equal whatever they are called.
fn helper_key(helper: Helper<'_>) -> String {
    let mut p = Program::empty("");
    let name = match helper {
        Helper::Record(r) => {
            p.records.push(r.clone());
            r.name.clone()
        }
        Helper::Function(f) => {
            p.functions.push(f.clone());
            f.name.clone()
        }
    };
    apply_renames(&mut p, &BTreeMap::from([(name, "_".to_string())]));
    match (p.records.first(), p.functions.first()) {
        (Some(r), _) => render_record(r),
        (_, Some(f)) => render_function(f),
        _ => unreachable!(),
    }
}

fn fresh_name(name: &str, taken: &BTreeSet<String>) -> String {
    (2..)
        .map(|k| format!("{name}_{k}"))
        .find(|n| !taken.contains(n))
        .expect("unbounded")
}

/// Combines the tests into one program that can be added to `program`:
/// helpers identical to a project declaration or to an earlier helper are
/// dropped, every other clash is renamed with a numeric suffix.
pub fn merge_tests(program: &TypedProgram, codes: &[Program]) -> Program {
    let mut taken = project_names(program);
    let mut known: BTreeMap<String, String> = BTreeMap::new();
    for file in program.files() {
        for r in &file.records {
            known
                .entry(helper_key(Helper::Record(r)))
                .or_insert_with(|| r.name.clone());
        }
        for f in &file.functions {
            known
                .entry(helper_key(Helper::Function(f)))
                .or_insert_with(|| f.name.clone());
        }
    }
    let mut merged = Program::empty("");
    for code in codes {
        let mut file = code.clone();
        let mut renames: BTreeMap<String, String> = BTreeMap::new();
        let mut drop_records = BTreeSet::new();
        let mut drop_functions = BTreeSet::new();
        for i in 0..file.records.len() + file.functions.len() {
            let mut probe = file.clone();
            apply_renames(&mut probe, &renames);
            let (key, name) = if i < file.records.len() {
                (
                    helper_key(Helper::Record(&probe.records[i])),
                    file.records[i].name.clone(),
                )
            } else {
                let f = &probe.functions[i - file.records.len()];
                (
                    helper_key(Helper::Function(f)),
                    file.functions[i - file.records.len()].name.clone(),
                )
            };
            if let Some(existing) = known.get(&key) {
                if i < file.records.len() {
                    drop_records.insert(i);
                } else {
                    drop_functions.insert(i - file.records.len());
                }
                if existing != &name {
                    renames.insert(name, existing.clone());
                }
                continue;
            }
            let target = if taken.contains(&name) {
                fresh_name(&name, &taken)
            } else {
                name.clone()
            };
            taken.insert(target.clone());
            known.insert(key, target.clone());
            if target != name {
                renames.insert(name, target);
            }
        }
        for t in &file.tests {
            if taken.contains(&t.name) {
                let fresh = fresh_name(&t.name, &taken);
                taken.insert(fresh.clone());
                renames.insert(t.name.clone(), fresh);
            } else {
                taken.insert(t.name.clone());
            }
        }
        let mut i = 0;
        file.records.retain(|_| {
            i += 1;
            !drop_records.contains(&(i - 1))
        });
        let mut i = 0;
        file.functions.retain(|_| {
            i += 1;
            !drop_functions.contains(&(i - 1))
        });
        apply_renames(&mut file, &renames);
        merged.records.extend(file.records);
        merged.functions.extend(file.functions);
        merged.tests.extend(file.tests);
    }
    merged
}

struct Target {
    rel: PathBuf,
    original: Option<Vec<u8>>,
    created_dirs: Vec<PathBuf>,
}

fn write_atomically(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension(format!("{SOURCE_EXTENSION}.forgespark-tmp"));
    std::fs::write(&tmp, bytes)
        .and_then(|()| std::fs::rename(&tmp, path))
        .inspect_err(|_| {
            let _ = std::fs::remove_file(&tmp);
        })
}

fn rollback(root: &Path, target: &Target) {
    let path = root.join(&target.rel);
    match &target.original {
        Some(bytes) => {
            if let Err(e) = write_atomically(&path, bytes) {
                tracing::error!("rollback of {} failed: {e}", path.display());
            }
        }
        None => {
            let _ = std::fs::remove_file(&path);
            for dir in target.created_dirs.iter().rev() {
                let _ = std::fs::remove_dir(dir);
            }
        }
    }
}

/// Writes the tests (each one `test fn` plus its helpers) to the
/// destination and verifies that the whole project still typechecks.
/// On any failure after writing, the filesystem is restored.
pub fn apply_to_suite(
    project: &Project,
    codes: &[String],
    destination: &ApplyDestination,
) -> Result<Applied, ApplyError> {
    if codes.is_empty() {
        return Err(ApplyError::EmptySelection);
    }
    let mut parsed = Vec::new();
    for (index, code) in codes.iter().enumerate() {
        let failure = |message: String| ApplyError::DoesNotCompile { index, message };
        let file = parse_file(code, format!("apply/{index}.{SOURCE_EXTENSION}"))
            .map_err(|e| failure(e.to_string()))?;
        if file.tests.len() != 1 {
            return Err(failure(format!(
                "expected exactly one test, found {}",
                file.tests.len()
            )));
        }
        let mut probe = file.clone();
        rename_collisions(&mut probe, &project_names(&project.program));
        project.program.extend(probe).map_err(|errs| {
            failure(
                errs.iter()
                    .map(ToString::to_string)
                    .collect::<Vec<_>>()
                    .join("; "),
            )
        })?;
        parsed.push(file);
    }
    let root = &project.root;
    let target = match destination {
        ApplyDestination::NewFile {
            directory,
            class_name,
        } => {
            if !is_identifier(class_name) {
                return Err(ApplyError::InvalidName(class_name.clone()));
            }
            let dir = if directory.as_os_str().is_empty() || directory == Path::new(".") {
                PathBuf::new()
            } else {
                relative_path(root, directory)
                    .ok_or_else(|| ApplyError::OutsideProject(directory.display().to_string()))?
            };
            if dir
                .components()
                .any(|c| c.as_os_str().to_string_lossy().starts_with('.'))
            {
                return Err(ApplyError::OutsideProject(dir.display().to_string()));
            }
            let rel = dir.join(format!("{class_name}.{SOURCE_EXTENSION}"));
            if root.join(&rel).exists() {
                return Err(ApplyError::AlreadyExists(rel.display().to_string()));
            }
            Target {
                rel,
                original: None,
                created_dirs: Vec::new(),
            }
        }
        ApplyDestination::ExistingFile { path } => {
            let rel = relative_path(root, path)
                .ok_or_else(|| ApplyError::OutsideProject(path.display().to_string()))?;
            if project.program.find_file(&rel).is_none() {
                return Err(ApplyError::NotInProject(rel.display().to_string()));
            }
            let bytes = std::fs::read(root.join(&rel)).map_err(|e| ApplyError::Unwritable {
                path: rel.display().to_string(),
                message: e.to_string(),
            })?;
            Target {
                rel,
                original: Some(bytes),
                created_dirs: Vec::new(),
            }
        }
    };
    let merged = merge_tests(&project.program, &parsed);
    let names: Vec<String> = merged.tests.iter().map(|t| t.name.clone()).collect();
    let rendered = render(&merged);
    let bytes = match &target.original {
        None => rendered.into_bytes(),
        Some(original) => {
            let mut out = original.clone();
            if !out.is_empty() && !out.ends_with(b"\n") {
                out.push(b'\n');
            }
            if !out.is_empty() {
                out.push(b'\n');
            }
            out.extend(rendered.as_bytes());
            out
        }
    };
    let mut target = target;
    let path = root.join(&target.rel);
    let unwritable = |e: std::io::Error| ApplyError::Unwritable {
        path: target.rel.display().to_string(),
        message: e.to_string(),
    };
    if target.original.is_none() {
        let mut missing = Vec::new();
        let mut dir = path.parent();
        while let Some(d) = dir {
            if d.exists() {
                break;
            }
            missing.push(d.to_path_buf());
            dir = d.parent();
        }
        missing.reverse();
        for d in &missing {
            if let Err(e) = std::fs::create_dir(d) {
                target.created_dirs =
                    missing[..missing.iter().position(|m| m == d).unwrap_or(0)].to_vec();
                rollback(root, &target);
                return Err(unwritable(e));
            }
        }
        target.created_dirs = missing;
    }
    if let Err(e) = write_atomically(&path, &bytes) {
        let err = unwritable(e);
        rollback(root, &target);
        return Err(err);
    }
    let verified = load_project(root).and_then(|p| {
        if p.program.find_file(&target.rel).is_some() {
            Ok(p)
        } else {
            Err(crate::project::ProjectError::Io(format!(
                "'{}' is not picked up as a source file",
                target.rel.display()
            )))
        }
    });
    match verified {
        Ok(project) => Ok(Applied {
            path: target.rel,
            tests: names,
            project,
        }),
        Err(e) => {
            rollback(root, &target);
            Err(ApplyError::RolledBack(e.to_string()))
        }
    }
}
