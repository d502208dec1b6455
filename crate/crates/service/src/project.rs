//! Building a MiniLang project from the files on disk.

use std::path::{Component, Path, PathBuf};

use minilang::{parse_file, typecheck_project, TypedProgram};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SOURCE_EXTENSION: &str = "ml";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProjectError {
    #[error("cannot read project: {0}")]
    Io(String),
    #[error("project does not compile: {0}")]
    Compile(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFile {
    /// Relative to the project root.
    pub path: PathBuf,
    pub text: String,
}

#[derive(Debug, Clone)]
pub struct Project {
    pub root: PathBuf,
    /// Sorted by path.
    pub sources: Vec<SourceFile>,
    pub program: TypedProgram,
}

impl Project {
    /// Typechecks the given sources as one project.
    pub fn from_sources(root: &Path, sources: Vec<SourceFile>) -> Result<Project, ProjectError> {
        let mut files = Vec::new();
        let mut errors = Vec::new();
        for s in &sources {
            match parse_file(&s.text, &s.path) {
                Ok(p) => files.push(p),
                Err(e) => errors.push(format!("{}: {e}", s.path.display())),
            }
        }
        if !errors.is_empty() {
            return Err(ProjectError::Compile(errors.join("; ")));
        }
        let program = typecheck_project(files).map_err(|errs| {
            ProjectError::Compile(
                errs.iter()
                    .map(ToString::to_string)
                    .collect::<Vec<_>>()
                    .join("; "),
            )
        })?;
        Ok(Project {
            root: root.to_path_buf(),
            sources,
            program,
        })
    }
}

/// Every `.ml` file below `root`, skipping hidden directories.
pub fn source_files(root: &Path) -> Result<Vec<PathBuf>, ProjectError> {
    let mut out = Vec::new();
    let walker = walkdir::WalkDir::new(root).into_iter().filter_entry(|e| {
        e.depth() == 0 || !e.file_name().to_str().is_some_and(|n| n.starts_with('.'))
    });
    for entry in walker {
        let entry = entry.map_err(|e| ProjectError::Io(e.to_string()))?;
        let path = entry.path();
        if entry.file_type().is_file() && path.extension().is_some_and(|x| x == SOURCE_EXTENSION) {
            out.push(path.strip_prefix(root).expect("below root").to_path_buf());
        }
    }
    out.sort();
    Ok(out)
}

/// Parses and typechecks every source file of the project.
pub fn load_project(root: &Path) -> Result<Project, ProjectError> {
    if !root.is_dir() {
        return Err(ProjectError::Io(format!(
            "'{}' is not a directory",
            root.display()
        )));
    }
    let mut sources = Vec::new();
    for path in source_files(root)? {
        let text = std::fs::read_to_string(root.join(&path))
            .map_err(|e| ProjectError::Io(format!("{}: {e}", path.display())))?;
        sources.push(SourceFile { path, text });
    }
    Project::from_sources(root, sources)
}

/// A project-relative path, or `None` when `path` leaves the project.
pub fn relative_path(root: &Path, path: &Path) -> Option<PathBuf> {
    let rel = if path.is_absolute() {
        path.strip_prefix(root).ok()?
    } else {
        path
    };
    let mut out = PathBuf::new();
    for c in rel.components() {
        match c {
            Component::Normal(part) => out.push(part),
            Component::CurDir => {}
            _ => return None,
        }
    }
    (!out.as_os_str().is_empty()).then_some(out)
}
