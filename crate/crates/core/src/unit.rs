//! Units under test and generation techniques.

use std::fmt;
use std::path::PathBuf;

use minilang::{FunctionDecl, Line, TypedProgram};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Technique {
    Sbst,
    Llm,
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Technique::Sbst => "sbst",
            Technique::Llm => "llm",
        })
    }
}

impl std::str::FromStr for Technique {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sbst" => Ok(Technique::Sbst),
            "llm" => Ok(Technique::Llm),
            other => Err(format!(
                "unknown technique '{other}' (expected sbst or llm)"
            )),
        }
    }
}

/// File paths are relative to the project root.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Uut {
    File {
        file: PathBuf,
    },
    Function {
        file: PathBuf,
        function: String,
    },
    Line {
        file: PathBuf,
        line: Line,
        /// When set, the line must belong to this function.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        function: Option<String>,
    },
}

impl Uut {
    pub fn kind(&self) -> &'static str {
        match self {
            Uut::File { .. } => "file",
            Uut::Function { .. } => "function",
            Uut::Line { .. } => "line",
        }
    }

    pub fn file(&self) -> &PathBuf {
        match self {
            Uut::File { file } | Uut::Function { file, .. } | Uut::Line { file, .. } => file,
        }
    }
}

impl fmt::Display for Uut {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Uut::File { file } => write!(f, "{}", file.display()),
            Uut::Function { file, function } => write!(f, "{}::{function}", file.display()),
            Uut::Line { file, line, .. } => write!(f, "{}:{line}", file.display()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UutError {
    #[error("file '{0}' is not part of the project")]
    UnknownFile(String),
    #[error("unknown function '{0}'")]
    UnknownFunction(String),
    #[error("line not in unit")]
    LineNotInUnit,
}

/// A unit resolved against a typechecked project.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedUut {
    pub file: minilang::FileId,
    /// Functions under test, in declaration order.
    pub functions: Vec<String>,
    pub line: Option<Line>,
}

impl Uut {
    pub fn resolve(&self, program: &TypedProgram) -> Result<ResolvedUut, UutError> {
        let file_id = program
            .find_file(self.file())
            .ok_or_else(|| UutError::UnknownFile(self.file().display().to_string()))?;
        let decls: &[FunctionDecl] = &program.file(file_id).functions;
        match self {
            Uut::File { .. } => Ok(ResolvedUut {
                file: file_id,
                functions: decls.iter().map(|f| f.name.clone()).collect(),
                line: None,
            }),
            Uut::Function { function, .. } => {
                if !decls.iter().any(|f| &f.name == function) {
                    return Err(UutError::UnknownFunction(function.clone()));
                }
                Ok(ResolvedUut {
                    file: file_id,
                    functions: vec![function.clone()],
                    line: None,
                })
            }
            Uut::Line { line, function, .. } => {
                if let Some(name) = function {
                    if !decls.iter().any(|f| &f.name == name) {
                        return Err(UutError::UnknownFunction(name.clone()));
                    }
                }
                let f = decls
                    .iter()
                    .filter(|f| function.as_ref().is_none_or(|n| &f.name == n))
                    .find(|f| minilang::ast::statement_lines(&f.body).contains(line))
                    .ok_or(UutError::LineNotInUnit)?;
                Ok(ResolvedUut {
                    file: file_id,
                    functions: vec![f.name.clone()],
                    line: Some(*line),
                })
            }
        }
    }
}
