use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ast::Line;

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("parse error at line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: Line,
    pub column: u32,
    pub message: String,
}

impl ParseError {
    pub fn new(line: Line, column: u32, message: impl Into<String>) -> Self {
        ParseError {
            line,
            column,
            message: message.into(),
        }
    }
}

/// A type error. The `Display` text is embedded verbatim in repair prompts,
/// so the message wording is stable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeError {
    /// Source file as written in the program; empty for in-memory fragments.
    pub file: String,
    pub line: Line,
    pub message: String,
}

impl TypeError {
    pub fn new(file: impl Into<String>, line: Line, message: impl Into<String>) -> Self {
        TypeError {
            file: file.into(),
            line,
            message: message.into(),
        }
    }
}

impl fmt::Display for TypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.file.is_empty() {
            write!(f, "line {}: {}", self.line, self.message)
        } else {
            write!(f, "{}:{}: {}", self.file, self.line, self.message)
        }
    }
}

impl std::error::Error for TypeError {}

/// Either stage of "does this compile": parsing or type checking.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("{}", join_errors(.0))]
    Type(Vec<TypeError>),
}

impl CompileError {
    /// One human-readable line per underlying error.
    pub fn messages(&self) -> Vec<String> {
        match self {
            CompileError::Parse(e) => vec![e.to_string()],
            CompileError::Type(errs) => errs.iter().map(ToString::to_string).collect(),
        }
    }
}

fn join_errors(errs: &[TypeError]) -> String {
    errs.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("\n")
}
