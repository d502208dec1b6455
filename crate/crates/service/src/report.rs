//! The JSON report written by headless generation.

use std::collections::BTreeMap;

use forgespark_core::coverage::{MutantResult, Totals};
use forgespark_core::unit::{Technique, Uut};
use minilang::Line;
use serde::{Deserialize, Serialize};

use crate::session::{EntryStatus, GenerationSummary, Session};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTest {
    pub id: String,
    pub name: String,
    pub code: String,
    pub origin: Technique,
    /// `passing`, `failing` or `not_run`.
    pub status: String,
    pub error: Option<String>,
    pub covered_lines: Vec<Line>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportLine {
    pub covering_tests: Vec<String>,
    pub mutants: Vec<MutantResult>,
}

/// `timestamp` is the only field that differs between reproducible runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: u32,
    pub timestamp: String,
    pub uut: Uut,
    pub technique: Technique,
    pub summary: Option<GenerationSummary>,
    pub mutation_ran: bool,
    pub tests: Vec<ReportTest>,
    pub lines: BTreeMap<Line, ReportLine>,
    pub totals: Totals,
}

impl Report {
    /// Report for a Ready session, covering all of its tests.
    pub fn from_session(session: &Session) -> Option<Report> {
        let coverage = session.coverage.as_ref().filter(|_| session.is_ready())?;
        let tests = session
            .tests
            .iter()
            .map(|t| {
                let (status, error) = match &t.status {
                    EntryStatus::NotRun => ("not_run", None),
                    EntryStatus::Passing => ("passing", None),
                    EntryStatus::Failing(e) => ("failing", Some(e.clone())),
                };
                ReportTest {
                    id: t.id.clone(),
                    name: t.name.clone(),
                    code: t.current_code.clone(),
                    origin: t.origin,
                    status: status.to_string(),
                    error,
                    covered_lines: coverage
                        .test(&t.id)
                        .map(|r| r.covered_lines.iter().copied().collect())
                        .unwrap_or_default(),
                }
            })
            .collect();
        let lines = session
            .lines()
            .ok()?
            .into_iter()
            .map(|(line, view)| {
                (
                    line,
                    ReportLine {
                        covering_tests: view.covering_tests,
                        mutants: view.mutants,
                    },
                )
            })
            .collect();
        Some(Report {
            schema: SCHEMA_VERSION,
            timestamp: chrono::Utc::now().to_rfc3339(),
            uut: session.uut.clone(),
            technique: session.technique,
            summary: session.summary.clone(),
            mutation_ran: coverage.mutation_ran,
            tests,
            lines,
            totals: coverage.totals_all(),
        })
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("serializable");
        text.push('\n');
        text
    }
}
