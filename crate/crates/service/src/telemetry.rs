//! Local usage events, appended to `.forgespark/telemetry.ndjson`.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use forgespark_core::unit::Technique;
use serde::{Deserialize, Serialize};

pub const TELEMETRY_FILE: &str = ".forgespark/telemetry.ndjson";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Data,
    Calls,
    Assertions,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum EventKind {
    GenerationStarted {
        technique: Technique,
        uut_kind: String,
    },
    GenerationFinished {
        technique: Technique,
        success: bool,
        duration_ms: u64,
        tests_count: usize,
    },
    TestModified {
        region: Region,
    },
    LlmFeedbackSent,
    TestsIntegrated {
        count: usize,
        technique: Technique,
    },
    TestRun {
        passed: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TelemetryEvent {
    pub timestamp: String,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// Event sink. Disabled sinks drop everything.
#[derive(Debug)]
pub struct Telemetry {
    path: Option<PathBuf>,
    pending: Mutex<Vec<TelemetryEvent>>,
}

impl Telemetry {
    pub fn new(project_root: &Path, enabled: bool) -> Self {
        Telemetry {
            path: enabled.then(|| project_root.join(TELEMETRY_FILE)),
            pending: Mutex::new(Vec::new()),
        }
    }

    pub fn disabled() -> Self {
        Telemetry {
            path: None,
            pending: Mutex::new(Vec::new()),
        }
    }

    /// Records an event and flushes.
    pub fn record(&self, kind: EventKind) {
        if self.path.is_none() {
            return;
        }
        let event = TelemetryEvent {
            timestamp: chrono::Utc::now().to_rfc3339(),
            kind,
        };
        self.pending.lock().expect("telemetry lock").push(event);
        self.flush();
    }

    /// Appends pending events in one write. Failures are logged and the
    /// events stay pending for the next flush.
    pub fn flush(&self) {
        let Some(path) = &self.path else { return };
        let mut pending = self.pending.lock().expect("telemetry lock");
        if pending.is_empty() {
            return;
        }
        let mut text = String::new();
        for e in pending.iter() {
            text.push_str(&serde_json::to_string(e).expect("serializable"));
            text.push('\n');
        }
        let result = path
            .parent()
            .map_or(Ok(()), std::fs::create_dir_all)
            .and_then(|()| {
                std::fs::OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(path)
            })
            .and_then(|mut f| f.write_all(text.as_bytes()));
        match result {
            Ok(()) => pending.clear(),
            Err(e) => tracing::warn!("telemetry write to {} failed: {e}", path.display()),
        }
    }
}

/// Reads back a telemetry log; unparsable lines are skipped.
pub fn read_log(project_root: &Path) -> Vec<TelemetryEvent> {
    std::fs::read_to_string(project_root.join(TELEMETRY_FILE))
        .unwrap_or_default()
        .lines()
        .filter_map(|l| serde_json::from_str(l).ok())
        .collect()
}

fn identifiers(line: &str) -> Vec<(String, bool)> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i] == '/' && chars.get(i + 1) == Some(&'/') {
            break;
        }
        if chars[i].is_ascii_alphabetic() || chars[i] == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            let mut j = i;
            while j < chars.len() && chars[j].is_whitespace() {
                j += 1;
            }
            out.push((word, chars.get(j) == Some(&'(')));
        } else if chars[i].is_ascii_digit() {
            while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                i += 1;
            }
        } else {
            i += 1;
        }
    }
    out
}

/// Bucket for one changed line: assertions first, then calls to project
/// functions, otherwise data.
pub fn classify_line(line: &str, functions: &BTreeSet<String>) -> Region {
    let ids = identifiers(line);
    if ids
        .iter()
        .any(|(w, _)| w == "assert" || w == "expect_error")
    {
        Region::Assertions
    } else if ids.iter().any(|(w, call)| *call && functions.contains(w)) {
        Region::Calls
    } else {
        Region::Data
    }
}

/// Lines present in only one of the two texts, by longest common
/// subsequence over trimmed non-blank lines.
pub fn changed_lines<'a>(old: &'a str, new: &'a str) -> Vec<&'a str> {
    let a: Vec<&str> = old
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect();
    let b: Vec<&str> = new
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect();
    let mut lcs = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in (0..a.len()).rev() {
        for j in (0..b.len()).rev() {
            lcs[i][j] = if a[i] == b[j] {
                lcs[i + 1][j + 1] + 1
            } else {
                lcs[i + 1][j].max(lcs[i][j + 1])
            };
        }
    }
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        if a[i] == b[j] {
            i += 1;
            j += 1;
        } else if lcs[i + 1][j] >= lcs[i][j + 1] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend(&a[i..]);
    out.extend(&b[j..]);
    out
}

/// Regions touched by an edit, one entry per bucket.
pub fn classify_modification(
    old: &str,
    new: &str,
    functions: &BTreeSet<String>,
) -> BTreeSet<Region> {
    changed_lines(old, new)
        .into_iter()
        .map(|l| classify_line(l, functions))
        .collect()
}
