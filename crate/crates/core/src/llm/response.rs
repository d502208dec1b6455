//! Extraction of test candidates from model replies and per-candidate
//! compile checking.

use std::collections::{BTreeMap, BTreeSet};

use minilang::ast::{walk_stmt_exprs_mut, Block, ExprKind, StmtKind};
use minilang::{parse_file, render, Program, Type, TypedProgram};
use serde::{Deserialize, Serialize};

use super::LlmError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", content = "errors", rename_all = "snake_case")]
pub enum CompileStatus {
    Unchecked,
    Compiles,
    Fails(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCandidate {
    pub name: String,
    /// One test declaration plus the helpers it references.
    pub code: String,
    pub compile_status: CompileStatus,
}

impl TestCandidate {
    pub fn compiles(&self) -> bool {
        self.compile_status == CompileStatus::Compiles
    }

    pub fn errors(&self) -> &[String] {
        match &self.compile_status {
            CompileStatus::Fails(e) => e,
            _ => &[],
        }
    }

    /// Whitespace-insensitive identity used for deduplication.
    pub fn normalized_code(&self) -> String {
        normalize(&self.code)
    }
}

pub fn normalize(code: &str) -> String {
    code.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedResponse {
    pub candidates: Vec<TestCandidate>,
    /// Top-level items that did not parse, verbatim.
    pub skipped: Vec<String>,
}

/// Contents of all fenced code blocks, or the whole text if there are none.
pub fn extract_code(text: &str) -> String {
    let mut blocks: Vec<String> = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in text.lines() {
        if line.trim_start().starts_with("```") {
            match current.take() {
                Some(body) => blocks.push(body.join("\n")),
                None => current = Some(Vec::new()),
            }
        } else if let Some(body) = current.as_mut() {
            body.push(line);
        }
    }
    if let Some(body) = current {
        blocks.push(body.join("\n"));
    }
    if blocks.is_empty() {
        text.to_string()
    } else {
        blocks.join("\n")
    }
}

fn brace_delta(line: &str) -> i64 {
    let code = line.split("//").next().unwrap_or("");
    code.chars()
        .map(|c| {
            if c == '{' {
                1
            } else if c == '}' {
                -1
            } else {
                0
            }
        })
        .sum()
}

fn starts_item(line: &str) -> bool {
    let t = line.trim_start();
    t.starts_with("fn ") || t.starts_with("test ") || t.starts_with("record ")
}

/// Splits code into top-level items by brace matching; text between items
/// is dropped.
fn split_items(code: &str) -> Vec<String> {
    let mut items = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    let mut depth = 0i64;
    let mut opened = false;
    for line in code.lines() {
        if current.is_empty() {
            if !starts_item(line) {
                continue;
            }
            depth = 0;
            opened = false;
        } else if depth <= 0 && starts_item(line) {
            // previous item never balanced; start over here
            items.push(current.join("\n"));
            current.clear();
            depth = 0;
            opened = false;
        }
        current.push(line);
        depth += brace_delta(line);
        opened |= line.contains('{');
        if opened && depth <= 0 {
            items.push(current.join("\n"));
            current.clear();
        }
    }
    if !current.is_empty() {
        items.push(current.join("\n"));
    }
    items
}

fn mentions(code: &str, name: &str) -> bool {
    code.match_indices(name).any(|(i, _)| {
        let before = code[..i].chars().next_back();
        let after = code[i + name.len()..].chars().next();
        let ident = |c: Option<char>| c.is_some_and(|c| c.is_alphanumeric() || c == '_');
        !ident(before) && !ident(after)
    })
}

pub fn parse_response(text: &str) -> Result<ParsedResponse, LlmError> {
    let code = extract_code(text);
    let mut tests: Vec<(String, String)> = Vec::new();
    let mut helpers: Vec<(String, String)> = Vec::new();
    let mut skipped = Vec::new();
    for item in split_items(&code) {
        match minilang::parse(&item) {
            Ok(p) => {
                for r in &p.records {
                    helpers.push((r.name.clone(), item.clone()));
                }
                for f in &p.functions {
                    helpers.push((f.name.clone(), item.clone()));
                }
                for t in &p.tests {
                    tests.push((t.name.clone(), item.clone()));
                }
            }
            Err(_) => skipped.push(item),
        }
    }
    if tests.is_empty() {
        return Err(LlmError::EmptyResponse);
    }
    let candidates = tests
        .into_iter()
        .map(|(name, test_code)| {
            // helpers referenced directly or through other helpers
            let mut used: BTreeSet<usize> = BTreeSet::new();
            let mut frontier = vec![test_code.clone()];
            while let Some(text) = frontier.pop() {
                for (k, (hname, hcode)) in helpers.iter().enumerate() {
                    if !used.contains(&k) && mentions(&text, hname) {
                        used.insert(k);
                        frontier.push(hcode.clone());
                    }
                }
            }
            let mut parts: Vec<&str> = used.iter().map(|&k| helpers[k].1.as_str()).collect();
            parts.push(&test_code);
            TestCandidate {
                name,
                code: parts.join("\n\n") + "\n",
                compile_status: CompileStatus::Unchecked,
            }
        })
        .collect();
    Ok(ParsedResponse {
        candidates,
        skipped,
    })
}

fn rename_type(ty: &mut Type, map: &BTreeMap<String, String>) {
    if let Type::Record(name) = ty {
        if let Some(n) = map.get(name) {
            *name = n.clone();
        }
    }
}

fn rename_block(block: &mut Block, map: &BTreeMap<String, String>) {
    for stmt in &mut block.stmts {
        walk_stmt_exprs_mut(stmt, &mut |e| match &mut e.kind {
            ExprKind::Call(name, _) | ExprKind::Record { name, .. } => {
                if let Some(n) = map.get(name) {
                    *name = n.clone();
                }
            }
            _ => {}
        });
        match &mut stmt.kind {
            StmtKind::Let { ty, .. } => rename_type(ty, map),
            StmtKind::If {
                then_block,
                else_block,
                ..
            } => {
                rename_block(then_block, map);
                if let Some(b) = else_block {
                    rename_block(b, map);
                }
            }
            StmtKind::While { body, .. } => rename_block(body, map),
            _ => {}
        }
    }
}

/// Renames declarations in `file` that clash with names in `taken`, giving
/// them the first free numeric suffix, and rewrites references.
pub fn rename_collisions(file: &mut Program, taken: &BTreeSet<String>) -> BTreeMap<String, String> {
    let own: BTreeSet<String> = file.top_level_names().map(str::to_string).collect();
    let mut used: BTreeSet<String> = taken.union(&own).cloned().collect();
    let mut map = BTreeMap::new();
    for name in &own {
        if !taken.contains(name) {
            continue;
        }
        let fresh = (2..)
            .map(|k| format!("{name}_{k}"))
            .find(|n| !used.contains(n))
            .expect("unbounded");
        used.insert(fresh.clone());
        map.insert(name.clone(), fresh);
    }
    apply_renames(file, &map);
    map
}

/// Renames declarations per `map` and rewrites every reference to them.
pub fn apply_renames(file: &mut Program, map: &BTreeMap<String, String>) {
    if map.is_empty() {
        return;
    }
    let get = |n: &mut String| {
        if let Some(new) = map.get(n) {
            *n = new.clone();
        }
    };
    for r in &mut file.records {
        get(&mut r.name);
        if let Some(p) = &mut r.extends {
            get(p);
        }
        for f in &mut r.fields {
            rename_type(&mut f.ty, map);
        }
    }
    for f in &mut file.functions {
        get(&mut f.name);
        for p in &mut f.params {
            rename_type(&mut p.ty, map);
        }
        rename_type(&mut f.return_type, map);
        rename_block(&mut f.body, map);
    }
    for t in &mut file.tests {
        get(&mut t.name);
        rename_block(&mut t.body, map);
    }
}

pub fn project_names(program: &TypedProgram) -> BTreeSet<String> {
    let mut names: BTreeSet<String> = BTreeSet::from(["len".to_string()]);
    for file in program.files() {
        names.extend(file.top_level_names().map(str::to_string));
    }
    names
}

/// Appends the candidate to the project under a fresh file and
/// re-typechecks. On success the candidate's code and name reflect any
/// renaming, and the extended project is returned alongside.
pub fn check_candidate_in(
    program: &TypedProgram,
    candidate: &TestCandidate,
) -> (TestCandidate, Option<TypedProgram>) {
    let mut out = candidate.clone();
    let path = format!("generated/{}.ml", candidate.name);
    let mut file = match parse_file(&candidate.code, path) {
        Ok(f) => f,
        Err(e) => {
            out.compile_status = CompileStatus::Fails(vec![e.to_string()]);
            return (out, None);
        }
    };
    if file.tests.len() != 1 {
        out.compile_status = CompileStatus::Fails(vec![format!(
            "expected exactly one test, found {}",
            file.tests.len()
        )]);
        return (out, None);
    }
    rename_collisions(&mut file, &project_names(program));
    let code = render(&file);
    let name = file.tests[0].name.clone();
    match program.extend(file) {
        Ok((extended, _)) => {
            out.name = name;
            out.code = code;
            out.compile_status = CompileStatus::Compiles;
            (out, Some(extended))
        }
        Err(errors) => {
            out.compile_status =
                CompileStatus::Fails(errors.iter().map(ToString::to_string).collect());
            (out, None)
        }
    }
}

pub fn check_candidate(program: &TypedProgram, candidate: &TestCandidate) -> TestCandidate {
    check_candidate_in(program, candidate).0
}
