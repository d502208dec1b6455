//! Generation sessions: build, generate, run coverage, then let the user
//! review, edit, rerun and integrate the generated tests.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use forgespark_core::coverage::{
    mutants_for, run_mutation, run_one, with_test, CoverageError, CoverageReport, CoverageScope,
    MutantResult, MutationStrategy, SuiteTest, TestResult, Totals,
};
use forgespark_core::llm::response::check_candidate_in;
use forgespark_core::llm::{
    modification_request, repair_loop, ChatProvider, LlmError, OpenAiConfig, OpenAiProvider,
    PromptDepths, PromptRequest, PromptTemplate, RepairLoopConfig, ScriptedProvider, Terminal,
};
use forgespark_core::sbst::{run_search_observed, SearchConfig, SearchMode};
use forgespark_core::unit::{ResolvedUut, Technique, Uut};
use minilang::{parse_file, render_test, Line, Mutant};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::apply::{apply_to_suite, Applied, ApplyDestination, ApplyError};
use crate::config::ForgeConfig;
use crate::project::{load_project, Project, SourceFile};
use crate::telemetry::{classify_modification, EventKind, Telemetry};

pub const SESSIONS_DIR: &str = ".forgespark/sessions";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    /// The project does not build.
    Project,
    /// The unit descriptor does not resolve.
    Unit,
    Generation,
    /// No test could be produced; a smaller unit may work.
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum Phase {
    Building,
    Generating,
    Ready,
    Error { kind: FailureKind, message: String },
}

impl Phase {
    fn rank(&self) -> u8 {
        match self {
            Phase::Building => 0,
            Phase::Generating => 1,
            Phase::Ready | Phase::Error { .. } => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Phase::Building => "building",
            Phase::Generating => "generating",
            Phase::Ready => "ready",
            Phase::Error { .. } => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", content = "error", rename_all = "snake_case")]
pub enum EntryStatus {
    NotRun,
    Passing,
    Failing(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Liked {
    Liked,
    Disliked,
    Neutral,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestEntry {
    pub id: String,
    pub name: String,
    pub origin: Technique,
    pub initial_code: String,
    pub last_run_code: Option<String>,
    pub current_code: String,
    /// The initial code followed by every version returned for feedback.
    pub llm_versions: Vec<String>,
    pub active_version: usize,
    pub status: EntryStatus,
    pub selected: bool,
    pub liked: Liked,
}

impl TestEntry {
    fn new(id: String, origin: Technique, code: String, status: EntryStatus) -> Self {
        TestEntry {
            name: test_name(&code).unwrap_or_else(|| id.clone()),
            id,
            origin,
            initial_code: code.clone(),
            last_run_code: None,
            current_code: code.clone(),
            llm_versions: vec![code],
            active_version: 0,
            status,
            selected: true,
            liked: Liked::Neutral,
        }
    }
}

fn test_name(code: &str) -> Option<String> {
    parse_file(code, "")
        .ok()
        .and_then(|p| p.tests.first().map(|t| t.name.clone()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbstFunctionSummary {
    pub function: String,
    pub goals: usize,
    pub covered_goals: usize,
    pub evaluations: u64,
    pub target_covered: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmFunctionSummary {
    pub function: String,
    pub saved: usize,
    pub iterations_used: u32,
    pub terminal: Option<Terminal>,
    pub final_depths: Option<PromptDepths>,
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "technique", rename_all = "lowercase")]
pub enum GenerationSummary {
    Sbst {
        seed: u64,
        functions: Vec<SbstFunctionSummary>,
    },
    Llm {
        functions: Vec<LlmFunctionSummary>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProgressInfo {
    pub message: String,
    /// In `[0, 1]` when known.
    pub fraction: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResetTarget {
    Initial,
    LastRun,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BulkAction {
    SelectAll,
    UnselectAll,
    DeleteAll,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("unknown session '{0}'")]
    UnknownSession(String),
    #[error("unknown test '{0}'")]
    UnknownTest(String),
    #[error("session is {0}, not ready")]
    WrongPhase(&'static str),
    #[error("the test has not been run yet")]
    NoPriorRun,
    #[error("no version {0}")]
    UnknownVersion(usize),
    #[error("{0}")]
    InvalidRequest(String),
    #[error("{0}")]
    Llm(String),
    #[error(transparent)]
    Apply(#[from] ApplyError),
    #[error("{0}")]
    Project(String),
}

impl SessionError {
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::UnknownSession(_) | SessionError::UnknownTest(_) => "not_found",
            SessionError::WrongPhase(_) => "wrong_phase",
            SessionError::NoPriorRun
            | SessionError::UnknownVersion(_)
            | SessionError::InvalidRequest(_) => "bad_request",
            SessionError::Llm(_) => "llm_error",
            SessionError::Apply(_) => "apply_failed",
            SessionError::Project(_) => "project_error",
        }
    }
}

/// State that is rebuilt rather than persisted.
#[derive(Default)]
struct Runtime {
    project: Option<Project>,
    mutants: Vec<Mutant>,
    provider: Option<Box<dyn ChatProvider>>,
}

#[derive(Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub root: PathBuf,
    pub uut: Uut,
    pub technique: Technique,
    pub config: ForgeConfig,
    pub phase: Phase,
    pub progress: ProgressInfo,
    pub summary: Option<GenerationSummary>,
    pub tests: Vec<TestEntry>,
    pub coverage: Option<CoverageReport>,
    /// The project files the session was generated against.
    pub sources: Vec<SourceFile>,
    #[serde(skip)]
    runtime: Runtime,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("id", &self.id)
            .field("uut", &self.uut)
            .field("technique", &self.technique)
            .field("phase", &self.phase)
            .field("tests", &self.tests.len())
            .finish()
    }
}

fn now_seed() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_nanos() as u64)
}

pub fn make_provider(root: &Path, config: &ForgeConfig) -> Result<Box<dyn ChatProvider>, String> {
    match config.llm.provider.as_str() {
        "scripted" => {
            let dir = config
                .llm
                .scripted_dir
                .as_ref()
                .ok_or("the scripted provider needs llm.scripted_dir")?;
            Ok(Box::new(ScriptedProvider::new(ForgeConfig::project_path(
                root, dir,
            ))))
        }
        "openai" => Ok(Box::new(OpenAiProvider::new(OpenAiConfig {
            base_url: config.llm.base_url.clone(),
            model: config.llm.model.clone(),
            temperature: config.llm.temperature,
            token: config.token(),
            timeout_secs: config.llm.timeout_secs,
        }))),
        other => Err(format!(
            "unknown llm provider '{other}' (expected openai or scripted)"
        )),
    }
}

fn prompt_template(root: &Path, config: &ForgeConfig) -> Result<PromptTemplate, String> {
    let mut template = PromptTemplate::default();
    if let Some(path) = &config.llm.prompt_template_path {
        let path = ForgeConfig::project_path(root, path);
        template.user = std::fs::read_to_string(&path)
            .map_err(|e| format!("cannot read prompt template {}: {e}", path.display()))?;
    }
    Ok(template)
}

fn repair_config(config: &ForgeConfig) -> RepairLoopConfig {
    RepairLoopConfig {
        max_iterations: config.llm.max_iterations,
        token_budget: config.llm.token_budget,
        temperature: config.llm.temperature,
        model: config.llm.model.clone(),
    }
}

type Failure = (FailureKind, String);

struct Generated {
    codes: Vec<String>,
    summary: GenerationSummary,
    provider: Option<Box<dyn ChatProvider>>,
}

fn generate_sbst(
    project: &Project,
    resolved: &ResolvedUut,
    config: &ForgeConfig,
    progress: &mut dyn FnMut(ProgressInfo),
) -> Result<Generated, Failure> {
    let seed = config.sbst.seed.unwrap_or_else(now_seed);
    let mut codes = Vec::new();
    let mut functions = Vec::new();
    let total = resolved.functions.len().max(1) as f64;
    for (i, f) in resolved.functions.iter().enumerate() {
        let search = SearchConfig {
            population_size: config.sbst.population,
            max_evaluations: config.sbst.max_evaluations,
            rng_seed: seed,
            mode: resolved
                .line
                .map_or(SearchMode::FullUnit, SearchMode::SingleLine),
            step_budget: config.runtime.step_budget,
            ..SearchConfig::default()
        };
        let max = config.sbst.max_evaluations.max(1) as f64;
        let outcome = run_search_observed(&project.program, f, &search, &mut |p| {
            progress(ProgressInfo {
                message: format!("searching {f}: {} evaluations", p.evaluations),
                fraction: Some((i as f64 + (p.evaluations as f64 / max).min(1.0)) / total),
            });
        })
        .map_err(|e| (FailureKind::Generation, e.to_string()))?;
        codes.extend(outcome.tests.iter().map(render_test));
        functions.push(SbstFunctionSummary {
            function: f.clone(),
            goals: outcome.summary.goals_in_scope,
            covered_goals: outcome.summary.covered_goals.len(),
            evaluations: outcome.summary.evaluations,
            target_covered: outcome.summary.target_covered,
        });
    }
    Ok(Generated {
        codes,
        summary: GenerationSummary::Sbst { seed, functions },
        provider: None,
    })
}

fn generate_llm(
    project: &Project,
    resolved: &ResolvedUut,
    config: &ForgeConfig,
    progress: &mut dyn FnMut(ProgressInfo),
) -> Result<Generated, Failure> {
    let generation = |e: String| (FailureKind::Generation, e);
    let mut provider = make_provider(&project.root, config).map_err(generation)?;
    let template = prompt_template(&project.root, config).map_err(generation)?;
    let repair = repair_config(config);
    let depths = PromptDepths::new(config.llm.input_depth, config.llm.polymorphism_depth);
    let mut current = project.program.clone();
    let mut codes = Vec::new();
    let mut functions = Vec::new();
    let mut fallback: Option<String> = None;
    let mut provider_error: Option<String> = None;
    let total = resolved.functions.len().max(1) as f64;
    for (i, f) in resolved.functions.iter().enumerate() {
        progress(ProgressInfo {
            message: format!("asking the model about {f}"),
            fraction: Some(i as f64 / total),
        });
        let request = PromptRequest {
            uut: f.clone(),
            target_line: resolved.line,
            test_count: 5,
        };
        let mut summary = LlmFunctionSummary {
            function: f.clone(),
            saved: 0,
            iterations_used: 0,
            terminal: None,
            final_depths: None,
            message: None,
        };
        let saved = match repair_loop(
            &current,
            &request,
            &template,
            depths,
            &repair,
            provider.as_mut(),
        ) {
            Ok(outcome) => {
                summary.iterations_used = outcome.iterations_used;
                summary.terminal = Some(outcome.terminal);
                summary.final_depths = outcome.final_depths;
                summary.message = outcome.message.clone();
                if let Some(m) = outcome.message {
                    fallback.get_or_insert(m);
                }
                outcome.saved
            }
            Err(LlmError::PromptTooLarge(m)) => {
                summary.message = Some(m.clone());
                fallback.get_or_insert(m);
                Vec::new()
            }
            Err(LlmError::Provider { source, saved }) => {
                let m = format!("llm provider failed: {source}");
                summary.message = Some(m.clone());
                provider_error.get_or_insert(m);
                saved
            }
            Err(e) => return Err(generation(e.to_string())),
        };
        for cand in saved {
            if let (checked, Some(extended)) = check_candidate_in(&current, &cand) {
                current = extended;
                codes.push(checked.code);
                summary.saved += 1;
            }
        }
        functions.push(summary);
    }
    if codes.is_empty() {
        if let Some(m) = provider_error {
            return Err((FailureKind::Generation, m));
        }
        if let Some(m) = fallback {
            return Err((FailureKind::Fallback, m));
        }
    }
    Ok(Generated {
        codes,
        summary: GenerationSummary::Llm { functions },
        provider: Some(provider),
    })
}

impl Session {
    pub fn new(
        id: String,
        root: &Path,
        uut: Uut,
        technique: Technique,
        config: ForgeConfig,
    ) -> Self {
        Session {
            id,
            root: root.to_path_buf(),
            uut,
            technique,
            config,
            phase: Phase::Building,
            progress: ProgressInfo {
                message: "building the project".to_string(),
                fraction: None,
            },
            summary: None,
            tests: Vec::new(),
            coverage: None,
            sources: Vec::new(),
            runtime: Runtime::default(),
        }
    }

    /// Moves forward only; later phases are never overwritten by earlier ones.
    fn advance(&mut self, phase: Phase) {
        if phase.rank() > self.phase.rank()
            || (phase.rank() == self.phase.rank() && phase == self.phase)
        {
            self.phase = phase;
        }
    }

    fn fail(&mut self, (kind, message): Failure) {
        self.advance(Phase::Error { kind, message });
    }

    pub fn is_ready(&self) -> bool {
        self.phase == Phase::Ready
    }

    pub fn error(&self) -> Option<(FailureKind, &str)> {
        match &self.phase {
            Phase::Error { kind, message } => Some((*kind, message)),
            _ => None,
        }
    }

    fn require_ready(&self) -> Result<(), SessionError> {
        if self.is_ready() && self.runtime.project.is_some() {
            Ok(())
        } else {
            Err(SessionError::WrongPhase(self.phase.name()))
        }
    }

    fn index(&self, tid: &str) -> Result<usize, SessionError> {
        self.tests
            .iter()
            .position(|t| t.id == tid)
            .ok_or_else(|| SessionError::UnknownTest(tid.to_string()))
    }

    pub fn test(&self, tid: &str) -> Result<&TestEntry, SessionError> {
        self.index(tid).map(|i| &self.tests[i])
    }

    fn project(&self) -> &Project {
        self.runtime
            .project
            .as_ref()
            .expect("ready sessions have a project")
    }

    fn report(&self) -> &CoverageReport {
        self.coverage
            .as_ref()
            .expect("ready sessions have coverage")
    }

    fn report_mut(&mut self) -> &mut CoverageReport {
        self.coverage
            .as_mut()
            .expect("ready sessions have coverage")
    }

    pub fn snapshot_path(root: &Path, id: &str) -> PathBuf {
        root.join(SESSIONS_DIR).join(format!("{id}.json"))
    }

    /// Persists the session; failures are logged.
    pub fn save_snapshot(&self) {
        let path = Self::snapshot_path(&self.root, &self.id);
        let text = serde_json::to_string_pretty(self).expect("serializable");
        let result = std::fs::create_dir_all(path.parent().expect("has parent")).and_then(|()| {
            let tmp = path.with_extension("json.tmp");
            std::fs::write(&tmp, text).and_then(|()| std::fs::rename(&tmp, &path))
        });
        if let Err(e) = result {
            tracing::warn!("cannot save session snapshot {}: {e}", path.display());
        }
    }

    /// Restores a Ready session from its snapshot.
    pub fn restore(path: &Path) -> Result<Session, String> {
        let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
        let mut session: Session = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        if session.is_ready() {
            let project = Project::from_sources(&session.root, session.sources.clone())
                .map_err(|e| e.to_string())?;
            session.runtime.mutants = if session.report().mutation_ran {
                mutants_for(&project.program, &session.report().scope)
            } else {
                Vec::new()
            };
            session.runtime.project = Some(project);
        }
        Ok(session)
    }

    fn suite_test(entry: &TestEntry) -> SuiteTest {
        SuiteTest {
            id: entry.id.clone(),
            code: entry.current_code.clone(),
        }
    }

    fn function_names(&self) -> BTreeSet<String> {
        self.project()
            .program
            .function_names()
            .into_iter()
            .map(str::to_string)
            .collect()
    }

    pub fn run_test(
        &mut self,
        telemetry: &Telemetry,
        tid: &str,
        edited: Option<String>,
    ) -> Result<(TestEntry, Option<TestResult>), SessionError> {
        self.require_ready()?;
        let idx = self.index(tid)?;
        if let Some(code) = edited {
            if code != self.tests[idx].current_code {
                for region in classify_modification(
                    &self.tests[idx].current_code,
                    &code,
                    &self.function_names(),
                ) {
                    telemetry.record(EventKind::TestModified { region });
                }
                let entry = &mut self.tests[idx];
                entry.name = test_name(&code).unwrap_or_else(|| entry.name.clone());
                entry.current_code = code;
            }
        }
        let suite = Self::suite_test(&self.tests[idx]);
        let budget = self.config.runtime.step_budget;
        if let Err(e) = with_test(&self.project().program, &suite) {
            self.tests[idx].status = EntryStatus::Failing(format!("does not compile: {e}"));
            telemetry.record(EventKind::TestRun { passed: false });
            return Ok((self.tests[idx].clone(), self.report().test(tid).cloned()));
        }
        let row = run_one(
            &self.project().program,
            &suite,
            &self.report().scope,
            budget,
        );
        let kills = self.report().mutation_ran.then(|| {
            run_mutation(
                &self.project().program,
                std::slice::from_ref(&suite),
                std::slice::from_ref(&row),
                &self.runtime.mutants,
                budget,
                MutationStrategy::SkipUncovered,
            )
        });
        let report = self.report_mut();
        if let Some(kills) = kills {
            for (m, k) in report.mutants.iter_mut().zip(kills) {
                m.killed_by.remove(tid);
                m.killed_by.extend(k.killed_by);
            }
        }
        match report.tests.iter_mut().find(|t| t.id == tid) {
            Some(slot) => *slot = row.clone(),
            None => report.tests.push(row.clone()),
        }
        let entry = &mut self.tests[idx];
        entry.status = match (&row.error, row.passed()) {
            (_, true) => EntryStatus::Passing,
            (Some(e), false) => EntryStatus::Failing(e.clone()),
            (None, false) => EntryStatus::Failing("failed".to_string()),
        };
        entry.last_run_code = Some(entry.current_code.clone());
        telemetry.record(EventKind::TestRun {
            passed: row.passed(),
        });
        Ok((entry.clone(), Some(row)))
    }

    pub fn reset_test(&mut self, tid: &str, to: ResetTarget) -> Result<TestEntry, SessionError> {
        self.require_ready()?;
        let idx = self.index(tid)?;
        let entry = &mut self.tests[idx];
        entry.current_code = match to {
            ResetTarget::Initial => entry.initial_code.clone(),
            ResetTarget::LastRun => entry
                .last_run_code
                .clone()
                .ok_or(SessionError::NoPriorRun)?,
        };
        entry.name = test_name(&entry.current_code).unwrap_or_else(|| entry.name.clone());
        entry.status = EntryStatus::NotRun;
        Ok(entry.clone())
    }

    /// Sends a modification request and makes the returned test the active
    /// version. Returns its index.
    pub fn feedback(
        &mut self,
        telemetry: &Telemetry,
        tid: &str,
        instruction: &str,
    ) -> Result<usize, SessionError> {
        self.require_ready()?;
        let idx = self.index(tid)?;
        if instruction.trim().is_empty() {
            return Err(SessionError::InvalidRequest(
                "the instruction is empty".to_string(),
            ));
        }
        if self.runtime.provider.is_none() {
            self.runtime.provider =
                Some(make_provider(&self.root, &self.config).map_err(SessionError::Llm)?);
        }
        let template = prompt_template(&self.root, &self.config).map_err(SessionError::Llm)?;
        let repair = repair_config(&self.config);
        telemetry.record(EventKind::LlmFeedbackSent);
        let project = self.runtime.project.as_ref().expect("ready");
        let provider = self.runtime.provider.as_mut().expect("just set");
        let candidate = modification_request(
            &project.program,
            &self.tests[idx].current_code,
            instruction,
            &template,
            &repair,
            provider.as_mut(),
        )
        .map_err(|e| SessionError::Llm(e.to_string()))?;
        let entry = &mut self.tests[idx];
        entry.llm_versions.push(candidate.code.clone());
        entry.active_version = entry.llm_versions.len() - 1;
        entry.current_code = candidate.code;
        entry.name = candidate.name;
        entry.status = EntryStatus::NotRun;
        Ok(entry.active_version)
    }

    pub fn set_active_version(
        &mut self,
        tid: &str,
        index: usize,
    ) -> Result<TestEntry, SessionError> {
        self.require_ready()?;
        let idx = self.index(tid)?;
        let entry = &mut self.tests[idx];
        let code = entry
            .llm_versions
            .get(index)
            .ok_or(SessionError::UnknownVersion(index))?
            .clone();
        entry.active_version = index;
        entry.name = test_name(&code).unwrap_or_else(|| entry.name.clone());
        entry.current_code = code;
        entry.status = EntryStatus::NotRun;
        Ok(entry.clone())
    }

    pub fn set_flags(
        &mut self,
        tid: &str,
        selected: Option<bool>,
        liked: Option<Liked>,
    ) -> Result<TestEntry, SessionError> {
        self.require_ready()?;
        let idx = self.index(tid)?;
        let entry = &mut self.tests[idx];
        if let Some(s) = selected {
            entry.selected = s;
        }
        if let Some(l) = liked {
            entry.liked = l;
        }
        Ok(entry.clone())
    }

    pub fn delete_test(&mut self, tid: &str) -> Result<(), SessionError> {
        self.require_ready()?;
        let idx = self.index(tid)?;
        self.tests.remove(idx);
        let report = self.report_mut();
        report.tests.retain(|t| t.id != tid);
        for m in &mut report.mutants {
            m.killed_by.remove(tid);
        }
        Ok(())
    }

    pub fn bulk(&mut self, action: BulkAction) -> Result<(), SessionError> {
        self.require_ready()?;
        match action {
            BulkAction::SelectAll | BulkAction::UnselectAll => {
                for t in &mut self.tests {
                    t.selected = action == BulkAction::SelectAll;
                }
            }
            BulkAction::DeleteAll => {
                for id in self.tests.iter().map(|t| t.id.clone()).collect::<Vec<_>>() {
                    self.delete_test(&id)?;
                }
            }
        }
        Ok(())
    }

    pub fn selected_ids(&self) -> Vec<String> {
        self.tests
            .iter()
            .filter(|t| t.selected)
            .map(|t| t.id.clone())
            .collect()
    }

    /// Metrics for `selection`, or for the selected tests.
    pub fn totals(&self, selection: Option<&[String]>) -> Result<Totals, SessionError> {
        self.require_ready()?;
        let ids: BTreeSet<String> = match selection {
            Some(ids) => ids.iter().cloned().collect(),
            None => self.selected_ids().into_iter().collect(),
        };
        self.report().totals(&ids).map_err(|e| match e {
            CoverageError::UnknownTest(id) => SessionError::UnknownTest(id),
            other => SessionError::InvalidRequest(other.to_string()),
        })
    }

    /// Covering tests and mutant details per executable line.
    pub fn lines(&self) -> Result<BTreeMap<Line, LineView>, SessionError> {
        self.require_ready()?;
        let report = self.report();
        Ok(report
            .per_line()
            .into_iter()
            .map(|(line, info)| {
                let mutants = report
                    .mutants
                    .iter()
                    .filter(|m| info.mutants.contains(&m.id))
                    .cloned()
                    .collect::<Vec<_>>();
                (
                    line,
                    LineView {
                        covering_tests: info.covering_tests.into_iter().collect(),
                        mutants,
                    },
                )
            })
            .collect())
    }

    /// Integrates the given tests, or the selected ones, into the project
    /// as it currently is on disk.
    pub fn apply(
        &mut self,
        telemetry: &Telemetry,
        ids: Option<&[String]>,
        destination: &ApplyDestination,
    ) -> Result<Applied, SessionError> {
        self.require_ready()?;
        let ids: Vec<String> = match ids {
            Some(ids) => ids.to_vec(),
            None => self.selected_ids(),
        };
        let mut codes = Vec::new();
        for id in &ids {
            codes.push(self.test(id)?.current_code.clone());
        }
        let project = load_project(&self.root).map_err(|e| SessionError::Project(e.to_string()))?;
        let applied = apply_to_suite(&project, &codes, destination).map_err(|e| match e {
            ApplyError::DoesNotCompile { index, message } => SessionError::InvalidRequest(format!(
                "test '{}' does not compile: {message}",
                ids[index]
            )),
            other => SessionError::Apply(other),
        })?;
        telemetry.record(EventKind::TestsIntegrated {
            count: applied.tests.len(),
            technique: self.technique,
        });
        Ok(applied)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineView {
    pub covering_tests: Vec<String>,
    pub mutants: Vec<MutantResult>,
}

/// Runs the whole pipeline for a session created with [`Session::new`]:
/// build, generate, measure coverage. Phase updates go through the lock
/// so observers see progress.
pub fn generate(telemetry: &Telemetry, handle: &Mutex<Session>) {
    let lock = || handle.lock().unwrap_or_else(|e| e.into_inner());
    let (root, uut, technique, config) = {
        let s = lock();
        (s.root.clone(), s.uut.clone(), s.technique, s.config.clone())
    };
    telemetry.record(EventKind::GenerationStarted {
        technique,
        uut_kind: uut.kind().to_string(),
    });
    let started = Instant::now();
    let result = run_pipeline(&root, &uut, technique, &config, &mut |phase, progress| {
        let mut s = lock();
        if let Some(p) = phase {
            s.advance(p);
        }
        s.progress = progress;
    });
    let mut s = lock();
    let tests_count = match result {
        Ok(done) => {
            let count = done.entries.len();
            s.tests = done.entries;
            s.coverage = Some(done.report);
            s.summary = Some(done.summary);
            s.sources = done.project.sources.clone();
            s.runtime = Runtime {
                project: Some(done.project),
                mutants: done.mutants,
                provider: done.provider,
            };
            s.progress = ProgressInfo {
                message: "done".to_string(),
                fraction: Some(1.0),
            };
            s.advance(Phase::Ready);
            count
        }
        Err(failure) => {
            s.progress = ProgressInfo {
                message: "failed".to_string(),
                fraction: None,
            };
            s.fail(failure);
            0
        }
    };
    let success = s.is_ready();
    drop(s);
    telemetry.record(EventKind::GenerationFinished {
        technique,
        success,
        duration_ms: started.elapsed().as_millis() as u64,
        tests_count,
    });
}

struct Finished {
    project: Project,
    entries: Vec<TestEntry>,
    report: CoverageReport,
    mutants: Vec<Mutant>,
    summary: GenerationSummary,
    provider: Option<Box<dyn ChatProvider>>,
}

fn run_pipeline(
    root: &Path,
    uut: &Uut,
    technique: Technique,
    config: &ForgeConfig,
    update: &mut dyn FnMut(Option<Phase>, ProgressInfo),
) -> Result<Finished, Failure> {
    let project = load_project(root).map_err(|e| (FailureKind::Project, e.to_string()))?;
    let resolved = uut
        .resolve(&project.program)
        .map_err(|e| (FailureKind::Unit, e.to_string()))?;
    if resolved.functions.is_empty() {
        return Err((FailureKind::Unit, format!("'{uut}' contains no functions")));
    }
    update(
        Some(Phase::Generating),
        ProgressInfo {
            message: format!("generating tests for {uut}"),
            fraction: Some(0.0),
        },
    );
    let mut progress = |p: ProgressInfo| update(None, p);
    let generated = match technique {
        Technique::Sbst => generate_sbst(&project, &resolved, config, &mut progress)?,
        Technique::Llm => generate_llm(&project, &resolved, config, &mut progress)?,
    };
    progress(ProgressInfo {
        message: "measuring coverage".to_string(),
        fraction: None,
    });
    let scope = CoverageScope::for_functions(&project.program, &resolved.functions)
        .map_err(|e| (FailureKind::Unit, e.to_string()))?;
    let suite: Vec<SuiteTest> = generated
        .codes
        .iter()
        .enumerate()
        .map(|(i, code)| SuiteTest {
            id: format!("t{}", i + 1),
            code: code.clone(),
        })
        .collect();
    let with_mutation = technique == Technique::Sbst;
    let budget = config.runtime.step_budget;
    let report = CoverageReport::build(&project.program, &suite, scope, budget, with_mutation);
    let mutants = if with_mutation {
        mutants_for(&project.program, &report.scope)
    } else {
        Vec::new()
    };
    let entries = suite
        .iter()
        .zip(&report.tests)
        .map(|(t, row)| {
            let status = match &row.error {
                None => EntryStatus::Passing,
                Some(e) => EntryStatus::Failing(e.clone()),
            };
            TestEntry::new(t.id.clone(), technique, t.code.clone(), status)
        })
        .collect();
    Ok(Finished {
        project,
        entries,
        report,
        mutants,
        summary: generated.summary,
        provider: generated.provider,
    })
}
