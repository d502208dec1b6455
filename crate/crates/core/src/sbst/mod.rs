//! Search-based test generation with dynamic objective management.
//!
//! Goals start out dormant and are activated once a branch outcome they are
//! control dependent on is covered. The population is evolved against the
//! currently active goals only, and the first (or smallest) test covering each
//! goal is kept in an archive from which the final tests are emitted.

pub mod values;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use minilang::ast::{BranchId, FunctionDecl, Line};
use minilang::interp::call_function;
use minilang::{
    render_value, DeclRef, ExecutionResult, FileId, Outcome, TestDecl, TypedProgram, Value,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cfg::{
    expand_objectives, initial_objectives, line_mode_filter, CfgError, CoverageGoal,
    FunctionAnalysis, GoalKind, NodeId,
};
use crate::pool::parallel_map;
use values::{constant_pool, ValueGen};

pub const TOURNAMENT_SIZE: usize = 4;

/// Approach level assigned to goals that give no guidance at all (not
/// reached and nothing they depend on was reached either).
const UNREACHED_APPROACH: u32 = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "line", rename_all = "snake_case")]
pub enum SearchMode {
    FullUnit,
    SingleLine(Line),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub population_size: usize,
    pub max_evaluations: u64,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub rng_seed: u64,
    pub mode: SearchMode,
    pub step_budget: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            population_size: 50,
            max_evaluations: 10_000,
            crossover_rate: 0.75,
            mutation_rate: 0.8,
            rng_seed: 0,
            mode: SearchMode::FullUnit,
            step_budget: minilang::DEFAULT_STEP_BUDGET,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |m: &str| Err(SearchError::InvalidConfig(m.to_string()));
        if self.population_size == 0 {
            return bad("population size must be positive");
        }
        if self.max_evaluations == 0 {
            return bad("evaluation budget must be positive");
        }
        if self.step_budget == 0 {
            return bad("step budget must be positive");
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) || !(0.0..=1.0).contains(&self.mutation_rate)
        {
            return bad("rates must lie in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SearchError {
    #[error("unknown function '{0}'")]
    UnknownFunction(String),
    #[error("line not in unit")]
    LineNotInUnit,
    #[error("invalid search configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Cfg(#[from] CfgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessValue {
    pub approach_level: u32,
    /// Normalised into [0, 1).
    pub branch_distance: f64,
}

impl FitnessValue {
    pub const COVERED: FitnessValue = FitnessValue {
        approach_level: 0,
        branch_distance: 0.0,
    };
    const UNREACHED: FitnessValue = FitnessValue {
        approach_level: UNREACHED_APPROACH,
        branch_distance: 0.0,
    };

    pub fn combined(&self) -> f64 {
        self.approach_level as f64 + self.branch_distance
    }

    fn one_level_up(self) -> FitnessValue {
        FitnessValue {
            approach_level: self
                .approach_level
                .saturating_add(1)
                .min(UNREACHED_APPROACH),
            ..self
        }
    }
}

pub fn normalize(distance: f64) -> f64 {
    let d = distance / (distance + 1.0);
    d.min(1.0 - f64::EPSILON)
}

/// What one execution did inside the unit under test.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GoalCoverage {
    pub lines: BTreeSet<Line>,
    pub branches: BTreeMap<NodeId, BranchObservation>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchObservation {
    pub taken_true: bool,
    pub taken_false: bool,
    /// Smallest raw distance towards each outcome over all evaluations.
    pub distance_true: f64,
    pub distance_false: f64,
}

impl GoalCoverage {
    pub fn from_execution(
        exec: &ExecutionResult,
        file: FileId,
        function: DeclRef,
        analysis: &FunctionAnalysis,
        node_of_branch: &HashMap<BranchId, NodeId>,
    ) -> Self {
        let unit_lines: BTreeSet<Line> = analysis.cfg.lines().into_iter().collect();
        let lines = exec
            .trace
            .iter()
            .filter(|p| p.file == file && unit_lines.contains(&p.line))
            .map(|p| p.line)
            .collect();
        let mut branches: BTreeMap<NodeId, BranchObservation> = BTreeMap::new();
        for hit in exec.branches.iter().filter(|h| h.function == function) {
            let Some(&node) = node_of_branch.get(&hit.branch) else {
                continue;
            };
            let obs = branches.entry(node).or_insert(BranchObservation {
                taken_true: false,
                taken_false: false,
                distance_true: f64::INFINITY,
                distance_false: f64::INFINITY,
            });
            obs.taken_true |= hit.taken;
            obs.taken_false |= !hit.taken;
            obs.distance_true = obs.distance_true.min(hit.distance_true);
            obs.distance_false = obs.distance_false.min(hit.distance_false);
        }
        GoalCoverage { lines, branches }
    }

    pub fn covers(&self, goal: &CoverageGoal) -> bool {
        match *goal {
            GoalKind::Line { line } => self.lines.contains(&line),
            GoalKind::Branch { node, outcome } => self.branches.get(&node).is_some_and(|o| {
                if outcome {
                    o.taken_true
                } else {
                    o.taken_false
                }
            }),
        }
    }

    pub fn covered_goals<'g>(
        &self,
        goals: impl IntoIterator<Item = &'g CoverageGoal>,
    ) -> BTreeSet<CoverageGoal> {
        goals
            .into_iter()
            .filter(|g| self.covers(g))
            .copied()
            .collect()
    }
}

/// Approach level plus normalised branch distance of one execution towards
/// `goal`.
///
/// A reached branch node scores its own distance. Otherwise the goal inherits
/// the best fitness among the branch outcomes gating it, one approach level
/// further away for branch goals. A line whose gating outcome was taken but
/// which was still not executed (the run failed in between) scores half a
/// distance unit.
pub fn fitness(
    goal: &CoverageGoal,
    coverage: &GoalCoverage,
    analysis: &FunctionAnalysis,
) -> FitnessValue {
    let mut visiting = BTreeSet::new();
    fitness_rec(goal, coverage, analysis, &mut visiting)
}

fn fitness_rec(
    goal: &CoverageGoal,
    coverage: &GoalCoverage,
    analysis: &FunctionAnalysis,
    visiting: &mut BTreeSet<CoverageGoal>,
) -> FitnessValue {
    if coverage.covers(goal) {
        return FitnessValue::COVERED;
    }
    if let GoalKind::Branch { node, outcome } = *goal {
        if let Some(obs) = coverage.branches.get(&node) {
            let raw = if outcome {
                obs.distance_true
            } else {
                obs.distance_false
            };
            return FitnessValue {
                approach_level: 0,
                branch_distance: normalize(raw),
            };
        }
    }
    if !visiting.insert(*goal) {
        return FitnessValue::UNREACHED;
    }
    let mut best = FitnessValue::UNREACHED;
    for dep in analysis.deps.gating_deps(goal) {
        let f = fitness_rec(dep, coverage, analysis, visiting);
        let f = match goal {
            GoalKind::Branch { .. } => f.one_level_up(),
            GoalKind::Line { .. } if f.combined() == 0.0 => FitnessValue {
                approach_level: 0,
                branch_distance: 0.5,
            },
            GoalKind::Line { .. } => f,
        };
        if f.combined() < best.combined() {
            best = f;
        }
    }
    visiting.remove(goal);
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalStatus {
    Dormant,
    Active,
    Covered,
}

/// Status of every goal in scope. Transitions only go forward.
#[derive(Debug, Clone)]
pub struct ObjectiveState {
    status: BTreeMap<CoverageGoal, GoalStatus>,
}

impl ObjectiveState {
    fn new(scope: &BTreeSet<CoverageGoal>) -> Self {
        ObjectiveState {
            status: scope.iter().map(|g| (*g, GoalStatus::Dormant)).collect(),
        }
    }

    pub fn status(&self, goal: &CoverageGoal) -> Option<GoalStatus> {
        self.status.get(goal).copied()
    }

    pub fn goals(&self) -> impl Iterator<Item = (&CoverageGoal, &GoalStatus)> {
        self.status.iter()
    }

    pub fn with_status(&self, s: GoalStatus) -> BTreeSet<CoverageGoal> {
        self.status
            .iter()
            .filter(|(_, st)| **st == s)
            .map(|(g, _)| *g)
            .collect()
    }

    pub fn active(&self) -> BTreeSet<CoverageGoal> {
        self.with_status(GoalStatus::Active)
    }

    pub fn covered(&self) -> BTreeSet<CoverageGoal> {
        self.with_status(GoalStatus::Covered)
    }

    /// Active goals plus covered ones: everything that was ever activated.
    pub fn activated(&self) -> BTreeSet<CoverageGoal> {
        self.status
            .iter()
            .filter(|(_, st)| **st != GoalStatus::Dormant)
            .map(|(g, _)| *g)
            .collect()
    }

    fn activate(&mut self, goal: &CoverageGoal) -> bool {
        match self.status.get_mut(goal) {
            Some(s @ GoalStatus::Dormant) => {
                *s = GoalStatus::Active;
                true
            }
            _ => false,
        }
    }

    fn cover(&mut self, goal: &CoverageGoal) -> bool {
        match self.status.get_mut(goal) {
            Some(s @ GoalStatus::Active) => {
                *s = GoalStatus::Covered;
                true
            }
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestChromosome {
    pub entry_function: String,
    pub arguments: Vec<Value>,
    #[serde(skip)]
    pub fitness_cache: BTreeMap<CoverageGoal, FitnessValue>,
    #[serde(skip)]
    pub last_execution: Option<Arc<ExecutionResult>>,
    #[serde(skip)]
    coverage: Arc<GoalCoverage>,
}

impl TestChromosome {
    pub fn new(entry_function: &str, arguments: Vec<Value>) -> Self {
        TestChromosome {
            entry_function: entry_function.to_string(),
            arguments,
            fitness_cache: BTreeMap::new(),
            last_execution: None,
            coverage: Arc::default(),
        }
    }

    pub fn size(&self) -> usize {
        self.arguments.iter().map(Value::size).sum()
    }

    pub fn set_arguments(&mut self, arguments: Vec<Value>) {
        self.arguments = arguments;
        self.fitness_cache.clear();
        self.last_execution = None;
        self.coverage = Arc::default();
    }

    pub fn coverage(&self) -> &GoalCoverage {
        &self.coverage
    }

    fn fitness_for(&mut self, goal: &CoverageGoal, analysis: &FunctionAnalysis) -> FitnessValue {
        if let Some(f) = self.fitness_cache.get(goal) {
            return *f;
        }
        let f = fitness(goal, &self.coverage, analysis);
        self.fitness_cache.insert(*goal, f);
        f
    }

    /// Best combined fitness over the uncovered active goals.
    fn rank(&mut self, targets: &[CoverageGoal], analysis: &FunctionAnalysis) -> f64 {
        targets
            .iter()
            .map(|g| self.fitness_for(g, analysis).combined())
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    pub arguments: Vec<Value>,
    pub execution: ExecutionResult,
}

/// The first covering test per goal, replaced only by strictly smaller ones.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Archive {
    pub entries: BTreeMap<CoverageGoal, ArchiveEntry>,
}

impl Archive {
    fn offer(&mut self, goal: CoverageGoal, chromosome: &TestChromosome) -> bool {
        let size = chromosome.size();
        let replace = match self.entries.get(&goal) {
            None => true,
            Some(e) => size < e.arguments.iter().map(Value::size).sum(),
        };
        if replace {
            let execution = chromosome
                .last_execution
                .as_deref()
                .cloned()
                .expect("evaluated chromosome");
            self.entries.insert(
                goal,
                ArchiveEntry {
                    arguments: chromosome.arguments.clone(),
                    execution,
                },
            );
        }
        replace
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSummary {
    pub goals_in_scope: usize,
    pub covered_goals: Vec<CoverageGoal>,
    pub uncovered_goals: Vec<CoverageGoal>,
    pub evaluations: u64,
    pub generations: u32,
    pub target_line: Option<Line>,
    pub target_covered: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub tests: Vec<TestDecl>,
    pub archive: Archive,
    pub summary: SearchSummary,
}

/// Snapshot handed to observers after each generation.
pub struct Progress<'a> {
    pub generation: u32,
    pub evaluations: u64,
    pub objectives: &'a ObjectiveState,
    pub scope: &'a BTreeSet<CoverageGoal>,
}

pub fn run_search(
    program: &TypedProgram,
    uut: &str,
    config: &SearchConfig,
) -> Result<SearchOutcome, SearchError> {
    run_search_observed(program, uut, config, &mut |_| {})
}

pub fn run_search_observed(
    program: &TypedProgram,
    uut: &str,
    config: &SearchConfig,
    observer: &mut dyn FnMut(&Progress),
) -> Result<SearchOutcome, SearchError> {
    config.validate()?;
    let fref = program
        .function_ref(uut)
        .ok_or_else(|| SearchError::UnknownFunction(uut.to_string()))?;
    let decl = program.function_by_ref(fref);
    let analysis = FunctionAnalysis::new(decl)?;
    let scope = match config.mode {
        SearchMode::FullUnit => analysis.all_goals(),
        SearchMode::SingleLine(line) => {
            if !decl.contains_line(line) {
                return Err(SearchError::LineNotInUnit);
            }
            line_mode_filter(&analysis.deps, &analysis.cfg, line)
                .map_err(|_| SearchError::LineNotInUnit)?
        }
    };
    let target = match config.mode {
        SearchMode::SingleLine(line) => Some(GoalKind::Line { line }),
        SearchMode::FullUnit => None,
    };
    let pool = constant_pool(decl);
    let mut search = Search {
        program,
        decl,
        fref,
        node_of_branch: analysis
            .cfg
            .nodes
            .iter()
            .filter_map(|b| b.branch.map(|br| (br, b.id)))
            .collect(),
        analysis: &analysis,
        gen: ValueGen {
            program,
            pool: &pool,
        },
        config,
        rng: ChaCha8Rng::seed_from_u64(config.rng_seed),
        objectives: ObjectiveState::new(&scope),
        archive: Archive::default(),
        dormant_coverers: BTreeMap::new(),
        evaluations: 0,
        generations: 0,
    };
    let seeds: BTreeSet<CoverageGoal> = initial_objectives(&analysis.deps)
        .intersection(&scope)
        .copied()
        .collect();
    search.activate_all(seeds);

    let done = |s: &Search| match target {
        Some(t) => {
            s.objectives.status(&t) == Some(GoalStatus::Covered) || s.objectives.active().is_empty()
        }
        None => s.objectives.active().is_empty(),
    };

    let initial: Vec<TestChromosome> = (0..config.population_size)
        .map(|_| search.random_chromosome())
        .collect();
    let take = (config.max_evaluations as usize).min(initial.len());
    let mut population = search.evaluate(initial.into_iter().take(take).collect());
    search.absorb(&population);
    search.generations = 1;
    observer(&Progress {
        generation: search.generations,
        evaluations: search.evaluations,
        objectives: &search.objectives,
        scope: &scope,
    });

    while search.evaluations < config.max_evaluations && !done(&search) {
        let room = (config.max_evaluations - search.evaluations) as usize;
        let offspring = search.breed(&mut population, room.min(config.population_size));
        let offspring = search.evaluate(offspring);
        search.absorb(&offspring);
        population = search.survivors(population, offspring);
        search.generations += 1;
        observer(&Progress {
            generation: search.generations,
            evaluations: search.evaluations,
            objectives: &search.objectives,
            scope: &scope,
        });
    }

    let tests = emit_tests(program, decl, &search.archive, config.step_budget);
    let covered = search.objectives.covered();
    let summary = SearchSummary {
        goals_in_scope: scope.len(),
        covered_goals: covered.iter().copied().collect(),
        uncovered_goals: scope.difference(&covered).copied().collect(),
        evaluations: search.evaluations,
        generations: search.generations,
        target_line: target.map(|t| match t {
            GoalKind::Line { line } => line,
            GoalKind::Branch { .. } => unreachable!(),
        }),
        target_covered: target.map(|t| covered.contains(&t)),
    };
    Ok(SearchOutcome {
        tests,
        archive: search.archive,
        summary,
    })
}

struct Search<'a> {
    program: &'a TypedProgram,
    decl: &'a FunctionDecl,
    fref: DeclRef,
    node_of_branch: HashMap<BranchId, NodeId>,
    analysis: &'a FunctionAnalysis,
    gen: ValueGen<'a>,
    config: &'a SearchConfig,
    rng: ChaCha8Rng,
    objectives: ObjectiveState,
    archive: Archive,
    /// Tests that covered a goal while it was still dormant.
    dormant_coverers: BTreeMap<CoverageGoal, TestChromosome>,
    evaluations: u64,
    generations: u32,
}

impl Search<'_> {
    fn random_chromosome(&mut self) -> TestChromosome {
        let args = self
            .decl
            .params
            .iter()
            .map(|p| self.gen.random(&p.ty, &mut self.rng))
            .collect();
        TestChromosome::new(&self.decl.name, args)
    }

    fn evaluate(&mut self, mut batch: Vec<TestChromosome>) -> Vec<TestChromosome> {
        let name = self.decl.name.as_str();
        let budget = self.config.step_budget;
        let program = self.program;
        let results = parallel_map(&batch, |c| {
            call_function(program, name, c.arguments.clone(), budget)
                .expect("arguments match the signature")
        });
        for (c, exec) in batch.iter_mut().zip(results) {
            c.coverage = Arc::new(GoalCoverage::from_execution(
                &exec,
                self.fref.file,
                self.fref,
                self.analysis,
                &self.node_of_branch,
            ));
            c.last_execution = Some(Arc::new(exec));
            c.fitness_cache.clear();
        }
        self.evaluations += batch.len() as u64;
        batch
    }

    fn activate_all(&mut self, goals: BTreeSet<CoverageGoal>) {
        let mut frontier = goals;
        while !frontier.is_empty() {
            let mut covered_now = BTreeSet::new();
            for goal in &frontier {
                if !self.objectives.activate(goal) {
                    continue;
                }
                if let Some(c) = self.dormant_coverers.remove(goal) {
                    self.objectives.cover(goal);
                    self.archive.offer(*goal, &c);
                    covered_now.insert(*goal);
                }
            }
            frontier = self.woken_by(&covered_now);
        }
    }

    /// Goals in scope that become active because `covered` branches were hit.
    fn woken_by(&self, covered: &BTreeSet<CoverageGoal>) -> BTreeSet<CoverageGoal> {
        expand_objectives(&self.analysis.deps, covered)
            .into_iter()
            .filter(|g| self.objectives.status(g) == Some(GoalStatus::Dormant))
            .collect()
    }

    /// Updates objectives and the archive with freshly evaluated tests.
    fn absorb(&mut self, batch: &[TestChromosome]) {
        let mut newly = BTreeSet::new();
        for c in batch {
            if c.last_execution
                .as_ref()
                .is_some_and(|e| matches!(e.outcome, Outcome::StepLimitExceeded))
            {
                continue;
            }
            let goals: Vec<(CoverageGoal, GoalStatus)> =
                self.objectives.goals().map(|(g, s)| (*g, *s)).collect();
            for (goal, status) in goals {
                if !c.coverage.covers(&goal) {
                    continue;
                }
                match status {
                    GoalStatus::Active => {
                        self.objectives.cover(&goal);
                        self.archive.offer(goal, c);
                        newly.insert(goal);
                    }
                    GoalStatus::Covered => {
                        self.archive.offer(goal, c);
                    }
                    GoalStatus::Dormant => {
                        let better = self
                            .dormant_coverers
                            .get(&goal)
                            .is_none_or(|old| c.size() < old.size());
                        if better {
                            self.dormant_coverers.insert(goal, c.clone());
                        }
                    }
                }
            }
        }
        let woken = self.woken_by(&newly);
        self.activate_all(woken);
    }

    fn targets(&self) -> Vec<CoverageGoal> {
        self.objectives.active().into_iter().collect()
    }

    fn tournament(&mut self, population: &mut [TestChromosome], targets: &[CoverageGoal]) -> usize {
        let mut best: Option<(f64, usize, usize)> = None;
        for _ in 0..TOURNAMENT_SIZE {
            let i = self.rng.gen_range(0..population.len());
            let key = (
                population[i].rank(targets, self.analysis),
                population[i].size(),
                i,
            );
            if best.is_none_or(|b| (key.0, key.1) < (b.0, b.1)) {
                best = Some(key);
            }
        }
        best.expect("tournament size is positive").2
    }

    fn breed(&mut self, population: &mut [TestChromosome], count: usize) -> Vec<TestChromosome> {
        let targets = self.targets();
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let a = self.tournament(population, &targets);
            let b = self.tournament(population, &targets);
            let (mut x, mut y) = (
                population[a].arguments.clone(),
                population[b].arguments.clone(),
            );
            if x.len() >= 2 && self.rng.gen_bool(self.config.crossover_rate) {
                let point = self.rng.gen_range(1..x.len());
                (x, y) = crossover(&x, &y, point);
            }
            for (child, parent) in [(x, a), (y, b)] {
                if out.len() == count {
                    break;
                }
                let parent_args = &population[parent].arguments;
                let mut child = child;
                if self.rng.gen_bool(self.config.mutation_rate) || child == *parent_args {
                    child = self.mutate_arguments(&child);
                }
                out.push(TestChromosome::new(&self.decl.name, child));
            }
        }
        out
    }

    /// Mutates each argument with probability 1/n and guarantees that the
    /// result differs from the input whenever there is an argument.
    fn mutate_arguments(&mut self, args: &[Value]) -> Vec<Value> {
        let n = args.len();
        if n == 0 {
            return Vec::new();
        }
        let params = &self.decl.params;
        let mut out = args.to_vec();
        for (k, param) in params.iter().enumerate() {
            if self.rng.gen_bool(1.0 / n as f64) {
                out[k] = self.gen.mutate(&out[k], &param.ty, &mut self.rng);
            }
        }
        let mut attempts = 0;
        while out == args && attempts < 16 {
            let k = self.rng.gen_range(0..n);
            out[k] = self.gen.mutate(&out[k], &params[k].ty, &mut self.rng);
            attempts += 1;
        }
        if out == args {
            let k = self.rng.gen_range(0..n);
            out[k] = self.gen.random(&params[k].ty, &mut self.rng);
        }
        out
    }

    /// Best test per uncovered active goal first, then the rest by rank.
    fn survivors(
        &mut self,
        population: Vec<TestChromosome>,
        offspring: Vec<TestChromosome>,
    ) -> Vec<TestChromosome> {
        let targets = self.targets();
        let mut all: Vec<TestChromosome> = population.into_iter().chain(offspring).collect();
        let n = self.config.population_size;
        let mut chosen: Vec<usize> = Vec::new();
        let mut taken = vec![false; all.len()];
        for goal in &targets {
            if chosen.len() >= n {
                break;
            }
            let mut best: Option<(f64, usize, usize)> = None;
            for (i, c) in all.iter_mut().enumerate() {
                let key = (c.fitness_for(goal, self.analysis).combined(), c.size(), i);
                if best.is_none_or(|b| (key.0, key.1) < (b.0, b.1)) {
                    best = Some(key);
                }
            }
            if let Some((_, _, i)) = best {
                if !taken[i] {
                    taken[i] = true;
                    chosen.push(i);
                }
            }
        }
        let mut rest: Vec<(f64, usize, usize)> = Vec::new();
        for (i, c) in all.iter_mut().enumerate() {
            if !taken[i] {
                rest.push((c.rank(&targets, self.analysis), c.size(), i));
            }
        }
        rest.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        chosen.extend(
            rest.into_iter()
                .map(|r| r.2)
                .take(n.saturating_sub(chosen.len())),
        );
        let mut slots: Vec<Option<TestChromosome>> = all.drain(..).map(Some).collect();
        chosen
            .into_iter()
            .map(|i| slots[i].take().expect("chosen once"))
            .collect()
    }
}

/// Single-point crossover: children swap argument tails at `point`.
pub fn crossover(a: &[Value], b: &[Value], point: usize) -> (Vec<Value>, Vec<Value>) {
    let point = point.min(a.len()).min(b.len());
    let mut x = a[..point].to_vec();
    x.extend_from_slice(&b[point..]);
    let mut y = b[..point].to_vec();
    y.extend_from_slice(&a[point..]);
    (x, y)
}

/// Test text for one call: a regression assertion on the returned value, or
/// `expect_error` when the call fails at runtime. Executions that hit (or
/// come close to) the step limit produce nothing.
pub fn synthesize_assertions(
    function: &FunctionDecl,
    arguments: &[Value],
    execution: &ExecutionResult,
    test_name: &str,
    step_budget: u64,
) -> Option<TestDecl> {
    let args: Vec<String> = arguments.iter().map(render_value).collect();
    let call = format!("{}({})", function.name, args.join(", "));
    // the test body adds a couple of statements of its own
    if execution.steps + 2 > step_budget {
        return None;
    }
    let body = match &execution.outcome {
        Outcome::Normal(v) => {
            format!(
                "    let r: {} = {call};\n    assert r == {};\n",
                function.return_type,
                render_value(v)
            )
        }
        Outcome::RuntimeError { .. } => format!("    expect_error {call};\n"),
        Outcome::StepLimitExceeded => return None,
    };
    let text = format!("test fn {test_name}() {{\n{body}}}\n");
    let mut parsed = minilang::parse(&text).expect("synthesized test parses");
    parsed.tests.pop()
}

fn emit_tests(
    program: &TypedProgram,
    decl: &FunctionDecl,
    archive: &Archive,
    step_budget: u64,
) -> Vec<TestDecl> {
    let mut seen: Vec<&Vec<Value>> = Vec::new();
    let mut tests = Vec::new();
    let mut counter = 0;
    for entry in archive.entries.values() {
        if seen.contains(&&entry.arguments) {
            continue;
        }
        seen.push(&entry.arguments);
        let name = loop {
            counter += 1;
            let candidate = format!("test_{}_{counter}", decl.name);
            if !program.has_name(&candidate) {
                break candidate;
            }
        };
        match synthesize_assertions(decl, &entry.arguments, &entry.execution, &name, step_budget) {
            Some(t) => tests.push(t),
            None => counter -= 1,
        }
    }
    tests
}

#[cfg(test)]
mod tests {
    use super::*;
    use minilang::{compile, render_test};

    const ABS: &str =
        "fn abs(x: int) -> int {\n    if (x < 0) {\n        return -x;\n    }\n    return x;\n}";

    fn args(v: &[i64]) -> Vec<Value> {
        v.iter().map(|n| Value::Int(*n)).collect()
    }

    #[test]
    fn crossover_swaps_tails() {
        let (x, y) = crossover(&args(&[1, 2]), &args(&[3, 4]), 1);
        assert_eq!(x, args(&[1, 4]));
        assert_eq!(y, args(&[3, 2]));
    }

    #[test]
    fn normalization_is_bounded() {
        assert_eq!(normalize(0.0), 0.0);
        assert_eq!(normalize(8.0), 8.0 / 9.0);
        assert!(normalize(1e300) < 1.0);
    }

    fn coverage_of(
        typed: &TypedProgram,
        f: &str,
        a: Vec<Value>,
    ) -> (GoalCoverage, FunctionAnalysis) {
        let fref = typed.function_ref(f).unwrap();
        let analysis = FunctionAnalysis::new(typed.function(f).unwrap()).unwrap();
        let map = analysis
            .cfg
            .nodes
            .iter()
            .filter_map(|b| b.branch.map(|br| (br, b.id)))
            .collect();
        let exec = call_function(typed, f, a, 1000).unwrap();
        (
            GoalCoverage::from_execution(&exec, fref.file, fref, &analysis, &map),
            analysis,
        )
    }

    #[test]
    fn branch_fitness_uses_korel_distance() {
        let typed = compile(ABS).unwrap();
        let (cov, a) = coverage_of(&typed, "abs", args(&[7]));
        let cond = a.cfg.conditional_nodes().next().unwrap();
        let f = fitness(
            &GoalKind::Branch {
                node: cond,
                outcome: true,
            },
            &cov,
            &a,
        );
        assert_eq!(
            f,
            FitnessValue {
                approach_level: 0,
                branch_distance: 8.0 / 9.0
            }
        );
        assert_eq!(
            fitness(
                &GoalKind::Branch {
                    node: cond,
                    outcome: false
                },
                &cov,
                &a
            ),
            FitnessValue::COVERED
        );
        assert_eq!(
            fitness(&GoalKind::Line { line: 5 }, &cov, &a),
            FitnessValue::COVERED
        );
        assert_eq!(
            fitness(&GoalKind::Line { line: 3 }, &cov, &a).approach_level,
            0
        );
    }

    #[test]
    fn approach_level_counts_unentered_conditions() {
        let src = "fn f(x: int, y: int) -> int {
    if (x > 10) {
        if (y > 10) {
            return 1;
        }
    }
    return 0;
}";
        let typed = compile(src).unwrap();
        let (cov, a) = coverage_of(&typed, "f", args(&[7, 0]));
        let inner = a.cfg.block_of_line(3).unwrap();
        // outer reached but not taken: one level for the inner condition
        // plus the distance at the outer one, (10 - 7) + 1
        let expected = FitnessValue {
            approach_level: 1,
            branch_distance: normalize(4.0),
        };
        assert_eq!(fitness(&GoalKind::Line { line: 4 }, &cov, &a), expected);
        assert_eq!(
            fitness(
                &GoalKind::Branch {
                    node: inner,
                    outcome: true
                },
                &cov,
                &a
            ),
            expected
        );
    }

    #[test]
    fn abs_search_covers_all_goals() {
        let typed = compile(ABS).unwrap();
        let config = SearchConfig {
            rng_seed: 42,
            max_evaluations: 2000,
            ..SearchConfig::default()
        };
        let out = run_search(&typed, "abs", &config).unwrap();
        assert_eq!(out.summary.goals_in_scope, 5);
        assert!(out.summary.uncovered_goals.is_empty());
        let args: Vec<i64> = out
            .archive
            .entries
            .values()
            .map(|e| e.arguments[0].as_int().unwrap())
            .collect();
        assert!(args.iter().any(|&x| x < 0) && args.iter().any(|&x| x >= 0));
    }

    #[test]
    fn trivial_unit_needs_one_generation() {
        let typed = compile("fn k() -> int { return 7; }").unwrap();
        let out = run_search(&typed, "k", &SearchConfig::default()).unwrap();
        assert_eq!(out.summary.generations, 1);
        assert_eq!(out.summary.covered_goals, vec![GoalKind::Line { line: 1 }]);
        assert_eq!(out.tests.len(), 1);
        assert_eq!(
            render_test(&out.tests[0]),
            "test fn test_k_1() {\n    let r: int = k();\n    assert r == 7;\n}\n"
        );
    }

    #[test]
    fn synthesized_assertions() {
        let typed = compile("fn abs(x: int) -> int { if (x < 0) { return -x; } return x; }\nfn div(a: int, b: int) -> int { return a / b; }\nfn spin(x: int) -> int { while (true) { x = x + 1; } return x; }").unwrap();
        let abs = typed.function("abs").unwrap();
        let exec = call_function(&typed, "abs", args(&[-3]), 100).unwrap();
        let t = synthesize_assertions(abs, &args(&[-3]), &exec, "test_abs_1", 100).unwrap();
        assert_eq!(
            render_test(&t),
            "test fn test_abs_1() {\n    let r: int = abs(-3);\n    assert r == 3;\n}\n"
        );

        let div = typed.function("div").unwrap();
        let exec = call_function(&typed, "div", args(&[1, 0]), 100).unwrap();
        let t = synthesize_assertions(div, &args(&[1, 0]), &exec, "test_div_1", 100).unwrap();
        assert_eq!(
            render_test(&t),
            "test fn test_div_1() {\n    expect_error div(1, 0);\n}\n"
        );

        let spin = typed.function("spin").unwrap();
        let exec = call_function(&typed, "spin", args(&[0]), 100).unwrap();
        assert!(synthesize_assertions(spin, &args(&[0]), &exec, "test_spin_1", 100).is_none());
    }

    #[test]
    fn mutation_always_changes_identical_parents() {
        let typed = compile("fn f(a: bool, b: int[]) -> int { return 0; }").unwrap();
        let decl = typed.function("f").unwrap();
        let analysis = FunctionAnalysis::new(decl).unwrap();
        let pool = [0];
        let config = SearchConfig::default();
        let mut s = Search {
            program: &typed,
            decl,
            fref: typed.function_ref("f").unwrap(),
            node_of_branch: HashMap::new(),
            analysis: &analysis,
            gen: ValueGen {
                program: &typed,
                pool: &pool,
            },
            config: &config,
            rng: ChaCha8Rng::seed_from_u64(3),
            objectives: ObjectiveState::new(&analysis.all_goals()),
            archive: Archive::default(),
            dormant_coverers: BTreeMap::new(),
            evaluations: 0,
            generations: 0,
        };
        let same = vec![Value::Bool(true), Value::Array(vec![1, 2])];
        let mut population: Vec<TestChromosome> = (0..10)
            .map(|_| TestChromosome::new("f", same.clone()))
            .collect();
        let population = s.evaluate(std::mem::take(&mut population));
        let mut population = population;
        let kids = s.breed(&mut population, 10);
        assert!(kids.iter().any(|k| k.arguments != same));
        assert!(kids.iter().all(|k| k.arguments != same));
    }

    #[test]
    fn invalid_configurations_are_rejected() {
        let typed = compile(ABS).unwrap();
        let bad = SearchConfig {
            population_size: 0,
            ..SearchConfig::default()
        };
        assert!(matches!(
            run_search(&typed, "abs", &bad),
            Err(SearchError::InvalidConfig(_))
        ));
        let line = SearchConfig {
            mode: SearchMode::SingleLine(99),
            ..SearchConfig::default()
        };
        assert_eq!(
            run_search(&typed, "abs", &line).unwrap_err(),
            SearchError::LineNotInUnit
        );
        assert!(matches!(
            run_search(&typed, "nope", &SearchConfig::default()),
            Err(SearchError::UnknownFunction(_))
        ));
    }
}
