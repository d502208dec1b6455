//! Control flow graphs, post-dominance, control dependence and the coverage
//! goals derived from them.
//!
//! Each function gets a synthetic entry and a synthetic exit node. Straight
//! runs of statements share a basic block; an `if` condition terminates the
//! block it appears in, a `while` header always gets its own block, and every
//! `return` jumps to the exit.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use fixedbitset::FixedBitSet;
use minilang::ast::{Block, BranchId, FunctionDecl, Line, StmtKind};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EdgeLabel {
    Unconditional,
    True,
    False,
}

impl EdgeLabel {
    pub fn outcome(self) -> Option<bool> {
        match self {
            EdgeLabel::Unconditional => None,
            EdgeLabel::True => Some(true),
            EdgeLabel::False => Some(false),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    pub label: EdgeLabel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasicBlock {
    pub id: NodeId,
    pub lines: Vec<Line>,
    /// Set on nodes that end in an `if`/`while` condition.
    pub branch: Option<BranchId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlFlowGraph {
    pub nodes: Vec<BasicBlock>,
    pub edges: Vec<Edge>,
    pub entry: NodeId,
    pub exit: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CfgError {
    #[error("malformed control flow graph: nodes {0:?} cannot reach the exit")]
    ExitUnreachable(Vec<NodeId>),
}

impl ControlFlowGraph {
    /// A graph from raw parts, for analyses over shapes that did not come
    /// from source code.
    pub fn from_edges(node_count: usize, entry: NodeId, exit: NodeId, edges: Vec<Edge>) -> Self {
        let nodes = (0..node_count)
            .map(|id| BasicBlock {
                id,
                lines: Vec::new(),
                branch: None,
            })
            .collect();
        let mut cfg = ControlFlowGraph {
            nodes,
            edges,
            entry,
            exit,
        };
        let conditional: BTreeSet<NodeId> = cfg
            .edges
            .iter()
            .filter(|e| e.label != EdgeLabel::Unconditional)
            .map(|e| e.from)
            .collect();
        for n in conditional {
            cfg.nodes[n].branch = Some(n as BranchId);
        }
        cfg
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn successors(&self, n: NodeId) -> impl Iterator<Item = &Edge> + '_ {
        self.edges.iter().filter(move |e| e.from == n)
    }

    pub fn predecessors(&self, n: NodeId) -> impl Iterator<Item = &Edge> + '_ {
        self.edges.iter().filter(move |e| e.to == n)
    }

    /// Successor taken on `outcome` from a conditional node.
    pub fn branch_target(&self, n: NodeId, outcome: bool) -> Option<NodeId> {
        let label = if outcome {
            EdgeLabel::True
        } else {
            EdgeLabel::False
        };
        self.successors(n).find(|e| e.label == label).map(|e| e.to)
    }

    pub fn conditional_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .filter(|b| b.branch.is_some())
            .map(|b| b.id)
    }

    pub fn node_of_branch(&self, branch: BranchId) -> Option<NodeId> {
        self.nodes
            .iter()
            .find(|b| b.branch == Some(branch))
            .map(|b| b.id)
    }

    pub fn block_of_line(&self, line: Line) -> Option<NodeId> {
        self.nodes
            .iter()
            .find(|b| b.lines.contains(&line))
            .map(|b| b.id)
    }

    /// All statement lines in node order.
    pub fn lines(&self) -> Vec<Line> {
        let mut out: Vec<Line> = self
            .nodes
            .iter()
            .flat_map(|b| b.lines.iter().copied())
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    fn adjacency(&self, reverse: bool) -> Vec<Vec<NodeId>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            if reverse {
                adj[e.to].push(e.from);
            } else {
                adj[e.from].push(e.to);
            }
        }
        adj
    }

    fn reach(&self, start: NodeId, reverse: bool) -> FixedBitSet {
        let adj = self.adjacency(reverse);
        let mut seen = FixedBitSet::with_capacity(self.nodes.len());
        let mut queue = VecDeque::from([start]);
        seen.insert(start);
        while let Some(n) = queue.pop_front() {
            for &m in &adj[n] {
                if !seen.put(m) {
                    queue.push_back(m);
                }
            }
        }
        seen
    }

    /// Nodes reachable from `start` (inclusive).
    pub fn reachable_from(&self, start: NodeId) -> FixedBitSet {
        self.reach(start, false)
    }

    /// Nodes from which `target` is reachable (inclusive).
    pub fn reaching(&self, target: NodeId) -> FixedBitSet {
        self.reach(target, true)
    }
}

// ---------------------------------------------------------------- building

struct Builder {
    nodes: Vec<BasicBlock>,
    edges: Vec<Edge>,
    /// Edges waiting for the next block to be created.
    pending: Vec<(NodeId, EdgeLabel)>,
    /// Block currently accepting straight-line statements.
    open: Option<NodeId>,
}

const ENTRY: NodeId = 0;
const EXIT: NodeId = 1;

impl Builder {
    fn new_node(&mut self) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(BasicBlock {
            id,
            lines: Vec::new(),
            branch: None,
        });
        for (from, label) in std::mem::take(&mut self.pending) {
            self.edges.push(Edge {
                from,
                to: id,
                label,
            });
        }
        id
    }

    fn current(&mut self) -> NodeId {
        match self.open {
            Some(n) => n,
            None => {
                let n = self.new_node();
                self.open = Some(n);
                n
            }
        }
    }

    fn add_line(&mut self, n: NodeId, line: Line) {
        let lines = &mut self.nodes[n].lines;
        if lines.last() != Some(&line) {
            lines.push(line);
        }
    }

    /// Closes the open block so that it falls through to whatever comes next.
    fn seal(&mut self) {
        if let Some(n) = self.open.take() {
            self.pending.push((n, EdgeLabel::Unconditional));
        }
    }

    fn block(&mut self, block: &Block) {
        for stmt in &block.stmts {
            match &stmt.kind {
                StmtKind::If {
                    then_block,
                    else_block,
                    branch,
                    ..
                } => {
                    let cond = self.current();
                    self.add_line(cond, stmt.line);
                    self.nodes[cond].branch = Some(*branch);
                    self.open = None;

                    self.pending = vec![(cond, EdgeLabel::True)];
                    self.block(then_block);
                    self.seal();
                    let mut after = std::mem::take(&mut self.pending);

                    self.pending = vec![(cond, EdgeLabel::False)];
                    if let Some(e) = else_block {
                        self.block(e);
                        self.seal();
                    }
                    after.append(&mut self.pending);
                    self.pending = after;
                }
                StmtKind::While { body, branch, .. } => {
                    self.seal();
                    let header = self.new_node();
                    self.add_line(header, stmt.line);
                    self.nodes[header].branch = Some(*branch);

                    self.pending = vec![(header, EdgeLabel::True)];
                    self.block(body);
                    self.seal();
                    for (from, label) in std::mem::take(&mut self.pending) {
                        self.edges.push(Edge {
                            from,
                            to: header,
                            label,
                        });
                    }
                    self.pending = vec![(header, EdgeLabel::False)];
                }
                StmtKind::Return(_) => {
                    let n = self.current();
                    self.add_line(n, stmt.line);
                    self.edges.push(Edge {
                        from: n,
                        to: EXIT,
                        label: EdgeLabel::Unconditional,
                    });
                    self.open = None;
                }
                _ => {
                    let n = self.current();
                    self.add_line(n, stmt.line);
                }
            }
        }
    }
}

pub fn build_cfg(function: &FunctionDecl) -> ControlFlowGraph {
    let mut b = Builder {
        nodes: vec![
            BasicBlock {
                id: ENTRY,
                lines: Vec::new(),
                branch: None,
            },
            BasicBlock {
                id: EXIT,
                lines: Vec::new(),
                branch: None,
            },
        ],
        edges: Vec::new(),
        pending: vec![(ENTRY, EdgeLabel::Unconditional)],
        open: None,
    };
    b.block(&function.body);
    b.seal();
    for (from, label) in std::mem::take(&mut b.pending) {
        b.edges.push(Edge {
            from,
            to: EXIT,
            label,
        });
    }
    ControlFlowGraph {
        nodes: b.nodes,
        edges: b.edges,
        entry: ENTRY,
        exit: EXIT,
    }
}

// ---------------------------------------------------------- dominance

/// Post-dominator sets (reflexive) and the immediate post-dominator of every
/// node but the exit.
#[derive(Debug, Clone)]
pub struct PostDominators {
    sets: Vec<FixedBitSet>,
    pub immediate: Vec<Option<NodeId>>,
}

impl PostDominators {
    /// Does `p` post-dominate `n` (reflexively)?
    pub fn post_dominates(&self, p: NodeId, n: NodeId) -> bool {
        self.sets[n].contains(p)
    }

    pub fn set(&self, n: NodeId) -> Vec<NodeId> {
        self.sets[n].ones().collect()
    }
}

/// Iterative fixpoint of `pdom(n) = {n} ∪ ⋂ pdom(s)` over successors.
pub fn post_dominators(cfg: &ControlFlowGraph) -> Result<PostDominators, CfgError> {
    let reaching_exit = cfg.reaching(cfg.exit);
    let stuck: Vec<NodeId> = (0..cfg.len())
        .filter(|n| !reaching_exit.contains(*n))
        .collect();
    if !stuck.is_empty() {
        return Err(CfgError::ExitUnreachable(stuck));
    }
    let sets = dominance_fixpoint(cfg, cfg.exit, &cfg.adjacency(false), &reaching_exit);
    let immediate = immediate_of(&sets, cfg.exit);
    Ok(PostDominators { sets, immediate })
}

/// Dominator sets (reflexive). Nodes unreachable from the entry only
/// dominate themselves.
pub fn dominators(cfg: &ControlFlowGraph) -> Vec<FixedBitSet> {
    let reachable = cfg.reachable_from(cfg.entry);
    let mut sets = dominance_fixpoint(cfg, cfg.entry, &cfg.adjacency(true), &reachable);
    for (n, set) in sets.iter_mut().enumerate() {
        if !reachable.contains(n) {
            set.clear();
            set.insert(n);
        }
    }
    sets
}

/// `flow[n]` lists the nodes whose sets are intersected into `n`'s; nodes
/// outside `live` (not connected to the root) are ignored.
fn dominance_fixpoint(
    cfg: &ControlFlowGraph,
    root: NodeId,
    flow: &[Vec<NodeId>],
    live: &FixedBitSet,
) -> Vec<FixedBitSet> {
    let n = cfg.len();
    let mut full = FixedBitSet::with_capacity(n);
    full.insert_range(..);
    let mut sets = vec![full; n];
    sets[root].clear();
    sets[root].insert(root);
    let mut changed = true;
    while changed {
        changed = false;
        for v in 0..n {
            if v == root {
                continue;
            }
            let mut next = FixedBitSet::with_capacity(n);
            let inputs: Vec<NodeId> = flow[v]
                .iter()
                .copied()
                .filter(|&s| live.contains(s))
                .collect();
            if !inputs.is_empty() {
                next.insert_range(..);
                for s in inputs {
                    next.intersect_with(&sets[s]);
                }
            }
            next.insert(v);
            if next != sets[v] {
                sets[v] = next;
                changed = true;
            }
        }
    }
    sets
}

fn immediate_of(sets: &[FixedBitSet], root: NodeId) -> Vec<Option<NodeId>> {
    (0..sets.len())
        .map(|v| {
            if v == root {
                return None;
            }
            // the closest strict dominator is the one with the largest set
            sets[v]
                .ones()
                .filter(|&d| d != v)
                .max_by_key(|&d| sets[d].count_ones(..))
        })
        .collect()
}

// ------------------------------------------------------- control dependence

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GoalKind {
    Branch { node: NodeId, outcome: bool },
    Line { line: Line },
}

pub type CoverageGoal = GoalKind;

/// Direct control dependences between nodes and the goals lifted from them.
#[derive(Debug, Clone)]
pub struct ControlDependenceMap {
    /// `node_deps[n]` = branch outcomes `(b, o)` that `n` is directly
    /// control dependent on, loop self-dependences included.
    pub node_deps: Vec<BTreeSet<(NodeId, bool)>>,
    /// Every goal of the function with its direct dependences.
    pub direct: BTreeMap<CoverageGoal, BTreeSet<CoverageGoal>>,
    /// The subset of `direct` that gates activation: dependences on branches
    /// the goal's own node dominates (loop-carried ones) are dropped.
    pub gating: BTreeMap<CoverageGoal, BTreeSet<CoverageGoal>>,
    goal_node: BTreeMap<CoverageGoal, NodeId>,
}

impl ControlDependenceMap {
    pub fn goals(&self) -> impl Iterator<Item = &CoverageGoal> {
        self.direct.keys()
    }

    pub fn node_of(&self, goal: &CoverageGoal) -> Option<NodeId> {
        self.goal_node.get(goal).copied()
    }

    pub fn direct_deps(&self, goal: &CoverageGoal) -> &BTreeSet<CoverageGoal> {
        static EMPTY: BTreeSet<CoverageGoal> = BTreeSet::new();
        self.direct.get(goal).unwrap_or(&EMPTY)
    }

    pub fn gating_deps(&self, goal: &CoverageGoal) -> &BTreeSet<CoverageGoal> {
        static EMPTY: BTreeSet<CoverageGoal> = BTreeSet::new();
        self.gating.get(goal).unwrap_or(&EMPTY)
    }

    /// All branch goals `goal` transitively depends on through direct edges.
    pub fn transitive_deps(&self, goal: &CoverageGoal) -> BTreeSet<CoverageGoal> {
        let mut out = BTreeSet::new();
        let mut stack: Vec<CoverageGoal> = self.direct_deps(goal).iter().copied().collect();
        while let Some(g) = stack.pop() {
            if out.insert(g) {
                stack.extend(self.direct_deps(&g).iter().copied());
            }
        }
        out
    }
}

/// Node-level control dependence via the post-dominator tree: for each
/// conditional edge `a -o-> b` where `b` does not post-dominate `a`, every
/// node from `b` up to (excluding) `ipdom(a)` depends on `(a, o)`.
pub fn node_control_dependences(
    cfg: &ControlFlowGraph,
    pdom: &PostDominators,
) -> Vec<BTreeSet<(NodeId, bool)>> {
    let mut deps = vec![BTreeSet::new(); cfg.len()];
    for e in &cfg.edges {
        let Some(outcome) = e.label.outcome() else {
            continue;
        };
        if e.to != e.from && pdom.post_dominates(e.to, e.from) {
            continue;
        }
        let stop = pdom.immediate[e.from];
        let mut runner = Some(e.to);
        while let Some(r) = runner {
            if Some(r) == stop {
                break;
            }
            deps[r].insert((e.from, outcome));
            runner = pdom.immediate[r];
        }
    }
    deps
}

pub fn control_dependencies(cfg: &ControlFlowGraph) -> Result<ControlDependenceMap, CfgError> {
    let pdom = post_dominators(cfg)?;
    let node_deps = node_control_dependences(cfg, &pdom);
    let dom = dominators(cfg);

    let mut goal_node = BTreeMap::new();
    for block in &cfg.nodes {
        for &line in &block.lines {
            goal_node.entry(GoalKind::Line { line }).or_insert(block.id);
        }
        if block.branch.is_some() {
            goal_node.insert(
                GoalKind::Branch {
                    node: block.id,
                    outcome: true,
                },
                block.id,
            );
            goal_node.insert(
                GoalKind::Branch {
                    node: block.id,
                    outcome: false,
                },
                block.id,
            );
        }
    }

    let mut direct = BTreeMap::new();
    let mut gating = BTreeMap::new();
    for (goal, &n) in &goal_node {
        let all: BTreeSet<CoverageGoal> = node_deps[n]
            .iter()
            .map(|&(b, o)| GoalKind::Branch {
                node: b,
                outcome: o,
            })
            .collect();
        let gate: BTreeSet<CoverageGoal> = node_deps[n]
            .iter()
            .filter(|&&(b, _)| !dom[b].contains(n))
            .map(|&(b, o)| GoalKind::Branch {
                node: b,
                outcome: o,
            })
            .collect();
        direct.insert(*goal, all);
        gating.insert(*goal, gate);
    }
    Ok(ControlDependenceMap {
        node_deps,
        direct,
        gating,
        goal_node,
    })
}

/// Goals with no gating dependence.
pub fn initial_objectives(map: &ControlDependenceMap) -> BTreeSet<CoverageGoal> {
    map.gating
        .iter()
        .filter(|(_, deps)| deps.is_empty())
        .map(|(g, _)| *g)
        .collect()
}

/// Goals whose gating dependences include a newly covered branch outcome.
pub fn expand_objectives(
    map: &ControlDependenceMap,
    newly_covered: &BTreeSet<CoverageGoal>,
) -> BTreeSet<CoverageGoal> {
    let branches: BTreeSet<&CoverageGoal> = newly_covered
        .iter()
        .filter(|g| matches!(g, GoalKind::Branch { .. }))
        .collect();
    if branches.is_empty() {
        return BTreeSet::new();
    }
    map.gating
        .iter()
        .filter(|(_, deps)| deps.iter().any(|d| branches.contains(d)))
        .map(|(g, _)| *g)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LineModeError {
    #[error("line not in unit")]
    LineNotInUnit,
}

/// The goals that matter for reaching `target_line`: the line itself, every
/// branch outcome it transitively depends on, branch outcomes on some
/// entry-to-target path whose taking keeps the target reachable, and the
/// lines of other blocks lying on such paths.
pub fn line_mode_filter(
    map: &ControlDependenceMap,
    cfg: &ControlFlowGraph,
    target_line: Line,
) -> Result<BTreeSet<CoverageGoal>, LineModeError> {
    let target_goal = GoalKind::Line { line: target_line };
    let target = map
        .node_of(&target_goal)
        .ok_or(LineModeError::LineNotInUnit)?;
    let from_entry = cfg.reachable_from(cfg.entry);
    let to_target = cfg.reaching(target);
    let on_path = |n: NodeId| from_entry.contains(n) && to_target.contains(n);

    let mut out = BTreeSet::from([target_goal]);
    out.extend(map.transitive_deps(&target_goal));
    for goal in map.goals() {
        let n = map.node_of(goal).expect("goal has a node");
        match *goal {
            GoalKind::Branch { node, outcome } => {
                if on_path(node)
                    && cfg
                        .branch_target(node, outcome)
                        .is_some_and(|s| to_target.contains(s))
                {
                    out.insert(*goal);
                }
            }
            GoalKind::Line { .. } => {
                if n != target && on_path(n) {
                    out.insert(*goal);
                }
            }
        }
    }
    Ok(out)
}

/// Everything the engines need about one function.
#[derive(Debug, Clone)]
pub struct FunctionAnalysis {
    pub cfg: ControlFlowGraph,
    pub deps: ControlDependenceMap,
}

impl FunctionAnalysis {
    pub fn new(function: &FunctionDecl) -> Result<Self, CfgError> {
        let cfg = build_cfg(function);
        let deps = control_dependencies(&cfg)?;
        Ok(FunctionAnalysis { cfg, deps })
    }

    pub fn all_goals(&self) -> BTreeSet<CoverageGoal> {
        self.deps.goals().copied().collect()
    }

    pub fn branch_goals(&self) -> BTreeSet<CoverageGoal> {
        self.deps
            .goals()
            .filter(|g| matches!(g, GoalKind::Branch { .. }))
            .copied()
            .collect()
    }

    pub fn line_goals(&self) -> BTreeSet<CoverageGoal> {
        self.deps
            .goals()
            .filter(|g| matches!(g, GoalKind::Line { .. }))
            .copied()
            .collect()
    }
}
