//! Prompt context gathering and size-bounded prompt rendering.

use std::collections::{BTreeSet, VecDeque};

use minilang::ast::{called_functions, Block, StmtKind};
use minilang::render::{render_function, render_record, render_signature, render_statement_head};
use minilang::{Line, Type, TypedProgram};
use serde::{Deserialize, Serialize};

use super::{ChatMessage, LlmError, SMALLER_UNIT_HINT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PromptDepths {
    pub input_depth: u32,
    pub polymorphism_depth: u32,
}

impl PromptDepths {
    pub fn new(input_depth: u32, polymorphism_depth: u32) -> Self {
        PromptDepths {
            input_depth,
            polymorphism_depth,
        }
    }

    /// Lowers the larger depth by one, polymorphism first on ties.
    pub fn decrement(self) -> Option<PromptDepths> {
        let PromptDepths {
            input_depth: i,
            polymorphism_depth: p,
        } = self;
        match (i, p) {
            (0, 0) => None,
            _ if p >= i => Some(PromptDepths::new(i, p - 1)),
            _ => Some(PromptDepths::new(i - 1, p)),
        }
    }
}

impl Default for PromptDepths {
    fn default() -> Self {
        PromptDepths::new(2, 2)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptContext {
    pub problem_description: String,
    pub uut_code: String,
    /// `(name, rendered declaration)` in discovery order.
    pub dependency_signatures: Vec<(String, String)>,
    /// `(supertype, subtype)` pairs.
    pub subtype_relations: Vec<(String, String)>,
    /// Head of the statement on the target line in line mode.
    pub target_statement: Option<String>,
}

/// What the prompt asks for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRequest {
    pub uut: String,
    pub target_line: Option<Line>,
    pub test_count: usize,
}

impl PromptRequest {
    pub fn function(uut: &str) -> Self {
        PromptRequest {
            uut: uut.to_string(),
            target_line: None,
            test_count: 5,
        }
    }
}

pub trait Tokenizer {
    fn count(&self, text: &str) -> usize;
}

/// `ceil(bytes / 4)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ByteHeuristic;

impl Tokenizer for ByteHeuristic {
    fn count(&self, text: &str) -> usize {
        text.len().div_ceil(4)
    }
}

pub const DEFAULT_SYSTEM_PROMPT: &str =
    "You are a unit-testing assistant for the MiniLang language.";

pub const DEFAULT_USER_TEMPLATE: &str = "TASK
{description} Generate {test_count} tests for the function `{uut}`.{target}

CODE UNDER TEST
{code}

DEPENDENCY SIGNATURES
{signatures}

SUBTYPE RELATIONS
{relations}

OUTPUT FORMAT
Reply with a single fenced code block containing MiniLang test functions named `test_*`, declared as `test fn test_name() { ... }`, that check behaviour with `assert` statements (use `expect_error` for calls that must fail).
";

/// Placeholders: `{description}`, `{test_count}`, `{uut}`, `{target}`,
/// `{code}`, `{signatures}`, `{relations}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub system: String,
    pub user: String,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate {
            system: DEFAULT_SYSTEM_PROMPT.to_string(),
            user: DEFAULT_USER_TEMPLATE.to_string(),
        }
    }
}

impl PromptTemplate {
    pub fn render(&self, request: &PromptRequest, context: &PromptContext) -> Vec<ChatMessage> {
        let list = |items: Vec<String>| {
            if items.is_empty() {
                "(none)".to_string()
            } else {
                items.join("\n")
            }
        };
        let signatures = list(
            context
                .dependency_signatures
                .iter()
                .map(|(_, d)| d.trim_end().to_string())
                .collect(),
        );
        let relations = list(
            context
                .subtype_relations
                .iter()
                .map(|(sup, sub)| format!("{sub} extends {sup}"))
                .collect(),
        );
        let target = match (request.target_line, &context.target_statement) {
            (Some(line), Some(stmt)) => {
                format!(" The tests must execute line {line}, the statement `{stmt}`.")
            }
            (Some(line), None) => format!(" The tests must execute line {line}."),
            _ => String::new(),
        };
        let user = self
            .user
            .replace("{description}", &context.problem_description)
            .replace("{test_count}", &request.test_count.to_string())
            .replace("{uut}", &request.uut)
            .replace("{target}", &target)
            .replace("{code}", context.uut_code.trim_end())
            .replace("{signatures}", &signatures)
            .replace("{relations}", &relations);
        vec![ChatMessage::system(&self.system), ChatMessage::user(&user)]
    }
}

fn record_types(ty: &Type, out: &mut Vec<String>) {
    if let Type::Record(name) = ty {
        out.push(name.clone());
    }
}

pub fn gather_context(
    program: &TypedProgram,
    uut: &str,
    depths: PromptDepths,
) -> Result<PromptContext, LlmError> {
    let decl = program
        .function(uut)
        .ok_or_else(|| LlmError::UnknownFunction(uut.to_string()))?;
    let mut signatures: Vec<(String, String)> = Vec::new();
    let mut records: Vec<String> = Vec::new();

    // level 1: parameter record types and directly called functions
    let mut queue: VecDeque<(String, u32)> = VecDeque::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    if depths.input_depth >= 1 {
        let mut first = Vec::new();
        for p in &decl.params {
            record_types(&p.ty, &mut first);
        }
        for name in first {
            if seen.insert(name.clone()) {
                queue.push_back((name, 1));
            }
        }
    }
    while let Some((name, level)) = queue.pop_front() {
        let Some(rec) = program.record_decl(&name) else {
            continue;
        };
        signatures.push((name.clone(), render_record(rec)));
        records.push(name.clone());
        if level < depths.input_depth {
            let mut next = Vec::new();
            for f in &rec.fields {
                record_types(&f.ty, &mut next);
            }
            for n in next {
                if seen.insert(n.clone()) {
                    queue.push_back((n, level + 1));
                }
            }
        }
    }
    if depths.input_depth >= 1 {
        let mut called = BTreeSet::new();
        for callee in called_functions(&decl.body) {
            if callee == uut || !called.insert(callee.clone()) {
                continue;
            }
            if let Some(f) = program.function(&callee) {
                signatures.push((callee.clone(), render_signature(f)));
            }
        }
    }

    let mut relations = Vec::new();
    let mut related: BTreeSet<(String, String)> = BTreeSet::new();
    for root in &records {
        let mut frontier = vec![root.clone()];
        for _ in 0..depths.polymorphism_depth {
            let mut next = Vec::new();
            for sup in &frontier {
                for sub in program.direct_subtypes(sup) {
                    if related.insert((sup.clone(), sub.to_string())) {
                        relations.push((sup.clone(), sub.to_string()));
                    }
                    next.push(sub.to_string());
                }
            }
            frontier = next;
        }
    }

    Ok(PromptContext {
        problem_description: format!("Write unit tests for the MiniLang function `{uut}`."),
        uut_code: render_function(decl),
        dependency_signatures: signatures,
        subtype_relations: relations,
        target_statement: None,
    })
}

fn statement_at(block: &Block, line: Line) -> Option<String> {
    for stmt in &block.stmts {
        if stmt.line == line {
            return Some(render_statement_head(stmt));
        }
        let inner = match &stmt.kind {
            StmtKind::If {
                then_block,
                else_block,
                ..
            } => statement_at(then_block, line)
                .or_else(|| else_block.as_ref().and_then(|b| statement_at(b, line))),
            StmtKind::While { body, .. } => statement_at(body, line),
            _ => None,
        };
        if inner.is_some() {
            return inner;
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuiltPrompt {
    pub messages: Vec<ChatMessage>,
    pub depths: PromptDepths,
    pub tokens: usize,
    /// Every `(depths, tokens)` pair tried, in order.
    pub attempts: Vec<(PromptDepths, usize)>,
}

pub fn prompt_tokens(messages: &[ChatMessage], tokenizer: &dyn Tokenizer) -> usize {
    let text: Vec<&str> = messages.iter().map(|m| m.content.as_str()).collect();
    tokenizer.count(&text.join("\n"))
}

/// Renders the prompt at `initial` depths and lowers them until it fits in
/// `budget` tokens.
pub fn build_prompt(
    program: &TypedProgram,
    request: &PromptRequest,
    template: &PromptTemplate,
    initial: PromptDepths,
    budget: usize,
    tokenizer: &dyn Tokenizer,
) -> Result<BuiltPrompt, LlmError> {
    let mut depths = initial;
    let mut attempts = Vec::new();
    loop {
        let mut context = gather_context(program, &request.uut, depths)?;
        if let Some(line) = request.target_line {
            context.target_statement = program
                .function(&request.uut)
                .and_then(|f| statement_at(&f.body, line));
        }
        let messages = template.render(request, &context);
        let tokens = prompt_tokens(&messages, tokenizer);
        attempts.push((depths, tokens));
        if tokens <= budget {
            return Ok(BuiltPrompt {
                messages,
                depths,
                tokens,
                attempts,
            });
        }
        match depths.decrement() {
            Some(d) => depths = d,
            None => {
                return Err(LlmError::PromptTooLarge(format!(
                    "the prompt needs {tokens} tokens even without dependency context (budget {budget}); {SMALLER_UNIT_HINT}"
                )))
            }
        }
    }
}
