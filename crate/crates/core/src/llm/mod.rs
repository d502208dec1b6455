//! LLM-based test generation: prompt construction, provider calls, reply
//! parsing and the compile-error repair loop.

pub mod prompt;
pub mod provider;
pub mod response;

use std::collections::BTreeSet;

use minilang::TypedProgram;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use prompt::{
    build_prompt, gather_context, BuiltPrompt, ByteHeuristic, PromptContext, PromptDepths,
    PromptRequest, PromptTemplate, Tokenizer,
};
pub use provider::{ChatProvider, OpenAiConfig, OpenAiProvider, ProviderError, ScriptedProvider};
pub use response::{check_candidate, parse_response, CompileStatus, ParsedResponse, TestCandidate};

pub const SMALLER_UNIT_HINT: &str = "try generating tests for a smaller unit (function or line)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: &str) -> Self {
        ChatMessage {
            role: Role::System,
            content: content.to_string(),
        }
    }

    pub fn user(content: &str) -> Self {
        ChatMessage {
            role: Role::User,
            content: content.to_string(),
        }
    }

    pub fn assistant(content: &str) -> Self {
        ChatMessage {
            role: Role::Assistant,
            content: content.to_string(),
        }
    }
}

/// Roles alternate user/assistant after an optional leading system message.
pub fn well_formed(conversation: &[ChatMessage]) -> bool {
    let rest = match conversation.first() {
        Some(m) if m.role == Role::System => &conversation[1..],
        _ => conversation,
    };
    rest.iter().enumerate().all(|(i, m)| {
        m.role
            == if i % 2 == 0 {
                Role::User
            } else {
                Role::Assistant
            }
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmError {
    #[error("unknown function '{0}'")]
    UnknownFunction(String),
    #[error("{0}")]
    PromptTooLarge(String),
    #[error("the response contained no test functions")]
    EmptyResponse,
    #[error("{0}")]
    NoCompilingTests(String),
    #[error("{source}")]
    Provider {
        source: ProviderError,
        /// Tests saved before the provider failed.
        saved: Vec<TestCandidate>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairLoopConfig {
    pub max_iterations: u32,
    pub token_budget: usize,
    pub temperature: f64,
    pub model: String,
}

impl Default for RepairLoopConfig {
    fn default() -> Self {
        RepairLoopConfig {
            max_iterations: 3,
            token_budget: 4_000,
            temperature: 0.2,
            model: "gpt-4o".to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminal {
    AllSaved,
    BudgetExhaustedWithSome,
    BudgetExhaustedWithNone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackOutcome {
    pub saved: Vec<TestCandidate>,
    pub iterations_used: u32,
    pub terminal: Terminal,
    /// Set for `BudgetExhaustedWithNone`.
    pub message: Option<String>,
    pub conversation: Vec<ChatMessage>,
    pub final_depths: Option<PromptDepths>,
}

fn repair_message(failing: &[TestCandidate], empty_reply: bool) -> String {
    if empty_reply {
        return "Your reply did not contain any MiniLang test functions. Reply with a single fenced code block containing `test fn` declarations.".to_string();
    }
    let mut out = String::from(
        "The following tests do not compile. Fix them and reply with a single fenced code block containing only the corrected tests.\n",
    );
    for c in failing {
        out.push_str(&format!("\n```\n{}```\nErrors:\n", c.code));
        for e in c.errors() {
            out.push_str(&format!("- {e}\n"));
        }
    }
    out
}

/// Sends `conversation`, checks every returned candidate and asks for fixes
/// until all compile or `max_iterations` replies have been processed.
pub fn converse(
    program: &TypedProgram,
    mut conversation: Vec<ChatMessage>,
    max_iterations: u32,
    provider: &mut dyn ChatProvider,
) -> Result<FeedbackOutcome, LlmError> {
    let max_iterations = max_iterations.max(1);
    let mut saved: Vec<TestCandidate> = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut current = program.clone();
    let mut iterations = 0;
    let mut clean = false;
    while iterations < max_iterations {
        let reply = match provider.send(&conversation) {
            Ok(r) => r,
            Err(source) => return Err(LlmError::Provider { source, saved }),
        };
        iterations += 1;
        let content = reply.content.clone();
        conversation.push(ChatMessage {
            role: Role::Assistant,
            content,
        });
        let (failing, empty) = match parse_response(&reply.content) {
            Ok(parsed) => {
                let mut failing = Vec::new();
                for c in parsed.candidates {
                    let key = c.normalized_code();
                    if seen.contains(&key) {
                        continue;
                    }
                    let (checked, extended) = response::check_candidate_in(&current, &c);
                    match extended {
                        Some(p) => {
                            seen.insert(key);
                            current = p;
                            saved.push(checked);
                        }
                        None => failing.push(checked),
                    }
                }
                (failing, false)
            }
            Err(_) => (Vec::new(), true),
        };
        if failing.is_empty() && !empty {
            clean = true;
            break;
        }
        if iterations < max_iterations {
            conversation.push(ChatMessage::user(&repair_message(&failing, empty)));
        }
    }
    let terminal = if clean {
        Terminal::AllSaved
    } else if saved.is_empty() {
        Terminal::BudgetExhaustedWithNone
    } else {
        Terminal::BudgetExhaustedWithSome
    };
    let message = (terminal == Terminal::BudgetExhaustedWithNone)
        .then(|| format!("no generated test compiles; {SMALLER_UNIT_HINT}"));
    Ok(FeedbackOutcome {
        saved,
        iterations_used: iterations,
        terminal,
        message,
        conversation,
        final_depths: None,
    })
}

pub fn repair_loop(
    program: &TypedProgram,
    request: &PromptRequest,
    template: &PromptTemplate,
    depths: PromptDepths,
    config: &RepairLoopConfig,
    provider: &mut dyn ChatProvider,
) -> Result<FeedbackOutcome, LlmError> {
    let built = build_prompt(
        program,
        request,
        template,
        depths,
        config.token_budget,
        &ByteHeuristic,
    )?;
    let mut outcome = converse(program, built.messages, config.max_iterations, provider)?;
    outcome.final_depths = Some(built.depths);
    Ok(outcome)
}

/// Asks the model to rewrite one test according to `instruction` and returns
/// the new compiling version.
pub fn modification_request(
    program: &TypedProgram,
    test_code: &str,
    instruction: &str,
    template: &PromptTemplate,
    config: &RepairLoopConfig,
    provider: &mut dyn ChatProvider,
) -> Result<TestCandidate, LlmError> {
    let user = format!(
        "Modify the following MiniLang test as requested.\n\nREQUEST\n{instruction}\n\nTEST\n```\n{}\n```\n\nReply with a single fenced code block containing the modified test.",
        test_code.trim_end()
    );
    let conversation = vec![
        ChatMessage::system(&template.system),
        ChatMessage::user(&user),
    ];
    let outcome = converse(program, conversation, config.max_iterations, provider)?;
    outcome.saved.into_iter().next().ok_or_else(|| {
        LlmError::NoCompilingTests(
            outcome.message.unwrap_or_else(|| {
                format!("the modified test does not compile; {SMALLER_UNIT_HINT}")
            }),
        )
    })
}
