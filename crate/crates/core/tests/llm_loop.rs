use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::Path;

use forgespark_core::llm::{
    modification_request, repair_loop, well_formed, ChatMessage, ChatProvider, LlmError,
    OpenAiConfig, OpenAiProvider, PromptDepths, PromptRequest, PromptTemplate, ProviderError,
    RepairLoopConfig, Role, ScriptedProvider, Terminal,
};
use minilang::{compile, TypedProgram};

const PROJECT: &str = "fn inc(x: int) -> int {
    return x + 1;
}
fn abs(x: int) -> int {
    if (x < 0) {
        return -x;
    }
    return x;
}
";

fn script(dir: &Path, replies: &[&str]) {
    for (i, r) in replies.iter().enumerate() {
        std::fs::write(ScriptedProvider::reply_path(dir, i + 1), r).unwrap();
    }
}

fn fenced(body: &str) -> String {
    format!("Here are the tests.\n```minilang\n{body}\n```\n")
}

fn run(
    typed: &TypedProgram,
    replies: &[&str],
    max_iterations: u32,
) -> (
    Result<forgespark_core::llm::FeedbackOutcome, LlmError>,
    ScriptedProvider,
) {
    let dir = tempfile::tempdir().unwrap();
    script(dir.path(), replies);
    let mut provider = ScriptedProvider::new(dir.path());
    let config = RepairLoopConfig {
        max_iterations,
        ..RepairLoopConfig::default()
    };
    let out = repair_loop(
        typed,
        &PromptRequest::function("abs"),
        &PromptTemplate::default(),
        PromptDepths::default(),
        &config,
        &mut provider,
    );
    (out, provider)
}

/// Independent check: the saved code typechecks when appended to the project
/// source text.
fn recheck(code: &str) -> bool {
    compile(&format!("{PROJECT}\n{code}")).is_ok()
}

#[test]
fn repair_iteration_fixes_broken_tests() {
    let typed = compile(PROJECT).unwrap();
    let r1 = fenced(
        "test fn test_pos() {\n    assert abs(3) == 3;\n}\ntest fn test_neg() {\n    assert abss(-3) == 3;\n}\ntest fn test_zero() {\n    assert abs(0);\n}",
    );
    let r2 = fenced("test fn test_neg() {\n    assert abs(-3) == 3;\n}\ntest fn test_zero() {\n    assert abs(0) == 0;\n}");
    let (out, provider) = run(&typed, &[&r1, &r2], 3);
    let out = out.unwrap();
    assert_eq!(out.terminal, Terminal::AllSaved);
    assert_eq!(out.iterations_used, 2);
    let names: Vec<&str> = out.saved.iter().map(|c| c.name.as_str()).collect();
    assert_eq!(names, ["test_pos", "test_neg", "test_zero"]);
    assert!(out.saved.iter().all(|c| recheck(&c.code)));
    assert!(well_formed(&out.conversation));
    // the repair request carries only the two failing tests and their errors
    let repair = &provider.requests[1].last().unwrap().content;
    assert_eq!(provider.requests[1].last().unwrap().role, Role::User);
    assert!(repair.contains("abss") && repair.contains("unknown function 'abss'"));
    assert!(repair.contains("test_zero") && !repair.contains("test_pos"));
}

#[test]
fn all_broken_with_one_iteration() {
    let typed = compile(PROJECT).unwrap();
    let r1 = fenced("test fn test_a() {\n    assert nope(1) == 2;\n}");
    let (out, provider) = run(&typed, &[&r1, &r1], 1);
    let out = out.unwrap();
    assert_eq!(out.terminal, Terminal::BudgetExhaustedWithNone);
    assert!(out.saved.is_empty());
    assert!(out
        .message
        .unwrap()
        .contains("try generating tests for a smaller unit (function or line)"));
    assert_eq!(provider.replies_used(), 1);
}

#[test]
fn all_good_first_time() {
    let typed = compile(PROJECT).unwrap();
    let r1 = fenced("test fn test_a() {\n    assert abs(-1) == 1;\n}");
    let (out, _) = run(&typed, &[&r1], 3);
    let out = out.unwrap();
    assert_eq!(
        (out.terminal, out.iterations_used, out.saved.len()),
        (Terminal::AllSaved, 1, 1)
    );
}

#[test]
fn mixed_keeps_compiling_tests() {
    let typed = compile(PROJECT).unwrap();
    let r = fenced("test fn test_a() {\n    assert abs(-1) == 1;\n}\ntest fn test_b() {\n    assert abs(true) == 1;\n}");
    let (out, _) = run(&typed, &[&r, &r, &r], 2);
    let out = out.unwrap();
    assert_eq!(out.terminal, Terminal::BudgetExhaustedWithSome);
    assert_eq!(out.iterations_used, 2);
    // the repeated compiling test is saved once
    assert_eq!(out.saved.len(), 1);
}

#[test]
fn empty_reply_then_fix() {
    let typed = compile(PROJECT).unwrap();
    let r2 = fenced("test fn test_a() {\n    assert inc(1) == 2;\n}");
    let (out, provider) = run(&typed, &["Sorry, no idea.", &r2], 2);
    let out = out.unwrap();
    assert_eq!(out.terminal, Terminal::AllSaved);
    assert!(provider.requests[1]
        .last()
        .unwrap()
        .content
        .contains("did not contain any MiniLang test"));
}

#[test]
fn provider_failure_keeps_saved_tests() {
    let typed = compile(PROJECT).unwrap();
    let r1 = fenced("test fn test_a() {\n    assert abs(-1) == 1;\n}\ntest fn test_b() {\n    assert ab(1) == 1;\n}");
    let (out, _) = run(&typed, &[&r1], 3);
    match out.unwrap_err() {
        LlmError::Provider { source, saved } => {
            assert_eq!(source, ProviderError::ScriptExhausted);
            assert_eq!(saved.len(), 1);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn same_name_in_later_iteration_is_renamed() {
    let typed = compile(PROJECT).unwrap();
    let r1 = fenced("test fn test_a() {\n    assert abs(-1) == 1;\n}\ntest fn test_b() {\n    assert ab(1) == 1;\n}");
    let r2 = fenced("test fn test_a() {\n    assert abs(1) == 1;\n}");
    let (out, _) = run(&typed, &[&r1, &r2], 3);
    let names: Vec<String> = out.unwrap().saved.into_iter().map(|c| c.name).collect();
    assert_eq!(names, ["test_a", "test_a_2"]);
}

#[test]
fn modification_versions() {
    let typed = compile(PROJECT).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let v2 = fenced("test fn test_a() {\n    // negative input\n    assert abs(-1) == 1;\n}");
    let v3 = fenced("test fn test_a() {\n    // negative input\n    assert abs(-1) == 1;\n    assert abs(-2) == 2;\n}");
    script(
        dir.path(),
        &[
            &v2,
            &v3,
            "```\ntest fn test_a() {\n    assert abs(-1 == 1;\n}\n```",
        ],
    );
    let mut provider = ScriptedProvider::new(dir.path());
    let config = RepairLoopConfig {
        max_iterations: 1,
        ..RepairLoopConfig::default()
    };
    let original = "test fn test_a() {\n    assert abs(-1) == 1;\n}\n";
    let mut versions = vec![original.to_string()];
    for instruction in ["add comments", "add another check"] {
        let latest = versions.last().unwrap().clone();
        let next = modification_request(
            &typed,
            &latest,
            instruction,
            &PromptTemplate::default(),
            &config,
            &mut provider,
        )
        .unwrap();
        versions.push(next.code);
    }
    assert_eq!(versions.len(), 3);
    assert!(versions[2].contains("abs(-2)"));
    assert!(provider.requests[0][1].content.contains("add comments"));
    let err = modification_request(
        &typed,
        &versions[2],
        "break it",
        &PromptTemplate::default(),
        &config,
        &mut provider,
    );
    assert!(matches!(err, Err(LlmError::NoCompilingTests(_))));
}

/// Serves one canned HTTP response and hands back the raw request.
fn stub_server(status: &str, body: &str) -> (String, std::thread::JoinHandle<String>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let response = format!(
        "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    let handle = std::thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut head = String::new();
        let mut length = 0;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                length = v.trim().parse().unwrap();
            }
            head.push_str(&line);
            if line == "\r\n" {
                break;
            }
        }
        let mut body = vec![0; length];
        reader.read_exact(&mut body).unwrap();
        let mut stream = stream;
        stream.write_all(response.as_bytes()).unwrap();
        head + &String::from_utf8(body).unwrap()
    });
    (url, handle)
}

#[test]
fn wire_round_trip() {
    let canned = "```\ntest fn test_x() {\n    assert inc(1) == 2;\n}\n```";
    let body = serde_json::json!({"id": "x", "choices": [{"index": 0, "message": {"role": "assistant", "content": canned}}]});
    let (url, server) = stub_server("200 OK", &body.to_string());
    let mut provider = OpenAiProvider::new(OpenAiConfig {
        base_url: url,
        model: "test-model".into(),
        temperature: 0.0,
        token: Some("secret".into()),
        timeout_secs: 10,
    });
    let reply = provider
        .send(&[ChatMessage::system("s"), ChatMessage::user("u")])
        .unwrap();
    assert_eq!(reply.content, canned);
    let request = server.join().unwrap();
    assert!(
        request.starts_with("POST /v1/chat/completions HTTP/1.1\r\n"),
        "{request}"
    );
    let lower = request.to_ascii_lowercase();
    assert!(lower.contains("authorization: bearer secret\r\n"));
    assert!(lower.contains("content-type: application/json\r\n"));
    assert!(request.ends_with(
        r#"{"model":"test-model","temperature":0.0,"messages":[{"role":"system","content":"s"},{"role":"user","content":"u"}]}"#
    ));
}

#[test]
fn unauthorized_is_reported() {
    let (url, server) = stub_server("401 Unauthorized", r#"{"error":"bad key"}"#);
    let mut provider = OpenAiProvider::new(OpenAiConfig {
        base_url: url,
        ..OpenAiConfig::default()
    });
    let err = provider.send(&[ChatMessage::user("u")]).unwrap_err();
    assert_eq!(err, ProviderError::Authentication);
    assert_eq!(err.to_string(), "authentication");
    server.join().unwrap();
}

#[test]
fn missing_content_is_malformed() {
    let (url, server) = stub_server("200 OK", r#"{"choices":[]}"#);
    let mut provider = OpenAiProvider::new(OpenAiConfig {
        base_url: url,
        ..OpenAiConfig::default()
    });
    assert!(matches!(
        provider.send(&[ChatMessage::user("u")]),
        Err(ProviderError::Malformed(_))
    ));
    server.join().unwrap();
}
