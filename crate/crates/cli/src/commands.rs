use std::path::{Path, PathBuf};
use std::sync::Mutex;

use forgespark_core::unit::Uut;
use forgespark_service::project::relative_path;
use forgespark_service::report::ReportTest;
use forgespark_service::{
    apply_to_suite, generate as run_generation, load_project, ApplyDestination, ApplyError,
    EventKind, FailureKind, ForgeConfig, Report, Session, SessionManager, Telemetry,
};

use crate::flags::resolve_config;
use crate::{ApplyArgs, GenerateArgs, ServeArgs};

pub const EXIT_OK: u8 = 0;
pub const EXIT_SERVE: u8 = 1;
pub const EXIT_ERROR: u8 = 2;
pub const EXIT_FALLBACK: u8 = 3;

pub struct Outcome {
    pub code: u8,
    pub message: String,
}

fn fail(code: u8, message: impl Into<String>) -> Outcome {
    Outcome {
        code,
        message: format!("error: {}", message.into()),
    }
}

fn project_root(project: &Path) -> Result<PathBuf, Outcome> {
    project
        .canonicalize()
        .ok()
        .filter(|p| p.is_dir())
        .ok_or_else(|| {
            fail(
                EXIT_ERROR,
                format!("project '{}' is not a directory", project.display()),
            )
        })
}

fn config_for(
    root: &Path,
    env: &dyn Fn(&str) -> Option<String>,
    flags: &crate::ConfigFlags,
) -> Result<ForgeConfig, Outcome> {
    resolve_config(root, env, flags).map_err(|e| fail(EXIT_ERROR, format!("configuration: {e}")))
}

pub fn generate(args: GenerateArgs, env: &dyn Fn(&str) -> Option<String>) -> Outcome {
    let root = match project_root(&args.project) {
        Ok(r) => r,
        Err(o) => return o,
    };
    let config = match config_for(&root, env, &args.config) {
        Ok(c) => c,
        Err(o) => return o,
    };
    let absolute = if args.file.is_absolute() {
        args.file.clone()
    } else {
        root.join(&args.file)
    };
    let Some(file) = relative_path(&root, &absolute) else {
        return fail(
            EXIT_ERROR,
            format!("'{}' is outside the project", args.file.display()),
        );
    };
    let uut = match (args.function, args.line) {
        (function, Some(line)) => Uut::Line {
            file,
            line,
            function,
        },
        (Some(function), None) => Uut::Function { file, function },
        (None, None) => Uut::File { file },
    };
    let telemetry = Telemetry::new(&root, config.telemetry.enabled);
    let handle = Mutex::new(Session::new(
        "s1".to_string(),
        &root,
        uut,
        args.technique,
        config,
    ));
    run_generation(&telemetry, &handle);
    let session = handle.into_inner().unwrap_or_else(|e| e.into_inner());
    if let Some((kind, message)) = session.error() {
        let code = if kind == FailureKind::Fallback {
            EXIT_FALLBACK
        } else {
            EXIT_ERROR
        };
        return fail(code, message);
    }
    let Some(report) = Report::from_session(&session) else {
        return fail(EXIT_ERROR, "generation did not finish");
    };
    if let Err(e) = std::fs::write(&args.out, report.to_json()) {
        return fail(
            EXIT_ERROR,
            format!("cannot write report '{}': {e}", args.out.display()),
        );
    }
    let passing = report
        .tests
        .iter()
        .filter(|t| t.status == "passing")
        .count();
    Outcome {
        code: EXIT_OK,
        message: format!(
            "{} tests ({passing} passing), report written to {}",
            report.tests.len(),
            args.out.display()
        ),
    }
}

pub fn serve(args: ServeArgs, env: &dyn Fn(&str) -> Option<String>) -> Outcome {
    let root = match project_root(&args.project) {
        Ok(r) => r,
        Err(o) => return o,
    };
    let config = match config_for(&root, env, &args.config) {
        Ok(c) => c,
        Err(o) => return o,
    };
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(r) => r,
        Err(e) => return fail(EXIT_SERVE, format!("cannot start runtime: {e}")),
    };
    let port = config.service.port;
    runtime.block_on(async move {
        let listener = match tokio::net::TcpListener::bind(("127.0.0.1", port)).await {
            Ok(l) => l,
            Err(e) => return fail(EXIT_SERVE, format!("cannot bind port {port}: {e}")),
        };
        let url = match listener.local_addr() {
            Ok(addr) => format!("http://{addr}/"),
            Err(e) => return fail(EXIT_SERVE, e.to_string()),
        };
        println!("{url}");
        let manager = SessionManager::new(&root, config);
        match forgespark_service::http::serve(listener, manager).await {
            Ok(()) => Outcome {
                code: EXIT_OK,
                message: format!("stopped serving {url}"),
            },
            Err(e) => fail(EXIT_SERVE, format!("server failed: {e}")),
        }
    })
}

pub fn apply(args: ApplyArgs, env: &dyn Fn(&str) -> Option<String>) -> Outcome {
    let root = match project_root(&args.project) {
        Ok(r) => r,
        Err(o) => return o,
    };
    let config = match config_for(&root, env, &args.config) {
        Ok(c) => c,
        Err(o) => return o,
    };
    let report: Report = match std::fs::read_to_string(&args.report)
        .map_err(|e| e.to_string())
        .and_then(|t| serde_json::from_str(&t).map_err(|e| e.to_string()))
    {
        Ok(r) => r,
        Err(e) => {
            return fail(
                EXIT_ERROR,
                format!("cannot read report '{}': {e}", args.report.display()),
            )
        }
    };
    let chosen: Vec<&ReportTest> = if args.select.is_empty() {
        report.tests.iter().collect()
    } else {
        let mut chosen = Vec::new();
        for id in &args.select {
            match report.tests.iter().find(|t| &t.id == id) {
                Some(t) => chosen.push(t),
                None => return fail(EXIT_ERROR, format!("unknown test id '{id}'")),
            }
        }
        chosen
    };
    let destination = match (args.dest_new, args.dest_existing) {
        (Some(parts), _) => ApplyDestination::NewFile {
            directory: PathBuf::from(&parts[0]),
            class_name: parts[1].clone(),
        },
        (None, Some(path)) => ApplyDestination::ExistingFile { path },
        (None, None) => return fail(EXIT_ERROR, "no destination given"),
    };
    let project = match load_project(&root) {
        Ok(p) => p,
        Err(e) => return fail(EXIT_ERROR, e.to_string()),
    };
    let codes: Vec<String> = chosen.iter().map(|t| t.code.clone()).collect();
    match apply_to_suite(&project, &codes, &destination) {
        Ok(applied) => {
            Telemetry::new(&root, config.telemetry.enabled).record(EventKind::TestsIntegrated {
                count: applied.tests.len(),
                technique: report.technique,
            });
            Outcome {
                code: EXIT_OK,
                message: format!(
                    "applied {} tests to {}: {}",
                    applied.tests.len(),
                    applied.path.display(),
                    applied.tests.join(", ")
                ),
            }
        }
        Err(ApplyError::DoesNotCompile { index, message }) => fail(
            EXIT_ERROR,
            format!("test '{}' does not compile: {message}", chosen[index].id),
        ),
        Err(e) => fail(EXIT_ERROR, e.to_string()),
    }
}
