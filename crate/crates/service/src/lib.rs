//! Session orchestration for test generation: project loading, generation
//! sessions, test review operations, suite integration, telemetry and the
//! HTTP API.

pub mod apply;
pub mod config;
pub mod http;
pub mod manager;
pub mod project;
pub mod report;
pub mod session;
pub mod telemetry;

pub use apply::{apply_to_suite, Applied, ApplyDestination, ApplyError};
pub use config::{ConfigError, ForgeConfig};
pub use manager::{CreateSession, SessionManager};
pub use project::{load_project, Project, ProjectError};
pub use report::Report;
pub use session::{generate, FailureKind, Phase, Session, SessionError, TestEntry};
pub use telemetry::{EventKind, Region, Telemetry, TelemetryEvent};
