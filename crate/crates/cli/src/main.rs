//! `forgespark`: headless generation, the review service, and scripted apply.

mod commands;
mod flags;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use forgespark_core::unit::Technique;

use flags::ConfigFlags;

#[derive(Parser)]
#[command(
    name = "forgespark",
    version,
    about = "Unit-test generation for MiniLang projects"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate tests for a unit and write the coverage report.
    Generate(GenerateArgs),
    /// Serve the review page and the session API.
    Serve(ServeArgs),
    /// Integrate tests from a report into the project.
    Apply(ApplyArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value = ".")]
    project: PathBuf,
    /// Source file of the unit, relative to the project.
    #[arg(long)]
    file: PathBuf,
    #[arg(long)]
    function: Option<String>,
    /// Target a single line; with --function the line must lie in it.
    #[arg(long)]
    line: Option<u32>,
    #[arg(long, value_parser = parse_technique)]
    technique: Technique,
    /// Report destination.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigFlags,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = ".")]
    project: PathBuf,
    #[command(flatten)]
    config: ConfigFlags,
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("dest").required(true).args(["dest_new", "dest_existing"])))]
struct ApplyArgs {
    #[arg(long, default_value = ".")]
    project: PathBuf,
    /// Report written by `generate`.
    #[arg(long)]
    report: PathBuf,
    /// Comma-separated test ids; all tests when omitted.
    #[arg(long, value_delimiter = ',')]
    select: Vec<String>,
    /// New test file: directory and file name without extension.
    #[arg(long, num_args = 2, value_names = ["DIR", "NAME"])]
    dest_new: Option<Vec<String>>,
    /// Existing project file to append to.
    #[arg(long)]
    dest_existing: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigFlags,
}

fn parse_technique(s: &str) -> Result<Technique, String> {
    match s {
        "sbst" => Ok(Technique::Sbst),
        "llm" => Ok(Technique::Llm),
        _ => Err(format!("unknown technique '{s}' (expected sbst or llm)")),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_max_level(tracing_subscriber::filter::LevelFilter::WARN)
        .init();
    let cli = Cli::parse();
    let env = |name: &str| std::env::var(name).ok();
    let outcome = match cli.command {
        Command::Generate(a) => commands::generate(a, &env),
        Command::Serve(a) => commands::serve(a, &env),
        Command::Apply(a) => commands::apply(a, &env),
    };
    eprintln!("{}", outcome.message);
    ExitCode::from(outcome.code)
}
