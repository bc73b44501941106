use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fixmk::{run_source, Command, Mode, Overrides, Report, Stage, Status};

#[derive(Parser)]
#[command(
    name = "fixmk",
    version,
    about = "Common fixed points of affine semigroups on polytopes"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Validate a structure and compute a common fixed point.
    Solve(Common),
    /// Validate a structure, optionally sampling the intersection property.
    Check(Common),
    /// Compute an invariant norm-preserving extension.
    Extend(Common),
    /// Sample the finite intersection property.
    Fip(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Args)]
struct Common {
    /// Problem file (JSON).
    path: PathBuf,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    n_max: Option<u64>,
    #[arg(long)]
    word_budget: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("FIXMK_LOG")).init();
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Sub::Solve(a) => (Command::Solve, a),
        Sub::Check(a) => (Command::Check, a),
        Sub::Extend(a) => (Command::Extend, a),
        Sub::Fip(a) => (Command::Fip, a),
    };
    let overrides = Overrides {
        tol: args.tol,
        n_max: args.n_max,
        word_budget: args.word_budget,
        seed: args.seed,
        mode: args.mode,
    };
    let report = match std::fs::read_to_string(&args.path) {
        Ok(source) => run_source(command, &source, &overrides),
        Err(e) => Report::new(Status::Failed, Stage::Parse, serde_json::Value::Null)
            .with_message(format!("cannot read {}: {e}", args.path.display())),
    };
    if report.status != Status::Ok {
        if let Some(msg) = &report.message {
            log::warn!("{msg}");
        }
    }
    let rendered = match args.format {
        Format::Json => report.to_json(),
        Format::Text => report.to_text(),
    };
    match &args.output {
        Some(path) => {
            if let Err(e) = std::fs::write(path, rendered) {
                eprintln!("fixmk: cannot write {}: {e}", path.display());
                return ExitCode::from(1);
            }
        }
        None => print!("{rendered}"),
    }
    ExitCode::from(report.exit_code() as u8)
}
