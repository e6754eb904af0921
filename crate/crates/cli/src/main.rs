use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod output;

/// Planning, simulation and accuracy evaluation for pelvic tumor resections.
#[derive(Parser)]
#[command(name = "osteoplan", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan four margin planes around a virtual tumor on the hip center.
    Plan(PlanArgs),
    /// Design the modular jig for a plan and fit it onto the bone.
    Jig(JigArgs),
    /// Run a simulated fiducial registration session.
    Register(RegisterArgs),
    /// Execute plans with a sampled execution-error model.
    Simulate(SimulateArgs),
    /// Metrics, summary and margin table for one results file.
    Evaluate(EvaluateArgs),
    /// Compare two results files, with rank-sum tests per metric.
    Compare(CompareArgs),
    /// Full synthetic two-arm study on the built-in cohort.
    Demo(DemoArgs),
}

fn non_negative(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(v),
        Ok(v) => Err(format!("{v} must be finite and non-negative")),
        Err(e) => Err(e.to_string()),
    }
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(v) => Err(format!("{v} must be finite and positive")),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Clone, Copy, ValueEnum)]
pub enum YSign {
    RightToLeft,
    LeftToRight,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Source {
    Analytic,
    Refit,
}

#[derive(Args)]
pub struct PlanArgs {
    /// Bone surface (STL or PLY).
    #[arg(long)]
    pub mesh: PathBuf,
    /// Landmarks JSON.
    #[arg(long)]
    pub landmarks: PathBuf,
    /// Tumor radius (mm).
    #[arg(long, default_value_t = 25.0, value_parser = positive)]
    pub radius: f64,
    /// Safety margin (mm).
    #[arg(long, default_value_t = 5.0, value_parser = non_negative)]
    pub margin: f64,
    #[arg(long, value_enum, default_value_t = YSign::RightToLeft)]
    pub y_sign: YSign,
    /// Plan file to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub allow_findings: bool,
}

#[derive(Args)]
pub struct JigArgs {
    #[arg(long)]
    pub plan: PathBuf,
    /// Bone mesh; defaults to the one recorded in the plan.
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    /// Component catalog; defaults to $OSTEOPLAN_CATALOG, then the built-in one.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// Placement report to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the plan with the pattern target pose filled in.
    #[arg(long)]
    pub plan_out: Option<PathBuf>,
}

#[derive(Args)]
pub struct RegisterArgs {
    #[arg(long)]
    pub session: PathBuf,
    /// Overrides the session's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Plan files; each trial seed is derived from --seed.
    #[arg(long, conflicts_with = "manifest")]
    pub plan: Vec<PathBuf>,
    /// Batch manifest listing plan files with their seeds.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Bone mesh for a single --plan.
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    /// Preset name (freehand, guided, zero) or error-model JSON.
    #[arg(long)]
    pub model: String,
    /// Method tag; defaults to the model's name.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Saw kerf (mm).
    #[arg(long, value_parser = non_negative)]
    pub kerf: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Fail on void cuts.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long, value_enum, default_value_t = Source::Analytic)]
    pub source: Source,
    #[arg(long)]
    pub out: PathBuf,
    /// Write a distance heatmap PLY per plane.
    #[arg(long)]
    pub heatmaps: bool,
}

#[derive(Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long, value_enum, default_value_t = Source::Analytic)]
    pub source: Source,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub heatmaps: bool,
}

#[derive(Args)]
pub struct DemoArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub heatmaps: bool,
    #[arg(long, value_enum, default_value_t = Source::Analytic)]
    pub source: Source,
}

/// A failed command and its exit status: 1 usage, 2 validation, 3 I/O.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Validation(String),
    Io(String),
}

impl Failure {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Failure::Io(format!("{}: {e}", path.display()))
    }

    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Validation(_) => 2,
            Failure::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage: {m}"),
            Failure::Validation(m) => write!(f, "invalid input: {m}"),
            Failure::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<osteoplan::Error> for Failure {
    fn from(e: osteoplan::Error) -> Self {
        match e {
            osteoplan::Error::Io { .. } => Failure::Io(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Plan(a) => commands::plan(a),
        Command::Jig(a) => commands::jig(a),
        Command::Register(a) => commands::register(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Compare(a) => commands::compare(a),
        Command::Demo(a) => commands::demo(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("osteoplan: {f}");
            ExitCode::from(f.code())
        }
    }
}
