//! Command-line interface for the vgeval toolkit.
//!
//! Three subcommands cover the pipeline: `validate` checks an annotation
//! file and prints its composition, `normalize` converts raw model output
//! into canonical predictions, and `eval` scores a prediction file and
//! renders a report.
//!
//! Exit codes: `0` success, `2` unusable input or configuration, `3` run
//! completed but some predictions were unparseable (they score zero).

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use vgeval_core::adapters::Dialect;
use vgeval_core::dataset::{self, Task};
use vgeval_core::report::{self, EvalConfig, EvalStatus};

/// Environment variable consulted for the worker count when no flag is
/// given.
const WORKERS_ENV: &str = "VGEVAL_WORKERS";

#[derive(Parser)]
#[command(
    name = "vgeval",
    version,
    about = "Evaluate video grounding predictions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score a prediction file against annotations and render a report.
    Eval(EvalArgs),
    /// Check an annotation file and print its composition.
    Validate(ValidateArgs),
    /// Convert raw model output into canonical prediction lines.
    Normalize(NormalizeArgs),
}

#[derive(Copy, Clone, ValueEnum)]
enum TaskArg {
    /// Spatio-temporal grounding (box tubes).
    Stg,
    /// Temporal retrieval (time ranges).
    Tr,
    /// Character tracks (transcript segments with boxes).
    Char,
    /// Multiple-choice questions.
    Mc,
}

impl From<TaskArg> for Task {
    fn from(value: TaskArg) -> Self {
        match value {
            TaskArg::Stg => Task::Stg,
            TaskArg::Tr => Task::Tr,
            TaskArg::Char => Task::Char,
            TaskArg::Mc => Task::Mc,
        }
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum DialectArg {
    Vidi,
    Gemini,
    Gpt,
    Qwen,
}

impl From<DialectArg> for Dialect {
    fn from(value: DialectArg) -> Self {
        match value {
            DialectArg::Vidi => Dialect::Vidi,
            DialectArg::Gemini => Dialect::Gemini,
            DialectArg::Gpt => Dialect::Gpt,
            DialectArg::Qwen => Dialect::Qwen,
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Md,
    Csv,
    Json,
}

#[derive(Args)]
struct EvalArgs {
    /// Annotation file (JSONL).
    #[arg(long)]
    annotations: PathBuf,
    /// Prediction file (JSONL; raw payloads, canonical records, or a mix).
    #[arg(long)]
    predictions: PathBuf,
    /// Task to evaluate.
    #[arg(long, value_enum)]
    task: TaskArg,
    /// Dialect of raw prediction payloads.
    #[arg(long, value_enum)]
    dialect: Option<DialectArg>,
    /// Report format.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write threshold curves as CSV (tr runs only).
    #[arg(long)]
    curves_csv: Option<PathBuf>,
    /// Write threshold curves as SVG (tr runs only).
    #[arg(long)]
    curves_svg: Option<PathBuf>,
    /// Worker threads for scoring (never changes report bytes).
    #[arg(long)]
    workers: Option<usize>,
    /// TOML config file supplying defaults for workers/format/dialect.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Annotation file (JSONL).
    #[arg(long)]
    annotations: PathBuf,
    /// Report malformed lines as warnings and validate the rest, instead
    /// of failing on the first problem.
    #[arg(long)]
    lenient: bool,
}

#[derive(Args)]
struct NormalizeArgs {
    /// Prediction file to normalise (JSONL).
    #[arg(long)]
    predictions: PathBuf,
    /// Task the predictions answer.
    #[arg(long, value_enum)]
    task: TaskArg,
    /// Dialect of raw payloads.
    #[arg(long, value_enum)]
    dialect: DialectArg,
    /// Annotation file; required to derive gpt frame sampling (when records
    /// carry no context) and multiple-choice option lists.
    #[arg(long)]
    annotations: Option<PathBuf>,
    /// Write canonical lines here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Defaults loadable from a TOML file.
#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    workers: Option<usize>,
    format: Option<Format>,
    dialect: Option<String>,
}

impl FileConfig {
    fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

fn workers_from_env() -> anyhow::Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(raw) => {
            let n: usize = raw.parse().with_context(|| {
                format!("{WORKERS_ENV} must be a positive integer, got {raw:?}")
            })?;
            Ok(Some(n))
        }
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(e).context(format!("reading {WORKERS_ENV}")),
    }
}

fn write_output(path: Option<&Path>, content: &str) -> anyhow::Result<()> {
    match path {
        Some(path) => {
            std::fs::write(path, content).with_context(|| format!("writing {}", path.display()))
        }
        None => std::io::stdout()
            .write_all(content.as_bytes())
            .context("writing to stdout"),
    }
}

fn run_eval(args: EvalArgs) -> anyhow::Result<ExitCode> {
    let file_config = FileConfig::load(args.config.as_deref())?;
    let dialect: Option<Dialect> = match (args.dialect, file_config.dialect) {
        (Some(flag), _) => Some(flag.into()),
        (None, Some(name)) => Some(name.parse()?),
        (None, None) => None,
    };
    let workers = match args.workers {
        Some(n) => Some(n),
        None => workers_from_env()?.or(file_config.workers),
    };
    let format = args.format.or(file_config.format).unwrap_or(Format::Md);

    let config = EvalConfig {
        task: args.task.into(),
        dialect,
        workers,
    };
    let (run_report, status) = report::evaluate_run(&args.annotations, &args.predictions, &config)?;

    let rendered = match format {
        Format::Md => report::render_markdown(&run_report),
        Format::Csv => report::render_csv(&run_report),
        Format::Json => report::render_json(&run_report),
    };
    write_output(args.report.as_deref(), &rendered)?;

    if args.curves_csv.is_some() || args.curves_svg.is_some() {
        let Some(curves) = &run_report.curves else {
            bail!("threshold curves are only produced by tr runs");
        };
        if let Some(path) = &args.curves_csv {
            write_output(Some(path), &report::render_curves_csv(curves))?;
        }
        if let Some(path) = &args.curves_svg {
            write_output(Some(path), &report::render_curves_svg(curves))?;
        }
    }

    if status == EvalStatus::Partial {
        eprintln!(
            "warning: {} prediction record(s) were unparseable and scored zero",
            run_report.diagnostics.parse_failures
        );
    }
    Ok(ExitCode::from(status.exit_code() as u8))
}

fn run_validate(args: ValidateArgs) -> anyhow::Result<ExitCode> {
    let annotations = if args.lenient {
        let (annotations, problems) = dataset::scan_annotations(&args.annotations)?;
        for problem in &problems {
            eprintln!("warning: {problem}");
        }
        if annotations.is_empty() {
            bail!("no valid annotation records found");
        }
        annotations
    } else {
        dataset::load_annotations(&args.annotations)?
    };
    let validation = dataset::validate(&annotations);
    print!("{validation}");
    Ok(ExitCode::SUCCESS)
}

fn run_normalize(args: NormalizeArgs) -> anyhow::Result<ExitCode> {
    let annotations = args
        .annotations
        .as_deref()
        .map(dataset::load_annotations)
        .transpose()?;
    let outcome = report::normalize_run(
        &args.predictions,
        args.task.into(),
        args.dialect.into(),
        annotations.as_deref(),
    )?;

    let mut content = outcome.lines.join("\n");
    if !content.is_empty() {
        content.push('\n');
    }
    write_output(args.out.as_deref(), &content)?;

    eprintln!(
        "normalized {} record(s), {} unparseable",
        outcome.records, outcome.parse_failures
    );
    for (kind, count) in outcome.warnings.iter() {
        eprintln!("warning: {} x{}", kind.label(), count);
    }
    if outcome.parse_failures > 0 {
        Ok(ExitCode::from(3))
    } else {
        Ok(ExitCode::SUCCESS)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Eval(args) => run_eval(args),
        Command::Validate(args) => run_validate(args),
        Command::Normalize(args) => run_normalize(args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
