//! Compute study metrics from session logs or from summary counts.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, ValueEnum};
use cocreate::metrics::{build_report, load_summaries, report_from_summary, AnalysisOptions, BestRule, ReportKind, SummaryInput};

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Markdown,
}

/// Completion, interaction, frustration and survey reports.
///
/// Reads either a directory of `*.jsonl` session logs (`--logs`) or a JSON
/// file of per-condition counts (`--summary`), which supports the completion
/// and frustration reports only.
#[derive(Parser)]
#[command(version)]
struct Args {
    /// Directory of session logs.
    #[arg(long, conflicts_with = "summary", required_unless_present = "summary")]
    logs: Option<PathBuf>,
    /// Summary counts, e.g. {"1": {"local": {"k": 7, "n": 28}, "global": {...}}, ..., "frustration": {...}}.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// completion, interactions, frustration, survey or all.
    #[arg(long, default_value = "all")]
    report: ReportKind,
    #[arg(long, value_enum, default_value = "markdown")]
    format: Format,
    /// Pool the variance in two-proportion z-tests.
    #[arg(long)]
    pooled: bool,
    /// How to reduce several sessions of one participant: per-metric or per-session.
    #[arg(long, default_value = "per-metric")]
    best_rule: BestRule,
    /// Write the report here instead of stdout.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

fn main() -> anyhow::Result<()> {
    cocreate_cli::init_tracing();
    let args = Args::parse();
    let opts = AnalysisOptions { report: args.report, best_rule: args.best_rule, pooled: args.pooled };
    let report = if let Some(path) = &args.summary {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let input = SummaryInput::parse(&text).with_context(|| format!("in {}", path.display()))?;
        report_from_summary(&input, &opts)
    } else {
        let dir = args.logs.as_ref().expect("clap requires --logs or --summary");
        let (sessions, warnings) = load_summaries(dir).with_context(|| format!("reading {}", dir.display()))?;
        for w in &warnings {
            tracing::warn!(source = %w.source, "{}", w.message);
        }
        if sessions.is_empty() {
            bail!("no usable session logs in {}", dir.display());
        }
        build_report(&sessions, warnings, &opts)
    };
    let text = match args.format {
        Format::Json => report.to_json(),
        Format::Markdown => report.to_markdown(),
    };
    match &args.out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}
