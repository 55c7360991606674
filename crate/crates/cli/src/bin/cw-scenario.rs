//! Run scripted sessions and check them against their expectations.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use cocreate::scenario::{self, assess, render_transcript, run_script, HubTransport, Run, Scenario, ScenarioReport};
use cocreate_cli::http_client::HttpTransport;

#[derive(Parser)]
#[command(version, about = "Run scripted sessions and check the replies and the resulting log")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List bundled scenarios.
    List,
    /// Run bundled scenarios by name, `all`, or scenario JSON files.
    Run {
        #[arg(required = true)]
        scenarios: Vec<String>,
        /// Run against a server instead of in-process. It should use the mock
        /// generator; each scenario runs once and is not checked for
        /// determinism.
        #[arg(long)]
        url: Option<String>,
        /// Per-request timeout in seconds when using --url.
        #[arg(long, default_value_t = 30)]
        timeout: u64,
        /// Write `<name>.transcript.md` for each run here.
        #[arg(long)]
        transcript_dir: Option<PathBuf>,
        /// Print one JSON report per line instead of PASS/FAIL lines.
        #[arg(long)]
        json: bool,
    },
    /// Print the markdown transcript of one scenario run in-process.
    Transcript { scenario: String },
}

fn resolve(names: &[String]) -> anyhow::Result<Vec<Scenario>> {
    let mut out = Vec::new();
    for name in names {
        if name == "all" {
            out.extend(scenario::bundled());
        } else if let Some(s) = scenario::find_bundled(name) {
            out.push(s);
        } else if Path::new(name).is_file() {
            let text = std::fs::read_to_string(name).with_context(|| format!("reading {name}"))?;
            out.push(serde_json::from_str(&text).with_context(|| format!("parsing {name}"))?);
        } else {
            bail!("no bundled scenario or file named {name:?} (try `cw-scenario list`)");
        }
    }
    Ok(out)
}

fn execute(s: &Scenario, url: Option<&str>, timeout: Duration) -> (Run, ScenarioReport) {
    match url {
        Some(url) => {
            let run = run_script(s, &mut HttpTransport::new(url, timeout));
            let report = assess(s, &run, None);
            (run, report)
        }
        None => {
            let run = run_script(s, &mut HubTransport::for_scenario(s));
            let second = run_script(s, &mut HubTransport::for_scenario(s));
            let report = assess(s, &run, Some(&second));
            (run, report)
        }
    }
}

fn main() -> anyhow::Result<ExitCode> {
    cocreate_cli::init_tracing();
    match Args::parse().command {
        Command::List => {
            for s in scenario::bundled() {
                let aliases = if s.aliases.is_empty() { String::new() } else { format!(" (alias {})", s.aliases.join(", ")) };
                println!("{:<32} {:<6} {}{}", s.name, s.condition.to_string(), s.description, aliases);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Transcript { scenario } => {
            let s = resolve(&[scenario])?.remove(0);
            let run = run_script(&s, &mut HubTransport::for_scenario(&s));
            print!("{}", render_transcript(&s, &run));
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { scenarios, url, timeout, transcript_dir, json } => {
            let mut failed = 0;
            for s in resolve(&scenarios)? {
                let (run, report) = execute(&s, url.as_deref(), Duration::from_secs(timeout));
                if let Some(dir) = &transcript_dir {
                    std::fs::create_dir_all(dir)?;
                    std::fs::write(dir.join(format!("{}.transcript.md", s.name)), render_transcript(&s, &run))?;
                }
                if json {
                    println!("{}", serde_json::to_string(&report)?);
                } else {
                    println!("{report}");
                }
                failed += usize::from(!report.passed);
            }
            Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}
