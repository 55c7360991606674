//! Run the session server.

use std::path::PathBuf;
use std::sync::Arc;

use clap::Parser;
use cocreate::SessionHub;
use cocreate_cli::{config, init_tracing, server};

/// Serve co-writing sessions over WebSocket and HTTP.
///
/// Settings come from the defaults, then `--config`, then CW_* environment
/// variables, then `--listen`.
#[derive(Parser)]
#[command(version)]
struct Args {
    /// TOML or JSON service configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Address to bind, e.g. 127.0.0.1:8080.
    #[arg(long)]
    listen: Option<String>,
    /// Print the effective configuration as JSON and exit.
    #[arg(long)]
    print_config: bool,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    init_tracing();
    let args = Args::parse();
    let mut cfg = config::load(args.config.as_deref())?;
    if let Some(listen) = args.listen {
        cfg.listen_address = listen;
    }
    if args.print_config {
        println!("{}", serde_json::to_string_pretty(&cfg)?);
        return Ok(());
    }
    if let Some(dir) = &cfg.log_dir {
        std::fs::create_dir_all(dir)?;
    }
    let hub = Arc::new(SessionHub::new(cfg)?);
    server::serve(hub).await
}
