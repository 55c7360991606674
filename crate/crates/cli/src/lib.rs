//! Binaries around the `cocreate` library: the session server
//! (`cw-serve`), log analysis (`cw-analyze`) and the scenario runner
//! (`cw-scenario`).

pub mod config;
pub mod http_client;
pub mod server;

/// Install a stderr tracing subscriber honouring `RUST_LOG`.
pub fn init_tracing() {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into());
    let _ = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).try_init();
}
