//! Service configuration: an optional TOML or JSON file, then `CW_*`
//! environment overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cocreate::context::Backend;
use cocreate::service::ConditionAssignment;
use cocreate::{Condition, ServiceConfig};

pub const ENV_VARS: [&str; 8] =
    ["CW_LISTEN", "CW_LOG_DIR", "CW_GENERATOR", "CW_REMOTE_URL", "CW_BUDGET", "CW_INTERRUPT_THRESHOLD", "CW_CONDITION", "CW_SEED"];

pub fn parse_config(text: &str, path: &Path) -> Result<ServiceConfig> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => serde_json::from_str(text).with_context(|| format!("parsing {}", path.display())),
        Some("toml") => toml::from_str(text).with_context(|| format!("parsing {}", path.display())),
        _ => bail!("{}: config must be .toml or .json", path.display()),
    }
}

/// Apply overrides from `lookup` (normally the process environment).
pub fn apply_overrides(config: &mut ServiceConfig, lookup: impl Fn(&str) -> Option<String>) -> Result<()> {
    fn parse<T: std::str::FromStr>(var: &str, v: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        v.trim().parse().map_err(|e| anyhow::anyhow!("{var}={v:?}: {e}"))
    }
    if let Some(v) = lookup("CW_LISTEN") {
        config.listen_address = v;
    }
    if let Some(v) = lookup("CW_LOG_DIR") {
        config.log_dir = (!v.is_empty()).then(|| PathBuf::from(v));
    }
    if let Some(v) = lookup("CW_GENERATOR") {
        config.generator.backend = match v.trim() {
            "mock" => Backend::Mock,
            "remote" => Backend::Remote,
            other => bail!("CW_GENERATOR={other:?}: expected mock or remote"),
        };
    }
    if let Some(v) = lookup("CW_REMOTE_URL") {
        config.generator.remote_url = Some(v);
    }
    if let Some(v) = lookup("CW_BUDGET") {
        config.manager.interaction_budget = parse("CW_BUDGET", &v)?;
    }
    if let Some(v) = lookup("CW_INTERRUPT_THRESHOLD") {
        config.manager.interrupt_threshold = parse("CW_INTERRUPT_THRESHOLD", &v)?;
    }
    if let Some(v) = lookup("CW_CONDITION") {
        config.condition_assignment = match v.trim() {
            "random" => ConditionAssignment::Random,
            other => ConditionAssignment::Forced(other.parse::<Condition>().map_err(|e| anyhow::anyhow!("CW_CONDITION={other:?}: {e}"))?),
        };
    }
    if let Some(v) = lookup("CW_SEED") {
        config.seed = parse("CW_SEED", &v)?;
    }
    Ok(())
}

/// Defaults, then `path` if given, then the environment.
pub fn load(path: Option<&Path>) -> Result<ServiceConfig> {
    let mut config = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            parse_config(&text, p)?
        }
        None => ServiceConfig::default(),
    };
    apply_overrides(&mut config, |k| std::env::var(k).ok())?;
    Ok(config)
}
