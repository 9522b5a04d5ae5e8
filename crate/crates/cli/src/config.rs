//! Run configuration: a TOML file plus flag and environment overrides.
//! Precedence: command-line flag, then `BOGONTRACE_*` environment variable,
//! then config file, then built-in default.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use bogontrace_core::bogon::{BogonRegistry, RegistryConfig};
use bogontrace_core::transit::Case;
use serde::Deserialize;

use crate::{CliError, CliResult};

pub const ENV_PREFIX: &str = "BOGONTRACE_";

/// Which attribution cases a command should emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CaseSelector {
    #[default]
    All,
    One(Case),
}

impl CaseSelector {
    pub fn cases(self) -> Vec<Case> {
        match self {
            CaseSelector::All => Case::ALL.to_vec(),
            CaseSelector::One(case) => vec![case],
        }
    }

    pub fn filter(self) -> Option<Case> {
        match self {
            CaseSelector::All => None,
            CaseSelector::One(case) => Some(case),
        }
    }
}

impl FromStr for CaseSelector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("all") {
            Ok(CaseSelector::All)
        } else {
            s.parse::<Case>().map(CaseSelector::One)
        }
    }
}

/// On-disk config file. Every key can also arrive as a flag (which wins) or
/// as `BOGONTRACE_<KEY>` (which beats the file).
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub label: Option<String>,
    pub ribs: Option<Vec<PathBuf>>,
    pub traces: Option<Vec<PathBuf>>,
    pub out: Option<PathBuf>,
    pub case: Option<String>,
    pub strict: Option<bool>,
    pub workers: Option<usize>,
    pub registry: Option<PathBuf>,
    pub spoofer: Option<PathBuf>,
    pub manrs: Option<PathBuf>,
    pub metadata: Option<PathBuf>,
    pub window_days: Option<i64>,
    pub cutoff: Option<String>,
    #[serde(default)]
    pub fetch_templates: Vec<FetchTemplate>,
    pub fetch_cache: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct FetchTemplate {
    pub collector: String,
    pub url: String,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> CliResult<FileConfig> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("bad config {}: {e}", path.display())))
    }
}

pub fn env_var(key: &str) -> Option<String> {
    std::env::var(format!("{ENV_PREFIX}{key}")).ok()
}

/// flag > env > file > default.
pub fn resolve<T: Clone>(
    flag: Option<T>,
    env_key: &str,
    parse_env: impl Fn(&str) -> Option<T>,
    file: Option<T>,
    default: Option<T>,
) -> Option<T> {
    flag.or_else(|| env_var(env_key).as_deref().and_then(parse_env))
        .or(file)
        .or(default)
}

pub fn require<T>(value: Option<T>, what: &str) -> CliResult<T> {
    value.ok_or_else(|| CliError::Config(format!("missing {what} (flag, env or config file)")))
}

/// Loads the bogon registry, applying a TOML override file when configured.
pub fn load_registry(path: Option<&Path>) -> CliResult<BogonRegistry> {
    let base = BogonRegistry::builtin();
    let Some(path) = path else {
        return Ok(base);
    };
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::Config(format!("cannot read registry {}: {e}", path.display()))
    })?;
    let config = RegistryConfig::from_toml(&text)
        .map_err(|e| CliError::Config(format!("bad registry {}: {e}", path.display())))?;
    base.with_overrides(&config)
        .map_err(|e| CliError::Config(format!("bad registry {}: {e}", path.display())))
}

pub fn parse_case(value: Option<String>) -> CliResult<CaseSelector> {
    match value {
        None => Ok(CaseSelector::default()),
        Some(s) => s
            .parse()
            .map_err(|e| CliError::Config(format!("bad case selector: {e}"))),
    }
}
