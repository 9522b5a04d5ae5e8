//! `bogontrace fetch`: expands collector archive URL templates for a date
//! and downloads into a content-addressed cache. The analysis itself never
//! touches the network; it reads whatever files this (or the operator) put
//! on disk.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use bogontrace_core::rib::{default_url_templates, expand_url_template};
use chrono::NaiveDate;
use clap::Args;
use sha2::{Digest, Sha256};

use crate::config::FileConfig;
use crate::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct FetchArgs {
    /// TOML config file; its [[fetch_templates]] entries extend the
    /// defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Collector name, e.g. rrc00 or route-views2.
    #[arg(long)]
    pub collector: String,
    /// Snapshot date, YYYY-MM-DD.
    #[arg(long)]
    pub date: String,
    /// URL template override with {YYYY},{MM},{DD} placeholders.
    #[arg(long)]
    pub template: Option<String>,
    /// Cache directory; falls back to the config file's fetch_cache.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Resolve and print the URL without downloading.
    #[arg(long)]
    pub dry_run: bool,
}

type CacheIndex = BTreeMap<String, String>;

pub fn run(args: FetchArgs) -> CliResult<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let cache_dir = args
        .cache
        .clone()
        .or_else(|| file.fetch_cache.clone())
        .ok_or_else(|| CliError::Config("missing cache directory (--cache or fetch_cache)".into()))?;
    let date = NaiveDate::parse_from_str(&args.date, "%Y-%m-%d")
        .map_err(|e| CliError::Config(format!("bad date {:?}: {e}", args.date)))?;

    let mut templates: BTreeMap<String, String> = default_url_templates().into_iter().collect();
    for t in &file.fetch_templates {
        templates.insert(t.collector.clone(), t.url.clone());
    }
    let template = match args.template {
        Some(t) => t,
        None => templates.get(&args.collector).cloned().ok_or_else(|| {
            CliError::Config(format!(
                "unknown collector {:?}; known: {}",
                args.collector,
                templates.keys().cloned().collect::<Vec<_>>().join(", ")
            ))
        })?,
    };
    use chrono::Datelike;
    let url = expand_url_template(&template, date.year(), date.month(), date.day());

    std::fs::create_dir_all(&cache_dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", cache_dir.display())))?;
    let index_path = cache_dir.join("index.json");
    let mut index = load_index(&index_path)?;

    if let Some(cached) = index.get(&url) {
        let path = cache_dir.join(cached);
        if path.exists() {
            println!("{url} -> {} (cached)", path.display());
            return Ok(());
        }
    }
    if args.dry_run {
        println!("{url} (not cached)");
        return Ok(());
    }

    let body = download(&url)?;
    let digest = hex::encode(Sha256::digest(&body));
    let ext = url.rsplit('/').next().and_then(|n| n.split_once('.')).map(|(_, e)| e);
    let file_name = match ext {
        Some(ext) => format!("{digest}.{ext}"),
        None => digest.clone(),
    };
    let target = cache_dir.join(&file_name);
    std::fs::write(&target, &body)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", target.display())))?;
    index.insert(url.clone(), file_name);
    save_index(&index_path, &index)?;
    println!("{url} -> {}", target.display());
    Ok(())
}

fn download(url: &str) -> CliResult<Vec<u8>> {
    let response = reqwest::blocking::get(url)
        .map_err(|e| CliError::Parse(format!("fetch {url}: {e}")))?;
    if !response.status().is_success() {
        return Err(CliError::Parse(format!(
            "fetch {url}: HTTP {}",
            response.status()
        )));
    }
    response
        .bytes()
        .map(|b| b.to_vec())
        .map_err(|e| CliError::Parse(format!("fetch {url}: {e}")))
}

fn load_index(path: &Path) -> CliResult<CacheIndex> {
    if !path.exists() {
        return Ok(CacheIndex::new());
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Parse(format!("bad cache index {}: {e}", path.display())))
}

fn save_index(path: &Path, index: &CacheIndex) -> CliResult<()> {
    let mut file = std::fs::File::create(path)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    let json = serde_json::to_string_pretty(index)
        .map_err(|e| CliError::Config(format!("cache index serialization: {e}")))?;
    file.write_all(json.as_bytes())
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}
