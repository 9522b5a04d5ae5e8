//! The per-run summary file that later subcommands consume: label,
//! measurement time and the per-case per-class ASN sets.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use bogontrace_core::bogon::RfcClass;
use bogontrace_core::metrics::MeasurementStats;
use bogontrace_core::net::Asn;
use bogontrace_core::transit::Case;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

pub const SUMMARY_FILE: &str = "stats.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub label: String,
    pub measurement_time: Option<DateTime<Utc>>,
    pub stats: MeasurementStats,
}

impl RunSummary {
    pub fn class_sets(&self, case: Case) -> BTreeMap<RfcClass, BTreeSet<Asn>> {
        self.stats.asn_sets.get(&case).cloned().unwrap_or_default()
    }
}

/// Loads the summaries for a list of run directories, rejecting label
/// collisions.
pub fn load_runs(dirs: &[std::path::PathBuf]) -> CliResult<Vec<RunSummary>> {
    if dirs.is_empty() {
        return Err(CliError::Config("no --run directories given".into()));
    }
    let mut seen = BTreeSet::new();
    let mut runs = Vec::with_capacity(dirs.len());
    for dir in dirs {
        let summary = load_run(dir)?;
        if !seen.insert(summary.label.clone()) {
            return Err(CliError::Config(format!(
                "label collision: {:?} appears in more than one run",
                summary.label
            )));
        }
        runs.push(summary);
    }
    Ok(runs)
}

pub fn load_run(dir: &Path) -> CliResult<RunSummary> {
    let path = dir.join(SUMMARY_FILE);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Parse(format!("bad run summary {}: {e}", path.display())))
}

/// Union of per-class ASN sets across runs for one case.
pub fn union_class_sets(
    runs: &[RunSummary],
    case: Case,
) -> BTreeMap<RfcClass, BTreeSet<Asn>> {
    let mut merged: BTreeMap<RfcClass, BTreeSet<Asn>> = BTreeMap::new();
    for run in runs {
        for (class, set) in run.class_sets(case) {
            merged.entry(class).or_default().extend(set);
        }
    }
    merged
}

/// Per-class occurrence counts (how many runs each ASN appeared in).
pub fn class_occurrences(
    runs: &[RunSummary],
    case: Case,
) -> BTreeMap<RfcClass, BTreeMap<Asn, u64>> {
    let mut out: BTreeMap<RfcClass, BTreeMap<Asn, u64>> = BTreeMap::new();
    for run in runs {
        for (class, set) in run.class_sets(case) {
            let slot = out.entry(class).or_default();
            for asn in set {
                *slot.entry(asn).or_insert(0) += 1;
            }
        }
    }
    out
}
