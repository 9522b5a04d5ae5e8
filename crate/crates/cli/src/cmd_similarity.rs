//! `bogontrace similarity`: cross-measurement set comparison. Emits, per
//! case and class, Jaccard and containment matrices over the run labels;
//! per run, the class-vs-class containment matrix; plus occurrence counts
//! and the unique-ASNs-per-year pivot.

use std::collections::BTreeSet;
use std::path::PathBuf;

use bogontrace_core::bogon::RfcClass;
use bogontrace_core::metrics::{
    occurrence_counts, occurrence_summary, similarity_matrix, yearly_pivot_csv,
    yearly_unique_pivot, Metric,
};
use bogontrace_core::net::Asn;
use clap::Args;
use serde_json::json;

use crate::config::{self, FileConfig};
use crate::manifest::{write_output, Manifest};
use crate::runs::{load_runs, RunSummary};
use crate::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct SimilarityArgs {
    /// TOML config file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Prior analyze output directory (repeatable; row order follows flag
    /// order).
    #[arg(long = "run", required = true)]
    pub runs: Vec<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Case selector: BA, BB, BC or all.
    #[arg(long)]
    pub case: Option<String>,
}

pub fn run(args: SimilarityArgs) -> CliResult<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let out_dir = config::require(
        config::resolve(
            args.out,
            "OUT",
            |s| Some(PathBuf::from(s)),
            file.out.clone(),
            None,
        ),
        "output directory",
    )?;
    let case = config::parse_case(config::resolve(
        args.case,
        "CASE",
        |s| Some(s.to_string()),
        file.case,
        None,
    ))?;

    let runs = load_runs(&args.runs)?;
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", out_dir.display())))?;

    let mut manifest = Manifest::new(
        "similarity",
        json!({
            "runs": runs.iter().map(|r| r.label.clone()).collect::<Vec<_>>(),
            "case": case.filter().map(|c| c.label()).unwrap_or("all"),
        }),
    );
    for dir in &args.runs {
        manifest.add_input(&dir.join(crate::runs::SUMMARY_FILE))?;
    }

    let matrix_err = |e| CliError::Parse(format!("similarity matrix: {e}"));

    for c in case.cases() {
        // Cross-measurement matrices, one per class that has any members.
        for class in RfcClass::ALL {
            let sets: Vec<(String, BTreeSet<Asn>)> = runs
                .iter()
                .map(|r| (r.label.clone(), r.stats.asn_set(c, class)))
                .collect();
            if sets.iter().all(|(_, s)| s.is_empty()) {
                continue;
            }
            for metric in [Metric::Jaccard, Metric::Containment] {
                let matrix = similarity_matrix(&sets, metric).map_err(matrix_err)?;
                let name = format!("{}_{}_{}.csv", metric.key(), c.key(), class.key());
                write_output(&out_dir, &name, &matrix.to_csv())?;
                manifest.add_output(&name);
                let json_name = format!("{}_{}_{}.json", metric.key(), c.key(), class.key());
                write_output(
                    &out_dir,
                    &json_name,
                    &serde_json::to_string_pretty(&matrix)
                        .map_err(|e| CliError::Config(e.to_string()))?,
                )?;
                manifest.add_output(&json_name);
            }

            // Occurrence counts across measurements.
            let counts = occurrence_counts(sets.iter().map(|(_, s)| s));
            let summary = occurrence_summary(&counts, runs.len() as u64);
            let mut csv = String::from("asn,measurements\n");
            for (asn, n) in &counts {
                csv.push_str(&format!("{asn},{n}\n"));
            }
            let name = format!("occurrences_{}_{}.csv", c.key(), class.key());
            write_output(&out_dir, &name, &csv)?;
            manifest.add_output(&name);
            let name = format!("occurrences_{}_{}.json", c.key(), class.key());
            write_output(
                &out_dir,
                &name,
                &serde_json::to_string_pretty(&summary)
                    .map_err(|e| CliError::Config(e.to_string()))?,
            )?;
            manifest.add_output(&name);
        }

        // Per-run class-vs-class containment (which class's transiting set
        // is covered by which).
        for run in &runs {
            let sets: Vec<(String, BTreeSet<Asn>)> = RfcClass::ALL
                .into_iter()
                .map(|class| (class.label().to_string(), run.stats.asn_set(c, class)))
                .collect();
            if sets.iter().all(|(_, s)| s.is_empty()) {
                continue;
            }
            let matrix = similarity_matrix(&sets, Metric::Containment).map_err(matrix_err)?;
            let name = format!("containment_classes_{}_{}.csv", c.key(), run.label);
            write_output(&out_dir, &name, &matrix.to_csv())?;
            manifest.add_output(&name);
        }

        // Unique-per-year pivot over the measurement labels.
        let labeled: Vec<_> = runs
            .iter()
            .map(|r: &RunSummary| (r.label.clone(), r.class_sets(c)))
            .collect();
        let pivot = yearly_unique_pivot(&labeled);
        let name = format!("yearly_{}.csv", c.key());
        write_output(&out_dir, &name, &yearly_pivot_csv(&pivot))?;
        manifest.add_output(&name);
    }

    manifest.counters = json!({ "runs": runs.len() });
    manifest.write(&out_dir)?;
    println!(
        "similarity over {} runs written to {}",
        runs.len(),
        out_dir.display()
    );
    Ok(())
}
