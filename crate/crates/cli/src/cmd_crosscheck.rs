//! `bogontrace crosscheck`: joins the identified transiting ASNs against
//! spoofing-test results (lookback window), anti-spoofing pledge
//! conformance, and per-AS registration metadata.

use std::fmt::Write as _;
use std::path::PathBuf;

use bogontrace_core::crosscheck::{
    country_rows_csv, crosscheck_summary, enrich, group_rows_csv, manrs_join, manrs_table_csv,
    parse_manrs_csv, parse_metadata_csv, parse_spoofer_csv, scatter_rows_csv, spoofer_table_csv,
    DEFAULT_WINDOW_DAYS,
};
use chrono::{DateTime, Duration, NaiveDate, Utc};
use clap::Args;
use serde_json::json;

use crate::config::{self, FileConfig};
use crate::manifest::{write_output, Manifest};
use crate::runs::{class_occurrences, load_runs, union_class_sets};
use crate::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct CrosscheckArgs {
    /// TOML config file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Prior analyze output directory (repeatable).
    #[arg(long = "run", required = true)]
    pub runs: Vec<PathBuf>,
    /// Spoofer results CSV: asn,timestamp,routedspoof.
    #[arg(long)]
    pub spoofer: Option<PathBuf>,
    /// MANRS conformance CSV: asn,anti_spoofing_conformant,member_since.
    #[arg(long)]
    pub manrs: Option<PathBuf>,
    /// AS metadata CSV: asn,rir,country,category_l1,category_l2,lat,lon.
    #[arg(long)]
    pub metadata: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Case selector: BA, BB, BC or all.
    #[arg(long)]
    pub case: Option<String>,
    /// Lookback window in days.
    #[arg(long)]
    pub window_days: Option<i64>,
    /// Membership cutoff date (YYYY-MM-DD) for the pledge table.
    #[arg(long)]
    pub cutoff: Option<String>,
    /// Measurement time override (RFC 3339); default is the latest
    /// measurement time among the runs.
    #[arg(long)]
    pub measurement_time: Option<String>,
    /// Date the MANRS snapshot was taken (YYYY-MM-DD); used for the
    /// staleness warning.
    #[arg(long)]
    pub manrs_snapshot: Option<String>,
    /// Top-N cutoff for the printed country summary.
    #[arg(long, default_value_t = 10)]
    pub top: usize,
}

pub fn run(args: CrosscheckArgs) -> CliResult<()> {
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
        file.case.clone(),
        None,
    ))?;
    let window_days = config::resolve(
        args.window_days,
        "WINDOW_DAYS",
        |s| s.parse().ok(),
        file.window_days,
        Some(DEFAULT_WINDOW_DAYS),
    )
    .unwrap_or(DEFAULT_WINDOW_DAYS);
    if window_days <= 0 {
        return Err(CliError::Config("window must be positive".into()));
    }
    let cutoff_raw = config::resolve(
        args.cutoff,
        "CUTOFF",
        |s| Some(s.to_string()),
        file.cutoff.clone(),
        Some("2023-01-01".to_string()),
    )
    .unwrap();
    let cutoff = NaiveDate::parse_from_str(&cutoff_raw, "%Y-%m-%d")
        .map_err(|e| CliError::Config(format!("bad cutoff {cutoff_raw:?}: {e}")))?;

    let spoofer_path = args.spoofer.or_else(|| file.spoofer.clone());
    let manrs_path = args.manrs.or_else(|| file.manrs.clone());
    let metadata_path = args.metadata.or_else(|| file.metadata.clone());

    let runs = load_runs(&args.runs)?;
    let measurement_time: DateTime<Utc> = match args.measurement_time {
        Some(raw) => DateTime::parse_from_rfc3339(&raw)
            .map(|t| t.with_timezone(&Utc))
            .map_err(|e| CliError::Config(format!("bad measurement time {raw:?}: {e}")))?,
        None => runs
            .iter()
            .filter_map(|r| r.measurement_time)
            .max()
            .ok_or_else(|| {
                CliError::Config(
                    "runs carry no measurement time; pass --measurement-time".into(),
                )
            })?,
    };

    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", out_dir.display())))?;
    let mut manifest = Manifest::new(
        "crosscheck",
        json!({
            "runs": runs.iter().map(|r| r.label.clone()).collect::<Vec<_>>(),
            "case": case.filter().map(|c| c.label()).unwrap_or("all"),
            "window_days": window_days,
            "cutoff": cutoff_raw,
            "measurement_time": measurement_time,
        }),
    );
    for dir in &args.runs {
        manifest.add_input(&dir.join(crate::runs::SUMMARY_FILE))?;
    }

    let spoofer_records = match &spoofer_path {
        None => None,
        Some(path) => {
            manifest.add_input(path)?;
            let file = std::fs::File::open(path)
                .map_err(|e| CliError::Config(format!("cannot open {}: {e}", path.display())))?;
            Some(parse_spoofer_csv(file).map_err(|e| CliError::Parse(e.to_string()))?)
        }
    };
    let manrs_records = match &manrs_path {
        None => None,
        Some(path) => {
            manifest.add_input(path)?;
            let file = std::fs::File::open(path)
                .map_err(|e| CliError::Config(format!("cannot open {}: {e}", path.display())))?;
            Some(parse_manrs_csv(file).map_err(|e| CliError::Parse(e.to_string()))?)
        }
    };
    let metadata = match &metadata_path {
        None => None,
        Some(path) => {
            manifest.add_input(path)?;
            let file = std::fs::File::open(path)
                .map_err(|e| CliError::Config(format!("cannot open {}: {e}", path.display())))?;
            Some(parse_metadata_csv(file).map_err(|e| CliError::Parse(e.to_string()))?)
        }
    };
    if spoofer_records.is_none() && manrs_records.is_none() && metadata.is_none() {
        return Err(CliError::Config(
            "nothing to cross-check: give --spoofer, --manrs and/or --metadata".into(),
        ));
    }

    if let Some(snapshot_raw) = &args.manrs_snapshot {
        let snapshot = NaiveDate::parse_from_str(snapshot_raw, "%Y-%m-%d")
            .map_err(|e| CliError::Config(format!("bad manrs snapshot {snapshot_raw:?}: {e}")))?;
        let gap = (snapshot
            .and_hms_opt(0, 0, 0)
            .expect("midnight exists")
            .and_utc()
            - measurement_time)
            .num_days()
            .abs();
        if gap > Duration::days(183).num_days() {
            eprintln!(
                "warning: MANRS snapshot ({snapshot}) and measurement time \
                 ({measurement_time}) differ by {gap} days; conformance may not reflect \
                 the measurement period"
            );
        }
    }

    for c in case.cases() {
        let class_sets = union_class_sets(&runs, c);
        let union: std::collections::BTreeSet<_> =
            class_sets.values().flatten().copied().collect();

        if let Some(records) = &spoofer_records {
            let rows = crosscheck_summary(&class_sets, records, measurement_time, window_days);
            let name = format!("spoofer_{}.csv", c.key());
            write_output(&out_dir, &name, &spoofer_table_csv(&rows))?;
            manifest.add_output(&name);
        }

        if let Some(records) = &manrs_records {
            let join = manrs_join(&class_sets, &union, records, cutoff);
            let name = format!("manrs_{}.csv", c.key());
            write_output(&out_dir, &name, &manrs_table_csv(&join))?;
            manifest.add_output(&name);
            if !join.conflicts.is_empty() {
                let mut report = String::from("asn\n");
                for asn in &join.conflicts {
                    let _ = writeln!(report, "{asn}");
                }
                let name = format!("manrs_conflicts_{}.csv", c.key());
                write_output(&out_dir, &name, &report)?;
                manifest.add_output(&name);
                eprintln!(
                    "warning: {} ASN(s) had conflicting MANRS conformance records and were \
                     excluded",
                    join.conflicts.len()
                );
            }
        }

        if let Some(metadata) = &metadata {
            let occurrences = class_occurrences(&runs, c);
            let report = enrich(&union, &class_sets, metadata, &occurrences);
            for (name, contents) in [
                (
                    format!("rir_{}.csv", c.key()),
                    group_rows_csv("rir", &report.rir_rows),
                ),
                (
                    format!("categories_{}.csv", c.key()),
                    group_rows_csv("category", &report.category_rows),
                ),
                (
                    format!("countries_{}.csv", c.key()),
                    country_rows_csv(&report.country_rows),
                ),
                (
                    format!("scatter_{}.csv", c.key()),
                    scatter_rows_csv(&report.scatter_rows),
                ),
            ] {
                write_output(&out_dir, &name, &contents)?;
                manifest.add_output(&name);
            }
            let shown = report.country_rows.iter().take(args.top);
            let summary: Vec<String> = shown
                .map(|r| format!("{}={}", r.country, r.unique))
                .collect();
            println!("{} top countries: {}", c, summary.join(" "));
        }
    }

    manifest.counters = json!({
        "spoofer_records": spoofer_records.as_ref().map(|r| r.len()),
        "manrs_records": manrs_records.as_ref().map(|r| r.len()),
        "metadata_rows": metadata.as_ref().map(|m| m.len()),
    });
    manifest.write(&out_dir)?;
    println!("cross-check written to {}", out_dir.display());
    Ok(())
}
