//! `bogontrace analyze`: RIB snapshots + trace corpus in, reports out.

use std::io::BufReader;
use std::path::PathBuf;

use bogontrace_core::annotate::{annotate, clean, dump_annotated};
use bogontrace_core::metrics::stats_csv;
use bogontrace_core::mrt::open_mrt_file;
use bogontrace_core::pipeline::{analyze_measurement, asn_list, findings_csv};
use bogontrace_core::rib::{RibError, TableBuilder};
use bogontrace_core::trace::{
    select_lowest_cycle, IngestMode, Measurement, TraceReader, TraceRecord,
};
use clap::Args;
use serde_json::json;

use crate::config::{self, FileConfig};
use crate::manifest::{write_output, Manifest};
use crate::runs::RunSummary;
use crate::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// TOML config file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Measurement label, e.g. 2023-07.
    #[arg(long)]
    pub label: Option<String>,
    /// MRT RIB snapshot (repeatable; gzip/bzip2 transparently decoded).
    #[arg(long = "rib")]
    pub ribs: Vec<PathBuf>,
    /// Traceroute corpus in canonical JSONL (repeatable).
    #[arg(long = "traces")]
    pub traces: Vec<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Case selector: BA, BB, BC or all.
    #[arg(long)]
    pub case: Option<String>,
    /// Fail on the first malformed trace line instead of counting and
    /// skipping.
    #[arg(long)]
    pub strict: bool,
    /// Worker threads for annotation and classification.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Bogon registry override (TOML).
    #[arg(long)]
    pub registry: Option<PathBuf>,
    /// Also write the routing table as prefix,origins,source CSV.
    #[arg(long)]
    pub dump_rib: bool,
    /// Also write per-trace annotated-path text dumps.
    #[arg(long)]
    pub dump_annotated: bool,
}

pub fn run(args: AnalyzeArgs) -> CliResult<()> {
    let file = FileConfig::load(args.config.as_deref())?;

    let label = config::require(
        config::resolve(
            args.label,
            "LABEL",
            |s| Some(s.to_string()),
            file.label.clone(),
            None,
        ),
        "label",
    )?;
    let ribs = if args.ribs.is_empty() {
        file.ribs.clone().unwrap_or_default()
    } else {
        args.ribs
    };
    let trace_paths = if args.traces.is_empty() {
        file.traces.clone().unwrap_or_default()
    } else {
        args.traces
    };
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
    let strict = args.strict
        || config::env_var("STRICT").as_deref() == Some("1")
        || file.strict.unwrap_or(false);
    let workers = config::resolve(
        args.workers,
        "WORKERS",
        |s| s.parse().ok(),
        file.workers,
        Some(1),
    )
    .unwrap_or(1)
    .max(1);
    if ribs.is_empty() {
        return Err(CliError::Config("no RIB snapshots given".into()));
    }
    if trace_paths.is_empty() {
        return Err(CliError::Config("no trace corpora given".into()));
    }
    let registry_path = args.registry.or_else(|| file.registry.clone());
    let registry = config::load_registry(registry_path.as_deref())?;

    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", out_dir.display())))?;

    // Worker count is deliberately absent from the manifest: results are
    // worker-count invariant and reruns must stay byte-identical.
    let mut manifest = Manifest::new(
        "analyze",
        json!({
            "label": label,
            "case": case.filter().map(|c| c.label()).unwrap_or("all"),
            "strict": strict,
            "registry_override": registry_path.as_ref().map(|p| p.display().to_string()),
        }),
    );

    // Routing table. RIB corruption is always fatal, lenient mode or not.
    let mut builder = TableBuilder::new(&registry);
    for path in &ribs {
        manifest.add_input(path)?;
        let reader = open_mrt_file(path)
            .map_err(|e| CliError::Config(format!("cannot open {}: {e}", path.display())))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        builder
            .add_mrt_stream(&name, reader)
            .map_err(|e| CliError::Parse(e.to_string()))?;
    }
    let table = builder.build().map_err(|e| match e {
        RibError::NoRoutablePrefixes => CliError::Empty("no routable prefixes".into()),
        other => CliError::Parse(other.to_string()),
    })?;

    // Trace corpus.
    let mode = if strict {
        IngestMode::Strict
    } else {
        IngestMode::Lenient
    };
    let mut all_traces: Vec<TraceRecord> = Vec::new();
    let mut ingest = bogontrace_core::trace::IngestStats::default();
    for path in &trace_paths {
        manifest.add_input(path)?;
        let file = std::fs::File::open(path)
            .map_err(|e| CliError::Config(format!("cannot open {}: {e}", path.display())))?;
        let mut reader = TraceReader::new(BufReader::new(file), mode);
        for record in &mut reader {
            let record = record.map_err(|e| {
                CliError::Parse(format!("trace corpus {}: {e}", path.display()))
            })?;
            all_traces.push(record);
        }
        let s = reader.stats();
        ingest.lines += s.lines;
        ingest.records += s.records;
        ingest.malformed_lines += s.malformed_lines;
        ingest.ttl_anomalies += s.ttl_anomalies;
    }
    let selected = select_lowest_cycle(all_traces);
    if selected.is_empty() {
        return Err(CliError::Empty("no traces after cycle selection".into()));
    }
    let measurement = Measurement {
        label: label.clone(),
        traces: selected,
    };

    let output = analyze_measurement(&label, &measurement.traces, &table, &registry, workers);

    // Reports.
    write_output(&out_dir, "stats.csv", &stats_csv(std::slice::from_ref(&output.stats)))?;
    manifest.add_output("stats.csv");

    let summary = RunSummary {
        label: label.clone(),
        measurement_time: measurement.measurement_time(),
        stats: output.stats.clone(),
    };
    let summary_json = serde_json::to_string_pretty(&summary)
        .map_err(|e| CliError::Config(format!("stats serialization: {e}")))?;
    write_output(&out_dir, crate::runs::SUMMARY_FILE, &summary_json)?;
    manifest.add_output(crate::runs::SUMMARY_FILE);

    write_output(
        &out_dir,
        "findings.csv",
        &findings_csv(&output.outcomes, case.filter()),
    )?;
    manifest.add_output("findings.csv");

    for c in case.cases() {
        for class in bogontrace_core::bogon::RfcClass::ALL {
            let list = asn_list(&output.stats, c, class);
            if list.is_empty() {
                continue;
            }
            let name = format!("asns_{}_{}.txt", c.key(), class.key());
            write_output(&out_dir, &name, &list)?;
            manifest.add_output(&name);
        }
    }

    if args.dump_rib {
        write_output(&out_dir, "rib_dump.csv", &table.dump_csv())?;
        manifest.add_output("rib_dump.csv");
    }
    if args.dump_annotated {
        let mut dump = String::new();
        for (i, trace) in measurement.traces.iter().enumerate() {
            let annotated = annotate(trace, &table, &registry);
            let cleaned = clean(&annotated);
            dump.push_str(&dump_annotated(i as u64, &annotated, &cleaned));
            dump.push('\n');
        }
        write_output(&out_dir, "annotated.txt", &dump)?;
        manifest.add_output("annotated.txt");
    }

    manifest.counters = json!({
        "ingest": ingest,
        "rib": table.meta(),
        "measurement_time": summary.measurement_time,
    });
    manifest.write(&out_dir)?;

    println!(
        "{label}: {} traces, {} vps, {} prefixes; findings for {} trace(s) with qualifying bogons",
        output.stats.n_traces,
        output.stats.n_vps,
        table.len(),
        output
            .outcomes
            .iter()
            .filter(|o| o.has_qualifying())
            .count(),
    );
    for c in case.cases() {
        let per_class: Vec<String> = bogontrace_core::bogon::RfcClass::ALL
            .into_iter()
            .filter_map(|class| {
                let n = output.stats.asn_set(c, class).len();
                (n > 0).then(|| format!("{}={n}", class.label()))
            })
            .collect();
        println!(
            "  {}: {}",
            c,
            if per_class.is_empty() {
                "no transiting ASNs".to_string()
            } else {
                per_class.join(" ")
            }
        );
    }
    Ok(())
}
