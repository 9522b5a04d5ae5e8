//! `bogontrace synth generate`: seed-controlled ground-truth corpora.

use std::collections::BTreeMap;
use std::path::PathBuf;

use bogontrace_core::bogon::{BogonRegistry, RfcClass};
use bogontrace_core::synth::{generate, GenConfig, SynthTopology, TopologyParams};
use clap::{Args, Subcommand};
use serde_json::json;

use crate::manifest::{write_output, Manifest};
use crate::{CliError, CliResult};

#[derive(Debug, Subcommand)]
pub enum SynthCommand {
    /// Generate a topology, RIB snapshot, trace corpus and ground truth.
    Generate(GenerateArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// RNG seed; everything downstream is a function of it.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Number of traceroutes to emit.
    #[arg(long, default_value_t = 1000)]
    pub traces: usize,
    /// Planted qualifying-bogon rate, e.g. rfc1918=0.197 (repeatable).
    #[arg(long = "plant", value_parser = parse_plant)]
    pub plants: Vec<(RfcClass, f64)>,
    /// Fraction of traces probing unrouted destinations.
    #[arg(long, default_value_t = 0.0)]
    pub unrouted: f64,
    /// Autonomous systems in the synthetic topology.
    #[arg(long, default_value_t = 12)]
    pub ases: usize,
    /// Fraction of ASes that filter bogons.
    #[arg(long, default_value_t = 0.25)]
    pub filter_fraction: f64,
    /// Of planted traces, the fraction with an AS sandwich around the bogon.
    #[arg(long, default_value_t = 0.5)]
    pub sandwich: f64,
    /// Output directory for rib.mrt, traces.jsonl and ground_truth.json.
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_plant(raw: &str) -> Result<(RfcClass, f64), String> {
    let (class, rate) = raw
        .split_once('=')
        .ok_or_else(|| format!("expected class=rate, got {raw:?}"))?;
    let class: RfcClass = class.parse().map_err(|e| format!("{e}"))?;
    let rate: f64 = rate.parse().map_err(|e| format!("bad rate {rate:?}: {e}"))?;
    if !(0.0..=1.0).contains(&rate) {
        return Err(format!("rate {rate} outside [0,1]"));
    }
    Ok((class, rate))
}

pub fn run(cmd: SynthCommand) -> CliResult<()> {
    match cmd {
        SynthCommand::Generate(args) => generate_cmd(args),
    }
}

fn generate_cmd(args: GenerateArgs) -> CliResult<()> {
    let plant_rates: BTreeMap<RfcClass, f64> = args.plants.iter().copied().collect();
    let params = TopologyParams {
        n_ases: args.ases,
        filter_fraction: args.filter_fraction,
        internal_classes: plant_rates.keys().copied().collect(),
        ..TopologyParams::default()
    };
    let topology = SynthTopology::random(&params, args.seed)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let config = GenConfig {
        n_traces: args.traces,
        plant_rates,
        unrouted_rate: args.unrouted,
        sandwich_fraction: args.sandwich,
        ..GenConfig::default()
    };
    let registry = BogonRegistry::builtin();
    let output =
        generate(&topology, &config, &registry).map_err(|e| CliError::Config(e.to_string()))?;

    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", args.out.display())))?;
    std::fs::write(args.out.join("rib.mrt"), &output.mrt)
        .map_err(|e| CliError::Config(format!("cannot write rib.mrt: {e}")))?;
    write_output(&args.out, "traces.jsonl", &output.jsonl)?;
    let truth = serde_json::to_string_pretty(&output.truth)
        .map_err(|e| CliError::Config(format!("ground truth serialization: {e}")))?;
    write_output(&args.out, "ground_truth.json", &truth)?;

    let mut manifest = Manifest::new(
        "synth-generate",
        json!({
            "seed": args.seed,
            "traces": args.traces,
            "plants": args.plants.iter().map(|(c, r)| format!("{c}={r}")).collect::<Vec<_>>(),
            "unrouted": args.unrouted,
            "ases": args.ases,
            "filter_fraction": args.filter_fraction,
            "sandwich": args.sandwich,
        }),
    );
    for name in ["rib.mrt", "traces.jsonl", "ground_truth.json"] {
        manifest.add_output(name);
    }
    manifest.counters = json!({
        "planted": output.truth.totals.traces_per_class,
        "unrouted": output.truth.totals.n_unrouted,
        "vps": output.truth.totals.n_vps,
    });
    manifest.write(&args.out)?;

    println!(
        "seed {}: {} traces ({} planted classes, {} unrouted) to {}",
        args.seed,
        args.traces,
        output.truth.totals.traces_per_class.len(),
        output.truth.totals.n_unrouted,
        args.out.display()
    );
    Ok(())
}
