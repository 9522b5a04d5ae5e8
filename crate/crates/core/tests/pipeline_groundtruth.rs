//! End-to-end check: the real pipeline (MRT parse → table build → annotate
//! → clean → classify → aggregate) reproduces the generator's ground truth
//! exactly, across many random seeds.

use std::collections::BTreeMap;

use bogontrace_core::bogon::{BogonRegistry, RfcClass};
use bogontrace_core::mrt::MrtReader;
use bogontrace_core::pipeline::analyze_measurement;
use bogontrace_core::rib::TableBuilder;
use bogontrace_core::synth::{generate, GenConfig, SynthTopology, TopologyParams};
use bogontrace_core::trace::{IngestMode, TraceReader};
use bogontrace_core::transit::Case;

fn run_seed(seed: u64) {
    let registry = BogonRegistry::builtin();
    let params = TopologyParams {
        n_ases: 10 + (seed % 6) as usize,
        filter_fraction: 0.2 + (seed % 3) as f64 * 0.1,
        internal_classes: vec![RfcClass::Rfc1918, RfcClass::Rfc6598, RfcClass::Rfc3927],
        ..TopologyParams::default()
    };
    let topology = SynthTopology::random(&params, seed).expect("feasible topology");
    let mut plant_rates = BTreeMap::new();
    plant_rates.insert(RfcClass::Rfc1918, 0.25);
    plant_rates.insert(RfcClass::Rfc6598, 0.10);
    plant_rates.insert(RfcClass::Rfc3927, 0.05);
    let config = GenConfig {
        n_traces: 120,
        plant_rates,
        unrouted_rate: 0.05,
        ..GenConfig::default()
    };
    let out = generate(&topology, &config, &registry).expect("generation succeeds");

    // Through the real parser and builder.
    let mut builder = TableBuilder::new(&registry);
    builder
        .add_mrt_stream("synth", MrtReader::new(&out.mrt[..]))
        .expect("snapshot parses");
    let table = builder.build().expect("routable prefixes");

    // Through the real ingestion.
    let reader = TraceReader::new(
        std::io::BufReader::new(out.jsonl.as_bytes()),
        IngestMode::Strict,
    );
    let traces: Vec<_> = reader.collect::<Result<_, _>>().expect("corpus parses");
    assert_eq!(traces.len(), config.n_traces);

    let result = analyze_measurement("e2e", &traces, &table, &registry, 1);
    let stats = &result.stats;
    let truth = &out.truth;

    assert_eq!(stats.n_traces, truth.totals.n_traces, "seed {seed}");
    assert_eq!(stats.n_vps, truth.totals.n_vps, "seed {seed}");
    assert_eq!(
        stats.n_vps_observing_bogons, truth.totals.n_vps_observing,
        "seed {seed}"
    );
    assert_eq!(
        stats.n_vps_observing_any_bogon, truth.totals.n_vps_observing,
        "seed {seed}: generator plants only qualifying bogons"
    );
    assert_eq!(stats.n_unrouted_dst, truth.totals.n_unrouted, "seed {seed}");
    assert_eq!(stats.n_skipped_no_origin, 0, "seed {seed}");
    assert_eq!(
        stats.n_traces_per_class, truth.totals.traces_per_class,
        "seed {seed}"
    );

    for (case, key) in [(Case::Ba, "ba"), (Case::Bb, "bb"), (Case::Bc, "bc")] {
        let expected = truth.totals.asn_sets.get(key).cloned().unwrap_or_default();
        for class in RfcClass::ALL {
            let want = expected.get(&class).cloned().unwrap_or_default();
            let got = stats.asn_set(case, class);
            assert_eq!(got, want, "seed {seed} case {key} class {class}");
        }
    }

    // Per-trace agreement, not just totals.
    for (i, expected) in truth.per_trace.iter().enumerate() {
        let outcome = &result.outcomes[i];
        assert_eq!(outcome.dst_unrouted, expected.unrouted_dst, "seed {seed} trace {i}");
        match expected.class {
            None => assert!(
                outcome.finding.as_ref().is_none_or(|f| f.is_empty()),
                "seed {seed} trace {i}: unexpected finding"
            ),
            Some(class) => {
                let finding = outcome.finding.as_ref().expect("finding present");
                let sets = finding.per_class.get(&class).expect("class present");
                assert_eq!(sets.ba, expected.ba, "seed {seed} trace {i}");
                assert_eq!(sets.bb, expected.bb, "seed {seed} trace {i}");
                assert_eq!(sets.bc, expected.bc, "seed {seed} trace {i}");
                assert_eq!(finding.per_class.len(), 1, "seed {seed} trace {i}");
            }
        }
    }
}

#[test]
fn pipeline_reproduces_ground_truth_across_seeds() {
    for seed in 0..60 {
        run_seed(seed);
    }
}
