//! End-to-end wiring: annotate, clean and classify a measurement's traces,
//! then aggregate. Traces are independent, so the work parallelizes over a
//! configurable worker count; outcomes are collected in corpus order and
//! all merges are commutative counting, which keeps results byte-identical
//! for any worker count.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::annotate::{annotate, clean, PathElement};
use crate::bogon::{BogonRegistry, RfcClass};
use crate::metrics::{aggregate, MeasurementStats, TraceOutcome};
use crate::rib::PrefixTable;
use crate::trace::TraceRecord;
use crate::transit::{classify_path, Case};

#[derive(Debug, Clone)]
pub struct MeasurementOutput {
    pub stats: MeasurementStats,
    pub outcomes: Vec<TraceOutcome>,
}

fn outcome_for(
    trace_id: u64,
    trace: &TraceRecord,
    table: &PrefixTable,
    registry: &BogonRegistry,
) -> TraceOutcome {
    let annotated = annotate(trace, table, registry);
    let cleaned = clean(&annotated);
    let mut classes_present: Vec<RfcClass> = cleaned
        .elements
        .iter()
        .filter_map(|e| match e {
            PathElement::Bogon(class) => Some(*class),
            PathElement::As(_) => None,
        })
        .collect();
    classes_present.sort_unstable();
    classes_present.dedup();
    TraceOutcome {
        trace_id,
        vp: trace.vp.clone(),
        classes_present,
        finding: classify_path(&cleaned),
        dst_unrouted: cleaned.dst_resolution.is_unknown(),
        dropped_unknown: cleaned.dropped_unknown,
    }
}

/// Runs annotation and classification over a whole measurement.
///
/// `workers == 1` stays on the calling thread; larger counts use a local
/// thread pool. Output is identical either way.
pub fn analyze_measurement(
    label: &str,
    traces: &[TraceRecord],
    table: &PrefixTable,
    registry: &BogonRegistry,
    workers: usize,
) -> MeasurementOutput {
    let outcomes: Vec<TraceOutcome> = if workers <= 1 {
        traces
            .iter()
            .enumerate()
            .map(|(i, t)| outcome_for(i as u64, t, table, registry))
            .collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("thread pool");
        pool.install(|| {
            traces
                .par_iter()
                .enumerate()
                .map(|(i, t)| outcome_for(i as u64, t, table, registry))
                .collect()
        })
    };
    MeasurementOutput {
        stats: aggregate(label, &outcomes),
        outcomes,
    }
}

/// Findings CSV: one row per (trace, class, case, asn) membership, filtered
/// to `case_filter` when given. The `multi_origin` flag marks BB rows fed by
/// a multi-origin predecessor.
pub fn findings_csv(outcomes: &[TraceOutcome], case_filter: Option<Case>) -> String {
    let mut out = String::from("trace_id,class,case,asn,multi_origin\n");
    for outcome in outcomes {
        let Some(finding) = &outcome.finding else {
            continue;
        };
        for (class, sets) in &finding.per_class {
            for case in Case::ALL {
                if case_filter.is_some_and(|c| c != case) {
                    continue;
                }
                let flag = match case {
                    Case::Bb | Case::Bc => sets.bb_multi_origin,
                    Case::Ba => false,
                };
                for asn in sets.get(case) {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{}",
                        outcome.trace_id,
                        class,
                        case,
                        asn,
                        if flag { 1 } else { 0 }
                    );
                }
            }
        }
    }
    out
}

/// Per-class unique ASN list for one case, newline-separated, ascending.
pub fn asn_list(stats: &MeasurementStats, case: Case, class: RfcClass) -> String {
    let set: BTreeSet<_> = stats.asn_set(case, class);
    let mut out = String::new();
    for asn in set {
        let _ = writeln!(out, "{asn}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{Asn, AsnSet};
    use crate::rib::TableBuilder;
    use crate::trace::Hop;
    use std::collections::BTreeMap;

    fn fixture() -> (BogonRegistry, PrefixTable, Vec<TraceRecord>) {
        let registry = BogonRegistry::builtin();
        let mut builder = TableBuilder::new(&registry);
        let src = builder.add_source("test");
        for (prefix, asn) in [
            ("20.0.0.0/16", 64496u32),
            ("20.1.0.0/16", 64500),
            ("20.2.0.0/16", 64510),
        ] {
            builder.add_entry(src, prefix.parse().unwrap(), AsnSet::singleton(Asn(asn)));
        }
        let table = builder.build().unwrap();

        let mk = |vp: &str, hops: &[Option<&str>], dst: &str| TraceRecord {
            vp: vp.to_string(),
            vp_addr: "10.0.0.1".parse().unwrap(),
            dst: dst.parse().unwrap(),
            cycle: 1,
            ts: "2023-07-18T00:00:00Z".parse().unwrap(),
            hops: hops
                .iter()
                .enumerate()
                .map(|(i, a)| Hop {
                    ttl: i as u32 + 1,
                    addr: a.map(|s| s.parse().unwrap()),
                })
                .collect(),
            extra: BTreeMap::new(),
        };
        let traces = vec![
            // Qualifying RFC1918 bogon behind a foreign AS.
            mk(
                "vpA",
                &[
                    Some("20.0.0.1"),
                    Some("20.1.0.1"),
                    Some("192.168.7.7"),
                    Some("20.1.0.2"),
                ],
                "20.2.0.9",
            ),
            // Origin-internal bogon: present but not qualifying.
            mk(
                "vpB",
                &[Some("20.0.0.1"), Some("10.0.0.5"), Some("20.1.0.3")],
                "20.2.0.9",
            ),
            // Unrouted destination, no bogons.
            mk("vpB", &[Some("20.0.0.2"), Some("20.1.0.4")], "55.0.0.9"),
        ];
        (registry, table, traces)
    }

    #[test]
    fn pipeline_counts_and_sets() {
        let (registry, table, traces) = fixture();
        let out = analyze_measurement("2023-07", &traces, &table, &registry, 1);
        let stats = &out.stats;
        assert_eq!(stats.n_traces, 3);
        assert_eq!(stats.n_vps, 2);
        assert_eq!(stats.n_vps_observing_bogons, 1); // only vpA qualifies
        assert_eq!(stats.n_vps_observing_any_bogon, 2);
        assert_eq!(stats.n_traces_per_class[&RfcClass::Rfc1918], 2);
        assert_eq!(stats.n_unrouted_dst, 1);
        assert_eq!(
            stats.asn_set(Case::Ba, RfcClass::Rfc1918),
            [Asn(64500)].into_iter().collect()
        );
        assert_eq!(
            stats.asn_set(Case::Bc, RfcClass::Rfc1918),
            [Asn(64500)].into_iter().collect()
        );
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let (registry, table, traces) = fixture();
        let one = analyze_measurement("m", &traces, &table, &registry, 1);
        let eight = analyze_measurement("m", &traces, &table, &registry, 8);
        assert_eq!(findings_csv(&one.outcomes, None), findings_csv(&eight.outcomes, None));
        assert_eq!(
            crate::metrics::stats_csv(&[one.stats]),
            crate::metrics::stats_csv(&[eight.stats])
        );
    }

    #[test]
    fn case_filter_restricts_findings_rows() {
        let (registry, table, traces) = fixture();
        let out = analyze_measurement("m", &traces, &table, &registry, 1);
        let bc_only = findings_csv(&out.outcomes, Some(Case::Bc));
        for line in bc_only.lines().skip(1) {
            assert!(line.contains(",BC,"), "unexpected row {line}");
        }
        let all = findings_csv(&out.outcomes, None);
        assert!(all.contains(",BA,"));
        assert!(all.contains(",BB,"));
    }
}
