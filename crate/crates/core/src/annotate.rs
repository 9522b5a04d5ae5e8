//! Hop-by-hop origin resolution and AS-path cleaning.
//!
//! Annotation maps every replying hop (and the destination) through the
//! routing table with bogon shadowing. Cleaning then drops no-reply and
//! unknown-origin hops, collapses runs of hops in the same AS, and keeps
//! bogon hops in place, producing the AS-level path the transit classifier
//! works on.

use std::fmt::Write as _;
use std::net::Ipv4Addr;

use crate::bogon::{BogonRegistry, RfcClass};
use crate::net::AsnSet;
use crate::rib::{Origin, PrefixTable};
use crate::trace::TraceRecord;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HopResolution {
    NoReply,
    Resolved(Origin),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedHop {
    pub ttl: u32,
    pub addr: Option<Ipv4Addr>,
    pub resolution: HopResolution,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedTrace {
    pub hops: Vec<AnnotatedHop>,
    pub dst_resolution: Origin,
}

/// Resolves every hop of a trace plus its destination address.
pub fn annotate(
    trace: &TraceRecord,
    table: &PrefixTable,
    registry: &BogonRegistry,
) -> AnnotatedTrace {
    let hops = trace
        .hops
        .iter()
        .map(|hop| AnnotatedHop {
            ttl: hop.ttl,
            addr: hop.addr,
            resolution: match hop.addr {
                None => HopResolution::NoReply,
                Some(addr) => HopResolution::Resolved(table.lookup(addr, registry)),
            },
        })
        .collect();
    AnnotatedTrace {
        hops,
        dst_resolution: table.lookup(trace.dst, registry),
    }
}

/// One element of a cleaned AS-level path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PathElement {
    As(AsnSet),
    Bogon(RfcClass),
}

/// The cleaned AS path of one trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CleanPath {
    pub elements: Vec<PathElement>,
    /// Origin set of the trace source: the first hop that resolved to an
    /// ASN. Vantage points routinely sit behind private space, so the
    /// vantage-point address itself is never consulted.
    pub origin: Option<AsnSet>,
    pub dst_resolution: Origin,
    /// Unknown-origin hops dropped during cleaning. A nonzero count flags
    /// that the path may bridge a boundary we could not see.
    pub dropped_unknown: u32,
}

/// Drops no-reply and unknown hops, collapses same-AS runs, and extracts the
/// trace origin.
pub fn clean(annotated: &AnnotatedTrace) -> CleanPath {
    let mut elements = Vec::with_capacity(annotated.hops.len());
    let mut origin: Option<AsnSet> = None;
    let mut dropped_unknown = 0u32;

    for hop in &annotated.hops {
        match &hop.resolution {
            HopResolution::NoReply => {}
            HopResolution::Resolved(Origin::Unknown) => dropped_unknown += 1,
            HopResolution::Resolved(Origin::Bogon(class)) => {
                elements.push(PathElement::Bogon(*class));
            }
            HopResolution::Resolved(res @ (Origin::Known(_) | Origin::MultiOrigin(_))) => {
                let set = res.asn_set().expect("known or multi-origin");
                if origin.is_none() {
                    origin = Some(set.clone());
                }
                elements.push(PathElement::As(set));
            }
        }
    }

    CleanPath {
        elements: collapse_as_runs(elements),
        origin,
        dst_resolution: annotated.dst_resolution.clone(),
        dropped_unknown,
    }
}

/// Collapses runs of adjacent AS elements whose origin sets intersect into a
/// single element. "Same AS" across multi-origin sets means non-empty
/// intersection; the collapsed element carries the intersection of the run
/// when non-empty (the most specific agreement), otherwise the union.
/// Iterated until no two adjacent AS elements intersect, so the result is a
/// fixpoint and cleaning is idempotent.
pub fn collapse_as_runs(mut elements: Vec<PathElement>) -> Vec<PathElement> {
    loop {
        let collapsed = collapse_pass(&elements);
        if collapsed.len() == elements.len() {
            return collapsed;
        }
        elements = collapsed;
    }
}

fn collapse_pass(elements: &[PathElement]) -> Vec<PathElement> {
    let mut out = Vec::with_capacity(elements.len());
    let mut run: Vec<&AsnSet> = Vec::new();
    for elem in elements {
        match elem {
            PathElement::As(set) => {
                if let Some(last) = run.last() {
                    if last.intersects(set) {
                        run.push(set);
                        continue;
                    }
                    out.push(finish_run(&run));
                    run.clear();
                }
                run.push(set);
            }
            PathElement::Bogon(class) => {
                if !run.is_empty() {
                    out.push(finish_run(&run));
                    run.clear();
                }
                out.push(PathElement::Bogon(*class));
            }
        }
    }
    if !run.is_empty() {
        out.push(finish_run(&run));
    }
    out
}

fn finish_run(run: &[&AsnSet]) -> PathElement {
    let mut inter = run[0].clone();
    for set in &run[1..] {
        inter = inter.intersection(set);
    }
    if !inter.is_empty() {
        return PathElement::As(inter);
    }
    let mut union = run[0].clone();
    for set in &run[1..] {
        union = union.union(set);
    }
    PathElement::As(union)
}

/// Text dump of one annotated trace and its cleaned path, one element per
/// line. Fixture debugging aid.
pub fn dump_annotated(trace_id: u64, annotated: &AnnotatedTrace, clean: &CleanPath) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# trace {trace_id}");
    for hop in &annotated.hops {
        let addr = hop
            .addr
            .map(|a| a.to_string())
            .unwrap_or_else(|| "*".to_string());
        let res = match &hop.resolution {
            HopResolution::NoReply => "no-reply".to_string(),
            HopResolution::Resolved(Origin::Known(asn)) => format!("AS{asn}"),
            HopResolution::Resolved(Origin::MultiOrigin(set)) => format!("AS{{{set}}}"),
            HopResolution::Resolved(Origin::Unknown) => "unknown".to_string(),
            HopResolution::Resolved(Origin::Bogon(class)) => format!("bogon {class}"),
        };
        let _ = writeln!(out, "ttl={} {} {}", hop.ttl, addr, res);
    }
    let origin = clean
        .origin
        .as_ref()
        .map(|s| s.to_string())
        .unwrap_or_else(|| "none".to_string());
    let _ = writeln!(out, "origin: {origin}");
    let _ = writeln!(out, "dst: {:?}", clean.dst_resolution);
    for elem in &clean.elements {
        match elem {
            PathElement::As(set) => {
                let _ = writeln!(out, "AS{{{set}}}");
            }
            PathElement::Bogon(class) => {
                let _ = writeln!(out, "BOGON {class}");
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::Asn;
    use crate::rib::TableBuilder;
    use crate::trace::Hop;
    use std::collections::BTreeMap;

    fn fixture_table(registry: &BogonRegistry) -> PrefixTable {
        let mut builder = TableBuilder::new(registry);
        let src = builder.add_source("test");
        for (prefix, asn) in [
            ("20.10.0.0/16", 64500u32),
            ("20.11.0.0/16", 64510),
            ("20.0.0.0/16", 64496),
        ] {
            builder.add_entry(
                src,
                prefix.parse().unwrap(),
                AsnSet::singleton(Asn(asn)),
            );
        }
        builder.build().unwrap()
    }

    fn trace_with(hops: &[Option<&str>], dst: &str) -> TraceRecord {
        TraceRecord {
            vp: "vp0".to_string(),
            vp_addr: "10.0.0.2".parse().unwrap(),
            dst: dst.parse().unwrap(),
            cycle: 1,
            ts: "2023-07-18T00:00:03Z".parse().unwrap(),
            hops: hops
                .iter()
                .enumerate()
                .map(|(i, addr)| Hop {
                    ttl: (i + 1) as u32,
                    addr: addr.map(|a| a.parse().unwrap()),
                })
                .collect(),
            extra: BTreeMap::new(),
        }
    }

    fn asn_set(asns: &[u32]) -> AsnSet {
        asns.iter().copied().collect()
    }

    #[test]
    fn annotate_composes_lookups() {
        let registry = BogonRegistry::builtin();
        let table = fixture_table(&registry);
        let trace = trace_with(&[Some("192.168.0.1"), Some("20.10.0.1")], "20.11.0.9");
        let annotated = annotate(&trace, &table, &registry);
        assert_eq!(
            annotated.hops[0].resolution,
            HopResolution::Resolved(Origin::Bogon(RfcClass::Rfc1918))
        );
        assert_eq!(
            annotated.hops[1].resolution,
            HopResolution::Resolved(Origin::Known(Asn(64500)))
        );
        assert_eq!(annotated.dst_resolution, Origin::Known(Asn(64510)));
    }

    #[test]
    fn unrouted_destination_resolves_unknown() {
        let registry = BogonRegistry::builtin();
        let table = fixture_table(&registry);
        let trace = trace_with(&[Some("20.10.0.1")], "55.1.2.3");
        let annotated = annotate(&trace, &table, &registry);
        assert_eq!(annotated.dst_resolution, Origin::Unknown);
    }

    #[test]
    fn all_noreply_hops_stay_noreply() {
        let registry = BogonRegistry::builtin();
        let table = fixture_table(&registry);
        let trace = trace_with(&[None, None, None], "20.11.0.9");
        let annotated = annotate(&trace, &table, &registry);
        assert!(annotated
            .hops
            .iter()
            .all(|h| h.resolution == HopResolution::NoReply));
        let cleaned = clean(&annotated);
        assert!(cleaned.elements.is_empty());
        assert_eq!(cleaned.origin, None);
    }

    #[test]
    fn duplicate_collapse_preserves_bogon_position() {
        let elems = vec![
            PathElement::As(asn_set(&[64500])),
            PathElement::As(asn_set(&[64500])),
            PathElement::Bogon(RfcClass::Rfc1918),
            PathElement::As(asn_set(&[64500])),
        ];
        let collapsed = collapse_as_runs(elems);
        assert_eq!(
            collapsed,
            vec![
                PathElement::As(asn_set(&[64500])),
                PathElement::Bogon(RfcClass::Rfc1918),
                PathElement::As(asn_set(&[64500])),
            ]
        );
    }

    #[test]
    fn unknown_hops_are_dropped_and_flagged() {
        let registry = BogonRegistry::builtin();
        let table = fixture_table(&registry);
        // 55.0.0.1 is covered by no prefix: the IXP-style unknown hop.
        let trace = trace_with(
            &[Some("20.10.0.1"), Some("55.0.0.1"), Some("20.11.0.1")],
            "20.11.0.9",
        );
        let cleaned = clean(&annotate(&trace, &table, &registry));
        assert_eq!(
            cleaned.elements,
            vec![
                PathElement::As(asn_set(&[64500])),
                PathElement::As(asn_set(&[64510])),
            ]
        );
        assert_eq!(cleaned.dropped_unknown, 1);
    }

    #[test]
    fn origin_is_first_resolvable_hop() {
        let registry = BogonRegistry::builtin();
        let table = fixture_table(&registry);
        let trace = trace_with(&[Some("192.168.0.1"), Some("20.10.0.1")], "20.11.0.9");
        let cleaned = clean(&annotate(&trace, &table, &registry));
        assert_eq!(cleaned.origin, Some(asn_set(&[64500])));
        // The leading bogon stays in the path.
        assert_eq!(
            cleaned.elements[0],
            PathElement::Bogon(RfcClass::Rfc1918)
        );
    }

    #[test]
    fn multi_origin_runs_collapse_on_intersection() {
        let elems = vec![
            PathElement::As(asn_set(&[64500, 64501])),
            PathElement::As(asn_set(&[64501, 64502])),
            PathElement::As(asn_set(&[64900])),
        ];
        let collapsed = collapse_as_runs(elems);
        assert_eq!(
            collapsed,
            vec![
                PathElement::As(asn_set(&[64501])),
                PathElement::As(asn_set(&[64900])),
            ]
        );
    }

    #[test]
    fn collapse_reaches_a_fixpoint() {
        // The first pass merges pairwise-intersecting neighbours into a
        // union whose set then intersects the next element; iteration must
        // leave no adjacent intersecting pair behind.
        let elems = vec![
            PathElement::As(asn_set(&[1, 2])),
            PathElement::As(asn_set(&[2, 3])),
            PathElement::As(asn_set(&[3, 4])),
            PathElement::As(asn_set(&[1, 9])),
        ];
        let collapsed = collapse_as_runs(elems.clone());
        for pair in collapsed.windows(2) {
            if let (PathElement::As(a), PathElement::As(b)) = (&pair[0], &pair[1]) {
                assert!(!a.intersects(b), "adjacent sets still intersect");
            }
        }
        assert_eq!(collapse_as_runs(collapsed.clone()), collapsed);
    }
}
