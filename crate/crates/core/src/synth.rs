//! Ground-truth generator and brute-force reference implementations.
//!
//! The generator synthesizes an AS topology with per-AS bogon-filtering
//! policies, then emits a routing-table snapshot (TABLE_DUMP_V2 bytes), a
//! traceroute corpus (canonical JSONL) and the exact expected
//! classification results. Planting is exact-count: `⌊rate·n⌋` traces per
//! class carry a qualifying bogon hop, so recovery checks need no
//! statistical tolerance. A planted bogon appears only on paths where every
//! AS between the bogon and the vantage point does not filter bogons.
//!
//! The naive classifier and naive longest-prefix-match here are the
//! reference oracles for the production implementations: written as direct
//! transliterations of the case definitions, quadratic time, sharing no
//! classification code with the production path.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::net::Ipv4Addr;

use chrono::{DateTime, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotate::{CleanPath, PathElement};
use crate::bogon::{BogonRegistry, RfcClass};
use crate::net::{Asn, AsnSet, Ipv4Prefix};
use crate::trace::{Hop, TraceRecord};
use crate::transit::TransitFinding;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("no non-filtering path can carry a planted bogon for {}",
        .classes.iter().map(|c| c.label()).collect::<Vec<_>>().join(", "))]
    InfeasiblePlant { classes: Vec<RfcClass> },
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("invalid plant rates: {0}")]
    BadRates(String),
}

/// One synthetic autonomous system.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthAs {
    pub asn: Asn,
    /// Address pool the AS announces and draws hop addresses from. Pools
    /// are pairwise disjoint across ASes (nesting within one AS is fine).
    pub prefixes: Vec<Ipv4Prefix>,
    pub filters_bogons: bool,
    /// Bogon class this AS uses on its internal infrastructure, if any.
    pub internal_bogon: Option<RfcClass>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthTopology {
    pub ases: Vec<SynthAs>,
    /// Undirected adjacency, indices into `ases`.
    pub links: Vec<(usize, usize)>,
    /// Extra prefixes announced by more than one AS.
    pub moas_prefixes: Vec<(Ipv4Prefix, Vec<Asn>)>,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct TopologyParams {
    pub n_ases: usize,
    pub n_vps: usize,
    pub filter_fraction: f64,
    /// Classes that need at least one non-filtering AS using them
    /// internally.
    pub internal_classes: Vec<RfcClass>,
    pub extra_links: usize,
    pub moas_pairs: usize,
}

impl Default for TopologyParams {
    fn default() -> Self {
        TopologyParams {
            n_ases: 12,
            n_vps: 4,
            filter_fraction: 0.25,
            internal_classes: vec![RfcClass::Rfc1918],
            extra_links: 4,
            moas_pairs: 1,
        }
    }
}

fn pool_base(index: usize) -> u32 {
    // 20.0.0.0 + index * /16; stays far below the first bogon block for any
    // sane AS count.
    0x1400_0000 + ((index as u32) << 16)
}

impl SynthTopology {
    /// Seeded random topology. The non-filtering ASes form a connected core
    /// (spanning tree) so that planted bogons always have a clean corridor;
    /// filtering ASes hang off random nodes.
    pub fn random(params: &TopologyParams, seed: u64) -> Result<SynthTopology, SynthError> {
        let n = params.n_ases;
        let needed_core = params.internal_classes.len() + 2;
        if n < needed_core + 1 {
            return Err(SynthError::InvalidTopology(format!(
                "need at least {} ASes for {} planted classes",
                needed_core + 1,
                params.internal_classes.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x746f_706f);
        let n_filtering = ((n as f64) * params.filter_fraction).floor() as usize;
        let core_size = (n - n_filtering).max(needed_core);

        let mut indices: Vec<usize> = (0..n).collect();
        indices.shuffle(&mut rng);
        let core: Vec<usize> = indices[..core_size].to_vec();
        let filtering: Vec<usize> = indices[core_size..].to_vec();

        // Bogon-user ASes come from the tail of the core so vantage-point
        // homes (front of the core) stay distinct from them.
        let mut internal: BTreeMap<usize, RfcClass> = BTreeMap::new();
        for (k, class) in params.internal_classes.iter().enumerate() {
            internal.insert(core[core_size - 1 - k], *class);
        }

        let mut ases = Vec::with_capacity(n);
        for i in 0..n {
            let base = pool_base(i);
            let wide = Ipv4Prefix::new(Ipv4Addr::from(base), 16);
            // A more-specific announcement inside the same pool keeps the
            // longest-prefix machinery honest on real paths.
            let third = rng.gen_range(0..=255u32);
            let narrow = Ipv4Prefix::new(Ipv4Addr::from(base + (third << 8)), 24);
            ases.push(SynthAs {
                asn: Asn(64500 + i as u32),
                prefixes: vec![wide, narrow],
                filters_bogons: filtering.contains(&i),
                internal_bogon: internal.get(&i).copied(),
            });
        }

        let mut links: BTreeSet<(usize, usize)> = BTreeSet::new();
        let add = |links: &mut BTreeSet<(usize, usize)>, a: usize, b: usize| {
            if a != b {
                links.insert((a.min(b), a.max(b)));
            }
        };
        for i in 1..core.len() {
            let j = rng.gen_range(0..i);
            add(&mut links, core[i], core[j]);
        }
        for &f in &filtering {
            let j = rng.gen_range(0..core.len());
            add(&mut links, f, core[j]);
        }
        for _ in 0..params.extra_links {
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            add(&mut links, a, b);
        }

        let mut moas_prefixes = Vec::new();
        for p in 0..params.moas_pairs {
            let a = rng.gen_range(0..n);
            let mut b = rng.gen_range(0..n);
            if b == a {
                b = (b + 1) % n;
            }
            let prefix = Ipv4Prefix::new(Ipv4Addr::from(0x5a00_0000 + ((p as u32) << 8)), 24);
            moas_prefixes.push((prefix, vec![ases[a].asn, ases[b].asn]));
        }

        let topo = SynthTopology {
            ases,
            links: links.into_iter().collect(),
            moas_prefixes,
            seed,
        };
        topo.validate()?;
        Ok(topo)
    }

    /// Checks pool disjointness across ASes, bogon-block collisions and
    /// graph connectivity.
    pub fn validate(&self) -> Result<(), SynthError> {
        let registry = BogonRegistry::builtin();
        for (i, a) in self.ases.iter().enumerate() {
            for p in &a.prefixes {
                if registry.overlaps_bogon_block(p) {
                    return Err(SynthError::InvalidTopology(format!(
                        "pool {p} of {} overlaps a bogon block",
                        a.asn
                    )));
                }
            }
            for b in &self.ases[i + 1..] {
                for pa in &a.prefixes {
                    for pb in &b.prefixes {
                        if pa.overlaps(pb) {
                            return Err(SynthError::InvalidTopology(format!(
                                "pools {pa} and {pb} overlap across ASes"
                            )));
                        }
                    }
                }
            }
        }
        let n = self.ases.len();
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in &self.links {
            if a >= n || b >= n {
                return Err(SynthError::InvalidTopology(format!(
                    "link ({a},{b}) out of range"
                )));
            }
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(SynthError::InvalidTopology("graph not connected".into()));
        }
        Ok(())
    }

    /// The prefix → origin-set map the generated snapshot must parse back
    /// to.
    pub fn expected_prefix_map(&self) -> BTreeMap<Ipv4Prefix, AsnSet> {
        let mut map = BTreeMap::new();
        for a in &self.ases {
            for p in &a.prefixes {
                map.insert(*p, AsnSet::singleton(a.asn));
            }
        }
        for (prefix, asns) in &self.moas_prefixes {
            let set: AsnSet = asns.iter().copied().collect();
            map.insert(*prefix, set);
        }
        map
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.ases.len()];
        for &(a, b) in &self.links {
            adj[a].push(b);
            adj[b].push(a);
        }
        for neighbours in &mut adj {
            neighbours.sort_unstable();
        }
        adj
    }
}

/// Generation knobs beyond the topology itself.
#[derive(Debug, Clone)]
pub struct GenConfig {
    pub n_traces: usize,
    /// Fraction of traces carrying a qualifying bogon hop, per class.
    pub plant_rates: BTreeMap<RfcClass, f64>,
    /// Fraction of traces probing a destination no prefix covers.
    pub unrouted_rate: f64,
    /// Chance of inserting a no-reply (`*`) hop between real hops.
    pub noreply_rate: f64,
    /// Chance of inserting a hop from unannounced public space (the
    /// IXP-style unknown that cleaning drops).
    pub unknown_hop_rate: f64,
    /// Of planted traces, the fraction whose bogon sits inside an AS
    /// sandwich.
    pub sandwich_fraction: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            n_traces: 1000,
            plant_rates: BTreeMap::new(),
            unrouted_rate: 0.0,
            noreply_rate: 0.08,
            unknown_hop_rate: 0.05,
            sandwich_fraction: 0.5,
        }
    }
}

/// Per-trace expectation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceTruth {
    pub trace_id: u64,
    pub vp: String,
    /// Planted qualifying bogon class, if any.
    pub class: Option<RfcClass>,
    pub ba: BTreeSet<Asn>,
    pub bb: BTreeSet<Asn>,
    pub bc: BTreeSet<Asn>,
    pub unrouted_dst: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ExpectedTotals {
    pub n_traces: u64,
    pub n_vps: u64,
    pub n_vps_observing: u64,
    pub traces_per_class: BTreeMap<RfcClass, u64>,
    pub n_unrouted: u64,
    /// case key ("ba"/"bb"/"bc") → class → expected unique ASN set.
    pub asn_sets: BTreeMap<String, BTreeMap<RfcClass, BTreeSet<Asn>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub per_trace: Vec<TraceTruth>,
    pub totals: ExpectedTotals,
}

#[derive(Debug)]
pub struct SynthOutput {
    pub mrt: Vec<u8>,
    pub jsonl: String,
    pub truth: GroundTruth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Assignment {
    Plant(RfcClass),
    Unrouted,
    Clean,
}

/// Generates the three artifacts. Deterministic for a fixed seed; the seed
/// lives in the topology.
pub fn generate(
    topology: &SynthTopology,
    config: &GenConfig,
    registry: &BogonRegistry,
) -> Result<SynthOutput, SynthError> {
    topology.validate()?;
    let n = config.n_traces;
    let mut rng = ChaCha8Rng::seed_from_u64(topology.seed);

    // Exact planting: ⌊rate·n⌋ traces per class, assigned up front.
    let mut assignments: Vec<Assignment> = Vec::with_capacity(n);
    for (class, rate) in &config.plant_rates {
        if !(0.0..=1.0).contains(rate) {
            return Err(SynthError::BadRates(format!("{class}={rate}")));
        }
        let count = exact_count(*rate, n);
        assignments.extend(std::iter::repeat_n(Assignment::Plant(*class), count));
    }
    let unrouted_count = exact_count(config.unrouted_rate, n);
    assignments.extend(std::iter::repeat_n(Assignment::Unrouted, unrouted_count));
    if assignments.len() > n {
        return Err(SynthError::BadRates(
            "plant and unrouted rates exceed 1.0 of the corpus".into(),
        ));
    }
    assignments.resize(n, Assignment::Clean);
    assignments.shuffle(&mut rng);

    // Vantage points live in non-filtering ASes that don't themselves use
    // bogons internally.
    let adj = topology.adjacency();
    let nonfilter_adj = nonfiltering_adjacency(topology, &adj);
    let homes = vp_homes(topology);
    if homes.is_empty() {
        return Err(SynthError::InvalidTopology(
            "no non-filtering AS available to host vantage points".into(),
        ));
    }
    let n_vps = homes.len().min(8);
    let vp_names: Vec<String> = (0..n_vps).map(|i| format!("vp{i:02}")).collect();
    let vp_home: Vec<usize> = homes[..n_vps].to_vec();

    // Feasibility: per planted class, the (vantage point home, corridor)
    // candidates where every AS between the vantage point and the bogon
    // refuses to filter bogons.
    let classes_needed: BTreeSet<RfcClass> = config.plant_rates.keys().copied().collect();
    let mut corridors: BTreeMap<RfcClass, Vec<(usize, Vec<usize>)>> = BTreeMap::new();
    let mut infeasible = Vec::new();
    for class in &classes_needed {
        let mut candidates = Vec::new();
        for (b, a) in topology.ases.iter().enumerate() {
            if a.internal_bogon != Some(*class) || a.filters_bogons {
                continue;
            }
            for &home in &vp_home {
                if home == b {
                    continue;
                }
                if let Some(path) = bfs_path(&nonfilter_adj, home, b) {
                    candidates.push((home, path));
                }
            }
        }
        candidates.dedup();
        if candidates.is_empty() {
            infeasible.push(*class);
        } else {
            corridors.insert(*class, candidates);
        }
    }
    if !infeasible.is_empty() {
        return Err(SynthError::InfeasiblePlant {
            classes: infeasible,
        });
    }

    let base_ts = Utc.with_ymd_and_hms(2023, 7, 18, 0, 0, 0).unwrap();

    let mut jsonl = String::new();
    let mut per_trace = Vec::with_capacity(n);
    let mut totals = ExpectedTotals {
        n_traces: n as u64,
        n_unrouted: unrouted_count as u64,
        ..ExpectedTotals::default()
    };
    let mut vps_seen: BTreeSet<String> = BTreeSet::new();
    let mut vps_observing: BTreeSet<String> = BTreeSet::new();

    for (idx, assignment) in assignments.iter().enumerate() {
        let (record, truth) = match assignment {
            Assignment::Plant(class) => {
                let candidates = &corridors[class];
                let (home, corridor) = &candidates[rng.gen_range(0..candidates.len())];
                let vp = pick_vp_for_home(&vp_home, *home, &vp_names, &mut rng);
                let sandwich = rng.gen_bool(config.sandwich_fraction.clamp(0.0, 1.0));
                build_planted_trace(
                    topology, &adj, registry, config, &mut rng, idx as u64, &vp, *home,
                    corridor, *class, sandwich, base_ts,
                )
            }
            Assignment::Unrouted => build_plain_trace(
                topology, &adj, config, &mut rng, idx as u64, &vp_names, &vp_home, true,
                base_ts,
            ),
            Assignment::Clean => build_plain_trace(
                topology, &adj, config, &mut rng, idx as u64, &vp_names, &vp_home, false,
                base_ts,
            ),
        };
        vps_seen.insert(record.vp.clone());
        if truth.class.is_some() {
            vps_observing.insert(record.vp.clone());
        }
        if let Some(class) = truth.class {
            *totals.traces_per_class.entry(class).or_insert(0) += 1;
            for (key, set) in [("ba", &truth.ba), ("bb", &truth.bb), ("bc", &truth.bc)] {
                totals
                    .asn_sets
                    .entry(key.to_string())
                    .or_default()
                    .entry(class)
                    .or_default()
                    .extend(set.iter().copied());
            }
        }
        let mut line = Vec::new();
        crate::trace::write_canonical_line(&mut line, &record).expect("write to vec");
        jsonl.push_str(&String::from_utf8(line).expect("canonical json is utf-8"));
        per_trace.push(truth);
    }
    totals.n_vps = vps_seen.len() as u64;
    totals.n_vps_observing = vps_observing.len() as u64;

    let mrt = write_snapshot(topology, &mut rng);

    Ok(SynthOutput {
        mrt,
        jsonl,
        truth: GroundTruth {
            seed: topology.seed,
            per_trace,
            totals,
        },
    })
}

/// `⌊rate·n⌋` with a tiny epsilon so decimal rates like 0.197 of 10000 land
/// on the intended integer.
pub fn exact_count(rate: f64, n: usize) -> usize {
    ((rate * n as f64) + 1e-9).floor() as usize
}

fn vp_homes(topology: &SynthTopology) -> Vec<usize> {
    topology
        .ases
        .iter()
        .enumerate()
        .filter(|(_, a)| !a.filters_bogons && a.internal_bogon.is_none())
        .map(|(i, _)| i)
        .collect()
}

fn nonfiltering_adjacency(topology: &SynthTopology, adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    adj.iter()
        .enumerate()
        .map(|(i, neighbours)| {
            if topology.ases[i].filters_bogons {
                Vec::new()
            } else {
                neighbours
                    .iter()
                    .copied()
                    .filter(|&j| !topology.ases[j].filters_bogons)
                    .collect()
            }
        })
        .collect()
}

fn bfs_path(adj: &[Vec<usize>], from: usize, to: usize) -> Option<Vec<usize>> {
    let mut prev = vec![usize::MAX; adj.len()];
    let mut queue = VecDeque::from([from]);
    prev[from] = from;
    while let Some(v) = queue.pop_front() {
        if v == to {
            let mut path = vec![to];
            let mut cur = to;
            while cur != from {
                cur = prev[cur];
                path.push(cur);
            }
            path.reverse();
            return Some(path);
        }
        for &w in &adj[v] {
            if prev[w] == usize::MAX {
                prev[w] = v;
                queue.push_back(w);
            }
        }
    }
    None
}

fn pick_vp_for_home(
    vp_home: &[usize],
    home: usize,
    vp_names: &[String],
    rng: &mut ChaCha8Rng,
) -> String {
    let matching: Vec<usize> = (0..vp_home.len()).filter(|&i| vp_home[i] == home).collect();
    let pick = matching[rng.gen_range(0..matching.len())];
    vp_names[pick].clone()
}

fn pool_addr(topology: &SynthTopology, as_idx: usize, rng: &mut ChaCha8Rng) -> Ipv4Addr {
    let wide = topology.ases[as_idx].prefixes[0];
    let size = u32::from(wide.last()) - u32::from(wide.first());
    let offset = rng.gen_range(1..size);
    Ipv4Addr::from(u32::from(wide.first()) + offset)
}

fn bogon_addr(registry: &BogonRegistry, class: RfcClass, rng: &mut ChaCha8Rng) -> Ipv4Addr {
    let block = registry
        .all_classes()
        .iter()
        .find(|c| c.rfc == class)
        .and_then(|c| c.blocks.first())
        .copied()
        .expect("class has at least one block");
    let size = u32::from(block.last()) - u32::from(block.first());
    let offset = rng.gen_range(1..size.min(0xFFFF));
    Ipv4Addr::from(u32::from(block.first()) + offset)
}

fn unrouted_addr(rng: &mut ChaCha8Rng) -> Ipv4Addr {
    // 55.0.0.0/8 is never announced by the synthetic topology.
    Ipv4Addr::from(0x3700_0000 + rng.gen_range(1..0x00FF_FFFFu32))
}

/// Assembles hops with sequential TTLs, sprinkling no-reply and
/// unknown-space hops between real ones.
struct HopBuilder<'a> {
    hops: Vec<Hop>,
    noreply_rate: f64,
    unknown_rate: f64,
    rng: &'a mut ChaCha8Rng,
}

impl<'a> HopBuilder<'a> {
    fn new(config: &GenConfig, rng: &'a mut ChaCha8Rng) -> Self {
        HopBuilder {
            hops: Vec::new(),
            noreply_rate: config.noreply_rate.clamp(0.0, 1.0),
            unknown_rate: config.unknown_hop_rate.clamp(0.0, 1.0),
            rng,
        }
    }

    fn filler(&mut self) {
        if self.rng.gen_bool(self.noreply_rate) {
            self.hops.push(Hop {
                ttl: self.hops.len() as u32 + 1,
                addr: None,
            });
        }
        if self.rng.gen_bool(self.unknown_rate) {
            let addr = unrouted_addr(self.rng);
            self.hops.push(Hop {
                ttl: self.hops.len() as u32 + 1,
                addr: Some(addr),
            });
        }
    }

    fn real(&mut self, addr: Ipv4Addr) {
        self.filler();
        self.hops.push(Hop {
            ttl: self.hops.len() as u32 + 1,
            addr: Some(addr),
        });
    }
}

#[allow(clippy::too_many_arguments)]
fn build_planted_trace(
    topology: &SynthTopology,
    adj: &[Vec<usize>],
    registry: &BogonRegistry,
    config: &GenConfig,
    rng: &mut ChaCha8Rng,
    trace_id: u64,
    vp: &str,
    home: usize,
    corridor: &[usize],
    class: RfcClass,
    sandwich: bool,
    base_ts: DateTime<Utc>,
) -> (TraceRecord, TraceTruth) {
    let b = *corridor.last().expect("corridor ends at the bogon user");

    // Destination AS: anywhere but the bogon-user AS, so an accidental
    // revisit cannot manufacture a sandwich (the tail is a simple path and
    // never returns to b).
    let choices: Vec<usize> = (0..topology.ases.len()).filter(|&i| i != b).collect();
    let dst_as = choices[rng.gen_range(0..choices.len())];
    let tail: Vec<usize> = bfs_path(adj, b, dst_as)
        .map(|p| p[1..].to_vec())
        .unwrap_or_default();

    let mut hb = HopBuilder::new(config, rng);
    for &as_idx in corridor {
        let n_hops = if hb.rng.gen_bool(0.3) { 2 } else { 1 };
        for _ in 0..n_hops {
            let addr = pool_addr(topology, as_idx, hb.rng);
            hb.real(addr);
        }
    }
    let bogon = bogon_addr(registry, class, hb.rng);
    hb.real(bogon);
    if sandwich {
        let addr = pool_addr(topology, b, hb.rng);
        hb.real(addr);
    }
    for &as_idx in &tail {
        let addr = pool_addr(topology, as_idx, hb.rng);
        hb.real(addr);
    }
    let dst = pool_addr(topology, dst_as, hb.rng);
    if hb.rng.gen_bool(0.5) {
        hb.real(dst);
    }
    let hops = hb.hops;

    let origin_asn = topology.ases[home].asn;
    let ba: BTreeSet<Asn> = corridor[1..]
        .iter()
        .map(|&i| topology.ases[i].asn)
        .filter(|a| *a != origin_asn)
        .collect();
    let bb: BTreeSet<Asn> = [topology.ases[b].asn].into_iter().collect();
    let bc: BTreeSet<Asn> = if sandwich { bb.clone() } else { BTreeSet::new() };

    let record = TraceRecord {
        vp: vp.to_string(),
        vp_addr: vp_private_addr(vp),
        dst,
        cycle: 4211,
        ts: base_ts + chrono::Duration::seconds(trace_id as i64),
        hops,
        extra: BTreeMap::new(),
    };
    let truth = TraceTruth {
        trace_id,
        vp: vp.to_string(),
        class: Some(class),
        ba,
        bb,
        bc,
        unrouted_dst: false,
    };
    (record, truth)
}

#[allow(clippy::too_many_arguments)]
fn build_plain_trace(
    topology: &SynthTopology,
    adj: &[Vec<usize>],
    config: &GenConfig,
    rng: &mut ChaCha8Rng,
    trace_id: u64,
    vp_names: &[String],
    vp_home: &[usize],
    unrouted: bool,
    base_ts: DateTime<Utc>,
) -> (TraceRecord, TraceTruth) {
    let vp_idx = rng.gen_range(0..vp_names.len());
    let home = vp_home[vp_idx];
    let dst_as = rng.gen_range(0..topology.ases.len());
    let path = bfs_path(adj, home, dst_as).unwrap_or_else(|| vec![home]);

    let mut hb = HopBuilder::new(config, rng);
    for &as_idx in &path {
        let n_hops = if hb.rng.gen_bool(0.3) { 2 } else { 1 };
        for _ in 0..n_hops {
            let addr = pool_addr(topology, as_idx, hb.rng);
            hb.real(addr);
        }
    }
    let dst = if unrouted {
        unrouted_addr(hb.rng)
    } else {
        let dst = pool_addr(topology, dst_as, hb.rng);
        if hb.rng.gen_bool(0.5) {
            hb.real(dst);
        }
        dst
    };
    let hops = hb.hops;

    let vp = vp_names[vp_idx].clone();
    let record = TraceRecord {
        vp: vp.clone(),
        vp_addr: vp_private_addr(&vp),
        dst,
        cycle: 4211,
        ts: base_ts + chrono::Duration::seconds(trace_id as i64),
        hops,
        extra: BTreeMap::new(),
    };
    let truth = TraceTruth {
        trace_id,
        vp,
        class: None,
        ba: BTreeSet::new(),
        bb: BTreeSet::new(),
        bc: BTreeSet::new(),
        unrouted_dst: unrouted,
    };
    (record, truth)
}

/// Vantage points sit behind private space; the probing host address is
/// deliberately RFC1918 and must never be consulted for the trace origin.
fn vp_private_addr(vp: &str) -> Ipv4Addr {
    let mut h: u32 = 0;
    for b in vp.bytes() {
        h = h.wrapping_mul(31).wrapping_add(u32::from(b));
    }
    Ipv4Addr::new(10, 99, (h >> 8) as u8, h as u8)
}

// ---------------------------------------------------------------------------
// TABLE_DUMP_V2 writer
// ---------------------------------------------------------------------------

/// AS_PATH segment specification for the writer.
#[derive(Debug, Clone)]
pub enum PathSegmentSpec {
    Sequence(Vec<u32>),
    Set(Vec<u32>),
}

#[derive(Debug, Clone)]
pub struct RibEntrySpec {
    pub peer_index: u16,
    pub originated: u32,
    pub segments: Vec<PathSegmentSpec>,
}

/// Minimal TABLE_DUMP_V2 writer covering exactly the subset the parser
/// reads: one peer index table plus RIB_IPV4_UNICAST records with AS_PATH
/// attributes (4-byte ASNs).
#[derive(Debug, Default)]
pub struct MrtWriter {
    buf: Vec<u8>,
    timestamp: u32,
}

impl MrtWriter {
    pub fn new(timestamp: u32) -> Self {
        MrtWriter {
            buf: Vec::new(),
            timestamp,
        }
    }

    fn record(&mut self, subtype: u16, body: &[u8]) {
        self.buf.extend_from_slice(&self.timestamp.to_be_bytes());
        self.buf.extend_from_slice(&13u16.to_be_bytes());
        self.buf.extend_from_slice(&subtype.to_be_bytes());
        self.buf.extend_from_slice(&(body.len() as u32).to_be_bytes());
        self.buf.extend_from_slice(body);
    }

    pub fn peer_index_table(&mut self, collector_id: u32, view: &str, peers: &[(Ipv4Addr, u32)]) {
        let mut body = Vec::new();
        body.extend_from_slice(&collector_id.to_be_bytes());
        body.extend_from_slice(&(view.len() as u16).to_be_bytes());
        body.extend_from_slice(view.as_bytes());
        body.extend_from_slice(&(peers.len() as u16).to_be_bytes());
        for (addr, asn) in peers {
            body.push(0x02); // IPv4 peer, 4-byte AS
            body.extend_from_slice(&u32::from(*addr).to_be_bytes());
            body.extend_from_slice(&addr.octets());
            body.extend_from_slice(&asn.to_be_bytes());
        }
        self.record(1, &body);
    }

    pub fn rib_ipv4_unicast(&mut self, sequence: u32, prefix: Ipv4Prefix, entries: &[RibEntrySpec]) {
        let mut body = Vec::new();
        body.extend_from_slice(&sequence.to_be_bytes());
        body.push(prefix.length());
        let n = usize::from(prefix.length()).div_ceil(8);
        body.extend_from_slice(&prefix.network().octets()[..n]);
        body.extend_from_slice(&(entries.len() as u16).to_be_bytes());
        for entry in entries {
            let mut path = Vec::new();
            for segment in &entry.segments {
                let (seg_type, asns) = match segment {
                    PathSegmentSpec::Sequence(asns) => (2u8, asns),
                    PathSegmentSpec::Set(asns) => (1u8, asns),
                };
                path.push(seg_type);
                path.push(asns.len() as u8);
                for asn in asns {
                    path.extend_from_slice(&asn.to_be_bytes());
                }
            }
            let mut attrs = Vec::new();
            attrs.push(0x40); // well-known transitive
            attrs.push(2); // AS_PATH
            attrs.push(path.len() as u8);
            attrs.extend_from_slice(&path);

            body.extend_from_slice(&entry.peer_index.to_be_bytes());
            body.extend_from_slice(&entry.originated.to_be_bytes());
            body.extend_from_slice(&(attrs.len() as u16).to_be_bytes());
            body.extend_from_slice(&attrs);
        }
        self.record(2, &body);
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

/// Writes the topology's announcements as a TABLE_DUMP_V2 snapshot. A
/// seeded mix of plain, prepended and AS_SET-terminated paths plus
/// multi-entry groups keeps the parser exercised.
fn write_snapshot(topology: &SynthTopology, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let mut writer = MrtWriter::new(1_689_638_400); // 2023-07-18T00:00:00Z
    let transit = 65000u32;
    writer.peer_index_table(
        0xc0a8_0001,
        "synth",
        &[
            (Ipv4Addr::new(198, 51, 100, 1), transit),
            (Ipv4Addr::new(198, 51, 100, 2), transit + 1),
        ],
    );
    let mut sequence = 0u32;
    for (prefix, origins) in topology.expected_prefix_map() {
        let origin_list: Vec<u32> = origins.iter().map(|a| a.0).collect();
        let mut entries = Vec::new();
        if origin_list.len() == 1 {
            let origin = origin_list[0];
            let mut seq = vec![transit, origin];
            if rng.gen_bool(0.3) {
                seq.insert(1, origin); // prepending: irrelevant to the origin
            }
            entries.push(RibEntrySpec {
                peer_index: 0,
                originated: 1_689_552_000,
                segments: vec![PathSegmentSpec::Sequence(seq)],
            });
            if rng.gen_bool(0.5) {
                entries.push(RibEntrySpec {
                    peer_index: 1,
                    originated: 1_689_552_000,
                    segments: vec![PathSegmentSpec::Sequence(vec![transit + 1, origin])],
                });
            }
        } else if rng.gen_bool(0.5) {
            // MOAS as an AS_SET terminal on a single entry.
            entries.push(RibEntrySpec {
                peer_index: 0,
                originated: 1_689_552_000,
                segments: vec![
                    PathSegmentSpec::Sequence(vec![transit]),
                    PathSegmentSpec::Set(origin_list),
                ],
            });
        } else {
            // MOAS as separate entries with different terminals.
            for (i, origin) in origin_list.iter().enumerate() {
                entries.push(RibEntrySpec {
                    peer_index: (i % 2) as u16,
                    originated: 1_689_552_000,
                    segments: vec![PathSegmentSpec::Sequence(vec![transit, *origin])],
                });
            }
        }
        writer.rib_ipv4_unicast(sequence, prefix, &entries);
        sequence += 1;
    }
    writer.finish()
}

// ---------------------------------------------------------------------------
// Naive reference implementations
// ---------------------------------------------------------------------------

/// Most specific containing prefix by linear scan. Range arithmetic on
/// purpose, not the trie's mask-and-walk.
pub fn naive_lpm(
    prefixes: &[(Ipv4Prefix, AsnSet)],
    addr: Ipv4Addr,
) -> Option<&(Ipv4Prefix, AsnSet)> {
    let raw = u32::from(addr);
    let mut best: Option<&(Ipv4Prefix, AsnSet)> = None;
    for entry in prefixes {
        let first = u32::from(entry.0.first());
        let last = u32::from(entry.0.last());
        if raw < first || raw > last {
            continue;
        }
        best = match best {
            None => Some(entry),
            Some(b) if entry.0.length() > b.0.length() => Some(entry),
            keep => keep,
        };
    }
    best
}

/// Direct transliteration of the three case definitions: for every bogon
/// hop, rescan the whole path. Quadratic on purpose; shares no logic with
/// the production classifier.
pub fn naive_classify(path: &CleanPath) -> Option<TransitFinding> {
    let origin = path.origin.clone()?;
    let elems = &path.elements;
    let mut finding = TransitFinding::default();

    for i in 0..elems.len() {
        let PathElement::Bogon(class) = elems[i] else {
            continue;
        };
        // A run of adjacent bogons of one class is one event at its first
        // position.
        if i > 0 {
            if let PathElement::Bogon(prev) = elems[i - 1] {
                if prev == class {
                    continue;
                }
            }
        }
        // Qualify: some AS element before the bogon shares nothing with the
        // origin.
        let mut qualifies = false;
        for e in &elems[..i] {
            if let PathElement::As(set) = e {
                if !shares_member(set, &origin) {
                    qualifies = true;
                }
            }
        }
        if !qualifies {
            continue;
        }

        finding.triggering_positions.push(i);
        let sets = finding.per_class.entry(class).or_default();

        // BA: every AS on the path before the bogon, minus the origin AS.
        for e in &elems[..i] {
            if let PathElement::As(set) = e {
                for asn in set.iter() {
                    if !origin.contains(asn) {
                        sets.ba.insert(asn);
                    }
                }
            }
        }

        // BB: the AS found right before the bogon.
        let mut pred: Option<&AsnSet> = None;
        for e in elems[..i].iter().rev() {
            if let PathElement::As(set) = e {
                pred = Some(set);
                break;
            }
        }
        let pred = pred.expect("a qualifying bogon has an AS element before it");
        if pred.len() > 1 {
            sets.bb_multi_origin = true;
        }
        for asn in pred.iter() {
            if !origin.contains(asn) {
                sets.bb.insert(asn);
            }
        }

        // BC: the same AS found before and after the bogon.
        let mut sandwich = false;
        for e in &elems[i + 1..] {
            if let PathElement::As(set) = e {
                if shares_member(set, pred) {
                    sandwich = true;
                }
            }
        }
        if sandwich {
            for asn in pred.iter() {
                if !origin.contains(asn) {
                    sets.bc.insert(asn);
                }
            }
        }
    }
    Some(finding)
}

fn shares_member(a: &AsnSet, b: &AsnSet) -> bool {
    for x in a.iter() {
        for y in b.iter() {
            if x == y {
                return true;
            }
        }
    }
    false
}
