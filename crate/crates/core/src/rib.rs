//! Merged routing-table snapshot: origin resolution per prefix from one or
//! more MRT RIB dumps, exposed through an immutable longest-prefix-match
//! table.
//!
//! Entries whose prefix overlaps a bogon block are dropped at build time
//! (collectors do see leaked special-purpose prefixes and their origin must
//! be ignored), as is the default route. Identical prefixes from multiple
//! sources have their origin sets unioned; multi-origin prefixes are kept as
//! sets rather than resolved to a single ASN.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;
use std::net::Ipv4Addr;

use serde::Serialize;
use thiserror::Error;

use crate::bogon::{BogonRegistry, RfcClass};
use crate::mrt::{MrtError, MrtReader, MrtRecord, SkipCounters};
use crate::net::{Asn, AsnSet, Ipv4Prefix};

/// Resolution of an IPv4 address to its announcing origin.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Origin {
    Known(Asn),
    MultiOrigin(AsnSet),
    Unknown,
    Bogon(RfcClass),
}

impl Origin {
    pub fn from_set(set: AsnSet) -> Origin {
        match set.len() {
            0 => Origin::Unknown,
            1 => Origin::Known(set.as_slice()[0]),
            _ => Origin::MultiOrigin(set),
        }
    }

    /// The ASN set behind Known/MultiOrigin resolutions.
    pub fn asn_set(&self) -> Option<AsnSet> {
        match self {
            Origin::Known(asn) => Some(AsnSet::singleton(*asn)),
            Origin::MultiOrigin(set) => Some(set.clone()),
            Origin::Unknown | Origin::Bogon(_) => None,
        }
    }

    pub fn is_unknown(&self) -> bool {
        matches!(self, Origin::Unknown)
    }
}

#[derive(Debug, Error)]
pub enum RibError {
    #[error("no routable prefixes")]
    NoRoutablePrefixes,
    #[error("mrt parse error in {source_name}: {source}")]
    Parse {
        source_name: String,
        #[source]
        source: MrtError,
    },
}

/// Why entries were dropped or rewritten during the build.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DropCounters {
    /// Prefix overlapped a bogon block (leaked special-purpose prefix).
    pub bogon_overlap: u64,
    pub default_route: u64,
    /// Entry carried no usable origin ASNs (empty AS_PATH, or AS0 only).
    pub empty_origin: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RibEntry {
    pub prefix: Ipv4Prefix,
    pub origin: Origin,
    /// Bitmask over the builder's source list.
    sources: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TableMeta {
    pub sources: Vec<String>,
    pub entry_count: usize,
    pub drops: DropCounters,
    pub skips: SkipCounters,
}

const NO_NODE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
struct TrieNode {
    children: [u32; 2],
    entry: u32,
}

impl TrieNode {
    fn empty() -> Self {
        TrieNode {
            children: [NO_NODE, NO_NODE],
            entry: NO_NODE,
        }
    }
}

/// Immutable longest-prefix-match table from IPv4 address to origin.
///
/// Backed by a binary trie over address bits; lookups visit at most 32
/// nodes. Built from sorted content, so tables over the same entry set are
/// structurally identical regardless of input order.
#[derive(Debug, Clone)]
pub struct PrefixTable {
    nodes: Vec<TrieNode>,
    entries: Vec<RibEntry>,
    meta: TableMeta,
}

impl PrefixTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn meta(&self) -> &TableMeta {
        &self.meta
    }

    pub fn entries(&self) -> &[RibEntry] {
        &self.entries
    }

    /// Raw longest-prefix match, ignoring bogon shadowing.
    pub fn longest_match(&self, addr: Ipv4Addr) -> Option<&RibEntry> {
        let raw = u32::from(addr);
        let mut node = 0u32;
        let mut best = self.nodes[0].entry;
        for bit in (0..32).rev() {
            let next = self.nodes[node as usize].children[((raw >> bit) & 1) as usize];
            if next == NO_NODE {
                break;
            }
            node = next;
            let entry = self.nodes[node as usize].entry;
            if entry != NO_NODE {
                best = entry;
            }
        }
        (best != NO_NODE).then(|| &self.entries[best as usize])
    }

    /// Resolves an address: bogons shadow the table regardless of contents,
    /// then longest prefix match, then Unknown.
    pub fn lookup(&self, addr: Ipv4Addr, registry: &BogonRegistry) -> Origin {
        if let Some(class) = registry.classify(addr) {
            return Origin::Bogon(class);
        }
        match self.longest_match(addr) {
            Some(entry) => entry.origin.clone(),
            None => Origin::Unknown,
        }
    }

    /// Debug dump: one `prefix,origins,source` line per entry, in prefix
    /// order.
    pub fn dump_csv(&self) -> String {
        let mut out = String::from("prefix,origins,source\n");
        for entry in &self.entries {
            let origins = match &entry.origin {
                Origin::Known(asn) => asn.to_string(),
                Origin::MultiOrigin(set) => set
                    .iter()
                    .map(|a| a.to_string())
                    .collect::<Vec<_>>()
                    .join("+"),
                Origin::Unknown | Origin::Bogon(_) => String::new(),
            };
            let sources = self
                .meta
                .sources
                .iter()
                .enumerate()
                .filter(|(i, _)| entry.sources & (1 << i) != 0)
                .map(|(_, name)| name.as_str())
                .collect::<Vec<_>>()
                .join("+");
            let _ = writeln!(out, "{},{},{}", entry.prefix, origins, sources);
        }
        out
    }
}

/// Accumulates RIB entries from one or more snapshots, then builds the
/// immutable table.
pub struct TableBuilder<'r> {
    registry: &'r BogonRegistry,
    merged: BTreeMap<Ipv4Prefix, (AsnSet, u64)>,
    sources: Vec<String>,
    drops: DropCounters,
    skips: SkipCounters,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourceId(usize);

impl<'r> TableBuilder<'r> {
    pub fn new(registry: &'r BogonRegistry) -> Self {
        TableBuilder {
            registry,
            merged: BTreeMap::new(),
            sources: Vec::new(),
            drops: DropCounters::default(),
            skips: SkipCounters::default(),
        }
    }

    pub fn add_source(&mut self, name: &str) -> SourceId {
        assert!(self.sources.len() < 64, "at most 64 RIB sources");
        self.sources.push(name.to_string());
        SourceId(self.sources.len() - 1)
    }

    /// Adds one (prefix, origin set) observation, applying the leaked-prefix
    /// and default-route drop rules.
    pub fn add_entry(&mut self, source: SourceId, prefix: Ipv4Prefix, origins: AsnSet) {
        if prefix.is_default_route() {
            self.drops.default_route += 1;
            return;
        }
        if self.registry.overlaps_bogon_block(&prefix) {
            self.drops.bogon_overlap += 1;
            return;
        }
        // AS0 is not a valid origin (RFC 7607); strip it.
        let origins: AsnSet = origins.iter().filter(|a| a.0 != 0).collect();
        if origins.is_empty() {
            self.drops.empty_origin += 1;
            return;
        }
        let slot = self
            .merged
            .entry(prefix)
            .or_insert_with(|| (AsnSet::new(), 0));
        for asn in origins.iter() {
            slot.0.insert(asn);
        }
        slot.1 |= 1 << source.0;
    }

    /// Drains an MRT stream into the builder. Parse errors abort: RIB
    /// corruption is control-data corruption.
    pub fn add_mrt_stream<R: Read>(
        &mut self,
        name: &str,
        reader: MrtReader<R>,
    ) -> Result<(), RibError> {
        let source = self.add_source(name);
        let mut reader = reader;
        loop {
            match reader.next_record() {
                Ok(Some(MrtRecord::RibIpv4Unicast(group))) => {
                    let origins = group.origin_set();
                    self.add_entry(source, group.prefix, origins);
                }
                Ok(Some(MrtRecord::PeerIndexTable(_))) => {}
                Ok(None) => break,
                Err(e) => {
                    return Err(RibError::Parse {
                        source_name: name.to_string(),
                        source: e,
                    })
                }
            }
        }
        let s = reader.skip_counters();
        self.skips.legacy_table_dump += s.legacy_table_dump;
        self.skips.other_types += s.other_types;
        self.skips.other_subtypes += s.other_subtypes;
        Ok(())
    }

    pub fn build(self) -> Result<PrefixTable, RibError> {
        if self.merged.is_empty() {
            return Err(RibError::NoRoutablePrefixes);
        }
        let mut entries = Vec::with_capacity(self.merged.len());
        let mut nodes = vec![TrieNode::empty()];
        // BTreeMap iteration is prefix-ordered, so the trie layout depends
        // only on the merged content, not on insertion order.
        for (prefix, (origins, sources)) in self.merged {
            let entry_idx = entries.len() as u32;
            entries.push(RibEntry {
                prefix,
                origin: Origin::from_set(origins),
                sources,
            });
            let raw = u32::from(prefix.first());
            let mut node = 0usize;
            for i in 0..prefix.length() {
                let bit = ((raw >> (31 - i)) & 1) as usize;
                let next = nodes[node].children[bit];
                node = if next == NO_NODE {
                    nodes.push(TrieNode::empty());
                    let idx = (nodes.len() - 1) as u32;
                    nodes[node].children[bit] = idx;
                    idx as usize
                } else {
                    next as usize
                };
            }
            nodes[node].entry = entry_idx;
        }
        let meta = TableMeta {
            sources: self.sources,
            entry_count: entries.len(),
            drops: self.drops,
            skips: self.skips,
        };
        Ok(PrefixTable {
            nodes,
            entries,
            meta,
        })
    }
}

/// Expands a collector URL template, replacing `{YYYY}`, `{MM}` and `{DD}`
/// placeholders with zero-padded date components.
pub fn expand_url_template(template: &str, year: i32, month: u32, day: u32) -> String {
    template
        .replace("{YYYY}", &format!("{year:04}"))
        .replace("{MM}", &format!("{month:02}"))
        .replace("{DD}", &format!("{day:02}"))
}

/// Built-in archive URL templates for the two collectors the analysis
/// defaults to. Overridable through configuration.
pub fn default_url_templates() -> Vec<(String, String)> {
    vec![
        (
            "rrc00".to_string(),
            "https://data.ris.ripe.net/rrc00/{YYYY}.{MM}/bview.{YYYY}{MM}{DD}.0000.gz".to_string(),
        ),
        (
            "route-views2".to_string(),
            "https://archive.routeviews.org/bgpdata/{YYYY}.{MM}/RIBS/rib.{YYYY}{MM}{DD}.0000.bz2"
                .to_string(),
        ),
    ]
}
