//! Registry of the special-purpose ("bogon") IPv4 address blocks tracked by
//! the pipeline, and constant-time classification of addresses into them.
//!
//! The built-in table covers eight RFC-defined categories spanning eleven
//! CIDR blocks. Three additional special-purpose blocks (0.0.0.0/8 and the
//! two AS112 service prefixes) are deliberately carried as an explicit
//! exclusion set: they are expected to be visible on the public Internet, so
//! reports can tell "excluded by methodology" apart from plain public space.

use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::net::Ipv4Prefix;

/// The RFC category of a bogon block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RfcClass {
    /// Former Class E, 240.0.0.0/4.
    Rfc1112,
    /// Loopback, 127.0.0.0/8.
    Rfc1122,
    /// Private-Use, 10.0.0.0/8 + 172.16.0.0/12 + 192.168.0.0/16.
    Rfc1918,
    /// Link-Local, 169.254.0.0/16.
    Rfc3927,
    /// Documentation, 192.0.2.0/24 + 198.51.100.0/24 + 203.0.113.0/24.
    Rfc5737,
    /// Shared Address Space (CGN), 100.64.0.0/10.
    Rfc6598,
    /// Protocol Assignments, 192.0.0.0/24.
    Rfc6890,
    /// 6to4 Relay Anycast, 192.88.99.0/24.
    Rfc7526,
}

impl RfcClass {
    /// All classes in ascending RFC-number order.
    pub const ALL: [RfcClass; 8] = [
        RfcClass::Rfc1112,
        RfcClass::Rfc1122,
        RfcClass::Rfc1918,
        RfcClass::Rfc3927,
        RfcClass::Rfc5737,
        RfcClass::Rfc6598,
        RfcClass::Rfc6890,
        RfcClass::Rfc7526,
    ];

    pub fn number(self) -> u16 {
        match self {
            RfcClass::Rfc1112 => 1112,
            RfcClass::Rfc1122 => 1122,
            RfcClass::Rfc1918 => 1918,
            RfcClass::Rfc3927 => 3927,
            RfcClass::Rfc5737 => 5737,
            RfcClass::Rfc6598 => 6598,
            RfcClass::Rfc6890 => 6890,
            RfcClass::Rfc7526 => 7526,
        }
    }

    /// Canonical label, e.g. `RFC1918`.
    pub fn label(self) -> &'static str {
        match self {
            RfcClass::Rfc1112 => "RFC1112",
            RfcClass::Rfc1122 => "RFC1122",
            RfcClass::Rfc1918 => "RFC1918",
            RfcClass::Rfc3927 => "RFC3927",
            RfcClass::Rfc5737 => "RFC5737",
            RfcClass::Rfc6598 => "RFC6598",
            RfcClass::Rfc6890 => "RFC6890",
            RfcClass::Rfc7526 => "RFC7526",
        }
    }

    /// Lowercase label used in file names and CSV column headers.
    pub fn key(self) -> &'static str {
        match self {
            RfcClass::Rfc1112 => "rfc1112",
            RfcClass::Rfc1122 => "rfc1122",
            RfcClass::Rfc1918 => "rfc1918",
            RfcClass::Rfc3927 => "rfc3927",
            RfcClass::Rfc5737 => "rfc5737",
            RfcClass::Rfc6598 => "rfc6598",
            RfcClass::Rfc6890 => "rfc6890",
            RfcClass::Rfc7526 => "rfc7526",
        }
    }

    pub fn default_description(self) -> &'static str {
        match self {
            RfcClass::Rfc1112 => "Former Class E",
            RfcClass::Rfc1122 => "Loopback",
            RfcClass::Rfc1918 => "Private-Use",
            RfcClass::Rfc3927 => "Link-Local",
            RfcClass::Rfc5737 => "Documentation",
            RfcClass::Rfc6598 => "Shared Address Space",
            RfcClass::Rfc6890 => "Protocol Assignments",
            RfcClass::Rfc7526 => "6to4 Relay Anycast",
        }
    }
}

impl fmt::Display for RfcClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for RfcClass {
    type Err = RegistryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_uppercase();
        let norm = norm.strip_prefix("RFC").unwrap_or(&norm);
        RfcClass::ALL
            .into_iter()
            .find(|c| c.number().to_string() == norm)
            .ok_or_else(|| RegistryError::UnknownClass(s.to_string()))
    }
}

impl Serialize for RfcClass {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for RfcClass {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One bogon category: its RFC label, a short description, and the CIDR
/// blocks it covers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BogonClass {
    pub rfc: RfcClass,
    pub description: String,
    pub blocks: Vec<Ipv4Prefix>,
}

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("unknown bogon class {0:?}")]
    UnknownClass(String),
    #[error("blocks {a} ({a_class}) and {b} ({b_class}) overlap")]
    OverlappingBlocks {
        a: Ipv4Prefix,
        a_class: String,
        b: Ipv4Prefix,
        b_class: String,
    },
    #[error("bad registry config: {0}")]
    Config(String),
}

/// Where an address falls with respect to the registry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assessment {
    Bogon(RfcClass),
    /// Special-purpose space deliberately not treated as bogon.
    Excluded,
    Public,
}

/// Immutable classification table. Safe to share across threads.
#[derive(Debug, Clone)]
pub struct BogonRegistry {
    classes: Vec<BogonClass>,
    exclusions: Vec<Ipv4Prefix>,
    // (first, last, class), sorted by first address; ranges are disjoint.
    ranges: Vec<(u32, u32, RfcClass)>,
}

impl BogonRegistry {
    /// Builds a registry, validating that blocks are pairwise disjoint across
    /// classes and that exclusions do not overlap any class block.
    pub fn new(
        classes: Vec<BogonClass>,
        exclusions: Vec<Ipv4Prefix>,
    ) -> Result<Self, RegistryError> {
        let mut ranges: Vec<(u32, u32, RfcClass)> = Vec::new();
        for class in &classes {
            for block in &class.blocks {
                ranges.push((u32::from(block.first()), u32::from(block.last()), class.rfc));
            }
        }
        ranges.sort_unstable();
        for pair in ranges.windows(2) {
            if pair[1].0 <= pair[0].1 {
                return Err(RegistryError::OverlappingBlocks {
                    a: prefix_of(&classes, pair[0].2, pair[0].0),
                    a_class: pair[0].2.to_string(),
                    b: prefix_of(&classes, pair[1].2, pair[1].0),
                    b_class: pair[1].2.to_string(),
                });
            }
        }
        for excl in &exclusions {
            for class in &classes {
                if let Some(block) = class.blocks.iter().find(|b| b.overlaps(excl)) {
                    return Err(RegistryError::OverlappingBlocks {
                        a: *block,
                        a_class: class.rfc.to_string(),
                        b: *excl,
                        b_class: "exclusion".to_string(),
                    });
                }
            }
        }
        Ok(BogonRegistry {
            classes,
            exclusions,
            ranges,
        })
    }

    /// The built-in table: eight classes, eleven blocks, three exclusions.
    pub fn builtin() -> Self {
        let classes = RfcClass::ALL
            .into_iter()
            .map(|rfc| BogonClass {
                rfc,
                description: rfc.default_description().to_string(),
                blocks: builtin_blocks(rfc)
                    .iter()
                    .map(|s| s.parse().expect("built-in block"))
                    .collect(),
            })
            .collect();
        let exclusions = ["0.0.0.0/8", "192.31.196.0/24", "192.175.48.0/24"]
            .iter()
            .map(|s| s.parse().expect("built-in exclusion"))
            .collect();
        BogonRegistry::new(classes, exclusions).expect("built-in table is disjoint")
    }

    /// Classifies an address into its bogon category, if any. Addresses in
    /// the exclusion set and ordinary public space return `None`.
    pub fn classify(&self, addr: Ipv4Addr) -> Option<RfcClass> {
        let raw = u32::from(addr);
        // Last range whose first address is <= raw.
        let idx = self.ranges.partition_point(|r| r.0 <= raw);
        if idx == 0 {
            return None;
        }
        let (_, last, class) = self.ranges[idx - 1];
        (raw <= last).then_some(class)
    }

    /// Like [`classify`](Self::classify) but distinguishes excluded
    /// special-purpose space from plain public space.
    pub fn assess(&self, addr: Ipv4Addr) -> Assessment {
        if let Some(class) = self.classify(addr) {
            return Assessment::Bogon(class);
        }
        if self.exclusions.iter().any(|p| p.contains(addr)) {
            Assessment::Excluded
        } else {
            Assessment::Public
        }
    }

    /// All classes in ascending RFC-number order. Stable across calls.
    pub fn all_classes(&self) -> &[BogonClass] {
        &self.classes
    }

    pub fn exclusions(&self) -> &[Ipv4Prefix] {
        &self.exclusions
    }

    pub fn block_count(&self) -> usize {
        self.ranges.len()
    }

    /// Every (class, block) pair, in class order.
    pub fn blocks(&self) -> impl Iterator<Item = (RfcClass, Ipv4Prefix)> + '_ {
        self.classes
            .iter()
            .flat_map(|c| c.blocks.iter().map(move |b| (c.rfc, *b)))
    }

    /// True when the prefix's address range intersects any bogon block.
    pub fn overlaps_bogon_block(&self, prefix: &Ipv4Prefix) -> bool {
        let first = u32::from(prefix.first());
        let last = u32::from(prefix.last());
        self.ranges.iter().any(|&(f, l, _)| first <= l && f <= last)
    }

    /// Applies a config-file override, replacing the block lists of the named
    /// classes and, when given, the whole exclusion list. Classes absent from
    /// the config keep their built-in blocks.
    pub fn with_overrides(&self, config: &RegistryConfig) -> Result<Self, RegistryError> {
        let mut classes = self.classes.clone();
        for over in &config.class {
            let class = classes
                .iter_mut()
                .find(|c| c.rfc == over.rfc)
                .expect("RfcClass is a closed enum");
            class.blocks = over.blocks.clone();
            if let Some(desc) = &over.description {
                class.description = desc.clone();
            }
        }
        let exclusions = config
            .exclusions
            .clone()
            .unwrap_or_else(|| self.exclusions.clone());
        BogonRegistry::new(classes, exclusions)
    }
}

impl Default for BogonRegistry {
    fn default() -> Self {
        BogonRegistry::builtin()
    }
}

fn builtin_blocks(rfc: RfcClass) -> &'static [&'static str] {
    match rfc {
        RfcClass::Rfc1112 => &["240.0.0.0/4"],
        RfcClass::Rfc1122 => &["127.0.0.0/8"],
        RfcClass::Rfc1918 => &["10.0.0.0/8", "172.16.0.0/12", "192.168.0.0/16"],
        RfcClass::Rfc3927 => &["169.254.0.0/16"],
        RfcClass::Rfc5737 => &["192.0.2.0/24", "198.51.100.0/24", "203.0.113.0/24"],
        RfcClass::Rfc6598 => &["100.64.0.0/10"],
        RfcClass::Rfc6890 => &["192.0.0.0/24"],
        RfcClass::Rfc7526 => &["192.88.99.0/24"],
    }
}

fn prefix_of(classes: &[BogonClass], rfc: RfcClass, first: u32) -> Ipv4Prefix {
    classes
        .iter()
        .filter(|c| c.rfc == rfc)
        .flat_map(|c| c.blocks.iter())
        .find(|b| u32::from(b.first()) == first)
        .copied()
        .unwrap_or_else(|| Ipv4Prefix::new(Ipv4Addr::from(first), 32))
}

/// On-disk registry override, TOML:
///
/// ```toml
/// [[class]]
/// rfc = "RFC1918"
/// blocks = ["10.0.0.0/8"]
///
/// exclusions = ["0.0.0.0/8"]
/// ```
#[derive(Debug, Clone, Default, Deserialize)]
pub struct RegistryConfig {
    #[serde(default)]
    pub class: Vec<ClassOverride>,
    #[serde(default)]
    pub exclusions: Option<Vec<Ipv4Prefix>>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ClassOverride {
    pub rfc: RfcClass,
    #[serde(default)]
    pub description: Option<String>,
    pub blocks: Vec<Ipv4Prefix>,
}

impl RegistryConfig {
    pub fn from_toml(text: &str) -> Result<Self, RegistryError> {
        toml::from_str(text).map_err(|e| RegistryError::Config(e.to_string()))
    }
}
