//! Small domain types shared across the pipeline: AS numbers, sets of AS
//! numbers, and IPv4 CIDR prefixes.

use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

/// An autonomous system number (4-byte per RFC 6793).
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct Asn(pub u32);

impl fmt::Display for Asn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for Asn {
    fn from(v: u32) -> Self {
        Asn(v)
    }
}

/// A sorted, deduplicated set of AS numbers.
///
/// Origin sets are almost always singletons; multi-origin (MOAS) prefixes
/// produce small sets. Stored inline to keep per-hop lookups allocation-free
/// in the common case.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AsnSet(SmallVec<[Asn; 2]>);

impl AsnSet {
    pub fn new() -> Self {
        AsnSet(SmallVec::new())
    }

    pub fn singleton(asn: Asn) -> Self {
        AsnSet(SmallVec::from_buf_and_len([asn, Asn(0)], 1))
    }

    pub fn insert(&mut self, asn: Asn) {
        if let Err(pos) = self.0.binary_search(&asn) {
            self.0.insert(pos, asn);
        }
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, asn: Asn) -> bool {
        self.0.binary_search(&asn).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = Asn> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[Asn] {
        &self.0
    }

    /// True when the two sets share at least one AS number.
    pub fn intersects(&self, other: &AsnSet) -> bool {
        // Both sides are sorted; walk them in lockstep.
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return true,
            }
        }
        false
    }

    pub fn intersection(&self, other: &AsnSet) -> AsnSet {
        let mut out = SmallVec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    out.push(self.0[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        AsnSet(out)
    }

    pub fn union(&self, other: &AsnSet) -> AsnSet {
        let mut out = self.clone();
        for asn in other.iter() {
            out.insert(asn);
        }
        out
    }
}

impl FromIterator<Asn> for AsnSet {
    fn from_iter<T: IntoIterator<Item = Asn>>(iter: T) -> Self {
        let mut set = AsnSet::new();
        for asn in iter {
            set.insert(asn);
        }
        set
    }
}

impl FromIterator<u32> for AsnSet {
    fn from_iter<T: IntoIterator<Item = u32>>(iter: T) -> Self {
        iter.into_iter().map(Asn).collect()
    }
}

impl fmt::Display for AsnSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for asn in self.iter() {
            if !first {
                write!(f, " ")?;
            }
            write!(f, "{asn}")?;
            first = false;
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PrefixParseError {
    #[error("invalid prefix {0:?}: expected a.b.c.d/len")]
    Syntax(String),
    #[error("invalid prefix {0:?}: bad address")]
    Address(String),
    #[error("invalid prefix {0:?}: length must be 0..=32")]
    Length(String),
}

/// An IPv4 CIDR prefix, stored canonically (host bits zeroed).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ipv4Prefix {
    network: u32,
    length: u8,
}

impl Ipv4Prefix {
    /// Builds a prefix from an address and length, masking off host bits.
    pub fn new(addr: Ipv4Addr, length: u8) -> Self {
        assert!(length <= 32, "prefix length out of range: {length}");
        let raw = u32::from(addr);
        Ipv4Prefix {
            network: raw & Self::mask(length),
            length,
        }
    }

    fn mask(length: u8) -> u32 {
        if length == 0 {
            0
        } else {
            u32::MAX << (32 - u32::from(length))
        }
    }

    pub fn network(&self) -> Ipv4Addr {
        Ipv4Addr::from(self.network)
    }

    pub fn length(&self) -> u8 {
        self.length
    }

    /// First address covered by the prefix (the network address itself).
    pub fn first(&self) -> Ipv4Addr {
        Ipv4Addr::from(self.network)
    }

    /// Last address covered by the prefix.
    pub fn last(&self) -> Ipv4Addr {
        Ipv4Addr::from(self.network | !Self::mask(self.length))
    }

    pub fn contains(&self, addr: Ipv4Addr) -> bool {
        u32::from(addr) & Self::mask(self.length) == self.network
    }

    /// True when the address ranges of the two prefixes intersect. Because
    /// both are CIDR-aligned this is equivalent to one containing the other.
    pub fn overlaps(&self, other: &Ipv4Prefix) -> bool {
        let shorter = self.length.min(other.length);
        let mask = Self::mask(shorter);
        self.network & mask == other.network & mask
    }

    pub fn is_default_route(&self) -> bool {
        self.length == 0
    }
}

impl fmt::Display for Ipv4Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.network(), self.length)
    }
}

impl FromStr for Ipv4Prefix {
    type Err = PrefixParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (addr, len) = s
            .split_once('/')
            .ok_or_else(|| PrefixParseError::Syntax(s.to_string()))?;
        let addr: Ipv4Addr = addr
            .parse()
            .map_err(|_| PrefixParseError::Address(s.to_string()))?;
        let len: u8 = len
            .parse()
            .map_err(|_| PrefixParseError::Length(s.to_string()))?;
        if len > 32 {
            return Err(PrefixParseError::Length(s.to_string()));
        }
        Ok(Ipv4Prefix::new(addr, len))
    }
}

impl Serialize for Ipv4Prefix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Ipv4Prefix {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefix_parse_and_bounds() {
        let p: Ipv4Prefix = "10.0.0.0/8".parse().unwrap();
        assert_eq!(p.first(), Ipv4Addr::new(10, 0, 0, 0));
        assert_eq!(p.last(), Ipv4Addr::new(10, 255, 255, 255));
        assert!(p.contains(Ipv4Addr::new(10, 1, 2, 3)));
        assert!(!p.contains(Ipv4Addr::new(11, 0, 0, 0)));
        assert_eq!(p.to_string(), "10.0.0.0/8");
    }

    #[test]
    fn prefix_canonicalizes_host_bits() {
        let p = Ipv4Prefix::new(Ipv4Addr::new(192, 168, 17, 9), 16);
        assert_eq!(p.to_string(), "192.168.0.0/16");
    }

    #[test]
    fn prefix_zero_length_covers_everything() {
        let p: Ipv4Prefix = "0.0.0.0/0".parse().unwrap();
        assert!(p.contains(Ipv4Addr::new(255, 255, 255, 255)));
        assert!(p.is_default_route());
    }

    #[test]
    fn prefix_parse_rejects_garbage() {
        assert!("10.0.0.0".parse::<Ipv4Prefix>().is_err());
        assert!("10.0.0.0/33".parse::<Ipv4Prefix>().is_err());
        assert!("10.0.0/8".parse::<Ipv4Prefix>().is_err());
    }

    #[test]
    fn overlap_is_containment_either_way() {
        let p8: Ipv4Prefix = "10.0.0.0/8".parse().unwrap();
        let p16: Ipv4Prefix = "10.5.0.0/16".parse().unwrap();
        let other: Ipv4Prefix = "11.0.0.0/8".parse().unwrap();
        assert!(p8.overlaps(&p16));
        assert!(p16.overlaps(&p8));
        assert!(!p16.overlaps(&other));
    }

    #[test]
    fn asn_set_ops() {
        let a: AsnSet = [64500u32, 64501].into_iter().collect();
        let b: AsnSet = [64501u32, 64502].into_iter().collect();
        assert!(a.intersects(&b));
        assert_eq!(a.intersection(&b), AsnSet::singleton(Asn(64501)));
        assert_eq!(
            a.union(&b),
            [64500u32, 64501, 64502].into_iter().collect::<AsnSet>()
        );
        let mut dup: AsnSet = [7u32, 7, 7].into_iter().collect();
        dup.insert(Asn(7));
        assert_eq!(dup.len(), 1);
    }
}
