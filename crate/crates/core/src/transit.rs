//! Transit attribution: which ASes forwarded packets with bogon source
//! addresses beyond their border.
//!
//! For every bogon hop found on a cleaned path, three nested attribution
//! cases are computed, ignoring bogons still inside the network that
//! originated the traceroute (private space inside your own network is
//! expected; it should not be visible once the path crosses into another
//! AS):
//!
//! * **BA** — every AS on the path before the bogon hop. The bogon-sourced
//!   reply reached the trace origin, so all of them forwarded it, though
//!   reverse-path asymmetry makes this the least certain case.
//! * **BB** — the AS immediately before the bogon hop.
//! * **BC** — the sandwich: BB when the same AS also appears after the
//!   bogon, which makes it highly likely the bogon address lives inside
//!   that AS.
//!
//! By construction `BC ⊆ BB ⊆ BA` for every path. The origin AS itself is
//! excluded from all three sets: it receives the bogon-sourced packets
//! rather than forwarding them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::annotate::{CleanPath, PathElement};
use crate::bogon::RfcClass;
use crate::net::Asn;

/// The three attribution cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Case {
    Ba,
    Bb,
    Bc,
}

impl Case {
    pub const ALL: [Case; 3] = [Case::Ba, Case::Bb, Case::Bc];

    pub fn label(self) -> &'static str {
        match self {
            Case::Ba => "BA",
            Case::Bb => "BB",
            Case::Bc => "BC",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Case::Ba => "ba",
            Case::Bb => "bb",
            Case::Bc => "bc",
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Case {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "BA" => Ok(Case::Ba),
            "BB" => Ok(Case::Bb),
            "BC" => Ok(Case::Bc),
            other => Err(format!("unknown case {other:?}, expected BA, BB or BC")),
        }
    }
}

impl Serialize for Case {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for Case {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Per-class attribution sets for one trace.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CaseSets {
    pub ba: BTreeSet<Asn>,
    pub bb: BTreeSet<Asn>,
    pub bc: BTreeSet<Asn>,
    /// True when a BB contribution came from a multi-origin predecessor; the
    /// full set is included and the rows are flagged downstream.
    pub bb_multi_origin: bool,
}

impl CaseSets {
    pub fn get(&self, case: Case) -> &BTreeSet<Asn> {
        match case {
            Case::Ba => &self.ba,
            Case::Bb => &self.bb,
            Case::Bc => &self.bc,
        }
    }

    pub fn chain_holds(&self) -> bool {
        self.bc.is_subset(&self.bb) && self.bb.is_subset(&self.ba)
    }
}

/// Attribution result for one trace: per bogon class, the BA/BB/BC sets,
/// unioned over every qualifying bogon hop of that class.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TransitFinding {
    pub per_class: BTreeMap<RfcClass, CaseSets>,
    /// Element indices of the qualifying bogon hops (first position of a
    /// run of adjacent same-class bogons).
    pub triggering_positions: Vec<usize>,
}

impl TransitFinding {
    pub fn is_empty(&self) -> bool {
        self.per_class.is_empty()
    }

    pub fn chain_holds(&self) -> bool {
        self.per_class.values().all(CaseSets::chain_holds)
    }
}

/// Classifies one cleaned path. Returns `None` when the path has no origin
/// AS (no hop resolved); such traces are excluded from attribution and
/// counted by the caller.
///
/// A bogon hop qualifies only if at least one AS element before it is
/// foreign to the trace origin (origin sets disjoint); adjacent bogon hops
/// of the same class count as a single qualifying event at the first
/// position.
pub fn classify_path(path: &CleanPath) -> Option<TransitFinding> {
    let origin = path.origin.as_ref()?;
    let mut finding = TransitFinding::default();

    let mut seen: BTreeSet<Asn> = BTreeSet::new();
    let mut foreign_seen = false;
    let mut last_as: Option<usize> = None;
    let mut prev_bogon: Option<RfcClass> = None;

    for (i, elem) in path.elements.iter().enumerate() {
        match elem {
            PathElement::As(set) => {
                seen.extend(set.iter());
                if !set.intersects(origin) {
                    foreign_seen = true;
                }
                last_as = Some(i);
                prev_bogon = None;
            }
            PathElement::Bogon(class) => {
                let continues_run = prev_bogon == Some(*class);
                prev_bogon = Some(*class);
                if continues_run || !foreign_seen {
                    continue;
                }
                finding.triggering_positions.push(i);
                let sets = finding.per_class.entry(*class).or_default();

                sets.ba
                    .extend(seen.iter().filter(|a| !origin.contains(**a)));

                let pred_idx = last_as.expect("foreign_seen implies a prior AS element");
                let pred = match &path.elements[pred_idx] {
                    PathElement::As(set) => set,
                    PathElement::Bogon(_) => unreachable!("last_as indexes an AS element"),
                };
                if pred.len() > 1 {
                    sets.bb_multi_origin = true;
                }
                let bb: Vec<Asn> = pred.iter().filter(|a| !origin.contains(*a)).collect();
                sets.bb.extend(bb.iter().copied());

                let sandwich = path.elements[i + 1..].iter().any(
                    |e| matches!(e, PathElement::As(after) if after.intersects(pred)),
                );
                if sandwich {
                    sets.bc.extend(bb);
                }
            }
        }
    }
    Some(finding)
}
