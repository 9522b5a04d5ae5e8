//! Aggregation of per-trace findings into measurement statistics, set
//! similarity matrices, and occurrence counts.
//!
//! All counters are exact integers; ratios are carried as reduced fractions
//! and only rendered to decimals at emission time. Aggregation is a
//! commutative fold over traces, so sharded partial aggregates merge to the
//! same result in any order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fmt::Write as _;

use serde::Serialize;

use crate::bogon::RfcClass;
use crate::net::Asn;
use crate::transit::{Case, TransitFinding};

/// An exact non-negative rational, kept reduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fraction {
    num: u64,
    den: u64,
}

impl Fraction {
    pub const ONE: Fraction = Fraction { num: 1, den: 1 };
    pub const ZERO: Fraction = Fraction { num: 0, den: 1 };

    pub fn new(num: u64, den: u64) -> Fraction {
        assert!(den > 0, "zero denominator");
        let g = gcd(num, den);
        Fraction {
            num: num / g.max(1),
            den: den / g.max(1),
        }
    }

    pub fn numerator(&self) -> u64 {
        self.num
    }

    pub fn denominator(&self) -> u64 {
        self.den
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl Serialize for Fraction {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut s = serializer.serialize_struct("Fraction", 3)?;
        s.serialize_field("num", &self.num)?;
        s.serialize_field("den", &self.den)?;
        s.serialize_field("value", &self.to_f64())?;
        s.end()
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `|a ∩ b| / |a ∪ b|`; defined as 1 when both sets are empty.
pub fn jaccard(a: &BTreeSet<Asn>, b: &BTreeSet<Asn>) -> Fraction {
    if a.is_empty() && b.is_empty() {
        return Fraction::ONE;
    }
    let inter = a.intersection(b).count() as u64;
    let union = (a.len() + b.len()) as u64 - inter;
    Fraction::new(inter, union)
}

/// `|a ∩ b| / |a|`; defined as 1 when `a` is empty. Asymmetric.
pub fn containment(a: &BTreeSet<Asn>, b: &BTreeSet<Asn>) -> Fraction {
    if a.is_empty() {
        return Fraction::ONE;
    }
    let inter = a.intersection(b).count() as u64;
    Fraction::new(inter, a.len() as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Metric {
    Jaccard,
    Containment,
}

impl Metric {
    pub fn key(self) -> &'static str {
        match self {
            Metric::Jaccard => "jaccard",
            Metric::Containment => "containment",
        }
    }
}

/// Pairwise similarity over labeled AS sets; row/column order follows the
/// label order given at construction.
#[derive(Debug, Clone, Serialize)]
pub struct SimilarityMatrix {
    pub metric: Metric,
    pub labels: Vec<String>,
    pub values: Vec<Vec<Fraction>>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum MatrixError {
    #[error("matrix diagonal entry {0} is not 1")]
    Diagonal(usize),
    #[error("jaccard matrix is not symmetric at ({0},{1})")]
    Asymmetric(usize, usize),
    #[error("duplicate label {0:?}")]
    DuplicateLabel(String),
}

pub fn similarity_matrix(
    sets: &[(String, BTreeSet<Asn>)],
    metric: Metric,
) -> Result<SimilarityMatrix, MatrixError> {
    let mut seen = BTreeSet::new();
    for (label, _) in sets {
        if !seen.insert(label.as_str()) {
            return Err(MatrixError::DuplicateLabel(label.clone()));
        }
    }
    let values = sets
        .iter()
        .map(|(_, a)| {
            sets.iter()
                .map(|(_, b)| match metric {
                    Metric::Jaccard => jaccard(a, b),
                    Metric::Containment => containment(a, b),
                })
                .collect()
        })
        .collect();
    let matrix = SimilarityMatrix {
        metric,
        labels: sets.iter().map(|(l, _)| l.clone()).collect(),
        values,
    };
    matrix.check_invariants()?;
    Ok(matrix)
}

impl SimilarityMatrix {
    /// Unit diagonal always; symmetry for Jaccard. Checked on every emitted
    /// matrix.
    pub fn check_invariants(&self) -> Result<(), MatrixError> {
        for i in 0..self.values.len() {
            if self.values[i][i] != Fraction::ONE {
                return Err(MatrixError::Diagonal(i));
            }
            if self.metric == Metric::Jaccard {
                for j in 0..i {
                    if self.values[i][j] != self.values[j][i] {
                        return Err(MatrixError::Asymmetric(i, j));
                    }
                }
            }
        }
        Ok(())
    }

    /// Plot-ready CSV: header row of labels, one row per label, decimal
    /// cells.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("label");
        for l in &self.labels {
            let _ = write!(out, ",{l}");
        }
        out.push('\n');
        for (i, l) in self.labels.iter().enumerate() {
            let _ = write!(out, "{l}");
            for v in &self.values[i] {
                let _ = write!(out, ",{:.6}", v.to_f64());
            }
            out.push('\n');
        }
        out
    }
}

/// Everything the aggregator needs to know about one analyzed trace.
#[derive(Debug, Clone, Serialize)]
pub struct TraceOutcome {
    /// Ordinal of the trace in corpus order.
    pub trace_id: u64,
    pub vp: String,
    /// Classes with at least one bogon hop on the cleaned path, qualifying
    /// or not.
    pub classes_present: Vec<RfcClass>,
    /// `None` when the trace had no resolvable origin and was excluded from
    /// attribution.
    pub finding: Option<TransitFinding>,
    pub dst_unrouted: bool,
    pub dropped_unknown: u32,
}

impl TraceOutcome {
    pub fn has_qualifying(&self) -> bool {
        self.finding.as_ref().is_some_and(|f| !f.is_empty())
    }
}

/// Per-measurement statistics, shaped after the per-month dataset summary
/// table.
#[derive(Debug, Clone, Serialize, serde::Deserialize)]
pub struct MeasurementStats {
    pub label: String,
    pub n_vps: u64,
    /// Vantage points with at least one trace containing a qualifying bogon
    /// hop.
    pub n_vps_observing_bogons: u64,
    /// Vantage points that saw any bogon hop at all, qualifying or not. Both
    /// variants are emitted because prevalence tables can be read either
    /// way.
    pub n_vps_observing_any_bogon: u64,
    pub n_traces: u64,
    /// Traces with at least one bogon hop of the class (counted per trace,
    /// not per hop).
    pub n_traces_per_class: BTreeMap<RfcClass, u64>,
    pub n_unrouted_dst: u64,
    /// Traces excluded from attribution because no hop resolved to an ASN.
    pub n_skipped_no_origin: u64,
    /// Unique transiting ASNs per case and class.
    pub asn_sets: BTreeMap<Case, BTreeMap<RfcClass, BTreeSet<Asn>>>,
}

impl MeasurementStats {
    pub fn asn_set(&self, case: Case, class: RfcClass) -> BTreeSet<Asn> {
        self.asn_sets
            .get(&case)
            .and_then(|m| m.get(&class))
            .cloned()
            .unwrap_or_default()
    }
}

/// Exact counting over one measurement's trace outcomes. Order-independent.
pub fn aggregate(label: &str, outcomes: &[TraceOutcome]) -> MeasurementStats {
    let mut vps: BTreeSet<&str> = BTreeSet::new();
    let mut vps_qualifying: BTreeSet<&str> = BTreeSet::new();
    let mut vps_any: BTreeSet<&str> = BTreeSet::new();
    let mut per_class: BTreeMap<RfcClass, u64> = BTreeMap::new();
    let mut unrouted = 0u64;
    let mut skipped = 0u64;
    let mut asn_sets: BTreeMap<Case, BTreeMap<RfcClass, BTreeSet<Asn>>> = BTreeMap::new();

    for outcome in outcomes {
        vps.insert(&outcome.vp);
        if outcome.dst_unrouted {
            unrouted += 1;
        }
        if !outcome.classes_present.is_empty() {
            vps_any.insert(&outcome.vp);
        }
        for class in &outcome.classes_present {
            *per_class.entry(*class).or_insert(0) += 1;
        }
        match &outcome.finding {
            None => skipped += 1,
            Some(finding) => {
                if !finding.is_empty() {
                    vps_qualifying.insert(&outcome.vp);
                }
                for (class, sets) in &finding.per_class {
                    for case in Case::ALL {
                        let slot = asn_sets
                            .entry(case)
                            .or_default()
                            .entry(*class)
                            .or_default();
                        slot.extend(sets.get(case).iter().copied());
                    }
                }
            }
        }
    }

    MeasurementStats {
        label: label.to_string(),
        n_vps: vps.len() as u64,
        n_vps_observing_bogons: vps_qualifying.len() as u64,
        n_vps_observing_any_bogon: vps_any.len() as u64,
        n_traces: outcomes.len() as u64,
        n_traces_per_class: per_class,
        n_unrouted_dst: unrouted,
        n_skipped_no_origin: skipped,
        asn_sets,
    }
}

/// CSV with one row per measurement: vantage-point and trace counters,
/// per-class trace counts, and per-case per-class unique ASN counts.
pub fn stats_csv(stats: &[MeasurementStats]) -> String {
    let mut out = String::from("label,vps,vps_observing_bogons,vps_observing_any_bogon,traces");
    for class in RfcClass::ALL {
        let _ = write!(out, ",traces_{}", class.key());
    }
    out.push_str(",unrouted_dst,skipped_no_origin");
    for case in Case::ALL {
        for class in RfcClass::ALL {
            let _ = write!(out, ",asns_{}_{}", case.key(), class.key());
        }
    }
    out.push('\n');
    for s in stats {
        let _ = write!(
            out,
            "{},{},{},{},{}",
            s.label, s.n_vps, s.n_vps_observing_bogons, s.n_vps_observing_any_bogon, s.n_traces
        );
        for class in RfcClass::ALL {
            let _ = write!(out, ",{}", s.n_traces_per_class.get(&class).unwrap_or(&0));
        }
        let _ = write!(out, ",{},{}", s.n_unrouted_dst, s.n_skipped_no_origin);
        for case in Case::ALL {
            for class in RfcClass::ALL {
                let _ = write!(out, ",{}", s.asn_set(case, class).len());
            }
        }
        out.push('\n');
    }
    out
}

/// For each ASN, the number of measurements whose set contains it.
pub fn occurrence_counts<'a, I>(sets: I) -> BTreeMap<Asn, u64>
where
    I: IntoIterator<Item = &'a BTreeSet<Asn>>,
{
    let mut counts = BTreeMap::new();
    for set in sets {
        for asn in set {
            *counts.entry(*asn).or_insert(0) += 1;
        }
    }
    counts
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OccurrenceSummary {
    pub n_measurements: u64,
    pub n_asns: u64,
    pub present_in_all: u64,
    pub present_once: u64,
    /// ASNs present in more than half of the measurements.
    pub present_in_more_than_half: u64,
}

pub fn occurrence_summary(counts: &BTreeMap<Asn, u64>, n_measurements: u64) -> OccurrenceSummary {
    OccurrenceSummary {
        n_measurements,
        n_asns: counts.len() as u64,
        present_in_all: counts.values().filter(|&&c| c == n_measurements).count() as u64,
        present_once: counts.values().filter(|&&c| c == 1).count() as u64,
        present_in_more_than_half: present_in_more_than(counts, n_measurements / 2),
    }
}

/// Number of ASNs appearing in strictly more than `k` measurements.
pub fn present_in_more_than(counts: &BTreeMap<Asn, u64>, k: u64) -> u64 {
    counts.values().filter(|&&c| c > k).count() as u64
}

/// One row of the unique-ASNs-per-year pivot.
#[derive(Debug, Clone, Serialize)]
pub struct YearlyPivotRow {
    pub year: String,
    pub per_class: BTreeMap<RfcClass, u64>,
    /// Unique ASNs across all classes for the year.
    pub unique: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct YearlyPivot {
    pub rows: Vec<YearlyPivotRow>,
    pub per_class_total: BTreeMap<RfcClass, u64>,
    pub unique_total: u64,
}

/// Pivots per-measurement ASN sets into unique counts per year and class.
/// Years are unions over the year's measurements; the measurement label's
/// leading `YYYY` component (up to the first `-`) names the year.
pub fn yearly_unique_pivot(
    measurements: &[(String, BTreeMap<RfcClass, BTreeSet<Asn>>)],
) -> YearlyPivot {
    let mut per_year: BTreeMap<String, BTreeMap<RfcClass, BTreeSet<Asn>>> = BTreeMap::new();
    for (label, sets) in measurements {
        let year = label.split('-').next().unwrap_or(label).to_string();
        let slot = per_year.entry(year).or_default();
        for (class, set) in sets {
            slot.entry(*class).or_default().extend(set.iter().copied());
        }
    }
    let mut total: BTreeMap<RfcClass, BTreeSet<Asn>> = BTreeMap::new();
    let mut total_union: BTreeSet<Asn> = BTreeSet::new();
    let rows = per_year
        .into_iter()
        .map(|(year, sets)| {
            let mut union = BTreeSet::new();
            let mut per_class = BTreeMap::new();
            for (class, set) in &sets {
                per_class.insert(*class, set.len() as u64);
                union.extend(set.iter().copied());
                total.entry(*class).or_default().extend(set.iter().copied());
            }
            total_union.extend(union.iter().copied());
            YearlyPivotRow {
                year,
                per_class,
                unique: union.len() as u64,
            }
        })
        .collect();
    YearlyPivot {
        rows,
        per_class_total: total.iter().map(|(c, s)| (*c, s.len() as u64)).collect(),
        unique_total: total_union.len() as u64,
    }
}

pub fn yearly_pivot_csv(pivot: &YearlyPivot) -> String {
    let mut out = String::from("year");
    for class in RfcClass::ALL {
        let _ = write!(out, ",{}", class.key());
    }
    out.push_str(",unique_per_year\n");
    for row in &pivot.rows {
        let _ = write!(out, "{}", row.year);
        for class in RfcClass::ALL {
            let _ = write!(out, ",{}", row.per_class.get(&class).unwrap_or(&0));
        }
        let _ = writeln!(out, ",{}", row.unique);
    }
    let _ = write!(out, "total");
    for class in RfcClass::ALL {
        let _ = write!(out, ",{}", pivot.per_class_total.get(&class).unwrap_or(&0));
    }
    let _ = writeln!(out, ",{}", pivot.unique_total);
    out
}

/// Renders `counts` as percentages of their sum with two decimals, using
/// largest-remainder apportionment so the printed column sums to exactly
/// 100.00. A zero total yields empty strings.
pub fn percent_column(counts: &[u64]) -> Vec<String> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return counts.iter().map(|_| String::new()).collect();
    }
    // Work in basis points (hundredths of a percent).
    let mut floored: Vec<u64> = Vec::with_capacity(counts.len());
    let mut remainders: Vec<(u64, usize)> = Vec::with_capacity(counts.len());
    for (i, &c) in counts.iter().enumerate() {
        let scaled = c as u128 * 10_000;
        floored.push((scaled / total as u128) as u64);
        remainders.push(((scaled % total as u128) as u64, i));
    }
    let assigned: u64 = floored.iter().sum();
    let mut leftover = 10_000 - assigned;
    // Largest remainder first; ties broken by input position.
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for (rem, idx) in remainders {
        if leftover == 0 {
            break;
        }
        if rem > 0 {
            floored[idx] += 1;
            leftover -= 1;
        }
    }
    floored
        .into_iter()
        .map(|bp| format!("{}.{:02}", bp / 100, bp % 100))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn asns(list: &[u32]) -> BTreeSet<Asn> {
        list.iter().map(|&a| Asn(a)).collect()
    }

    #[test]
    fn jaccard_examples() {
        assert_eq!(jaccard(&asns(&[1, 2]), &asns(&[1, 2])), Fraction::ONE);
        assert_eq!(jaccard(&asns(&[1, 2]), &asns(&[3, 4])), Fraction::ZERO);
        assert_eq!(jaccard(&asns(&[1, 2]), &asns(&[2, 3])), Fraction::new(1, 3));
        assert_eq!(jaccard(&asns(&[]), &asns(&[])), Fraction::ONE);
        assert_eq!(jaccard(&asns(&[]), &asns(&[1])), Fraction::ZERO);
    }

    #[test]
    fn containment_examples() {
        assert_eq!(containment(&asns(&[1, 2]), &asns(&[1, 2, 3])), Fraction::ONE);
        assert_eq!(
            containment(&asns(&[1, 2, 3]), &asns(&[1])),
            Fraction::new(1, 3)
        );
        assert_eq!(containment(&asns(&[]), &asns(&[1])), Fraction::ONE);
        // Asymmetry witness.
        let a = asns(&[1, 2, 3, 4]);
        let b = asns(&[1, 9]);
        assert_ne!(containment(&a, &b), containment(&b, &a));
    }

    #[test]
    fn matrix_of_identical_sets_is_all_ones() {
        let sets: Vec<_> = (0..3)
            .map(|i| (format!("m{i}"), asns(&[1, 2, 3])))
            .collect();
        let m = similarity_matrix(&sets, Metric::Jaccard).unwrap();
        for row in &m.values {
            for v in row {
                assert_eq!(*v, Fraction::ONE);
            }
        }
    }

    #[test]
    fn matrix_rejects_duplicate_labels() {
        let sets = vec![
            ("m".to_string(), asns(&[1])),
            ("m".to_string(), asns(&[2])),
        ];
        assert_eq!(
            similarity_matrix(&sets, Metric::Jaccard).unwrap_err(),
            MatrixError::DuplicateLabel("m".to_string())
        );
    }

    #[test]
    fn containment_of_subset_is_one_row() {
        let small = asns(&[1, 2]);
        let big = asns(&[1, 2, 3, 4, 5]);
        assert_eq!(containment(&small, &big), Fraction::ONE);
        assert_eq!(containment(&big, &small), Fraction::new(2, 5));
    }

    #[test]
    fn occurrence_counting_and_summary() {
        let m1 = asns(&[1, 2, 3]);
        let m2 = asns(&[2, 3]);
        let m3 = asns(&[3, 9]);
        let counts = occurrence_counts([&m1, &m2, &m3]);
        assert_eq!(counts[&Asn(3)], 3);
        assert_eq!(counts[&Asn(1)], 1);
        let summary = occurrence_summary(&counts, 3);
        assert_eq!(summary.n_asns, 4);
        assert_eq!(summary.present_in_all, 1);
        assert_eq!(summary.present_once, 2);
        assert_eq!(summary.present_in_more_than_half, 2); // count > 1
    }

    #[test]
    fn percent_column_sums_to_exactly_100() {
        for counts in [
            vec![1u64, 1, 1, 1, 1, 1],
            vec![1, 2, 1],
            vec![334, 1272, 690, 106],
            vec![5, 0, 0],
        ] {
            let rendered = percent_column(&counts);
            let sum: i64 = rendered
                .iter()
                .map(|s| s.replace('.', "").parse::<i64>().unwrap())
                .sum();
            assert_eq!(sum, 10_000, "percentages {rendered:?} must sum to 100.00");
        }
        assert!(percent_column(&[0, 0]).iter().all(|s| s.is_empty()));
    }

    #[test]
    fn yearly_pivot_unions_within_years() {
        let m = |label: &str, rfc1918: &[u32], rfc6598: &[u32]| {
            let mut map = BTreeMap::new();
            map.insert(RfcClass::Rfc1918, asns(rfc1918));
            map.insert(RfcClass::Rfc6598, asns(rfc6598));
            (label.to_string(), map)
        };
        let pivot = yearly_unique_pivot(&[
            m("2022-01", &[1, 2], &[7]),
            m("2022-02", &[2, 3], &[7, 8]),
            m("2023-01", &[4], &[]),
        ]);
        assert_eq!(pivot.rows.len(), 2);
        assert_eq!(pivot.rows[0].year, "2022");
        assert_eq!(pivot.rows[0].per_class[&RfcClass::Rfc1918], 3);
        assert_eq!(pivot.rows[0].per_class[&RfcClass::Rfc6598], 2);
        assert_eq!(pivot.rows[0].unique, 5);
        assert_eq!(pivot.unique_total, 6);
        assert_eq!(pivot.per_class_total[&RfcClass::Rfc1918], 4);
    }
}
