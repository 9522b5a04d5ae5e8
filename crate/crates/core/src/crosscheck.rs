//! Joins the transiting-ASN sets against external hygiene datasets: active
//! spoofing-test results (with a lookback window), anti-spoofing pledge
//! conformance, and per-AS registration metadata.
//!
//! All inputs are flat CSV snapshots so runs are reproducible offline; a
//! fetch helper may populate them but the analysis never talks to live
//! APIs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::Read;
use std::str::FromStr;

use chrono::{DateTime, Duration, NaiveDate, Utc};
use serde::Serialize;
use thiserror::Error;

use crate::bogon::RfcClass;
use crate::metrics::percent_column;
use crate::net::Asn;

/// Default lookback window: six months, fixed at 183 days to avoid calendar
/// ambiguity.
pub const DEFAULT_WINDOW_DAYS: i64 = 183;

#[derive(Debug, Error)]
pub enum CrosscheckError {
    #[error("{file} row {row}: {msg}")]
    Row {
        file: &'static str,
        row: u64,
        msg: String,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Outcome vocabulary of a routed-spoof test record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RoutedSpoof {
    Received,
    Blocked,
    Rewritten,
    Unknown,
    Na,
}

impl FromStr for RoutedSpoof {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "received" => Ok(RoutedSpoof::Received),
            "blocked" => Ok(RoutedSpoof::Blocked),
            "rewritten" => Ok(RoutedSpoof::Rewritten),
            "unknown" => Ok(RoutedSpoof::Unknown),
            "na" => Ok(RoutedSpoof::Na),
            other => Err(format!(
                "invalid routedspoof {other:?}: expected received, blocked, rewritten, unknown or na"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpooferRecord {
    pub asn: Asn,
    pub timestamp: DateTime<Utc>,
    pub routedspoof: RoutedSpoof,
}

/// Parses the `asn,timestamp,routedspoof` CSV. Vocabulary violations are
/// fatal and carry the row number.
pub fn parse_spoofer_csv<R: Read>(input: R) -> Result<Vec<SpooferRecord>, CrosscheckError> {
    let mut reader = csv::Reader::from_reader(input);
    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let row_no = i as u64 + 2; // header is row 1
        let fail = |msg: String| CrosscheckError::Row {
            file: "spoofer csv",
            row: row_no,
            msg,
        };
        if row.len() != 3 {
            return Err(fail(format!("expected 3 fields, got {}", row.len())));
        }
        let asn: u32 = row[0]
            .parse()
            .map_err(|_| fail(format!("invalid asn {:?}", &row[0])))?;
        let timestamp = DateTime::parse_from_rfc3339(&row[1])
            .map_err(|e| fail(format!("invalid timestamp {:?}: {e}", &row[1])))?
            .with_timezone(&Utc);
        let routedspoof: RoutedSpoof = row[2].parse().map_err(fail)?;
        records.push(SpooferRecord {
            asn: Asn(asn),
            timestamp,
            routedspoof,
        });
    }
    Ok(records)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SpoofStatus {
    Spoofable,
    NonSpoofable,
    Both,
    Untested,
}

/// Status of one AS over the lookback window ending just before
/// `measurement_time`: records with
/// `measurement_time - window <= t < measurement_time` are considered.
/// `received` marks the AS spoofable, `blocked` non-spoofable; both kinds in
/// the window yield `Both`; nothing usable yields `Untested`. Invariant
/// under record reordering and duplication.
pub fn spoofer_status(
    asn: Asn,
    measurement_time: DateTime<Utc>,
    records: &[SpooferRecord],
    window_days: i64,
) -> SpoofStatus {
    let lower = measurement_time - Duration::days(window_days);
    let mut received = false;
    let mut blocked = false;
    for r in records {
        if r.asn != asn || r.timestamp < lower || r.timestamp >= measurement_time {
            continue;
        }
        match r.routedspoof {
            RoutedSpoof::Received => received = true,
            RoutedSpoof::Blocked => blocked = true,
            RoutedSpoof::Rewritten | RoutedSpoof::Unknown | RoutedSpoof::Na => {}
        }
    }
    match (received, blocked) {
        (true, true) => SpoofStatus::Both,
        (true, false) => SpoofStatus::Spoofable,
        (false, true) => SpoofStatus::NonSpoofable,
        (false, false) => SpoofStatus::Untested,
    }
}

/// One row of the spoofer comparison table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SpooferRow {
    pub class: RfcClass,
    pub identified: u64,
    pub in_spoofer: u64,
    pub only_spoofable: u64,
    pub only_non_spoofable: u64,
    pub both: u64,
    /// In the dataset but with no received/blocked record inside the window.
    pub untested: u64,
}

/// Per-class comparison of identified ASNs against the spoofing-test
/// dataset. "In spoofer" means the AS appears anywhere in the dataset; the
/// spoofable/non-spoofable/both split is window-scoped, and the remainder is
/// reported as untested so each row partitions its in-spoofer count.
pub fn crosscheck_summary(
    class_sets: &BTreeMap<RfcClass, BTreeSet<Asn>>,
    records: &[SpooferRecord],
    measurement_time: DateTime<Utc>,
    window_days: i64,
) -> Vec<SpooferRow> {
    let mut by_asn: BTreeMap<Asn, Vec<SpooferRecord>> = BTreeMap::new();
    for r in records {
        by_asn.entry(r.asn).or_default().push(*r);
    }
    let mut rows = Vec::new();
    for class in RfcClass::ALL {
        let Some(set) = class_sets.get(&class) else {
            continue;
        };
        let mut row = SpooferRow {
            class,
            identified: set.len() as u64,
            in_spoofer: 0,
            only_spoofable: 0,
            only_non_spoofable: 0,
            both: 0,
            untested: 0,
        };
        for asn in set {
            let Some(asn_records) = by_asn.get(asn) else {
                continue;
            };
            row.in_spoofer += 1;
            match spoofer_status(*asn, measurement_time, asn_records, window_days) {
                SpoofStatus::Spoofable => row.only_spoofable += 1,
                SpoofStatus::NonSpoofable => row.only_non_spoofable += 1,
                SpoofStatus::Both => row.both += 1,
                SpoofStatus::Untested => row.untested += 1,
            }
        }
        rows.push(row);
    }
    rows
}

/// Renders the spoofer comparison as CSV. Percentages are based on the
/// in-spoofer count and sum to 100.00 per row; rows with no overlap leave
/// the percent cells empty.
pub fn spoofer_table_csv(rows: &[SpooferRow]) -> String {
    let mut out = String::from(
        "class,identified,in_spoofer,only_spoofable,only_spoofable_pct,only_non_spoofable,only_non_spoofable_pct,both,both_pct,untested,untested_pct\n",
    );
    for row in rows {
        let pct = percent_column(&[
            row.only_spoofable,
            row.only_non_spoofable,
            row.both,
            row.untested,
        ]);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            row.class,
            row.identified,
            row.in_spoofer,
            row.only_spoofable,
            pct[0],
            row.only_non_spoofable,
            pct[1],
            row.both,
            pct[2],
            row.untested,
            pct[3],
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManrsRecord {
    pub asn: Asn,
    pub anti_spoofing_conformant: bool,
    pub member_since: Option<NaiveDate>,
}

/// Parses the `asn,anti_spoofing_conformant,member_since` CSV.
pub fn parse_manrs_csv<R: Read>(input: R) -> Result<Vec<ManrsRecord>, CrosscheckError> {
    let mut reader = csv::Reader::from_reader(input);
    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let row_no = i as u64 + 2;
        let fail = |msg: String| CrosscheckError::Row {
            file: "manrs csv",
            row: row_no,
            msg,
        };
        if row.len() != 3 {
            return Err(fail(format!("expected 3 fields, got {}", row.len())));
        }
        let asn: u32 = row[0]
            .parse()
            .map_err(|_| fail(format!("invalid asn {:?}", &row[0])))?;
        let conformant = match &row[1] {
            "true" => true,
            "false" => false,
            other => return Err(fail(format!("invalid boolean {other:?}"))),
        };
        let member_since = if row[2].is_empty() {
            None
        } else {
            Some(
                NaiveDate::parse_from_str(&row[2], "%Y-%m-%d")
                    .map_err(|e| fail(format!("invalid date {:?}: {e}", &row[2])))?,
            )
        };
        records.push(ManrsRecord {
            asn: Asn(asn),
            anti_spoofing_conformant: conformant,
            member_since,
        });
    }
    Ok(records)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MembershipEra {
    All,
    BeforeCutoff,
}

impl MembershipEra {
    pub fn label(self) -> &'static str {
        match self {
            MembershipEra::All => "all",
            MembershipEra::BeforeCutoff => "before_cutoff",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManrsRow {
    pub era: MembershipEra,
    pub conformant: bool,
    pub unique: u64,
    pub per_class: BTreeMap<RfcClass, u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ManrsJoin {
    pub rows: Vec<ManrsRow>,
    /// ASNs with contradictory conformance records, excluded from the rows.
    pub conflicts: Vec<Asn>,
    /// Records merged away as exact conformance duplicates.
    pub duplicates: u64,
}

/// Joins the identified ASN sets against pledge conformance. Four rows:
/// membership era (all members / members approved before the cutoff) times
/// conformance. ASNs listed with conflicting conformance are excluded and
/// reported; duplicates collapse to one record (earliest membership date
/// kept).
pub fn manrs_join(
    class_sets: &BTreeMap<RfcClass, BTreeSet<Asn>>,
    union: &BTreeSet<Asn>,
    records: &[ManrsRecord],
    cutoff: NaiveDate,
) -> ManrsJoin {
    let mut merged: BTreeMap<Asn, ManrsRecord> = BTreeMap::new();
    let mut conflicts: BTreeSet<Asn> = BTreeSet::new();
    let mut duplicates = 0u64;
    for r in records {
        match merged.get_mut(&r.asn) {
            None => {
                merged.insert(r.asn, r.clone());
            }
            Some(existing) => {
                if existing.anti_spoofing_conformant != r.anti_spoofing_conformant {
                    conflicts.insert(r.asn);
                } else {
                    duplicates += 1;
                    existing.member_since = match (existing.member_since, r.member_since) {
                        (Some(a), Some(b)) => Some(a.min(b)),
                        (a, b) => a.or(b),
                    };
                }
            }
        }
    }
    for asn in &conflicts {
        merged.remove(asn);
    }

    let mut rows = Vec::new();
    for era in [MembershipEra::All, MembershipEra::BeforeCutoff] {
        for conformant in [true, false] {
            let bucket: BTreeSet<Asn> = merged
                .values()
                .filter(|r| r.anti_spoofing_conformant == conformant)
                .filter(|r| match era {
                    MembershipEra::All => true,
                    MembershipEra::BeforeCutoff => {
                        r.member_since.is_some_and(|d| d < cutoff)
                    }
                })
                .map(|r| r.asn)
                .collect();
            let per_class = class_sets
                .iter()
                .map(|(class, set)| (*class, set.intersection(&bucket).count() as u64))
                .collect();
            rows.push(ManrsRow {
                era,
                conformant,
                unique: union.intersection(&bucket).count() as u64,
                per_class,
            });
        }
    }
    ManrsJoin {
        rows,
        conflicts: conflicts.into_iter().collect(),
        duplicates,
    }
}

pub fn manrs_table_csv(join: &ManrsJoin) -> String {
    let mut out = String::from("members,conformance,unique_asns");
    for class in RfcClass::ALL {
        let _ = write!(out, ",{}", class.key());
    }
    out.push('\n');
    for row in &join.rows {
        let _ = write!(
            out,
            "{},{},{}",
            row.era.label(),
            if row.conformant {
                "conformant"
            } else {
                "non-conformant"
            },
            row.unique
        );
        for class in RfcClass::ALL {
            let _ = write!(out, ",{}", row.per_class.get(&class).unwrap_or(&0));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsMetadata {
    pub asn: Asn,
    pub rir: String,
    pub country: String,
    pub category_l1: String,
    pub category_l2: String,
    pub lat: Option<f64>,
    pub lon: Option<f64>,
}

/// Parses the `asn,rir,country,category_l1,category_l2,lat,lon` CSV. Empty
/// fields are allowed; out-of-range coordinates are fatal.
pub fn parse_metadata_csv<R: Read>(
    input: R,
) -> Result<BTreeMap<Asn, AsMetadata>, CrosscheckError> {
    let mut reader = csv::Reader::from_reader(input);
    let mut map = BTreeMap::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let row_no = i as u64 + 2;
        let fail = |msg: String| CrosscheckError::Row {
            file: "metadata csv",
            row: row_no,
            msg,
        };
        if row.len() != 7 {
            return Err(fail(format!("expected 7 fields, got {}", row.len())));
        }
        let asn: u32 = row[0]
            .parse()
            .map_err(|_| fail(format!("invalid asn {:?}", &row[0])))?;
        let coord = |field: &str, name: &str, bound: f64| -> Result<Option<f64>, CrosscheckError> {
            if field.is_empty() {
                return Ok(None);
            }
            let v: f64 = field
                .parse()
                .map_err(|_| fail(format!("invalid {name} {field:?}")))?;
            if !v.is_finite() || v.abs() > bound {
                return Err(fail(format!("{name} {v} out of range")));
            }
            Ok(Some(v))
        };
        let meta = AsMetadata {
            asn: Asn(asn),
            rir: row[1].to_string(),
            country: row[2].to_string(),
            category_l1: row[3].to_string(),
            category_l2: row[4].to_string(),
            lat: coord(&row[5], "latitude", 90.0)?,
            lon: coord(&row[6], "longitude", 180.0)?,
        };
        map.insert(meta.asn, meta);
    }
    Ok(map)
}

pub const NOT_FOUND: &str = "Not found";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroupRow {
    pub name: String,
    pub count: u64,
    pub percent: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CountryRow {
    pub country: String,
    pub unique: u64,
    pub per_class: BTreeMap<RfcClass, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatterRow {
    pub class: RfcClass,
    pub asn: Asn,
    pub lat: f64,
    pub lon: f64,
    pub occurrences: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnrichReport {
    pub rir_rows: Vec<GroupRow>,
    pub category_rows: Vec<GroupRow>,
    /// All countries, ordered by descending unique-ASN count then country
    /// code; the top-N table is a prefix of this.
    pub country_rows: Vec<CountryRow>,
    pub scatter_rows: Vec<ScatterRow>,
}

fn grouped_rows<F: Fn(&AsMetadata) -> String>(
    asns: &BTreeSet<Asn>,
    metadata: &BTreeMap<Asn, AsMetadata>,
    group: F,
) -> Vec<GroupRow> {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for asn in asns {
        let name = metadata
            .get(asn)
            .map(&group)
            .filter(|n| !n.is_empty())
            .unwrap_or_else(|| NOT_FOUND.to_string());
        *counts.entry(name).or_insert(0) += 1;
    }
    let mut rows: Vec<(String, u64)> = counts.into_iter().collect();
    // Descending count, name ascending; the not-found bucket goes last.
    rows.sort_by(|a, b| {
        let a_nf = a.0 == NOT_FOUND;
        let b_nf = b.0 == NOT_FOUND;
        a_nf.cmp(&b_nf)
            .then(b.1.cmp(&a.1))
            .then(a.0.cmp(&b.0))
    });
    let percents = percent_column(&rows.iter().map(|(_, c)| *c).collect::<Vec<_>>());
    rows.into_iter()
        .zip(percents)
        .map(|((name, count), percent)| GroupRow {
            name,
            count,
            percent,
        })
        .collect()
}

/// Groups identified ASNs by registry, country and organisation category,
/// and emits coordinate scatter rows. ASNs absent from the metadata land in
/// a "Not found" bucket. `occurrences` maps class → asn → number of
/// measurements the ASN appeared in.
pub fn enrich(
    union: &BTreeSet<Asn>,
    class_sets: &BTreeMap<RfcClass, BTreeSet<Asn>>,
    metadata: &BTreeMap<Asn, AsMetadata>,
    occurrences: &BTreeMap<RfcClass, BTreeMap<Asn, u64>>,
) -> EnrichReport {
    let rir_rows = grouped_rows(union, metadata, |m| m.rir.clone());
    let category_rows = grouped_rows(union, metadata, |m| {
        match (m.category_l1.is_empty(), m.category_l2.is_empty()) {
            (true, _) => String::new(),
            (false, true) => m.category_l1.clone(),
            (false, false) => format!("{} - {}", m.category_l1, m.category_l2),
        }
    });

    let mut by_country: BTreeMap<String, (BTreeSet<Asn>, BTreeMap<RfcClass, u64>)> =
        BTreeMap::new();
    for asn in union {
        let country = metadata
            .get(asn)
            .map(|m| m.country.clone())
            .filter(|c| !c.is_empty())
            .unwrap_or_else(|| NOT_FOUND.to_string());
        by_country.entry(country).or_default().0.insert(*asn);
    }
    for (class, set) in class_sets {
        for asn in set {
            let country = metadata
                .get(asn)
                .map(|m| m.country.clone())
                .filter(|c| !c.is_empty())
                .unwrap_or_else(|| NOT_FOUND.to_string());
            *by_country
                .entry(country)
                .or_default()
                .1
                .entry(*class)
                .or_insert(0) += 1;
        }
    }
    let mut country_rows: Vec<CountryRow> = by_country
        .into_iter()
        .map(|(country, (set, per_class))| CountryRow {
            country,
            unique: set.len() as u64,
            per_class,
        })
        .collect();
    country_rows.sort_by(|a, b| b.unique.cmp(&a.unique).then(a.country.cmp(&b.country)));

    let mut scatter_rows = Vec::new();
    for (class, set) in class_sets {
        for asn in set {
            if let Some(meta) = metadata.get(asn) {
                if let (Some(lat), Some(lon)) = (meta.lat, meta.lon) {
                    scatter_rows.push(ScatterRow {
                        class: *class,
                        asn: *asn,
                        lat,
                        lon,
                        occurrences: occurrences
                            .get(class)
                            .and_then(|m| m.get(asn))
                            .copied()
                            .unwrap_or(0),
                    });
                }
            }
        }
    }

    EnrichReport {
        rir_rows,
        category_rows,
        country_rows,
        scatter_rows,
    }
}

pub fn group_rows_csv(header: &str, rows: &[GroupRow]) -> String {
    let mut out = format!("{header},asns,percent\n");
    for row in rows {
        let _ = writeln!(out, "{},{},{}", row.name, row.count, row.percent);
    }
    out
}

pub fn country_rows_csv(rows: &[CountryRow]) -> String {
    let mut out = String::from("country,unique_asns");
    for class in RfcClass::ALL {
        let _ = write!(out, ",{}", class.key());
    }
    out.push('\n');
    for row in rows {
        let _ = write!(out, "{},{}", row.country, row.unique);
        for class in RfcClass::ALL {
            let _ = write!(out, ",{}", row.per_class.get(&class).unwrap_or(&0));
        }
        out.push('\n');
    }
    out
}

pub fn scatter_rows_csv(rows: &[ScatterRow]) -> String {
    let mut out = String::from("class,asn,lat,lon,occurrences\n");
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            row.class, row.asn, row.lat, row.lon, row.occurrences
        );
    }
    out
}
