//! Streaming parser for MRT (RFC 6396) route-collector dumps, restricted to
//! the TABLE_DUMP_V2 subset that RIB snapshot files ("bview"/"rib") contain.
//!
//! Only `PEER_INDEX_TABLE` and `RIB_IPV4_UNICAST` records are decoded.
//! Legacy `TABLE_DUMP`, BGP4MP and the IPv6/multicast/generic subtypes are
//! counted and skipped; record types this parser has never heard of are a
//! hard error, as are truncated or malformed records. Every error carries
//! the byte offset of the record it occurred in (offsets are relative to the
//! decompressed stream).

use std::io::{self, Read};
use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

use serde::Serialize;
use thiserror::Error;

use crate::net::{Asn, AsnSet, Ipv4Prefix};

pub const MRT_TYPE_OSPFV2: u16 = 11;
pub const MRT_TYPE_TABLE_DUMP: u16 = 12;
pub const MRT_TYPE_TABLE_DUMP_V2: u16 = 13;
pub const MRT_TYPE_BGP4MP: u16 = 16;
pub const MRT_TYPE_BGP4MP_ET: u16 = 17;
pub const MRT_TYPE_ISIS: u16 = 32;
pub const MRT_TYPE_ISIS_ET: u16 = 33;
pub const MRT_TYPE_OSPFV3: u16 = 48;
pub const MRT_TYPE_OSPFV3_ET: u16 = 49;

pub const TDV2_PEER_INDEX_TABLE: u16 = 1;
pub const TDV2_RIB_IPV4_UNICAST: u16 = 2;

const BGP_ATTR_AS_PATH: u8 = 2;
const SEGMENT_AS_SET: u8 = 1;
const SEGMENT_AS_SEQUENCE: u8 = 2;
const SEGMENT_AS_CONFED_SEQUENCE: u8 = 3;
const SEGMENT_AS_CONFED_SET: u8 = 4;

/// Upper bound on a single record body; PEER_INDEX_TABLE records for large
/// collectors run to a few hundred KiB, so this is generous.
const MAX_RECORD_LEN: u32 = 16 * 1024 * 1024;

#[derive(Debug, Error)]
pub enum MrtError {
    #[error("i/o error in record at byte offset {offset}: {source}")]
    Io {
        offset: u64,
        #[source]
        source: io::Error,
    },
    #[error("truncated MRT record at byte offset {offset}")]
    Truncated { offset: u64 },
    #[error("unknown MRT record type {mrt_type} at byte offset {offset}")]
    UnknownType { mrt_type: u16, offset: u64 },
    #[error("malformed {what} in MRT record at byte offset {offset}")]
    Malformed { what: &'static str, offset: u64 },
    #[error("oversized MRT record ({length} bytes) at byte offset {offset}")]
    Oversized { length: u32, offset: u64 },
}

impl MrtError {
    /// Byte offset of the start of the record the error occurred in.
    pub fn offset(&self) -> u64 {
        match self {
            MrtError::Io { offset, .. }
            | MrtError::Truncated { offset }
            | MrtError::UnknownType { offset, .. }
            | MrtError::Malformed { offset, .. }
            | MrtError::Oversized { offset, .. } => *offset,
        }
    }
}

/// Counters for records the parser recognized but did not decode.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SkipCounters {
    /// Legacy TABLE_DUMP (type 12) records.
    pub legacy_table_dump: u64,
    /// BGP4MP / OSPF / ISIS records.
    pub other_types: u64,
    /// TABLE_DUMP_V2 subtypes other than PEER_INDEX_TABLE and
    /// RIB_IPV4_UNICAST (IPv6, multicast, generic, anything newer).
    pub other_subtypes: u64,
}

impl SkipCounters {
    pub fn total(&self) -> u64 {
        self.legacy_table_dump + self.other_types + self.other_subtypes
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeerEntry {
    pub peer_type: u8,
    pub bgp_id: u32,
    pub address: IpAddr,
    pub asn: Asn,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeerIndexTable {
    pub collector_bgp_id: u32,
    pub view_name: String,
    pub peers: Vec<PeerEntry>,
}

/// One RIB entry within a prefix group: the peer it was learned from and the
/// origin ASNs extracted from the terminal element of its AS_PATH.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RibEntryOrigin {
    pub peer_index: u16,
    pub originated_time: u32,
    pub origins: AsnSet,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RibGroup {
    pub sequence: u32,
    pub prefix: Ipv4Prefix,
    pub entries: Vec<RibEntryOrigin>,
}

impl RibGroup {
    /// Union of origin ASNs over all entries of the group.
    pub fn origin_set(&self) -> AsnSet {
        let mut set = AsnSet::new();
        for entry in &self.entries {
            for asn in entry.origins.iter() {
                set.insert(asn);
            }
        }
        set
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MrtRecord {
    PeerIndexTable(PeerIndexTable),
    RibIpv4Unicast(RibGroup),
}

/// Streaming reader over an MRT byte stream. Yields decoded records in file
/// order; skipped records are counted, not yielded.
pub struct MrtReader<R: Read> {
    input: R,
    offset: u64,
    skips: SkipCounters,
    failed: bool,
}

impl<R: Read> MrtReader<R> {
    pub fn new(input: R) -> Self {
        MrtReader {
            input,
            offset: 0,
            skips: SkipCounters::default(),
            failed: false,
        }
    }

    pub fn skip_counters(&self) -> SkipCounters {
        self.skips
    }

    /// Bytes consumed so far from the (decompressed) input.
    pub fn offset(&self) -> u64 {
        self.offset
    }

    fn read_exact_counted(&mut self, buf: &mut [u8], record_start: u64) -> Result<(), MrtError> {
        match self.input.read_exact(buf) {
            Ok(()) => {
                self.offset += buf.len() as u64;
                Ok(())
            }
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => Err(MrtError::Truncated {
                offset: record_start,
            }),
            Err(e) => Err(MrtError::Io {
                offset: record_start,
                source: e,
            }),
        }
    }

    /// Reads the next decodable record, or `None` at a clean end of stream.
    pub fn next_record(&mut self) -> Result<Option<MrtRecord>, MrtError> {
        loop {
            let record_start = self.offset;
            let mut header = [0u8; 12];

            // Distinguish clean EOF (zero header bytes) from truncation.
            let mut filled = 0;
            while filled < header.len() {
                match self.input.read(&mut header[filled..]) {
                    Ok(0) => {
                        if filled == 0 {
                            return Ok(None);
                        }
                        self.offset += filled as u64;
                        return Err(MrtError::Truncated {
                            offset: record_start,
                        });
                    }
                    Ok(n) => filled += n,
                    Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                    Err(e) => {
                        return Err(MrtError::Io {
                            offset: record_start,
                            source: e,
                        })
                    }
                }
            }
            self.offset += 12;

            let mrt_type = u16::from_be_bytes([header[4], header[5]]);
            let subtype = u16::from_be_bytes([header[6], header[7]]);
            let length = u32::from_be_bytes([header[8], header[9], header[10], header[11]]);
            if length > MAX_RECORD_LEN {
                return Err(MrtError::Oversized {
                    length,
                    offset: record_start,
                });
            }

            match mrt_type {
                MRT_TYPE_TABLE_DUMP_V2 => {
                    if subtype == TDV2_PEER_INDEX_TABLE || subtype == TDV2_RIB_IPV4_UNICAST {
                        let mut body = vec![0u8; length as usize];
                        self.read_exact_counted(&mut body, record_start)?;
                        let record = if subtype == TDV2_PEER_INDEX_TABLE {
                            MrtRecord::PeerIndexTable(parse_peer_index_table(
                                &body,
                                record_start,
                            )?)
                        } else {
                            MrtRecord::RibIpv4Unicast(parse_rib_ipv4_unicast(
                                &body,
                                record_start,
                            )?)
                        };
                        return Ok(Some(record));
                    }
                    self.skip_body(length, record_start)?;
                    self.skips.other_subtypes += 1;
                }
                MRT_TYPE_TABLE_DUMP => {
                    self.skip_body(length, record_start)?;
                    self.skips.legacy_table_dump += 1;
                }
                MRT_TYPE_OSPFV2 | MRT_TYPE_BGP4MP | MRT_TYPE_BGP4MP_ET | MRT_TYPE_ISIS
                | MRT_TYPE_ISIS_ET | MRT_TYPE_OSPFV3 | MRT_TYPE_OSPFV3_ET => {
                    self.skip_body(length, record_start)?;
                    self.skips.other_types += 1;
                }
                other => {
                    return Err(MrtError::UnknownType {
                        mrt_type: other,
                        offset: record_start,
                    });
                }
            }
        }
    }

    fn skip_body(&mut self, length: u32, record_start: u64) -> Result<(), MrtError> {
        let mut remaining = u64::from(length);
        let mut sink = [0u8; 8192];
        while remaining > 0 {
            let take = remaining.min(sink.len() as u64) as usize;
            match self.input.read(&mut sink[..take]) {
                Ok(0) => {
                    return Err(MrtError::Truncated {
                        offset: record_start,
                    })
                }
                Ok(n) => {
                    remaining -= n as u64;
                    self.offset += n as u64;
                }
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(e) => {
                    return Err(MrtError::Io {
                        offset: record_start,
                        source: e,
                    })
                }
            }
        }
        Ok(())
    }
}

impl<R: Read> Iterator for MrtReader<R> {
    type Item = Result<MrtRecord, MrtError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        match self.next_record() {
            Ok(Some(record)) => Some(Ok(record)),
            Ok(None) => None,
            Err(e) => {
                self.failed = true;
                Some(Err(e))
            }
        }
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
    record_offset: u64,
}

impl<'a> Cursor<'a> {
    fn new(buf: &'a [u8], record_offset: u64) -> Self {
        Cursor {
            buf,
            pos: 0,
            record_offset,
        }
    }

    fn fail(&self, what: &'static str) -> MrtError {
        MrtError::Malformed {
            what,
            offset: self.record_offset,
        }
    }

    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], MrtError> {
        if self.buf.len() - self.pos < n {
            return Err(self.fail(what));
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self, what: &'static str) -> Result<u8, MrtError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &'static str) -> Result<u16, MrtError> {
        let b = self.take(2, what)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, MrtError> {
        let b = self.take(4, what)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

fn parse_peer_index_table(body: &[u8], offset: u64) -> Result<PeerIndexTable, MrtError> {
    let mut cur = Cursor::new(body, offset);
    let collector_bgp_id = cur.u32("peer index collector id")?;
    let name_len = cur.u16("peer index view name length")? as usize;
    let name = cur.take(name_len, "peer index view name")?;
    let view_name = String::from_utf8_lossy(name).into_owned();
    let peer_count = cur.u16("peer index peer count")?;

    let mut peers = Vec::with_capacity(peer_count as usize);
    for _ in 0..peer_count {
        let peer_type = cur.u8("peer entry type")?;
        let bgp_id = cur.u32("peer entry bgp id")?;
        // Bit 0: address family of the peer IP; bit 1: 4-byte peer AS.
        let address = if peer_type & 0x01 != 0 {
            let b = cur.take(16, "peer entry ipv6 address")?;
            let mut raw = [0u8; 16];
            raw.copy_from_slice(b);
            IpAddr::V6(Ipv6Addr::from(raw))
        } else {
            let b = cur.take(4, "peer entry ipv4 address")?;
            IpAddr::V4(Ipv4Addr::new(b[0], b[1], b[2], b[3]))
        };
        let asn = if peer_type & 0x02 != 0 {
            Asn(cur.u32("peer entry asn")?)
        } else {
            Asn(u32::from(cur.u16("peer entry asn")?))
        };
        peers.push(PeerEntry {
            peer_type,
            bgp_id,
            address,
            asn,
        });
    }
    Ok(PeerIndexTable {
        collector_bgp_id,
        view_name,
        peers,
    })
}

fn parse_rib_ipv4_unicast(body: &[u8], offset: u64) -> Result<RibGroup, MrtError> {
    let mut cur = Cursor::new(body, offset);
    let sequence = cur.u32("rib sequence number")?;
    let prefix_len = cur.u8("rib prefix length")?;
    if prefix_len > 32 {
        return Err(cur.fail("rib prefix length"));
    }
    let n_bytes = usize::from(prefix_len).div_ceil(8);
    let raw = cur.take(n_bytes, "rib prefix bytes")?;
    let mut octets = [0u8; 4];
    octets[..n_bytes].copy_from_slice(raw);
    let prefix = Ipv4Prefix::new(Ipv4Addr::from(octets), prefix_len);

    let entry_count = cur.u16("rib entry count")?;
    let mut entries = Vec::with_capacity(entry_count as usize);
    for _ in 0..entry_count {
        let peer_index = cur.u16("rib entry peer index")?;
        let originated_time = cur.u32("rib entry originated time")?;
        let attr_len = cur.u16("rib entry attribute length")? as usize;
        let attrs = cur.take(attr_len, "rib entry attributes")?;
        let origins = extract_origin_set(attrs, offset)?;
        entries.push(RibEntryOrigin {
            peer_index,
            originated_time,
            origins,
        });
    }
    Ok(RibGroup {
        sequence,
        prefix,
        entries,
    })
}

/// Extracts the origin ASN set from the AS_PATH attribute in a RIB entry's
/// BGP attribute blob: the terminal element of the path, where an AS_SET
/// terminal contributes every member. Confederation segments are skipped.
/// Per RFC 6396 §4.3.4 the AS_PATH in TABLE_DUMP_V2 always carries 4-byte
/// AS numbers, regardless of the peer table's AS-size flags.
fn extract_origin_set(attrs: &[u8], record_offset: u64) -> Result<AsnSet, MrtError> {
    let mut cur = Cursor::new(attrs, record_offset);
    while cur.remaining() > 0 {
        let flags = cur.u8("attribute flags")?;
        let attr_type = cur.u8("attribute type")?;
        let len = if flags & 0x10 != 0 {
            cur.u16("attribute extended length")? as usize
        } else {
            cur.u8("attribute length")? as usize
        };
        let value = cur.take(len, "attribute value")?;
        if attr_type == BGP_ATTR_AS_PATH {
            return parse_as_path_terminal(value, record_offset);
        }
    }
    // No AS_PATH attribute (e.g. locally originated routes).
    Ok(AsnSet::new())
}

fn parse_as_path_terminal(value: &[u8], record_offset: u64) -> Result<AsnSet, MrtError> {
    let mut cur = Cursor::new(value, record_offset);
    let mut terminal = AsnSet::new();
    while cur.remaining() > 0 {
        let seg_type = cur.u8("as_path segment type")?;
        let count = cur.u8("as_path segment count")? as usize;
        let mut asns = Vec::with_capacity(count);
        for _ in 0..count {
            asns.push(Asn(cur.u32("as_path segment asn")?));
        }
        match seg_type {
            SEGMENT_AS_SEQUENCE => {
                if let Some(last) = asns.last() {
                    terminal = AsnSet::singleton(*last);
                }
            }
            SEGMENT_AS_SET => {
                terminal = asns.into_iter().collect();
            }
            SEGMENT_AS_CONFED_SEQUENCE | SEGMENT_AS_CONFED_SET => {
                // Confederation segments never carry the origin.
            }
            _ => return Err(cur.fail("as_path segment type")),
        }
    }
    Ok(terminal)
}

/// Wraps a raw stream with transparent gzip/bzip2 decoding, sniffing the
/// magic bytes. Plain streams pass through unchanged.
pub fn decode_stream<R: Read + 'static>(input: R) -> io::Result<Box<dyn Read>> {
    let mut reader = io::BufReader::new(input);
    let mut magic = [0u8; 3];
    let mut filled = 0;
    while filled < magic.len() {
        match reader.read(&mut magic[filled..])? {
            0 => break,
            n => filled += n,
        }
    }
    let head = io::Cursor::new(magic[..filled].to_vec());
    let rejoined = head.chain(reader);
    if filled >= 2 && magic[0] == 0x1f && magic[1] == 0x8b {
        Ok(Box::new(flate2::read::MultiGzDecoder::new(rejoined)))
    } else if filled >= 3 && &magic[..3] == b"BZh" {
        Ok(Box::new(bzip2::read::MultiBzDecoder::new(rejoined)))
    } else {
        Ok(Box::new(rejoined))
    }
}

/// Opens an MRT file with transparent decompression.
pub fn open_mrt_file(path: &std::path::Path) -> io::Result<MrtReader<Box<dyn Read>>> {
    let file = std::fs::File::open(path)?;
    Ok(MrtReader::new(decode_stream(file)?))
}
