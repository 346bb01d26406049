//! Binary frame carrying one tag's measurement bundle.
//!
//! ```text
//! offset  size  field
//! 0       2     magic 0x4C 0x44 ("LD")
//! 2       1     version = 1
//! 3       2     tag id
//! 5       8     epoch, microseconds since run start
//! 13      1     entry count (>= 1)
//! 14      7*n   entries: anchor id (2), distance mm (4), quality (1)
//! 14+7n   2     CRC-16/CCITT-FALSE over bytes 0 .. 14+7n
//! ```
//!
//! Multi-byte integers are little-endian.

use std::fmt;

use crate::error::{Error, Result};
use crate::geometry::{NodeId, RangingPair};
use crate::twr::RangeMeasurement;

pub const MAGIC: [u8; 2] = [0x4C, 0x44];
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 14;
pub const ENTRY_LEN: usize = 7;
pub const CRC_LEN: usize = 2;
pub const MAX_ENTRIES: usize = 255;

/// CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, no final xor.
pub fn crc16_ccitt_false(data: &[u8]) -> u16 {
    let mut crc: u16 = 0xFFFF;
    for &byte in data {
        crc ^= u16::from(byte) << 8;
        for _ in 0..8 {
            crc = if crc & 0x8000 != 0 {
                (crc << 1) ^ 0x1021
            } else {
                crc << 1
            };
        }
    }
    crc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WireEntry {
    pub anchor_id: u16,
    pub distance_mm: u32,
    pub quality: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WireFrame {
    pub tag_id: u16,
    pub epoch_micros: u64,
    pub entries: Vec<WireEntry>,
}

pub const fn frame_len(count: usize) -> usize {
    HEADER_LEN + ENTRY_LEN * count + CRC_LEN
}

/// Meters to whole millimeters, rounding to nearest.
pub fn meters_to_mm(distance: f64) -> Result<u32> {
    let mm = (distance * 1000.0).round();
    if !(0.0..=f64::from(u32::MAX)).contains(&mm) {
        return Err(Error::Encoding(format!(
            "distance {distance} m does not fit in 32-bit millimeters"
        )));
    }
    Ok(mm as u32)
}

pub fn seconds_to_micros(t: f64) -> Result<u64> {
    let us = (t * 1e6).round();
    if !(0.0..1.8e19).contains(&us) {
        return Err(Error::Encoding(format!("timestamp {t} s out of range")));
    }
    Ok(us as u64)
}

impl WireEntry {
    pub fn from_measurement(m: &RangeMeasurement) -> Result<Self> {
        Ok(WireEntry {
            anchor_id: m.pair.anchor.0,
            distance_mm: meters_to_mm(m.distance)?,
            quality: m.quality,
        })
    }
}

impl WireFrame {
    /// Bundles measurements that share a tag and an epoch.
    pub fn from_measurements(tag: NodeId, timestamp: f64, bundle: &[RangeMeasurement]) -> Result<Self> {
        if let Some(m) = bundle.iter().find(|m| m.pair.tag != tag) {
            return Err(Error::Encoding(format!(
                "measurement {} does not belong to tag {tag}",
                m.pair
            )));
        }
        Ok(WireFrame {
            tag_id: tag.0,
            epoch_micros: seconds_to_micros(timestamp)?,
            entries: bundle
                .iter()
                .map(WireEntry::from_measurement)
                .collect::<Result<_>>()?,
        })
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        encode_frame(self.tag_id, self.epoch_micros, &self.entries)
    }

    pub fn timestamp(&self) -> f64 {
        self.epoch_micros as f64 / 1e6
    }

    pub fn to_measurements(&self, sequence: u64) -> Vec<RangeMeasurement> {
        self.entries
            .iter()
            .map(|e| RangeMeasurement {
                pair: RangingPair::new(self.tag_id, e.anchor_id),
                distance: f64::from(e.distance_mm) / 1000.0,
                timestamp: self.timestamp(),
                sequence,
                quality: e.quality,
            })
            .collect()
    }
}

pub fn encode_frame(tag_id: u16, epoch_micros: u64, entries: &[WireEntry]) -> Result<Vec<u8>> {
    if entries.is_empty() {
        return Err(Error::Encoding("frame needs at least one entry".into()));
    }
    if entries.len() > MAX_ENTRIES {
        return Err(Error::Encoding(format!(
            "{} entries exceed the {MAX_ENTRIES}-entry limit",
            entries.len()
        )));
    }
    let mut out = Vec::with_capacity(frame_len(entries.len()));
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&tag_id.to_le_bytes());
    out.extend_from_slice(&epoch_micros.to_le_bytes());
    out.push(entries.len() as u8);
    for e in entries {
        out.extend_from_slice(&e.anchor_id.to_le_bytes());
        out.extend_from_slice(&e.distance_mm.to_le_bytes());
        out.push(e.quality);
    }
    let crc = crc16_ccitt_false(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeError {
    /// At least this many more bytes are needed.
    NeedMoreBytes(usize),
    BadMagic,
    BadVersion(u8),
    EmptyFrame,
    Crc { expected: u16, computed: u16 },
}

impl fmt::Display for DecodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecodeError::NeedMoreBytes(n) => write!(f, "need {n} more byte(s)"),
            DecodeError::BadMagic => f.write_str("bad magic"),
            DecodeError::BadVersion(v) => write!(f, "unsupported version {v}"),
            DecodeError::EmptyFrame => f.write_str("frame with zero entries"),
            DecodeError::Crc { expected, computed } => {
                write!(f, "crc mismatch: frame says {expected:#06x}, computed {computed:#06x}")
            }
        }
    }
}

impl std::error::Error for DecodeError {}

/// Parses one frame from the front of `bytes`, returning it and the number
/// of bytes consumed.
pub fn decode_frame(bytes: &[u8]) -> std::result::Result<(WireFrame, usize), DecodeError> {
    let need = |n: usize| DecodeError::NeedMoreBytes(n - bytes.len());

    if bytes.len() < 2 {
        // a lone first byte can still start a frame
        if bytes.first().is_some_and(|b| *b != MAGIC[0]) {
            return Err(DecodeError::BadMagic);
        }
        return Err(need(2));
    }
    if bytes[..2] != MAGIC {
        return Err(DecodeError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        if bytes.len() > 2 && bytes[2] != VERSION {
            return Err(DecodeError::BadVersion(bytes[2]));
        }
        return Err(need(HEADER_LEN));
    }
    if bytes[2] != VERSION {
        return Err(DecodeError::BadVersion(bytes[2]));
    }
    let count = bytes[13] as usize;
    if count == 0 {
        return Err(DecodeError::EmptyFrame);
    }
    let total = frame_len(count);
    if bytes.len() < total {
        return Err(need(total));
    }

    let body = &bytes[..total - CRC_LEN];
    let expected = u16::from_le_bytes([bytes[total - 2], bytes[total - 1]]);
    let computed = crc16_ccitt_false(body);
    if expected != computed {
        return Err(DecodeError::Crc { expected, computed });
    }

    let tag_id = u16::from_le_bytes([bytes[3], bytes[4]]);
    let epoch_micros = u64::from_le_bytes(bytes[5..13].try_into().expect("8-byte slice"));
    let entries = body[HEADER_LEN..]
        .chunks_exact(ENTRY_LEN)
        .map(|c| WireEntry {
            anchor_id: u16::from_le_bytes([c[0], c[1]]),
            distance_mm: u32::from_le_bytes([c[2], c[3], c[4], c[5]]),
            quality: c[6],
        })
        .collect();

    Ok((
        WireFrame {
            tag_id,
            epoch_micros,
            entries,
        },
        total,
    ))
}

/// A frame that framed correctly but failed its CRC; it has been dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntegrityError {
    pub expected: u16,
    pub computed: u16,
}

impl fmt::Display for IntegrityError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "integrity error: crc {:#06x} != {:#06x}, frame dropped",
            self.expected, self.computed
        )
    }
}

impl std::error::Error for IntegrityError {}

/// Incremental decoder for a byte stream of frames.
///
/// Bytes that cannot start a valid frame are skipped one at a time and
/// counted in `resync_bytes`. A CRC failure drops the candidate frame's
/// first byte and rescans from the next.
#[derive(Debug, Default)]
pub struct StreamDecoder {
    buffer: Vec<u8>,
    start: usize,
    pub resync_bytes: u64,
    pub integrity_errors: u64,
    pub frames: u64,
}

impl StreamDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        if self.start > 0 && self.start * 2 >= self.buffer.len() {
            self.buffer.drain(..self.start);
            self.start = 0;
        }
        self.buffer.extend_from_slice(bytes);
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len() - self.start
    }

    /// `Ok(None)` means more bytes are needed.
    pub fn next_frame(&mut self) -> std::result::Result<Option<WireFrame>, IntegrityError> {
        loop {
            match decode_frame(&self.buffer[self.start..]) {
                Ok((frame, used)) => {
                    self.start += used;
                    self.frames += 1;
                    return Ok(Some(frame));
                }
                Err(DecodeError::NeedMoreBytes(_)) => return Ok(None),
                Err(DecodeError::Crc { expected, computed }) => {
                    self.start += 1;
                    self.integrity_errors += 1;
                    return Err(IntegrityError { expected, computed });
                }
                Err(DecodeError::BadMagic | DecodeError::BadVersion(_) | DecodeError::EmptyFrame) => {
                    self.start += 1;
                    self.resync_bytes += 1;
                }
            }
        }
    }
}
