//! Per-segment header.
//!
//! Byte layout, big-endian throughout:
//!
//! ```text
//! offset  size  field
//!      0     1  header id (0xEB)
//!      1     8  epoch timestamp (µs since Unix epoch, 0 when unset)
//!      9     3  global timestamp
//!     12     3  sensor modality (bits 23..21) | data modality (20..18) | datum count (17..0)
//!     15     2  rows
//!     17     2  cols
//!     19     8  reserved, zero
//!     27    32  sensor model, ASCII, space padded
//!     59     2  user word count N
//!     61   4·N  user words
//!      …     4  pointer count P
//!      …     4  pointer increment (µs)
//!      …   4·P  pointer offsets
//! ```

use std::fmt;

use thiserror::Error;

use crate::index::PointerTable;
use crate::wire::Strictness;

/// First byte of every header. Disjoint from all datum codes.
pub const HEADER_ID: u8 = 0xEB;

/// Size of the fixed region before the user word count (472 bits).
pub const REQUIRED_LEN: usize = 59;

pub const SENSOR_MODEL_LEN: usize = 32;

/// Largest datum count the 18-bit field can carry.
pub const MAX_NUM_DATUM: u32 = (1 << 18) - 1;

pub const MAX_GLOBAL_TS: u32 = (1 << 24) - 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HeaderError {
    #[error("field {field} value {value} exceeds {bits} bits")]
    FieldOverflow {
        field: &'static str,
        value: u64,
        bits: u32,
    },
    #[error("sensor model contains non-ASCII byte {0:#04x}")]
    NonAsciiModel(u8),
    #[error("rows and cols must be nonzero for event data (got {rows}x{cols})")]
    ZeroDimension { rows: u16, cols: u16 },
    #[error("bad header id {0:#04x}, expected {HEADER_ID:#04x}")]
    BadHeaderId(u8),
    #[error("truncated header: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("reserved header bits are nonzero ({0:#018x})")]
    ReservedNonzero(u64),
    #[error("pointer {index} offset {offset:#x} is misaligned or out of order")]
    BadPointer { index: usize, offset: u32 },
}

/// Sensor modality, a 3-bit field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SensorModality(u8);

impl SensorModality {
    pub const EVENT_ONLY: SensorModality = SensorModality(0);
    pub const EVENT_FRAMING: SensorModality = SensorModality(1);
    pub const TWO_COLOR_EVENT_FRAMING: SensorModality = SensorModality(2);

    pub fn new(bits: u8) -> Result<Self, HeaderError> {
        if bits < 8 {
            Ok(SensorModality(bits))
        } else {
            Err(HeaderError::FieldOverflow {
                field: "sensor_modality",
                value: bits as u64,
                bits: 3,
            })
        }
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn describe(self) -> &'static str {
        match self.0 {
            0 => "event imager only",
            1 => "event + framing",
            2 => "two-color event + framing",
            _ => "reserved",
        }
    }
}

/// Data modality, a 3-bit field. Values 4–7 are the event transmission modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DataModality {
    Reserved = 0,
    IntensityFrames = 1,
    EventIntegration = 2,
    EventDt = 3,
    Event = 4,
    Mixed = 5,
    Vectorized = 6,
    MixedVectorized = 7,
}

impl DataModality {
    pub const EVENT_MODES: [DataModality; 4] = [
        DataModality::Event,
        DataModality::Mixed,
        DataModality::Vectorized,
        DataModality::MixedVectorized,
    ];

    pub fn from_bits(bits: u8) -> Result<Self, HeaderError> {
        Ok(match bits {
            0 => DataModality::Reserved,
            1 => DataModality::IntensityFrames,
            2 => DataModality::EventIntegration,
            3 => DataModality::EventDt,
            4 => DataModality::Event,
            5 => DataModality::Mixed,
            6 => DataModality::Vectorized,
            7 => DataModality::MixedVectorized,
            _ => {
                return Err(HeaderError::FieldOverflow {
                    field: "data_modality",
                    value: bits as u64,
                    bits: 3,
                })
            }
        })
    }

    pub fn bits(self) -> u8 {
        self as u8
    }

    pub fn is_event_mode(self) -> bool {
        self.bits() >= 4
    }

    /// Modes whose events carry a 32-bit intensity.
    pub fn carries_intensity(self) -> bool {
        matches!(self, DataModality::Mixed | DataModality::MixedVectorized)
    }

    pub fn is_vectorized(self) -> bool {
        matches!(self, DataModality::Vectorized | DataModality::MixedVectorized)
    }

    /// Short name used on the command line.
    pub fn mode_name(self) -> &'static str {
        match self {
            DataModality::Reserved => "reserved",
            DataModality::IntensityFrames => "intensity-frames",
            DataModality::EventIntegration => "event-integration",
            DataModality::EventDt => "event-dt",
            DataModality::Event => "baseline",
            DataModality::Mixed => "mixed",
            DataModality::Vectorized => "vectorized",
            DataModality::MixedVectorized => "mixed-vectorized",
        }
    }

    pub fn from_mode_name(name: &str) -> Option<Self> {
        DataModality::EVENT_MODES
            .into_iter()
            .find(|m| m.mode_name() == name)
    }
}

impl fmt::Display for DataModality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.bits(), self.mode_name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeaderRecord {
    pub epoch_ts: u64,
    pub global_ts: u32,
    pub sensor_modality: SensorModality,
    pub data_modality: DataModality,
    /// Number of 32-bit payload words; 0 means "read to end of input".
    pub num_datum: u32,
    pub rows: u16,
    pub cols: u16,
    pub sensor_model: [u8; SENSOR_MODEL_LEN],
    pub user_words: Vec<u32>,
    pub pointer_table: PointerTable,
}

impl HeaderRecord {
    /// An event-only header with zeroed timestamps and no user words.
    pub fn new(data_modality: DataModality, rows: u16, cols: u16) -> Self {
        HeaderRecord {
            epoch_ts: 0,
            global_ts: 0,
            sensor_modality: SensorModality::EVENT_ONLY,
            data_modality,
            num_datum: 0,
            rows,
            cols,
            sensor_model: [b' '; SENSOR_MODEL_LEN],
            user_words: Vec::new(),
            pointer_table: PointerTable::default(),
        }
    }

    pub fn with_sensor_model(mut self, model: &str) -> Self {
        self.sensor_model = sensor_model_from_str(model);
        self
    }

    /// The sensor model as text, including padding.
    pub fn sensor_model_str(&self) -> String {
        self.sensor_model.iter().map(|&b| b as char).collect()
    }

    /// Total encoded length in bytes.
    pub fn encoded_len(&self) -> usize {
        REQUIRED_LEN + 2 + 4 * self.user_words.len() + 8 + 4 * self.pointer_table.offsets.len()
    }

    fn validate(&self, strictness: Strictness) -> Result<(), HeaderError> {
        if self.global_ts > MAX_GLOBAL_TS {
            return Err(HeaderError::FieldOverflow {
                field: "global_ts",
                value: self.global_ts as u64,
                bits: 24,
            });
        }
        if self.num_datum > MAX_NUM_DATUM {
            return Err(HeaderError::FieldOverflow {
                field: "num_datum",
                value: self.num_datum as u64,
                bits: 18,
            });
        }
        if self.user_words.len() > u16::MAX as usize {
            return Err(HeaderError::FieldOverflow {
                field: "user_words",
                value: self.user_words.len() as u64,
                bits: 16,
            });
        }
        if self.pointer_table.offsets.len() > u32::MAX as usize {
            return Err(HeaderError::FieldOverflow {
                field: "pointer_count",
                value: self.pointer_table.offsets.len() as u64,
                bits: 32,
            });
        }
        if self.data_modality.is_event_mode() && (self.rows == 0 || self.cols == 0) {
            return Err(HeaderError::ZeroDimension {
                rows: self.rows,
                cols: self.cols,
            });
        }
        if strictness == Strictness::Strict {
            if let Some(&b) = self.sensor_model.iter().find(|b| !b.is_ascii()) {
                return Err(HeaderError::NonAsciiModel(b));
            }
            self.pointer_table.validate()?;
        }
        Ok(())
    }
}

/// Space-pads (or truncates) `model` to 32 bytes.
pub fn sensor_model_from_str(model: &str) -> [u8; SENSOR_MODEL_LEN] {
    let mut out = [b' '; SENSOR_MODEL_LEN];
    for (dst, src) in out.iter_mut().zip(model.bytes()) {
        *dst = src;
    }
    out
}

pub fn encode_header(h: &HeaderRecord, strictness: Strictness) -> Result<Vec<u8>, HeaderError> {
    h.validate(strictness)?;
    let mut out = Vec::with_capacity(h.encoded_len());
    out.push(HEADER_ID);
    out.extend_from_slice(&h.epoch_ts.to_be_bytes());
    out.extend_from_slice(&h.global_ts.to_be_bytes()[1..]);
    let packed = ((h.sensor_modality.bits() as u32) << 21)
        | ((h.data_modality.bits() as u32) << 18)
        | h.num_datum;
    out.extend_from_slice(&packed.to_be_bytes()[1..]);
    out.extend_from_slice(&h.rows.to_be_bytes());
    out.extend_from_slice(&h.cols.to_be_bytes());
    out.extend_from_slice(&[0u8; 8]);
    out.extend_from_slice(&h.sensor_model);
    debug_assert_eq!(out.len(), REQUIRED_LEN);

    out.extend_from_slice(&(h.user_words.len() as u16).to_be_bytes());
    for w in &h.user_words {
        out.extend_from_slice(&w.to_be_bytes());
    }
    let table = &h.pointer_table;
    out.extend_from_slice(&(table.offsets.len() as u32).to_be_bytes());
    out.extend_from_slice(&table.increment_us.to_be_bytes());
    for off in &table.offsets {
        out.extend_from_slice(&off.to_be_bytes());
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], HeaderError> {
        let needed = self.pos.saturating_add(n);
        if needed > self.bytes.len() {
            return Err(HeaderError::Truncated {
                needed,
                available: self.bytes.len(),
            });
        }
        let s = &self.bytes[self.pos..needed];
        self.pos = needed;
        Ok(s)
    }

    fn be(&mut self, n: usize) -> Result<u64, HeaderError> {
        Ok(self
            .take(n)?
            .iter()
            .fold(0u64, |acc, &b| (acc << 8) | b as u64))
    }

    /// Fails early if `count` items of `size` bytes cannot fit.
    fn ensure(&self, count: usize, size: usize) -> Result<(), HeaderError> {
        let needed = self.pos.saturating_add(count.saturating_mul(size));
        if needed > self.bytes.len() {
            Err(HeaderError::Truncated {
                needed,
                available: self.bytes.len(),
            })
        } else {
            Ok(())
        }
    }
}

/// Parses a header from the start of `bytes`, returning it and its length.
pub fn decode_header(
    bytes: &[u8],
    strictness: Strictness,
) -> Result<(HeaderRecord, usize), HeaderError> {
    let mut cur = Cursor { bytes, pos: 0 };
    let id = cur.be(1)? as u8;
    if id != HEADER_ID {
        return Err(HeaderError::BadHeaderId(id));
    }
    let epoch_ts = cur.be(8)?;
    let global_ts = cur.be(3)? as u32;
    let packed = cur.be(3)? as u32;
    let sensor_modality = SensorModality((packed >> 21) as u8 & 0x7);
    let data_modality = DataModality::from_bits((packed >> 18) as u8 & 0x7)?;
    let num_datum = packed & MAX_NUM_DATUM;
    let rows = cur.be(2)? as u16;
    let cols = cur.be(2)? as u16;
    let reserved = cur.be(8)?;
    let mut sensor_model = [0u8; SENSOR_MODEL_LEN];
    sensor_model.copy_from_slice(cur.take(SENSOR_MODEL_LEN)?);

    let n_user = cur.be(2)? as usize;
    cur.ensure(n_user, 4)?;
    let user_words = (0..n_user)
        .map(|_| cur.be(4).map(|v| v as u32))
        .collect::<Result<Vec<_>, _>>()?;

    let n_ptr = cur.be(4)? as usize;
    let increment_us = cur.be(4)? as u32;
    cur.ensure(n_ptr, 4)?;
    let offsets = (0..n_ptr)
        .map(|_| cur.be(4).map(|v| v as u32))
        .collect::<Result<Vec<_>, _>>()?;

    let h = HeaderRecord {
        epoch_ts,
        global_ts,
        sensor_modality,
        data_modality,
        num_datum,
        rows,
        cols,
        sensor_model,
        user_words,
        pointer_table: PointerTable {
            increment_us,
            offsets,
        },
    };
    if strictness == Strictness::Strict {
        if reserved != 0 {
            return Err(HeaderError::ReservedNonzero(reserved));
        }
        h.validate(strictness)?;
    }
    Ok((h, cur.pos))
}
