//! Single 32-bit datum words.
//!
//! Every payload word carries an 8-bit datum code in its most significant
//! byte followed by 24 data bits. Address fields occupy bits 23..8 and the
//! trailing 8-bit field occupies bits 7..0:
//!
//! ```text
//! 31      24 23                     8 7        0
//! ┌─────────┬────────────────────────┬──────────┐
//! │  code   │   address (16 bits)    │ trailer  │
//! └─────────┴────────────────────────┴──────────┘
//! ```
//!
//! Words travel big-endian so the code byte is the first byte on the wire.

use std::fmt;

use thiserror::Error;

const MASK_24: u32 = 0x00FF_FFFF;

/// Decode strictness shared by the word, header and payload decoders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strictness {
    /// Reject anything that deviates from the format.
    #[default]
    Strict,
    /// Tolerate recoverable deviations and report them as diagnostics.
    Lenient,
}

/// Direction of a pixel's log-intensity change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarity {
    Off,
    On,
}

impl Polarity {
    pub fn from_bit(bit: bool) -> Self {
        if bit {
            Polarity::On
        } else {
            Polarity::Off
        }
    }

    pub fn is_on(self) -> bool {
        self == Polarity::On
    }
}

/// The 8-bit datum type code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DatumCode(u8);

impl DatumCode {
    pub const TS_MSB: DatumCode = DatumCode(0x01);
    pub const EVENT_Y: DatumCode = DatumCode(0x02);
    pub const MIXED_X_ON_MSB: DatumCode = DatumCode(0x03);
    pub const MIXED_X_OFF_MSB: DatumCode = DatumCode(0x04);
    pub const MIXED_X_LSB: DatumCode = DatumCode(0x05);
    pub const EVENT_X_ON: DatumCode = DatumCode(0x06);
    pub const EVENT_X_OFF: DatumCode = DatumCode(0x07);
    pub const VEC_X_ON_MSB: DatumCode = DatumCode(0x08);
    pub const VEC_X_OFF_MSB: DatumCode = DatumCode(0x09);
    pub const VEC_X_LSB: DatumCode = DatumCode(0x0A);
    pub const VEC_INTENSITY_MSB: DatumCode = DatumCode(0x0B);
    pub const VEC_INTENSITY_LSB: DatumCode = DatumCode(0x0C);

    /// All assigned codes in ascending order.
    pub const ALL: [DatumCode; 12] = [
        Self::TS_MSB,
        Self::EVENT_Y,
        Self::MIXED_X_ON_MSB,
        Self::MIXED_X_OFF_MSB,
        Self::MIXED_X_LSB,
        Self::EVENT_X_ON,
        Self::EVENT_X_OFF,
        Self::VEC_X_ON_MSB,
        Self::VEC_X_OFF_MSB,
        Self::VEC_X_LSB,
        Self::VEC_INTENSITY_MSB,
        Self::VEC_INTENSITY_LSB,
    ];

    pub fn new(code: u8) -> Result<Self, WireError> {
        if (0x01..=0x0C).contains(&code) {
            Ok(DatumCode(code))
        } else {
            Err(WireError::UnknownDatumCode(code))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn name(self) -> &'static str {
        match self.0 {
            0x01 => "TS_MSB",
            0x02 => "EVENT_Y",
            0x03 => "MIXED_X_ON_MSB",
            0x04 => "MIXED_X_OFF_MSB",
            0x05 => "MIXED_X_LSB",
            0x06 => "EVENT_X_ON",
            0x07 => "EVENT_X_OFF",
            0x08 => "VEC_X_ON_MSB",
            0x09 => "VEC_X_OFF_MSB",
            0x0A => "VEC_X_LSB",
            0x0B => "VEC_INTENSITY_MSB",
            0x0C => "VEC_INTENSITY_LSB",
            _ => unreachable!("DatumCode is only constructed for assigned codes"),
        }
    }
}

impl TryFrom<u8> for DatumCode {
    type Error = WireError;

    fn try_from(code: u8) -> Result<Self, Self::Error> {
        DatumCode::new(code)
    }
}

impl fmt::Display for DatumCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("field {field} value {value:#x} exceeds {bits} bits")]
    FieldOverflow {
        field: &'static str,
        value: u64,
        bits: u32,
    },
    #[error("unknown datum code {0:#04x}")]
    UnknownDatumCode(u8),
    #[error("nonzero padding {0:#06x} in VEC_INTENSITY_LSB")]
    NonzeroPadding(u16),
}

/// One decoded payload word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Datum {
    /// Timestamp bits 39..16.
    TsMsb { ts_msb: u32 },
    /// Row address plus timestamp bits 15..8.
    EventY { y: u16, ts_lsb: u8 },
    /// Column address plus intensity bits 31..24.
    MixedXMsb {
        polarity: Polarity,
        x: u16,
        intensity_msb: u8,
    },
    /// Intensity bits 23..0 for the preceding [`Datum::MixedXMsb`].
    MixedXLsb { intensity_lsb24: u32 },
    /// Column address plus timestamp bits 7..0.
    EventX {
        polarity: Polarity,
        x: u16,
        ts_llsb: u8,
    },
    /// Vector root column plus one-hot occupancy of columns root..root+7.
    VecXMsb {
        polarity: Polarity,
        root_x: u16,
        onehot8: u8,
    },
    /// 24 more one-hot columns, daisy-chained after a vector MSB word.
    VecXLsb { onehot24: u32 },
    /// Intensity bits 31..8 for the next asserted vector column.
    VecIntensityMsb { intensity_msb24: u32 },
    /// Intensity bits 7..0; the low 16 bits of the word are padding.
    VecIntensityLsb { intensity_lsb8: u8 },
}

impl Datum {
    pub fn code(&self) -> DatumCode {
        match *self {
            Datum::TsMsb { .. } => DatumCode::TS_MSB,
            Datum::EventY { .. } => DatumCode::EVENT_Y,
            Datum::MixedXMsb { polarity, .. } => match polarity {
                Polarity::On => DatumCode::MIXED_X_ON_MSB,
                Polarity::Off => DatumCode::MIXED_X_OFF_MSB,
            },
            Datum::MixedXLsb { .. } => DatumCode::MIXED_X_LSB,
            Datum::EventX { polarity, .. } => match polarity {
                Polarity::On => DatumCode::EVENT_X_ON,
                Polarity::Off => DatumCode::EVENT_X_OFF,
            },
            Datum::VecXMsb { polarity, .. } => match polarity {
                Polarity::On => DatumCode::VEC_X_ON_MSB,
                Polarity::Off => DatumCode::VEC_X_OFF_MSB,
            },
            Datum::VecXLsb { .. } => DatumCode::VEC_X_LSB,
            Datum::VecIntensityMsb { .. } => DatumCode::VEC_INTENSITY_MSB,
            Datum::VecIntensityLsb { .. } => DatumCode::VEC_INTENSITY_LSB,
        }
    }

    /// True for words that carry column addresses or column occupancy.
    pub fn is_x_word(&self) -> bool {
        matches!(
            self,
            Datum::EventX { .. }
                | Datum::MixedXMsb { .. }
                | Datum::VecXMsb { .. }
                | Datum::VecXLsb { .. }
        )
    }
}

fn check_24(field: &'static str, value: u32) -> Result<u32, WireError> {
    if value > MASK_24 {
        Err(WireError::FieldOverflow {
            field,
            value: value as u64,
            bits: 24,
        })
    } else {
        Ok(value)
    }
}

#[inline]
fn pack(code: DatumCode, address: u16, trailer: u8) -> u32 {
    ((code.0 as u32) << 24) | ((address as u32) << 8) | trailer as u32
}

#[inline]
fn pack24(code: DatumCode, data: u32) -> u32 {
    ((code.0 as u32) << 24) | data
}

/// Packs a datum into its 32-bit word.
pub fn encode_word(datum: &Datum) -> Result<u32, WireError> {
    let code = datum.code();
    let word = match *datum {
        Datum::TsMsb { ts_msb } => pack24(code, check_24("ts_msb", ts_msb)?),
        Datum::EventY { y, ts_lsb } => pack(code, y, ts_lsb),
        Datum::MixedXMsb {
            x, intensity_msb, ..
        } => pack(code, x, intensity_msb),
        Datum::MixedXLsb { intensity_lsb24 } => {
            pack24(code, check_24("intensity_lsb24", intensity_lsb24)?)
        }
        Datum::EventX { x, ts_llsb, .. } => pack(code, x, ts_llsb),
        Datum::VecXMsb {
            root_x, onehot8, ..
        } => pack(code, root_x, onehot8),
        Datum::VecXLsb { onehot24 } => pack24(code, check_24("onehot24", onehot24)?),
        Datum::VecIntensityMsb { intensity_msb24 } => {
            pack24(code, check_24("intensity_msb24", intensity_msb24)?)
        }
        Datum::VecIntensityLsb { intensity_lsb8 } => pack24(code, (intensity_lsb8 as u32) << 16),
    };
    Ok(word)
}

/// Unpacks a 32-bit word. Total over all inputs.
pub fn decode_word(word: u32, strictness: Strictness) -> Result<Datum, WireError> {
    let code = DatumCode::new((word >> 24) as u8)?;
    let data = word & MASK_24;
    let address = (data >> 8) as u16;
    let trailer = data as u8;
    let datum = match code {
        DatumCode::TS_MSB => Datum::TsMsb { ts_msb: data },
        DatumCode::EVENT_Y => Datum::EventY {
            y: address,
            ts_lsb: trailer,
        },
        DatumCode::MIXED_X_ON_MSB | DatumCode::MIXED_X_OFF_MSB => Datum::MixedXMsb {
            polarity: Polarity::from_bit(code == DatumCode::MIXED_X_ON_MSB),
            x: address,
            intensity_msb: trailer,
        },
        DatumCode::MIXED_X_LSB => Datum::MixedXLsb {
            intensity_lsb24: data,
        },
        DatumCode::EVENT_X_ON | DatumCode::EVENT_X_OFF => Datum::EventX {
            polarity: Polarity::from_bit(code == DatumCode::EVENT_X_ON),
            x: address,
            ts_llsb: trailer,
        },
        DatumCode::VEC_X_ON_MSB | DatumCode::VEC_X_OFF_MSB => Datum::VecXMsb {
            polarity: Polarity::from_bit(code == DatumCode::VEC_X_ON_MSB),
            root_x: address,
            onehot8: trailer,
        },
        DatumCode::VEC_X_LSB => Datum::VecXLsb { onehot24: data },
        DatumCode::VEC_INTENSITY_MSB => Datum::VecIntensityMsb {
            intensity_msb24: data,
        },
        DatumCode::VEC_INTENSITY_LSB => {
            let padding = (data & 0xFFFF) as u16;
            if padding != 0 && strictness == Strictness::Strict {
                return Err(WireError::NonzeroPadding(padding));
            }
            Datum::VecIntensityLsb {
                intensity_lsb8: (data >> 16) as u8,
            }
        }
        _ => unreachable!(),
    };
    Ok(datum)
}

/// Serializes words big-endian.
pub fn words_to_bytes(words: &[u32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(words.len() * 4);
    for w in words {
        out.extend_from_slice(&w.to_be_bytes());
    }
    out
}

/// Reads big-endian words; a trailing partial word is returned separately.
pub fn bytes_to_words(bytes: &[u8]) -> (Vec<u32>, &[u8]) {
    let chunks = bytes.chunks_exact(4);
    let rest = chunks.remainder();
    let words = chunks
        .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    (words, rest)
}
