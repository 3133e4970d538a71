//! Pointer-to-timestamps table.
//!
//! Pointer `k` holds the payload byte offset of the TS MSB word that opens
//! the first timestamp block whose first event falls in
//! `[t0 + k·increment, t0 + (k+1)·increment)`, where `t0` is the first
//! event's timestamp. Intervals with no such block hold [`SENTINEL`].
//!
//! A block is the run of words from one TS MSB to the next. Decoding can
//! restart at any block, so a seek lands on a pointer and decodes forward
//! from there. Pointers are exact when every interval boundary opens a new
//! block, which the encoder guarantees when its resync interval equals the
//! table increment.

use thiserror::Error;

use crate::decoder::{Decoder, DecodeOptions, DecodeOutput, Diagnostic};
use crate::event::EventRecord;
use crate::header::HeaderError;
use crate::wire::DatumCode;

/// Offset value for an interval that holds no data.
pub const SENTINEL: u32 = 0xFFFF_FFFF;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PointerTable {
    pub increment_us: u32,
    pub offsets: Vec<u32>,
}

impl PointerTable {
    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Non-sentinel offsets must be word aligned and strictly increasing.
    pub fn validate(&self) -> Result<(), HeaderError> {
        let mut prev: Option<u32> = None;
        for (index, &offset) in self.offsets.iter().enumerate() {
            if offset == SENTINEL {
                continue;
            }
            if offset % 4 != 0 || prev.is_some_and(|p| p >= offset) {
                return Err(HeaderError::BadPointer { index, offset });
            }
            prev = Some(offset);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IndexError {
    #[error("pointer increment must be at least 1 µs")]
    ZeroIncrement,
    #[error("payload does not decode: {0}")]
    UndecodablePayload(Diagnostic),
    #[error("{0} pointers do not fit the 32-bit pointer count")]
    TooManyPointers(u64),
    #[error("payload of {0} bytes is too large to index")]
    PayloadTooLarge(usize),
    #[error("pointer table is empty")]
    EmptyTable,
    #[error("interval {interval} starting at {start_us} µs holds no data")]
    SentinelInterval { interval: usize, start_us: u64 },
    #[error("pointer {index} offset {offset:#x} does not address a TS_MSB word")]
    BadPointer { index: usize, offset: u32 },
}

/// First and last event timestamps of a payload.
pub type EventSpan = (u64, u64);

/// One run of words opened by a TS MSB word.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimestampBlock {
    /// Byte offset of the TS MSB word.
    pub offset: u32,
    /// Timestamp of the first event decoded in the block.
    pub first_t_us: u64,
}

/// Scans a payload for blocks that contain at least one event, plus the
/// first and last event timestamps.
pub fn timestamp_blocks(
    words: &[u32],
    opts: DecodeOptions,
) -> Result<(Vec<TimestampBlock>, Option<EventSpan>), IndexError> {
    if words.len() > (u32::MAX / 4) as usize {
        return Err(IndexError::PayloadTooLarge(words.len() * 4));
    }
    let mut dec = Decoder::new(opts).map_err(IndexError::UndecodablePayload)?;
    let mut buf = Vec::new();
    let mut blocks = Vec::new();
    let mut open_tick: Option<usize> = None;
    let mut span: Option<(u64, u64)> = None;
    for (i, &w) in words.iter().enumerate() {
        if (w >> 24) as u8 == DatumCode::TS_MSB.value() {
            open_tick = Some(i);
        }
        dec.feed(w, &mut buf).map_err(IndexError::UndecodablePayload)?;
        if let (Some(first), Some(last)) = (buf.first(), buf.last()) {
            if let Some(tick) = open_tick.take() {
                blocks.push(TimestampBlock {
                    offset: (tick * 4) as u32,
                    first_t_us: first.t_us,
                });
            }
            span = Some(match span {
                None => (first.t_us, last.t_us),
                Some((t0, _)) => (t0, last.t_us),
            });
            buf.clear();
        }
    }
    dec.finish().map_err(IndexError::UndecodablePayload)?;
    Ok((blocks, span))
}

/// Builds the pointer table for one segment payload.
pub fn build_pointer_table(
    words: &[u32],
    opts: DecodeOptions,
    increment_us: u32,
) -> Result<PointerTable, IndexError> {
    if increment_us == 0 {
        return Err(IndexError::ZeroIncrement);
    }
    let (blocks, span) = timestamp_blocks(words, opts)?;
    let Some((t0, t_last)) = span else {
        return Ok(PointerTable {
            increment_us,
            offsets: Vec::new(),
        });
    };
    let inc = increment_us as u64;
    let count = t_last.saturating_sub(t0) / inc + 1;
    if count > u32::MAX as u64 {
        return Err(IndexError::TooManyPointers(count));
    }
    let mut offsets = Vec::with_capacity(count as usize);
    let mut cursor = 0;
    for k in 0..count {
        let start = t0 + k * inc;
        while cursor < blocks.len() && blocks[cursor].first_t_us < start {
            cursor += 1;
        }
        match blocks.get(cursor) {
            Some(b) if b.first_t_us < start + inc => {
                offsets.push(b.offset);
                cursor += 1;
            }
            _ => offsets.push(SENTINEL),
        }
    }
    Ok(PointerTable {
        increment_us,
        offsets,
    })
}

/// Where to resume decoding for a requested time.
pub struct SeekPosition {
    pub interval: usize,
    pub interval_start_us: u64,
    /// Payload byte offset of the TS MSB word to resume at.
    pub byte_offset: u32,
    /// Fresh decoder positioned at `byte_offset` that drops events earlier
    /// than the interval start.
    pub decoder: Decoder,
}

impl SeekPosition {
    /// Decodes from the seek point to the end of the payload.
    pub fn decode_rest(mut self, words: &[u32]) -> Result<DecodeOutput, Diagnostic> {
        let mut events = Vec::new();
        for &w in &words[self.byte_offset as usize / 4..] {
            self.decoder.feed(w, &mut events)?;
        }
        self.decoder.finish()?;
        Ok(DecodeOutput {
            events,
            diagnostics: self.decoder.take_diagnostics(),
        })
    }
}

fn check_pointer(words: &[u32], index: usize, offset: u32) -> Result<(), IndexError> {
    let ok = offset.is_multiple_of(4)
        && words
            .get(offset as usize / 4)
            .is_some_and(|w| (w >> 24) as u8 == DatumCode::TS_MSB.value());
    if ok {
        Ok(())
    } else {
        Err(IndexError::BadPointer { index, offset })
    }
}

/// Timestamp of the first event at or after the first pointer.
pub fn first_event_time(
    table: &PointerTable,
    words: &[u32],
    opts: DecodeOptions,
) -> Result<u64, IndexError> {
    let &first = table.offsets.first().ok_or(IndexError::EmptyTable)?;
    if first == SENTINEL {
        return Err(IndexError::SentinelInterval {
            interval: 0,
            start_us: 0,
        });
    }
    check_pointer(words, 0, first)?;
    let mut dec = Decoder::starting_at(opts, first as usize).map_err(IndexError::UndecodablePayload)?;
    let mut buf: Vec<EventRecord> = Vec::new();
    for &w in &words[first as usize / 4..] {
        dec.feed(w, &mut buf).map_err(IndexError::UndecodablePayload)?;
        if let Some(e) = buf.first() {
            return Ok(e.t_us);
        }
    }
    Err(IndexError::EmptyTable)
}

/// Resolves `t_us` to a pointer. Times before the first event clamp to the
/// first pointer; times past the table clamp to the last non-sentinel one.
pub fn seek(
    table: &PointerTable,
    words: &[u32],
    opts: DecodeOptions,
    t_us: u64,
) -> Result<SeekPosition, IndexError> {
    if table.increment_us == 0 {
        return Err(IndexError::ZeroIncrement);
    }
    let t0 = first_event_time(table, words, opts)?;
    let inc = table.increment_us as u64;
    let last = table.offsets.len() - 1;
    let wanted = (t_us.saturating_sub(t0) / inc).min(last as u64) as usize;
    let interval = if wanted == last && t_us >= t0 + last as u64 * inc {
        table
            .offsets
            .iter()
            .rposition(|&o| o != SENTINEL)
            .ok_or(IndexError::EmptyTable)?
    } else {
        wanted
    };
    let interval_start_us = t0 + interval as u64 * inc;
    let byte_offset = table.offsets[interval];
    if byte_offset == SENTINEL {
        return Err(IndexError::SentinelInterval {
            interval,
            start_us: interval_start_us,
        });
    }
    check_pointer(words, interval, byte_offset)?;
    let decoder = Decoder::starting_at(opts, byte_offset as usize)
        .map_err(IndexError::UndecodablePayload)?
        .not_before(interval_start_us);
    Ok(SeekPosition {
        interval,
        interval_start_us,
        byte_offset,
        decoder,
    })
}
