//! Recordings: one or more (header, payload) segments back to back.
//!
//! A `.evtp` file is the concatenation of each segment's header followed by
//! its payload words, big-endian. A new segment starts wherever the device
//! was reconfigured or the 18-bit datum count would overflow. Only the final
//! segment may declare a datum count of 0, meaning "read to end of input".

use std::io::{self, Read};

use thiserror::Error;

use crate::decoder::{decode_payload, DecodeOptions, Diagnostic, DiagnosticCode};
use crate::encoder::{encode_payload, EncodeConfig, EncodeError};
use crate::event::EventRecord;
use crate::header::{
    decode_header, encode_header, HeaderError, HeaderRecord, HEADER_ID, MAX_NUM_DATUM, REQUIRED_LEN,
};
use crate::index::{build_pointer_table, first_event_time, seek, IndexError, SeekPosition, SENTINEL};
use crate::par;
use crate::wire::{words_to_bytes, DatumCode, Strictness};

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("segment at byte {offset}: {source}")]
    Header {
        offset: u64,
        #[source]
        source: HeaderError,
    },
    #[error("segment {segment} declares {declared} words but carries {actual}")]
    CountMismatch {
        segment: usize,
        declared: u32,
        actual: usize,
    },
    #[error("payload at byte {offset} truncated: need {needed} bytes, have {available}")]
    Truncated {
        offset: u64,
        needed: u64,
        available: u64,
    },
    #[error("{len} trailing bytes at offset {offset}")]
    TrailingGarbage { offset: u64, len: u64 },
    #[error("segment {segment} is empty but not last; a zero datum count means read to end")]
    EmptySegment { segment: usize },
    #[error("segment {segment} claims data modality {modality} which carries no event payload")]
    UnsupportedModality { segment: usize, modality: u8 },
    #[error("segment {segment} index: {source}")]
    Index {
        segment: usize,
        #[source]
        source: IndexError,
    },
    #[error("segment {segment} payload: {source}")]
    Payload {
        segment: usize,
        #[source]
        source: Diagnostic,
    },
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error("a single timestamp block needs more than {max} words")]
    SegmentTooLarge { max: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl ContainerError {
    /// Diagnostic form, with payload offsets made absolute using `base`.
    pub fn to_diagnostic(&self) -> Diagnostic {
        match self {
            ContainerError::Header { offset, source } => {
                let code = match source {
                    HeaderError::BadHeaderId(_) => DiagnosticCode::BadHeaderId,
                    HeaderError::Truncated { .. } => DiagnosticCode::Truncated,
                    HeaderError::ReservedNonzero(_) => DiagnosticCode::ReservedNonzero,
                    HeaderError::NonAsciiModel(_) => DiagnosticCode::NonAsciiModel,
                    _ => DiagnosticCode::BadHeader,
                };
                Diagnostic::new(*offset as usize, code, source.to_string())
            }
            ContainerError::Truncated { offset, .. } => {
                Diagnostic::new(*offset as usize, DiagnosticCode::Truncated, self.to_string())
            }
            ContainerError::TrailingGarbage { offset, .. } => {
                Diagnostic::new(*offset as usize, DiagnosticCode::TrailingGarbage, self.to_string())
            }
            ContainerError::CountMismatch { .. } => {
                Diagnostic::new(0, DiagnosticCode::CountMismatch, self.to_string())
            }
            ContainerError::UnsupportedModality { .. } => {
                Diagnostic::new(0, DiagnosticCode::UnsupportedModality, self.to_string())
            }
            ContainerError::Payload { source, .. } => source.clone(),
            _ => Diagnostic::new(0, DiagnosticCode::BadHeader, self.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub header: HeaderRecord,
    pub words: Vec<u32>,
}

impl Segment {
    /// Pairs a header with its payload, setting the datum count.
    pub fn new(mut header: HeaderRecord, words: Vec<u32>) -> Result<Self, ContainerError> {
        if words.len() > MAX_NUM_DATUM as usize {
            return Err(ContainerError::SegmentTooLarge {
                max: MAX_NUM_DATUM as usize,
            });
        }
        header.num_datum = words.len() as u32;
        Ok(Segment { header, words })
    }

    pub fn decode_options(&self, strictness: Strictness) -> DecodeOptions {
        DecodeOptions::new(self.header.data_modality, strictness)
            .with_dims(self.header.rows, self.header.cols)
    }

    pub fn encoded_len(&self) -> usize {
        self.header.encoded_len() + 4 * self.words.len()
    }
}

fn check_counts(segments: &[Segment]) -> Result<(), ContainerError> {
    for (i, s) in segments.iter().enumerate() {
        let declared = s.header.num_datum;
        let last = i + 1 == segments.len();
        if declared as usize != s.words.len() && !(declared == 0 && last) {
            return Err(ContainerError::CountMismatch {
                segment: i,
                declared,
                actual: s.words.len(),
            });
        }
        if declared == 0 && !last {
            return Err(ContainerError::EmptySegment { segment: i });
        }
        if !s.header.data_modality.is_event_mode() && !s.words.is_empty() {
            return Err(ContainerError::UnsupportedModality {
                segment: i,
                modality: s.header.data_modality.bits(),
            });
        }
    }
    Ok(())
}

/// Serializes segments, first rebuilding each pointer table from its payload
/// using the increment already in the header (0 leaves the table empty).
pub fn write_recording(segments: &[Segment], strictness: Strictness) -> Result<Vec<u8>, ContainerError> {
    check_counts(segments)?;
    let tables = par::map_slice(segments, |s| {
        let inc = s.header.pointer_table.increment_us;
        if inc == 0 || s.words.is_empty() {
            return Ok(Default::default());
        }
        build_pointer_table(&s.words, s.decode_options(Strictness::Strict), inc)
    });
    let mut out = Vec::new();
    let mut offset = 0u64;
    for (i, (s, table)) in segments.iter().zip(tables).enumerate() {
        let mut header = s.header.clone();
        header.pointer_table = table.map_err(|source| ContainerError::Index { segment: i, source })?;
        if header.pointer_table.increment_us == 0 {
            header.pointer_table.increment_us = s.header.pointer_table.increment_us;
        }
        let bytes = encode_header(&header, strictness).map_err(|source| ContainerError::Header { offset, source })?;
        offset += (bytes.len() + 4 * s.words.len()) as u64;
        out.extend_from_slice(&bytes);
        out.extend_from_slice(&words_to_bytes(&s.words));
    }
    Ok(out)
}

/// Incremental segment reader; never seeks backwards.
pub struct SegmentReader<R> {
    inner: R,
    strictness: Strictness,
    pos: u64,
    segments_read: usize,
    done: bool,
}

impl<R: Read> SegmentReader<R> {
    pub fn new(inner: R, strictness: Strictness) -> Self {
        SegmentReader {
            inner,
            strictness,
            pos: 0,
            segments_read: 0,
            done: false,
        }
    }

    /// Bytes consumed so far.
    pub fn position(&self) -> u64 {
        self.pos
    }

    /// Reads up to `n` bytes, stopping early only at end of input.
    fn read_up_to(&mut self, n: u64, buf: &mut Vec<u8>) -> io::Result<u64> {
        let got = (&mut self.inner).take(n).read_to_end(buf)? as u64;
        self.pos += got;
        Ok(got)
    }

    fn read_header_part(&mut self, start: u64, n: usize, buf: &mut Vec<u8>) -> Result<(), ContainerError> {
        let got = self.read_up_to(n as u64, buf)?;
        if got < n as u64 {
            return Err(ContainerError::Header {
                offset: start,
                source: HeaderError::Truncated {
                    needed: buf.len() - got as usize + n,
                    available: buf.len(),
                },
            });
        }
        Ok(())
    }

    fn be_at(buf: &[u8], at: usize, n: usize) -> u64 {
        buf[at..at + n].iter().fold(0, |acc, &b| (acc << 8) | b as u64)
    }

    fn read_segment(&mut self, first: u8) -> Result<Segment, ContainerError> {
        let start = self.pos - 1;
        if first != HEADER_ID {
            return Err(ContainerError::Header {
                offset: start,
                source: HeaderError::BadHeaderId(first),
            });
        }
        let mut buf = vec![first];
        self.read_header_part(start, REQUIRED_LEN + 2 - 1, &mut buf)?;
        let n_user = Self::be_at(&buf, REQUIRED_LEN, 2) as usize;
        self.read_header_part(start, 4 * n_user + 8, &mut buf)?;
        let n_ptr = Self::be_at(&buf, buf.len() - 8, 4) as usize;
        self.read_header_part(start, 4 * n_ptr, &mut buf)?;
        let (header, used) = decode_header(&buf, self.strictness)
            .map_err(|source| ContainerError::Header { offset: start, source })?;
        debug_assert_eq!(used, buf.len());

        let payload_start = self.pos;
        let mut payload = Vec::new();
        if header.num_datum > 0 {
            let needed = 4 * header.num_datum as u64;
            let got = self.read_up_to(needed, &mut payload)?;
            if got < needed {
                return Err(ContainerError::Truncated {
                    offset: payload_start,
                    needed,
                    available: got,
                });
            }
        } else {
            self.read_up_to(u64::MAX, &mut payload)?;
            self.done = true;
            let rem = payload.len() % 4;
            if rem != 0 {
                if self.strictness == Strictness::Strict {
                    return Err(ContainerError::TrailingGarbage {
                        offset: self.pos - rem as u64,
                        len: rem as u64,
                    });
                }
                payload.truncate(payload.len() - rem);
            }
        }
        let words = payload
            .chunks_exact(4)
            .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        self.segments_read += 1;
        Ok(Segment { header, words })
    }
}

impl<R: Read> Iterator for SegmentReader<R> {
    type Item = Result<Segment, ContainerError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let mut first = Vec::with_capacity(1);
        match self.read_up_to(1, &mut first) {
            Ok(0) => {
                self.done = true;
                return None;
            }
            Ok(_) => {}
            Err(e) => {
                self.done = true;
                return Some(Err(e.into()));
            }
        }
        if first[0] != HEADER_ID && self.segments_read > 0 {
            self.done = true;
            let offset = self.pos - 1;
            let mut rest = Vec::new();
            let len = 1 + self.read_up_to(u64::MAX, &mut rest).unwrap_or(0);
            return match self.strictness {
                Strictness::Strict => Some(Err(ContainerError::TrailingGarbage { offset, len })),
                Strictness::Lenient => None,
            };
        }
        let r = self.read_segment(first[0]);
        if r.is_err() {
            self.done = true;
        }
        Some(r)
    }
}

pub fn read_recording(bytes: &[u8], strictness: Strictness) -> Result<Vec<Segment>, ContainerError> {
    SegmentReader::new(bytes, strictness).collect()
}

/// Byte offset of each segment's first payload word.
pub fn payload_offsets(segments: &[Segment]) -> Vec<usize> {
    let mut pos = 0;
    segments
        .iter()
        .map(|s| {
            let start = pos + s.header.encoded_len();
            pos += s.encoded_len();
            start
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DecodedRecording {
    pub segments: Vec<Segment>,
    /// Decoded events per segment.
    pub events: Vec<Vec<EventRecord>>,
    /// File-absolute diagnostics.
    pub diagnostics: Vec<Diagnostic>,
}

impl DecodedRecording {
    pub fn all_events(&self) -> Vec<EventRecord> {
        self.events.concat()
    }
}

fn check_table(segment: &Segment) -> Result<(), Diagnostic> {
    let payload_len = segment.words.len() as u64 * 4;
    for (i, &o) in segment.header.pointer_table.offsets.iter().enumerate() {
        if o == SENTINEL {
            continue;
        }
        let hits_tick = (o as u64) < payload_len
            && o % 4 == 0
            && (segment.words[o as usize / 4] >> 24) as u8 == DatumCode::TS_MSB.value();
        if !hits_tick {
            return Err(Diagnostic::new(
                0,
                DiagnosticCode::BadHeader,
                format!("pointer {i} offset {o:#x} does not address a TS_MSB word"),
            ));
        }
    }
    Ok(())
}

/// Reads and decodes a whole recording, segments in parallel.
///
/// Strict mode fails on the first fault. Lenient mode never fails; every
/// fault, including unreadable headers, lands in `diagnostics`.
pub fn decode_recording(bytes: &[u8], strictness: Strictness) -> Result<DecodedRecording, ContainerError> {
    let mut segments = Vec::new();
    let mut diagnostics = Vec::new();
    for seg in SegmentReader::new(bytes, strictness) {
        match seg {
            Ok(s) => segments.push(s),
            Err(e) if strictness == Strictness::Lenient => diagnostics.push(e.to_diagnostic()),
            Err(e) => return Err(e),
        }
    }
    decode_segments(segments, diagnostics, strictness)
}

pub fn decode_segments(
    segments: Vec<Segment>,
    mut diagnostics: Vec<Diagnostic>,
    strictness: Strictness,
) -> Result<DecodedRecording, ContainerError> {
    let bases = payload_offsets(&segments);
    let results = par::map_slice(&segments, |s| {
        if strictness == Strictness::Strict {
            check_table(s)?;
        }
        decode_payload(&s.words, s.decode_options(strictness))
    });
    let mut events = Vec::with_capacity(segments.len());
    for (i, (r, base)) in results.into_iter().zip(bases).enumerate() {
        match r {
            Ok(out) => {
                diagnostics.extend(out.diagnostics.into_iter().map(|mut d| {
                    d.offset += base;
                    d
                }));
                events.push(out.events);
            }
            Err(mut d) => {
                d.offset += base;
                if strictness == Strictness::Strict {
                    return Err(ContainerError::Payload { segment: i, source: d });
                }
                diagnostics.push(d);
                events.push(Vec::new());
            }
        }
    }
    Ok(DecodedRecording {
        segments,
        events,
        diagnostics,
    })
}

/// Encodes `events` into as many segments as the 18-bit datum count needs.
///
/// Each segment is encoded independently, so its resync ticks line up with
/// its own pointer table. `template` supplies every header field except the
/// datum count; its pointer increment also becomes the resync interval.
pub fn encode_segments(
    events: &[EventRecord],
    cfg: &EncodeConfig,
    template: &HeaderRecord,
    max_words: usize,
) -> Result<Vec<Segment>, ContainerError> {
    let max_words = max_words.clamp(1, MAX_NUM_DATUM as usize);
    let mut cfg = *cfg;
    let inc = template.pointer_table.increment_us;
    if inc > 0 {
        cfg.resync_us = Some(inc);
    }
    let mut header = template.clone();
    header.data_modality = cfg.modality;
    if events.is_empty() {
        return Ok(vec![Segment::new(header, Vec::new())?]);
    }
    split_encode(events, &cfg, max_words)?
        .into_iter()
        .map(|words| Segment::new(header.clone(), words))
        .collect()
}

fn split_encode(events: &[EventRecord], cfg: &EncodeConfig, max_words: usize) -> Result<Vec<Vec<u32>>, ContainerError> {
    let words = encode_payload(events, cfg)?;
    if words.len() <= max_words {
        return Ok(vec![words]);
    }
    let cut = pick_cut(events, cfg).ok_or(ContainerError::SegmentTooLarge { max: max_words })?;
    let (left, right) = par::join(
        || split_encode(&events[..cut], cfg, max_words),
        || split_encode(&events[cut..], cfg, max_words),
    );
    let mut parts = left?;
    parts.extend(right?);
    Ok(parts)
}

/// A split point near the middle that keeps vectorization bins whole.
fn pick_cut(events: &[EventRecord], cfg: &EncodeConfig) -> Option<usize> {
    if events.len() < 2 {
        return None;
    }
    let mid = events.len() / 2;
    let stamp = |i: usize| cfg.decoded_timestamp(events[i].t_us);
    let fwd = (mid..events.len()).find(|&i| stamp(i) != stamp(i - 1));
    let back = (1..mid).rev().find(|&i| stamp(i) != stamp(i - 1));
    match (fwd, back) {
        (Some(f), Some(b)) => Some(if f - mid <= mid - b { f } else { b }),
        (Some(f), None) => Some(f),
        (None, Some(b)) => Some(b),
        (None, None) => Some(mid),
    }
}

/// How to resume decoding inside the segment chosen by [`locate`].
pub enum Resume {
    /// At a pointer-table entry.
    Pointer(SeekPosition),
    /// No usable table: decode the whole segment and filter.
    Scan,
    /// Nothing at or after the requested time in this segment.
    Skip,
}

pub struct Located {
    pub segment: usize,
    pub resume: Resume,
}

impl Located {
    /// File offset of the resume point, given each segment's payload start.
    pub fn file_offset(&self, payload_offsets: &[usize]) -> Option<u64> {
        match &self.resume {
            Resume::Pointer(p) => Some((payload_offsets[self.segment] + p.byte_offset as usize) as u64),
            _ => None,
        }
    }
}

/// Picks the last segment whose first event is at or before `t_us` and
/// resolves `t_us` through its pointer table. `None` for an empty recording.
pub fn locate(segments: &[Segment], t_us: u64, strictness: Strictness) -> Result<Option<Located>, ContainerError> {
    if segments.is_empty() {
        return Ok(None);
    }
    let starts: Vec<Option<u64>> = segments
        .iter()
        .map(|s| first_event_time(&s.header.pointer_table, &s.words, s.decode_options(strictness)).ok())
        .collect();
    let i = starts
        .iter()
        .rposition(|t| t.is_some_and(|t0| t0 <= t_us))
        .unwrap_or(0);
    let s = &segments[i];
    let opts = s.decode_options(strictness);
    let table = &s.header.pointer_table;
    let index_err = |source| ContainerError::Index { segment: i, source };
    let resume = match seek(table, &s.words, opts, t_us) {
        Ok(p) => Resume::Pointer(p),
        Err(IndexError::SentinelInterval { interval, .. }) => {
            // nothing starts in this interval; resume at the next pointer
            match table.offsets[interval..].iter().position(|&o| o != SENTINEL) {
                Some(k) => {
                    let t0 = starts[i].unwrap_or(0);
                    let t = t0 + (interval + k) as u64 * table.increment_us as u64;
                    Resume::Pointer(seek(table, &s.words, opts, t).map_err(index_err)?)
                }
                None => Resume::Skip,
            }
        }
        Err(IndexError::EmptyTable) | Err(IndexError::ZeroIncrement) => Resume::Scan,
        Err(source) => return Err(index_err(source)),
    };
    Ok(Some(Located { segment: i, resume }))
}

/// Decodes every event from the pointer covering `t_us` onwards.
///
/// The result starts at the resolved interval boundary, so it may include
/// events slightly earlier than `t_us`; it never misses a later one.
/// Segments without a pointer table are decoded whole and filtered.
pub fn decode_from(
    segments: &[Segment],
    t_us: u64,
    strictness: Strictness,
) -> Result<Vec<EventRecord>, ContainerError> {
    let Some(loc) = locate(segments, t_us, strictness)? else {
        return Ok(Vec::new());
    };
    let decode = |i: usize| {
        let s = &segments[i];
        decode_payload(&s.words, s.decode_options(strictness))
            .map(|o| o.events)
            .map_err(|source| ContainerError::Payload { segment: i, source })
    };
    let first = loc.segment;
    let mut events = match loc.resume {
        Resume::Pointer(pos) => pos
            .decode_rest(&segments[first].words)
            .map_err(|source| ContainerError::Payload { segment: first, source })?
            .events,
        Resume::Scan => decode(first)?.into_iter().filter(|e| e.t_us >= t_us).collect(),
        Resume::Skip => Vec::new(),
    };
    for i in first + 1..segments.len() {
        events.extend(decode(i)?);
    }
    Ok(events)
}
