//! Streaming payload decoder.
//!
//! A [`Decoder`] consumes datum words one at a time and emits
//! [`EventRecord`]s as soon as each event is complete. Timestamps are
//! assembled from the most recent TS MSB word (bits 39..16), the current
//! EVENT Y word (bits 15..8) and, for serial EVENT X words, the trailing
//! byte (bits 7..0). Mixed and vectorized events carry zero low bits.
//!
//! In strict mode the first fault aborts decoding. In lenient mode each
//! fault becomes a [`Diagnostic`] and the decoder skips forward to the next
//! TS MSB or EVENT Y word, both of which reset enough state to decode
//! independently.

use std::collections::VecDeque;
use std::fmt;

use crate::event::{assemble_timestamp, EventRecord};
use crate::header::DataModality;
use crate::wire::{decode_word, Datum, DatumCode, Polarity, Strictness, WireError};

/// Machine-readable fault names, printed as `code=<name>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DiagnosticCode {
    MissingTimestamp,
    MissingRow,
    OrphanVectorLsb,
    OrphanIntensity,
    DanglingMixedMsb,
    IntensityUnderrun,
    ModalityViolation,
    UnknownDatumCode,
    NonzeroPadding,
    AddressOutOfRange,
    ColumnOverflow,
    UnsupportedModality,
    BadHeaderId,
    Truncated,
    ReservedNonzero,
    NonAsciiModel,
    BadHeader,
    TrailingGarbage,
    CountMismatch,
}

impl DiagnosticCode {
    pub fn name(self) -> &'static str {
        match self {
            DiagnosticCode::MissingTimestamp => "MissingTimestamp",
            DiagnosticCode::MissingRow => "MissingRow",
            DiagnosticCode::OrphanVectorLsb => "OrphanVectorLsb",
            DiagnosticCode::OrphanIntensity => "OrphanIntensity",
            DiagnosticCode::DanglingMixedMsb => "DanglingMixedMsb",
            DiagnosticCode::IntensityUnderrun => "IntensityUnderrun",
            DiagnosticCode::ModalityViolation => "ModalityViolation",
            DiagnosticCode::UnknownDatumCode => "UnknownDatumCode",
            DiagnosticCode::NonzeroPadding => "NonzeroPadding",
            DiagnosticCode::AddressOutOfRange => "AddressOutOfRange",
            DiagnosticCode::ColumnOverflow => "ColumnOverflow",
            DiagnosticCode::UnsupportedModality => "UnsupportedModality",
            DiagnosticCode::BadHeaderId => "BadHeaderId",
            DiagnosticCode::Truncated => "Truncated",
            DiagnosticCode::ReservedNonzero => "ReservedNonzero",
            DiagnosticCode::NonAsciiModel => "NonAsciiModel",
            DiagnosticCode::BadHeader => "BadHeader",
            DiagnosticCode::TrailingGarbage => "TrailingGarbage",
            DiagnosticCode::CountMismatch => "CountMismatch",
        }
    }
}

impl fmt::Display for DiagnosticCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A decode fault. Strict decoding returns it as the error; lenient
/// decoding collects it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    /// Byte offset of the offending word.
    pub offset: usize,
    pub code: DiagnosticCode,
    pub detail: String,
}

impl Diagnostic {
    pub fn new(offset: usize, code: DiagnosticCode, detail: impl Into<String>) -> Self {
        Diagnostic {
            offset,
            code,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "offset={} code={} detail={}",
            self.offset, self.code, self.detail
        )
    }
}

impl std::error::Error for Diagnostic {}

pub type DecodeError = Diagnostic;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeOptions {
    pub modality: DataModality,
    pub strictness: Strictness,
    /// (rows, cols) bound checked in strict mode.
    pub dims: Option<(u16, u16)>,
}

impl DecodeOptions {
    pub fn new(modality: DataModality, strictness: Strictness) -> Self {
        DecodeOptions {
            modality,
            strictness,
            dims: None,
        }
    }

    pub fn with_dims(mut self, rows: u16, cols: u16) -> Self {
        self.dims = Some((rows, cols));
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DecodeOutput {
    pub events: Vec<EventRecord>,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct VectorContext {
    root_x: u16,
    polarity: Polarity,
    lsb_word_count: u32,
    /// Set once intensities start; the chain can no longer be extended.
    closed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct PendingMixed {
    x: u16,
    polarity: Polarity,
    intensity_msb8: u8,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DecoderState {
    ts_msb: Option<u32>,
    current_y: Option<u16>,
    ts_lsb: u8,
    vector: Option<VectorContext>,
    pending_mixed: Option<PendingMixed>,
    pending_columns: VecDeque<(u16, Polarity)>,
    pending_intensity_msb: Option<u32>,
}

impl DecoderState {
    fn clear_transient(&mut self) {
        self.vector = None;
        self.pending_mixed = None;
        self.pending_columns.clear();
        self.pending_intensity_msb = None;
    }

    /// Fault for state that must be resolved before a new row or tick.
    fn unresolved(&self) -> Option<Fault> {
        if let Some(m) = self.pending_mixed {
            Some(Fault::new(
                DiagnosticCode::DanglingMixedMsb,
                format!("mixed x={} has no MIXED_X_LSB", m.x),
            ))
        } else if !self.pending_columns.is_empty() {
            Some(Fault::new(
                DiagnosticCode::IntensityUnderrun,
                format!(
                    "{} vector columns still await intensity",
                    self.pending_columns.len()
                ),
            ))
        } else if self.pending_intensity_msb.is_some() {
            Some(Fault::new(
                DiagnosticCode::OrphanIntensity,
                "VEC_INTENSITY_MSB without VEC_INTENSITY_LSB",
            ))
        } else {
            None
        }
    }
}

struct Fault {
    code: DiagnosticCode,
    detail: String,
}

impl Fault {
    fn new(code: DiagnosticCode, detail: impl Into<String>) -> Self {
        Fault {
            code,
            detail: detail.into(),
        }
    }
}

fn legal_in(modality: DataModality, code: DatumCode) -> bool {
    use DataModality as M;
    match code {
        DatumCode::TS_MSB | DatumCode::EVENT_Y => true,
        DatumCode::EVENT_X_ON | DatumCode::EVENT_X_OFF => {
            matches!(modality, M::Event | M::Vectorized)
        }
        DatumCode::MIXED_X_ON_MSB | DatumCode::MIXED_X_OFF_MSB | DatumCode::MIXED_X_LSB => {
            matches!(modality, M::Mixed | M::MixedVectorized)
        }
        DatumCode::VEC_X_ON_MSB | DatumCode::VEC_X_OFF_MSB | DatumCode::VEC_X_LSB => {
            modality.is_vectorized()
        }
        DatumCode::VEC_INTENSITY_MSB | DatumCode::VEC_INTENSITY_LSB => {
            modality == M::MixedVectorized
        }
        _ => false,
    }
}

/// Columns asserted in a one-hot field of `width` bits starting at `base`.
fn onehot_columns(base: u32, bits: u32, width: u32) -> impl Iterator<Item = u32> {
    (0..width)
        .filter(move |i| bits >> i & 1 == 1)
        .map(move |i| base + i)
}

/// Expands a vector chain into ascending column addresses.
///
/// Bit `i` of `onehot8` is column `root_x + i`; bit `j` of the `k`-th
/// chained word is column `root_x + 8 + 24k + j`.
pub fn expand_vector(root_x: u16, onehot8: u8, lsb_words: &[u32]) -> Result<Vec<u16>, DecodeError> {
    let root = root_x as u32;
    let columns = onehot_columns(root, onehot8 as u32, 8).chain(
        lsb_words
            .iter()
            .enumerate()
            .flat_map(move |(k, &w)| onehot_columns(root + 8 + 24 * k as u32, w & 0x00FF_FFFF, 24)),
    );
    columns
        .map(|c| {
            u16::try_from(c).map_err(|_| {
                Diagnostic::new(0, DiagnosticCode::ColumnOverflow, format!("column {c} exceeds 16 bits"))
            })
        })
        .collect()
}

pub struct Decoder {
    opts: DecodeOptions,
    state: DecoderState,
    base_offset: usize,
    words_consumed: usize,
    skipping: bool,
    not_before_us: u64,
    diagnostics: Vec<Diagnostic>,
}

impl Decoder {
    pub fn new(opts: DecodeOptions) -> Result<Self, DecodeError> {
        Self::starting_at(opts, 0)
    }

    /// A decoder whose first word sits at payload byte `base_offset`.
    pub fn starting_at(opts: DecodeOptions, base_offset: usize) -> Result<Self, DecodeError> {
        if !opts.modality.is_event_mode() {
            return Err(Diagnostic::new(
                base_offset,
                DiagnosticCode::UnsupportedModality,
                format!("data modality {} carries no event payload", opts.modality),
            ));
        }
        Ok(Decoder {
            opts,
            state: DecoderState::default(),
            base_offset,
            words_consumed: 0,
            skipping: false,
            not_before_us: 0,
            diagnostics: Vec::new(),
        })
    }

    /// Drops events stamped before `t_us`.
    pub fn not_before(mut self, t_us: u64) -> Self {
        self.not_before_us = t_us;
        self
    }

    pub fn options(&self) -> &DecodeOptions {
        &self.opts
    }

    pub fn state(&self) -> &DecoderState {
        &self.state
    }

    pub fn words_consumed(&self) -> usize {
        self.words_consumed
    }

    pub fn diagnostics(&self) -> &[Diagnostic] {
        &self.diagnostics
    }

    pub fn take_diagnostics(&mut self) -> Vec<Diagnostic> {
        std::mem::take(&mut self.diagnostics)
    }

    fn next_offset(&self) -> usize {
        self.base_offset + 4 * self.words_consumed
    }

    /// Consumes one word, appending any completed events to `out`.
    pub fn feed(&mut self, word: u32, out: &mut Vec<EventRecord>) -> Result<(), DecodeError> {
        let offset = self.next_offset();
        self.words_consumed += 1;
        let datum = match decode_word(word, self.opts.strictness) {
            Ok(d) => d,
            Err(e) => {
                let code = match e {
                    WireError::NonzeroPadding(_) => DiagnosticCode::NonzeroPadding,
                    _ => DiagnosticCode::UnknownDatumCode,
                };
                return self.fault(offset, Fault::new(code, e.to_string()), false);
            }
        };
        let resync = matches!(datum, Datum::TsMsb { .. } | Datum::EventY { .. });
        if self.skipping {
            if !resync {
                return Ok(());
            }
            self.skipping = false;
        }
        match self.process(datum, out) {
            Ok(()) => Ok(()),
            Err(f) => self.fault(offset, f, resync),
        }
    }

    /// Checks end-of-segment state. The decoder may be reused afterwards.
    pub fn finish(&mut self) -> Result<(), DecodeError> {
        let fault = self.state.unresolved();
        self.state.clear_transient();
        match fault {
            Some(f) => {
                let offset = self.next_offset();
                self.fault(offset, f, true)
            }
            None => Ok(()),
        }
    }

    fn fault(&mut self, offset: usize, f: Fault, applied: bool) -> Result<(), DecodeError> {
        let diag = Diagnostic::new(offset, f.code, f.detail);
        match self.opts.strictness {
            Strictness::Strict => Err(diag),
            Strictness::Lenient => {
                self.diagnostics.push(diag);
                if !applied {
                    self.state.clear_transient();
                    self.skipping = true;
                }
                Ok(())
            }
        }
    }

    fn emit(&self, out: &mut Vec<EventRecord>, ev: EventRecord) -> Result<(), Fault> {
        if self.opts.strictness == Strictness::Strict {
            if let Some((rows, cols)) = self.opts.dims {
                if ev.x >= cols || ev.y >= rows {
                    return Err(Fault::new(
                        DiagnosticCode::AddressOutOfRange,
                        format!("({}, {}) outside {}x{} array", ev.x, ev.y, cols, rows),
                    ));
                }
            }
        }
        if ev.t_us >= self.not_before_us {
            out.push(ev);
        }
        Ok(())
    }

    fn require_row(&self) -> Result<(u32, u16), Fault> {
        let msb = self.state.ts_msb.ok_or_else(|| {
            Fault::new(DiagnosticCode::MissingTimestamp, "event word before any TS_MSB")
        })?;
        let y = self.state.current_y.ok_or_else(|| {
            Fault::new(DiagnosticCode::MissingRow, "x word before any EVENT_Y")
        })?;
        Ok((msb, y))
    }

    fn expand_into(
        &mut self,
        base: u32,
        bits: u32,
        width: u32,
        polarity: Polarity,
        out: &mut Vec<EventRecord>,
    ) -> Result<(), Fault> {
        let (msb, y) = self.require_row()?;
        let t_us = assemble_timestamp(msb, self.state.ts_lsb, 0);
        for c in onehot_columns(base, bits, width) {
            let x = u16::try_from(c).map_err(|_| {
                Fault::new(DiagnosticCode::ColumnOverflow, format!("column {c} exceeds 16 bits"))
            })?;
            if self.opts.modality == DataModality::MixedVectorized {
                self.state.pending_columns.push_back((x, polarity));
            } else {
                self.emit(out, EventRecord::new(t_us, x, y, polarity))?;
            }
        }
        Ok(())
    }

    fn process(&mut self, datum: Datum, out: &mut Vec<EventRecord>) -> Result<(), Fault> {
        match datum {
            Datum::TsMsb { ts_msb } => {
                let fault = self.state.unresolved();
                self.state.clear_transient();
                self.state.current_y = None;
                self.state.ts_msb = Some(ts_msb);
                return fault.map_or(Ok(()), Err);
            }
            Datum::EventY { y, ts_lsb } => {
                let fault = self.state.unresolved();
                self.state.clear_transient();
                if self.state.ts_msb.is_none() {
                    self.state.current_y = None;
                    return Err(fault.unwrap_or_else(|| {
                        Fault::new(DiagnosticCode::MissingTimestamp, "EVENT_Y before any TS_MSB")
                    }));
                }
                self.state.current_y = Some(y);
                self.state.ts_lsb = ts_lsb;
                return fault.map_or(Ok(()), Err);
            }
            _ => {}
        }

        let code = datum.code();
        if let Some(m) = self.state.pending_mixed {
            if !matches!(datum, Datum::MixedXLsb { .. }) {
                return Err(Fault::new(
                    DiagnosticCode::DanglingMixedMsb,
                    format!("mixed x={} followed by {}", m.x, code),
                ));
            }
        }
        if !legal_in(self.opts.modality, code) {
            return Err(Fault::new(
                DiagnosticCode::ModalityViolation,
                format!("{} not allowed in modality {}", code, self.opts.modality),
            ));
        }
        let awaiting_intensity =
            !self.state.pending_columns.is_empty() || self.state.pending_intensity_msb.is_some();
        let chain_open = self.state.vector.is_some_and(|v| !v.closed);
        let continues_chain = match datum {
            Datum::VecIntensityMsb { .. } | Datum::VecIntensityLsb { .. } => true,
            Datum::VecXLsb { .. } => chain_open,
            _ => false,
        };
        if awaiting_intensity && !continues_chain {
            return Err(self.state.unresolved().expect("pending intensity state"));
        }

        match datum {
            Datum::EventX {
                polarity,
                x,
                ts_llsb,
            } => {
                let (msb, y) = self.require_row()?;
                self.state.vector = None;
                let t = assemble_timestamp(msb, self.state.ts_lsb, ts_llsb);
                self.emit(out, EventRecord::new(t, x, y, polarity))
            }
            Datum::MixedXMsb {
                polarity,
                x,
                intensity_msb,
            } => {
                self.require_row()?;
                self.state.vector = None;
                self.state.pending_mixed = Some(PendingMixed {
                    x,
                    polarity,
                    intensity_msb8: intensity_msb,
                });
                Ok(())
            }
            Datum::MixedXLsb { intensity_lsb24 } => {
                let m = self.state.pending_mixed.take().ok_or_else(|| {
                    Fault::new(DiagnosticCode::OrphanIntensity, "MIXED_X_LSB without MIXED_X_MSB")
                })?;
                let (msb, y) = self.require_row()?;
                let t = assemble_timestamp(msb, self.state.ts_lsb, 0);
                let intensity = ((m.intensity_msb8 as u32) << 24) | intensity_lsb24;
                self.emit(
                    out,
                    EventRecord::new(t, m.x, y, m.polarity).with_intensity(intensity),
                )
            }
            Datum::VecXMsb {
                polarity,
                root_x,
                onehot8,
            } => {
                self.require_row()?;
                self.state.vector = Some(VectorContext {
                    root_x,
                    polarity,
                    lsb_word_count: 0,
                    closed: false,
                });
                self.expand_into(root_x as u32, onehot8 as u32, 8, polarity, out)
            }
            Datum::VecXLsb { onehot24 } => {
                let v = match self.state.vector {
                    Some(v) if !v.closed => v,
                    _ => {
                        return Err(Fault::new(
                            DiagnosticCode::OrphanVectorLsb,
                            "VEC_X_LSB without an open vector",
                        ))
                    }
                };
                let base = v.root_x as u32 + 8 + 24 * v.lsb_word_count;
                if let Some(ctx) = self.state.vector.as_mut() {
                    ctx.lsb_word_count += 1;
                }
                self.expand_into(base, onehot24, 24, v.polarity, out)
            }
            Datum::VecIntensityMsb { intensity_msb24 } => {
                if self.state.pending_columns.is_empty() || self.state.pending_intensity_msb.is_some() {
                    return Err(Fault::new(
                        DiagnosticCode::OrphanIntensity,
                        "VEC_INTENSITY_MSB with no column awaiting intensity",
                    ));
                }
                if let Some(ctx) = self.state.vector.as_mut() {
                    ctx.closed = true;
                }
                self.state.pending_intensity_msb = Some(intensity_msb24);
                Ok(())
            }
            Datum::VecIntensityLsb { intensity_lsb8 } => {
                let hi = self.state.pending_intensity_msb.take().ok_or_else(|| {
                    Fault::new(
                        DiagnosticCode::OrphanIntensity,
                        "VEC_INTENSITY_LSB without VEC_INTENSITY_MSB",
                    )
                })?;
                let (x, polarity) = self.state.pending_columns.pop_front().ok_or_else(|| {
                    Fault::new(DiagnosticCode::OrphanIntensity, "no column awaiting intensity")
                })?;
                let (msb, y) = self.require_row()?;
                let t = assemble_timestamp(msb, self.state.ts_lsb, 0);
                let intensity = (hi << 8) | intensity_lsb8 as u32;
                self.emit(out, EventRecord::new(t, x, y, polarity).with_intensity(intensity))
            }
            Datum::TsMsb { .. } | Datum::EventY { .. } => unreachable!(),
        }
    }
}

/// Decodes a complete segment payload.
pub fn decode_payload(words: &[u32], opts: DecodeOptions) -> Result<DecodeOutput, DecodeError> {
    let mut dec = Decoder::new(opts)?;
    let mut events = Vec::with_capacity(words.len());
    for &w in words {
        dec.feed(w, &mut events)?;
    }
    dec.finish()?;
    Ok(DecodeOutput {
        events,
        diagnostics: dec.take_diagnostics(),
    })
}
