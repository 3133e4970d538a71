//! Event list to datum words.
//!
//! Baseline and mixed modes send one X word (or mixed pair) per event.
//! Vectorized modes first bin events in time, then for every row and
//! polarity partition the active columns into groups that are sent either
//! as a one-hot chain or as serial words.
//!
//! A TS MSB word is emitted whenever the upper 24 timestamp bits change,
//! and additionally at every resync interval boundary when
//! [`EncodeConfig::resync_us`] is set. Every TS MSB is followed by a fresh
//! EVENT Y, so decoding can restart at any TS MSB word.

use thiserror::Error;

use crate::costmodel::{should_vectorize, VectorCostParams};
use crate::event::{split_timestamp, EventRecord, MAX_TIMESTAMP_US};
use crate::header::DataModality;
use crate::wire::{encode_word, Datum, Polarity, WireError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("event {index} is out of (t, y, x) order")]
    UnsortedInput { index: usize },
    #[error("event {index} has no intensity but the mode requires one")]
    MissingIntensity { index: usize },
    #[error("event {index}: timestamp {t_us} exceeds 40 bits")]
    TimestampOverflow { index: usize, t_us: u64 },
    #[error(transparent)]
    FieldOverflow(#[from] WireError),
    #[error("data modality {0} has no event encoding")]
    UnsupportedModality(DataModality),
    #[error("invalid configuration: {0}")]
    BadConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VectorPolicy {
    AlwaysSerial,
    AlwaysVector,
    #[default]
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncodeConfig {
    pub modality: DataModality,
    /// Ignored outside the vectorized modes.
    pub vector_policy: VectorPolicy,
    /// Vectorization window. Windows never straddle a 256 µs boundary when
    /// `bin_us <= 256`, so timestamp bits 39..8 survive exactly.
    pub bin_us: u32,
    /// Forces a TS MSB word at each multiple of this many microseconds after
    /// the first event, giving the pointer index a restart point per interval.
    pub resync_us: Option<u32>,
    pub cost: VectorCostParams,
}

impl EncodeConfig {
    pub fn new(modality: DataModality) -> Self {
        EncodeConfig {
            modality,
            vector_policy: VectorPolicy::Adaptive,
            bin_us: 256,
            resync_us: None,
            cost: VectorCostParams::default(),
        }
    }

    pub fn with_policy(mut self, policy: VectorPolicy) -> Self {
        self.vector_policy = policy;
        self
    }

    pub fn with_bin_us(mut self, bin_us: u32) -> Self {
        self.bin_us = bin_us;
        self
    }

    pub fn with_resync(mut self, resync_us: u32) -> Self {
        self.resync_us = Some(resync_us);
        self
    }

    fn validate(&self) -> Result<(), EncodeError> {
        if !self.modality.is_event_mode() {
            return Err(EncodeError::UnsupportedModality(self.modality));
        }
        if self.modality.is_vectorized() && self.bin_us == 0 {
            return Err(EncodeError::BadConfig("bin_us must be at least 1"));
        }
        if self.resync_us == Some(0) {
            return Err(EncodeError::BadConfig("resync interval must be at least 1"));
        }
        if self.cost.msb_free_span != 8 || self.cost.nbits_offst != 24 {
            return Err(EncodeError::BadConfig("cost parameters must match the word layout"));
        }
        Ok(())
    }

    /// Start of the vectorization window containing `t_us`.
    pub fn bin_start(&self, t_us: u64) -> u64 {
        let bin = self.bin_us.max(1) as u64;
        if bin <= 256 {
            let tick = t_us & !0xFF;
            tick + ((t_us & 0xFF) / bin) * bin
        } else {
            t_us / bin * bin
        }
    }

    /// Timestamp a decoder will report for an event stamped `t_us`.
    pub fn decoded_timestamp(&self, t_us: u64) -> u64 {
        match self.modality {
            DataModality::Event => t_us,
            DataModality::Mixed => t_us & !0xFF,
            _ => self.bin_start(t_us) & !0xFF,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKind {
    Serial,
    Vector,
}

/// A run of columns from one row and polarity, sent one way or the other.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Group {
    pub kind: GroupKind,
    pub root: u16,
    pub columns: Vec<u16>,
}

impl Group {
    /// X words this group costs on the wire.
    pub fn x_words(&self, params: &VectorCostParams) -> usize {
        match self.kind {
            GroupKind::Serial => self.columns.len(),
            GroupKind::Vector => {
                let span = (*self.columns.last().unwrap() - self.root) as u32 + 1;
                params.vector_word_cost(span) as usize
            }
        }
    }
}

/// Splits strictly ascending columns into groups of span at most
/// `params.max_span()`, scanning left to right.
pub fn partition_row(columns: &[u16], policy: VectorPolicy, params: &VectorCostParams) -> Vec<Group> {
    let mut groups = Vec::new();
    let max_span = params.max_span();
    let mut i = 0;
    while i < columns.len() {
        let root = columns[i];
        let len = columns[i..]
            .iter()
            .take_while(|&&c| ((c - root) as u32) < max_span)
            .count();
        let cols = &columns[i..i + len];
        let vectorize = match policy {
            VectorPolicy::AlwaysSerial => false,
            VectorPolicy::AlwaysVector => true,
            VectorPolicy::Adaptive => {
                let xs: Vec<u32> = cols.iter().map(|&c| c as u32).collect();
                should_vectorize(&xs, params).unwrap_or(false)
            }
        };
        groups.push(Group {
            kind: if vectorize {
                GroupKind::Vector
            } else {
                GroupKind::Serial
            },
            root,
            columns: cols.to_vec(),
        });
        i += len;
    }
    groups
}

fn validate_events(events: &[EventRecord], cfg: &EncodeConfig) -> Result<(), EncodeError> {
    let needs_intensity = cfg.modality.carries_intensity();
    for (i, e) in events.iter().enumerate() {
        if e.t_us > MAX_TIMESTAMP_US {
            return Err(EncodeError::TimestampOverflow {
                index: i,
                t_us: e.t_us,
            });
        }
        if needs_intensity && e.intensity.is_none() {
            return Err(EncodeError::MissingIntensity { index: i });
        }
        if i > 0 {
            let p = &events[i - 1];
            if (p.t_us, p.y, p.x) > (e.t_us, e.y, e.x) {
                return Err(EncodeError::UnsortedInput { index: i });
            }
        }
    }
    Ok(())
}

struct Emitter<'a> {
    cfg: &'a EncodeConfig,
    t0: u64,
    words: Vec<u32>,
    last_msb: Option<u32>,
    last_row: Option<(u16, u8)>,
    interval: Option<u64>,
}

impl<'a> Emitter<'a> {
    fn new(cfg: &'a EncodeConfig, t0: u64, capacity: usize) -> Self {
        Emitter {
            cfg,
            t0,
            words: Vec::with_capacity(capacity),
            last_msb: None,
            last_row: None,
            interval: None,
        }
    }

    fn push(&mut self, d: Datum) -> Result<(), EncodeError> {
        self.words.push(encode_word(&d)?);
        Ok(())
    }

    /// Makes sure the timestamp and row words for (`stamp`, `y`) are in force.
    /// `stamp` is the timestamp the decoder will report.
    fn begin(&mut self, stamp: u64, y: u16) -> Result<(), EncodeError> {
        let (msb, lsb, _) = split_timestamp(stamp);
        let mut tick = self.last_msb != Some(msb);
        if let Some(inc) = self.cfg.resync_us {
            let iv = (stamp - self.t0) / inc as u64;
            tick |= self.interval.is_some_and(|prev| prev != iv);
            self.interval = Some(iv);
        }
        if tick {
            self.push(Datum::TsMsb { ts_msb: msb })?;
            self.last_msb = Some(msb);
            self.last_row = None;
        }
        if self.last_row != Some((y, lsb)) {
            self.push(Datum::EventY { y, ts_lsb: lsb })?;
            self.last_row = Some((y, lsb));
        }
        Ok(())
    }

    fn serial(&mut self, e: &EventRecord, ts_llsb: u8) -> Result<(), EncodeError> {
        if self.cfg.modality.carries_intensity() {
            let i = e.intensity.unwrap_or(0);
            self.push(Datum::MixedXMsb {
                polarity: e.polarity,
                x: e.x,
                intensity_msb: (i >> 24) as u8,
            })?;
            self.push(Datum::MixedXLsb {
                intensity_lsb24: i & 0x00FF_FFFF,
            })
        } else {
            self.push(Datum::EventX {
                polarity: e.polarity,
                x: e.x,
                ts_llsb,
            })
        }
    }

    fn vector(&mut self, root: u16, members: &[&EventRecord], polarity: Polarity) -> Result<(), EncodeError> {
        let last = members.last().map_or(root, |e| e.x);
        let span = (last - root) as u32 + 1;
        let n_lsb = self.cfg.cost.lsb_words_for_span(span) as usize;
        let mut onehot8 = 0u8;
        let mut lsb = vec![0u32; n_lsb];
        for e in members {
            let off = (e.x - root) as usize;
            if off < 8 {
                onehot8 |= 1 << off;
            } else {
                let k = (off - 8) / 24;
                lsb[k] |= 1 << ((off - 8) % 24);
            }
        }
        self.push(Datum::VecXMsb {
            polarity,
            root_x: root,
            onehot8,
        })?;
        for onehot24 in lsb {
            self.push(Datum::VecXLsb { onehot24 })?;
        }
        if self.cfg.modality == DataModality::MixedVectorized {
            for e in members {
                let i = e.intensity.unwrap_or(0);
                self.push(Datum::VecIntensityMsb {
                    intensity_msb24: i >> 8,
                })?;
                self.push(Datum::VecIntensityLsb {
                    intensity_lsb8: i as u8,
                })?;
            }
        }
        Ok(())
    }

    fn encode_serial_mode(&mut self, events: &[EventRecord]) -> Result<(), EncodeError> {
        for e in events {
            let stamp = self.cfg.decoded_timestamp(e.t_us);
            self.begin(stamp, e.y)?;
            self.serial(e, stamp as u8)?;
        }
        Ok(())
    }

    fn encode_bin(&mut self, stamp: u64, bin: &[EventRecord]) -> Result<(), EncodeError> {
        // (row, ON first, repeat layer, column); repeats of a pixel within a
        // bin go to later layers since one-hot bits cannot count.
        let mut keyed: Vec<(u16, u8, u32, u16, &EventRecord)> = Vec::with_capacity(bin.len());
        let mut sorted: Vec<&EventRecord> = bin.iter().collect();
        sorted.sort_by_key(|e| (e.y, !e.polarity.is_on(), e.x));
        let mut layer = 0u32;
        for (i, e) in sorted.iter().enumerate() {
            if i > 0 {
                let p = sorted[i - 1];
                layer = if (p.y, p.polarity, p.x) == (e.y, e.polarity, e.x) {
                    layer + 1
                } else {
                    0
                };
            }
            keyed.push((e.y, !e.polarity.is_on() as u8, layer, e.x, e));
        }
        keyed.sort_by_key(|k| (k.0, k.1, k.2, k.3));

        let mut start = 0;
        while start < keyed.len() {
            let (y, prank, layer, _, first) = keyed[start];
            let end = start
                + keyed[start..]
                    .iter()
                    .take_while(|k| (k.0, k.1, k.2) == (y, prank, layer))
                    .count();
            let members: Vec<&EventRecord> = keyed[start..end].iter().map(|k| k.4).collect();
            let columns: Vec<u16> = members.iter().map(|e| e.x).collect();
            self.begin(stamp, y)?;
            let polarity = first.polarity;
            let mut offset = 0;
            for g in partition_row(&columns, self.cfg.vector_policy, &self.cfg.cost) {
                let group = &members[offset..offset + g.columns.len()];
                offset += g.columns.len();
                match g.kind {
                    GroupKind::Serial => {
                        for e in group {
                            self.serial(e, 0)?;
                        }
                    }
                    GroupKind::Vector => self.vector(g.root, group, polarity)?,
                }
            }
            start = end;
        }
        Ok(())
    }

    fn encode_vector_mode(&mut self, events: &[EventRecord]) -> Result<(), EncodeError> {
        let mut start = 0;
        while start < events.len() {
            let bin = self.cfg.bin_start(events[start].t_us);
            let len = events[start..]
                .iter()
                .take_while(|e| self.cfg.bin_start(e.t_us) == bin)
                .count();
            self.encode_bin(bin & !0xFF, &events[start..start + len])?;
            start += len;
        }
        Ok(())
    }
}

fn encode_chunk(events: &[EventRecord], cfg: &EncodeConfig, t0: u64) -> Result<Vec<u32>, EncodeError> {
    let mut em = Emitter::new(cfg, t0, events.len() + events.len() / 4 + 4);
    if cfg.modality.is_vectorized() {
        let mut owned;
        let events = if cfg.modality.carries_intensity() {
            events
        } else {
            owned = events.to_vec();
            owned.iter_mut().for_each(|e| e.intensity = None);
            &owned[..]
        };
        em.encode_vector_mode(events)?;
    } else {
        em.encode_serial_mode(events)?;
    }
    Ok(em.words)
}

fn first_decoded(events: &[EventRecord], cfg: &EncodeConfig) -> u64 {
    events.first().map_or(0, |e| cfg.decoded_timestamp(e.t_us))
}

/// Encodes on the calling thread.
pub fn encode_payload_sequential(events: &[EventRecord], cfg: &EncodeConfig) -> Result<Vec<u32>, EncodeError> {
    cfg.validate()?;
    validate_events(events, cfg)?;
    encode_chunk(events, cfg, first_decoded(events, cfg))
}

/// Event indices where a sequential encode necessarily emits a fresh TS MSB
/// and resets row state, so each chunk can be encoded independently.
pub fn chunk_boundaries(events: &[EventRecord], cfg: &EncodeConfig, min_chunk: usize) -> Vec<usize> {
    let t0 = first_decoded(events, cfg);
    let key = |e: &EventRecord| {
        let d = cfg.decoded_timestamp(e.t_us);
        let iv = cfg.resync_us.map_or(0, |inc| (d - t0) / inc as u64);
        (d >> 16, iv)
    };
    let mut cuts = vec![0];
    let mut last_cut = 0;
    for i in 1..events.len() {
        if i - last_cut >= min_chunk && key(&events[i - 1]) != key(&events[i]) {
            cuts.push(i);
            last_cut = i;
        }
    }
    cuts.push(events.len());
    cuts
}

#[cfg(feature = "parallel")]
pub fn encode_payload_parallel(events: &[EventRecord], cfg: &EncodeConfig) -> Result<Vec<u32>, EncodeError> {
    use rayon::prelude::*;

    cfg.validate()?;
    validate_events(events, cfg)?;
    let t0 = first_decoded(events, cfg);
    let cuts = chunk_boundaries(events, cfg, PARALLEL_MIN_CHUNK);
    let parts = cuts
        .par_windows(2)
        .map(|w| encode_chunk(&events[w[0]..w[1]], cfg, t0))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(parts.concat())
}

#[cfg(feature = "parallel")]
const PARALLEL_MIN_CHUNK: usize = 16 * 1024;

/// Encodes a time-sorted event list into datum words.
///
/// Intensities are ignored in modes that do not carry them.
pub fn encode_payload(events: &[EventRecord], cfg: &EncodeConfig) -> Result<Vec<u32>, EncodeError> {
    #[cfg(feature = "parallel")]
    if events.len() >= 4 * PARALLEL_MIN_CHUNK {
        return encode_payload_parallel(events, cfg);
    }
    encode_payload_sequential(events, cfg)
}
