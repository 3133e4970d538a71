//! Word-level accounting for recordings.

use std::collections::BTreeMap;

use crate::container::{ContainerError, Segment};
use crate::decoder::decode_payload;
use crate::encoder::{encode_payload, EncodeConfig};
use crate::header::DataModality;
use crate::par;
use crate::wire::{decode_word, DatumCode, Strictness};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stats {
    /// Word count per datum code.
    pub histogram: BTreeMap<DatumCode, u64>,
    /// Words whose code byte is not a datum code.
    pub unknown_words: u64,
    pub total_words: u64,
    pub events: u64,
    /// Words that carry column addresses.
    pub x_words: u64,
    /// X words (one per event) and total words after re-encoding the same
    /// events in baseline mode.
    pub baseline_x_words: u64,
    pub baseline_words: u64,
}

impl Stats {
    pub fn bits_per_event(&self) -> f64 {
        if self.events == 0 {
            return 0.0;
        }
        32.0 * self.total_words as f64 / self.events as f64
    }

    /// Baseline X words per X word actually sent.
    pub fn x_word_ratio(&self) -> f64 {
        if self.x_words == 0 {
            return 1.0;
        }
        self.baseline_x_words as f64 / self.x_words as f64
    }

    pub fn word_ratio(&self) -> f64 {
        if self.total_words == 0 {
            return 1.0;
        }
        self.baseline_words as f64 / self.total_words as f64
    }

    fn merge(mut self, other: Stats) -> Stats {
        for (code, n) in other.histogram {
            *self.histogram.entry(code).or_default() += n;
        }
        self.unknown_words += other.unknown_words;
        self.total_words += other.total_words;
        self.events += other.events;
        self.x_words += other.x_words;
        self.baseline_x_words += other.baseline_x_words;
        self.baseline_words += other.baseline_words;
        self
    }
}

fn segment_stats(seg: &Segment, strictness: Strictness) -> Result<Stats, ContainerError> {
    let mut s = Stats {
        total_words: seg.words.len() as u64,
        ..Stats::default()
    };
    for &w in &seg.words {
        match DatumCode::new((w >> 24) as u8) {
            Ok(code) => {
                *s.histogram.entry(code).or_default() += 1;
                if decode_word(w, Strictness::Lenient).is_ok_and(|d| d.is_x_word()) {
                    s.x_words += 1;
                }
            }
            Err(_) => s.unknown_words += 1,
        }
    }
    if seg.words.is_empty() {
        return Ok(s);
    }
    let out = decode_payload(&seg.words, seg.decode_options(strictness))
        .map_err(|source| ContainerError::Payload { segment: 0, source })?;
    let mut events = out.events;
    events.sort_unstable();
    s.events = events.len() as u64;
    let baseline = encode_payload(&events, &EncodeConfig::new(DataModality::Event))?;
    s.baseline_words = baseline.len() as u64;
    s.baseline_x_words = s.events;
    Ok(s)
}

/// Aggregate statistics over every segment.
pub fn recording_stats(segments: &[Segment], strictness: Strictness) -> Result<Stats, ContainerError> {
    par::map_slice(segments, |s| segment_stats(s, strictness))
        .into_iter()
        .enumerate()
        .try_fold(Stats::default(), |acc, (i, r)| match r {
            Ok(s) => Ok(acc.merge(s)),
            Err(ContainerError::Payload { source, .. }) => Err(ContainerError::Payload { segment: i, source }),
            Err(e) => Err(e),
        })
}
