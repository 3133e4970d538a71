//! Cross-checks the streaming decoder against a deliberately naive
//! reference written straight from the word layout.

use std::collections::VecDeque;

use evtplus::decoder::{decode_payload, DecodeOptions};
use evtplus::encoder::{encode_payload, EncodeConfig, VectorPolicy};
use evtplus::event::EventRecord;
use evtplus::header::DataModality;
use evtplus::wire::{Polarity, Strictness};
use proptest::prelude::*;

fn legal(mode: u8, code: u32) -> bool {
    match code {
        1 | 2 => true,
        6 | 7 => mode == 4 || mode == 6,
        3..=5 => mode == 5 || mode == 7,
        8..=10 => mode >= 6,
        11 | 12 => mode == 7,
        _ => false,
    }
}

fn pol(on: bool) -> Polarity {
    if on {
        Polarity::On
    } else {
        Polarity::Off
    }
}

/// Strict reference decode: `None` for any fault.
fn oracle(words: &[u32], mode: u8) -> Option<Vec<EventRecord>> {
    let mut out = Vec::new();
    let mut msb: Option<u64> = None;
    let mut row: Option<(u16, u64)> = None;
    // (root, polarity, lsb words so far, closed)
    let mut vec: Option<(u32, bool, u32, bool)> = None;
    let mut mixed: Option<(u16, bool, u32)> = None;
    let mut cols: VecDeque<(u16, bool)> = VecDeque::new();
    let mut hi: Option<u32> = None;

    for &w in words {
        let code = w >> 24;
        let data = w & 0xFF_FFFF;
        if !(1..=12).contains(&code) || (code == 12 && data & 0xFFFF != 0) {
            return None;
        }
        let pending = mixed.is_some() || !cols.is_empty() || hi.is_some();
        match code {
            1 => {
                if pending {
                    return None;
                }
                vec = None;
                row = None;
                msb = Some(data as u64);
                continue;
            }
            2 => {
                if pending || msb.is_none() {
                    return None;
                }
                vec = None;
                row = Some(((data >> 8) as u16, (data & 0xFF) as u64));
                continue;
            }
            _ => {}
        }
        if mixed.is_some() && code != 5 {
            return None;
        }
        if !legal(mode, code) {
            return None;
        }
        let open = matches!(vec, Some((_, _, _, false)));
        let continues = code == 11 || code == 12 || (code == 10 && open);
        if (!cols.is_empty() || hi.is_some()) && !continues {
            return None;
        }
        let (y, stamp) = match (msb, row) {
            (Some(m), Some((y, lsb))) => (y, (m << 16) | (lsb << 8)),
            _ => return None,
        };
        let mut expand = |base: u32, bits: u32, width: u32, on: bool, out: &mut Vec<EventRecord>| {
            for i in 0..width {
                if bits >> i & 1 == 1 {
                    let x = u16::try_from(base + i).ok()?;
                    if mode == 7 {
                        cols.push_back((x, on));
                    } else {
                        out.push(EventRecord::new(stamp, x, y, pol(on)));
                    }
                }
            }
            Some(())
        };
        match code {
            6 | 7 => {
                vec = None;
                out.push(EventRecord::new(stamp | (data & 0xFF) as u64, (data >> 8) as u16, y, pol(code == 6)));
            }
            3 | 4 => {
                vec = None;
                mixed = Some(((data >> 8) as u16, code == 3, data & 0xFF));
            }
            5 => {
                let (x, on, h) = mixed.take()?;
                out.push(EventRecord::new(stamp, x, y, pol(on)).with_intensity(h << 24 | data));
            }
            8 | 9 => {
                let root = data >> 8;
                vec = Some((root, code == 8, 0, false));
                expand(root, data & 0xFF, 8, code == 8, &mut out)?;
            }
            10 => {
                let (root, on, n, closed) = vec?;
                if closed {
                    return None;
                }
                vec = Some((root, on, n + 1, false));
                expand(root + 8 + 24 * n, data, 24, on, &mut out)?;
            }
            11 => {
                if cols.is_empty() || hi.is_some() {
                    return None;
                }
                if let Some(v) = vec.as_mut() {
                    v.3 = true;
                }
                hi = Some(data);
            }
            12 => {
                let h = hi.take()?;
                let (x, on) = cols.pop_front()?;
                out.push(EventRecord::new(stamp, x, y, pol(on)).with_intensity(h << 8 | data >> 16));
            }
            _ => unreachable!(),
        }
    }
    if mixed.is_some() || !cols.is_empty() || hi.is_some() {
        return None;
    }
    Some(out)
}

fn modality(mode: u8) -> DataModality {
    DataModality::from_bits(mode).unwrap()
}

fn library(words: &[u32], mode: u8) -> Option<Vec<EventRecord>> {
    decode_payload(words, DecodeOptions::new(modality(mode), Strictness::Strict))
        .ok()
        .map(|o| o.events)
}

/// Builds a stream that is well-formed for `mode` by construction.
fn grammar_stream(mode: u8, picks: &[(u8, u32, u16)]) -> Vec<u32> {
    let mut words = vec![0x0100_0012, 0x0200_0000];
    for &(kind, payload, x) in picks {
        let x = x as u32;
        match kind % 6 {
            0 => {
                words.push(0x0100_0000 | (payload & 0xFF_FFFF));
                if payload >> 31 == 0 {
                    words.push(0x0200_0000 | (x << 8));
                }
            }
            1 => words.push(0x0200_0000 | (payload & 0xFF_FFFF)),
            _ if mode == 4 => words.push((6 + (payload & 1)) << 24 | x << 8 | (payload >> 8 & 0xFF)),
            k if mode == 5 || (mode == 7 && k < 4) => {
                words.push((3 + (payload & 1)) << 24 | x << 8 | (payload >> 8 & 0xFF));
                words.push(5 << 24 | (payload.rotate_left(7) & 0xFF_FFFF));
            }
            2 | 3 => words.push((6 + (payload & 1)) << 24 | x << 8),
            _ => {
                let onehot8 = payload & 0xFF;
                let lsbs = (payload >> 8) % 3;
                words.push((8 + (payload >> 10 & 1)) << 24 | x << 8 | onehot8);
                let mut n = onehot8.count_ones();
                for k in 0..lsbs {
                    let bits = payload.rotate_left(5 + 9 * k) & 0xFF_FFFF;
                    n += bits.count_ones();
                    words.push(10 << 24 | bits);
                }
                if mode == 7 {
                    for i in 0..n {
                        words.push(11 << 24 | (payload ^ i) & 0xFF_FFFF);
                        words.push(12 << 24 | (i & 0xFF) << 16);
                    }
                }
            }
        }
        if kind >= 200 {
            // start the next row without a fresh timestamp
            words.push(0x0200_0000 | (x << 8));
        }
    }
    words
}

fn arb_events(max: usize) -> impl Strategy<Value = Vec<EventRecord>> {
    prop::collection::vec((0u64..3_000_000, 0u16..300, 0u16..40, any::<bool>(), any::<u32>()), 0..max).prop_map(
        |raw| {
            let mut v: Vec<_> = raw
                .into_iter()
                .map(|(t, x, y, on, i)| EventRecord::new(t, x, y, pol(on)).with_intensity(i))
                .collect();
            v.sort();
            v
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn agrees_on_encoder_output(events in arb_events(300), mode in 4u8..8, policy in 0u8..3) {
        let policy = [VectorPolicy::AlwaysSerial, VectorPolicy::AlwaysVector, VectorPolicy::Adaptive][policy as usize];
        let cfg = EncodeConfig::new(modality(mode)).with_policy(policy);
        let words = encode_payload(&events, &cfg).unwrap();
        let want = oracle(&words, mode);
        prop_assert!(want.is_some());
        prop_assert_eq!(library(&words, mode), want);
    }

    #[test]
    fn agrees_on_grammar_streams(
        mode in 4u8..8,
        picks in prop::collection::vec((any::<u8>(), any::<u32>(), any::<u16>()), 0..40),
    ) {
        let words = grammar_stream(mode, &picks);
        prop_assert_eq!(library(&words, mode), oracle(&words, mode));
    }

    #[test]
    fn agrees_on_mutated_streams(
        mode in 4u8..8,
        picks in prop::collection::vec((any::<u8>(), any::<u32>(), any::<u16>()), 1..40),
        edits in prop::collection::vec((any::<prop::sample::Index>(), any::<u32>(), 0u8..4), 1..4),
    ) {
        let mut words = grammar_stream(mode, &picks);
        for (at, v, how) in edits {
            let i = at.index(words.len());
            match how {
                0 => words[i] ^= 1 << (v % 32),
                1 => words[i] = (words[i] & 0xFF_FFFF) | ((v % 14) << 24),
                2 => { words.remove(i); if words.is_empty() { words.push(v); } }
                _ => words.insert(i, v),
            }
        }
        prop_assert_eq!(library(&words, mode), oracle(&words, mode));
        // lenient decode never fails and never panics
        let lenient = decode_payload(&words, DecodeOptions::new(modality(mode), Strictness::Lenient));
        prop_assert!(lenient.is_ok());
    }

    #[test]
    fn agrees_on_random_words(mode in 4u8..8, words in prop::collection::vec(any::<u32>(), 0..64)) {
        // fold codes into the valid range most of the time
        let words: Vec<u32> = words.into_iter().map(|w| if w & 0xF == 0 { w } else { (w & 0xFF_FFFF) | (((w >> 24) % 12 + 1) << 24) }).collect();
        prop_assert_eq!(library(&words, mode), oracle(&words, mode));
    }
}

#[test]
fn oracle_rejects_what_it_should() {
    assert_eq!(oracle(&[], 4), Some(vec![]));
    assert_eq!(oracle(&[0x0600_0000], 4), None);
    assert_eq!(oracle(&[0x0100_0000, 0x0200_0000, 0x0600_0000], 5), None);
    assert_eq!(oracle(&[0x0100_0000, 0x0200_0000, 0x0300_0000], 5), None);
    assert_eq!(
        oracle(&[0x0100_0000, 0x0200_0000, 0x0800_2055], 6).unwrap().len(),
        4
    );
}

#[test]
fn grammar_streams_are_mostly_valid() {
    // guards against the comparison above degenerating into None == None
    let mut state = 0x2545_F491_4F6C_DD1Du64;
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        state
    };
    for mode in 4u8..8 {
        let mut valid = 0;
        let mut events = 0;
        for _ in 0..200 {
            let picks: Vec<_> = (0..20)
                .map(|_| {
                    let r = next();
                    (r as u8, (r >> 8) as u32, (r >> 40) as u16)
                })
                .collect();
            if let Some(ev) = oracle(&grammar_stream(mode, &picks), mode) {
                valid += 1;
                events += ev.len();
            }
        }
        assert!(valid >= 40 && events >= 200, "mode {mode}: {valid} valid, {events} events");
    }
}
