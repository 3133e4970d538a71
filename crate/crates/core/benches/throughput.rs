//! Sequential versus data-parallel throughput for encode, decode and
//! recording framing. Build without default features to bench the
//! sequential fallback of the library-level entry points.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use evtplus::container::{decode_segments, encode_segments, write_recording};
use evtplus::decoder::decode_payload;
use evtplus::encoder::{encode_payload_sequential, EncodeConfig};
use evtplus::genstream::{generate, GenParams, Scenario};
use evtplus::header::{DataModality, HeaderRecord};
use evtplus::wire::Strictness;
use std::hint::black_box;

fn corpus() -> Vec<evtplus::EventRecord> {
    generate(
        Scenario::UniformPoisson,
        &GenParams {
            rows: 480,
            cols: 640,
            duration_us: 1_000_000,
            rate: 500_000.0,
            intensity: true,
            seed: 1,
            ..GenParams::default()
        },
    )
    .unwrap()
}

fn encode(c: &mut Criterion) {
    let events = corpus();
    let mut g = c.benchmark_group("encode");
    g.throughput(Throughput::Elements(events.len() as u64));
    g.sample_size(10);
    for m in DataModality::EVENT_MODES {
        let cfg = EncodeConfig::new(m).with_resync(1000);
        g.bench_with_input(BenchmarkId::new("sequential", m.mode_name()), &cfg, |b, cfg| {
            b.iter(|| encode_payload_sequential(black_box(&events), cfg).unwrap())
        });
        #[cfg(feature = "parallel")]
        g.bench_with_input(BenchmarkId::new("parallel", m.mode_name()), &cfg, |b, cfg| {
            b.iter(|| evtplus::encoder::encode_payload_parallel(black_box(&events), cfg).unwrap())
        });
    }
    g.finish();
}

fn decode(c: &mut Criterion) {
    let events = corpus();
    let mut g = c.benchmark_group("decode");
    g.throughput(Throughput::Elements(events.len() as u64));
    g.sample_size(10);
    for m in DataModality::EVENT_MODES {
        let mut template = HeaderRecord::new(m, 480, 640);
        template.pointer_table.increment_us = 1000;
        // small segments so there is work to spread
        let segs = encode_segments(&events, &EncodeConfig::new(m), &template, 64 * 1024).unwrap();
        g.bench_with_input(BenchmarkId::new("sequential", m.mode_name()), &segs, |b, segs| {
            b.iter(|| {
                segs.iter()
                    .map(|s| decode_payload(&s.words, s.decode_options(Strictness::Strict)).unwrap().events.len())
                    .sum::<usize>()
            })
        });
        g.bench_with_input(BenchmarkId::new("segments", m.mode_name()), &segs, |b, segs| {
            b.iter(|| decode_segments(segs.clone(), Vec::new(), Strictness::Strict).unwrap())
        });
    }
    g.finish();
}

fn framing(c: &mut Criterion) {
    let events = corpus();
    let mut template = HeaderRecord::new(DataModality::Vectorized, 480, 640);
    template.pointer_table.increment_us = 1000;
    let cfg = EncodeConfig::new(DataModality::Vectorized);
    let segs = encode_segments(&events, &cfg, &template, 64 * 1024).unwrap();
    let mut g = c.benchmark_group("framing");
    g.sample_size(10);
    g.bench_function("encode_segments", |b| {
        b.iter(|| encode_segments(black_box(&events), &cfg, &template, 64 * 1024).unwrap())
    });
    g.bench_function("write_recording", |b| b.iter(|| write_recording(black_box(&segs), Strictness::Strict).unwrap()));
    g.finish();
}

criterion_group!(benches, encode, decode, framing);
criterion_main!(benches);
