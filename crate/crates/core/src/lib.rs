//! Reference codec for the EVT+ event-sensor data format.
//!
//! Layers, bottom up: [`wire`] packs single 32-bit datum words, [`header`]
//! handles the recording header, [`decoder`] and [`encoder`] convert
//! between word streams and [`EventRecord`]s, [`index`] builds and queries
//! the pointer-to-timestamps table, and [`container`] frames whole
//! multi-segment recordings.
//!
//! With the default `parallel` feature, large encodes, per-segment decoding
//! and pointer-table construction run on rayon. Without it the same code
//! paths run sequentially and produce identical output.

pub mod container;
pub mod costmodel;
pub mod decoder;
pub mod encoder;
pub mod event;
pub mod genstream;
pub mod header;
pub mod index;
mod par;
pub mod stats;
pub mod wire;

pub use container::{decode_recording, read_recording, write_recording, ContainerError, Segment};
pub use decoder::{decode_payload, DecodeOptions, Decoder, Diagnostic, DiagnosticCode};
pub use encoder::{encode_payload, EncodeConfig, EncodeError, VectorPolicy};
pub use event::EventRecord;
pub use header::{DataModality, HeaderRecord, SensorModality};
pub use wire::{Datum, DatumCode, Polarity, Strictness};
