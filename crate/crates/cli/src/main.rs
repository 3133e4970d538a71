use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use evtplus::container::{
    decode_from, decode_recording, encode_segments, locate, payload_offsets, read_recording, ContainerError,
    Resume, SegmentReader,
};
use evtplus::genstream::{generate, GenParams, Scenario};
use evtplus::header::{HeaderRecord, MAX_NUM_DATUM};
use evtplus::index::SENTINEL;
use evtplus::stats::recording_stats;
use evtplus::{write_recording, DataModality, DatumCode, EncodeConfig, EventRecord, Strictness, VectorPolicy};

mod interchange;

#[derive(Parser)]
#[command(name = "evtp", version, about = "Encode, decode and inspect EVT+ event recordings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a CSV event list into an .evtp recording
    Encode(EncodeArgs),
    /// Decode an .evtp recording to CSV
    Decode(DecodeArgs),
    /// Print every header field of every segment
    Inspect(InspectArgs),
    /// Word and compression statistics
    Stats(StatsArgs),
    /// Resolve a time through the pointer table
    Seek(SeekArgs),
    /// Generate a synthetic event stream as CSV
    Gen(GenArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Baseline,
    Mixed,
    Vectorized,
    MixedVectorized,
}

impl From<Mode> for DataModality {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Baseline => DataModality::Event,
            Mode::Mixed => DataModality::Mixed,
            Mode::Vectorized => DataModality::Vectorized,
            Mode::MixedVectorized => DataModality::MixedVectorized,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    Adaptive,
    Serial,
    Vector,
}

impl From<Policy> for VectorPolicy {
    fn from(p: Policy) -> Self {
        match p {
            Policy::Adaptive => VectorPolicy::Adaptive,
            Policy::Serial => VectorPolicy::AlwaysSerial,
            Policy::Vector => VectorPolicy::AlwaysVector,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    MovingEdge,
    UniformPoisson,
    RowBurst,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value = "baseline")]
    mode: Mode,
    #[arg(long, value_enum, default_value = "adaptive")]
    vector_policy: Policy,
    /// Vectorization window in microseconds
    #[arg(long, default_value_t = 256)]
    bin_us: u32,
    /// Array rows; defaults to the largest y + 1
    #[arg(long)]
    rows: Option<u16>,
    /// Array columns; defaults to the largest x + 1
    #[arg(long)]
    cols: Option<u16>,
    /// Up to 32 ASCII characters
    #[arg(long, default_value = "")]
    sensor_model: String,
    /// Pointer table spacing; 0 writes no table
    #[arg(long, default_value_t = 1000)]
    ptr_increment_us: u32,
}

#[derive(Args)]
struct Strictnesses {
    /// Stop at the first fault (default)
    #[arg(long, conflicts_with = "lenient")]
    strict: bool,
    /// Report faults and keep going
    #[arg(long)]
    lenient: bool,
}

impl Strictnesses {
    fn get(&self) -> Strictness {
        if self.lenient {
            Strictness::Lenient
        } else {
            Strictness::Strict
        }
    }
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    strictness: Strictnesses,
    /// Keep events with t_us >= this
    #[arg(long)]
    from_us: Option<u64>,
    /// Keep events with t_us < this
    #[arg(long)]
    to_us: Option<u64>,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    strictness: Strictnesses,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    strictness: Strictnesses,
}

#[derive(Args)]
struct SeekArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    at_us: u64,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    scenario: ScenarioArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 240)]
    rows: u16,
    #[arg(long, default_value_t = 320)]
    cols: u16,
    #[arg(long, default_value_t = 100_000)]
    duration_us: u64,
    /// Events per second (uniform-poisson, row-burst)
    #[arg(long, default_value_t = 100_000.0)]
    rate: f64,
    /// Edge speed in pixels per second (moving-edge)
    #[arg(long, default_value_t = 1_000.0)]
    speed: f64,
    /// Columns per burst (row-burst)
    #[arg(long, default_value_t = 32)]
    run_len: u16,
    /// Columns between leading and trailing edge (moving-edge)
    #[arg(long, default_value_t = 4)]
    edge_width: u16,
    /// Attach synthetic intensities for the mixed modes
    #[arg(long)]
    intensity: bool,
    #[arg(long)]
    output: PathBuf,
}

fn read_csv(path: &PathBuf) -> Result<Vec<EventRecord>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    interchange::read_events(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

fn write_csv(path: &PathBuf, events: &[EventRecord]) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    interchange::write_events(BufWriter::new(f), events)
}

fn read_bytes(path: &PathBuf) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn encode(args: EncodeArgs) -> Result<()> {
    let mut events = read_csv(&args.input)?;
    events.sort_unstable();
    let modality = DataModality::from(args.mode);
    if !modality.carries_intensity() && events.iter().any(|e| e.intensity.is_some()) {
        eprintln!("note: mode {modality} carries no intensity; intensities dropped");
    }
    let rows = args.rows.unwrap_or_else(|| events.iter().map(|e| e.y).max().map_or(1, |y| y.saturating_add(1)));
    let cols = args.cols.unwrap_or_else(|| events.iter().map(|e| e.x).max().map_or(1, |x| x.saturating_add(1)));
    if let Some(e) = events.iter().find(|e| e.x >= cols || e.y >= rows) {
        bail!("event at ({}, {}) lies outside the {cols}x{rows} array", e.x, e.y);
    }
    if args.sensor_model.len() > 32 || !args.sensor_model.is_ascii() {
        bail!("sensor model must be at most 32 ASCII characters");
    }
    let mut template = HeaderRecord::new(modality, rows, cols).with_sensor_model(&args.sensor_model);
    template.pointer_table.increment_us = args.ptr_increment_us;
    let cfg = EncodeConfig::new(modality)
        .with_policy(args.vector_policy.into())
        .with_bin_us(args.bin_us);
    let segments = encode_segments(&events, &cfg, &template, MAX_NUM_DATUM as usize)?;
    let bytes = write_recording(&segments, Strictness::Strict)?;
    fs::write(&args.output, &bytes).with_context(|| format!("writing {}", args.output.display()))?;
    let words: usize = segments.iter().map(|s| s.words.len()).sum();
    println!(
        "encoded {} events as {words} words in {} segment(s), {} bytes",
        events.len(),
        segments.len(),
        bytes.len()
    );
    Ok(())
}

fn decode(args: DecodeArgs) -> Result<()> {
    let bytes = read_bytes(&args.input)?;
    let strictness = args.strictness.get();
    let mut events = match (args.from_us, strictness) {
        // strict reads trust the pointer table; a damaged file is scanned
        (Some(t), Strictness::Strict) => decode_from(&read_recording(&bytes, strictness)?, t, strictness)?,
        _ => {
            let rec = decode_recording(&bytes, strictness)?;
            for d in &rec.diagnostics {
                eprintln!("{d}");
            }
            rec.all_events()
        }
    };
    let from = args.from_us.unwrap_or(0);
    let to = args.to_us.unwrap_or(u64::MAX);
    events.retain(|e| e.t_us >= from && e.t_us < to);
    events.sort_unstable();
    write_csv(&args.output, &events)
}

fn printable(model: &[u8]) -> String {
    model
        .iter()
        .map(|&b| if b.is_ascii_graphic() || b == b' ' { b as char } else { '.' })
        .collect()
}

fn inspect(args: InspectArgs) -> Result<()> {
    let bytes = read_bytes(&args.input)?;
    let mut out = std::io::stdout().lock();
    let mut reader = SegmentReader::new(&bytes[..], args.strictness.get());
    let mut start = 0;
    let mut index = 0;
    while let Some(seg) = reader.next() {
        let seg = match seg {
            Ok(s) => s,
            Err(e) if args.strictness.get() == Strictness::Lenient => {
                eprintln!("{}", e.to_diagnostic());
                break;
            }
            Err(e) => return Err(e.into()),
        };
        let h = &seg.header;
        writeln!(out, "segment {index} at byte {start}")?;
        writeln!(out, "  header_id        0xEB")?;
        writeln!(out, "  epoch_ts         {}", h.epoch_ts)?;
        writeln!(out, "  global_ts        {}", h.global_ts)?;
        writeln!(out, "  sensor_modality  {} ({})", h.sensor_modality.bits(), h.sensor_modality.describe())?;
        writeln!(out, "  data_modality    {}", h.data_modality)?;
        writeln!(out, "  num_datum        {}", h.num_datum)?;
        writeln!(out, "  rows             {}", h.rows)?;
        writeln!(out, "  cols             {}", h.cols)?;
        writeln!(out, "  sensor_model     \"{}\"", printable(&h.sensor_model))?;
        writeln!(out, "  header_bytes     {}", h.encoded_len())?;
        let users: Vec<String> = h.user_words.iter().map(|w| format!("0x{w:08X}")).collect();
        writeln!(out, "  user_words       {} [{}]", users.len(), users.join(" "))?;
        let table = &h.pointer_table;
        writeln!(out, "  pointer_table    increment_us={} count={}", table.increment_us, table.offsets.len())?;
        for (k, &o) in table.offsets.iter().enumerate() {
            if o == SENTINEL {
                writeln!(out, "    ptr[{k}] sentinel")?;
            } else {
                writeln!(out, "    ptr[{k}] 0x{o:08X}")?;
            }
        }
        start = reader.position() as usize;
        index += 1;
    }
    Ok(())
}

fn stats(args: StatsArgs) -> Result<()> {
    let bytes = read_bytes(&args.input)?;
    let strictness = args.strictness.get();
    let rec = decode_recording(&bytes, strictness)?;
    for d in &rec.diagnostics {
        eprintln!("{d}");
    }
    let st = recording_stats(&rec.segments, Strictness::Lenient)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "segments           {}", rec.segments.len())?;
    writeln!(out, "datum histogram")?;
    for code in DatumCode::ALL {
        writeln!(out, "  {:<18} {}", code.name(), st.histogram.get(&code).copied().unwrap_or(0))?;
    }
    if st.unknown_words > 0 {
        writeln!(out, "  {:<18} {}", "UNKNOWN", st.unknown_words)?;
    }
    writeln!(out, "total_words        {}", st.total_words)?;
    writeln!(out, "events             {}", st.events)?;
    writeln!(out, "bits_per_event     {:.3}", st.bits_per_event())?;
    writeln!(out, "x_words            {}", st.x_words)?;
    writeln!(out, "baseline_x_words   {}", st.baseline_x_words)?;
    writeln!(out, "x_word_ratio       {:.3}", st.x_word_ratio())?;
    writeln!(out, "baseline_words     {}", st.baseline_words)?;
    writeln!(out, "word_ratio         {:.3}", st.word_ratio())?;
    Ok(())
}

fn seek(args: SeekArgs) -> Result<()> {
    let bytes = read_bytes(&args.input)?;
    let segments = read_recording(&bytes, Strictness::Strict)?;
    let Some(loc) = locate(&segments, args.at_us, Strictness::Strict)? else {
        bail!("recording has no segments");
    };
    let offsets = payload_offsets(&segments);
    println!("segment            {}", loc.segment);
    let first = match loc.resume {
        Resume::Pointer(pos) => {
            println!("interval           {}", pos.interval);
            println!("interval_start_us  {}", pos.interval_start_us);
            println!("payload_offset     {}", pos.byte_offset);
            println!("file_offset        {}", offsets[loc.segment] + pos.byte_offset as usize);
            let words = &segments[loc.segment].words;
            pos.decode_rest(words).map_err(|source| ContainerError::Payload { segment: loc.segment, source })?.events.first().copied()
        }
        Resume::Scan | Resume::Skip => {
            println!("payload_offset     none (no pointer covers this time)");
            decode_from(&segments, args.at_us, Strictness::Strict)?.first().copied()
        }
    };
    match first {
        Some(e) => println!(
            "first_event        t_us={} x={} y={} p={}{}",
            e.t_us,
            e.x,
            e.y,
            u8::from(e.polarity.is_on()),
            e.intensity.map(|i| format!(" intensity={i}")).unwrap_or_default()
        ),
        None => println!("first_event        none"),
    }
    Ok(())
}

fn gen(args: GenArgs) -> Result<()> {
    let scenario = match args.scenario {
        ScenarioArg::MovingEdge => Scenario::MovingEdge,
        ScenarioArg::UniformPoisson => Scenario::UniformPoisson,
        ScenarioArg::RowBurst => Scenario::RowBurst,
    };
    let params = GenParams {
        rows: args.rows,
        cols: args.cols,
        duration_us: args.duration_us,
        rate: args.rate,
        speed: args.speed,
        run_len: args.run_len,
        edge_width: args.edge_width,
        seed: args.seed,
        intensity: args.intensity,
    };
    let events = generate(scenario, &params)?;
    write_csv(&args.output, &events)?;
    println!("generated {} {} events", events.len(), scenario.name());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Encode(a) => encode(a),
        Command::Decode(a) => decode(a),
        Command::Inspect(a) => inspect(a),
        Command::Stats(a) => stats(a),
        Command::Seek(a) => seek(a),
        Command::Gen(a) => gen(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let Some(ce) = e.downcast_ref::<ContainerError>() {
                eprintln!("{}", ce.to_diagnostic());
            }
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
