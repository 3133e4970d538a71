//! The CSV interchange format: `t_us,x,y,p,intensity`, one event per row,
//! `p` is 1 for ON, `intensity` is empty when absent.

use std::io::{Read, Write};

use anyhow::{bail, Context, Result};
use evtplus::{EventRecord, Polarity};

pub const HEADER: [&str; 5] = ["t_us", "x", "y", "p", "intensity"];

pub fn read_events<R: Read>(input: R) -> Result<Vec<EventRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != HEADER {
        bail!("expected CSV header `{}`, found `{}`", HEADER.join(","), header.iter().collect::<Vec<_>>().join(","));
    }
    let mut events = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let field = |k: usize| rec.get(k).unwrap_or("");
        let t_us = field(0).parse().with_context(|| format!("line {line}: bad t_us"))?;
        let x = field(1).parse().with_context(|| format!("line {line}: bad x"))?;
        let y = field(2).parse().with_context(|| format!("line {line}: bad y"))?;
        let polarity = match field(3) {
            "0" => Polarity::Off,
            "1" => Polarity::On,
            other => bail!("line {line}: polarity must be 0 or 1, got `{other}`"),
        };
        let mut e = EventRecord::new(t_us, x, y, polarity);
        if !field(4).is_empty() {
            e = e.with_intensity(field(4).parse().with_context(|| format!("line {line}: bad intensity"))?);
        }
        events.push(e);
    }
    Ok(events)
}

pub fn write_events<W: Write>(out: W, events: &[EventRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for e in events {
        let p = if e.polarity.is_on() { "1" } else { "0" };
        let intensity = e.intensity.map(|i| i.to_string()).unwrap_or_default();
        w.write_record([&e.t_us.to_string(), &e.x.to_string(), &e.y.to_string(), p, &intensity])?;
    }
    w.flush()?;
    Ok(())
}
