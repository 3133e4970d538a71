//! Deterministic synthetic event streams.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use thiserror::Error;

use crate::event::{EventRecord, MAX_TIMESTAMP_US};
use crate::wire::Polarity;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GenError {
    #[error("bad generator parameters: {0}")]
    BadParams(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    /// A vertical bar sweeping left to right: ON at its leading column,
    /// OFF at its trailing column.
    MovingEdge,
    /// Independent pixels at a constant mean rate.
    UniformPoisson,
    /// Runs of consecutive columns firing together in one row.
    RowBurst,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::MovingEdge, Scenario::UniformPoisson, Scenario::RowBurst];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::MovingEdge => "moving-edge",
            Scenario::UniformPoisson => "uniform-poisson",
            Scenario::RowBurst => "row-burst",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenParams {
    pub rows: u16,
    pub cols: u16,
    pub duration_us: u64,
    /// Mean event rate in events per second (uniform-poisson, row-burst).
    pub rate: f64,
    /// Edge speed in pixels per second (moving-edge).
    pub speed: f64,
    /// Columns per burst (row-burst).
    pub run_len: u16,
    /// Distance between leading and trailing edge (moving-edge).
    pub edge_width: u16,
    pub seed: u64,
    /// Attach the synthetic intensity ramp to every event.
    pub intensity: bool,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            rows: 240,
            cols: 320,
            duration_us: 100_000,
            rate: 100_000.0,
            speed: 1_000.0,
            run_len: 32,
            edge_width: 4,
            seed: 0,
            intensity: false,
        }
    }
}

/// Intensity attached to synthetic events, a plain ramp in x + y + t.
pub fn intensity_ramp(x: u16, y: u16, t_us: u64) -> u32 {
    (t_us as u32).wrapping_add(x as u32).wrapping_add(y as u32)
}

impl GenParams {
    fn check(&self, scenario: Scenario) -> Result<(), GenError> {
        if self.rows == 0 || self.cols == 0 {
            return Err(GenError::BadParams("rows and cols must be positive"));
        }
        if self.duration_us > MAX_TIMESTAMP_US {
            return Err(GenError::BadParams("duration exceeds the 40-bit timestamp range"));
        }
        match scenario {
            Scenario::MovingEdge => {
                if !(self.speed.is_finite() && self.speed > 0.0) {
                    return Err(GenError::BadParams("speed must be positive and finite"));
                }
            }
            Scenario::UniformPoisson | Scenario::RowBurst => {
                if !(self.rate.is_finite() && self.rate > 0.0) {
                    return Err(GenError::BadParams("rate must be positive and finite"));
                }
            }
        }
        if scenario == Scenario::RowBurst && (self.run_len == 0 || self.run_len > self.cols) {
            return Err(GenError::BadParams("run length must be in 1..=cols"));
        }
        Ok(())
    }

    fn event(&self, t_us: u64, x: u16, y: u16, polarity: Polarity) -> EventRecord {
        let e = EventRecord::new(t_us, x, y, polarity);
        if self.intensity {
            e.with_intensity(intensity_ramp(x, y, t_us))
        } else {
            e
        }
    }
}

/// Generates a sorted event stream; identical params give identical output.
pub fn generate(scenario: Scenario, params: &GenParams) -> Result<Vec<EventRecord>, GenError> {
    params.check(scenario)?;
    if params.duration_us == 0 {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut events = match scenario {
        Scenario::MovingEdge => moving_edge(params, &mut rng),
        Scenario::UniformPoisson => poisson(params, &mut rng),
        Scenario::RowBurst => row_burst(params, &mut rng),
    };
    events.sort_unstable();
    Ok(events)
}

fn moving_edge(p: &GenParams, rng: &mut ChaCha8Rng) -> Vec<EventRecord> {
    let step = 1e6 / p.speed;
    let cols = p.cols as u64;
    let width = p.edge_width as u64;
    let mut out = Vec::new();
    for k in 0u64.. {
        let t_step = k as f64 * step;
        if t_step >= p.duration_us as f64 {
            break;
        }
        for y in 0..p.rows {
            // each pixel fires somewhere inside the step, once per edge
            let mut fire = |x: u64, pol| {
                let t = (t_step + rng.random::<f64>() * step) as u64;
                if t < p.duration_us {
                    out.push(p.event(t, x as u16, y, pol));
                }
            };
            fire(k % cols, Polarity::On);
            if k >= width {
                fire((k - width) % cols, Polarity::Off);
            }
        }
    }
    out
}

fn arrivals(mean_rate_per_s: f64, duration_us: u64, rng: &mut ChaCha8Rng) -> Vec<u64> {
    let gap = Exp::new(mean_rate_per_s / 1e6).expect("rate checked positive");
    let mut t = 0.0f64;
    let mut out = Vec::new();
    loop {
        t += gap.sample(rng);
        if t >= duration_us as f64 {
            return out;
        }
        out.push(t as u64);
    }
}

fn poisson(p: &GenParams, rng: &mut ChaCha8Rng) -> Vec<EventRecord> {
    arrivals(p.rate, p.duration_us, rng)
        .into_iter()
        .map(|t| {
            let x = rng.random_range(0..p.cols);
            let y = rng.random_range(0..p.rows);
            let pol = Polarity::from_bit(rng.random());
            p.event(t, x, y, pol)
        })
        .collect()
}

fn row_burst(p: &GenParams, rng: &mut ChaCha8Rng) -> Vec<EventRecord> {
    let run = p.run_len;
    let mut out = Vec::new();
    for t in arrivals(p.rate / run as f64, p.duration_us, rng) {
        let y = rng.random_range(0..p.rows);
        let x0 = rng.random_range(0..=p.cols - run);
        let pol = Polarity::from_bit(rng.random());
        out.extend((x0..x0 + run).map(|x| p.event(t, x, y, pol)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> GenParams {
        GenParams {
            rows: 64,
            cols: 128,
            duration_us: 50_000,
            ..GenParams::default()
        }
    }

    #[test]
    fn zero_duration_is_empty() {
        for s in Scenario::ALL {
            let p = GenParams {
                duration_us: 0,
                ..params()
            };
            assert!(generate(s, &p).unwrap().is_empty());
        }
    }

    #[test]
    fn deterministic_sorted_in_bounds() {
        for s in Scenario::ALL {
            let p = GenParams {
                seed: 7,
                intensity: true,
                ..params()
            };
            let a = generate(s, &p).unwrap();
            assert!(!a.is_empty(), "{s:?}");
            assert_eq!(a, generate(s, &p).unwrap());
            assert!(a.windows(2).all(|w| w[0] <= w[1]));
            for e in &a {
                assert!(e.x < p.cols && e.y < p.rows && e.t_us < p.duration_us);
                assert_eq!(e.intensity, Some(intensity_ramp(e.x, e.y, e.t_us)));
            }
            let other = generate(s, &GenParams { seed: 8, ..p.clone() }).unwrap();
            assert_ne!(a, other);
        }
    }

    #[test]
    fn bad_params() {
        let bad = [
            (Scenario::UniformPoisson, GenParams { rows: 0, ..params() }),
            (Scenario::UniformPoisson, GenParams { rate: 0.0, ..params() }),
            (Scenario::UniformPoisson, GenParams { rate: f64::NAN, ..params() }),
            (Scenario::MovingEdge, GenParams { speed: -1.0, ..params() }),
            (Scenario::RowBurst, GenParams { run_len: 129, ..params() }),
            (Scenario::RowBurst, GenParams { run_len: 0, ..params() }),
        ];
        for (s, p) in bad {
            assert!(matches!(generate(s, &p), Err(GenError::BadParams(_))), "{s:?} {p:?}");
        }
    }

    #[test]
    fn poisson_rate_within_five_percent() {
        let p = GenParams {
            rate: 200_000.0,
            duration_us: 1_000_000,
            seed: 3,
            ..params()
        };
        let n = generate(Scenario::UniformPoisson, &p).unwrap().len() as f64;
        assert!(n >= 1e5);
        assert!((n - 200_000.0).abs() / 200_000.0 < 0.05, "n={n}");
    }

    #[test]
    fn bursts_are_runs() {
        let p = GenParams { run_len: 32, ..params() };
        let ev = generate(Scenario::RowBurst, &p).unwrap();
        assert_eq!(ev.len() % 32, 0);
    }

    #[test]
    fn moving_edge_counts() {
        // 1000 px/s over 10 ms: 10 leading steps, 6 trailing ones (width 4)
        let p = GenParams {
            rows: 5,
            cols: 100,
            duration_us: 10_000,
            speed: 1000.0,
            edge_width: 4,
            ..GenParams::default()
        };
        let ev = generate(Scenario::MovingEdge, &p).unwrap();
        let on = ev.iter().filter(|e| e.polarity.is_on()).count();
        assert_eq!(on, 50);
        assert_eq!(ev.len() - on, 30);
        for e in ev.iter().filter(|e| e.polarity.is_on()) {
            assert_eq!(e.t_us / 1000, e.x as u64);
        }
    }

    #[test]
    fn names() {
        for s in Scenario::ALL {
            assert_eq!(Scenario::from_name(s.name()), Some(s));
        }
    }
}
