use crate::wire::Polarity;

/// Largest representable timestamp: 40 bits of microseconds.
pub const MAX_TIMESTAMP_US: u64 = (1 << 40) - 1;

/// One logical address event.
///
/// Field order makes the derived `Ord` the canonical (t, y, x, p) order used
/// for encoder input and CSV output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventRecord {
    pub t_us: u64,
    pub y: u16,
    pub x: u16,
    pub polarity: Polarity,
    pub intensity: Option<u32>,
}

impl EventRecord {
    pub fn new(t_us: u64, x: u16, y: u16, polarity: Polarity) -> Self {
        EventRecord {
            t_us,
            y,
            x,
            polarity,
            intensity: None,
        }
    }

    pub fn with_intensity(mut self, intensity: u32) -> Self {
        self.intensity = Some(intensity);
        self
    }
}

/// Splits a 40-bit timestamp into its (bits 39..16, 15..8, 7..0) fragments.
pub fn split_timestamp(t_us: u64) -> (u32, u8, u8) {
    (
        ((t_us >> 16) & 0x00FF_FFFF) as u32,
        (t_us >> 8) as u8,
        t_us as u8,
    )
}

/// Rebuilds a 40-bit timestamp from its three fragments.
pub fn assemble_timestamp(ts_msb: u32, ts_lsb: u8, ts_llsb: u8) -> u64 {
    ((ts_msb as u64 & 0x00FF_FFFF) << 16) | ((ts_lsb as u64) << 8) | ts_llsb as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assemble_examples() {
        assert_eq!(assemble_timestamp(0, 0, 0), 0);
        assert_eq!(assemble_timestamp(0xFF_FFFF, 0xFF, 0xFF), (1u64 << 40) - 1);
        assert_eq!(assemble_timestamp(0xFF_FFFF, 0xFF, 0xFF), 1_099_511_627_775);
        // 1 * 65536 + 2 * 256 + 3
        assert_eq!(assemble_timestamp(1, 2, 3), 66_051);
    }

    #[test]
    fn split_inverts_assemble() {
        for t in [0u64, 1, 255, 256, 65_535, 65_536, 66_051, MAX_TIMESTAMP_US] {
            let (m, l, ll) = split_timestamp(t);
            assert_eq!(assemble_timestamp(m, l, ll), t);
        }
    }

    #[test]
    fn canonical_order() {
        let a = EventRecord::new(5, 9, 1, Polarity::On);
        let b = EventRecord::new(5, 2, 2, Polarity::Off);
        let c = EventRecord::new(4, 100, 100, Polarity::On);
        let mut v = vec![a, b, c];
        v.sort();
        assert_eq!(v, vec![c, a, b]);
    }
}
