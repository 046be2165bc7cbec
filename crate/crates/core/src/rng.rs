//! Counter-based pseudo-random generator.
//!
//! Every random quantity in a run is derived from one master seed through
//! key/counter mixing, so independent streams (one per trace, one per noise
//! source) can be generated in any order or in parallel and still reproduce
//! bit-identically.

/// SplitMix64 finalizer. Full 64-bit avalanche, so consecutive counters
/// produce statistically independent outputs.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Splittable counter-mode generator: output i is `mix(key ^ f(i))`.
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
    /// Spare Gaussian deviate from the last Box-Muller pair.
    cached_normal: Option<f64>,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        CounterRng {
            key: mix(seed),
            counter: 0,
            cached_normal: None,
        }
    }

    /// Derive an independent stream. `label` distinguishes the purposes a
    /// seed is split into (plaintexts, sample noise, capture noise, ...).
    pub fn split(&self, label: u64) -> CounterRng {
        CounterRng {
            key: mix(self.key ^ mix(label)),
            counter: 0,
            cached_normal: None,
        }
    }

    /// Stream dedicated to one trace index.
    pub fn for_trace(&self, index: u64) -> CounterRng {
        // Offset keeps trace streams disjoint from label splits.
        self.split(index.wrapping_add(0x7472_6163_6500_0000))
    }

    /// Derive a child stream tied to this generator's current position, so
    /// successive forks are independent of each other.
    pub fn fork(&mut self) -> CounterRng {
        let salt = self.next_u64();
        CounterRng {
            key: mix(self.key ^ salt),
            counter: 0,
            cached_normal: None,
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let out = mix(self.key.wrapping_add(self.counter.wrapping_mul(0xd1b5_4a32_d192_ed03)));
        self.counter = self.counter.wrapping_add(1);
        out
    }

    #[inline]
    pub fn next_byte(&mut self) -> u8 {
        (self.next_u64() >> 56) as u8
    }

    pub fn fill_bytes(&mut self, buf: &mut [u8]) {
        for chunk in buf.chunks_mut(8) {
            let word = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&word[..chunk.len()]);
        }
    }

    /// Uniform in the open interval (0, 1).
    #[inline]
    pub fn next_unit_open(&mut self) -> f64 {
        // 53 significant bits, then nudge away from zero.
        let u = (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        if u == 0.0 {
            f64::MIN_POSITIVE
        } else {
            u
        }
    }

    /// Standard normal deviate via Box-Muller. Self-contained so the noise
    /// stream never depends on an external library's sampling internals.
    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.cached_normal.take() {
            return z;
        }
        let u1 = self.next_unit_open();
        let u2 = self.next_unit_open();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.cached_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn next_gaussian(&mut self, sigma: f64) -> f64 {
        if sigma == 0.0 {
            0.0
        } else {
            sigma * self.next_normal()
        }
    }
}
