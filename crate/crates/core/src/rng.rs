//! SplitMix64 stream and the gaussian/lognormal draws built on it.
//!
//! Every stochastic operation in the crate is a pure function of (inputs, seed)
//! through this generator, so results are portable across platforms.

/// SplitMix64 with the standard increment and mixing constants.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform in (0, 1]; never returns 0 so it is safe inside a log.
    pub fn next_f64(&mut self) -> f64 {
        let bits = self.next_u64() >> 11; // 53 bits
        (bits + 1) as f64 / (1u64 << 53) as f64
    }

    /// Standard normal via Box-Muller.
    pub fn next_normal(&mut self) -> f64 {
        let u1 = self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Multiplicative lognormal factor with log-sigma `sigma`, unit median.
    pub fn next_lognormal(&mut self, sigma: f64) -> f64 {
        (sigma * self.next_normal()).exp()
    }
}

/// Derives an independent stream for item `index` of a seeded family.
pub fn substream(master_seed: u64, index: u64) -> SplitMix64 {
    let mut mixer = SplitMix64::new(master_seed ^ index.wrapping_mul(0x9E3779B97F4A7C15));
    let s = mixer.next_u64();
    SplitMix64::new(s)
}
