// SPDX-License-Identifier: MIT OR Apache-2.0

//! Platform-stable pseudo-random stream.
//!
//! The generator is SplitMix64 (Steele, Lea & Flood 2014): the state advances
//! by the golden-gamma constant `0x9E3779B97F4A7C15` and each output is the
//! state passed through the `mix64` finalizer. Uniforms take the top 53 bits;
//! Gaussians use the Box-Muller transform, consuming two uniforms per pair and
//! caching the second value. Only integer ops and IEEE `ln`, `sqrt`, `sin`,
//! `cos` are involved, so sequences are identical on every platform with a
//! conforming libm.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    state: u64,
    spare: Option<f64>,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            state: seed,
            spare: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, bound)`; `bound` must be nonzero.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "next_below(0)");
        // rejection sampling keeps the draw unbiased
        let zone = u64::MAX - (u64::MAX % bound);
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % bound;
            }
        }
    }

    /// Standard normal draw.
    pub fn next_gaussian(&mut self) -> f64 {
        if let Some(v) = self.spare.take() {
            return v;
        }
        // 1 - u lies in (0, 1], so the log is finite
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }

    pub fn gaussian_vec(&mut self, n: usize, std_dev: f64) -> Vec<f64> {
        (0..n).map(|_| self.next_gaussian() * std_dev).collect()
    }
}
