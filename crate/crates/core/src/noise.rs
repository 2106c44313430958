//! Seeded pink noise (-3 dB/octave), Paul Kellet's refined filter over a
//! ChaCha white-noise source.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct PinkNoise {
    rng: ChaCha8Rng,
    b: [f64; 7],
}

impl PinkNoise {
    pub fn new(seed: u64) -> Self {
        PinkNoise { rng: ChaCha8Rng::seed_from_u64(seed), b: [0.0; 7] }
    }

    /// Next sample, roughly within `[-1, 1]`.
    #[inline]
    pub fn next_sample(&mut self) -> f64 {
        let white: f64 = self.rng.gen_range(-1.0..1.0);
        let b = &mut self.b;
        b[0] = 0.99886 * b[0] + white * 0.0555179;
        b[1] = 0.99332 * b[1] + white * 0.0750759;
        b[2] = 0.96900 * b[2] + white * 0.1538520;
        b[3] = 0.86650 * b[3] + white * 0.3104856;
        b[4] = 0.55000 * b[4] + white * 0.5329522;
        b[5] = -0.7616 * b[5] - white * 0.0168980;
        let out = b[0] + b[1] + b[2] + b[3] + b[4] + b[5] + b[6] + white * 0.5362;
        b[6] = white * 0.115926;
        out * 0.11
    }
}
