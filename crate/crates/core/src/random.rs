//! Random streams and the handful of variate generators the samplers need.
//!
//! Every consumer draws from an [`RngStream`]: a ChaCha8 generator keyed by a
//! master seed and a 64-bit stream id. Streams for separate rows, replicas or
//! matrices are derived with [`RngStream::substream`], so results never depend
//! on how work is scheduled across threads.
//!
//! Gaussian deviates use the Marsaglia polar method, Gamma deviates the
//! Marsaglia-Tsang squeeze, and Beta deviates the ratio of two Gammas.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream-id tags, one per consumer family.
pub mod tag {
    pub const ROW_CHAIN: u64 = 1;
    pub const RESTART: u64 = 2;
    pub const MATRIX: u64 = 3;
    pub const SWEEP: u64 = 4;
    pub const VERIFY: u64 = 5;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combines a consumer tag and two indices into a ChaCha stream id.
pub fn stream_id(tag: u64, a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(tag) ^ a) ^ b)
}

#[derive(Clone, Debug)]
pub struct RngStream {
    inner: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl RngStream {
    /// Stream 0 of the given seed.
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            inner,
            spare_normal: None,
        }
    }

    /// Independent substream identified by `(seed, tag, a, b)`.
    pub fn substream(seed: u64, tag: u64, a: u64, b: u64) -> Self {
        Self::with_stream(seed, stream_id(tag, a, b))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on [0, 1) with 53 random bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on (0, 1).
    #[inline]
    pub fn uniform_open(&mut self) -> f64 {
        loop {
            let u = self.uniform();
            if u > 0.0 {
                return u;
            }
        }
    }

    /// Standard normal deviate (polar method; the second value of each pair is cached).
    #[inline]
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let scale = (-2.0 * s.ln() / s).sqrt();
                self.spare_normal = Some(v * scale);
                return u * scale;
            }
        }
    }

    /// Gamma(shape, 1) deviate.
    pub fn gamma(&mut self, shape: f64) -> f64 {
        debug_assert!(shape > 0.0);
        if shape < 1.0 {
            // Boost: Gamma(a) = Gamma(a + 1) * U^(1/a).
            let g = self.gamma(shape + 1.0);
            return g * self.uniform_open().powf(1.0 / shape);
        }
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        loop {
            let x = self.normal();
            let t = 1.0 + c * x;
            if t <= 0.0 {
                continue;
            }
            let v = t * t * t;
            let u = self.uniform_open();
            let x2 = x * x;
            if u < 1.0 - 0.0331 * x2 * x2 {
                return d * v;
            }
            if u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
                return d * v;
            }
        }
    }

    /// Beta(a, b) deviate as X / (X + Y) with X ~ Gamma(a), Y ~ Gamma(b).
    pub fn beta(&mut self, a: f64, b: f64) -> f64 {
        let x = self.gamma(a);
        let y = self.gamma(b);
        x / (x + y)
    }

    /// Fills `out` with a direction drawn uniformly from the unit sphere in
    /// `out.len()` dimensions. A one-dimensional "sphere" is {-1, +1}.
    pub fn unit_direction(&mut self, out: &mut [f64]) {
        if out.is_empty() {
            return;
        }
        loop {
            let mut norm2 = 0.0;
            for x in out.iter_mut() {
                *x = self.normal();
                norm2 += *x * *x;
            }
            if norm2 > 1e-300 {
                let norm = norm2.sqrt();
                out.iter_mut().for_each(|x| *x /= norm);
                return;
            }
        }
    }
}
