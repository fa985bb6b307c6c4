//! Counter-based random number generation.
//!
//! Every Brownian increment is a pure function of `(seed, path_index, driver,
//! counter)`: there is no mutable generator state, so any path, any driver and
//! any increment can be produced independently, in any order, on any worker.
//! That is what makes ensemble results independent of the worker count and
//! bit-reproducible across runs.
//!
//! The mapping is a splitmix64-style finalizer applied to the mixed key and
//! counter, turned into standard normals with the Box-Muller transform. Each
//! counter pair `(2j, 2j + 1)` yields the two outputs of one transform, so
//! normal draw `k` consumes exactly counter `k`'s worth of randomness and the
//! indexing stays a pure function.

/// splitmix64 finalizer with a golden-ratio offset so 0 does not map to 0.
#[inline]
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Which Brownian driver a stream feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Driver {
    /// Asset noise.
    B1 = 1,
    /// Variance noise.
    B2 = 2,
}

/// Identifies one independent increment stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStreamKey {
    pub seed: u64,
    pub path_index: u64,
    pub driver: Driver,
}

impl RngStreamKey {
    /// Collapse the key into a single stream seed. Each component passes
    /// through the finalizer before the next is mixed in, so related keys
    /// (adjacent paths, same path different driver) land far apart.
    #[inline]
    fn stream_seed(&self) -> u64 {
        let s = mix64(self.seed ^ 0x7472_756e_6365_6d21);
        let s = mix64(s ^ self.path_index);
        mix64(s ^ (self.driver as u64).wrapping_mul(0xda94_2042_e4dd_58b5))
    }
}

/// A stream with its seed collapsed, ready for indexed draws.
#[derive(Debug, Clone, Copy)]
pub(crate) struct CounterStream {
    stream_seed: u64,
}

impl CounterStream {
    #[inline]
    pub(crate) fn new(key: RngStreamKey) -> Self {
        CounterStream {
            stream_seed: key.stream_seed(),
        }
    }

    /// 64 uniform bits for one counter value.
    #[inline]
    pub(crate) fn bits(&self, counter: u64) -> u64 {
        mix64(self.stream_seed ^ mix64(counter ^ 0x5bf0_3635_dcd1_4f1d))
    }

    /// The Box-Muller pair `(2j, 2j + 1)` from the uniforms at counters `2j`
    /// and `2j + 1`. The first uniform is offset into (0, 1) so the log never
    /// sees zero. Producing both outputs of one transform halves the
    /// logarithm cost when draws are consumed in bulk.
    #[inline]
    pub(crate) fn normal_pair(&self, j: u64) -> (f64, f64) {
        const SCALE: f64 = 1.0 / 9007199254740992.0; // 2^-53
        let u1 = ((self.bits(2 * j) >> 11) as f64 + 0.5) * SCALE;
        let u2 = (self.bits(2 * j + 1) >> 11) as f64 * SCALE;
        let r = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        (r * angle.cos(), r * angle.sin())
    }

}

/// Increments are rounded to multiples of this quantum (2^-40). Partial sums
/// of quantized increments stay exactly representable in f64 over every block
/// size used here, so coarsening by block sums is exact arithmetic — any
/// summation order produces identical bits. The rounding perturbs each
/// increment by at most 2^-41, many orders of magnitude below Monte Carlo
/// resolution.
pub const INCREMENT_QUANTUM: f64 = 1.0 / (1u64 << 40) as f64;

#[inline]
pub(crate) fn quantize(v: f64) -> f64 {
    (v * (1u64 << 40) as f64).round() * INCREMENT_QUANTUM
}
