//! Seeded, random-access test input.
//!
//! Samples come from a splitmix64 stream. Because splitmix64 advances its
//! state by a fixed increment, output `k` can be computed directly, so every
//! rank can generate its own block of a global random tensor without
//! materializing the rest.

use crate::tensor::{AxisOrder, ComplexSample, Tensor3, TensorDims};

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The `k`-th output of a splitmix64 generator seeded with `seed`.
#[inline]
pub fn splitmix64_at(seed: u64, k: u64) -> u64 {
    mix(seed.wrapping_add(k.wrapping_add(1).wrapping_mul(GAMMA)))
}

/// Sequential splitmix64 generator.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        mix(self.state)
    }

    /// Uniform in `[-1, 1)`.
    pub fn next_signed_unit(&mut self) -> f64 {
        to_signed_unit(self.next_u64())
    }

    pub fn next_complex(&mut self) -> ComplexSample {
        let re = self.next_signed_unit();
        ComplexSample::new(re, self.next_signed_unit())
    }
}

#[inline]
fn to_signed_unit(bits: u64) -> f64 {
    // 53 random mantissa bits -> [0, 1), then affine to [-1, 1)
    let unit = (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    2.0 * unit - 1.0
}

/// Sample at global X-fastest offset `index` of the random tensor for `seed`.
#[inline]
pub fn random_sample(seed: u64, index: u64) -> ComplexSample {
    ComplexSample::new(
        to_signed_unit(splitmix64_at(seed, 2 * index)),
        to_signed_unit(splitmix64_at(seed, 2 * index + 1)),
    )
}

/// Value of the seeded random global tensor at global coordinates.
#[inline]
pub fn random_at(dims: TensorDims, seed: u64, [i, j, k]: [usize; 3]) -> ComplexSample {
    random_sample(seed, (i + dims.nx * (j + dims.ny * k)) as u64)
}

/// Whole seeded random tensor, X fastest. Components uniform in `[-1, 1)`.
pub fn random_tensor(dims: TensorDims, seed: u64) -> Tensor3 {
    Tensor3::from_fn(dims.as_array(), AxisOrder::XYZ, |c| random_at(dims, seed, c))
}
