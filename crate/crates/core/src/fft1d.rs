//! Serial radix-2 FFT with reusable plans.
//!
//! Iterative decimation-in-time Cooley–Tukey: bit-reversal permutation,
//! then `log2 n` butterfly stages. Twiddles for every stage are taken from
//! one root-of-unity table at plan time. Both directions are unnormalized.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::tensor::{complex_mul, ComplexSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// `exp(-2πi·jk/n)` kernel.
    Forward,
    /// `exp(+2πi·jk/n)` kernel.
    Backward,
}

impl Direction {
    #[inline]
    fn sign(self) -> f64 {
        match self {
            Direction::Forward => -1.0,
            Direction::Backward => 1.0,
        }
    }

    pub fn inverse(self) -> Direction {
        match self {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        }
    }
}

/// `exp(sign·2πi·k/n)`, exact on the real and imaginary axes.
fn unit_root(k: usize, n: usize, direction: Direction) -> ComplexSample {
    let k = k % n;
    let sign = direction.sign();
    if k == 0 {
        return ComplexSample::new(1.0, 0.0);
    }
    if 2 * k == n {
        return ComplexSample::new(-1.0, 0.0);
    }
    if 4 * k == n {
        return ComplexSample::new(0.0, sign);
    }
    if 4 * k == 3 * n {
        return ComplexSample::new(0.0, -sign);
    }
    let (s, c) = (2.0 * PI * k as f64 / n as f64).sin_cos();
    ComplexSample::new(c, sign * s)
}

/// Precomputed tables for length-`n` transforms in one direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan1D {
    n: usize,
    direction: Direction,
    /// Stage tables back to back: stage with span `m` holds `m/2` entries
    /// `exp(∓2πi·k/m)`; `n - 1` entries in total.
    twiddles: Vec<ComplexSample>,
    bitrev: Vec<usize>,
}

impl Plan1D {
    pub fn new(n: usize, direction: Direction) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::InvalidSize(format!(
                "FFT length {n} is not a power of two"
            )));
        }
        let bits = n.trailing_zeros();
        let bitrev = (0..n)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
            .collect();

        let base: Vec<ComplexSample> = (0..n / 2).map(|k| unit_root(k, n, direction)).collect();
        let mut twiddles = Vec::with_capacity(n.saturating_sub(1));
        let mut m = 2;
        while m <= n {
            let stride = n / m;
            twiddles.extend((0..m / 2).map(|k| base[k * stride]));
            m <<= 1;
        }
        Ok(Plan1D {
            n,
            direction,
            twiddles,
            bitrev,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn twiddles(&self) -> &[ComplexSample] {
        &self.twiddles
    }

    pub fn bitrev(&self) -> &[usize] {
        &self.bitrev
    }

    /// Transforms one contiguous line of length `n` in place.
    pub fn execute(&self, line: &mut [ComplexSample]) {
        debug_assert_eq!(line.len(), self.n);
        let n = self.n;
        for (i, &j) in self.bitrev.iter().enumerate() {
            if i < j {
                line.swap(i, j);
            }
        }
        let mut half = 1;
        let mut offset = 0;
        while half < n {
            let span = half * 2;
            let w = &self.twiddles[offset..offset + half];
            for group in line.chunks_exact_mut(span) {
                let (lo, hi) = group.split_at_mut(half);
                for ((a, b), &tw) in lo.iter_mut().zip(hi.iter_mut()).zip(w) {
                    let t = complex_mul(tw, *b);
                    let u = *a;
                    *a = u + t;
                    *b = u - t;
                }
            }
            offset += half;
            half = span;
        }
    }
}

/// Transforms `num_lines` contiguous lines of `plan.len()` samples each.
pub fn fft_batch(plan: &Plan1D, buffer: &mut [ComplexSample], num_lines: usize) -> Result<()> {
    if buffer.len() != plan.len() * num_lines {
        return Err(Error::ShapeMismatch(format!(
            "batch buffer has {} samples, expected {} lines of {}",
            buffer.len(),
            num_lines,
            plan.len()
        )));
    }
    if plan.len() == 1 {
        return Ok(());
    }
    for line in buffer.chunks_exact_mut(plan.len()) {
        plan.execute(line);
    }
    Ok(())
}

/// Direct `O(n²)` DFT of any length, unnormalized in both directions.
pub fn dft_oracle(line: &[ComplexSample], direction: Direction) -> Vec<ComplexSample> {
    let n = line.len();
    let sign = direction.sign();
    (0..n)
        .map(|k| {
            line.iter().enumerate().fold(ComplexSample::new(0.0, 0.0), |acc, (j, &x)| {
                // reduce jk mod n first so the angle stays small
                let phase = 2.0 * PI * ((j * k) % n) as f64 / n as f64;
                let (s, c) = phase.sin_cos();
                acc + complex_mul(x, ComplexSample::new(c, sign * s))
            })
        })
        .collect()
}
