//! Gray-labelled square QAM, the BICM bit interleaver and the exact
//! log-sum-exp soft demapper.
//!
//! A symbol's bit group `(b_0, ..., b_{n-1})` selects the point with label
//! `sum b_j 2^j`. Even-numbered bits drive the in-phase axis and odd-numbered
//! bits the quadrature axis; within each axis the first bit is the sign and
//! later bits refine the amplitude, giving a per-axis Gray code.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::saturate;

/// Seed of the default BICM interleaver.
pub const DEFAULT_BICM_SEED: u64 = 0x5EED;

#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    order: usize,
    bits: usize,
    points: Vec<Complex64>,
}

impl Constellation {
    pub fn new(order: usize) -> Result<Self> {
        let scale: f64 = match order {
            4 => 2.0,
            16 => 10.0,
            64 => 42.0,
            _ => return invalid(format!("unsupported modulation order {order}")),
        };
        let bits = order.trailing_zeros() as usize;
        let norm = scale.sqrt();
        let points = (0..order)
            .map(|label| {
                let i_bits: Vec<u8> = (0..bits).step_by(2).map(|k| ((label >> k) & 1) as u8).collect();
                let q_bits: Vec<u8> = (1..bits).step_by(2).map(|k| ((label >> k) & 1) as u8).collect();
                Complex64::new(axis_level(&i_bits) / norm, axis_level(&q_bits) / norm)
            })
            .collect();
        Ok(Self { order, bits, points })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits
    }

    /// Points indexed by label.
    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn point(&self, bits: &[u8]) -> Complex64 {
        let label = bits
            .iter()
            .enumerate()
            .fold(0usize, |acc, (j, &b)| acc | (usize::from(b & 1) << j));
        self.points[label]
    }
}

/// Odd amplitude level of one axis from its (sign, refinement...) bits.
fn axis_level(bits: &[u8]) -> f64 {
    let s = |b: u8| 1.0 - 2.0 * f64::from(b);
    match bits.len() {
        1 => s(bits[0]),
        2 => s(bits[0]) * (2.0 - s(bits[1])),
        3 => s(bits[0]) * (4.0 - s(bits[1]) * (2.0 - s(bits[2]))),
        _ => unreachable!("orders above 64 are rejected"),
    }
}

pub fn build_constellation(order: usize) -> Result<Constellation> {
    Constellation::new(order)
}

/// Maps consecutive `n_s`-bit groups to constellation points.
pub fn map_symbols(bits: &[u8], c: &Constellation) -> Result<Vec<Complex64>> {
    let n = c.bits_per_symbol();
    if !bits.len().is_multiple_of(n) {
        return invalid(format!("{} bits do not fill {}-bit symbols", bits.len(), n));
    }
    Ok(bits.chunks_exact(n).map(|g| c.point(g)).collect())
}

/// Exact bit LLRs `log P(b=0|y) / P(b=1|y)` for one received sample.
pub fn demap_llr(y: Complex64, h_hat: Complex64, sigma_eff2: f64, c: &Constellation) -> Vec<f64> {
    let mut out = vec![0.0; c.bits_per_symbol()];
    Demapper::new(c, h_hat, sigma_eff2).demap_into(y, &mut out);
    out
}

/// Demapper bound to one channel estimate; reuses the scaled points.
pub struct Demapper<'a> {
    c: &'a Constellation,
    scaled: Vec<Complex64>,
    inv_var: f64,
    metric: Vec<f64>,
}

impl<'a> Demapper<'a> {
    pub fn new(c: &'a Constellation, h_hat: Complex64, sigma_eff2: f64) -> Self {
        Self {
            c,
            scaled: c.points().iter().map(|&x| h_hat * x).collect(),
            // A zero variance still yields finite, saturated LLRs.
            inv_var: 1.0 / sigma_eff2.max(f64::MIN_POSITIVE),
            metric: vec![0.0; c.order()],
        }
    }

    pub fn demap_into(&mut self, y: Complex64, out: &mut [f64]) {
        for (m, &hx) in self.metric.iter_mut().zip(&self.scaled) {
            *m = -(y - hx).norm_sqr() * self.inv_var;
        }
        for (k, o) in out.iter_mut().enumerate().take(self.c.bits_per_symbol()) {
            let mut max0 = f64::NEG_INFINITY;
            let mut max1 = f64::NEG_INFINITY;
            for (label, &m) in self.metric.iter().enumerate() {
                if (label >> k) & 1 == 0 {
                    max0 = max0.max(m);
                } else {
                    max1 = max1.max(m);
                }
            }
            let (mut s0, mut s1) = (0.0, 0.0);
            for (label, &m) in self.metric.iter().enumerate() {
                if m == f64::NEG_INFINITY {
                    continue;
                }
                if (label >> k) & 1 == 0 {
                    s0 += (m - max0).exp();
                } else {
                    s1 += (m - max1).exp();
                }
            }
            let lse = |max: f64, s: f64| if max.is_finite() { max + s.ln() } else { max };
            *o = saturate(lse(max0, s0) - lse(max1, s1));
        }
    }

    /// Demaps a block, appending `n_s` LLRs per sample.
    pub fn demap_block(&mut self, ys: &[Complex64], out: &mut Vec<f64>) {
        let n = self.c.bits_per_symbol();
        let start = out.len();
        out.resize(start + n * ys.len(), 0.0);
        for (i, &y) in ys.iter().enumerate() {
            let slot = start + i * n;
            let mut tmp = [0.0; 6];
            self.demap_into(y, &mut tmp[..n]);
            out[slot..slot + n].copy_from_slice(&tmp[..n]);
        }
    }
}

/// Fixed bit permutation between the data codeword and the QAM mapper.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BicmInterleaver {
    /// Gather map: `out[i] = in[perm[i]]`.
    perm: Vec<usize>,
}

impl BicmInterleaver {
    /// Uniform permutation by Fisher-Yates driven by ChaCha8 seeded with `seed`.
    pub fn seeded(len: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut perm: Vec<usize> = (0..len).collect();
        for i in (1..len).rev() {
            let j = rng.random_range(0..=i as u64) as usize;
            perm.swap(i, j);
        }
        Self { perm }
    }

    pub fn identity(len: usize) -> Self {
        Self {
            perm: (0..len).collect(),
        }
    }

    /// Seeded permutation, or the identity when `seed` is `None`.
    pub fn from_seed(len: usize, seed: Option<u64>) -> Self {
        match seed {
            Some(s) => Self::seeded(len, s),
            None => Self::identity(len),
        }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn interleave<T: Copy>(&self, bits: &[T]) -> Vec<T> {
        assert_eq!(bits.len(), self.perm.len(), "interleaver length mismatch");
        self.perm.iter().map(|&p| bits[p]).collect()
    }

    pub fn deinterleave<T: Copy + Default>(&self, bits: &[T]) -> Vec<T> {
        assert_eq!(bits.len(), self.perm.len(), "interleaver length mismatch");
        let mut out = vec![T::default(); bits.len()];
        for (i, &p) in self.perm.iter().enumerate() {
            out[p] = bits[i];
        }
        out
    }
}
