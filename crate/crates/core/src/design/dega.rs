//! Density evolution under the Gaussian approximation.
//!
//! LLRs are modeled as `N(mu, 2 mu)`; only the means are tracked. The check
//! update works on `1 - psi(mu)` so that very reliable channels keep their
//! resolution.

use statrs::function::erf::erfc;
use std::f64::consts::{PI, SQRT_2};

use crate::error::{invalid, Result};
use crate::polar::PolarCodeSpec;
use crate::rate_match::{RateMatchMode, RateMatchSpec};
use crate::LLR_MAX;

/// Where the two branches of the psi approximation cross. The printed
/// switch at 10 leaves a downward jump; switching here keeps psi continuous
/// and increasing.
pub const PSI_BRANCH_SWITCH: f64 = 14.394_352_942_168_423;

const PSI_INV_LO: f64 = 1e-12;
const PSI_INV_HI: f64 = 1e6;

fn tail_low(x: f64) -> f64 {
    (-0.4527 * x.powf(0.86) + 0.0218).exp()
}

fn tail_high(x: f64) -> f64 {
    (PI / x).sqrt() * (1.0 - 10.0 / (7.0 * x)) * (-x / 4.0).exp()
}

/// `1 - psi(mu)`, clamped to `(0, 1]`.
pub fn psi_tail(mu: f64) -> f64 {
    if mu <= 0.0 {
        1.0
    } else if mu <= PSI_BRANCH_SWITCH {
        tail_low(mu).min(1.0)
    } else {
        tail_high(mu)
    }
}

/// `psi(mu) = E[tanh(X / 2)]`, `X ~ N(mu, 2 mu)`, clamped to `[0, 1)`.
pub fn psi(mu: f64) -> f64 {
    (1.0 - psi_tail(mu)).min(1.0 - f64::EPSILON / 2.0)
}

/// Inverse of [`psi_tail`]. The lower branch inverts in closed form; the
/// upper branch by bisection to `1e-9`.
pub fn psi_tail_inv(t: f64) -> f64 {
    if t >= 1.0 {
        return 0.0;
    }
    if t <= 0.0 {
        return f64::INFINITY;
    }
    if t >= tail_low(PSI_BRANCH_SWITCH) {
        return ((0.0218 - t.ln()) / 0.4527).powf(1.0 / 0.86);
    }
    let (mut lo, mut hi) = (PSI_BRANCH_SWITCH, PSI_INV_HI);
    if tail_high(hi) >= t {
        return hi;
    }
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if tail_high(mid) > t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Inverse of [`psi`] on `[0, 1)`, searched over `[1e-12, 1e6]`.
pub fn psi_inv(v: f64) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    psi_tail_inv(1.0 - v).clamp(PSI_INV_LO, PSI_INV_HI)
}

/// Mean of the check-node output `psi^-1(psi(a) psi(b))`.
pub fn check_mean(a: f64, b: f64) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        return 0.0;
    }
    let (ta, tb) = (psi_tail(a), psi_tail(b));
    psi_tail_inv(ta + tb - ta * tb).min(a.min(b))
}

/// Evolves codeword-bit LLR means to decision-level means per u index.
pub fn dega_evolve(initial: &[f64]) -> Result<Vec<f64>> {
    let n = initial.len();
    if !n.is_power_of_two() {
        return invalid(format!("length {n} is not a power of two"));
    }
    if initial.iter().any(|&m| m.is_nan() || m < 0.0) {
        return invalid("initial means must be non-negative");
    }
    let mut mu = initial.to_vec();
    let mut half = n / 2;
    while half >= 1 {
        for block in mu.chunks_mut(2 * half) {
            let (upper, lower) = block.split_at_mut(half);
            for (a, b) in upper.iter_mut().zip(lower.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = check_mean(x, y);
                *b = x + y;
            }
        }
        half /= 2;
    }
    Ok(mu)
}

/// Mother-codeword initial means from the means of the transmitted bits.
/// Punctured bits start at 0, shortened bits at `2 * LLR_MAX`, repeated bits
/// accumulate.
pub fn mother_means(rm: &RateMatchSpec, transmitted: &[f64]) -> Result<Vec<f64>> {
    if transmitted.len() != rm.target_length {
        return invalid("one mean per transmitted bit is required");
    }
    let perm = rm.permutation();
    let mut out = vec![0.0; rm.mother_length];
    if rm.mode == RateMatchMode::Shorten {
        for &i in &perm[rm.target_length..] {
            out[i] = 2.0 * LLR_MAX;
        }
    }
    for (t, &m) in transmitted.iter().enumerate() {
        out[rm.source_index(&perm, t)] += m;
    }
    Ok(out)
}

/// Picks the `k` indices with the largest means, ties toward the larger
/// index, skipping `forced_frozen` and, for coded pilots, the monitor pair.
pub fn construct_code(
    means: &[f64],
    k: usize,
    monitor_required: bool,
    forced_frozen: &[usize],
    crc_length: usize,
) -> Result<PolarCodeSpec> {
    let n = means.len();
    let order = reliability_order(means, monitor_required, forced_frozen);
    if k > order.len() {
        return invalid(format!(
            "{k} information bits exceed the {} usable positions",
            order.len()
        ));
    }
    let mut info = order[..k].to_vec();
    info.sort_unstable();
    let spec = PolarCodeSpec::new(n, info, Vec::new(), crc_length)?;
    if monitor_required {
        spec.with_monitors()
    } else {
        Ok(spec)
    }
}

/// Usable indices, most reliable first.
pub fn reliability_order(
    means: &[f64],
    monitor_required: bool,
    forced_frozen: &[usize],
) -> Vec<usize> {
    let n = means.len();
    let mut usable: Vec<usize> = (0..n)
        .filter(|i| !forced_frozen.contains(i))
        .filter(|&i| !(monitor_required && i + 2 >= n))
        .collect();
    usable.sort_by(|&a, &b| means[b].total_cmp(&means[a]).then(b.cmp(&a)));
    usable
}

/// Gaussian tail probability.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// Error probability of one decision with LLR mean `mu`.
pub fn bit_error(mu: f64) -> f64 {
    q_function((mu / 2.0).sqrt())
}

/// `1 - prod (1 - Q(sqrt(mu_i / 2)))` over the information and monitor set.
pub fn dega_block_error(spec: &PolarCodeSpec, means: &[f64]) -> Result<f64> {
    if means.len() != spec.length() {
        return invalid("profile length differs from the code length");
    }
    let tracked = spec.info_set().iter().chain(spec.monitor_set());
    Ok(1.0 - tracked.map(|&i| (-bit_error(means[i])).ln_1p()).sum::<f64>().exp())
}

/// `P(K)` for every `K` along a reliability order: entry `k` is the error
/// probability when the first `k` indices carry information, plus `extra`
/// always-tracked indices.
pub fn error_by_size(means: &[f64], order: &[usize], extra: &[usize]) -> Vec<f64> {
    let base: f64 = extra.iter().map(|&i| (-bit_error(means[i])).ln_1p()).sum();
    let mut acc = base;
    let mut out = Vec::with_capacity(order.len() + 1);
    out.push(1.0 - acc.exp());
    for &i in order {
        acc += (-bit_error(means[i])).ln_1p();
        out.push(1.0 - acc.exp());
    }
    out
}

/// `1 - prod (1 - P_b)`.
pub fn overall_error(components: &[f64]) -> Result<f64> {
    if components.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return invalid("probabilities must lie in [0, 1]");
    }
    Ok(1.0 - components.iter().map(|p| 1.0 - p).product::<f64>())
}
