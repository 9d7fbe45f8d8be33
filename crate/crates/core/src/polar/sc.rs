//! Successive cancellation decoding.

use super::PolarCodeSpec;
use crate::error::{invalid, Result};

/// Check-node update `log((1 + e^(a+b)) / (e^a + e^b))` in its overflow-free
/// form: the min-sum term plus two exact correction terms.
#[inline]
pub fn f_op(a: f64, b: f64) -> f64 {
    let min = a.abs().min(b.abs());
    let signed = if (a < 0.0) != (b < 0.0) { -min } else { min };
    signed + (-(a + b).abs()).exp().ln_1p() - (-(a - b).abs()).exp().ln_1p()
}

/// Variable-node update `b + (1 - 2u) a`.
#[inline]
pub fn g_op(a: f64, b: f64, u: u8) -> f64 {
    if u & 1 == 0 {
        b + a
    } else {
        b - a
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScOutput {
    /// All u-domain decisions; frozen positions are 0.
    pub u_hat: Vec<u8>,
    /// Bits at the information set, ascending index order.
    pub message: Vec<u8>,
}

/// SC decoding. Monitor positions are decided from their LLRs like
/// information bits and reported in `u_hat`.
pub fn sc_decode(spec: &PolarCodeSpec, llrs: &[f64]) -> Result<ScOutput> {
    sc_decode_traced(spec, llrs).map(|(out, _)| out)
}

/// SC decoding that also returns the decision-level LLR of every u index.
pub fn sc_decode_traced(spec: &PolarCodeSpec, llrs: &[f64]) -> Result<(ScOutput, Vec<f64>)> {
    let n = spec.length();
    if llrs.len() != n {
        return invalid(format!("expected {n} LLRs, got {}", llrs.len()));
    }
    let decoded = spec.decoded_mask();
    let mut u = vec![0u8; n];
    let mut x = vec![0u8; n];
    let mut trace = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    node(llrs, &decoded, &mut u, &mut x, &mut trace, &mut scratch);
    let message = spec.extract_info(&u);
    Ok((ScOutput { u_hat: u, message }, trace))
}

/// Decodes one subtree. `x` receives the re-encoded partial codeword.
fn node(
    llr: &[f64],
    decoded: &[bool],
    u: &mut [u8],
    x: &mut [u8],
    trace: &mut [f64],
    scratch: &mut [f64],
) {
    let n = llr.len();
    if n == 1 {
        trace[0] = llr[0];
        let bit = u8::from(decoded[0] && llr[0] < 0.0);
        u[0] = bit;
        x[0] = bit;
        return;
    }
    let h = n / 2;
    let (child, rest) = scratch.split_at_mut(h);
    for i in 0..h {
        child[i] = f_op(llr[i], llr[i + h]);
    }
    let (xl, xr) = x.split_at_mut(h);
    let (ul, ur) = u.split_at_mut(h);
    let (tl, tr) = trace.split_at_mut(h);
    node(child, &decoded[..h], ul, xl, tl, rest);
    for i in 0..h {
        child[i] = g_op(llr[i], llr[i + h], xl[i]);
    }
    node(child, &decoded[h..], ur, xr, tr, rest);
    for i in 0..h {
        xl[i] ^= xr[i];
    }
}
