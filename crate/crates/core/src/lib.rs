//! Pilot-free polar-coded modulation for short packets over block-fading
//! channels.
//!
//! A packet is split into one higher-order QAM component and `B` QPSK
//! "coded-pilot" components, one per fading block. The receiver decodes each
//! coded pilot blindly (magnitude and fourth-power phase estimation, with the
//! residual multiple of pi/2 resolved through two monitored frozen bits),
//! re-encodes it into an implicit pilot sequence, and then decodes the QAM
//! component coherently. A conventional pilot-aided scheme is provided as a
//! baseline, along with a density-evolution code designer and a Monte Carlo
//! harness.
//!
//! Module map:
//! - [`polar`]: transform, encoding, SC/SCL decoding, CRC-11.
//! - [`rate_match`]: sub-block interleaving, puncturing, shortening, repetition.
//! - [`modem`]: Gray QAM constellations, BICM interleaver, exact soft demapper.
//! - [`channel`]: block-fading AWGN channel and the counter-based RNG contract.
//! - [`tx`]: code-splitting and pilot-aided transmitters.
//! - [`blind`]: blind estimation and decoding of one coded-pilot block.
//! - [`rx`]: hybrid and pilot-aided packet receivers.
//! - [`design`]: BICM/BI-AWGN matching, DEGA, and split optimization.
//! - [`sim`]: campaign configuration, Monte Carlo runner, CSV output.

pub mod blind;
pub mod channel;
pub mod design;
mod error;
pub mod modem;
pub mod polar;
pub mod rate_match;
pub mod rx;
pub mod sim;
pub mod tx;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// LLR saturation magnitude (natural-log domain).
///
/// Used for noiseless and shortened positions. Large enough to act as
/// infinity for every decision, small enough that `exp(-LLR_MAX)` stays a
/// normal double.
pub const LLR_MAX: f64 = 300.0;

/// Clamps an LLR into `[-LLR_MAX, LLR_MAX]`; NaN maps to 0 (no information).
#[inline]
pub fn saturate(llr: f64) -> f64 {
    if llr.is_nan() {
        0.0
    } else {
        llr.clamp(-LLR_MAX, LLR_MAX)
    }
}
