//! Counter-based random streams.
//!
//! All randomness in the crate flows through [`ChainRng`], a ChaCha8 generator.
//! A master seed plus a stream index identifies an independent stream, so each
//! chain (or probe) owns its generator and results do not depend on scheduling.
//! Gaussian variates use the ziggurat sampler from `rand_distr`.

use nalgebra::DVector;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type ChainRng = ChaCha8Rng;

/// Generator for stream `stream` under the master `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChainRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws a fresh master seed from `rng`, used to fan out per-probe streams.
pub fn derive_seed<R: RngCore + ?Sized>(rng: &mut R) -> u64 {
    rng.next_u64()
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn standard_normal_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| rng.sample(StandardNormal))
}
