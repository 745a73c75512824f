//! Random streams and Poisson sampling.
//!
//! Every path draws from its own ChaCha8 stream: the key comes from the run seed and the
//! 64-bit stream id from the path index. ChaCha is a counter-mode generator, so a path's
//! draws depend only on `(seed, path)` and never on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};

/// Stream ids at or above this are reserved for pre-flight pilot paths.
pub(crate) const PILOT_STREAM_BASE: u64 = 1 << 63;

/// Means below this use sequential inversion; larger ones use `rand_distr`'s rejection sampler.
const INVERSION_LIMIT: f64 = 10.0;

pub fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

/// Exact Poisson draw with the given mean. A negative mean is an error, never clamped.
pub fn sample_poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> Result<u64> {
    if mean < 0.0 {
        return Err(Error::NegativeRate { rate: mean });
    }
    if !mean.is_finite() {
        return Err(Error::invalid(
            "mean",
            format!("Poisson mean must be finite, got {mean}"),
        ));
    }
    if mean == 0.0 {
        return Ok(0);
    }
    if mean < INVERSION_LIMIT {
        let u: f64 = rng.random();
        let mut k = 0u64;
        let mut p = (-mean).exp();
        let mut cum = p;
        while u >= cum && p > 0.0 {
            k += 1;
            p *= mean / k as f64;
            cum += p;
        }
        return Ok(k);
    }
    let law = Poisson::new(mean).map_err(|e| Error::invalid("mean", e.to_string()))?;
    Ok(law.sample(rng) as u64)
}
