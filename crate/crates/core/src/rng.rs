//! Seedable randomness for every stochastic operation.
//!
//! The generator is ChaCha8, a counter-based stream cipher RNG. Each seeded
//! operation derives task `k` (bootstrap replica, pseudo-experiment, or
//! calibration column) from stream `k` of the seeded cipher, so tasks are
//! independent of each other and of execution order: running replicas in
//! parallel draws exactly the numbers a sequential run would.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};

/// RNG for task `stream` of the operation seeded with `seed`.
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stateless sub-seed for component `domain`, slot `index` of an operation.
/// SplitMix64 finalizer over the mixed words.
pub(crate) fn derive_seed(seed: u64, domain: u64, index: u64) -> u64 {
    let mut z = seed
        ^ domain.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ index.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One multinomial draw of `trials` over `probs` (non-negative weights; the
/// draw conditions on remaining mass, so an unnormalized vector is fine).
/// The returned counts always sum to exactly `trials`.
pub(crate) fn multinomial<R: Rng>(rng: &mut R, trials: u64, probs: &[f64]) -> Vec<u64> {
    let k = probs.len();
    let mut out = vec![0u64; k];
    if trials == 0 || k == 0 {
        return out;
    }
    // Suffix sums give the conditional success probability of each bucket.
    let mut suffix = vec![0.0; k + 1];
    for i in (0..k).rev() {
        suffix[i] = suffix[i + 1] + probs[i].max(0.0);
    }
    let mut remaining = trials;
    for i in 0..k {
        if remaining == 0 {
            break;
        }
        if i == k - 1 {
            out[i] = remaining;
            break;
        }
        if suffix[i] <= 0.0 {
            // No mass left; nothing more to place.
            break;
        }
        let p = (probs[i].max(0.0) / suffix[i]).clamp(0.0, 1.0);
        let draw = if p >= 1.0 {
            remaining
        } else if p <= 0.0 {
            0
        } else {
            Binomial::new(remaining, p)
                .expect("p is in (0, 1)")
                .sample(rng)
        };
        out[i] = draw;
        remaining -= draw;
    }
    out
}

/// One Poisson draw with the given mean; a mean of zero draws zero.
pub(crate) fn poisson_u64<R: Rng>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("mean is positive").sample(rng) as u64
}
