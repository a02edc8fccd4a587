//! Poisson photon-count noise on Fourier magnitudes.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::operator::MaskedFourierOperator;
use crate::signal::{unit_uniform, ComplexImage, ObservationVector};

/// Means at or above this use the rounded Gaussian approximation.
pub const GAUSSIAN_THRESHOLD: f64 = 30.0;

/// One Poisson draw: inversion below [`GAUSSIAN_THRESHOLD`], otherwise
/// `round(λ + √λ z)` clamped at zero.
pub fn sample_poisson<R: RngCore>(rng: &mut R, lambda: f64) -> f64 {
    if !(lambda > 0.0) {
        return 0.0;
    }
    if lambda >= GAUSSIAN_THRESHOLD {
        let z: f64 = rng.sample(StandardNormal);
        return (lambda + lambda.sqrt() * z).round().max(0.0);
    }
    let u = unit_uniform(rng);
    let mut k = 0.0;
    let mut p = (-lambda).exp();
    let mut cdf = p;
    while u > cdf && p > 0.0 {
        k += 1.0;
        p *= lambda / k;
        cdf += p;
    }
    k
}

/// `b_clean = |A x|` and, for `α > 0`, `b_i = sqrt(α · Poisson(b_clean_i² / α))`.
pub fn simulate_observations(
    op: &MaskedFourierOperator,
    x: &ComplexImage,
    alpha: f64,
    seed: u64,
) -> Result<(ObservationVector, ObservationVector)> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("noise level {alpha} must be finite and ≥ 0")));
    }
    let y = op.apply_a(x)?;
    let clean: Vec<f64> = y.iter().map(|z| z.norm()).collect();
    let noisy = if alpha == 0.0 {
        clean.clone()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        clean
            .iter()
            .map(|&b| (alpha * sample_poisson(&mut rng, b * b / alpha)).max(0.0).sqrt())
            .collect()
    };
    let (k, l) = (op.mask_count(), op.grid_side());
    Ok((ObservationVector::new(noisy, k, l)?, ObservationVector::new(clean, k, l)?))
}
