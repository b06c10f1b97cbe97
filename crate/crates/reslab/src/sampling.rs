//! Seeded sampling helpers. ChaCha is used throughout for cross-platform
//! determinism.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fields::Vector;

pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard normal via Box-Muller.
pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        if u1 > f64::MIN_POSITIVE {
            return (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        }
    }
}

pub fn normal_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vector {
    Vector::from_fn(dim, |_, _| standard_normal(rng))
}

/// Uniform sample in the ball of given radius: normalized Gaussian direction
/// times U^(1/d) radius.
pub fn sample_ball(rng: &mut ChaCha8Rng, center: &Vector, radius: f64) -> Vector {
    let d = center.len();
    let mut dir = normal_vector(rng, d);
    let norm = dir.norm();
    if norm == 0.0 {
        return center.clone();
    }
    dir /= norm;
    let u: f64 = rng.random();
    let r = radius * u.powf(1.0 / d as f64);
    center + dir * r
}

/// Uniform sample in the annulus r in [r_lo, r_hi] (uniform in radius and
/// angle direction, which is what the set-convergence studies want: coverage
/// of all approach angles).
pub fn sample_annulus(rng: &mut ChaCha8Rng, dim: usize, r_lo: f64, r_hi: f64) -> Vector {
    let mut dir = normal_vector(rng, dim);
    let norm = dir.norm();
    if norm == 0.0 {
        dir = Vector::from_fn(dim, |i, _| if i == 0 { 1.0 } else { 0.0 });
    } else {
        dir /= norm;
    }
    let r = rng.random_range(r_lo..=r_hi);
    dir * r
}
