//! Seeded random streams. Every stochastic routine takes an explicit seed and
//! builds its own generator, so results never depend on call order elsewhere.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive an independent sub-seed for a numbered stream (splitmix64 mix).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Uniform sample in the disc of radius `a` centred at the origin.
pub fn uniform_in_disc<R: Rng + ?Sized>(rng: &mut R, a: f64) -> [f64; 2] {
    let r = a * libm::sqrt(rng.random::<f64>());
    let t = 2.0 * core::f64::consts::PI * rng.random::<f64>();
    [r * libm::cos(t), r * libm::sin(t)]
}

/// Uniform sample in the ball of radius `a` in `dim` dimensions (1..=3),
/// written into `out`.
pub fn uniform_in_ball<R: Rng + ?Sized>(rng: &mut R, a: f64, out: &mut [f64]) {
    loop {
        for v in out.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        if out.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
            break;
        }
    }
    for v in out.iter_mut() {
        *v *= a;
    }
}
