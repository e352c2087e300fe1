//! Diffuse-field coherence: synthesis of `Γ(ω) = sinc(ωd/c)` curves and
//! least-squares distance fitting with reliability gating.

use alloc::vec::Vec;
use core::f64::consts::PI;
use nalgebra::DMatrix;

use crate::error::{invalid, Result};
use crate::geometry::{pairwise_distances, PositionMatrix};
use crate::observation::{observe, ObservationMask, ObservedMatrix, SPEED_OF_SOUND};
use crate::rng::{derive_seed, seeded, standard_normal};

/// Distances below this are treated as a degenerate (coincident) fit.
pub const DEGENERATE_DISTANCE: f64 = 1e-3;

const COARSE_STEP: f64 = 1e-3;

/// `sin x / x`, equal to 1 at the origin.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        libm::sin(x) / x
    }
}

/// Angular-frequency grid of FFT bins `k · fs / frame` between `f_lo` and
/// `f_hi` hertz (inclusive), in rad/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyBand {
    pub f_lo: f64,
    pub f_hi: f64,
    pub sample_rate: f64,
    pub frame_len: usize,
}

impl Default for FrequencyBand {
    fn default() -> Self {
        Self {
            f_lo: 100.0,
            f_hi: 4000.0,
            sample_rate: 16_000.0,
            frame_len: 1024,
        }
    }
}

impl FrequencyBand {
    pub fn grid(&self) -> Result<Vec<f64>> {
        if !(self.sample_rate > 0.0) || self.frame_len == 0 {
            return Err(invalid("sample_rate", "sample rate and frame length must be positive"));
        }
        if !(self.f_lo >= 0.0 && self.f_hi.is_finite()) {
            return Err(invalid("f_lo", "band edges must be finite and non-negative"));
        }
        let bin = self.sample_rate / self.frame_len as f64;
        let first = libm::ceil(self.f_lo / bin) as usize;
        let last = libm::floor(self.f_hi / bin + 1e-9) as usize;
        Ok((first.max(1)..=last).map(|k| 2.0 * PI * bin * k as f64).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceCurve {
    omega: Vec<f64>,
    gamma: Vec<f64>,
    speed_of_sound: f64,
}

impl CoherenceCurve {
    /// Validates a strictly increasing grid and values in `[−1, 1]`.
    pub fn new(omega: Vec<f64>, gamma: Vec<f64>, speed_of_sound: f64) -> Result<Self> {
        if omega.len() != gamma.len() {
            return Err(invalid("gamma", "must have one value per frequency"));
        }
        if !(speed_of_sound > 0.0 && speed_of_sound.is_finite()) {
            return Err(invalid("speed_of_sound", "must be positive"));
        }
        if omega.iter().any(|w| !w.is_finite()) || omega.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("omega", "must be finite and strictly increasing"));
        }
        if gamma.iter().any(|g| !(-1.0..=1.0).contains(g)) {
            return Err(invalid("gamma", "must lie in [-1, 1]"));
        }
        Ok(Self {
            omega,
            gamma,
            speed_of_sound,
        })
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn speed_of_sound(&self) -> f64 {
        self.speed_of_sound
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    /// Sum of squared deviations from the model curve for distance `d`.
    pub fn sse(&self, d: f64) -> f64 {
        let k = d / self.speed_of_sound;
        self.omega
            .iter()
            .zip(&self.gamma)
            .map(|(&w, &g)| {
                let r = g - sinc(w * k);
                r * r
            })
            .sum()
    }
}

/// Model coherence for distance `d` plus i.i.d. Gaussian noise, clipped to
/// `[−1, 1]`.
pub fn synthesize_coherence(d: f64, omega: &[f64], noise_std: f64, speed_of_sound: f64, seed: u64) -> Result<CoherenceCurve> {
    if !(d >= 0.0 && d.is_finite()) {
        return Err(invalid("d", "must be finite and non-negative"));
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(invalid("noise_std", "must be finite and non-negative"));
    }
    let mut rng = seeded(seed);
    let gamma = omega
        .iter()
        .map(|&w| {
            let clean = sinc(w * d / speed_of_sound);
            let eps = if noise_std > 0.0 { noise_std * standard_normal(&mut rng) } else { 0.0 };
            (clean + eps).clamp(-1.0, 1.0)
        })
        .collect();
    CoherenceCurve::new(omega.to_vec(), gamma, speed_of_sound)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Upper end of the search interval (m).
    pub d_search_max: f64,
    /// Fits at or beyond this distance are unreliable (m).
    pub cutoff: f64,
    /// Largest RMS residual of a reliable fit.
    pub residual_threshold: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            d_search_max: 1.5,
            cutoff: 0.73,
            residual_threshold: 0.15,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceFit {
    pub distance: f64,
    /// RMS residual over the grid; infinite for an empty curve.
    pub residual: f64,
    pub reliable: bool,
    pub degenerate: bool,
}

/// Least-squares sinc fit: 1 mm grid over `[0, d_search_max]`, then golden
/// section within one grid step of the best node.
pub fn fit_distance(curve: &CoherenceCurve, opts: &FitOptions) -> Result<DistanceFit> {
    if !(opts.d_search_max > 0.0 && opts.d_search_max.is_finite()) {
        return Err(invalid("d_search_max", "must be positive"));
    }
    if curve.is_empty() {
        return Ok(DistanceFit {
            distance: 0.0,
            residual: f64::INFINITY,
            reliable: false,
            degenerate: true,
        });
    }
    let steps = libm::ceil(opts.d_search_max / COARSE_STEP) as usize;
    let mut best = (0.0, curve.sse(0.0));
    for k in 1..=steps {
        let d = (k as f64 * COARSE_STEP).min(opts.d_search_max);
        let c = curve.sse(d);
        if c < best.1 {
            best = (d, c);
        }
    }
    let lo = (best.0 - COARSE_STEP).max(0.0);
    let hi = (best.0 + COARSE_STEP).min(opts.d_search_max);
    let (d, sse) = golden_section(|d| curve.sse(d), lo, hi, 1e-9);
    let (distance, sse) = if sse <= best.1 { (d, sse) } else { best };
    let residual = libm::sqrt(sse / curve.len() as f64);
    let degenerate = distance < DEGENERATE_DISTANCE;
    let reliable = !degenerate && distance < opts.cutoff && residual <= opts.residual_threshold;
    Ok(DistanceFit {
        distance,
        residual,
        reliable,
        degenerate,
    })
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (libm::sqrt(5.0) - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Per-pair fit record from the coherence pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairFit {
    pub i: usize,
    pub j: usize,
    pub true_distance: f64,
    pub fit: DistanceFit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceObservation {
    pub observed: ObservedMatrix,
    pub fits: Vec<PairFit>,
}

/// Synthesize and fit every pair; reliable fits enter the observed matrix as
/// `d̂²`, the rest are missing. Pair `(i, j)` uses stream `i·N + j` of `seed`.
pub fn build_observed_from_coherence(
    x: &PositionMatrix,
    omega: &[f64],
    noise_std: f64,
    opts: &FitOptions,
    seed: u64,
) -> Result<CoherenceObservation> {
    let n = x.len();
    let d = pairwise_distances(x);
    let mut values = DMatrix::zeros(n, n);
    let mut mask = ObservationMask::empty(n);
    let mut fits = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let stream = (i * n + j) as u64;
            let curve = synthesize_coherence(d[(i, j)], omega, noise_std, SPEED_OF_SOUND, derive_seed(seed, stream))?;
            let fit = fit_distance(&curve, opts)?;
            if fit.reliable {
                let v = fit.distance * fit.distance;
                values[(i, j)] = v;
                values[(j, i)] = v;
                mask.insert(i, j);
            }
            fits.push(PairFit {
                i,
                j,
                true_distance: d[(i, j)],
                fit,
            });
        }
    }
    Ok(CoherenceObservation {
        observed: observe(&values, &mask)?,
        fits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn band() -> Vec<f64> {
        FrequencyBand::default().grid().unwrap()
    }

    #[test]
    fn default_band_uses_fft_bins() {
        let g = band();
        let bin = 2.0 * PI * 15.625;
        assert!((g[0] - 7.0 * bin).abs() < 1e-9);
        assert!((g[g.len() - 1] - 256.0 * bin).abs() < 1e-9);
        assert_eq!(g.len(), 250);
    }

    #[test]
    fn zero_distance_is_flat_one() {
        let c = synthesize_coherence(0.0, &band(), 0.0, SPEED_OF_SOUND, 1).unwrap();
        assert!(c.gamma().iter().all(|&g| g == 1.0));
        let fit = fit_distance(&c, &FitOptions::default()).unwrap();
        assert!(fit.distance < DEGENERATE_DISTANCE);
        assert!(fit.degenerate && !fit.reliable);
    }

    #[test]
    fn first_zero_crossing_at_pi_c_over_d() {
        let omega: Vec<f64> = (0..20_000).map(|k| 5000.0 + 0.05 * k as f64).collect();
        let c = synthesize_coherence(0.2, &omega, 0.0, 340.0, 0).unwrap();
        let k = c.gamma().windows(2).position(|w| w[0] > 0.0 && w[1] <= 0.0).unwrap();
        let crossing = omega[k];
        assert!((crossing - 5340.707511).abs() < 0.06, "{crossing}");
    }

    #[test]
    fn noisy_curve_stays_near_model() {
        let omega = band();
        let c = synthesize_coherence(0.3, &omega, 0.05, SPEED_OF_SOUND, 9).unwrap();
        for (&w, &g) in omega.iter().zip(c.gamma()) {
            assert!((g - sinc(w * 0.3 / SPEED_OF_SOUND)).abs() <= 0.25);
        }
    }

    #[test]
    fn noiseless_roundtrip() {
        for &d in &[0.05, 0.1, 0.2, 0.5, 0.7, 1.0, 1.4] {
            let c = synthesize_coherence(d, &band(), 0.0, SPEED_OF_SOUND, 0).unwrap();
            let fit = fit_distance(&c, &FitOptions::default()).unwrap();
            assert!((fit.distance - d).abs() < 1e-3, "{d} -> {}", fit.distance);
            assert!(fit.residual < 1e-4);
            assert_eq!(fit.reliable, d < 0.73);
        }
    }

    #[test]
    fn beyond_cutoff_is_unreliable() {
        let c = synthesize_coherence(1.0, &band(), 0.0, SPEED_OF_SOUND, 0).unwrap();
        let fit = fit_distance(&c, &FitOptions::default()).unwrap();
        assert!(!fit.reliable && !fit.degenerate);
    }

    #[test]
    fn large_residual_is_unreliable() {
        let c = synthesize_coherence(0.2, &band(), 0.5, SPEED_OF_SOUND, 3).unwrap();
        let opts = FitOptions::default();
        let fit = fit_distance(&c, &opts).unwrap();
        assert!(fit.residual > opts.residual_threshold);
        assert!(!fit.reliable);
    }

    #[test]
    fn empty_curve_is_unreliable() {
        let c = CoherenceCurve::new(vec![], vec![], SPEED_OF_SOUND).unwrap();
        let fit = fit_distance(&c, &FitOptions::default()).unwrap();
        assert!(!fit.reliable);
    }

    #[test]
    fn curve_validation() {
        assert!(CoherenceCurve::new(vec![1.0, 1.0], vec![0.0, 0.0], 340.0).is_err());
        assert!(CoherenceCurve::new(vec![1.0, 2.0], vec![0.0, 1.5], 340.0).is_err());
        assert!(CoherenceCurve::new(vec![1.0], vec![0.0, 0.0], 340.0).is_err());
        assert!(synthesize_coherence(-0.1, &band(), 0.0, 340.0, 0).is_err());
    }

    fn eleven_mic() -> PositionMatrix {
        let polar = |r: f64, deg: f64| [r * libm::cos(deg.to_radians()), r * libm::sin(deg.to_radians())];
        let mut pts: Vec<[f64; 2]> = (0..8).map(|k| polar(0.1, 45.0 * k as f64)).collect();
        pts.push([0.0, 0.0]);
        pts.push(polar(0.7, 135.0));
        pts.push(polar(0.7, 45.0));
        PositionMatrix::from_points(&pts).unwrap()
    }

    #[test]
    fn noiseless_pipeline_is_complete_below_cutoff() {
        let pts: Vec<[f64; 2]> = vec![[0.0, 0.0], [0.3, 0.0], [0.1, 0.25], [0.2, 0.4]];
        let x = PositionMatrix::from_points(&pts).unwrap();
        let out = build_observed_from_coherence(&x, &band(), 0.0, &FitOptions::default(), 5).unwrap();
        assert_eq!(out.observed.mask().pair_count(), 6);
        let d = pairwise_distances(&x);
        for (i, j, v) in out.observed.known() {
            assert!((v - d[(i, j)] * d[(i, j)]).abs() < 1e-3);
        }
    }

    #[test]
    fn eleven_mic_layout_drops_the_long_pairs() {
        let x = eleven_mic();
        let out = build_observed_from_coherence(&x, &band(), 0.0, &FitOptions::default(), 0).unwrap();
        let mut missing: Vec<(usize, usize)> = Vec::new();
        for i in 0..11 {
            for j in (i + 1)..11 {
                if !out.observed.mask().contains(i, j) {
                    missing.push((i + 1, j + 1));
                }
            }
        }
        let mut expected = vec![(10, 11), (1, 10), (7, 10), (8, 10), (5, 11), (6, 11), (7, 11)];
        expected.iter_mut().for_each(|p| *p = (p.0.min(p.1), p.0.max(p.1)));
        expected.sort_unstable();
        assert_eq!(missing, expected);
    }

    #[test]
    fn empty_grid_drops_every_pair() {
        let out = build_observed_from_coherence(&eleven_mic(), &[], 0.0, &FitOptions::default(), 0).unwrap();
        assert_eq!(out.observed.mask().pair_count(), 0);
    }

    #[test]
    fn fitting_is_deterministic() {
        let c = synthesize_coherence(0.37, &band(), 0.1, SPEED_OF_SOUND, 11).unwrap();
        let opts = FitOptions::default();
        assert_eq!(fit_distance(&c, &opts).unwrap(), fit_distance(&c, &opts).unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn gating_never_passes_cutoff(d in 0.0f64..1.4, noise in 0.0f64..0.3, seed in any::<u64>()) {
            let c = synthesize_coherence(d, &band(), noise, SPEED_OF_SOUND, seed).unwrap();
            let opts = FitOptions::default();
            let fit = fit_distance(&c, &opts).unwrap();
            prop_assert!(!fit.reliable || fit.distance < opts.cutoff);
            prop_assert!(c.gamma().iter().all(|g| (-1.0..=1.0).contains(g)));
        }
    }
}
