//! Quantities from the error analysis: structured-missing probabilities on a
//! disc, incoherence of the squared-distance matrix, the two terms of the
//! calibration-error bound, and Monte Carlo estimates of the spectral norms
//! those terms control.
//!
//! Constants in the bounds are unknown, so every check built on this module
//! compares scalings, never absolute values.

use alloc::vec::Vec;
use core::f64::consts::PI;
use libm::{asin, log2, sin, sqrt};
use nalgebra::DMatrix;

use crate::error::{invalid, Result};
use crate::geometry::{build_squared_distances, PositionMatrix};
use crate::linalg::{spectral_norm_symmetric, svd, RANK_TOL};
use crate::observation::{add_noise, make_mask, NoiseModel};
use crate::rng::{derive_seed, seeded, uniform_in_disc};

/// Bounds on the probability that a pair on a disc of radius `a` is farther
/// apart than `d_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QBounds {
    pub q_min: f64,
    pub q_max: f64,
    /// `d_max > 2a`: no pair can be that far apart; both bounds are 0.
    pub clamped: bool,
}

/// `q_min = max(1 - (d_max/a)², 0)` and `q_max = 1 - B/(πa²)`, with `B` the
/// area of the disc within `d_max` of a point on its rim.
pub fn q_bounds(a: f64, d_max: f64) -> Result<QBounds> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(invalid("a", "must be positive and finite"));
    }
    if !(d_max > 0.0) {
        return Err(invalid("d_max", "must be positive"));
    }
    if d_max > 2.0 * a {
        return Ok(QBounds { q_min: 0.0, q_max: 0.0, clamped: true });
    }
    let ratio = d_max / a;
    let q_min = (1.0 - ratio * ratio).max(0.0);
    let xi = d_max / (2.0 * a);
    let gamma = asin(xi);
    let xi2 = xi * xi;
    let q_max = 1.0 - 2.0 * gamma / PI + sin(4.0 * gamma) / (2.0 * PI) + (2.0 * xi2 / PI) * (2.0 * gamma + sin(2.0 * gamma))
        - 2.0 * xi2;
    Ok(QBounds {
        q_min,
        q_max: q_max.clamp(0.0, 1.0),
        clamped: false,
    })
}

/// Smallest `d_max` with `q_max(a, d_max) <= q` (bisection; `q_max` is
/// decreasing in `d_max`).
pub fn d_max_for_q(a: f64, q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(invalid("q", "must lie in (0, 1)"));
    }
    q_bounds(a, a)?;
    let (mut lo, mut hi) = (0.0, 2.0 * a);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if q_bounds(a, mid)?.q_max > q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Incoherence {
    pub mu1: f64,
    pub mu2: f64,
    /// `σ₁/σ_η`; infinite when `σ_η` vanishes.
    pub kappa: f64,
    /// `σ_η <= RANK_TOL·σ₁`.
    pub degenerate: bool,
}

/// Incoherence parameters of `m` at rank `η`, with the top-`η` left singular
/// vectors scaled so that `UᵀU = N·I`:
/// `μ₁ = max_i ‖U_i‖²/η`, `μ₂ = max_ij |Σ_k U_ik (σ_k/σ₁) U_jk| / √η`.
pub fn incoherence(m: &DMatrix<f64>, rank: usize) -> Result<Incoherence> {
    let n = m.nrows();
    if !m.is_square() || n == 0 {
        return Err(invalid("m", "must be square and non-empty"));
    }
    if rank == 0 || rank > n {
        return Err(invalid("rank", "must lie in 1..=N"));
    }
    let f = svd(m);
    let sigma: Vec<f64> = f.singular_values[..rank].to_vec();
    let s1 = sigma[0];
    let s_eta = sigma[rank - 1];
    let degenerate = !(s1 > 0.0) || s_eta <= RANK_TOL * s1;
    let scale = sqrt(n as f64);
    let scaled = DMatrix::from_fn(n, rank, |i, c| scale * f.u[(i, c)]);
    let mut mu1 = 0.0_f64;
    for i in 0..n {
        mu1 = mu1.max(scaled.row(i).norm_squared() / rank as f64);
    }
    let weights: Vec<f64> = sigma.iter().map(|s| if s1 > 0.0 { s / s1 } else { 0.0 }).collect();
    let mut mu2 = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            let v: f64 = (0..rank).map(|k| scaled[(i, k)] * weights[k] * scaled[(j, k)]).sum();
            mu2 = mu2.max(v.abs());
        }
    }
    Ok(Incoherence {
        mu1,
        mu2: mu2 / sqrt(rank as f64),
        kappa: if degenerate { f64::INFINITY } else { s1 / s_eta },
        degenerate,
    })
}

/// The two terms of the calibration-error bound with unit constants:
/// `a² log₂N / (pN)` and `ς d_max² / √(pN)`.
pub fn theorem1_rhs(a: f64, n: usize, p: f64, varsigma: f64, d_max: f64) -> Result<(f64, f64)> {
    if n < 2 {
        return Err(invalid("n", "must be at least 2"));
    }
    if !(p > 0.0) {
        return Err(invalid("p", "must be positive"));
    }
    let pn = p * n as f64;
    Ok((a * a * log2(n as f64) / pn, varsigma * d_max * d_max / sqrt(pn)))
}

/// Monte Carlo setup for the spectral-norm checks on the disc.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundSweep {
    pub a: f64,
    pub sizes: Vec<usize>,
    pub p: f64,
    pub varsigma: f64,
    pub d_max: DMaxRule,
    pub trials: usize,
    pub seed: u64,
    /// Rank used for the incoherence parameters.
    pub rank: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DMaxRule {
    Fixed(f64),
    /// `d_max` such that `q_max(a, d_max) = c·log₂N/N` (capped below 1).
    LogOverN { c: f64 },
}

impl DMaxRule {
    pub fn resolve(&self, a: f64, n: usize) -> Result<f64> {
        match *self {
            DMaxRule::Fixed(d) => Ok(d),
            DMaxRule::LogOverN { c } => {
                let q = (c * log2(n as f64) / n as f64).min(0.999);
                d_max_for_q(a, q)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub trial: usize,
    pub seed: u64,
    pub a: f64,
    pub n: usize,
    pub p: f64,
    pub varsigma: f64,
    pub d_max: f64,
    pub q_min: f64,
    pub q_max: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub kappa_eta: f64,
    pub bound_term1: f64,
    pub bound_term2: f64,
    /// `‖P_E(M^s)‖₂`: sampled entries that are structurally missing.
    pub structured_norm: f64,
    /// `‖P_E(Z̄)‖₂`: noise on sampled entries within `d_max`.
    pub noise_norm: f64,
    /// `structured_norm / (a² log₂N)`.
    pub structured_ratio: f64,
    /// `noise_norm / (d_max² ς √(pN))`; 0 when `ς = 0`.
    pub noise_ratio: f64,
}

/// One report per `(N, trial)`, ordered by `N` then trial.
pub fn verify_bounds(sweep: &BoundSweep) -> Result<Vec<BoundReport>> {
    if sweep.trials == 0 {
        return Err(invalid("trials", "must be at least 1"));
    }
    let mut reports = Vec::with_capacity(sweep.sizes.len() * sweep.trials);
    for (axis, &n) in sweep.sizes.iter().enumerate() {
        let d_max = sweep.d_max.resolve(sweep.a, n)?;
        for trial in 0..sweep.trials {
            let seed = derive_seed(sweep.seed, ((axis as u64) << 32) | trial as u64);
            reports.push(bound_trial(sweep, n, d_max, trial, seed)?);
        }
    }
    Ok(reports)
}

fn bound_trial(sweep: &BoundSweep, n: usize, d_max: f64, trial: usize, seed: u64) -> Result<BoundReport> {
    let mut rng = seeded(derive_seed(seed, 0));
    let mut coords = DMatrix::zeros(n, 2);
    for i in 0..n {
        let [u, v] = uniform_in_disc(&mut rng, sweep.a);
        coords[(i, 0)] = u;
        coords[(i, 1)] = v;
    }
    let x = PositionMatrix::new(coords)?;
    let m = build_squared_distances(&x).into_matrix();
    let d = m.map(sqrt);
    // Same seed as an observation mask, without the distance cut: the set E.
    let sampled = make_mask(&d, f64::INFINITY, sweep.p, derive_seed(seed, 1))?;
    let noisy = add_noise(&d, &NoiseModel::multiplicative(sweep.varsigma, derive_seed(seed, 2)))?;

    let mut structured = DMatrix::zeros(n, n);
    let mut noise = DMatrix::zeros(n, n);
    for (i, j) in sampled.pairs() {
        if d[(i, j)] >= d_max {
            structured[(i, j)] = m[(i, j)];
            structured[(j, i)] = m[(i, j)];
        } else {
            let z = (noisy[(i, j)] - d[(i, j)]) * (noisy[(i, j)] + d[(i, j)]);
            noise[(i, j)] = z;
            noise[(j, i)] = z;
        }
    }
    let structured_norm = spectral_norm_symmetric(&structured);
    let noise_norm = spectral_norm_symmetric(&noise);
    let q = q_bounds(sweep.a, d_max)?;
    let inc = incoherence(&m, sweep.rank)?;
    let (term1, term2) = theorem1_rhs(sweep.a, n, sweep.p, sweep.varsigma, d_max)?;
    let noise_scale = d_max * d_max * sweep.varsigma * sqrt(sweep.p * n as f64);
    Ok(BoundReport {
        trial,
        seed,
        a: sweep.a,
        n,
        p: sweep.p,
        varsigma: sweep.varsigma,
        d_max,
        q_min: q.q_min,
        q_max: q.q_max,
        mu1: inc.mu1,
        mu2: inc.mu2,
        kappa_eta: inc.kappa,
        bound_term1: term1,
        bound_term2: term2,
        structured_norm,
        noise_norm,
        structured_ratio: structured_norm / (sweep.a * sweep.a * log2(n as f64)),
        noise_ratio: if noise_scale > 0.0 { noise_norm / noise_scale } else { 0.0 },
    })
}

/// Per-`N` maxima of the two ratios, in sweep order.
pub fn max_ratios_by_n(reports: &[BoundReport]) -> Vec<(usize, f64, f64)> {
    let mut out: Vec<(usize, f64, f64)> = Vec::new();
    for r in reports {
        match out.iter_mut().find(|(n, _, _)| *n == r.n) {
            Some(entry) => {
                entry.1 = entry.1.max(r.structured_ratio);
                entry.2 = entry.2.max(r.noise_ratio);
            }
            None => out.push((r.n, r.structured_ratio, r.noise_ratio)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;

    /// Fraction of uniform disc points farther than `d_max` from a rim point.
    fn rim_miss_fraction(a: f64, d_max: f64, samples: usize, seed: u64) -> f64 {
        let mut rng = seeded(seed);
        let mut far = 0usize;
        for _ in 0..samples {
            let [x, y] = uniform_in_disc(&mut rng, a);
            let dx = x - a;
            if dx * dx + y * y >= d_max * d_max {
                far += 1;
            }
        }
        far as f64 / samples as f64
    }

    #[test]
    fn q_max_endpoints_and_lens_value() {
        assert_eq!(q_bounds(1.0, 2.0).unwrap().q_max, 0.0);
        let tiny = q_bounds(1.0, 1e-9).unwrap();
        assert!((tiny.q_max - 1.0).abs() < 1e-8 && (tiny.q_min - 1.0).abs() < 1e-8);
        let lens = 2.0 * PI / 3.0 - sqrt(3.0) / 2.0;
        let q = q_bounds(1.0, 1.0).unwrap();
        assert!((q.q_max - (1.0 - lens / PI)).abs() < 1e-12);
        assert!((q.q_max - 0.6090).abs() < 5e-5);
        assert_eq!(q.q_min, 0.0);
    }

    #[test]
    fn q_max_matches_rim_monte_carlo() {
        for (k, d) in [0.25, 0.5, 1.0, 1.5].into_iter().enumerate() {
            let mc = rim_miss_fraction(1.0, d, 400_000, k as u64);
            let q = q_bounds(1.0, d).unwrap().q_max;
            // 4σ binomial slack.
            assert!((mc - q).abs() < 4.0 * sqrt(q * (1.0 - q) / 400_000.0) + 1e-9, "{d}: {mc} vs {q}");
        }
    }

    #[test]
    fn pair_miss_fraction_lies_between_bounds() {
        let mut rng = seeded(3);
        let pairs = 200_000;
        for d in [0.5, 1.0, 1.5] {
            let mut far = 0usize;
            for _ in 0..pairs {
                let [x1, y1] = uniform_in_disc(&mut rng, 1.0);
                let [x2, y2] = uniform_in_disc(&mut rng, 1.0);
                if (x1 - x2) * (x1 - x2) + (y1 - y2) * (y1 - y2) >= d * d {
                    far += 1;
                }
            }
            let q = far as f64 / pairs as f64;
            let b = q_bounds(1.0, d).unwrap();
            let slack = 3.0 * sqrt(0.25 / pairs as f64);
            assert!(b.q_min - slack <= q && q <= b.q_max + slack, "{d}: {q} not in {b:?}");
        }
    }

    #[test]
    fn oversized_radius_is_clamped() {
        let b = q_bounds(1.0, 2.5).unwrap();
        assert!(b.clamped && b.q_min == 0.0 && b.q_max == 0.0);
        assert!(q_bounds(1.0, 0.0).is_err());
    }

    #[test]
    fn d_max_for_q_inverts_q_max() {
        for q in [0.05, 0.3, 0.6, 0.9] {
            let d = d_max_for_q(2.0, q).unwrap();
            assert!((q_bounds(2.0, d).unwrap().q_max - q).abs() < 1e-9);
        }
    }

    fn polygon(n: usize) -> DMatrix<f64> {
        let x = PositionMatrix::from_fn(n, 2, |i, k| {
            let t = 2.0 * PI * i as f64 / n as f64;
            if k == 0 { libm::cos(t) } else { sin(t) }
        })
        .unwrap();
        build_squared_distances(&x).into_matrix()
    }

    #[test]
    fn polygon_incoherence_is_stable_in_n() {
        let mu: Vec<f64> = [16, 32, 64].iter().map(|&n| incoherence(&polygon(n), 3).unwrap().mu1).collect();
        for w in mu.windows(2) {
            assert!(w[1] / w[0] < 1.5 && w[0] / w[1] < 1.5, "{mu:?}");
        }
        let inc = incoherence(&polygon(16), 3).unwrap();
        assert!(inc.kappa >= 1.0 && inc.mu1 > 0.0 && inc.mu2 > 0.0 && !inc.degenerate);
        // Points on a circle have a rank-3 squared-distance matrix.
        assert!(incoherence(&polygon(16), 4).unwrap().degenerate);
    }

    #[test]
    fn duplicated_points_collapse_sigma_eta() {
        let base = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let pts: Vec<[f64; 2]> = (0..12).map(|i| base[i % 3]).collect();
        let m = build_squared_distances(&PositionMatrix::from_points(&pts).unwrap()).into_matrix();
        let inc = incoherence(&m, 4).unwrap();
        assert!(inc.degenerate && inc.kappa.is_infinite());
    }

    #[test]
    fn kappa_is_at_least_one() {
        let mut rng = seeded(9);
        for _ in 0..20 {
            let x = PositionMatrix::from_fn(10, 2, |_, _| rng.random_range(-1.0..1.0)).unwrap();
            let inc = incoherence(&build_squared_distances(&x).into_matrix(), 4).unwrap();
            assert!(inc.kappa >= 1.0);
        }
    }

    #[test]
    fn bound_terms_scale_exactly() {
        let (t1, t2) = theorem1_rhs(9.5, 45, 0.95, 0.0167, 7.5).unwrap();
        let (u1, u2) = theorem1_rhs(9.5, 180, 0.95, 0.0167, 7.5).unwrap();
        assert!((u2 - t2 / 2.0).abs() < 1e-15);
        assert!((u1 - t1 * (log2(180.0) / log2(45.0)) / 4.0).abs() < 1e-12);
        let (v1, v2) = theorem1_rhs(9.5, 45, 0.95, 0.0334, 7.5).unwrap();
        assert_eq!(v1, t1);
        assert!((v2 - 2.0 * t2).abs() < 1e-15);
        let (_, w2) = theorem1_rhs(9.5, 45, 0.95, 0.0167, 15.0).unwrap();
        assert!((w2 - 4.0 * t2).abs() < 1e-12);
        let expected1 = 9.5 * 9.5 * log2(45.0) / (0.95 * 45.0);
        let expected2 = 0.0167 * 56.25 / sqrt(0.95 * 45.0);
        assert!((t1 - expected1).abs() < 1e-12 && (t2 - expected2).abs() < 1e-12);
    }

    fn sweep(varsigma: f64, d_max: DMaxRule) -> BoundSweep {
        BoundSweep {
            a: 1.0,
            sizes: alloc::vec![30],
            p: 0.9,
            varsigma,
            d_max,
            trials: 2,
            seed: 5,
            rank: 4,
        }
    }

    #[test]
    fn noiseless_and_full_radius_edge_cases() {
        let r = verify_bounds(&sweep(0.0, DMaxRule::Fixed(1.0))).unwrap();
        assert!(r.iter().all(|b| b.noise_norm == 0.0 && b.noise_ratio == 0.0));
        let r = verify_bounds(&sweep(0.05, DMaxRule::Fixed(2.0))).unwrap();
        assert!(r.iter().all(|b| b.structured_norm == 0.0 && b.structured_ratio == 0.0));
        assert!(r.iter().all(|b| b.noise_norm > 0.0));
    }

    #[test]
    fn structured_norm_obeys_gershgorin_envelope() {
        let reports = verify_bounds(&BoundSweep {
            sizes: alloc::vec![40, 80],
            ..sweep(0.02, DMaxRule::LogOverN { c: 1.0 })
        })
        .unwrap();
        assert_eq!(reports.len(), 4);
        for r in &reports {
            assert!(r.q_min <= r.q_max && r.kappa_eta >= 1.0 && r.mu1 > 0.0 && r.mu2 > 0.0);
            // Entries are at most 4a² and every row has at most N of them.
            assert!(r.structured_norm <= 4.0 * r.a * r.a * r.n as f64);
            assert!(r.structured_ratio.is_finite() && r.noise_ratio.is_finite());
        }
        let again = verify_bounds(&BoundSweep {
            sizes: alloc::vec![40, 80],
            ..sweep(0.02, DMaxRule::LogOverN { c: 1.0 })
        })
        .unwrap();
        assert_eq!(reports, again);
        assert_eq!(max_ratios_by_n(&reports).len(), 2);
    }
}
