//! Projection of a factored estimate towards the EDM cone: Cadzow clean-up
//! followed by cyclic coordinate descent on
//! `𝓗(X) = ‖1Λᵀ + Λ1ᵀ − 2XXᵀ − T‖²_F`, where each coordinate update
//! minimises a scalar quartic exactly.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;
use rand::Rng;

use super::cadzow::cadzow_project;
use super::factored::FactoredEstimate;
use crate::error::{invalid, Error, Result};
use crate::linalg::svd;
use crate::geometry::PositionMatrix;
use crate::linalg::thin_qr;
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq)]
pub struct EdmProjectionOptions {
    pub max_sweeps: usize,
    /// Converged once no coordinate moves by more than this (m).
    pub tolerance: f64,
    /// Half-width of the start jitter around the cone vertex, as a fraction
    /// of the estimated array radius.
    pub vertex_jitter: f64,
    pub seed: u64,
}

impl Default for EdmProjectionOptions {
    fn default() -> Self {
        Self {
            max_sweeps: 50,
            tolerance: 1e-8,
            vertex_jitter: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdmProjection {
    pub positions: PositionMatrix,
    /// Exact thin SVD of the EDM built from `positions`.
    pub estimate: FactoredEstimate,
    /// `𝓗` at the returned positions.
    pub cost: f64,
    pub sweeps: usize,
    pub converged: bool,
}

/// `𝓗(X)` against a fixed target.
pub fn edm_cost(x: &PositionMatrix, target: &DMatrix<f64>) -> f64 {
    let n = x.len();
    let xm = x.as_matrix();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d2: f64 = (0..x.dim()).map(|k| (xm[(i, k)] - xm[(j, k)]) * (xm[(i, k)] - xm[(j, k)])).sum();
            let r = d2 - target[(i, j)];
            total += r * r;
        }
    }
    total
}

/// Exact SVD `U S Vᵀ` of the EDM `1Λᵀ + Λ1ᵀ − 2XXᵀ`, truncated to `rank`
/// triplets (`rank ≤ dim + 2`). Computed from the factors `A = [1, Λ, X]`,
/// `B = [Λ, 1, −2X]` via thin QR of each and an SVD of the small core.
pub fn edm_factorization(x: &PositionMatrix, rank: usize) -> Result<FactoredEstimate> {
    let n = x.len();
    let dim = x.dim();
    let width = dim + 2;
    if rank == 0 || rank > width {
        return Err(invalid("rank", "must lie in 1..=dim+2 for an EDM refactorisation"));
    }
    if n < width {
        return Err(Error::Degenerate { n, dim });
    }
    let xm = x.as_matrix();
    let lambda: Vec<f64> = (0..n).map(|i| xm.row(i).norm_squared()).collect();
    let a = DMatrix::from_fn(n, width, |i, c| match c {
        0 => 1.0,
        1 => lambda[i],
        _ => xm[(i, c - 2)],
    });
    let b = DMatrix::from_fn(n, width, |i, c| match c {
        0 => lambda[i],
        1 => 1.0,
        _ => -2.0 * xm[(i, c - 2)],
    });
    let (qa, ra) = thin_qr(a);
    let (qb, rb) = thin_qr(b);
    let core = &ra * rb.transpose();
    let f = svd(&core);
    let w = f.u.columns(0, rank).into_owned();
    let z = f.v.columns(0, rank).into_owned();
    let s = DMatrix::from_fn(rank, rank, |p, q| if p == q { f.singular_values[p] } else { 0.0 });
    Ok(FactoredEstimate::new(qa * w, s, qb * z))
}

/// Real roots of `s³ + p s + q = 0`, each polished by Newton steps.
fn depressed_cubic_roots(p: f64, q: f64) -> ([f64; 3], usize) {
    let mut roots = [0.0; 3];
    let count;
    let half_q = 0.5 * q;
    let third_p = p / 3.0;
    let disc = half_q * half_q + third_p * third_p * third_p;
    if p == 0.0 && q == 0.0 {
        count = 1;
    } else if disc > 0.0 {
        let sq = libm::sqrt(disc);
        let w = if half_q > 0.0 { -half_q - sq } else { -half_q + sq };
        let u = libm::cbrt(w);
        roots[0] = if u != 0.0 { u - third_p / u } else { 0.0 };
        count = 1;
    } else {
        let r = 2.0 * libm::sqrt(-third_p);
        let arg = (3.0 * q / (2.0 * p) * libm::sqrt(-3.0 / p)).clamp(-1.0, 1.0);
        let phi = libm::acos(arg);
        for (k, root) in roots.iter_mut().enumerate() {
            *root = r * libm::cos(phi / 3.0 - 2.0 * core::f64::consts::PI * k as f64 / 3.0);
        }
        count = 3;
    }
    for root in roots.iter_mut().take(count) {
        for _ in 0..2 {
            let f = *root * *root * *root + p * *root + q;
            let df = 3.0 * *root * *root + p;
            if df != 0.0 {
                let next = *root - f / df;
                if next.is_finite() {
                    *root = next;
                }
            }
        }
    }
    (roots, count)
}

/// Global minimiser over `t` of `Σ_j ((t − a_j)² + c_j)²`, ties broken
/// towards the smallest `|t|`.
fn minimize_coordinate(a: &[f64], c: &[f64]) -> f64 {
    let n = a.len() as f64;
    if a.is_empty() {
        return 0.0;
    }
    let mean = a.iter().sum::<f64>() / n;
    let (mut b2, mut b3, mut csum, mut cb1) = (0.0, 0.0, 0.0, 0.0);
    for (&aj, &cj) in a.iter().zip(c) {
        let b = aj - mean;
        b2 += b * b;
        b3 += b * b * b;
        csum += cj;
        cb1 += cj * b;
    }
    // In the shifted variable s = t − mean the derivative is a depressed cubic.
    let p = (3.0 * b2 + csum) / n;
    let q = -(b3 + cb1) / n;
    let value = |s: f64| n * (s * s) * (s * s) + (6.0 * b2 + 2.0 * csum) * s * s - 4.0 * (b3 + cb1) * s;
    let (roots, count) = depressed_cubic_roots(p, q);
    let mut best_s = roots[0];
    let mut best_v = value(best_s);
    for &s in roots.iter().take(count).skip(1) {
        let v = value(s);
        let tie = (v - best_v).abs() <= 1e-12 * best_v.abs().max(1e-300);
        if v < best_v && !tie || tie && (s + mean).abs() < (best_s + mean).abs() {
            best_s = s;
            best_v = v;
        }
    }
    best_s + mean
}

/// Run coordinate sweeps on row-major coordinates `x` (N × dim) against a
/// symmetric hollow target. Returns (sweeps, converged).
pub(crate) fn coordinate_descent(
    x: &mut [f64],
    dim: usize,
    target: &DMatrix<f64>,
    max_sweeps: usize,
    tolerance: f64,
) -> (usize, bool) {
    let n = target.nrows();
    let mut a = vec![0.0; n.saturating_sub(1)];
    let mut c = vec![0.0; n.saturating_sub(1)];
    for sweep in 1..=max_sweeps {
        let mut largest = 0.0_f64;
        for i in 0..n {
            for k in 0..dim {
                let mut idx = 0;
                for j in 0..n {
                    if j == i {
                        continue;
                    }
                    let mut rest = 0.0;
                    for l in 0..dim {
                        if l != k {
                            let d = x[i * dim + l] - x[j * dim + l];
                            rest += d * d;
                        }
                    }
                    a[idx] = x[j * dim + k];
                    c[idx] = rest - target[(i, j)];
                    idx += 1;
                }
                let updated = minimize_coordinate(&a, &c);
                largest = largest.max((updated - x[i * dim + k]).abs());
                x[i * dim + k] = updated;
            }
        }
        if largest < tolerance {
            return (sweep, true);
        }
    }
    (max_sweeps, false)
}

/// Cadzow-project `U S Vᵀ`, fit positions to it by coordinate descent on
/// `𝓗`, and refactor the EDM of the fitted positions at the estimate's rank.
///
/// Without a `start`, descent begins at the cone vertex (all points at the
/// origin) plus a seeded uniform jitter, since the vertex itself is a
/// stationary point of `𝓗`.
pub fn edm_cone_project(
    f: &FactoredEstimate,
    dim: usize,
    opts: &EdmProjectionOptions,
    start: Option<&PositionMatrix>,
) -> Result<EdmProjection> {
    if !(1..=3).contains(&dim) {
        return Err(invalid("dim", "must be 1, 2 or 3"));
    }
    let n = f.len();
    let target = cadzow_project(&f.product());
    let mut x = match start {
        Some(s) => {
            if s.len() != n || s.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: (n, dim),
                    found: (s.len(), s.dim()),
                });
            }
            let m = s.as_matrix();
            (0..n * dim).map(|idx| m[(idx / dim, idx % dim)]).collect::<Vec<f64>>()
        }
        None => {
            let radius = 0.5 * libm::sqrt(target.max().max(0.0));
            let half = opts.vertex_jitter * radius.max(f64::MIN_POSITIVE);
            let mut rng = seeded(opts.seed);
            (0..n * dim).map(|_| half * (2.0 * rng.random::<f64>() - 1.0)).collect()
        }
    };
    let (sweeps, converged) = coordinate_descent(&mut x, dim, &target, opts.max_sweeps, opts.tolerance);
    let positions = PositionMatrix::from_fn(n, dim, |i, k| x[i * dim + k])?;
    let estimate = edm_factorization(&positions, f.rank().min(dim + 2))?;
    let cost = edm_cost(&positions, &target);
    Ok(EdmProjection {
        positions,
        estimate,
        cost,
        sweeps,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_squared_distances, calibration_error};
    use crate::rng::seeded;

    fn planar(n: usize, seed: u64) -> PositionMatrix {
        let mut rng = seeded(seed);
        PositionMatrix::from_fn(n, 2, |_, _| rng.random_range(-3.0..3.0)).unwrap()
    }

    #[test]
    fn cubic_roots_are_roots() {
        for (p, q) in [(-3.0, 1.0), (2.0, -5.0), (0.0, 8.0), (-1.0, 0.0), (1e-8, 1e-9)] {
            let (roots, count) = depressed_cubic_roots(p, q);
            for &r in roots.iter().take(count) {
                assert!((r * r * r + p * r + q).abs() < 1e-9, "p={p} q={q} r={r}");
            }
        }
        assert_eq!(depressed_cubic_roots(-3.0, 0.0).1, 3);
    }

    #[test]
    fn coordinate_minimizer_beats_a_dense_scan() {
        let mut rng = seeded(3);
        for _ in 0..50 {
            let a: Vec<f64> = (0..7).map(|_| rng.random_range(-2.0..2.0)).collect();
            let c: Vec<f64> = (0..7).map(|_| rng.random_range(-4.0..1.0)).collect();
            let f = |t: f64| a.iter().zip(&c).map(|(aj, cj)| ((t - aj).powi(2) + cj).powi(2)).sum::<f64>();
            let t = minimize_coordinate(&a, &c);
            let scan = (0..80_001).map(|k| -4.0 + k as f64 * 1e-4).fold(f64::INFINITY, |m, s| m.min(f(s)));
            assert!(f(t) <= scan + 1e-9, "{} vs {}", f(t), scan);
        }
    }

    #[test]
    fn symmetric_tie_prefers_small_coordinate() {
        // f(t) = (t² − 1)², minima at ±1 with equal value; shift by a = 0.
        let t = minimize_coordinate(&[0.0], &[-1.0]);
        assert!((t.abs() - 1.0).abs() < 1e-12);
        // two symmetric wells around 0.5: minima at 0.5 ± 1, pick the one nearer 0
        let t = minimize_coordinate(&[0.5], &[-1.0]);
        assert!((t + 0.5).abs() < 1e-12, "{t}");
    }

    #[test]
    fn exact_edm_is_a_fixed_point() {
        let x = planar(10, 1);
        let f = edm_factorization(&x, 4).unwrap();
        let m = build_squared_distances(&x);
        assert!((f.product() - m.as_matrix()).norm() < 1e-9 * m.as_matrix().norm());
        let out = edm_cone_project(&f, 2, &EdmProjectionOptions::default(), Some(&x)).unwrap();
        assert!(out.cost < 1e-12 * m.as_matrix().norm_squared(), "{}", out.cost);
        let rebuilt = build_squared_distances(&out.positions);
        assert!((rebuilt.as_matrix() - m.as_matrix()).norm() < 1e-9 * m.as_matrix().norm());
    }

    #[test]
    fn vertex_start_reaches_exact_geometry() {
        let x = planar(12, 5);
        let f = edm_factorization(&x, 4).unwrap();
        let opts = EdmProjectionOptions {
            max_sweeps: 2000,
            ..EdmProjectionOptions::default()
        };
        let out = edm_cone_project(&f, 2, &opts, None).unwrap();
        assert!(calibration_error(&x, &out.positions).unwrap() < 1e-6);
    }

    #[test]
    fn output_lies_in_the_cone() {
        let x = planar(15, 8);
        let mut f = edm_factorization(&x, 4).unwrap();
        let mut rng = seeded(2);
        f.s.iter_mut().for_each(|v| *v *= 1.0 + 0.2 * rng.random_range(-1.0..1.0));
        let out = edm_cone_project(&f, 2, &EdmProjectionOptions::default(), None).unwrap();
        let m = build_squared_distances(&out.positions).into_matrix();
        let n = m.nrows();
        let d = m.map(libm::sqrt);
        for i in 0..n {
            assert_eq!(m[(i, i)], 0.0);
            for j in 0..n {
                assert_eq!(m[(i, j)], m[(j, i)]);
                for k in 0..n {
                    assert!(d[(i, j)] <= d[(i, k)] + d[(k, j)] + 1e-8);
                }
            }
        }
        for _ in 0..200 {
            let mut z: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mean = z.iter().sum::<f64>() / n as f64;
            z.iter_mut().for_each(|v| *v -= mean);
            let norm = libm::sqrt(z.iter().map(|v| v * v).sum::<f64>());
            z.iter_mut().for_each(|v| *v /= norm);
            let z = nalgebra::DVector::from_vec(z);
            assert!(-(z.transpose() * &m * &z)[(0, 0)] >= -1e-8);
        }
    }
}
