use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{double_center, PositionMatrix};
use crate::linalg::{symmetric_eigen_desc, RANK_TOL};

/// Output of classical MDS.
#[derive(Debug, Clone, PartialEq)]
pub struct MdsEmbedding {
    pub positions: PositionMatrix,
    /// Fewer than `dim` strictly positive eigenvalues were available.
    pub degenerate: bool,
}

/// Classical MDS: top-`dim` eigen-embedding `U₊ √Π₊` of `−½ J M J`.
///
/// The input is symmetrised first. Eigenvalues that are negative or below
/// the rank tolerance are clamped to zero.
pub fn mds_localize(m: &DMatrix<f64>, dim: usize) -> Result<MdsEmbedding> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: (m.nrows(), m.nrows()),
            found: m.shape(),
        });
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let n = m.nrows();
    if n == 0 || dim == 0 || dim > 3 {
        return Err(Error::Degenerate { n, dim });
    }
    let sym = (m + m.transpose()) * 0.5;
    let (values, vectors) = symmetric_eigen_desc(&double_center(&sym));
    let top = values.first().copied().unwrap_or(0.0).max(0.0);
    let mut positive = 0;
    let scales: alloc::vec::Vec<f64> = (0..dim)
        .map(|k| {
            let lambda = values.get(k).copied().unwrap_or(0.0);
            if lambda > RANK_TOL * top && lambda > 0.0 {
                positive += 1;
                libm::sqrt(lambda)
            } else {
                0.0
            }
        })
        .collect();
    let coords = DMatrix::from_fn(n, dim, |i, k| {
        if k < n {
            vectors[(i, k)] * scales[k]
        } else {
            0.0
        }
    });
    Ok(MdsEmbedding {
        positions: PositionMatrix::new(coords)?,
        degenerate: positive < dim,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_squared_distances, calibration_error};
    use crate::rng::seeded;
    use rand::Rng;

    #[test]
    fn unit_square_is_recovered() {
        let x = PositionMatrix::from_points(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
            .unwrap();
        let m = build_squared_distances(&x);
        let out = mds_localize(m.as_matrix(), 2).unwrap();
        assert!(!out.degenerate);
        assert!(calibration_error(&x, &out.positions).unwrap() < 1e-9);
    }

    #[test]
    fn collinear_points_have_zero_second_axis() {
        let x = PositionMatrix::from_points(&[[0.0, 0.0], [1.0, 1.0], [3.0, 3.0], [4.5, 4.5]])
            .unwrap();
        let out = mds_localize(build_squared_distances(&x).as_matrix(), 2).unwrap();
        assert!(out.degenerate);
        assert!(out.positions.as_matrix().column(1).iter().all(|v| *v == 0.0));
        assert!(calibration_error(&x, &out.positions).unwrap() < 1e-9);
    }

    #[test]
    fn noisy_input_gives_best_rank_dim_gram() {
        let mut rng = seeded(21);
        let n = 8;
        let x = PositionMatrix::from_fn(n, 2, |_, _| rng.random_range(-1.0..1.0)).unwrap();
        let mut m = build_squared_distances(&x).into_matrix();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = m[(i, j)] * (1.0 + 0.1 * rng.random_range(-1.0..1.0));
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        let g = double_center(&m);
        let out = mds_localize(&m, 2).unwrap();
        let y = out.positions.as_matrix();
        let best = (&g - y * y.transpose()).norm();
        // No perturbed rank-2 configuration fits the Gram matrix better.
        for _ in 0..2000 {
            let z = DMatrix::from_fn(n, 2, |i, k| y[(i, k)] + 0.01 * rng.random_range(-1.0..1.0));
            assert!((&g - &z * z.transpose()).norm() >= best - 1e-12);
        }
    }
}
