//! Point sets, squared-distance matrices, double centering and the two
//! rigid-invariant error metrics.

use alloc::vec::Vec;
use nalgebra::{DMatrix, RowDVector};

use crate::error::{invalid, Error, Result};
use crate::linalg::svd;

/// `N` points in `ζ`-dimensional space, one point per row (metres).
#[derive(Debug, Clone, PartialEq)]
pub struct PositionMatrix(DMatrix<f64>);

impl PositionMatrix {
    pub fn new(coords: DMatrix<f64>) -> Result<Self> {
        if coords.ncols() == 0 || coords.ncols() > 3 {
            return Err(invalid("dimension", "must be 1, 2 or 3"));
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self(coords))
    }

    /// Build from a slice of fixed-size points.
    pub fn from_points<const D: usize>(points: &[[f64; D]]) -> Result<Self> {
        Self::new(DMatrix::from_fn(points.len(), D, |i, k| points[i][k]))
    }

    pub fn from_fn(n: usize, dim: usize, f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        Self::new(DMatrix::from_fn(n, dim, f))
    }

    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        self.0.row(i).iter().copied().collect()
    }

    pub fn centroid(&self) -> RowDVector<f64> {
        self.0.row_mean()
    }

    /// Copy translated so that the centroid sits at the origin.
    pub fn centered(&self) -> Self {
        let c = self.centroid();
        let mut m = self.0.clone();
        for mut row in m.row_iter_mut() {
            row -= &c;
        }
        Self(m)
    }

    /// True when there are enough points to span the ambient dimension.
    pub fn is_nondegenerate(&self) -> bool {
        self.len() > self.dim()
    }

    fn require_nondegenerate(&self) -> Result<()> {
        if self.is_nondegenerate() {
            Ok(())
        } else {
            Err(Error::Degenerate {
                n: self.len(),
                dim: self.dim(),
            })
        }
    }
}

/// Symmetric, hollow, non-negative matrix of squared pairwise distances (m²).
#[derive(Debug, Clone, PartialEq)]
pub struct SquaredDistanceMatrix(DMatrix<f64>);

impl SquaredDistanceMatrix {
    /// Validates symmetry, a zero diagonal and non-negative entries exactly.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
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
        for i in 0..n {
            if m[(i, i)] != 0.0 {
                return Err(invalid("squared distances", "diagonal must be zero"));
            }
            for j in (i + 1)..n {
                if m[(i, j)] != m[(j, i)] {
                    return Err(invalid("squared distances", "matrix must be symmetric"));
                }
                if m[(i, j)] < 0.0 {
                    return Err(invalid("squared distances", "entries must be non-negative"));
                }
            }
        }
        Ok(Self(m))
    }

    pub fn from_positions(x: &PositionMatrix) -> Self {
        build_squared_distances(x)
    }

    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.nrows() == 0
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    /// Entry-wise square roots.
    pub fn distances(&self) -> DMatrix<f64> {
        self.0.map(|v| libm::sqrt(v.max(0.0)))
    }
}

/// Rank bound of a squared-distance matrix for points in `dim` dimensions.
pub fn edm_rank(dim: usize) -> usize {
    dim + 2
}

/// The centering projector `J = I - (1/N) 1 1ᵀ`, applied without forming it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CenteringOperator {
    n: usize,
}

impl CenteringOperator {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.n;
        let inv = if n == 0 { 0.0 } else { 1.0 / n as f64 };
        DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 - inv } else { -inv })
    }

    /// `J m J` for a square `m`.
    pub fn apply_both(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(m.shape(), (self.n, self.n), "centering operator size mismatch");
        if self.n == 0 {
            return m.clone();
        }
        let row_means = m.column_mean();
        let col_means = m.row_mean();
        let grand = row_means.mean();
        DMatrix::from_fn(self.n, self.n, |i, j| {
            m[(i, j)] - row_means[i] - col_means[j] + grand
        })
    }
}

/// `M_ij = ‖x_i − x_j‖²`, exactly symmetric with a zero diagonal.
pub fn build_squared_distances(x: &PositionMatrix) -> SquaredDistanceMatrix {
    let n = x.len();
    let xm = x.as_matrix();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d2: f64 = (0..x.dim())
                .map(|k| {
                    let d = xm[(i, k)] - xm[(j, k)];
                    d * d
                })
                .sum();
            m[(i, j)] = d2;
            m[(j, i)] = d2;
        }
    }
    SquaredDistanceMatrix(m)
}

/// Plain pairwise distances `‖x_i − x_j‖`.
pub fn pairwise_distances(x: &PositionMatrix) -> DMatrix<f64> {
    build_squared_distances(x).distances()
}

/// Classical double centering `−½ J M J`.
pub fn double_center(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut g = CenteringOperator::new(m.nrows()).apply_both(m);
    g *= -0.5;
    g
}

fn centered_gram(x: &PositionMatrix) -> DMatrix<f64> {
    let c = x.centered();
    c.as_matrix() * c.as_matrix().transpose()
}

fn check_same_shape(x: &PositionMatrix, y: &PositionMatrix) -> Result<()> {
    if x.as_matrix().shape() != y.as_matrix().shape() {
        return Err(Error::DimensionMismatch {
            expected: x.as_matrix().shape(),
            found: y.as_matrix().shape(),
        });
    }
    x.require_nondegenerate()
}

/// Rigid-invariant calibration error `(1/N) ‖J X Xᵀ J − J X̂ X̂ᵀ J‖_F` (m²).
pub fn calibration_error(x: &PositionMatrix, x_hat: &PositionMatrix) -> Result<f64> {
    check_same_shape(x, x_hat)?;
    let diff = centered_gram(x) - centered_gram(x_hat);
    Ok(diff.norm() / x.len() as f64)
}

/// Align `x_hat` onto `x` with the optimal translation and orthogonal map
/// (reflections allowed), via the SVD of the cross-covariance.
pub fn procrustes_align(x: &PositionMatrix, x_hat: &PositionMatrix) -> Result<PositionMatrix> {
    check_same_shape(x, x_hat)?;
    let target = x.centered();
    let source = x_hat.centered();
    let cross = source.as_matrix().transpose() * target.as_matrix();
    let f = svd(&cross);
    let rotation = f.u * f.v.transpose();
    let mut aligned = source.as_matrix() * rotation;
    let centroid = x.centroid();
    for mut row in aligned.row_iter_mut() {
        row += &centroid;
    }
    PositionMatrix::new(aligned)
}

/// Mean Euclidean distance between matched points after rigid alignment (m).
pub fn position_error(x: &PositionMatrix, x_hat: &PositionMatrix) -> Result<f64> {
    let aligned = procrustes_align(x, x_hat)?;
    let total: f64 = (0..x.len())
        .map(|i| (x.as_matrix().row(i) - aligned.as_matrix().row(i)).norm())
        .sum();
    Ok(total / x.len() as f64)
}
