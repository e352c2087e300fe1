//! Dense decompositions. nalgebra holds the matrices; the factorisations run
//! on faer, whose SVD and symmetric eigensolver stay accurate on the highly
//! degenerate spectra of squared-distance matrices (nalgebra's SVD returns
//! wrong factors for e.g. a 64-point regular polygon).

use alloc::vec::Vec;
use faer::{Mat, MatRef, Side};
use nalgebra::{DMatrix, DVector};

/// A singular value counts as zero below this fraction of the largest one.
pub const RANK_TOL: f64 = 1e-9;

fn to_faer(m: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Thin singular value decomposition `m = u · diag(σ) · vᵀ` with `σ`
/// descending.
#[derive(Debug, Clone, PartialEq)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub v: DMatrix<f64>,
}

pub fn svd(m: &DMatrix<f64>) -> Svd {
    let k = m.nrows().min(m.ncols());
    if k == 0 {
        return Svd {
            u: DMatrix::zeros(m.nrows(), 0),
            singular_values: Vec::new(),
            v: DMatrix::zeros(m.ncols(), 0),
        };
    }
    match to_faer(m).thin_svd() {
        Ok(f) => Svd {
            u: from_faer(f.U()),
            singular_values: (0..k).map(|i| f.S().column_vector()[i]).collect(),
            v: from_faer(f.V()),
        },
        Err(_) => Svd {
            u: DMatrix::from_element(m.nrows(), k, f64::NAN),
            singular_values: alloc::vec![f64::NAN; k],
            v: DMatrix::from_element(m.ncols(), k, f64::NAN),
        },
    }
}

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    svd(m).singular_values
}

/// Eigen-decomposition of a symmetric matrix (lower triangle read), pairs
/// sorted by descending eigenvalue.
pub fn symmetric_eigen_desc(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    match to_faer(m).self_adjoint_eigen(Side::Lower) {
        Ok(e) => {
            // faer returns ascending eigenvalues.
            let values = (0..n).map(|k| e.S().column_vector()[n - 1 - k]).collect();
            let u = e.U();
            let vectors = DMatrix::from_fn(n, n, |i, c| u[(i, n - 1 - c)]);
            (values, vectors)
        }
        Err(_) => (alloc::vec![f64::NAN; n], DMatrix::from_element(n, n, f64::NAN)),
    }
}

/// Spectral norm of a symmetric matrix.
pub fn spectral_norm_symmetric(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let (values, _) = symmetric_eigen_desc(m);
    values.iter().fold(0.0_f64, |acc, v| if v.is_nan() { f64::NAN } else { acc.max(v.abs()) })
}

/// Thin QR factorisation `a = q * r` with `q` of the same shape as `a`.
pub fn thin_qr(a: DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let qr = to_faer(&a).qr();
    (from_faer(qr.compute_thin_Q().as_ref()), from_faer(qr.thin_R()))
}

/// Moore–Penrose pseudo-inverse with singular values below
/// `RANK_TOL·σ₁` treated as zero.
pub fn pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    let f = svd(m);
    let top = f.singular_values.first().copied().unwrap_or(0.0);
    let inv: Vec<f64> = f
        .singular_values
        .iter()
        .map(|&s| if top > 0.0 && s > RANK_TOL * top { 1.0 / s } else { 0.0 })
        .collect();
    let scaled = DMatrix::from_fn(f.v.nrows(), inv.len(), |i, k| f.v[(i, k)] * inv[k]);
    scaled * f.u.transpose()
}

/// Solve the symmetric positive semi-definite system `a x = b`, falling back
/// to a pseudo-inverse when the Cholesky factorisation fails.
pub fn solve_spd(a: DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    if let Some(chol) = a.clone().cholesky() {
        let x = chol.solve(b);
        if x.iter().all(|v| v.is_finite()) {
            return x;
        }
    }
    pinv(&a) * b
}

/// Frobenius inner product.
pub fn frob_dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}
