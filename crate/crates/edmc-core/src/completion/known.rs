use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use super::factored::FactoredEstimate;
use crate::linalg::solve_spd;
use crate::observation::ObservedMatrix;

/// Known entries of the observed matrix grouped by row, both orientations of
/// every pair, plus the always-known zero diagonal.
#[derive(Debug, Clone)]
pub(crate) struct KnownEntries {
    pub n: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl KnownEntries {
    pub fn new(obs: &ObservedMatrix) -> Self {
        let n = obs.len();
        let mut rows: Vec<Vec<(usize, f64)>> = (0..n).map(|i| alloc::vec![(i, 0.0)]).collect();
        for (i, j, v) in obs.known() {
            rows[i].push((j, v));
            rows[j].push((i, v));
        }
        for r in rows.iter_mut() {
            r.sort_by_key(|e| e.0);
        }
        Self { n, rows }
    }

    /// `|E|`, counting both orientations and the diagonal.
    pub fn count(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// `½ Σ_E (M_ij − (U S Vᵀ)_ij)²`.
    pub fn cost(&self, u: &DMatrix<f64>, s: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
        let us = u * s;
        let mut total = 0.0;
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, m) in row {
                let r = m - us.row(i).dot(&v.row(j));
                total += r * r;
            }
        }
        0.5 * total
    }

    /// Residual `P_E(M − U S Vᵀ)` as a dense matrix.
    pub fn residual(&self, u: &DMatrix<f64>, s: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
        let us = u * s;
        let mut r = DMatrix::zeros(self.n, self.n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, m) in row {
                r[(i, j)] = m - us.row(i).dot(&v.row(j));
            }
        }
        r
    }

    /// Exact least-squares `S` for fixed `U`, `V`.
    pub fn solve_s(&self, u: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
        let r = u.ncols();
        let dim = r * r;
        let mut a = DMatrix::zeros(dim, dim);
        let mut b = DVector::zeros(dim);
        let mut w = DMatrix::zeros(r, r);
        let mut mv = DVector::zeros(r);
        for (i, row) in self.rows.iter().enumerate() {
            w.fill(0.0);
            mv.fill(0.0);
            for &(j, m) in row {
                let vj = v.row(j);
                for p in 0..r {
                    mv[p] += m * vj[p];
                    for q in 0..r {
                        w[(p, q)] += vj[p] * vj[q];
                    }
                }
            }
            let ui = u.row(i);
            for p in 0..r {
                for q in 0..r {
                    b[p * r + q] += ui[p] * mv[q];
                }
            }
            for p in 0..r {
                for c in 0..r {
                    let uu = ui[p] * ui[c];
                    if uu == 0.0 {
                        continue;
                    }
                    for q in 0..r {
                        for d in 0..r {
                            a[(p * r + q, c * r + d)] += uu * w[(q, d)];
                        }
                    }
                }
            }
        }
        let x = solve_spd(a, &b);
        DMatrix::from_fn(r, r, |p, q| x[p * r + q])
    }

    /// Root-mean-square error over the known off-diagonal entries.
    pub fn rmse(&self, estimate: &DMatrix<f64>) -> f64 {
        let mut total = 0.0;
        let mut count = 0usize;
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, m) in row {
                if i != j {
                    let r = estimate[(i, j)] - m;
                    total += r * r;
                    count += 1;
                }
            }
        }
        if count == 0 {
            0.0
        } else {
            libm::sqrt(total / count as f64)
        }
    }

    pub fn rmse_factored(&self, f: &FactoredEstimate) -> f64 {
        self.rmse(&f.product())
    }

    /// `½ Σ_E M_ij²`, the cost of the zero estimate.
    pub fn scale(&self) -> f64 {
        0.5 * self.rows.iter().flatten().map(|e| e.1 * e.1).sum::<f64>()
    }
}
