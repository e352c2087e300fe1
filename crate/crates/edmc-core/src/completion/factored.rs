use nalgebra::DMatrix;

/// Rank-`η` factorisation `U S Vᵀ` carried through the completion iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredEstimate {
    pub u: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub v: DMatrix<f64>,
}

impl FactoredEstimate {
    pub fn new(u: DMatrix<f64>, s: DMatrix<f64>, v: DMatrix<f64>) -> Self {
        assert_eq!(u.ncols(), s.nrows(), "U and S disagree on rank");
        assert_eq!(v.ncols(), s.ncols(), "V and S disagree on rank");
        assert_eq!(u.nrows(), v.nrows(), "U and V disagree on size");
        Self { u, s, v }
    }

    pub fn len(&self) -> usize {
        self.u.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.u.nrows() == 0
    }

    pub fn rank(&self) -> usize {
        self.s.nrows()
    }

    pub fn product(&self) -> DMatrix<f64> {
        &self.u * &self.s * self.v.transpose()
    }
}
