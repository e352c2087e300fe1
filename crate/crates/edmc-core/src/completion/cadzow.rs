use nalgebra::DMatrix;

/// Map onto symmetric, non-negative, hollow matrices: clamp negatives to
/// zero, average `(M + Mᵀ)/2`, zero the diagonal (in that order).
pub fn cadzow_project(m: &DMatrix<f64>) -> DMatrix<f64> {
    assert!(m.is_square(), "cadzow projection needs a square matrix");
    let n = m.nrows();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            0.5 * (m[(i, j)].max(0.0) + m[(j, i)].max(0.0))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn clamp_then_average() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 3.0, 0.0]);
        assert_eq!(cadzow_project(&m), DMatrix::from_row_slice(2, 2, &[0.0, 1.5, 1.5, 0.0]));
    }

    #[test]
    fn fixed_point_on_hollow_symmetric() {
        let m = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 4.0, 1.0, 0.0, 2.0, 4.0, 2.0, 0.0]);
        assert_eq!(cadzow_project(&m), m);
    }

    #[test]
    fn all_negative_goes_to_zero() {
        let m = DMatrix::from_fn(4, 4, |i, j| if i == j { 5.0 } else { -1.0 });
        assert_eq!(cadzow_project(&m), DMatrix::zeros(4, 4));
    }

    proptest! {
        #[test]
        fn idempotent(values in proptest::collection::vec(-10.0f64..10.0, 25)) {
            let m = DMatrix::from_vec(5, 5, values);
            let once = cadzow_project(&m);
            prop_assert_eq!(cadzow_project(&once), once.clone());
            prop_assert_eq!(once.transpose(), once.clone());
            prop_assert!(once.iter().all(|v| *v >= 0.0));
        }
    }
}
