//! Fixed microphone layouts.

use edmc_core::PositionMatrix;

use crate::error::AppResult;
use crate::io::parse_positions;

const REAL_11MIC: &str = include_str!("../layouts/real_11mic.csv");
const REAL_12MIC: &str = include_str!("../layouts/real_12mic.csv");

/// Planar recording layout: eight microphones on a 20 cm circle, one at the
/// centre, two (or three with `twelfth`) at 70 cm.
pub fn real_layout(twelfth: bool) -> AppResult<PositionMatrix> {
    if twelfth {
        parse_positions(REAL_12MIC, "real_12mic.csv")
    } else {
        parse_positions(REAL_11MIC, "real_11mic.csv")
    }
}

/// `count` points on a circle, the first at `start_deg`.
pub fn circle(center: [f64; 2], radius: f64, count: usize, start_deg: f64) -> Vec<[f64; 2]> {
    (0..count)
        .map(|k| {
            let t = (start_deg + 360.0 * k as f64 / count as f64).to_radians();
            [center[0] + radius * t.cos(), center[1] + radius * t.sin()]
        })
        .collect()
}

/// Nine-channel compact array: eight on a circle of radius `radius` plus the
/// centre.
pub fn nine_channel(center: [f64; 2], radius: f64) -> Vec<[f64; 2]> {
    let mut pts = circle(center, radius, 8, 0.0);
    pts.push(center);
    pts
}

/// Two nine-channel arrays of 20 cm diameter whose centres are 1 m apart.
pub fn distributed_18mic() -> PositionMatrix {
    let mut pts = nine_channel([0.0, 0.0], 0.1);
    pts.extend(nine_channel([1.0, 0.0], 0.1));
    PositionMatrix::from_points(&pts).expect("fixed layout is finite")
}

/// A nine-channel array of 20 cm diameter inside a six-channel ring whose
/// microphones sit 70 cm from the centre.
pub fn distributed_15mic() -> PositionMatrix {
    let mut pts = nine_channel([0.0, 0.0], 0.1);
    pts.extend(circle([0.0, 0.0], 0.7, 6, 0.0));
    PositionMatrix::from_points(&pts).expect("fixed layout is finite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use edmc_core::geometry::pairwise_distances;

    fn missing_fraction(x: &PositionMatrix, d_max: f64) -> f64 {
        let d = pairwise_distances(x);
        let n = x.len();
        let mut far = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                if d[(i, j)] >= d_max {
                    far += 1;
                }
            }
        }
        far as f64 / (n * (n - 1) / 2) as f64
    }

    #[test]
    fn bundled_layouts_match_description() {
        let x = real_layout(false).unwrap();
        let y = real_layout(true).unwrap();
        assert_eq!((x.len(), x.dim()), (11, 2));
        assert_eq!((y.len(), y.dim()), (12, 2));
        let d = pairwise_distances(&y);
        for k in 0..8 {
            assert!((d[(k, 8)] - 0.1).abs() < 1e-12);
        }
        for k in 9..12 {
            assert!((d[(k, 8)] - 0.7).abs() < 1e-12);
        }
        for i in 0..11 {
            for j in 0..2 {
                assert_eq!(x.as_matrix()[(i, j)], y.as_matrix()[(i, j)]);
            }
        }
    }

    #[test]
    fn distributed_missing_fractions() {
        let f18 = missing_fraction(&distributed_18mic(), 1.01);
        let f15 = missing_fraction(&distributed_15mic(), 0.73);
        assert!((0.2..0.3).contains(&f18), "{f18}");
        assert!((0.2..0.35).contains(&f15), "{f15}");
    }
}
