use nalgebra::DMatrix;

use super::factored::FactoredEstimate;
use super::known::KnownEntries;
use crate::baselines::shortest_path_complete;
use crate::error::Result;
use crate::linalg::{svd, RANK_TOL};
use crate::observation::ObservedMatrix;

/// Rank-`η` spectral initialisation.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralInit {
    pub estimate: FactoredEstimate,
    /// Fewer than `η` non-zero singular values were found.
    pub rank_deficient: bool,
}

/// Zero-fill the unknown entries, keep the top `η` singular triplets and
/// rescale by `N²/|E|`, where `|E|` counts both orientations of every known
/// pair plus the `N` diagonal zeros.
pub fn spectral_init(obs: &ObservedMatrix, rank: usize) -> SpectralInit {
    let n = obs.len();
    let known = KnownEntries::new(obs);
    let scale = (n * n) as f64 / known.count().max(1) as f64;
    truncated_svd(obs.zero_filled(), rank, scale)
}

/// Fill the unknown entries with squared shortest-path lengths over the
/// observation graph and keep the top `η` singular triplets.
pub fn shortest_path_init(obs: &ObservedMatrix, rank: usize) -> Result<SpectralInit> {
    let paths = shortest_path_complete(obs)?;
    Ok(truncated_svd(&paths.map(|d| d * d), rank, 1.0))
}

fn truncated_svd(m: &DMatrix<f64>, rank: usize, scale: f64) -> SpectralInit {
    let n = m.nrows();
    let rank = rank.min(n);
    let f = svd(m);
    let top = f.singular_values.first().copied().unwrap_or(0.0);
    let nonzero = f
        .singular_values
        .iter()
        .take(rank)
        .filter(|&&s| top > 0.0 && s > RANK_TOL * top)
        .count();
    let u0 = f.u.columns(0, rank).into_owned();
    let v0 = f.v.columns(0, rank).into_owned();
    let s0 = DMatrix::from_fn(rank, rank, |a, b| if a == b { scale * f.singular_values[a] } else { 0.0 });
    SpectralInit {
        estimate: FactoredEstimate::new(u0, s0, v0),
        rank_deficient: nonzero < rank,
    }
}
