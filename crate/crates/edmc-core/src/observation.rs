//! Measurement chain from ground truth to the partially observed matrix:
//! multiplicative distance noise, jitter, structured (range) masking and
//! random erasure.

use alloc::vec::Vec;
use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::rng::{seeded, standard_normal};

/// Speed of sound used throughout (m/s).
pub const SPEED_OF_SOUND: f64 = 340.0;

/// Half-width of the synchronisation jitter for a 16 kHz pilot, `c / 2f` (m).
pub const JITTER_16KHZ: f64 = SPEED_OF_SOUND / (2.0 * 16_000.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseDistribution {
    /// `υ ~ N(0, ς²)`.
    #[default]
    Gaussian,
    /// `υ ~ U[−√3 ς, √3 ς]`: bounded, sub-Gaussian, standard deviation `ς`.
    BoundedUniform,
}

/// Noise applied to true distances:
/// `d̃ = d (1 + υ) + ε + j` with `υ` of std `varsigma`, `ε ~ N(0, additive_std²)`
/// and `j ~ U[−jitter_halfwidth, jitter_halfwidth]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub varsigma: f64,
    pub distribution: NoiseDistribution,
    /// Absolute (distance independent) Gaussian noise, metres.
    pub additive_std: f64,
    pub jitter_halfwidth: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            varsigma: 0.0,
            distribution: NoiseDistribution::Gaussian,
            additive_std: 0.0,
            jitter_halfwidth: 0.0,
            seed: 0,
        }
    }
}

impl NoiseModel {
    pub fn multiplicative(varsigma: f64, seed: u64) -> Self {
        Self {
            varsigma,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.varsigma >= 0.0) || !self.varsigma.is_finite() {
            return Err(invalid("varsigma", "must be finite and non-negative"));
        }
        if !(self.additive_std >= 0.0) || !self.additive_std.is_finite() {
            return Err(invalid("additive_std", "must be finite and non-negative"));
        }
        if !(self.jitter_halfwidth >= 0.0) || !self.jitter_halfwidth.is_finite() {
            return Err(invalid("jitter_halfwidth", "must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Perturb a symmetric hollow distance matrix. One draw per unordered pair,
/// mirrored; negative results are clamped to zero; the diagonal stays zero.
pub fn add_noise(d: &DMatrix<f64>, model: &NoiseModel) -> Result<DMatrix<f64>> {
    model.validate()?;
    if !d.is_square() {
        return Err(Error::DimensionMismatch {
            expected: (d.nrows(), d.nrows()),
            found: d.shape(),
        });
    }
    let n = d.nrows();
    let mut rng = seeded(model.seed);
    let spread = libm::sqrt(3.0) * model.varsigma;
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let upsilon = match model.distribution {
                NoiseDistribution::Gaussian => model.varsigma * standard_normal(&mut rng),
                NoiseDistribution::BoundedUniform => spread * (2.0 * rng.random::<f64>() - 1.0),
            };
            let additive = model.additive_std * standard_normal(&mut rng);
            let jitter = model.jitter_halfwidth * (2.0 * rng.random::<f64>() - 1.0);
            let v = (d[(i, j)] * (1.0 + upsilon) + additive + jitter).max(0.0);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}

/// Entry-wise square.
pub fn squared(d: &DMatrix<f64>) -> DMatrix<f64> {
    d.map(|v| v * v)
}

/// Symmetric set of observed off-diagonal index pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationMask {
    n: usize,
    known: Vec<bool>,
    p: f64,
    d_max: f64,
}

impl ObservationMask {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            known: alloc::vec![false; n * n],
            p: 1.0,
            d_max: f64::INFINITY,
        }
    }

    pub fn full(n: usize) -> Self {
        let mut m = Self::empty(n);
        for i in 0..n {
            for j in (i + 1)..n {
                m.insert(i, j);
            }
        }
        m
    }

    pub fn from_pairs(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut m = Self::empty(n);
        for (i, j) in pairs {
            m.insert(i, j);
        }
        m
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.known.iter().all(|k| !k)
    }

    /// Random-retention probability the mask was drawn with.
    pub fn p(&self) -> f64 {
        self.p
    }

    /// Structured cutoff the mask was drawn with.
    pub fn d_max(&self) -> f64 {
        self.d_max
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.known[i * self.n + j]
    }

    /// Mark `(i, j)` and `(j, i)` known. Diagonal pairs are ignored.
    pub fn insert(&mut self, i: usize, j: usize) {
        if i != j {
            self.known[i * self.n + j] = true;
            self.known[j * self.n + i] = true;
        }
    }

    pub fn remove(&mut self, i: usize, j: usize) {
        self.known[i * self.n + j] = false;
        self.known[j * self.n + i] = false;
    }

    /// Known unordered pairs `(i, j)` with `i < j`, row-major.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if self.contains(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn pair_count(&self) -> usize {
        self.known.iter().filter(|k| **k).count() / 2
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.n).filter(|&j| self.contains(i, j)).collect()
    }

    pub fn known_per_row(&self) -> Vec<usize> {
        (0..self.n)
            .map(|i| self.known[i * self.n..(i + 1) * self.n].iter().filter(|k| **k).count())
            .collect()
    }

    /// Fraction of off-diagonal pairs that are not observed.
    pub fn missing_fraction(&self) -> f64 {
        let total = self.n * self.n.saturating_sub(1) / 2;
        if total == 0 {
            return 0.0;
        }
        1.0 - self.pair_count() as f64 / total as f64
    }
}

/// Keep pair `(i, j)` iff `d_ij < d_max` and a per-pair Bernoulli(p) draw
/// succeeds. The Bernoulli is drawn for every unordered pair in row-major
/// order, so the random erasure pattern does not depend on `d_max`.
pub fn make_mask(d: &DMatrix<f64>, d_max: f64, p: f64, seed: u64) -> Result<ObservationMask> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(invalid("p", "must lie in (0, 1]"));
    }
    if !(d_max > 0.0) {
        return Err(invalid("d_max", "must be positive"));
    }
    let n = d.nrows();
    let mut rng = seeded(seed);
    let mut mask = ObservationMask::empty(n);
    mask.p = p;
    mask.d_max = d_max;
    for i in 0..n {
        for j in (i + 1)..n {
            let kept = rng.random::<f64>() < p;
            if kept && d[(i, j)] < d_max {
                mask.insert(i, j);
            }
        }
    }
    Ok(mask)
}

/// Partially observed squared-distance matrix `M^E`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedMatrix {
    values: DMatrix<f64>,
    mask: ObservationMask,
}

impl ObservedMatrix {
    pub fn len(&self) -> usize {
        self.mask.n
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn mask(&self) -> &ObservationMask {
        &self.mask
    }

    /// Observed values with zeros in every unknown position.
    pub fn zero_filled(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.mask.contains(i, j).then(|| self.values[(i, j)])
    }

    /// Known entries `(i, j, value)` with `i < j`.
    pub fn known(&self) -> Vec<(usize, usize, f64)> {
        self.mask
            .pairs()
            .into_iter()
            .map(|(i, j)| (i, j, self.values[(i, j)]))
            .collect()
    }

    /// Rows whose only known entry is the implicit zero diagonal.
    pub fn rows_without_entries(&self) -> Vec<usize> {
        self.mask
            .known_per_row()
            .iter()
            .enumerate()
            .filter_map(|(i, c)| (*c == 0).then_some(i))
            .collect()
    }

    /// Matrix with `NaN` in unknown off-diagonal positions and zeros on the
    /// diagonal.
    pub fn to_nan_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                0.0
            } else {
                self.get(i, j).unwrap_or(f64::NAN)
            }
        })
    }

    /// Build from a matrix where `NaN` marks a missing entry. The diagonal is
    /// ignored. A pair known on one side only is taken as known; a pair known
    /// on both sides gets the mean of the two values.
    pub fn from_nan_matrix(m: &DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch {
                expected: (m.nrows(), m.nrows()),
                found: m.shape(),
            });
        }
        let n = m.nrows();
        let mut mask = ObservationMask::empty(n);
        let mut values = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (m[(i, j)], m[(j, i)]);
                if a.is_infinite() || b.is_infinite() {
                    return Err(Error::NonFinite);
                }
                let v = match (a.is_nan(), b.is_nan()) {
                    (true, true) => continue,
                    (false, true) => a,
                    (true, false) => b,
                    (false, false) => 0.5 * (a + b),
                };
                if v < 0.0 {
                    return Err(invalid("observed matrix", "squared distances must be non-negative"));
                }
                mask.insert(i, j);
                values[(i, j)] = v;
                values[(j, i)] = v;
            }
        }
        Ok(Self { values, mask })
    }

    /// Replace the mask by a subset of itself (used by trimming).
    pub(crate) fn with_mask(&self, mask: ObservationMask) -> Self {
        let values = DMatrix::from_fn(self.len(), self.len(), |i, j| {
            if mask.contains(i, j) {
                self.values[(i, j)]
            } else {
                0.0
            }
        });
        Self { values, mask }
    }
}

/// `M^E = 𝒫_E(M̃)`: copy the noisy squared distances on the mask.
pub fn observe(m_noisy: &DMatrix<f64>, mask: &ObservationMask) -> Result<ObservedMatrix> {
    let n = mask.len();
    if m_noisy.shape() != (n, n) {
        return Err(Error::DimensionMismatch {
            expected: (n, n),
            found: m_noisy.shape(),
        });
    }
    let mut values = DMatrix::zeros(n, n);
    for (i, j) in mask.pairs() {
        let v = 0.5 * (m_noisy[(i, j)] + m_noisy[(j, i)]);
        if !v.is_finite() {
            return Err(Error::NonFinite);
        }
        values[(i, j)] = v;
        values[(j, i)] = v;
    }
    Ok(ObservedMatrix {
        values,
        mask: mask.clone(),
    })
}
