use rand::seq::SliceRandom;

use crate::observation::ObservedMatrix;
use crate::rng::seeded;

/// Remove randomly chosen pairs from over-represented rows, i.e. rows with
/// more known entries than twice the mean count per row, until each such
/// row sits at the threshold. Pairs are removed symmetrically; the mean is
/// taken once, before any removal. Rows are visited in index order.
pub fn trim(obs: &ObservedMatrix, seed: u64) -> ObservedMatrix {
    let n = obs.len();
    if n == 0 {
        return obs.clone();
    }
    let counts = obs.mask().known_per_row();
    let mean = counts.iter().sum::<usize>() as f64 / n as f64;
    let threshold = 2.0 * mean;
    if counts.iter().all(|&c| c as f64 <= threshold) {
        return obs.clone();
    }
    let limit = libm::floor(threshold) as usize;
    let mut mask = obs.mask().clone();
    let mut rng = seeded(seed);
    for i in 0..n {
        let mut neighbors = mask.neighbors(i);
        if neighbors.len() as f64 <= threshold {
            continue;
        }
        neighbors.shuffle(&mut rng);
        let excess = neighbors.len() - limit;
        for &j in neighbors.iter().take(excess) {
            mask.remove(i, j);
        }
    }
    obs.with_mask(mask)
}
