use alloc::vec::Vec;
use nalgebra::DMatrix;

use super::shortest_path::shortest_path_complete;
use crate::error::{invalid, Error, Result};
use crate::geometry::PositionMatrix;
use crate::observation::ObservedMatrix;
use crate::rng::{derive_seed, seeded, uniform_in_ball};

#[derive(Debug, Clone, PartialEq)]
pub struct SStressOptions {
    /// Weights `w_ij = d̃_ij^α`; `0` gives unit weights, `−2` elastic scaling.
    pub weight_exponent: i32,
    pub max_iterations: usize,
    /// Stop when the relative cost decrease of an accepted step falls below this.
    pub rel_tolerance: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SStressOptions {
    fn default() -> Self {
        Self {
            weight_exponent: 0,
            max_iterations: 5000,
            rel_tolerance: 1e-10,
            restarts: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SStressResult {
    pub positions: PositionMatrix,
    pub cost: f64,
    /// Final cost reached from every initialisation, in restart order.
    pub restart_costs: Vec<f64>,
    /// Cost of every initialisation before descent.
    pub initial_costs: Vec<f64>,
    pub weight_exponent: i32,
    pub restarts: usize,
}

/// Cost after every accepted descent step, starting with the initial cost.
#[derive(Debug, Clone, PartialEq)]
pub struct DescentTrace {
    pub costs: Vec<f64>,
    pub converged: bool,
}

struct Terms {
    pairs: Vec<(usize, usize, f64, f64)>,
}

impl Terms {
    fn new(obs: &ObservedMatrix, alpha: i32) -> Self {
        let pairs = obs
            .known()
            .into_iter()
            .map(|(i, j, m)| {
                let d = libm::sqrt(m.max(0.0));
                let w = if alpha == 0 {
                    1.0
                } else if d > 0.0 {
                    libm::pow(d, alpha as f64)
                } else {
                    0.0
                };
                (i, j, m, w)
            })
            .collect();
        Self { pairs }
    }

    fn cost(&self, x: &DMatrix<f64>) -> f64 {
        self.pairs
            .iter()
            .map(|&(i, j, m, w)| {
                let r = (x.row(i) - x.row(j)).norm_squared() - m;
                w * r * r
            })
            .sum()
    }

    fn gradient(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(x.nrows(), x.ncols());
        for &(i, j, m, w) in &self.pairs {
            let diff = x.row(i) - x.row(j);
            let r = diff.norm_squared() - m;
            let scaled = diff * (4.0 * w * r);
            let mut gi = g.row_mut(i);
            gi += &scaled;
            let mut gj = g.row_mut(j);
            gj -= &scaled;
        }
        g
    }
}

/// Weighted s-stress `Σ_{(i,j)∈E, i<j} w_ij (‖x_i − x_j‖² − d̃²_ij)²`.
pub fn sstress_cost(x: &PositionMatrix, obs: &ObservedMatrix, weight_exponent: i32) -> f64 {
    Terms::new(obs, weight_exponent).cost(x.as_matrix())
}

/// Analytic gradient of [`sstress_cost`] with respect to every coordinate.
pub fn sstress_gradient(x: &PositionMatrix, obs: &ObservedMatrix, weight_exponent: i32) -> DMatrix<f64> {
    Terms::new(obs, weight_exponent).gradient(x.as_matrix())
}

fn descend(terms: &Terms, x0: &DMatrix<f64>, opts: &SStressOptions) -> (DMatrix<f64>, DescentTrace) {
    const ARMIJO: f64 = 1e-4;
    let mut x = x0.clone();
    let mut cost = terms.cost(&x);
    let mut costs = alloc::vec![cost];
    let mut grad = terms.gradient(&x);
    let mut step = 1.0;
    let mut converged = false;
    for _ in 0..opts.max_iterations {
        let gnorm2 = grad.norm_squared();
        if gnorm2 == 0.0 || cost == 0.0 {
            converged = true;
            break;
        }
        let mut accepted = None;
        let mut t = step;
        for _ in 0..80 {
            let candidate = &x - &grad * t;
            let c = terms.cost(&candidate);
            if c <= cost - ARMIJO * t * gnorm2 {
                accepted = Some((candidate, c));
                break;
            }
            t *= 0.5;
        }
        let Some((next, next_cost)) = accepted else {
            converged = true;
            break;
        };
        let next_grad = terms.gradient(&next);
        // Barzilai–Borwein estimate seeds the next trial step.
        let s = &next - &x;
        let y = &next_grad - &grad;
        let sy = s.dot(&y);
        step = if sy > 0.0 { (s.norm_squared() / sy).clamp(1e-12, 1e12) } else { 2.0 * t };
        let decrease = cost - next_cost;
        x = next;
        grad = next_grad;
        cost = next_cost;
        costs.push(cost);
        if decrease <= opts.rel_tolerance * cost.max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    (x, DescentTrace { costs, converged })
}

/// Gradient descent with backtracking line search from a given start.
pub fn sstress_descent(
    init: &PositionMatrix,
    obs: &ObservedMatrix,
    opts: &SStressOptions,
) -> Result<(PositionMatrix, DescentTrace)> {
    if init.len() != obs.len() {
        return Err(Error::DimensionMismatch {
            expected: (obs.len(), init.dim()),
            found: (init.len(), init.dim()),
        });
    }
    let terms = Terms::new(obs, opts.weight_exponent);
    let (x, trace) = descend(&terms, init.as_matrix(), opts);
    Ok((PositionMatrix::new(x)?, trace))
}

/// Best-of-`restarts` s-stress minimisation. The first start is the MDS-MAP
/// embedding (when the observation graph is connected), the others are
/// seeded uniform draws in a ball spanning the estimated array diameter.
pub fn sstress_solve(obs: &ObservedMatrix, dim: usize, opts: &SStressOptions) -> Result<SStressResult> {
    if opts.restarts == 0 {
        return Err(invalid("restarts", "must be at least 1"));
    }
    if obs.is_empty() {
        return Err(Error::EmptyObservation);
    }
    let n = obs.len();
    let terms = Terms::new(obs, opts.weight_exponent);
    let radius = match shortest_path_complete(obs) {
        Ok(d) => 0.5 * d.max(),
        Err(_) => 0.5 * obs.known().iter().fold(0.0_f64, |m, k| m.max(libm::sqrt(k.2))),
    };
    let mut best: Option<(DMatrix<f64>, f64)> = None;
    let mut restart_costs = Vec::with_capacity(opts.restarts);
    let mut initial_costs = Vec::with_capacity(opts.restarts);
    for r in 0..opts.restarts {
        let mut rng = seeded(derive_seed(opts.seed, r as u64));
        let mut p = alloc::vec![0.0; dim];
        let mut start = DMatrix::zeros(n, dim);
        for i in 0..n {
            uniform_in_ball(&mut rng, radius.max(1e-3), &mut p);
            for k in 0..dim {
                start[(i, k)] = p[k];
            }
        }
        initial_costs.push(terms.cost(&start));
        let (x, trace) = descend(&terms, &start, opts);
        let cost = *trace.costs.last().unwrap_or(&f64::INFINITY);
        restart_costs.push(cost);
        if best.as_ref().is_none_or(|(_, c)| cost < *c) {
            best = Some((x, cost));
        }
    }
    let (x, cost) = best.expect("at least one restart");
    Ok(SStressResult {
        positions: PositionMatrix::new(x)?,
        cost,
        restart_costs,
        initial_costs,
        weight_exponent: opts.weight_exponent,
        restarts: opts.restarts,
    })
}
