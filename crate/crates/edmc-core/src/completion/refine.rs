//! Gradient descent on `F(U, V) = min_S ℱ(U, V, S)` with backtracking line
//! search and an optional projection after every accepted step.

use alloc::vec::Vec;
use nalgebra::DMatrix;

use super::cadzow::cadzow_project;
use super::edm_projection::{edm_cone_project, EdmProjection, EdmProjectionOptions};
use super::factored::FactoredEstimate;
use super::known::KnownEntries;
use crate::baselines::mds_localize;
use crate::error::Result;
use crate::geometry::PositionMatrix;
use crate::linalg::{frob_dot, svd, symmetric_eigen_desc, thin_qr, RANK_TOL};
use crate::observation::ObservedMatrix;
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchOptions {
    pub initial_step: f64,
    pub contraction: f64,
    /// Armijo sufficient-decrease constant.
    pub sufficient_decrease: f64,
    pub max_backtracks: usize,
}

impl Default for LineSearchOptions {
    fn default() -> Self {
        Self {
            initial_step: 1.0,
            contraction: 0.5,
            sufficient_decrease: 1e-4,
            max_backtracks: 60,
        }
    }
}

/// Starting point of the refinement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Initialization {
    /// Trimmed, zero-filled, rescaled rank-`η` projection.
    Spectral,
    /// Rank-`η` projection of the shortest-path completed matrix.
    #[default]
    ShortestPath,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub init: Initialization,
    pub max_iterations: usize,
    /// Stop once the relative change of `F` between iterations drops below this.
    pub rel_tolerance: f64,
    pub line_search: LineSearchOptions,
    pub edm: EdmProjectionOptions,
    /// Target rank `η`; `None` means `dim + 2`.
    pub rank: Option<usize>,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            init: Initialization::default(),
            max_iterations: 500,
            rel_tolerance: 1e-6,
            line_search: LineSearchOptions::default(),
            edm: EdmProjectionOptions::default(),
            rank: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefineStatus {
    Converged,
    MaxIterations,
    /// No step satisfied the sufficient-decrease condition; the last
    /// accepted iterate is returned.
    LineSearchFailed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `F(U, V)` after the iteration (including any projection).
    pub cost: f64,
    /// RMSE of the current estimate on the known off-diagonal entries.
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineOutput {
    pub estimate: FactoredEstimate,
    /// Record 0 describes the initial estimate.
    pub history: Vec<IterationRecord>,
    pub status: RefineStatus,
    /// Positions from the last EDM projection, when one ran.
    pub positions: Option<PositionMatrix>,
    /// Whether the last EDM projection met its coordinate tolerance.
    pub projection_converged: bool,
}

/// Step applied after every accepted gradient step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Projection {
    None,
    Cadzow,
    Edm { dim: usize },
}

/// `ℱ(U, V, S) = ½ Σ_{(i,j)∈E} (M_ij − (U S Vᵀ)_ij)²`, with the diagonal
/// counted as known zeros.
pub fn completion_cost(obs: &ObservedMatrix, f: &FactoredEstimate) -> f64 {
    KnownEntries::new(obs).cost(&f.u, &f.s, &f.v)
}

/// Partial derivatives of `ℱ` with respect to `U`, `V` and `S`.
pub fn completion_gradient(
    obs: &ObservedMatrix,
    f: &FactoredEstimate,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let r = KnownEntries::new(obs).residual(&f.u, &f.s, &f.v);
    gradients(&r, f)
}

fn gradients(r: &DMatrix<f64>, f: &FactoredEstimate) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let gu = -(r * &f.v * f.s.transpose());
    let gv = -(r.transpose() * &f.u * &f.s);
    let gs = -(f.u.transpose() * r * &f.v);
    (gu, gv, gs)
}

/// Least-squares `S` for the given subspaces.
pub fn optimal_s(obs: &ObservedMatrix, u: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
    KnownEntries::new(obs).solve_s(u, v)
}

/// Orthonormalise `U`, `V` and absorb the triangular factors into `S`; the
/// product is unchanged.
fn orthonormalize(f: FactoredEstimate) -> FactoredEstimate {
    let (qu, ru) = thin_qr(f.u);
    let (qv, rv) = thin_qr(f.v);
    let s = &ru * f.s * rv.transpose();
    FactoredEstimate::new(qu, s, qv)
}

/// Truncated (rank `η`) factorisation of a symmetric matrix from its
/// eigen-decomposition, keeping the largest `|λ|`.
fn symmetric_truncation(m: &DMatrix<f64>, rank: usize) -> FactoredEstimate {
    let n = m.nrows();
    let (values, vectors) = symmetric_eigen_desc(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()).then(a.cmp(&b)));
    let u = DMatrix::from_fn(n, rank, |i, c| vectors[(i, order[c])]);
    let v = DMatrix::from_fn(n, rank, |i, c| {
        let lambda = values[order[c]];
        if lambda < 0.0 {
            -vectors[(i, order[c])]
        } else {
            vectors[(i, order[c])]
        }
    });
    let s = DMatrix::from_fn(rank, rank, |a, b| if a == b { values[order[a]].abs() } else { 0.0 });
    FactoredEstimate::new(u, s, v)
}

/// Pseudo-inverses of `S Sᵀ` and `Sᵀ S`.
fn gram_pinv(s: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let f = svd(s);
    let top = f.singular_values.first().copied().unwrap_or(0.0);
    let inv2: Vec<f64> = f
        .singular_values
        .iter()
        .map(|&v| if top > 0.0 && v > RANK_TOL * top { 1.0 / (v * v) } else { 0.0 })
        .collect();
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(inv2));
    let left = &f.u * &d * f.u.transpose();
    let right = &f.v * &d * f.v.transpose();
    (left, right)
}

struct Projected {
    estimate: FactoredEstimate,
    edm: Option<EdmProjection>,
}

fn project(
    f: FactoredEstimate,
    projection: Projection,
    edm_opts: &EdmProjectionOptions,
    start: Option<&PositionMatrix>,
) -> Result<Projected> {
    Ok(match projection {
        Projection::None => Projected { estimate: f, edm: None },
        Projection::Cadzow => Projected {
            estimate: symmetric_truncation(&cadzow_project(&f.product()), f.rank()),
            edm: None,
        },
        Projection::Edm { dim } => {
            let edm = edm_cone_project(&orthonormalize(f), dim, edm_opts, start)?;
            Projected { estimate: edm.estimate.clone(), edm: Some(edm) }
        }
    })
}

/// The first EDM projection runs from the jittered cone vertex and from the
/// classical MDS embedding of the Cadzow target, keeping the lower `𝓗`.
fn first_projection(f: FactoredEstimate, projection: Projection, edm_opts: &EdmProjectionOptions) -> Result<Projected> {
    let Projection::Edm { dim } = projection else {
        return project(f, projection, edm_opts, None);
    };
    let f = orthonormalize(f);
    let vertex = edm_cone_project(&f, dim, edm_opts, None)?;
    let warm = mds_localize(&cadzow_project(&f.product()), dim)
        .ok()
        .and_then(|e| edm_cone_project(&f, dim, edm_opts, Some(&e.positions)).ok());
    let edm = match warm {
        Some(w) if w.cost < vertex.cost => w,
        _ => vertex,
    };
    Ok(Projected { estimate: edm.estimate.clone(), edm: Some(edm) })
}

/// Descent on the factors. Directions are the partial gradients scaled by
/// `(S Sᵀ)⁺` and `(Sᵀ S)⁺`. Without projection `S` is re-solved for every
/// trial and Armijo decides; with a projection the trial keeps the current
/// `S`, is projected, and is accepted when the projected cost decreases.
pub(crate) fn iterate(
    known: &KnownEntries,
    rmse_against: &KnownEntries,
    init: &FactoredEstimate,
    opts: &SolverOptions,
    projection: Projection,
) -> Result<RefineOutput> {
    let ls = &opts.line_search;
    let edm_opts = |stream: u64| EdmProjectionOptions {
        seed: derive_seed(opts.edm.seed, stream),
        ..opts.edm.clone()
    };
    let mut current = orthonormalize(init.clone());
    current.s = known.solve_s(&current.u, &current.v);
    let first = first_projection(current, projection, &edm_opts(0))?;
    let mut projection_converged = first.edm.as_ref().is_none_or(|e| e.converged);
    let mut positions = first.edm.map(|e| e.positions);
    current = orthonormalize(first.estimate);

    let mut cost = known.cost(&current.u, &current.s, &current.v);
    let floor = 1e-28 * known.scale().max(f64::MIN_POSITIVE);
    let mut history = alloc::vec![IterationRecord {
        iteration: 0,
        cost,
        rmse: rmse_against.rmse_factored(&current),
    }];
    let mut step = ls.initial_step;
    let mut status = RefineStatus::MaxIterations;

    for iteration in 1..=opts.max_iterations {
        if cost <= floor {
            status = RefineStatus::Converged;
            break;
        }
        let r = known.residual(&current.u, &current.s, &current.v);
        let (gu, gv, _) = gradients(&r, &current);
        let (left, right) = gram_pinv(&current.s);
        let du = &gu * left;
        let dv = &gv * right;
        let slope = frob_dot(&gu, &du) + frob_dot(&gv, &dv);
        if slope <= 0.0 {
            status = RefineStatus::Converged;
            break;
        }
        let trial_opts = edm_opts(iteration as u64);
        let mut accepted = None;
        let mut t = step;
        for _ in 0..=ls.max_backtracks {
            let u = &current.u - &du * t;
            let v = &current.v - &dv * t;
            let (candidate, c, ok) = if projection == Projection::None {
                let s = known.solve_s(&u, &v);
                let c = known.cost(&u, &s, &v);
                let ok = c <= cost - ls.sufficient_decrease * t * slope;
                (Projected { estimate: FactoredEstimate::new(u, s, v), edm: None }, c, ok)
            } else {
                let stepped = FactoredEstimate::new(u, current.s.clone(), v);
                let p = project(stepped, projection, &trial_opts, positions.as_ref())?;
                let c = known.cost(&p.estimate.u, &p.estimate.s, &p.estimate.v);
                (p, c, c < cost)
            };
            if c.is_finite() && ok {
                accepted = Some((candidate, c));
                break;
            }
            t *= ls.contraction;
        }
        let Some((next, new_cost)) = accepted else {
            status = RefineStatus::LineSearchFailed;
            break;
        };
        step = (t / ls.contraction).min(ls.initial_step.max(t));
        if let Some(edm) = next.edm {
            projection_converged = edm.converged;
            positions = Some(edm.positions);
        }
        let change = (cost - new_cost).abs() / cost.max(f64::MIN_POSITIVE);
        current = orthonormalize(next.estimate);
        cost = new_cost;
        history.push(IterationRecord {
            iteration,
            cost,
            rmse: rmse_against.rmse_factored(&current),
        });
        if change < opts.rel_tolerance {
            status = RefineStatus::Converged;
            break;
        }
    }
    Ok(RefineOutput {
        estimate: current,
        history,
        status,
        positions,
        projection_converged,
    })
}

/// Plain matrix-completion refinement (no projection) from `init`.
pub fn mc_refine(init: &FactoredEstimate, obs: &ObservedMatrix, opts: &SolverOptions) -> Result<RefineOutput> {
    let known = KnownEntries::new(obs);
    iterate(&known, &known, init, opts, Projection::None)
}
