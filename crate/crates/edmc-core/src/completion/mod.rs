//! Matrix completion solvers for partially observed squared-distance
//! matrices:
//!
//! * `Mc`: trimming, rank-`η` spectral initialisation and gradient descent
//!   on the Grassmann factors with an exact inner solve for `S`;
//! * `McCadzow`: the same with a Cadzow projection after every step;
//! * `Emc`: the same with a projection onto the EDM cone after every step,
//!   which yields positions directly.
//!
//! `Mc` and `McCadzow` extract coordinates from the completed matrix with
//! classical MDS.

mod cadzow;
mod edm_projection;
mod factored;
mod known;
mod refine;
mod spectral;
mod trim;

use alloc::vec::Vec;
use nalgebra::DMatrix;

pub use cadzow::cadzow_project;
pub use edm_projection::{edm_cone_project, edm_cost, edm_factorization, EdmProjection, EdmProjectionOptions};
pub use factored::FactoredEstimate;
pub use refine::{
    completion_cost, completion_gradient, mc_refine, optimal_s, Initialization, IterationRecord, LineSearchOptions,
    RefineOutput, RefineStatus, SolverOptions,
};
pub use spectral::{shortest_path_init, spectral_init, SpectralInit};
pub use trim::trim;

use crate::baselines::mds_localize;
use crate::error::{invalid, Error, Result};
use crate::geometry::{build_squared_distances, PositionMatrix};
use crate::observation::ObservedMatrix;
use crate::rng::derive_seed;
use known::KnownEntries;
use refine::{iterate, Projection};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Mc,
    McCadzow,
    Emc,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Mc, Variant::McCadzow, Variant::Emc];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Mc => "MC",
            Variant::McCadzow => "MC2",
            Variant::Emc => "E-MC2",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub history: Vec<IterationRecord>,
    pub status: RefineStatus,
    /// Spectral initialisation found fewer than `η` non-zero singular values.
    pub rank_deficient_init: bool,
    /// Known pairs removed by trimming.
    pub trimmed_pairs: usize,
    /// RMSE of the spectral initialisation on the known entries.
    pub init_rmse: f64,
    /// RMSE of the returned matrix on the known entries.
    pub final_rmse: f64,
    /// The MDS step found fewer than `dim` positive eigenvalues.
    pub degenerate_embedding: bool,
    /// The last EDM projection met its coordinate tolerance (always true for
    /// variants without one).
    pub projection_converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutput {
    pub positions: PositionMatrix,
    /// Completed squared-distance matrix the positions were read from.
    pub completed: DMatrix<f64>,
    pub diagnostics: Diagnostics,
}

/// Complete `obs` and recover positions in `dim` dimensions.
pub fn solve(obs: &ObservedMatrix, dim: usize, variant: Variant, opts: &SolverOptions) -> Result<SolveOutput> {
    let n = obs.len();
    if !(1..=3).contains(&dim) {
        return Err(invalid("dim", "must be 1, 2 or 3"));
    }
    if obs.is_empty() {
        return Err(Error::EmptyObservation);
    }
    if n < dim + 2 {
        return Err(Error::Degenerate { n, dim });
    }
    let empty_rows = obs.rows_without_entries();
    if !empty_rows.is_empty() {
        return Err(Error::InsufficientObservations { rows: empty_rows });
    }
    let rank = opts.rank.unwrap_or(dim + 2);
    if rank == 0 || rank > n {
        return Err(invalid("rank", "must lie in 1..=N"));
    }
    if variant == Variant::Emc && rank > dim + 2 {
        return Err(invalid("rank", "E-MC2 needs rank <= dim + 2"));
    }

    let (init, trimmed_pairs) = match opts.init {
        Initialization::Spectral => {
            let trimmed = trim(obs, derive_seed(opts.seed, 1));
            let removed = obs.mask().pair_count() - trimmed.mask().pair_count();
            (spectral_init(&trimmed, rank), removed)
        }
        Initialization::ShortestPath => (shortest_path_init(obs, rank)?, 0),
    };
    let full_known = KnownEntries::new(obs);
    let init_rmse = full_known.rmse_factored(&init.estimate);

    // Refinement fits every observed entry; trimming only shapes the start.
    let projection = match variant {
        Variant::Mc => Projection::None,
        Variant::McCadzow => Projection::Cadzow,
        Variant::Emc => Projection::Edm { dim },
    };
    let mut refine_opts = opts.clone();
    refine_opts.edm.seed = derive_seed(opts.seed, 2);
    let out = iterate(&full_known, &full_known, &init.estimate, &refine_opts, projection)?;

    let (positions, completed, degenerate) = match variant {
        Variant::Emc => {
            let positions = out.positions.expect("the EDM variant always projects its start");
            let completed = build_squared_distances(&positions).into_matrix();
            (positions, completed, false)
        }
        Variant::Mc | Variant::McCadzow => {
            let product = out.estimate.product();
            let completed = if variant == Variant::Mc {
                let mut sym = (&product + product.transpose()) * 0.5;
                sym.fill_diagonal(0.0);
                sym
            } else {
                cadzow_project(&product)
            };
            let embedding = mds_localize(&completed, dim)?;
            (embedding.positions, completed, embedding.degenerate)
        }
    };
    let final_rmse = full_known.rmse(&completed);
    Ok(SolveOutput {
        positions,
        completed,
        diagnostics: Diagnostics {
            history: out.history,
            status: out.status,
            rank_deficient_init: init.rank_deficient,
            trimmed_pairs,
            init_rmse,
            final_rmse,
            degenerate_embedding: degenerate,
            projection_converged: out.projection_converged,
        },
    })
}
