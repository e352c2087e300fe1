//! Reference localisation methods: classical MDS, MDS-MAP and s-stress.

mod mds;
mod shortest_path;
mod sstress;

pub use mds::{mds_localize, MdsEmbedding};
pub use shortest_path::{connected_components, mds_map, shortest_path_complete};
pub use sstress::{
    sstress_cost, sstress_descent, sstress_gradient, sstress_solve, DescentTrace, SStressOptions,
    SStressResult,
};
