#![no_std]
extern crate alloc;

pub mod baselines;
pub mod coherence;
pub mod completion;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod observation;
pub mod rng;
pub mod theory;

pub use error::{Error, Result};
pub use geometry::{PositionMatrix, SquaredDistanceMatrix};
pub use observation::{NoiseModel, ObservationMask, ObservedMatrix};
