//! Simulation of entanglement transfer between three finite systems at the
//! onset of an interaction: exact negativity trajectories, second-order onset
//! predictors (susceptibility, transmissibility, vulnerability), constructive
//! separability certificates, and extremization over constrained state
//! families.

pub mod dynamics;
pub mod error;
pub mod negativity;
pub mod optimize;
pub mod perturb;
pub mod qmat;
pub mod separability;
pub mod states;

pub use error::{Error, Result};
pub use qmat::{BipartiteShape, CMat};
pub use states::DensityMatrix;
