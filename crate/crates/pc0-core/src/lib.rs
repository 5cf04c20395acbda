//! Zero-temperature threshold estimation for the 2D random-bond Ising model
//! (RBIM) and the 3D random-plaquette gauge model (RPGM).
//!
//! The pipeline: draw a quenched disorder sample (an error chain on the dual
//! torus lattice), locate its defects, pair them with an exact minimum-weight
//! perfect matching, build the minimal recovery chain, and classify the
//! homology of the combined cycle. The failure probability over many samples,
//! swept over disorder strength and lattice size, feeds finite-size-scaling
//! fits that extract the critical concentration `p_c0` and the correlation
//! length exponent `nu0`.

pub mod decoder;
pub mod disorder;
pub mod error;
pub mod fixtures;
pub mod lattice;
pub mod matcher;
pub mod montecarlo;
pub mod scaling;

pub use error::{Error, Result};
