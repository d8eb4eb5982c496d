//! Static equilibrium of Cosserat rod networks.
//!
//! Nodal poses on SE(3) and per-element strain slopes are the unknowns. Each
//! element carries a linear strain field whose mean is recovered in closed form
//! from the relative pose of its two nodes through a fourth-order Magnus
//! relation; equilibria are found by a Riemannian Newton iteration with a
//! Gauss–Newton tangent.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the command line
//! and the benchmark drivers live in the `cosserat` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
mod math;

pub mod element;
pub mod liegroup;
pub mod network;
pub mod solver;
pub mod sparse;
pub mod validation;

pub use error::{Error, Result};
pub use liegroup::{Pose, Twist};
