//! Simulation core for CLE4-decorated supercritical Liouville quantum gravity
//! disks and their boundary-length cascades.
//!
//! Everything here is `no_std` with `alloc`; IO, file formats and the command
//! line interface live in the companion `sclqg` crate.
#![no_std]
// NaN-rejecting guards read as `!(x > 0.0)` throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
#[macro_use]
extern crate std;

pub mod cascade;
pub mod disk;
pub mod error;
pub mod gff;
pub mod gmc;
pub mod lattice;
pub mod linalg;
pub mod loops;
pub mod maps;
pub mod moebius;
pub mod params;
pub mod rng;
pub mod stats;

/// Float methods through libm; shadowed by the inherent ones whenever std is
/// linked.
mod float {
    #[allow(unused_imports)]
    pub(crate) use num_traits::Float as _;
}

pub use error::{Error, Result};
pub use params::ParamSet;
