//! Finite-volume operator algebra for quantum spin systems on lattices.
//!
//! Local observables are dense matrices tagged with their support
//! ([`tensorcore::LocalOperator`]). On top of that kernel the crate builds
//! interactions and local Hamiltonians ([`models`]), states and their
//! equilibrium checks ([`states`]), the GNS representation of a finite
//! state ([`gns`]), Heisenberg dynamics with Lieb-Robinson bounds
//! ([`dynamics`]) and Kitaev's toric code ([`toric`]).

pub mod dynamics;
pub mod error;
pub mod gns;
pub mod lattice;
pub mod models;
pub mod sampling;
pub mod states;
pub mod tensorcore;
pub mod toric;

/// Library version recorded in experiment manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Runs dense linear-algebra kernels on the calling thread only, so results
/// are bit-identical for any worker count. Task-level parallelism (sweeps,
/// sample loops) still uses the rayon pool.
pub fn use_sequential_kernels() {
    faer::set_global_parallelism(faer::Par::Seq);
}

pub use error::{Error, ErrorClass, Result};
pub use lattice::{Geometry, Metric, Region, Site};
pub use tensorcore::{c64, Axis, ComplexMatrix, LocalOperator};
