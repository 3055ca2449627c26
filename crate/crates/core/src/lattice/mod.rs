//! Torus geometry, i.i.d. disorder, and assembly of the finite-volume
//! Hamiltonian `H = -Δ + V` with periodic boundary conditions.

mod disorder;
mod geometry;
mod operator;

pub use disorder::{mask_potential, sample_disorder, site_uniform, DisorderField, DistributionSpec};
pub use geometry::{build_box, choose_decoupling_sublattice, BoxSpec, Lattice, SiteIndex, SublatticeSpec};
pub use operator::{assemble_hamiltonian, OperatorMatrix};

/// Default cap on |Λ| for anything that is diagonalized densely.
pub const DEFAULT_VOLUME_CAP: usize = 4096;

/// Step of the decoupling sublattice `k₀ + (4ℤ)^d`.
pub const SUBLATTICE_STEP: i64 = 4;
