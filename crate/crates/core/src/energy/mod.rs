//! Coupling energies on the projective grid: the kernel `Ψ`, optimal
//! couplings, the fat-atom dichotomy, the diagonal action on couplings,
//! the off-diagonal surgery and the energy-contraction experiment.

mod contraction;
mod coupling;
mod kernel;
pub mod transport;

pub use contraction::{contraction_experiment, ContractionSetup, ContractionTrace, Round, StartCoupling};
pub use coupling::{
    coupling_energy, diagonal_apply, diagonal_transfer, fat_atom_check, min_energy_coupling, surgery_off_diagonal,
    vector_energy, CouplingVector, FatAtom, GridCoupling, MinCoupling, Surgery, MARGINAL_TOL, SUPPORT_CAP,
};
pub use kernel::{energy_kernel, projective_distance, Arc, EnergyParams, GridKernel, DEFAULT_CAP};
