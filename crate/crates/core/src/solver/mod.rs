//! Spectral Lippmann–Schwinger solver for the `ML`-periodic scattering
//! problem.

pub mod gmres;
pub mod grid;
pub mod potential;
pub mod scattering;

pub use grid::{Grid, GridField, SourcePair};
pub use scattering::{
    energy_balance, flux, incident_source, rayleigh_extract, rayleigh_extract_modes, rayleigh_of_trace, solve_scattering,
    volume_potential, ContrastField, EnergyBalance, FluxReport, Solution, Solver, SolverOptions,
};
