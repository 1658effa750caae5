//! Topological state transfer in generalized Su-Schrieffer-Heeger chains.
//!
//! The crate is organized bottom-up:
//!
//! - [`lattice`]: chain geometries (plain SSH, mirror-symmetric interface
//!   chain, K-branch router), real-space and Bloch Hamiltonians, disorder
//!   and loss.
//! - [`spectral`]: eigendecomposition, dispersion, winding number, analytic
//!   edge and gap states, instantaneous gap tracking.
//! - [`protocol`]: time-dependent driving schedules and disorder sampling.
//! - [`dynamics`]: fourth-order Runge-Kutta evolution of the site amplitudes,
//!   fidelity and phase observables.
//! - [`experiments`]: fidelity curves, stabilization times, phase diagrams,
//!   disorder/loss ensembles, scalability sweeps and cubic fits.
//!
//! Units throughout: `J0 = 1`, `hbar = 1`; energies in `J0`, times in `1/J0`.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod lattice;
pub mod protocol;
pub mod spectral;

pub use num_complex::Complex64;

pub use dynamics::{evolve, EvolutionResult, EvolveOptions, StateVector};
pub use error::{Error, Result};
pub use experiments::{CubicFit, EnsembleStats, FidelityCurve, PhaseDiagram};
pub use lattice::{
    ChainSpec, CouplingPoint, DisorderKind, DisorderRealization, DisorderSymmetry,
    HamiltonianMatrix, LossModel, Topology,
};
pub use protocol::{DriveSchedule, Protocol, VbProfile};
pub use spectral::{EdgeStatePair, SpectrumSnapshot};
