//! Numerical toolkit for the power statistics of a two-mode bosonic heat
//! engine.
//!
//! Two harmonic modes exchange quanta through a coherent coupling g while
//! damped by hot and cold thermal baths (rates kappa_h, kappa_c, occupations
//! nbar_h, nbar_c); each transferred quantum delivers work Delta = Omega_h -
//! Omega_c. The crate evaluates the average output power and its
//! zero-frequency noise in three descriptions of the same machine:
//!
//! * the quantum model (Lindblad / quantum Langevin),
//! * a classical wave model (complex-amplitude Langevin equations),
//! * a classical particle model (occupation-number rate equation),
//!
//! and cross-validates every number along independent routes: closed-form
//! expressions ([`closed_form`]), steady-state moment systems with
//! regression-theorem noise ([`moment`]), full counting statistics on a
//! truncated occupation lattice plus Gillespie simulation ([`particle`]),
//! stochastic wave trajectories ([`wave`]), and a truncated Fock-space
//! Lindblad reference ([`fock`]). [`analysis`] derives Fano factors,
//! thermodynamic-uncertainty bounds and parameter sweeps from these;
//! [`verify`] bundles the whole agreement battery.

pub mod analysis;
pub mod closed_form;
pub mod error;
pub mod fock;
pub mod mc;
pub mod moment;
pub mod params;
pub mod particle;
mod sparse;
pub mod verify;
pub mod wave;

pub use error::{Error, Result};
pub use mc::TrajectoryEstimate;
pub use params::{
    bose_occupation, Engine, EngineParams, Fano, Model, NoiseDecomposition, OccupationSpec,
    PowerStats, WaveEngine, WaveParams,
};
