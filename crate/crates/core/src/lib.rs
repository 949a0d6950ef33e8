//! Simulation and analysis of the two-currency fast money flow model.
//!
//! - [`dynamics`]: parameters, state, equations of motion, closure, energy.
//! - [`integrator`]: adaptive Dormand–Prince integration with dense output.
//! - [`linear`]: closed-form linearized solutions, regimes and envelope fits.
//! - [`lattice`]: plaquette returns, discrete action, transition and Hamiltonian matrices.
//! - [`indicators`]: volume, return and positive/negative volume indices.

pub mod dynamics;
pub mod error;
pub mod indicators;
pub mod integrator;
pub mod lattice;
pub mod linear;

pub use dynamics::{Closure, Derivatives, InitialSpec, ModelParams, RawParams, State, Variant};
pub use error::{Error, Result};
pub use integrator::{integrate, IntegratorConfig, Termination, Trajectory};
