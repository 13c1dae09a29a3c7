//! Rest-frame instant-form description of relativistic two-body systems.
//!
//! * [`kinematics`]: Wigner tetrad, embedding, collective variables, Møller tube.
//! * [`algebra`]: Poisson brackets, external and internal Poincaré generators.
//! * [`dynamics`]: relative motion generated by the invariant mass, world-lines.
//! * [`spectrum`]: radial eigenproblem and the invariant-mass spectrum.
//! * [`entanglement`]: reduced density matrices for two-particle states.
//! * [`ehrenfest`]: positive-energy wave packets and emergent trajectories.
//! * [`cli`]: experiment drivers behind the `restframe` binary.

pub mod ad;
pub mod algebra;
pub mod cli;
pub mod dynamics;
pub mod ehrenfest;
pub mod entanglement;
pub mod error;
pub mod io;
pub mod kinematics;
pub mod potential;
pub mod spectrum;

pub use error::{Error, Result};
