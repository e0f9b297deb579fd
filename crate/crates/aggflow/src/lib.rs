//! Particle simulator for 1D aggregation-diffusion gradient flows on the quantile grid.
//!
//! A density is represented by n ordered particles carrying mass 1/n each,
//! i.e. by its quantile function sampled on the midpoint grid. The free energy
//! (power-law or logarithmic entropy, power-law or logarithmic interaction,
//! optional quadratic confinement for the self-similar frame) becomes a
//! function of the particle positions, and its gradient flow is integrated
//! with an unconditionally stable implicit Euler scheme solved by damped
//! Newton iteration. On top of the integrator sit phase-map sweeps over
//! (k, chi), exponential rate fits, and self-similar reconstruction.

pub mod analysis;
pub mod cli;
pub mod dynamics;
pub mod energy;
pub mod error;
pub mod initdata;
pub mod model;
mod numerics;
pub mod state;

pub use error::{Error, Result};
