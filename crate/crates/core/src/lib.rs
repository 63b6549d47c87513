//! Multi-species Wasserstein gradient-flow solver.
//!
//! Systems of the form
//!
//! ```text
//! ∂t ρᵢ − div(ρᵢ ∇Vᵢ[ρ]) − αᵢ ΔPᵢ(ρᵢ) = 0,     i = 1..l
//! ```
//!
//! are advanced with a semi-implicit minimizing-movement (JKO) scheme: each
//! species takes a proximal step
//!
//! ```text
//! ρᵢᵏ ∈ argmin  W₂²(ρ, ρᵢᵏ⁻¹)/(2h) + 𝓕ᵢ(ρ) + ∫ Vᵢ[ρᵏ⁻¹] ρ
//! ```
//!
//! with the interaction potential frozen at the previous time level, so the
//! species decouple within a step.
//!
//! The crate is `no_std` (with `alloc`); IO, configuration and the command
//! line live in the `gradflow` companion crate.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`grid`] | cell-centred box grids, densities, quadrature, gradients, convolution |
//! | [`energy`] | internal energies (entropy, power law), pressure, KL proximal maps |
//! | [`interaction`] | kernels, external potentials, assembled `Vᵢ[ρ]`, hypothesis certification |
//! | [`transport`] | exact 1-D W₂/W₁, log-domain Sinkhorn, LP oracle, McCann interpolation |
//! | [`jko`] | proximal steps, trajectories, optimality residuals |
//! | [`diagnostics`] | gradient estimates, action, contraction, closed-form baselines |
#![cfg_attr(not(any(feature = "std", test)), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod diagnostics;
pub mod energy;
pub mod error;
pub mod grid;
pub mod interaction;
pub mod jko;
mod math;
pub mod transport;

pub use energy::{EnergyDensity, EnergyKind, InternalEnergy};
pub use error::{Error, Result};
pub use grid::{Density, Grid, ScalarField, VectorField};
pub use interaction::{ExternalPotential, InteractionSpec, Kernel};
pub use jko::{Solver, SpeciesSystem, Trajectory};
pub use transport::TransportResult;
