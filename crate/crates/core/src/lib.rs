//! Spectral/semi-Lagrangian solver and verification bench for the singular
//! Vlasov equation on the torus with Riesz-type interactions.
//!
//! The crate is organised bottom-up:
//!
//! * [`kernel`] interaction potentials given by their Fourier multipliers,
//! * [`grid`] and [`phase_space`] the discretised distribution, moments and
//!   weighted Sobolev diagnostics,
//! * [`spectral`] and [`field`] the Fourier machinery and force-field solves,
//! * [`integrator`] Strang-split time stepping and the run loop,
//! * [`averaging`] the kinetic averaging operator and its norm estimates,
//! * [`penrose`] the Penrose function and stability search,
//! * [`experiments`] the epsilon-convergence and bootstrap studies,
//! * [`config`] and [`output`] run configuration and file formats.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod averaging;
pub mod config;
pub mod error;
pub mod experiments;
pub mod fd;
pub mod field;
pub mod grid;
pub mod integrator;
pub mod kernel;
pub mod output;
pub mod penrose;
pub mod phase_space;
pub mod spectral;
pub mod spline;

pub use num_complex::Complex64;


pub use crate::config::{InitialCondition, ModeConfig, RunConfig};
pub use crate::error::{Error, Result};
pub use crate::field::{solve_field_limit, solve_field_regularized};
pub use crate::grid::GridGeometry;
pub use crate::integrator::{run, simulate, FieldMode, RunOutcome, RunSpec, StepperState, Termination};
pub use crate::kernel::{A1Bounds, Interaction, KernelSpec, KernelTerm};
pub use crate::phase_space::{Distribution, NormKey, NormReport};
pub use crate::spectral::SpectralDensity;

/// Format version written into every output file.
pub const FORMAT_VERSION: u32 = 1;
