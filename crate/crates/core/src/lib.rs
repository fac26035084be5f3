//! Numerical laboratory for the two dynamical patterns organized around the
//! functional `±Δρ^{1/2}/ρ^{1/2}`: Schrodinger/Madelung quantum hydrodynamics
//! and Brownian/Fokker-Planck hydrodynamics, together with their information
//! functionals, closed-form kernels, stochastic-path estimators, variational
//! principles and the recoil time stepper.

// stencil code reads several node-indexed arrays side by side; plain index
// loops stay closer to the formulas than zipped iterator chains
#![allow(clippy::needless_range_loop)]

pub mod brownian;
pub mod constants;
pub mod csvio;
pub mod error;
pub mod functionals;
pub mod grid;
pub mod hydro;
pub mod kernels;
pub mod kinetic;
pub mod linalg;
pub mod paths;
pub mod quantum;
pub mod recoil;
pub mod scenario;
pub mod special;
pub mod variational;

pub use constants::PhysicalConstants;
pub use error::{Error, Result};
pub use grid::{Grid, GridField, GridPdf, Mask, MaskedField};
