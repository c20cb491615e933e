//! Susceptibilities of dilute, non-interacting Ising ions with hyperfine-split
//! avoided level crossings.
//!
//! The crate computes the isothermal (`chi_T`), adiabatic (`chi_S`) and
//! isolated (`chi_I`) susceptibilities for two-state and hyperfine-coupled
//! species, composes them into full sample spectra, and fits measured
//! `chi'(B)` data for the hyperfine constant, strain-gap weights, Curie
//! constant and level populations.
//!
//! Units throughout: energies in kelvin (`E / k_B`), fields in tesla,
//! moments in Bohr magnetons, susceptibilities per ion in `mu_B / T`.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod ensemble;
mod error;
pub mod fitting;
pub mod io;
pub mod material;
pub mod response;
pub mod spinmodel;
pub mod units;

pub use error::{Error, Result};
pub use spinmodel::{Branch, HalfInt, SpinSpecies, StateLabel};
