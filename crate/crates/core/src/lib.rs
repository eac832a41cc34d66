//! Simulation and verification toolkit for a spatial stochastic SIR epidemic.
//!
//! * [`model`]: coefficient fields, contact kernel, initial law, generator.
//! * [`particle`]: the N-individual simulator.
//! * [`measure`]: empirical pairings, density estimates, weighted test dictionaries.
//! * [`pde`]: the mean-field density system and its reference solvers.
//! * [`fluct`]: fluctuation ensembles, bracket quadrature and the Galerkin limit.

pub mod error;
pub mod fluct;
pub mod io;
pub mod measure;
pub mod model;
pub mod particle;
pub mod pde;
pub mod quadrature;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
