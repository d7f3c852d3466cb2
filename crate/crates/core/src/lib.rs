//! Numerical toolkit for unstable ring modes of swirling vortex columns.
//!
//! The pipeline: locate the concentration ring of a vortex profile, build the
//! asymptotic eigenvalue and Weber mode shapes there, solve the full radial
//! eigenvalue problem by two independent methods (two-sided shooting and an
//! inner-outer gluing scheme), reconstruct the velocity field, and verify the
//! classical stability criteria and scaling laws on the results.

pub mod asymptotics;
pub mod error;
pub mod gluing;
pub mod jet;
pub mod ode;
pub mod profiles;
pub mod rayleigh;
pub mod ring;

pub use error::{Error, Result};
