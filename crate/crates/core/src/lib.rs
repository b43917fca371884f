//! Mirror-mediated cooling of a polarizable particle.

pub mod analytic;
pub mod classical;
pub mod cli;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod model;
pub mod modes;

pub use error::{Error, Result};
