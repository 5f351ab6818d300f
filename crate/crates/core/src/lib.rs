//! Conditional GAN training with a versatile auxiliary regressor (VAR+GAN),
//! a cBiGAN baseline, numerical checks of the regression-loss identities, and
//! desk-scale evaluation metrics.

pub mod data;
pub mod error;
pub mod eval;
pub mod arch;
pub mod cli;
pub mod losses;
pub mod nn;
pub mod theory;
pub mod train;

pub use error::{Error, Result};
