//! Mean field equilibrium of a jump-diffusion neuronal spiking game, and
//! Monte Carlo certification of the induced strategies in the finite game.

pub mod cli;
pub mod config;
pub mod error;
pub mod game;
pub mod meanfield;
pub mod model;
pub mod path;
pub mod riccati;
pub mod sim;
pub mod verify;

pub use error::{Error, Result};
