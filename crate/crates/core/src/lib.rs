//! Stochastic neural field laboratory.

pub mod config;
pub mod decomp;
pub mod dynamics;
pub mod error;
pub mod front;
pub mod grid;
pub mod linops;
pub mod model;
pub mod noise;
pub mod output;
pub mod pipeline;
pub mod stability;

pub use error::{Error, Result};
