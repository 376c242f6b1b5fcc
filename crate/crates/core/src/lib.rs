//! Simulating animals that learn a perceptual task through weight updates of
//! a Bernoulli GLM, and recovering the update rule from their choices.

pub mod analysis;
pub mod error;
pub mod glm;
pub mod inference;
pub mod io;
pub mod nets;
pub mod rules;
pub mod sim;
pub mod update;

pub use error::{Error, Result};
