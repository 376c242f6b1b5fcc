//! Fitting learning-rule models to choice data.

pub mod fit;
pub mod gradcheck;
pub mod network;
pub mod psychometric;

pub use fit::{
    fit, heldout_log_likelihood, predict_weight_trajectory, training_objective, windowed_log_likelihood,
    AnimalLogLikelihood, FitConfig, FitDiagnostics, FittedModel, HeldoutLogLikelihood, InitialWeights, W0Mode,
};
pub use gradcheck::{check_gradients, GradCheck};
pub use network::{ArchConfig, Gradients, InputNorm, ModelKind, RuleNetwork, SessionRun, Tape};
pub use psychometric::{estimate_initial_weights, PSYCHOMETRIC_TRIALS};
