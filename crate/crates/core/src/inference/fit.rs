use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::network::{ArchConfig, InputNorm, ModelKind, RuleNetwork};
use super::psychometric::{estimate_initial_weights, PSYCHOMETRIC_TRIALS};
use crate::error::{Error, Result};
use crate::glm::{compensated_sum, SessionRecord, WeightVector, COVARIATE_DIM};
use crate::nets::{clip_global_norm, AdamConfig, AdamState};

/// How the initial GLM weights are obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum W0Mode {
    /// Start from the psychometric estimate and train jointly with the rule.
    TrainableWithPsychometricInit,
    /// The psychometric estimate (plus any offset), held fixed.
    FixedPsychometric,
    FixedZero,
    FixedValue(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub epochs: usize,
    pub optimizer: AdamConfig,
    pub seed: u64,
    pub w0_mode: W0Mode,
    /// Added to every coordinate of the initial-weight estimate.
    pub w0_offset: f64,
    /// One initial weight vector for the whole pool instead of one per animal.
    pub shared_w0: bool,
    /// Adam step size for the initial weights, which must travel much
    /// farther than the network parameters and see one gradient per epoch.
    pub w0_learning_rate: f64,
    pub arch: ArchConfig,
    pub clip_norm: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Sessions whose gradients are summed per optimizer step.
    pub batch_size: usize,
    pub validation_fraction: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            epochs: 2000,
            optimizer: AdamConfig::default(),
            seed: 0,
            w0_mode: W0Mode::TrainableWithPsychometricInit,
            w0_offset: 0.0,
            shared_w0: false,
            w0_learning_rate: 3e-2,
            arch: ArchConfig::default(),
            clip_norm: 5.0,
            patience: 50,
            batch_size: 1,
            validation_fraction: 0.1,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::Config("validation_fraction must lie in [0, 1)".into()));
        }
        if !(self.optimizer.learning_rate > 0.0) || !(self.w0_learning_rate > 0.0) || !(self.clip_norm > 0.0) {
            return Err(Error::Config("learning rate and clip norm must be positive".into()));
        }
        if let W0Mode::FixedValue(v) = &self.w0_mode {
            if v.len() != COVARIATE_DIM {
                return Err(Error::DimensionMismatch {
                    expected: COVARIATE_DIM,
                    got: v.len(),
                });
            }
        }
        if self.arch.hidden == 0 || self.arch.recurrent_hidden == 0 {
            return Err(Error::Config("hidden sizes must be positive".into()));
        }
        Ok(())
    }
}

/// Learned or fixed starting weights.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InitialWeights {
    pub per_animal: BTreeMap<String, Vec<f64>>,
    pub shared: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// Mean per-trial training loss of each epoch.
    pub train_loss: Vec<f64>,
    /// Mean per-trial validation log-likelihood of each epoch (training LL
    /// when there is no validation split).
    pub validation_ll: Vec<f64>,
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub train_animals: Vec<String>,
    pub validation_animals: Vec<String>,
    pub skipped_animals: Vec<String>,
    /// Not stored in model files, so refits with the same seed hash identically.
    #[serde(skip)]
    pub wall_seconds: f64,
}

impl FitDiagnostics {
    pub fn epochs_run(&self) -> usize {
        self.train_loss.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub network: RuleNetwork,
    pub w0: InitialWeights,
    pub config: FitConfig,
    pub diagnostics: FitDiagnostics,
}

impl FittedModel {
    pub fn kind(&self) -> ModelKind {
        self.network.kind
    }

    /// Weights stay at zero forever: every choice has probability 1/2.
    pub fn chance(dim: usize) -> Self {
        FittedModel {
            network: RuleNetwork::reinforce(ModelKind::ReinforceParam, dim, 0.0, 0.0),
            w0: InitialWeights::default(),
            config: FitConfig {
                w0_mode: W0Mode::FixedZero,
                ..FitConfig::default()
            },
            diagnostics: FitDiagnostics::default(),
        }
    }

    /// A fixed parametric rule wrapped as a model, with the given start mode.
    pub fn from_network(network: RuleNetwork, w0_mode: W0Mode) -> Self {
        FittedModel {
            network,
            w0: InitialWeights::default(),
            config: FitConfig {
                w0_mode,
                ..FitConfig::default()
            },
            diagnostics: FitDiagnostics::default(),
        }
    }

    /// Starting weights for `session`: the learned vector for a training
    /// animal, otherwise the shared vector, otherwise the configured mode.
    pub fn initial_weights_for(&self, session: &SessionRecord) -> Result<Vec<f64>> {
        if let Some(w) = self.w0.per_animal.get(&session.animal_id) {
            return Ok(w.clone());
        }
        if let Some(w) = &self.w0.shared {
            return Ok(w.clone());
        }
        initial_weights_by_mode(&self.config, session, self.network.dim)
    }
}

fn initial_weights_by_mode(config: &FitConfig, session: &SessionRecord, dim: usize) -> Result<Vec<f64>> {
    let base = match &config.w0_mode {
        W0Mode::TrainableWithPsychometricInit | W0Mode::FixedPsychometric => {
            let k = PSYCHOMETRIC_TRIALS.min(session.trials.len());
            estimate_initial_weights(&session.trials[..k])?.0
        }
        W0Mode::FixedZero => vec![0.0; dim],
        W0Mode::FixedValue(v) => v.clone(),
    };
    Ok(base.into_iter().map(|v| v + config.w0_offset).collect())
}

/// Weights before each trial and after the last, rolled forward from the
/// model's starting weights with the session's actual choices and rewards.
pub fn predict_weight_trajectory(model: &FittedModel, session: &SessionRecord) -> Result<Vec<WeightVector>> {
    let w0 = model.initial_weights_for(session)?;
    let run = model.network.run_session(&w0, session, false)?;
    Ok(run.weights.into_iter().map(WeightVector).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnimalLogLikelihood {
    pub animal_id: String,
    pub total: f64,
    pub trials: usize,
}

impl AnimalLogLikelihood {
    pub fn per_trial(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.total / self.trials as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeldoutLogLikelihood {
    pub per_animal: Vec<AnimalLogLikelihood>,
    pub total: f64,
    pub trials: usize,
}

/// Choice log-likelihood along the predicted trajectory, restricted to trials
/// in `window` (all trials when `None`).
pub fn windowed_log_likelihood(
    model: &FittedModel,
    sessions: &[SessionRecord],
    window: Option<std::ops::Range<usize>>,
) -> Result<HeldoutLogLikelihood> {
    let scored: Vec<(AnimalLogLikelihood, Vec<f64>)> = sessions
        .par_iter()
        .map(|s| {
            let w0 = model.initial_weights_for(s)?;
            let run = model.network.run_session(&w0, s, false)?;
            let range = window.clone().unwrap_or(0..s.trials.len());
            let range = range.start.min(s.trials.len())..range.end.min(s.trials.len());
            let lls = run.log_likelihoods[range].to_vec();
            let animal = AnimalLogLikelihood {
                animal_id: s.animal_id.clone(),
                total: compensated_sum(lls.iter().copied()),
                trials: lls.len(),
            };
            Ok((animal, lls))
        })
        .collect::<Result<_>>()?;
    let total = compensated_sum(scored.iter().flat_map(|(_, lls)| lls.iter().copied()));
    let per_animal: Vec<AnimalLogLikelihood> = scored.into_iter().map(|(a, _)| a).collect();
    let trials = per_animal.iter().map(|a| a.trials).sum();
    Ok(HeldoutLogLikelihood {
        per_animal,
        total,
        trials,
    })
}

pub fn heldout_log_likelihood(model: &FittedModel, sessions: &[SessionRecord]) -> Result<HeldoutLogLikelihood> {
    windowed_log_likelihood(model, sessions, None)
}

/// Training objective (summed negative log-likelihood) computed through the
/// recorded-tape path used during fitting.
pub fn training_objective(model: &FittedModel, sessions: &[SessionRecord]) -> Result<f64> {
    let mut total = 0.0;
    for s in sessions {
        let w0 = model.initial_weights_for(s)?;
        let run = model.network.run_session(&w0, s, true)?;
        total += run.tape.expect("recorded").loss();
    }
    Ok(total)
}

struct W0Block {
    values: Vec<f64>,
    adam: Option<AdamState>,
}

/// Fits a learning-rule model by gradient descent on the summed negative
/// log-likelihood of the animals' actual choices, backpropagating through
/// the whole unrolled session. Returns the parameters of the epoch with the
/// best validation log-likelihood.
pub fn fit(dataset: &[SessionRecord], kind: ModelKind, config: &FitConfig) -> Result<FittedModel> {
    config.validate()?;
    let started = Instant::now();
    let mut skipped = Vec::new();
    let sessions: Vec<&SessionRecord> = dataset
        .iter()
        .filter(|s| {
            if s.trials.is_empty() {
                log::warn!("skipping empty session {}", s.animal_id);
                skipped.push(s.animal_id.clone());
                false
            } else {
                true
            }
        })
        .collect();
    if sessions.is_empty() {
        return Err(Error::InvalidData("no nonempty sessions to fit".into()));
    }
    let dim = COVARIATE_DIM;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..sessions.len()).collect();
    order.shuffle(&mut rng);
    let n_val = ((sessions.len() as f64 * config.validation_fraction).round() as usize).min(sessions.len() - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    let mut train_idx = train_idx.to_vec();
    train_idx.sort_unstable();
    let train: Vec<SessionRecord> = train_idx.iter().map(|&i| sessions[i].clone()).collect();
    let mut val_sorted = val_idx.to_vec();
    val_sorted.sort_unstable();
    let validation: Vec<SessionRecord> = val_sorted.iter().map(|&i| sessions[i].clone()).collect();

    let mut network = RuleNetwork::new(kind, dim, &config.arch, &mut rng);
    if kind == ModelKind::DnnHistory {
        network.norm = InputNorm::from_sessions(&train);
    }

    let trainable_w0 = config.w0_mode == W0Mode::TrainableWithPsychometricInit;
    let make_block = |values: Vec<f64>| W0Block {
        adam: trainable_w0.then(|| {
            let optimizer = AdamConfig {
                learning_rate: config.w0_learning_rate,
                ..config.optimizer
            };
            AdamState::new(optimizer, values.len())
        }),
        values,
    };
    let mut blocks: Vec<W0Block> = if config.shared_w0 {
        let mut mean = vec![0.0; dim];
        for s in &train {
            let w = initial_weights_by_mode(config, s, dim)?;
            for k in 0..dim {
                mean[k] += w[k] / train.len() as f64;
            }
        }
        vec![make_block(mean)]
    } else {
        train
            .iter()
            .map(|s| initial_weights_by_mode(config, s, dim).map(make_block))
            .collect::<Result<_>>()?
    };
    let block_of = |i: usize| if config.shared_w0 { 0 } else { i };
    // Validation animals keep their own starting weights, fitted to their own
    // choices but never feeding gradients into the rule.
    let mut val_blocks: Vec<W0Block> = if config.shared_w0 {
        Vec::new()
    } else {
        validation
            .iter()
            .map(|s| initial_weights_by_mode(config, s, dim).map(make_block))
            .collect::<Result<_>>()?
    };

    let snapshot = |network: &RuleNetwork, blocks: &[W0Block], val_blocks: &[W0Block]| {
        let mut w0 = InitialWeights::default();
        if config.shared_w0 {
            w0.shared = Some(blocks[0].values.clone());
        } else {
            for (s, b) in train.iter().zip(blocks).chain(validation.iter().zip(val_blocks)) {
                w0.per_animal.insert(s.animal_id.clone(), b.values.clone());
            }
        }
        (network.clone(), w0)
    };

    let mut adam = AdamState::new(config.optimizer, network.num_params());
    let train_trials: usize = train.iter().map(|s| s.trials.len()).sum();
    let val_trials: usize = validation.iter().map(|s| s.trials.len()).sum();
    let mut diagnostics = FitDiagnostics {
        train_animals: train.iter().map(|s| s.animal_id.clone()).collect(),
        validation_animals: validation.iter().map(|s| s.animal_id.clone()).collect(),
        skipped_animals: skipped,
        ..FitDiagnostics::default()
    };
    let mut best = (f64::NEG_INFINITY, snapshot(&network, &blocks, &val_blocks));
    let mut since_best = 0;

    for epoch in 0..config.epochs {
        let mut epoch_order: Vec<usize> = (0..train.len()).collect();
        epoch_order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in epoch_order.chunks(config.batch_size) {
            let results: Vec<(f64, super::network::Gradients)> = batch
                .par_iter()
                .map(|&i| network.loss_and_gradient(&blocks[block_of(i)].values, &train[i]))
                .collect::<Result<_>>()?;
            let mut g_params = vec![0.0; network.num_params()];
            let mut g_w0: Vec<Vec<f64>> = vec![vec![0.0; dim]; blocks.len()];
            let mut touched = vec![false; blocks.len()];
            for (&i, (loss, g)) in batch.iter().zip(&results) {
                if !loss.is_finite() || g.params.iter().chain(&g.w0).any(|v| !v.is_finite()) {
                    return Err(Error::Numerical(format!(
                        "non-finite loss or gradient at epoch {epoch} on animal {} (loss {loss}); \
                         last epoch losses: {:?}",
                        train[i].animal_id,
                        diagnostics.train_loss.iter().rev().take(5).collect::<Vec<_>>()
                    )));
                }
                epoch_loss += loss;
                for (a, b) in g_params.iter_mut().zip(&g.params) {
                    *a += b;
                }
                let b = block_of(i);
                touched[b] = true;
                for (a, v) in g_w0[b].iter_mut().zip(&g.w0) {
                    *a += v;
                }
            }
            {
                let mut views: Vec<&mut [f64]> = vec![g_params.as_mut_slice()];
                if trainable_w0 {
                    views.extend(
                        g_w0.iter_mut()
                            .zip(&touched)
                            .filter(|(_, &t)| t)
                            .map(|(g, _)| g.as_mut_slice()),
                    );
                }
                clip_global_norm(&mut views, config.clip_norm);
            }
            adam.update(&mut network.params, &g_params)?;
            network.project();
            if trainable_w0 {
                for (b, g) in g_w0.iter().enumerate() {
                    if touched[b] {
                        let block = &mut blocks[b];
                        block.adam.as_mut().expect("trainable").update(&mut block.values, g)?;
                    }
                }
            }
        }
        diagnostics.train_loss.push(epoch_loss / train_trials as f64);

        let score = if validation.is_empty() {
            -epoch_loss / train_trials as f64
        } else {
            let results: Vec<(f64, super::network::Gradients)> = validation
                .par_iter()
                .enumerate()
                .map(|(j, s)| {
                    let w0 = if config.shared_w0 { &blocks[0].values } else { &val_blocks[j].values };
                    network.loss_and_gradient(w0, s)
                })
                .collect::<Result<_>>()?;
            let loss = compensated_sum(results.iter().map(|(l, _)| *l));
            if !loss.is_finite() {
                return Err(Error::Numerical(format!("non-finite validation likelihood at epoch {epoch}")));
            }
            if trainable_w0 {
                for (block, (_, g)) in val_blocks.iter_mut().zip(&results) {
                    let mut g = g.w0.clone();
                    clip_global_norm(&mut [g.as_mut_slice()], config.clip_norm);
                    block.adam.as_mut().expect("trainable").update(&mut block.values, &g)?;
                }
            }
            -loss / val_trials as f64
        };
        diagnostics.validation_ll.push(score);
        log::debug!("epoch {epoch}: train {:.6} validation {:.6}", epoch_loss / train_trials as f64, score);
        if score > best.0 {
            best = (score, snapshot(&network, &blocks, &val_blocks));
            diagnostics.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                diagnostics.stopped_early = true;
                break;
            }
        }
    }

    diagnostics.wall_seconds = started.elapsed().as_secs_f64();
    let (network, w0) = best.1;
    Ok(FittedModel {
        network,
        w0,
        config: config.clone(),
        diagnostics,
    })
}
