use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::report::{assemble, EvalReport, Protocol, ReportMetadata};
use crate::error::{Error, Result};
use crate::glm::SessionRecord;
use crate::inference::{fit, heldout_log_likelihood, windowed_log_likelihood, FitConfig, FittedModel, HeldoutLogLikelihood, ModelKind};

/// Name under which the chance baseline appears in reports.
pub const CHANCE: &str = "CHANCE";

/// Fold of each animal: a seeded shuffle dealt round-robin into `folds` groups.
pub fn fold_assignment(n_animals: usize, folds: usize, split_seed: u64) -> Result<Vec<usize>> {
    if folds < 2 || folds > n_animals {
        return Err(Error::Config(format!(
            "need 2 <= folds <= animals, got {folds} folds for {n_animals} animals"
        )));
    }
    let mut order: Vec<usize> = (0..n_animals).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(split_seed));
    let mut fold = vec![0; n_animals];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos % folds;
    }
    Ok(fold)
}

fn seeded(config: &FitConfig, seed: u64) -> FitConfig {
    FitConfig {
        seed,
        ..config.clone()
    }
}

/// Animal-held-out cross-validation: each fold's animals are scored by
/// models fitted on the remaining animals, for every kind and fitting seed.
pub fn crossval_animals(
    dataset: &[SessionRecord],
    kinds: &[ModelKind],
    folds: usize,
    seeds: &[u64],
    config: &FitConfig,
    split_seed: u64,
    include_chance: bool,
) -> Result<EvalReport> {
    if seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    let fold = fold_assignment(dataset.len(), folds, split_seed)?;
    let jobs: Vec<(ModelKind, u64, usize)> = kinds
        .iter()
        .flat_map(|&k| seeds.iter().flat_map(move |&s| (0..folds).map(move |f| (k, s, f))))
        .collect();
    let scored: Vec<HeldoutLogLikelihood> = jobs
        .par_iter()
        .map(|&(kind, seed, f)| {
            let train: Vec<SessionRecord> =
                dataset.iter().zip(&fold).filter(|(_, &g)| g != f).map(|(s, _)| s.clone()).collect();
            let test: Vec<SessionRecord> =
                dataset.iter().zip(&fold).filter(|(_, &g)| g == f).map(|(s, _)| s.clone()).collect();
            let model = fit(&train, kind, &seeded(config, seed))?;
            heldout_log_likelihood(&model, &test)
        })
        .collect::<Result<_>>()?;

    // Reassemble each (kind, seed) into dataset order.
    let merge = |parts: &[HeldoutLogLikelihood]| {
        let mut per_animal = Vec::with_capacity(dataset.len());
        for s in dataset {
            let a = parts
                .iter()
                .flat_map(|p| &p.per_animal)
                .find(|a| a.animal_id == s.animal_id)
                .expect("every animal is in one fold");
            per_animal.push(a.clone());
        }
        HeldoutLogLikelihood {
            total: per_animal.iter().map(|a| a.total).sum(),
            trials: per_animal.iter().map(|a| a.trials).sum(),
            per_animal,
        }
    };
    let mut results = Vec::new();
    for (ki, &kind) in kinds.iter().enumerate() {
        let per_seed = (0..seeds.len())
            .map(|si| {
                let start = (ki * seeds.len() + si) * folds;
                merge(&scored[start..start + folds])
            })
            .collect();
        results.push((kind.name().to_string(), per_seed));
    }
    if include_chance {
        let chance = heldout_log_likelihood(&FittedModel::chance(crate::glm::COVARIATE_DIM), dataset)?;
        results.push((CHANCE.to_string(), vec![chance; seeds.len()]));
    }
    let metadata = ReportMetadata {
        seeds: seeds.to_vec(),
        split_seed: Some(split_seed),
        folds: Some(folds),
        fit_config: serde_json::to_value(config).ok(),
        ..ReportMetadata::default()
    };
    assemble(Protocol::Animals, metadata, results)
}

/// Future-holdout cross-validation: fit on trials `[0, split_trial)` of every
/// animal and score trials `[split_trial, split_trial + horizon)`.
#[allow(clippy::too_many_arguments)]
pub fn crossval_future(
    dataset: &[SessionRecord],
    kinds: &[ModelKind],
    split_trial: usize,
    horizon: usize,
    seeds: &[u64],
    config: &FitConfig,
    include_chance: bool,
) -> Result<EvalReport> {
    let metadata = ReportMetadata {
        seeds: seeds.to_vec(),
        split_trial: Some(split_trial),
        horizon: Some(horizon),
        fit_config: serde_json::to_value(config).ok(),
        ..ReportMetadata::default()
    };
    if horizon == 0 {
        return Ok(EvalReport::empty(Protocol::Future, metadata));
    }
    if seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    if let Some(s) = dataset.iter().find(|s| s.trials.len() < split_trial + horizon) {
        return Err(Error::InvalidData(format!(
            "session {} has {} trials, fewer than split {split_trial} + horizon {horizon}",
            s.animal_id,
            s.trials.len()
        )));
    }
    let window = split_trial..split_trial + horizon;
    let train: Vec<SessionRecord> = dataset.iter().map(|s| s.slice(0..split_trial)).collect();
    let jobs: Vec<(ModelKind, u64)> = kinds.iter().flat_map(|&k| seeds.iter().map(move |&s| (k, s))).collect();
    let scored: Vec<HeldoutLogLikelihood> = jobs
        .par_iter()
        .map(|&(kind, seed)| {
            let model = fit(&train, kind, &seeded(config, seed))?;
            windowed_log_likelihood(&model, dataset, Some(window.clone()))
        })
        .collect::<Result<_>>()?;
    let mut results: Vec<(String, Vec<HeldoutLogLikelihood>)> = kinds
        .iter()
        .enumerate()
        .map(|(ki, k)| (k.name().to_string(), scored[ki * seeds.len()..(ki + 1) * seeds.len()].to_vec()))
        .collect();
    if include_chance {
        let chance = windowed_log_likelihood(&FittedModel::chance(crate::glm::COVARIATE_DIM), dataset, Some(window))?;
        results.push((CHANCE.to_string(), vec![chance; seeds.len()]));
    }
    assemble(Protocol::Future, metadata, results)
}

/// Scores already-fitted models on the given sessions.
pub fn evaluate_models(
    models: &[(String, FittedModel)],
    sessions: &[SessionRecord],
    include_chance: bool,
    metadata: ReportMetadata,
) -> Result<EvalReport> {
    let mut results = Vec::with_capacity(models.len() + 1);
    for (name, model) in models {
        results.push((name.clone(), vec![heldout_log_likelihood(model, sessions)?]));
    }
    if include_chance {
        results.push((
            CHANCE.to_string(),
            vec![heldout_log_likelihood(&FittedModel::chance(crate::glm::COVARIATE_DIM), sessions)?],
        ));
    }
    assemble(Protocol::Holdout, metadata, results)
}
