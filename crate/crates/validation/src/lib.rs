//! Shared setup for the validation experiments: calibrated pools, fitting
//! settings and a few comparison helpers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rulefit::analysis::{recovery_rmse, LatentTrajectory, Recovery, SliceRow};
use rulefit::glm::{SessionRecord, Source, TrialRecord};
use rulefit::inference::{ArchConfig, FitConfig, FittedModel, ModelKind, RuleNetwork};
use rulefit::rules::RuleParams;
use rulefit::sim::{calibrate_learning_rate, simulate_pool, Calibration, RuleSpec, SimConfig, SimulatedPool};
use rulefit::Result;

pub const TRIALS: usize = 500;
pub const EPOCHS: usize = 150;
pub const PATIENCE: usize = 50;

/// Learning rate that brings the median animal from w_stim = -2 to 3 by the
/// last trial.
pub fn calibrated_alpha(rule: RuleParams) -> Result<f64> {
    let template = SimConfig::new(20, rule, 1);
    calibrate_learning_rate(&template, rule, Calibration::default())
}

/// Pool seed `k` uses master seed `k << 32`, so pools never share animals.
pub fn pool_config(n: usize, rule: RuleSpec, k: u64) -> SimConfig {
    let mut c = SimConfig::new(n, RuleParams::reinforce(0.1), k << 32);
    c.rule = rule;
    c.trials = TRIALS;
    c
}

pub fn simulate(config: &SimConfig) -> Result<(SimulatedPool, Vec<LatentTrajectory>)> {
    let pool = simulate_pool(config)?;
    let latents = pool.latents.iter().map(LatentTrajectory::from).collect();
    Ok((pool, latents))
}

pub fn fit_config(seed: u64) -> FitConfig {
    FitConfig {
        epochs: EPOCHS,
        patience: PATIENCE,
        seed,
        ..FitConfig::default()
    }
}

pub fn visited_rmse(model: &FittedModel, sessions: &[SessionRecord], latents: &[LatentTrajectory]) -> Result<Recovery> {
    recovery_rmse(&mut model.network.stepper(), sessions, latents)
}

/// Sessions and latents of `pool` under ids with `prefix` prepended, so two
/// pools can be concatenated.
pub fn relabel(sessions: &[SessionRecord], latents: &[LatentTrajectory], prefix: &str) -> (Vec<SessionRecord>, Vec<LatentTrajectory>) {
    let s = sessions
        .iter()
        .map(|s| SessionRecord {
            animal_id: format!("{prefix}{}", s.animal_id),
            ..s.clone()
        })
        .collect();
    let l = latents
        .iter()
        .map(|l| LatentTrajectory {
            animal_id: format!("{prefix}{}", l.animal_id),
            ..l.clone()
        })
        .collect();
    (s, l)
}

/// Correct-minus-incorrect update at each grid point, for both weight
/// coordinates. Rows must come from one slice grid.
pub fn outcome_gaps(rows: &[SliceRow]) -> Vec<[f64; 2]> {
    use rulefit::analysis::Outcome;
    let correct: Vec<&SliceRow> = rows.iter().filter(|r| r.outcome == Outcome::Correct).collect();
    correct
        .iter()
        .map(|c| {
            let i = rows
                .iter()
                .find(|r| r.outcome == Outcome::Incorrect && r.stimulus == c.stimulus && r.w_stim == c.w_stim && r.w_bias == c.w_bias)
                .expect("grid has both outcomes");
            [c.dw_stim - i.dw_stim, c.dw_bias - i.dw_bias]
        })
        .collect()
}

/// Random network and session for gradient checks. The output gain is
/// raised so that every layer carries a non-negligible gradient.
pub fn gradient_instance(kind: ModelKind, rng: &mut ChaCha8Rng, trials: usize) -> (RuleNetwork, SessionRecord, Vec<f64>) {
    let arch = ArchConfig {
        output_gain: 0.3,
        ..ArchConfig::default()
    };
    let net = RuleNetwork::new(kind, 2, &arch, rng);
    let trials = (0..trials)
        .map(|t| {
            let k = rng.random_range(1..=8) as f64 * 0.25;
            let s = if rng.random::<bool>() { k } else { -k };
            TrialRecord::from_choice(t, s, u8::from(rng.random::<bool>()), 0)
        })
        .collect();
    let session = SessionRecord::new("fd", trials, None, Source::Simulated).expect("valid session");
    let w0 = vec![rng.random_range(-2.0..2.0), rng.random_range(-1.0..1.0)];
    (net, session, w0)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
