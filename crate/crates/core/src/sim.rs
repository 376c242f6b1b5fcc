//! Synthetic animal pools learning under a ground-truth rule.
//!
//! Each animal draws stimuli uniformly from a discrete grid, chooses by the
//! Bernoulli GLM, and updates its weights with the configured rule. Animal `i`
//! of a pool is generated from a ChaCha8 stream seeded with `master_seed ^ i`,
//! so any animal can be regenerated alone and pools can be built in parallel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::{build_covariates, dot, sigmoid, clamp_logit, SessionRecord, Source, TrialRecord, COVARIATE_DIM, DEFAULT_LOGIT_CLAMP};
use crate::rules::{GroundTruthRule, RuleParams};
use crate::update::UpdateFunction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StimulusGrid {
    pub min: f64,
    pub max: f64,
    pub step: f64,
    pub include_zero: bool,
}

impl Default for StimulusGrid {
    fn default() -> Self {
        StimulusGrid {
            min: -2.0,
            max: 2.0,
            step: 0.25,
            include_zero: false,
        }
    }
}

impl StimulusGrid {
    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0) || !(self.max > self.min) {
            return Err(Error::Config(format!(
                "stimulus grid needs min < max and a positive step, got [{}, {}] step {}",
                self.min, self.max, self.step
            )));
        }
        let span = (self.max - self.min) / self.step;
        let n = span.round();
        if (span - n).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "step {} does not divide [{}, {}]",
                self.step, self.min, self.max
            )));
        }
        let values: Vec<f64> = (0..=n as usize)
            .map(|k| self.min + k as f64 * self.step)
            .filter(|&s| self.include_zero || s != 0.0)
            .collect();
        if values.is_empty() {
            return Err(Error::Config("stimulus grid is empty".into()));
        }
        Ok(values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialStimWeight {
    Fixed(f64),
    Uniform { low: f64, high: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub rule: RuleParams,
    pub weight: f64,
}

/// A single rule for the whole pool, or a population mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleSpec {
    Single(RuleParams),
    Mixture(Vec<MixtureComponent>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n_animals: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub grid: StimulusGrid,
    #[serde(default = "default_w0_stim")]
    pub w0_stim: InitialStimWeight,
    #[serde(default = "default_bias_set")]
    pub bias_set: Vec<f64>,
    pub rule: RuleSpec,
    /// Standard deviation of Gaussian update noise, as a fraction of the learning rate.
    #[serde(default)]
    pub update_noise_sigma: f64,
    /// Overrides whether the bias weight learns; by default only the
    /// non-Markovian rule updates it.
    #[serde(default)]
    pub learn_bias: Option<bool>,
    #[serde(default)]
    pub master_seed: u64,
}

fn default_trials() -> usize {
    500
}

fn default_w0_stim() -> InitialStimWeight {
    InitialStimWeight::Fixed(-2.0)
}

fn default_bias_set() -> Vec<f64> {
    vec![-1.0, 0.0, 1.0]
}

/// Trial count of the long-run preset.
pub const LONG_RUN_TRIALS: usize = 8000;

impl SimConfig {
    pub fn new(n_animals: usize, rule: RuleParams, master_seed: u64) -> Self {
        SimConfig {
            n_animals,
            trials: default_trials(),
            grid: StimulusGrid::default(),
            w0_stim: default_w0_stim(),
            bias_set: default_bias_set(),
            rule: RuleSpec::Single(rule),
            update_noise_sigma: 0.0,
            learn_bias: None,
            master_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_animals == 0 {
            return Err(Error::Config("n_animals must be positive".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be positive".into()));
        }
        self.grid.values()?;
        if self.bias_set.is_empty() || self.bias_set.iter().any(|b| !b.is_finite()) {
            return Err(Error::Config("bias_set must hold finite values".into()));
        }
        if !(self.update_noise_sigma >= 0.0 && self.update_noise_sigma.is_finite()) {
            return Err(Error::Config("update_noise_sigma must be nonnegative".into()));
        }
        if let InitialStimWeight::Uniform { low, high } = self.w0_stim {
            if !(low <= high) {
                return Err(Error::Config("uniform w0 needs low <= high".into()));
            }
        }
        match &self.rule {
            RuleSpec::Single(r) => r.validate()?,
            RuleSpec::Mixture(components) => {
                if components.is_empty() {
                    return Err(Error::Config("mixture has no components".into()));
                }
                for c in components {
                    c.rule.validate()?;
                    if !(c.weight >= 0.0) {
                        return Err(Error::Config("mixture weights must be nonnegative".into()));
                    }
                }
                let total: f64 = components.iter().map(|c| c.weight).sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::Config(format!("mixture weights sum to {total}, not 1")));
                }
            }
        }
        Ok(())
    }

    /// Rule used by animal `index`.
    ///
    /// Mixture components are assigned by stratification: each animal goes to
    /// the component furthest below its quota `weight * (index + 1)`, ties to
    /// the earlier component. Counts therefore track the weights within one
    /// animal and components interleave through the pool.
    pub fn rule_for(&self, index: usize) -> RuleParams {
        match &self.rule {
            RuleSpec::Single(r) => *r,
            RuleSpec::Mixture(components) => {
                let mut counts = vec![0usize; components.len()];
                let mut chosen = 0;
                for i in 0..=index {
                    chosen = 0;
                    let mut best = f64::NEG_INFINITY;
                    for (c, comp) in components.iter().enumerate() {
                        let deficit = comp.weight * (i + 1) as f64 - counts[c] as f64;
                        if deficit > best + 1e-12 {
                            best = deficit;
                            chosen = c;
                        }
                    }
                    counts[chosen] += 1;
                }
                components[chosen].rule
            }
        }
    }

    pub fn learns_bias(&self, rule: &RuleParams) -> bool {
        self.learn_bias.unwrap_or(!rule.kind.is_markovian())
    }
}

/// Seed of animal `index` in a pool: `master_seed ^ index`.
///
/// Pools drawn with master seeds that agree above the bits of the largest
/// index share animals (masters 1 and 2 over 100 animals give the same
/// sessions in a different order); use masters such as `k << 32` for
/// independent replicate pools.
pub fn animal_seed(master_seed: u64, index: usize) -> u64 {
    master_seed ^ index as u64
}

pub fn animal_id(index: usize) -> String {
    format!("animal_{index:04}")
}

/// Hidden simulator state for one animal; never part of the behavioral data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnimalLatents {
    pub animal_id: String,
    pub rule: RuleParams,
    pub learn_bias: bool,
    /// Weights before each trial, plus the final weights (length T + 1).
    pub weights: Vec<Vec<f64>>,
    /// Applied update on each trial, noise included.
    pub dw: Vec<Vec<f64>>,
    /// Injected noise on each trial.
    pub noise: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedAnimal {
    pub session: SessionRecord,
    pub latents: AnimalLatents,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPool {
    pub sessions: Vec<SessionRecord>,
    pub latents: Vec<AnimalLatents>,
}

impl SimulatedPool {
    pub fn latents_for(&self, animal_id: &str) -> Option<&AnimalLatents> {
        self.latents.iter().find(|l| l.animal_id == animal_id)
    }
}

pub fn simulate_animal(config: &SimConfig, index: usize) -> Result<SimulatedAnimal> {
    config.validate()?;
    let grid = config.grid.values()?;
    let seed = animal_seed(config.master_seed, index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rule_params = config.rule_for(index);
    let learn_bias = config.learns_bias(&rule_params);
    let mut rule = GroundTruthRule::new(rule_params, learn_bias);

    let w_stim = match config.w0_stim {
        InitialStimWeight::Fixed(v) => v,
        InitialStimWeight::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
    };
    let bias = config.bias_set[rng.random_range(0..config.bias_set.len())];
    let mut w = vec![w_stim, bias];

    let noise_sd = config.update_noise_sigma * rule_params.learning_rate;
    let noise_dist = Normal::new(0.0, noise_sd.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::Config(format!("noise: {e}")))?;

    let mut trials = Vec::with_capacity(config.trials);
    let mut weights = Vec::with_capacity(config.trials + 1);
    let mut dws = Vec::with_capacity(config.trials);
    let mut noises = Vec::with_capacity(config.trials);
    for t in 0..config.trials {
        let stimulus = grid[rng.random_range(0..grid.len())];
        let zero_label = if stimulus == 0.0 { u8::from(rng.random::<bool>()) } else { 0 };
        let x = build_covariates(&TrialRecord::from_choice(t, stimulus, 0, 0));
        let p_right = sigmoid(clamp_logit(dot(&w, &x.0), DEFAULT_LOGIT_CLAMP));
        let choice = u8::from(rng.random::<f64>() < p_right);
        let trial = TrialRecord::from_choice(t, stimulus, choice, zero_label);

        let mut dw = rule.update(&w, &trial);
        let mut noise = vec![0.0; COVARIATE_DIM];
        if noise_sd > 0.0 {
            for (i, n) in noise.iter_mut().enumerate() {
                if i == 1 && !learn_bias {
                    continue;
                }
                *n = noise_dist.sample(&mut rng);
            }
            for (d, n) in dw.iter_mut().zip(&noise) {
                *d += n;
            }
        }
        weights.push(w.clone());
        for (wi, d) in w.iter_mut().zip(&dw) {
            *wi += d;
        }
        dws.push(dw);
        noises.push(noise);
        trials.push(trial);
    }
    weights.push(w);

    let id = animal_id(index);
    Ok(SimulatedAnimal {
        session: SessionRecord {
            animal_id: id.clone(),
            trials,
            seed: Some(seed),
            source: Source::Simulated,
        },
        latents: AnimalLatents {
            animal_id: id,
            rule: rule_params,
            learn_bias,
            weights,
            dw: dws,
            noise: noises,
        },
    })
}

pub fn simulate_pool(config: &SimConfig) -> Result<SimulatedPool> {
    config.validate()?;
    let animals: Vec<SimulatedAnimal> = (0..config.n_animals)
        .into_par_iter()
        .map(|i| simulate_animal(config, i))
        .collect::<Result<_>>()?;
    let (sessions, latents) = animals.into_iter().map(|a| (a.session, a.latents)).unzip();
    Ok(SimulatedPool { sessions, latents })
}

/// Settings for choosing a learning rate that brings the median animal to a
/// target stimulus weight by the last trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub target: f64,
    pub pilots: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for Calibration {
    fn default() -> Self {
        Calibration {
            target: 3.0,
            pilots: 20,
            tolerance: 0.1,
            max_iterations: 60,
        }
    }
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn pilot_median(template: &SimConfig, rule: RuleParams, pilots: usize) -> Result<f64> {
    let mut config = template.clone();
    config.rule = RuleSpec::Single(rule);
    config.n_animals = pilots;
    config.master_seed = template.master_seed.wrapping_add(0xCA1_1B8A7E);
    let pool = simulate_pool(&config)?;
    let mut finals: Vec<f64> = pool
        .latents
        .iter()
        .map(|l| l.weights.last().expect("nonempty")[0])
        .collect();
    Ok(median(&mut finals))
}

/// Bisection over the log learning rate of `rule` using pilot pools drawn
/// from `template` (same grid, trials and initial weights).
pub fn calibrate_learning_rate(template: &SimConfig, rule: RuleParams, calibration: Calibration) -> Result<f64> {
    let mut lo = 1e-4f64.ln();
    let mut hi = 2.0f64.ln();
    let at = |log_rate: f64| {
        let mut r = rule;
        r.learning_rate = log_rate.exp();
        pilot_median(template, r, calibration.pilots)
    };
    if at(hi)? < calibration.target {
        return Err(Error::Config(format!(
            "no learning rate up to {} reaches target weight {}",
            hi.exp(),
            calibration.target
        )));
    }
    let mut best = (f64::INFINITY, hi);
    for _ in 0..calibration.max_iterations {
        let mid = 0.5 * (lo + hi);
        let m = at(mid)?;
        let miss = (m - calibration.target).abs();
        if miss < best.0 {
            best = (miss, mid);
        }
        if miss <= calibration.tolerance {
            return Ok(mid.exp());
        }
        if m < calibration.target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    log::warn!("calibration stopped {} away from target", best.0);
    Ok(best.1.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::RuleKind;

    fn small(rule: RuleParams) -> SimConfig {
        let mut c = SimConfig::new(4, rule, 17);
        c.trials = 60;
        c
    }

    #[test]
    fn deterministic_per_seed() {
        let c = small(RuleParams::reinforce(0.05));
        assert_eq!(simulate_animal(&c, 2).unwrap(), simulate_animal(&c, 2).unwrap());
    }

    #[test]
    fn default_grid_excludes_zero() {
        let mut c = small(RuleParams::reinforce(0.05));
        c.trials = 400;
        let pool = simulate_pool(&c).unwrap();
        let grid = c.grid.values().unwrap();
        assert_eq!(grid.len(), 16);
        for t in pool.sessions.iter().flat_map(|s| &s.trials) {
            assert!(t.stimulus.abs() >= 0.25);
            assert!(grid.contains(&t.stimulus));
        }
    }

    #[test]
    fn zero_stimulus_gets_recorded_coin_label() {
        let mut c = small(RuleParams::reinforce(0.05));
        c.grid.include_zero = true;
        c.trials = 600;
        let pool = simulate_pool(&c).unwrap();
        let zeros: Vec<_> = pool.sessions.iter().flat_map(|s| &s.trials).filter(|t| t.stimulus == 0.0).collect();
        assert!(!zeros.is_empty());
        assert!(zeros.iter().any(|t| t.label == 0) && zeros.iter().any(|t| t.label == 1));
        for s in &pool.sessions {
            s.validate().unwrap();
        }
    }

    #[test]
    fn bad_grid_is_config_error() {
        let mut c = small(RuleParams::reinforce(0.05));
        c.grid.step = 0.3;
        assert!(matches!(simulate_animal(&c, 0), Err(Error::Config(_))));
    }

    #[test]
    fn pool_animals_differ_and_rewards_replay() {
        let pool = simulate_pool(&small(RuleParams::reinforce(0.05))).unwrap();
        let mut ids: Vec<_> = pool.sessions.iter().map(|s| s.animal_id.clone()).collect();
        ids.dedup();
        assert_eq!(ids.len(), 4);
        for i in 0..4 {
            for j in i + 1..4 {
                assert_ne!(pool.sessions[i].trials, pool.sessions[j].trials);
            }
        }
        for t in pool.sessions.iter().flat_map(|s| &s.trials) {
            assert_eq!(t.reward, crate::glm::reward_of(t.choice, t.label));
        }
    }

    #[test]
    fn pool_members_match_individual_generation() {
        let c = small(RuleParams::reinforce(0.05));
        let pool = simulate_pool(&c).unwrap();
        for i in (0..4).rev() {
            assert_eq!(simulate_animal(&c, i).unwrap().session, pool.sessions[i]);
        }
    }

    #[test]
    fn stratified_mixture_counts() {
        let components = vec![
            MixtureComponent { rule: RuleParams::reinforce(0.1), weight: 0.5 },
            MixtureComponent { rule: RuleParams::reinforce(0.05), weight: 0.5 },
        ];
        for n in [1usize, 2, 3, 7, 10] {
            let mut c = small(RuleParams::reinforce(0.1));
            c.rule = RuleSpec::Mixture(components.clone());
            c.n_animals = n;
            let fast = (0..n).filter(|&i| c.rule_for(i).learning_rate == 0.1).count();
            assert_eq!(fast, n.div_ceil(2));
            assert_eq!(n - fast, n / 2);
        }
    }

    #[test]
    fn mixture_weights_must_sum_to_one() {
        let mut c = small(RuleParams::reinforce(0.1));
        c.rule = RuleSpec::Mixture(vec![MixtureComponent { rule: RuleParams::reinforce(0.1), weight: 0.7 }]);
        assert!(c.validate().is_err());
    }

    #[test]
    fn noise_bookkeeping() {
        let rule = RuleParams::reinforce(0.05);
        let clean = small(rule);
        let mut noisy = small(rule);
        noisy.update_noise_sigma = 1.0;
        let a = simulate_animal(&clean, 0).unwrap();
        let b = simulate_animal(&noisy, 0).unwrap();
        assert_ne!(a.session.trials, b.session.trials);
        assert!(a.latents.noise.iter().flatten().all(|&n| n == 0.0));
        let mut replay = GroundTruthRule::new(rule, b.latents.learn_bias);
        for (t, trial) in b.session.trials.iter().enumerate() {
            let det = replay.update(&b.latents.weights[t], trial);
            for k in 0..2 {
                assert_eq!(b.latents.dw[t][k], det[k] + b.latents.noise[t][k]);
            }
            assert!(b.latents.noise[t][0] != 0.0);
            // Frozen bias receives no noise either.
            assert_eq!(b.latents.noise[t][1], 0.0);
        }
    }

    #[test]
    fn max_likelihood_bias_update_replays_formula() {
        let mut c = small(RuleParams::max_likelihood(0.08));
        c.learn_bias = Some(true);
        let a = simulate_animal(&c, 1).unwrap();
        for (t, trial) in a.session.trials.iter().enumerate() {
            let w = &a.latents.weights[t];
            let p_z = crate::rules::taken_probability(w, &[trial.stimulus, 1.0], trial.label);
            let expected = 0.08 * crate::glm::choice_sign(trial.label) * (1.0 - p_z);
            assert_eq!(a.latents.dw[t][1], expected);
            assert_eq!(a.latents.weights[t + 1][1], w[1] + a.latents.dw[t][1]);
        }
    }

    #[test]
    fn bias_defaults() {
        let c = small(RuleParams::reinforce(0.1));
        assert!(!c.learns_bias(&RuleParams::reinforce(0.1)));
        assert!(c.learns_bias(&RuleParams::etrace(0.1, 10)));
        let a = simulate_animal(&c, 0).unwrap();
        let b0 = a.latents.weights[0][1];
        assert!(a.latents.weights.iter().all(|w| w[1] == b0));
        assert!([-1.0, 0.0, 1.0].contains(&b0));
    }

    #[test]
    fn uniform_initial_weight_in_range() {
        let mut c = small(RuleParams::reinforce(0.1));
        c.w0_stim = InitialStimWeight::Uniform { low: -2.0, high: 2.0 };
        c.n_animals = 10;
        let pool = simulate_pool(&c).unwrap();
        let w0: Vec<f64> = pool.latents.iter().map(|l| l.weights[0][0]).collect();
        assert!(w0.iter().all(|w| (-2.0..=2.0).contains(w)));
        assert!(w0.windows(2).any(|p| p[0] != p[1]));
        assert_eq!(pool.latents[0].rule.kind, RuleKind::Reinforce);
    }
}
