use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::{sigmoid, TrialRecord, COVARIATE_DIM, LEFT, RIGHT};
use crate::inference::FittedModel;
use crate::rules::{GroundTruthRule, RuleParams};
use crate::sim::StimulusGrid;
use crate::update::UpdateFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Correct,
    Incorrect,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::Correct => "correct",
            Outcome::Incorrect => "incorrect",
        }
    }
}

impl std::str::FromStr for Outcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "correct" => Ok(Outcome::Correct),
            "incorrect" => Ok(Outcome::Incorrect),
            _ => Err(Error::Format(format!("unknown outcome {s}"))),
        }
    }
}

/// Points at which an update function is evaluated.
///
/// History-dependent functions are averaged over `history_samples` random
/// histories of `history_len` trials: stimuli drawn uniformly from the grid,
/// choices and rewards independent fair coins, weights held at the slice
/// point. The draws are seeded by `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SliceGrid {
    pub stimuli: Vec<f64>,
    pub w_levels: Vec<f64>,
    pub bias: f64,
    pub outcomes: Vec<Outcome>,
    pub history_samples: usize,
    pub history_len: usize,
    pub seed: u64,
}

impl Default for SliceGrid {
    fn default() -> Self {
        SliceGrid {
            stimuli: StimulusGrid::default().values().expect("default grid is valid"),
            w_levels: vec![-2.0, -1.0, 0.0, 1.0, 2.0],
            bias: 0.0,
            outcomes: vec![Outcome::Correct, Outcome::Incorrect],
            history_samples: 100,
            history_len: 10,
            seed: 0,
        }
    }
}

impl SliceGrid {
    pub fn validate(&self) -> Result<()> {
        if self.stimuli.is_empty() || self.w_levels.is_empty() || self.outcomes.is_empty() {
            return Err(Error::Config("slice grid axes must be nonempty".into()));
        }
        if self.stimuli.iter().chain(&self.w_levels).any(|v| !v.is_finite()) || !self.bias.is_finite() {
            return Err(Error::Config("slice grid values must be finite".into()));
        }
        if self.history_samples == 0 {
            return Err(Error::Config("history_samples must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceRow {
    pub stimulus: f64,
    pub w_stim: f64,
    pub w_bias: f64,
    pub outcome: Outcome,
    pub dw_stim: f64,
    pub dw_bias: f64,
}

/// Trial on which the choice has the given outcome. The correct side is
/// right for positive stimuli and left for negative ones; zero counts as right.
pub fn probe_trial(stimulus: f64, outcome: Outcome) -> TrialRecord {
    let label = if stimulus >= 0.0 { RIGHT } else { LEFT };
    let choice = match outcome {
        Outcome::Correct => label,
        Outcome::Incorrect => 1 - label,
    };
    TrialRecord {
        trial_index: 0,
        stimulus,
        choice,
        reward: u8::from(choice == label),
        label,
    }
}

fn random_history(rng: &mut ChaCha8Rng, stimuli: &[f64], len: usize) -> Vec<TrialRecord> {
    (0..len)
        .map(|t| {
            let s = stimuli[rng.random_range(0..stimuli.len())];
            let choice = u8::from(rng.random::<bool>());
            let rewarded = rng.random::<bool>();
            let label = if rewarded { choice } else { 1 - choice };
            TrialRecord {
                trial_index: t,
                stimulus: s,
                choice,
                reward: u8::from(rewarded),
                label,
            }
        })
        .collect()
}

/// Update function evaluated over the slice grid. Rows are ordered by
/// outcome, then weight level, then stimulus.
pub fn update_slices<U: UpdateFunction + Clone>(f: &mut U, grid: &SliceGrid) -> Result<Vec<SliceRow>> {
    grid.validate()?;
    let mut rows = Vec::with_capacity(grid.outcomes.len() * grid.w_levels.len() * grid.stimuli.len());
    for &outcome in &grid.outcomes {
        for &w_stim in &grid.w_levels {
            let w = [w_stim, grid.bias];
            // Identical draws at every grid point keep the surface smooth.
            let mut rng = ChaCha8Rng::seed_from_u64(grid.seed);
            let mut primed = Vec::new();
            if f.is_history_dependent() {
                for _ in 0..grid.history_samples {
                    let history = random_history(&mut rng, &grid.stimuli, grid.history_len);
                    f.reset();
                    for t in &history {
                        f.update(&w, t);
                    }
                    primed.push(f.clone());
                }
            } else {
                f.reset();
                primed.push(f.clone());
            }
            for &s in &grid.stimuli {
                let probe = probe_trial(s, outcome);
                let mut sum = [0.0; COVARIATE_DIM];
                for state in &primed {
                    let dw = state.clone().update(&w, &probe);
                    if dw.len() != COVARIATE_DIM {
                        return Err(Error::DimensionMismatch {
                            expected: COVARIATE_DIM,
                            got: dw.len(),
                        });
                    }
                    sum[0] += dw[0];
                    sum[1] += dw[1];
                }
                let n = primed.len() as f64;
                let (dw_stim, dw_bias) = if primed.len() == 1 { (sum[0], sum[1]) } else { (sum[0] / n, sum[1] / n) };
                rows.push(SliceRow {
                    stimulus: s,
                    w_stim,
                    w_bias: grid.bias,
                    outcome,
                    dw_stim,
                    dw_bias,
                });
            }
        }
    }
    Ok(rows)
}

pub fn model_slices(model: &FittedModel, grid: &SliceGrid) -> Result<Vec<SliceRow>> {
    if model.network.dim != COVARIATE_DIM {
        return Err(Error::DimensionMismatch {
            expected: COVARIATE_DIM,
            got: model.network.dim,
        });
    }
    update_slices(&mut model.network.stepper(), grid)
}

pub fn rule_slices(rule: RuleParams, learn_bias: bool, grid: &SliceGrid) -> Result<Vec<SliceRow>> {
    rule.validate()?;
    update_slices(&mut GroundTruthRule::new(rule, learn_bias), grid)
}

/// Root-mean-square difference of two slice tables over matching rows.
pub fn slice_rmse(a: &[SliceRow], b: &[SliceRow]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::InvalidData(format!(
            "slice tables differ in length ({} vs {}) or are empty",
            a.len(),
            b.len()
        )));
    }
    let mut sq = 0.0;
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        if x.stimulus != y.stimulus || x.w_stim != y.w_stim || x.w_bias != y.w_bias || x.outcome != y.outcome {
            return Err(Error::InvalidData(format!("slice rows {i} refer to different grid points")));
        }
        sq += (x.dw_stim - y.dw_stim).powi(2) + (x.dw_bias - y.dw_bias).powi(2);
    }
    Ok((sq / (2 * a.len()) as f64).sqrt())
}

/// Probability of a right choice at the slice point, for reference columns.
pub fn slice_point_probability(row: &SliceRow) -> f64 {
    sigmoid(row.w_stim * row.stimulus + row.w_bias)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::RuleParams;

    #[test]
    fn reinforce_incorrect_slice_is_zero() {
        let rows = rule_slices(RuleParams::reinforce(0.1), false, &SliceGrid::default()).unwrap();
        for r in rows.iter().filter(|r| r.outcome == Outcome::Incorrect) {
            assert_eq!((r.dw_stim, r.dw_bias), (0.0, 0.0));
        }
        assert_eq!(rows.len(), 16 * 5 * 2);
    }

    #[test]
    fn reinforce_slows_at_large_weights() {
        let rows = rule_slices(RuleParams::reinforce(0.1), false, &SliceGrid::default()).unwrap();
        let at = |w: f64, s: f64| {
            rows.iter()
                .find(|r| r.outcome == Outcome::Correct && r.w_stim == w && r.stimulus == s)
                .unwrap()
                .dw_stim
        };
        for s in [0.25, 1.0, 2.0] {
            assert!(at(2.0, s).abs() < at(0.0, s).abs());
        }
    }

    #[test]
    fn reinforce_slice_matches_closed_form() {
        let alpha = 0.07;
        let rows = rule_slices(RuleParams::reinforce(alpha), false, &SliceGrid::default()).unwrap();
        for r in rows.iter().filter(|r| r.outcome == Outcome::Correct) {
            // Correct choice on side sign(s): dw_stim = alpha * |s| * (1 - sigma(w |s|)).
            let expected = alpha * r.stimulus.abs() * (1.0 - sigmoid(r.w_stim * r.stimulus.abs()));
            assert!((r.dw_stim - expected).abs() < 1e-12);
            assert_eq!(r.dw_bias, 0.0);
        }
    }

    #[test]
    fn etrace_slices_are_averaged_and_deterministic() {
        let grid = SliceGrid {
            history_samples: 20,
            ..SliceGrid::default()
        };
        let a = rule_slices(RuleParams::etrace(0.1, 10), true, &grid).unwrap();
        let b = rule_slices(RuleParams::etrace(0.1, 10), true, &grid).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().any(|r| r.outcome == Outcome::Incorrect && r.dw_stim != 0.0));
    }

    #[test]
    fn slice_rmse_checks_alignment() {
        let grid = SliceGrid::default();
        let a = rule_slices(RuleParams::reinforce(0.1), false, &grid).unwrap();
        assert_eq!(slice_rmse(&a, &a).unwrap(), 0.0);
        assert!(slice_rmse(&a, &a[1..]).is_err());
        let mut b = a.clone();
        b.swap(0, 1);
        assert!(slice_rmse(&a, &b).is_err());
    }

    #[test]
    fn empty_grid_is_rejected() {
        let grid = SliceGrid {
            stimuli: vec![],
            ..SliceGrid::default()
        };
        assert!(rule_slices(RuleParams::reinforce(0.1), false, &grid).is_err());
    }
}
