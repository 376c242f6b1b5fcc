//! Bernoulli GLM decision policy.
//!
//! On each trial the agent sees a signed stimulus and turns right with
//! probability `sigmoid(w . x)`, where `x = [stimulus, 1]` by default. Rewards
//! are delivered when the choice matches the stimulus side.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Default bound on the magnitude of a logit before exponentiation.
pub const DEFAULT_LOGIT_CLAMP: f64 = 30.0;

/// Left choice / label.
pub const LEFT: u8 = 0;
/// Right choice / label.
pub const RIGHT: u8 = 1;

/// One trial of a binary-choice session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: usize,
    /// Signed stimulus contrast; positive means right-side stimulus.
    pub stimulus: f64,
    pub choice: u8,
    pub reward: u8,
    pub label: u8,
}

impl TrialRecord {
    /// Builds a trial whose label follows the stimulus side and whose reward
    /// follows the choice. Zero stimuli take `zero_label`.
    pub fn from_choice(trial_index: usize, stimulus: f64, choice: u8, zero_label: u8) -> Self {
        let label = if stimulus > 0.0 {
            RIGHT
        } else if stimulus < 0.0 {
            LEFT
        } else {
            zero_label
        };
        TrialRecord {
            trial_index,
            stimulus,
            choice,
            reward: reward_of(choice, label),
            label,
        }
    }

    pub fn is_correct(&self) -> bool {
        self.choice == self.label
    }

    /// Checks the binary fields, the label/stimulus agreement (for nonzero
    /// stimuli) and the reward contingency.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !self.stimulus.is_finite() {
            return Err(format!("non-finite stimulus {}", self.stimulus));
        }
        for (name, v) in [("choice", self.choice), ("reward", self.reward), ("label", self.label)] {
            if v > 1 {
                return Err(format!("{name} must be 0 or 1, got {v}"));
            }
        }
        if self.stimulus != 0.0 && self.label != u8::from(self.stimulus > 0.0) {
            return Err(format!(
                "label {} disagrees with stimulus {}",
                self.label, self.stimulus
            ));
        }
        if self.reward != reward_of(self.choice, self.label) {
            return Err(format!(
                "reward {} inconsistent with choice {} and label {}",
                self.reward, self.choice, self.label
            ));
        }
        Ok(())
    }
}

/// GLM regressors for one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Covariates(pub Vec<f64>);

impl Covariates {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Policy weights; index 0 is the stimulus weight, index 1 the bias weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector(pub Vec<f64>);

impl WeightVector {
    pub fn zeros(dim: usize) -> Self {
        WeightVector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn stim(&self) -> f64 {
        self.0[0]
    }

    pub fn bias(&self) -> f64 {
        self.0[1]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl From<Vec<f64>> for WeightVector {
    fn from(v: Vec<f64>) -> Self {
        WeightVector(v)
    }
}

/// Where a session came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Simulated,
    Ingested,
}

/// One animal's ordered trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub animal_id: String,
    pub trials: Vec<TrialRecord>,
    pub seed: Option<u64>,
    pub source: Source,
}

impl SessionRecord {
    /// Validates that the session is nonempty, indexed contiguously from zero
    /// and that every trial is internally consistent.
    pub fn new(
        animal_id: impl Into<String>,
        trials: Vec<TrialRecord>,
        seed: Option<u64>,
        source: Source,
    ) -> Result<Self> {
        let session = SessionRecord {
            animal_id: animal_id.into(),
            trials,
            seed,
            source,
        };
        session.validate()?;
        Ok(session)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials.is_empty() {
            return Err(Error::InvalidData(format!(
                "session {} has no trials",
                self.animal_id
            )));
        }
        for (i, t) in self.trials.iter().enumerate() {
            if t.trial_index != i {
                return Err(Error::Data {
                    row: i,
                    message: format!(
                        "animal {}: trial_index {} where {} expected",
                        self.animal_id, t.trial_index, i
                    ),
                });
            }
            t.validate().map_err(|message| Error::Data {
                row: i,
                message: format!("animal {}: {message}", self.animal_id),
            })?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    /// Sub-session covering `range`, re-indexed from zero.
    pub fn slice(&self, range: std::ops::Range<usize>) -> SessionRecord {
        let trials = self.trials[range]
            .iter()
            .enumerate()
            .map(|(i, t)| TrialRecord { trial_index: i, ..*t })
            .collect();
        SessionRecord {
            animal_id: self.animal_id.clone(),
            trials,
            seed: self.seed,
            source: self.source,
        }
    }
}

/// Default covariate layout `[stimulus, 1]`.
pub fn build_covariates(trial: &TrialRecord) -> Covariates {
    Covariates(vec![trial.stimulus, 1.0])
}

/// Dimension produced by [`build_covariates`].
pub const COVARIATE_DIM: usize = 2;

pub fn reward_of(choice: u8, label: u8) -> u8 {
    u8::from(choice == label)
}

/// `+1` for a right choice, `-1` for a left one.
pub fn choice_sign(choice: u8) -> f64 {
    if choice == RIGHT {
        1.0
    } else {
        -1.0
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(sigmoid(z))` without cancellation for large |z|.
pub fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

pub fn clamp_logit(z: f64, bound: f64) -> f64 {
    z.clamp(-bound, bound)
}

/// Right-choice probability with the default logit clamp.
pub fn choice_probability(w: &WeightVector, x: &Covariates) -> Result<f64> {
    choice_probability_clamped(w, x, DEFAULT_LOGIT_CLAMP)
}

pub fn choice_probability_clamped(w: &WeightVector, x: &Covariates, bound: f64) -> Result<f64> {
    check_dim(w.dim(), x.dim())?;
    Ok(sigmoid(clamp_logit(dot(&w.0, &x.0), bound)))
}

/// Log-probability of the observed choice `y` under the GLM.
pub fn trial_log_likelihood(w: &WeightVector, x: &Covariates, y: u8) -> Result<f64> {
    check_dim(w.dim(), x.dim())?;
    Ok(choice_log_likelihood(
        clamp_logit(dot(&w.0, &x.0), DEFAULT_LOGIT_CLAMP),
        y,
    ))
}

/// Log-likelihood of choice `y` given an already clamped logit.
pub fn choice_log_likelihood(logit: f64, y: u8) -> f64 {
    if y == RIGHT {
        log_sigmoid(logit)
    } else {
        log_sigmoid(-logit)
    }
}

/// Neumaier-compensated sum. Totals of many per-trial log-likelihoods come
/// out as the correctly rounded value in practice, so `T` chance trials sum
/// to exactly `T * ln(0.5)`.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn trial(s: f64) -> TrialRecord {
        TrialRecord::from_choice(0, s, RIGHT, RIGHT)
    }

    #[test]
    fn covariate_layout() {
        assert_eq!(build_covariates(&trial(0.5)).0, vec![0.5, 1.0]);
        assert_eq!(build_covariates(&trial(-2.0)).0, vec![-2.0, 1.0]);
        assert_eq!(build_covariates(&trial(0.0)).0, vec![0.0, 1.0]);
    }

    #[test]
    fn probability_examples() {
        let x = Covariates(vec![1.0, 1.0]);
        assert_eq!(choice_probability(&WeightVector(vec![0.0, 0.0]), &x).unwrap(), 0.5);
        // 1 / (1 + e^-3) evaluated with mpmath at 30 digits.
        assert_abs_diff_eq!(
            choice_probability(&WeightVector(vec![3.0, 0.0]), &x).unwrap(),
            0.952_574_126_822_433_4,
            epsilon = 1e-15
        );
        assert_eq!(choice_probability(&WeightVector(vec![2.0, -2.0]), &x).unwrap(), 0.5);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let r = choice_probability(&WeightVector(vec![0.0; 3]), &Covariates(vec![1.0, 1.0]));
        assert!(matches!(r, Err(Error::DimensionMismatch { expected: 3, got: 2 })));
        assert!(trial_log_likelihood(&WeightVector(vec![0.0]), &Covariates(vec![1.0, 1.0]), 1).is_err());
    }

    #[test]
    fn log_likelihood_examples() {
        let x = Covariates(vec![0.3, 1.0]);
        assert_abs_diff_eq!(
            trial_log_likelihood(&WeightVector::zeros(2), &x, 1).unwrap(),
            -std::f64::consts::LN_2,
            epsilon = 1e-15
        );
        // log(sigmoid(3)) via mpmath.
        assert_abs_diff_eq!(
            trial_log_likelihood(&WeightVector(vec![3.0, 0.0]), &Covariates(vec![1.0, 1.0]), 1)
                .unwrap(),
            -0.048_587_351_573_741_91,
            epsilon = 1e-15
        );
    }

    #[test]
    fn rewards() {
        assert_eq!(reward_of(1, 1), 1);
        assert_eq!(reward_of(0, 1), 0);
        assert_eq!(reward_of(0, 0), 1);
    }

    #[test]
    fn trial_validation() {
        let mut t = TrialRecord::from_choice(0, -0.5, RIGHT, RIGHT);
        assert_eq!(t.label, LEFT);
        assert_eq!(t.reward, 0);
        assert!(t.validate().is_ok());
        t.reward = 1;
        assert!(t.validate().is_err());
        let z = TrialRecord::from_choice(0, 0.0, LEFT, RIGHT);
        assert_eq!(z.label, RIGHT);
        assert!(z.validate().is_ok());
    }

    #[test]
    fn extreme_logits_stay_finite() {
        let x = Covariates(vec![1.0, 1.0]);
        for w in [1e4, -1e4] {
            let wv = WeightVector(vec![w, 0.0]);
            let p = choice_probability(&wv, &x).unwrap();
            assert!(p > 0.0 && p < 1.0);
            for y in [0, 1] {
                assert!(trial_log_likelihood(&wv, &x, y).unwrap().is_finite());
            }
        }
    }

    #[test]
    fn chance_totals_are_exact() {
        let x = 0.5f64.ln();
        for n in [1usize, 25, 500, 7919, 20_000] {
            assert_eq!(compensated_sum(std::iter::repeat_n(x, n)), n as f64 * x);
        }
    }

    proptest! {
        #[test]
        fn sign_flip_symmetry(a in -20.0..20.0f64, b in -20.0..20.0f64, s in -2.0..2.0f64) {
            let x = Covariates(vec![s, 1.0]);
            let p = choice_probability(&WeightVector(vec![a, b]), &x).unwrap();
            let q = choice_probability(&WeightVector(vec![-a, -b]), &x).unwrap();
            prop_assert!((q - (1.0 - p)).abs() < 1e-12);
        }

        #[test]
        fn monotone_in_stimulus(w in 0.01..10.0f64, b in -3.0..3.0f64, s1 in -2.0..2.0f64, s2 in -2.0..2.0f64) {
            let (lo, hi) = if s1 < s2 { (s1, s2) } else { (s2, s1) };
            let w = WeightVector(vec![w, b]);
            let plo = choice_probability(&w, &Covariates(vec![lo, 1.0])).unwrap();
            let phi = choice_probability(&w, &Covariates(vec![hi, 1.0])).unwrap();
            prop_assert!(plo <= phi);
        }

        #[test]
        fn log_likelihood_identity(a in -10.0..10.0f64, b in -10.0..10.0f64, s in -2.0..2.0f64) {
            let w = WeightVector(vec![a, b]);
            let x = Covariates(vec![s, 1.0]);
            let l1 = trial_log_likelihood(&w, &x, 1).unwrap();
            let l0 = trial_log_likelihood(&w, &x, 0).unwrap();
            prop_assert!(l1 <= 0.0 && l0 <= 0.0);
            // ln p + ln(1 - p) = -|z| - 2 ln(1 + e^{-|z|})
            let z = (a * s + b).abs();
            prop_assert!((l1 + l0 - (-z - 2.0 * (-z).exp().ln_1p())).abs() < 1e-9);
        }
    }
}
