use serde::{Deserialize, Serialize};

use super::slices::{rule_slices, model_slices, slice_rmse, SliceGrid};
use crate::error::{Error, Result};
use crate::glm::SessionRecord;
use crate::inference::FittedModel;
use crate::rules::RuleParams;
use crate::sim::AnimalLatents;
use crate::update::UpdateFunction;

/// Simulated weights and weight changes of one animal.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentTrajectory {
    pub animal_id: String,
    /// Weights before each trial (at least T entries).
    pub weights: Vec<Vec<f64>>,
    /// Applied weight change on each trial.
    pub dw: Vec<Vec<f64>>,
}

impl From<&AnimalLatents> for LatentTrajectory {
    fn from(l: &AnimalLatents) -> Self {
        LatentTrajectory {
            animal_id: l.animal_id.clone(),
            weights: l.weights.clone(),
            dw: l.dw.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Recovery {
    pub rmse: f64,
    /// `log10(rmse)`; negative infinity for an exact match, written as the
    /// string `"-inf"` in JSON.
    #[serde(with = "log10_sentinel")]
    pub log10_rmse: f64,
    /// Number of trials compared.
    pub points: usize,
}

impl Recovery {
    fn from_rmse(rmse: f64, points: usize) -> Self {
        Recovery {
            rmse,
            log10_rmse: rmse.log10(),
            points,
        }
    }
}

/// Serializes negative infinity as the string `"-inf"`.
pub mod log10_sentinel {
    use serde::{Deserialize, Deserializer, Serializer};

    pub const TOKEN: &str = "-inf";

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *v == f64::NEG_INFINITY {
            s.serialize_str(TOKEN)
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) if s == TOKEN => Ok(f64::NEG_INFINITY),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("expected a number or \"-inf\", got {s}"))),
        }
    }
}

/// RMSE between `f`'s updates and the simulated weight changes at the
/// visited training tuples: on each trial `f` sees the animal's actual
/// weights, stimulus, choice and reward, and carries its own history state
/// along the session.
pub fn recovery_rmse<U: UpdateFunction>(
    f: &mut U,
    sessions: &[SessionRecord],
    latents: &[LatentTrajectory],
) -> Result<Recovery> {
    let mut sq = 0.0;
    let mut count = 0usize;
    let mut trials = 0usize;
    for session in sessions {
        let lat = latents
            .iter()
            .find(|l| l.animal_id == session.animal_id)
            .ok_or_else(|| Error::MissingLatents(session.animal_id.clone()))?;
        let n = session.trials.len();
        if lat.weights.len() < n || lat.dw.len() < n {
            return Err(Error::MissingLatents(format!(
                "{}: latents cover {} trials, session has {n}",
                session.animal_id,
                lat.dw.len().min(lat.weights.len())
            )));
        }
        f.reset();
        for (t, trial) in session.trials.iter().enumerate() {
            let dw = f.update(&lat.weights[t], trial);
            if dw.len() != lat.dw[t].len() {
                return Err(Error::DimensionMismatch {
                    expected: lat.dw[t].len(),
                    got: dw.len(),
                });
            }
            for (a, b) in dw.iter().zip(&lat.dw[t]) {
                sq += (a - b).powi(2);
                count += 1;
            }
        }
        trials += n;
    }
    if count == 0 {
        return Err(Error::InvalidData("no trials to compare".into()));
    }
    Ok(Recovery::from_rmse((sq / count as f64).sqrt(), trials))
}

pub fn model_recovery_rmse(
    model: &FittedModel,
    sessions: &[SessionRecord],
    latents: &[LatentTrajectory],
) -> Result<Recovery> {
    recovery_rmse(&mut model.network.stepper(), sessions, latents)
}

/// RMSE between a model's and a ground-truth rule's slice tables.
pub fn grid_recovery_rmse(model: &FittedModel, rule: RuleParams, learn_bias: bool, grid: &SliceGrid) -> Result<Recovery> {
    let a = model_slices(model, grid)?;
    let b = rule_slices(rule, learn_bias, grid)?;
    Ok(Recovery::from_rmse(slice_rmse(&a, &b)?, a.len()))
}
