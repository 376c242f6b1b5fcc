use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::slices::{probe_trial, Outcome};
use crate::error::{Error, Result};
use crate::glm::{sigmoid, TrialRecord};
use crate::inference::FittedModel;
use crate::update::UpdateFunction;

/// A block of `k` trials with a fixed reward, sitting `offset` trials before
/// the probe.
///
/// Every probe sequence is `warmup` unconditioned trials, the conditioned
/// block, `offset` unconditioned trials, then a correct probe trial.
/// Unconditioned trials draw a stimulus from the probe grid and a choice from
/// the GLM policy at the fixed weights `[w_stim, bias]`, and are rewarded when
/// correct. Conditioned trials draw stimulus and choice the same way but
/// have their reward forced. Both conditions reuse the same draws, so the
/// gap reflects the forced rewards only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HistoryCondition {
    pub k: usize,
    pub offset: usize,
    pub w_stim: f64,
    pub bias: f64,
    pub warmup: usize,
    pub draws: usize,
    pub seed: u64,
}

impl Default for HistoryCondition {
    fn default() -> Self {
        HistoryCondition {
            k: 3,
            offset: 0,
            w_stim: 0.0,
            bias: 0.0,
            warmup: 10,
            draws: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryGapRow {
    pub stimulus: f64,
    pub dw_rewarded: f64,
    pub dw_unrewarded: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryGap {
    pub k: usize,
    pub offset: usize,
    pub rows: Vec<HistoryGapRow>,
}

impl HistoryGap {
    pub fn mean_gap(&self) -> f64 {
        self.rows.iter().map(|r| r.gap).sum::<f64>() / self.rows.len() as f64
    }
}

fn trial(rng: &mut ChaCha8Rng, stimuli: &[f64], w: [f64; 2], index: usize, forced: Option<bool>) -> TrialRecord {
    let s = stimuli[rng.random_range(0..stimuli.len())];
    let choice = u8::from(rng.random::<f64>() < sigmoid(w[0] * s + w[1]));
    let rewarded = forced.unwrap_or_else(|| probe_trial(s, Outcome::Correct).label == choice);
    TrialRecord {
        trial_index: index,
        stimulus: s,
        choice,
        reward: u8::from(rewarded),
        label: if rewarded { choice } else { 1 - choice },
    }
}

/// Stimulus-weight update after all-rewarded minus after all-unrewarded
/// conditioned blocks, averaged over `cond.draws` sampled histories.
pub fn history_gap<U: UpdateFunction + Clone>(f: &mut U, cond: &HistoryCondition, stimuli: &[f64]) -> Result<HistoryGap> {
    if stimuli.is_empty() || stimuli.iter().any(|s| !s.is_finite()) {
        return Err(Error::Config("history gap needs a nonempty finite stimulus grid".into()));
    }
    if cond.draws == 0 {
        return Err(Error::Config("history gap needs at least one draw".into()));
    }
    let w = [cond.w_stim, cond.bias];
    let mut sums = vec![[0.0f64; 2]; stimuli.len()];
    for d in 0..cond.draws {
        for (c, rewarded) in [true, false].into_iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(cond.seed.wrapping_add(d as u64));
            f.reset();
            let mut index = 0;
            for (len, forced) in [(cond.warmup, None), (cond.k, Some(rewarded)), (cond.offset, None)] {
                for _ in 0..len {
                    let t = trial(&mut rng, stimuli, w, index, forced);
                    f.update(&w, &t);
                    index += 1;
                }
            }
            for (i, &s) in stimuli.iter().enumerate() {
                let mut probe = probe_trial(s, Outcome::Correct);
                probe.trial_index = index;
                sums[i][c] += f.clone().update(&w, &probe)[0];
            }
        }
    }
    let n = cond.draws as f64;
    let rows = stimuli
        .iter()
        .zip(&sums)
        .map(|(&s, sum)| {
            let (a, b) = (sum[0] / n, sum[1] / n);
            HistoryGapRow {
                stimulus: s,
                dw_rewarded: a,
                dw_unrewarded: b,
                gap: a - b,
            }
        })
        .collect();
    Ok(HistoryGap {
        k: cond.k,
        offset: cond.offset,
        rows,
    })
}

/// History gap of a fitted model; only history-dependent kinds qualify.
pub fn model_history_gap(model: &FittedModel, cond: &HistoryCondition, stimuli: &[f64]) -> Result<HistoryGap> {
    if !model.kind().uses_history() {
        return Err(Error::UnsupportedModel(format!(
            "{} has no history dependence; wrap it in MarkovAdapter for a zero-gap control",
            model.kind()
        )));
    }
    history_gap(&mut model.network.stepper(), cond, stimuli)
}

/// Makes any update function history-blind by resetting it before each trial.
#[derive(Debug, Clone)]
pub struct MarkovAdapter<U>(pub U);

impl<U: UpdateFunction> UpdateFunction for MarkovAdapter<U> {
    fn reset(&mut self) {
        self.0.reset();
    }

    fn update(&mut self, w: &[f64], trial: &TrialRecord) -> Vec<f64> {
        self.0.reset();
        self.0.update(w, trial)
    }

    fn is_history_dependent(&self) -> bool {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::{ArchConfig, ModelKind, RuleNetwork, W0Mode};
    use crate::rules::{GroundTruthRule, RuleParams};
    use crate::sim::StimulusGrid;

    fn stimuli() -> Vec<f64> {
        StimulusGrid::default().values().unwrap()
    }

    fn random_model(kind: ModelKind) -> FittedModel {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let arch = ArchConfig {
            output_gain: 1.0,
            ..ArchConfig::default()
        };
        FittedModel::from_network(RuleNetwork::new(kind, 2, &arch, &mut rng), W0Mode::FixedZero)
    }

    #[test]
    fn etrace_rule_has_positive_gap() {
        let mut rule = GroundTruthRule::new(RuleParams::etrace(0.1, 10), true);
        let gap = history_gap(&mut rule, &HistoryCondition::default(), &stimuli()).unwrap();
        assert!(gap.mean_gap() > 0.0);
    }

    #[test]
    fn markov_rule_has_zero_gap() {
        let mut rule = GroundTruthRule::new(RuleParams::reinforce(0.1), false);
        let gap = history_gap(&mut rule, &HistoryCondition::default(), &stimuli()).unwrap();
        assert!(gap.rows.iter().all(|r| r.gap == 0.0));
    }

    #[test]
    fn zero_block_gives_zero_gap() {
        let model = random_model(ModelKind::Rnn);
        let cond = HistoryCondition {
            k: 0,
            draws: 10,
            ..HistoryCondition::default()
        };
        let gap = model_history_gap(&model, &cond, &stimuli()).unwrap();
        assert!(gap.rows.iter().all(|r| r.gap == 0.0));
    }

    #[test]
    fn feedforward_model_is_unsupported_but_adapts_to_zero() {
        let model = random_model(ModelKind::Dnn);
        let cond = HistoryCondition {
            draws: 10,
            ..HistoryCondition::default()
        };
        assert!(matches!(
            model_history_gap(&model, &cond, &stimuli()),
            Err(Error::UnsupportedModel(_))
        ));
        let mut adapted = MarkovAdapter(model.network.stepper());
        let gap = history_gap(&mut adapted, &cond, &stimuli()).unwrap();
        assert!(gap.rows.iter().all(|r| r.gap == 0.0));
    }

    #[test]
    fn random_recurrent_model_is_deterministic() {
        let model = random_model(ModelKind::Rnn);
        let cond = HistoryCondition {
            draws: 10,
            ..HistoryCondition::default()
        };
        let a = model_history_gap(&model, &cond, &stimuli()).unwrap();
        let b = model_history_gap(&model, &cond, &stimuli()).unwrap();
        assert_eq!(a, b);
        assert!(a.rows.iter().any(|r| r.gap != 0.0));
    }
}
