//! Closed-form learning rules: REINFORCE, the supervised maximum-likelihood
//! rule, and REINFORCE with an eligibility-trace-like sum over recent trials
//! gated by a history-dependent reward.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::{build_covariates, choice_sign, clamp_logit, dot, sigmoid, TrialRecord, DEFAULT_LOGIT_CLAMP};
use crate::update::UpdateFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    Reinforce,
    MaxLikelihood,
    EtraceReinforce,
}

impl RuleKind {
    pub fn is_markovian(self) -> bool {
        !matches!(self, RuleKind::EtraceReinforce)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleParams {
    pub kind: RuleKind,
    pub learning_rate: f64,
    /// Number of past trials summed by the eligibility-trace rule.
    #[serde(default = "default_window")]
    pub window: usize,
    /// Minimum fraction of correct trials in the recent window for reward.
    #[serde(default = "default_threshold")]
    pub reward_threshold: f64,
}

fn default_window() -> usize {
    10
}

fn default_threshold() -> f64 {
    0.5
}

impl RuleParams {
    pub fn reinforce(learning_rate: f64) -> Self {
        RuleParams {
            kind: RuleKind::Reinforce,
            learning_rate,
            window: default_window(),
            reward_threshold: default_threshold(),
        }
    }

    pub fn max_likelihood(learning_rate: f64) -> Self {
        RuleParams {
            kind: RuleKind::MaxLikelihood,
            ..Self::reinforce(learning_rate)
        }
    }

    pub fn etrace(learning_rate: f64, window: usize) -> Self {
        RuleParams {
            kind: RuleKind::EtraceReinforce,
            window,
            ..Self::reinforce(learning_rate)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.kind == RuleKind::EtraceReinforce && self.window == 0 {
            return Err(Error::Config("eligibility window must be at least 1".into()));
        }
        if !(self.reward_threshold > 0.0 && self.reward_threshold <= 1.0) {
            return Err(Error::Config(format!(
                "reward threshold must lie in (0, 1], got {}",
                self.reward_threshold
            )));
        }
        Ok(())
    }
}

/// A past trial as remembered by the eligibility-trace rule.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryEntry {
    pub x: Vec<f64>,
    pub y: u8,
    /// Probability of the choice that was taken, under the weights of that trial.
    pub p_y: f64,
}

/// Everything a rule may look at on one trial.
#[derive(Debug, Clone)]
pub struct TrialContext<'a> {
    pub w: &'a [f64],
    pub x: &'a [f64],
    pub y: u8,
    pub r: f64,
    /// Most recent last.
    pub history: Option<&'a VecDeque<HistoryEntry>>,
}

/// Probability of choice `y` under logit `w . x`.
pub fn taken_probability(w: &[f64], x: &[f64], y: u8) -> f64 {
    let logit = clamp_logit(dot(w, x), DEFAULT_LOGIT_CLAMP);
    sigmoid(choice_sign(y) * logit)
}

fn policy_gradient_term(x: &[f64], y: u8, p_y: f64, scale: f64, out: &mut [f64]) {
    let g = scale * choice_sign(y) * (1.0 - p_y);
    for (o, xi) in out.iter_mut().zip(x) {
        *o += g * xi;
    }
}

/// `alpha * r * eps_y * (1 - p_y) * x`.
pub fn reinforce_update(ctx: &TrialContext<'_>, alpha: f64) -> Vec<f64> {
    let mut dw = vec![0.0; ctx.w.len()];
    if ctx.r != 0.0 {
        let p_y = taken_probability(ctx.w, ctx.x, ctx.y);
        policy_gradient_term(ctx.x, ctx.y, p_y, alpha * ctx.r, &mut dw);
    }
    dw
}

/// `alpha * eps_z * (1 - p_z) * x`, independent of the choice and reward.
pub fn max_likelihood_update(ctx: &TrialContext<'_>, label: u8, alpha: f64) -> Vec<f64> {
    let mut dw = vec![0.0; ctx.w.len()];
    let p_z = taken_probability(ctx.w, ctx.x, label);
    policy_gradient_term(ctx.x, label, p_z, alpha, &mut dw);
    dw
}

/// `alpha * r_t * sum_{s=0..S} eps_{y_{t-s}} (1 - p_{y_{t-s}}) x_{t-s}`.
///
/// Only the last `window` history entries are used; missing history before
/// the first trial contributes nothing.
pub fn etrace_reinforce_update(ctx: &TrialContext<'_>, alpha: f64, window: usize) -> Vec<f64> {
    let mut dw = vec![0.0; ctx.w.len()];
    if ctx.r == 0.0 {
        return dw;
    }
    let scale = alpha * ctx.r;
    let p_y = taken_probability(ctx.w, ctx.x, ctx.y);
    policy_gradient_term(ctx.x, ctx.y, p_y, scale, &mut dw);
    if let Some(history) = ctx.history {
        for h in history.iter().rev().take(window) {
            policy_gradient_term(&h.x, h.y, h.p_y, scale, &mut dw);
        }
    }
    dw
}

/// 1 when the fraction of correct entries reaches `threshold`.
pub fn etrace_reward(recent_corrects: &[u8], threshold: f64) -> Result<u8> {
    if recent_corrects.is_empty() {
        return Err(Error::InvalidData("reward window is empty".into()));
    }
    let correct = recent_corrects.iter().filter(|&&c| c == 1).count();
    // Compare counts rather than fractions so an exact half is not lost to rounding.
    Ok(u8::from(correct as f64 >= threshold * recent_corrects.len() as f64 - 1e-12))
}

/// Ground-truth rule as a stateful update function, replayable along a session.
#[derive(Debug, Clone)]
pub struct GroundTruthRule {
    pub params: RuleParams,
    /// When false the bias coordinate of every update is zeroed.
    pub learn_bias: bool,
    history: VecDeque<HistoryEntry>,
    corrects: VecDeque<u8>,
}

impl GroundTruthRule {
    pub fn new(params: RuleParams, learn_bias: bool) -> Self {
        GroundTruthRule {
            params,
            learn_bias,
            history: VecDeque::new(),
            corrects: VecDeque::new(),
        }
    }

    /// Reward driving the update of the most recent trial seen by
    /// [`UpdateFunction::update`]; for Markovian rules this is the trial's own reward.
    fn learning_reward(&mut self, trial: &TrialRecord) -> f64 {
        match self.params.kind {
            RuleKind::EtraceReinforce => {
                self.corrects.push_back(u8::from(trial.is_correct()));
                while self.corrects.len() > self.params.window {
                    self.corrects.pop_front();
                }
                let (a, b) = self.corrects.as_slices();
                let window: Vec<u8> = a.iter().chain(b).copied().collect();
                f64::from(
                    etrace_reward(&window, self.params.reward_threshold)
                        .expect("window holds the current trial"),
                )
            }
            _ => f64::from(trial.reward),
        }
    }
}

impl UpdateFunction for GroundTruthRule {
    fn reset(&mut self) {
        self.history.clear();
        self.corrects.clear();
    }

    fn update(&mut self, w: &[f64], trial: &TrialRecord) -> Vec<f64> {
        let x = build_covariates(trial).0;
        let r = self.learning_reward(trial);
        let alpha = self.params.learning_rate;
        let ctx = TrialContext {
            w,
            x: &x,
            y: trial.choice,
            r,
            history: Some(&self.history),
        };
        let mut dw = match self.params.kind {
            RuleKind::Reinforce => reinforce_update(&ctx, alpha),
            RuleKind::MaxLikelihood => max_likelihood_update(&ctx, trial.label, alpha),
            RuleKind::EtraceReinforce => etrace_reinforce_update(&ctx, alpha, self.params.window),
        };
        if self.params.kind == RuleKind::EtraceReinforce {
            let p_y = taken_probability(w, &x, trial.choice);
            self.history.push_back(HistoryEntry {
                x,
                y: trial.choice,
                p_y,
            });
            while self.history.len() > self.params.window {
                self.history.pop_front();
            }
        }
        if !self.learn_bias && dw.len() > 1 {
            dw[1] = 0.0;
        }
        dw
    }

    fn is_history_dependent(&self) -> bool {
        !self.params.kind.is_markovian()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::{LEFT, RIGHT};
    use proptest::prelude::*;

    fn ctx<'a>(w: &'a [f64], x: &'a [f64], y: u8, r: f64) -> TrialContext<'a> {
        TrialContext { w, x, y, r, history: None }
    }

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-15)
    }

    #[test]
    fn reinforce_examples() {
        let w = [0.0, 0.0];
        assert_eq!(reinforce_update(&ctx(&w, &[1.0, 1.0], RIGHT, 0.0), 0.1), vec![0.0, 0.0]);
        assert!(close(&reinforce_update(&ctx(&w, &[1.0, 1.0], RIGHT, 1.0), 0.1), &[0.05, 0.05]));
        assert!(close(&reinforce_update(&ctx(&w, &[-1.0, 1.0], LEFT, 1.0), 0.1), &[0.05, -0.05]));
    }

    #[test]
    fn max_likelihood_examples() {
        let w = [0.0, 0.0];
        let x = [-1.0, 1.0];
        let dw = max_likelihood_update(&ctx(&w, &x, LEFT, 1.0), LEFT, 0.2);
        assert!(close(&dw, &[0.1, -0.1]));
        let other = max_likelihood_update(&ctx(&w, &x, RIGHT, 0.0), LEFT, 0.2);
        assert_eq!(dw, other);
        let confident = [40.0, 0.0];
        let dw = max_likelihood_update(&ctx(&confident, &x, LEFT, 1.0), LEFT, 0.2);
        assert!(dw.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn etrace_examples() {
        let w = [0.0, 0.0];
        let x = [1.0, 1.0];
        let history: VecDeque<HistoryEntry> = (0..2)
            .map(|_| HistoryEntry { x: x.to_vec(), y: RIGHT, p_y: 0.5 })
            .collect();
        let mut c = ctx(&w, &x, RIGHT, 1.0);
        c.history = Some(&history);
        assert!(close(&etrace_reinforce_update(&c, 0.1, 2), &[0.15, 0.15]));
        c.r = 0.0;
        assert_eq!(etrace_reinforce_update(&c, 0.1, 2), vec![0.0, 0.0]);
    }

    #[test]
    fn etrace_window_zero_is_reinforce() {
        let w = [0.3, -0.2];
        let x = [1.25, 1.0];
        let history: VecDeque<HistoryEntry> =
            (0..5).map(|_| HistoryEntry { x: vec![-2.0, 1.0], y: LEFT, p_y: 0.3 }).collect();
        let mut c = ctx(&w, &x, RIGHT, 1.0);
        c.history = Some(&history);
        assert_eq!(etrace_reinforce_update(&c, 0.07, 0), reinforce_update(&c, 0.07));
    }

    #[test]
    fn rewarded_history_terms_are_nonnegative_in_stimulus() {
        for s in [-2.0, -0.25, 0.5, 2.0] {
            let label = u8::from(s > 0.0);
            for p in [0.01, 0.5, 0.99] {
                let mut dw = vec![0.0; 2];
                policy_gradient_term(&[s, 1.0], label, p, 1.0, &mut dw);
                assert!(dw[0] >= 0.0);
            }
        }
    }

    #[test]
    fn etrace_reward_examples() {
        assert_eq!(etrace_reward(&[1, 1, 0, 0], 0.5).unwrap(), 1);
        assert_eq!(etrace_reward(&[0, 0, 0, 1], 0.5).unwrap(), 0);
        assert_eq!(etrace_reward(&[1; 10], 0.5).unwrap(), 1);
        assert!(etrace_reward(&[], 0.5).is_err());
    }

    #[test]
    fn param_validation() {
        assert!(RuleParams::reinforce(0.0).validate().is_err());
        assert!(RuleParams::etrace(0.1, 0).validate().is_err());
        let mut p = RuleParams::reinforce(0.1);
        p.reward_threshold = 0.0;
        assert!(p.validate().is_err());
        assert!(RuleParams::etrace(0.1, 10).validate().is_ok());
    }

    /// Brute-force expectation of the stimulus update over the stimulus grid
    /// and the policy's choice, after a fixed history of `window` trials.
    fn expected_stim_update(rewarded_history: bool) -> f64 {
        let params = RuleParams::etrace(0.05, 10);
        let grid: Vec<f64> = (-8..=8).filter(|&k| k != 0).map(|k| k as f64 * 0.25).collect();
        let w = [0.0, 0.0];
        let mut total = 0.0;
        for &s in &grid {
            for y in [LEFT, RIGHT] {
                let mut rule = GroundTruthRule::new(params, false);
                for i in 0..params.window {
                    let hs = grid[(i * 5) % grid.len()];
                    let label = u8::from(hs > 0.0);
                    let hy = if rewarded_history { label } else { 1 - label };
                    rule.update(&w, &TrialRecord::from_choice(i, hs, hy, RIGHT));
                }
                let p = taken_probability(&w, &[s, 1.0], y);
                let dw = rule.update(&w, &TrialRecord::from_choice(10, s, y, RIGHT));
                total += p * dw[0];
            }
        }
        total / grid.len() as f64
    }

    #[test]
    fn rewarded_history_gives_larger_expected_update() {
        let rewarded = expected_stim_update(true);
        let unrewarded = expected_stim_update(false);
        assert!(rewarded > unrewarded, "{rewarded} vs {unrewarded}");
    }

    #[test]
    fn frozen_bias_zeroes_bias_coordinate() {
        let mut rule = GroundTruthRule::new(RuleParams::reinforce(0.1), false);
        let dw = rule.update(&[0.0, 0.0], &TrialRecord::from_choice(0, 1.0, RIGHT, RIGHT));
        assert_eq!(dw[1], 0.0);
        assert!(dw[0] > 0.0);
    }

    proptest! {
        #[test]
        fn markov_rules_ignore_history(
            w0 in -3.0..3.0f64, w1 in -2.0..2.0f64, s in -2.0..2.0f64, y in 0u8..2, r in 0u8..2,
            hs in proptest::collection::vec((-2.0..2.0f64, 0u8..2, 0.01..0.99f64), 0..12),
        ) {
            let w = [w0, w1];
            let x = [s, 1.0];
            let history: VecDeque<HistoryEntry> =
                hs.iter().map(|&(hs, hy, p)| HistoryEntry { x: vec![hs, 1.0], y: hy, p_y: p }).collect();
            let plain = ctx(&w, &x, y, f64::from(r));
            let mut with = plain.clone();
            with.history = Some(&history);
            prop_assert_eq!(reinforce_update(&plain, 0.1), reinforce_update(&with, 0.1));
            prop_assert_eq!(max_likelihood_update(&plain, 1, 0.1), max_likelihood_update(&with, 1, 0.1));
        }

        #[test]
        fn updates_are_linear_in_rate(w0 in -3.0..3.0f64, s in -2.0..2.0f64, y in 0u8..2, a in 0.001..1.0f64, k in 0.1..10.0f64) {
            let w = [w0, 0.2];
            let x = [s, 1.0];
            let history: VecDeque<HistoryEntry> =
                (0..3).map(|_| HistoryEntry { x: vec![s, 1.0], y, p_y: 0.4 }).collect();
            let mut c = ctx(&w, &x, y, 1.0);
            c.history = Some(&history);
            let pairs = [
                (reinforce_update(&c, a), reinforce_update(&c, k * a)),
                (max_likelihood_update(&c, 1, a), max_likelihood_update(&c, 1, k * a)),
                (etrace_reinforce_update(&c, a, 3), etrace_reinforce_update(&c, k * a, 3)),
            ];
            for (base, scaled) in pairs {
                for (b, sc) in base.iter().zip(&scaled) {
                    prop_assert!((k * b - sc).abs() <= 1e-12 * (1.0 + sc.abs()));
                }
            }
        }
    }
}
