//! Learning-rule models and their exact gradients through the unrolled
//! weight recurrence `w_{t+1} = w_t + dw_t`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::glm::{build_covariates, choice_log_likelihood, choice_sign, clamp_logit, compensated_sum, dot, sigmoid, SessionRecord, TrialRecord, DEFAULT_LOGIT_CLAMP};
use crate::nets::{Activation, Gru, GruCache, Mlp, MlpCache};
use crate::update::UpdateFunction;

/// Family of learning-rule model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "DNNGLM")]
    Dnn,
    #[serde(rename = "RNNGLM")]
    Rnn,
    /// Feedforward rule that also sees the previous trial's stimulus, choice and reward.
    #[serde(rename = "DNNGLM_HISTORY")]
    DnnHistory,
    /// `dw = alpha (r - b) eps_y (1 - p_y) x` with learnable `alpha` and `b`.
    #[serde(rename = "REINFORCE_PARAM")]
    ReinforceParam,
    /// As [`ModelKind::ReinforceParam`] with `b <= 0`.
    #[serde(rename = "REINFORCE_PARAM_NONNEG")]
    ReinforceParamNonneg,
    /// [`ModelKind::ReinforceParam`] plus a learnable GLM regressor on the
    /// previous choice (`+1` right, `-1` left, 0 before the first trial).
    #[serde(rename = "REINFORCE_HISTORY")]
    ReinforceHistory,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Dnn,
        ModelKind::Rnn,
        ModelKind::DnnHistory,
        ModelKind::ReinforceParam,
        ModelKind::ReinforceParamNonneg,
        ModelKind::ReinforceHistory,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Dnn => "DNNGLM",
            ModelKind::Rnn => "RNNGLM",
            ModelKind::DnnHistory => "DNNGLM_HISTORY",
            ModelKind::ReinforceParam => "REINFORCE_PARAM",
            ModelKind::ReinforceParamNonneg => "REINFORCE_PARAM_NONNEG",
            ModelKind::ReinforceHistory => "REINFORCE_HISTORY",
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            ModelKind::Dnn => 0,
            ModelKind::Rnn => 1,
            ModelKind::DnnHistory => 2,
            ModelKind::ReinforceParam => 3,
            ModelKind::ReinforceParamNonneg => 4,
            ModelKind::ReinforceHistory => 5,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.tag() == tag)
    }

    pub fn is_parametric(self) -> bool {
        matches!(
            self,
            ModelKind::ReinforceParam | ModelKind::ReinforceParamNonneg | ModelKind::ReinforceHistory
        )
    }

    /// Whether updates may depend on trials before the current one.
    pub fn uses_history(self) -> bool {
        matches!(self, ModelKind::Rnn | ModelKind::DnnHistory | ModelKind::ReinforceHistory)
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.to_ascii_uppercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|k| k.name() == upper)
            .ok_or_else(|| Error::Config(format!("unknown model kind {s}")))
    }
}

/// Network shape hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchConfig {
    pub hidden: usize,
    pub hidden_layers: usize,
    pub recurrent_hidden: usize,
    pub activation: Activation,
    /// Gain on the fan-in bound of the output layer; small values start the
    /// rule near "no learning".
    pub output_gain: f64,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig {
            hidden: 32,
            hidden_layers: 2,
            recurrent_hidden: 32,
            activation: Activation::Tanh,
            output_gain: 0.01,
        }
    }
}

/// Per-feature standardization of the previous-trial inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputNorm {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Number of previous-trial features: stimulus, choice, reward.
pub const HISTORY_FEATURES: usize = 3;
/// Current-trial features preceding the weights: stimulus, choice, reward.
pub const TRIAL_FEATURES: usize = 3;

impl InputNorm {
    pub fn identity() -> Self {
        InputNorm {
            mean: vec![0.0; HISTORY_FEATURES],
            std: vec![1.0; HISTORY_FEATURES],
        }
    }

    /// Statistics of the previous-trial features over all trials that have one.
    pub fn from_sessions(sessions: &[SessionRecord]) -> Self {
        let rows: Vec<[f64; HISTORY_FEATURES]> = sessions
            .iter()
            .flat_map(|s| s.trials.iter().take(s.trials.len().saturating_sub(1)))
            .map(trial_features)
            .collect();
        if rows.is_empty() {
            return Self::identity();
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; HISTORY_FEATURES];
        for r in &rows {
            for k in 0..HISTORY_FEATURES {
                mean[k] += r[k] / n;
            }
        }
        let mut std = vec![0.0; HISTORY_FEATURES];
        for r in &rows {
            for k in 0..HISTORY_FEATURES {
                std[k] += (r[k] - mean[k]).powi(2) / n;
            }
        }
        for s in &mut std {
            *s = if *s > 1e-16 { s.sqrt() } else { 1.0 };
        }
        InputNorm { mean, std }
    }
}

fn trial_features(t: &TrialRecord) -> [f64; 3] {
    [t.stimulus, f64::from(t.choice), f64::from(t.reward)]
}

#[derive(Debug, Clone, PartialEq)]
pub enum Arch {
    Feedforward(Mlp),
    Recurrent { gru: Gru, head: Mlp },
    Parametric,
}

/// A learning rule with trainable parameters stored in one flat vector.
///
/// Feedforward kinds feed `[s_t, y_t, r_t, w_t]` (plus standardized
/// `[s_{t-1}, y_{t-1}, r_{t-1}]` for the history variant) to an MLP whose
/// linear output is `dw_t`. The recurrent kind feeds the same inputs to a GRU
/// and maps its state through an MLP head; its flat vector holds the GRU
/// block followed by the head block. Parametric kinds store `[alpha, b]`,
/// plus the previous-choice regressor weight for the history variant.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleNetwork {
    pub kind: ModelKind,
    pub dim: usize,
    pub arch: Arch,
    pub params: Vec<f64>,
    pub norm: InputNorm,
    pub logit_clamp: f64,
}

/// Recurrent and previous-trial state carried between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct StepState {
    pub hidden: Vec<f64>,
    pub prev: Option<TrialRecord>,
}

/// Everything a backward pass needs from one forward step.
#[derive(Debug, Clone, Default)]
pub struct StepRecord {
    pub w: Vec<f64>,
    pub x: Vec<f64>,
    /// Unclamped logit, including any history regressor.
    pub logit: f64,
    /// Value of the previous-choice regressor.
    pub history_regressor: f64,
    pub choice: u8,
    pub reward: f64,
    pub mlp: MlpCache,
    pub gru: Option<GruCache>,
}

/// Recorded forward pass of one session.
#[derive(Debug, Clone)]
pub struct Tape {
    pub expected_len: usize,
    pub records: Vec<StepRecord>,
    /// Per-trial negative log-likelihoods, summed in order to form the loss.
    pub trial_losses: Vec<f64>,
}

impl Tape {
    pub fn loss(&self) -> f64 {
        compensated_sum(self.trial_losses.iter().copied())
    }
}

/// Gradient of the session loss.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub params: Vec<f64>,
    pub w0: Vec<f64>,
}

/// Result of rolling a rule along a session.
#[derive(Debug, Clone)]
pub struct SessionRun {
    /// Weights before each trial and after the last (length T + 1).
    pub weights: Vec<Vec<f64>>,
    pub updates: Vec<Vec<f64>>,
    pub log_likelihoods: Vec<f64>,
    pub tape: Option<Tape>,
}

impl SessionRun {
    pub fn log_likelihood(&self) -> f64 {
        compensated_sum(self.log_likelihoods.iter().copied())
    }
}

impl RuleNetwork {
    pub fn new<R: Rng>(kind: ModelKind, dim: usize, arch: &ArchConfig, rng: &mut R) -> Self {
        let input = TRIAL_FEATURES + dim + if kind == ModelKind::DnnHistory { HISTORY_FEATURES } else { 0 };
        let mlp_sizes = |first: usize| {
            let mut sizes = vec![first];
            sizes.extend(std::iter::repeat_n(arch.hidden, arch.hidden_layers));
            sizes.push(dim);
            sizes
        };
        let (net_arch, params) = match kind {
            ModelKind::Dnn | ModelKind::DnnHistory => {
                let mlp = Mlp::new(mlp_sizes(input), arch.activation);
                let p = mlp.init(rng, arch.output_gain);
                (Arch::Feedforward(mlp), p)
            }
            ModelKind::Rnn => {
                let gru = Gru::new(input, arch.recurrent_hidden);
                let head = Mlp::new(mlp_sizes(arch.recurrent_hidden), arch.activation);
                let mut p = gru.init(rng);
                p.extend(head.init(rng, arch.output_gain));
                (Arch::Recurrent { gru, head }, p)
            }
            ModelKind::ReinforceParam | ModelKind::ReinforceParamNonneg => (Arch::Parametric, vec![0.01, 0.0]),
            ModelKind::ReinforceHistory => (Arch::Parametric, vec![0.01, 0.0, 0.0]),
        };
        RuleNetwork {
            kind,
            dim,
            arch: net_arch,
            params,
            norm: InputNorm::identity(),
            logit_clamp: DEFAULT_LOGIT_CLAMP,
        }
    }

    /// REINFORCE with a fixed rate and baseline.
    pub fn reinforce(kind: ModelKind, dim: usize, alpha: f64, baseline: f64) -> Self {
        assert!(kind.is_parametric());
        let mut params = vec![alpha, baseline];
        if kind == ModelKind::ReinforceHistory {
            params.push(0.0);
        }
        RuleNetwork {
            kind,
            dim,
            arch: Arch::Parametric,
            params,
            norm: InputNorm::identity(),
            logit_clamp: DEFAULT_LOGIT_CLAMP,
        }
    }

    pub fn num_params(&self) -> usize {
        match &self.arch {
            Arch::Feedforward(m) => m.num_params(),
            Arch::Recurrent { gru, head } => gru.num_params() + head.num_params(),
            Arch::Parametric => {
                if self.kind == ModelKind::ReinforceHistory {
                    3
                } else {
                    2
                }
            }
        }
    }

    pub fn initial_state(&self) -> StepState {
        let hidden = match &self.arch {
            Arch::Recurrent { gru, .. } => vec![0.0; gru.hidden_dim()],
            _ => Vec::new(),
        };
        StepState { hidden, prev: None }
    }

    /// Keeps constrained parameters feasible after an optimizer step.
    pub fn project(&mut self) {
        if self.kind == ModelKind::ReinforceParamNonneg && self.params[1] > 0.0 {
            self.params[1] = 0.0;
        }
    }

    fn network_input(&self, w: &[f64], trial: &TrialRecord, prev: Option<&TrialRecord>) -> Vec<f64> {
        let mut u = Vec::with_capacity(TRIAL_FEATURES + self.dim + HISTORY_FEATURES);
        u.extend_from_slice(&trial_features(trial));
        u.extend_from_slice(w);
        if self.kind == ModelKind::DnnHistory {
            match prev {
                Some(p) => {
                    let f = trial_features(p);
                    u.extend((0..HISTORY_FEATURES).map(|k| (f[k] - self.norm.mean[k]) / self.norm.std[k]));
                }
                None => u.extend(std::iter::repeat_n(0.0, HISTORY_FEATURES)),
            }
        }
        u
    }

    fn history_regressor(&self, prev: Option<&TrialRecord>) -> f64 {
        match (self.kind, prev) {
            (ModelKind::ReinforceHistory, Some(p)) => choice_sign(p.choice),
            _ => 0.0,
        }
    }

    /// Unclamped logit of a right choice given the weights and the state.
    pub fn logit(&self, state: &StepState, w: &[f64], x: &[f64]) -> f64 {
        let mut l = dot(w, x);
        if self.kind == ModelKind::ReinforceHistory {
            l += self.params[2] * self.history_regressor(state.prev.as_ref());
        }
        l
    }

    /// One trial: returns `dw` and advances `state`. When `record` is given
    /// the intermediates needed for the backward pass are stored in it.
    pub fn step(
        &self,
        state: &mut StepState,
        w: &[f64],
        trial: &TrialRecord,
        record: Option<&mut StepRecord>,
    ) -> Vec<f64> {
        let dw;
        match &self.arch {
            Arch::Feedforward(mlp) => {
                let u = self.network_input(w, trial, state.prev.as_ref());
                let mut cache = MlpCache::default();
                mlp.forward_into(&self.params, &u, &mut cache);
                dw = cache.output().to_vec();
                if let Some(r) = record {
                    r.mlp = cache;
                }
            }
            Arch::Recurrent { gru, head } => {
                let u = self.network_input(w, trial, state.prev.as_ref());
                let (pg, ph) = self.params.split_at(gru.num_params());
                let mut gcache = GruCache::default();
                gru.step_into(pg, &state.hidden, &u, &mut gcache);
                let mut hcache = MlpCache::default();
                head.forward_into(ph, &gcache.h_next, &mut hcache);
                dw = hcache.output().to_vec();
                state.hidden.clone_from(&gcache.h_next);
                if let Some(r) = record {
                    r.mlp = hcache;
                    r.gru = Some(gcache);
                }
            }
            Arch::Parametric => {
                let x = build_covariates(trial).0;
                let logit = clamp_logit(self.logit(state, w, &x), self.logit_clamp);
                let eps = choice_sign(trial.choice);
                let q = sigmoid(-eps * logit);
                let scale = self.params[0] * (f64::from(trial.reward) - self.params[1]) * eps * q;
                dw = x.iter().map(|xi| scale * xi).collect();
            }
        }
        state.prev = Some(*trial);
        dw
    }

    /// Rolls the rule along `session` from `w0`, scoring each actual choice
    /// under the current weights before applying the update.
    pub fn run_session(&self, w0: &[f64], session: &SessionRecord, record: bool) -> Result<SessionRun> {
        check_dim(self.dim, w0.len())?;
        let n = session.trials.len();
        let mut state = self.initial_state();
        let mut w = w0.to_vec();
        let mut weights = Vec::with_capacity(n + 1);
        let mut updates = Vec::with_capacity(n);
        let mut lls = Vec::with_capacity(n);
        let mut records = if record { Vec::with_capacity(n) } else { Vec::new() };
        for trial in &session.trials {
            let x = build_covariates(trial).0;
            check_dim(self.dim, x.len())?;
            let history_regressor = self.history_regressor(state.prev.as_ref());
            let logit = self.logit(&state, &w, &x);
            let ll = choice_log_likelihood(clamp_logit(logit, self.logit_clamp), trial.choice);
            lls.push(ll);
            let dw = if record {
                let mut rec = StepRecord {
                    w: w.clone(),
                    x,
                    logit,
                    history_regressor,
                    choice: trial.choice,
                    reward: f64::from(trial.reward),
                    ..Default::default()
                };
                let dw = self.step(&mut state, &w, trial, Some(&mut rec));
                records.push(rec);
                dw
            } else {
                self.step(&mut state, &w, trial, None)
            };
            weights.push(w.clone());
            for (wi, d) in w.iter_mut().zip(&dw) {
                *wi += d;
            }
            updates.push(dw);
        }
        weights.push(w);
        let tape = record.then(|| Tape {
            expected_len: n,
            trial_losses: lls.iter().map(|l| -l).collect(),
            records,
        });
        Ok(SessionRun {
            weights,
            updates,
            log_likelihoods: lls,
            tape,
        })
    }

    /// Exact gradient of the session loss (negative log-likelihood summed over
    /// trials) with respect to every parameter and to `w0`, through the full
    /// unrolled recurrence.
    pub fn backward(&self, tape: &Tape) -> Result<Gradients> {
        if tape.records.len() != tape.expected_len || tape.trial_losses.len() != tape.expected_len {
            return Err(Error::IncompleteTape {
                expected: tape.expected_len,
                recorded: tape.records.len(),
            });
        }
        let d = self.dim;
        let mut gp = vec![0.0; self.num_params()];
        // Adjoint of w_{t+1}, then of w_t once the step is processed.
        let mut g_w = vec![0.0; d];
        let mut g_h = match &self.arch {
            Arch::Recurrent { gru, .. } => vec![0.0; gru.hidden_dim()],
            _ => Vec::new(),
        };
        let clamp = self.logit_clamp;
        for rec in tape.records.iter().rev() {
            let g_dw = g_w.clone();
            let mut g_logit = 0.0;
            match &self.arch {
                Arch::Feedforward(mlp) => {
                    let mut g_u = vec![0.0; mlp.input_dim()];
                    mlp.backward_unchecked(&self.params, &rec.mlp, &g_dw, &mut gp, &mut g_u);
                    for k in 0..d {
                        g_w[k] += g_u[TRIAL_FEATURES + k];
                    }
                }
                Arch::Recurrent { gru, head } => {
                    let np = gru.num_params();
                    let (pg, ph) = self.params.split_at(np);
                    let (gpg, gph) = gp.split_at_mut(np);
                    let gcache = rec.gru.as_ref().ok_or(Error::IncompleteTape {
                        expected: tape.expected_len,
                        recorded: 0,
                    })?;
                    let mut g_head_in = vec![0.0; head.input_dim()];
                    head.backward_unchecked(ph, &rec.mlp, &g_dw, gph, &mut g_head_in);
                    for (a, b) in g_h.iter_mut().zip(&g_head_in) {
                        *a += b;
                    }
                    let mut g_hprev = vec![0.0; gru.hidden_dim()];
                    let mut g_u = vec![0.0; gru.input_dim()];
                    gru.backward_unchecked(pg, gcache, &g_h, gpg, &mut g_hprev, &mut g_u);
                    g_h = g_hprev;
                    for k in 0..d {
                        g_w[k] += g_u[TRIAL_FEATURES + k];
                    }
                }
                Arch::Parametric => {
                    let (alpha, b) = (self.params[0], self.params[1]);
                    let eps = choice_sign(rec.choice);
                    let q = sigmoid(-eps * clamp_logit(rec.logit, clamp));
                    let s = dot(&g_dw, &rec.x);
                    gp[0] += (rec.reward - b) * eps * q * s;
                    gp[1] += -alpha * eps * q * s;
                    if rec.logit.abs() < clamp {
                        g_logit += -alpha * (rec.reward - b) * q * (1.0 - q) * s;
                    }
                }
            }
            if rec.logit.abs() < clamp {
                let p = sigmoid(rec.logit);
                g_logit += -(f64::from(rec.choice) - p);
            }
            for k in 0..d {
                g_w[k] += g_logit * rec.x[k];
            }
            if self.kind == ModelKind::ReinforceHistory {
                gp[2] += g_logit * rec.history_regressor;
            }
        }
        Ok(Gradients { params: gp, w0: g_w })
    }

    /// Session loss and gradient in one call.
    pub fn loss_and_gradient(&self, w0: &[f64], session: &SessionRecord) -> Result<(f64, Gradients)> {
        let run = self.run_session(w0, session, true)?;
        let tape = run.tape.expect("recorded");
        let grads = self.backward(&tape)?;
        Ok((tape.loss(), grads))
    }

    pub fn stepper(&self) -> RuleStepper<'_> {
        RuleStepper {
            network: self,
            state: self.initial_state(),
        }
    }
}

/// A [`RuleNetwork`] evaluated trial by trial.
#[derive(Debug, Clone)]
pub struct RuleStepper<'a> {
    network: &'a RuleNetwork,
    state: StepState,
}

impl UpdateFunction for RuleStepper<'_> {
    fn reset(&mut self) {
        self.state = self.network.initial_state();
    }

    fn update(&mut self, w: &[f64], trial: &TrialRecord) -> Vec<f64> {
        self.network.step(&mut self.state, w, trial, None)
    }

    fn is_history_dependent(&self) -> bool {
        self.network.kind.uses_history()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::Source;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn session(n: usize, seed: u64) -> SessionRecord {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trials = (0..n)
            .map(|t| {
                let s = (rng.random_range(0..16) as f64 - 7.5).round() * 0.25;
                let s = if s == 0.0 { 0.25 } else { s };
                TrialRecord::from_choice(t, s, u8::from(rng.random::<bool>()), 0)
            })
            .collect();
        SessionRecord::new("a", trials, None, Source::Simulated).unwrap()
    }

    #[test]
    fn zero_length_session_has_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for kind in ModelKind::ALL {
            let net = RuleNetwork::new(kind, 2, &ArchConfig::default(), &mut rng);
            let empty = SessionRecord {
                animal_id: "e".into(),
                trials: vec![],
                seed: None,
                source: Source::Simulated,
            };
            let (loss, g) = net.loss_and_gradient(&[0.1, 0.2], &empty).unwrap();
            assert_eq!(loss, 0.0);
            assert!(g.params.iter().chain(&g.w0).all(|&v| v == 0.0));
        }
    }

    #[test]
    fn incomplete_tape_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = RuleNetwork::new(ModelKind::Dnn, 2, &ArchConfig::default(), &mut rng);
        let mut tape = net.run_session(&[0.0, 0.0], &session(10, 2), true).unwrap().tape.unwrap();
        tape.records.pop();
        assert!(matches!(net.backward(&tape), Err(Error::IncompleteTape { expected: 10, recorded: 9 })));
    }

    #[test]
    fn tape_loss_matches_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = session(30, 3);
        for kind in ModelKind::ALL {
            let net = RuleNetwork::new(kind, 2, &ArchConfig::default(), &mut rng);
            let a = net.run_session(&[-1.0, 0.5], &s, true).unwrap();
            let b = net.run_session(&[-1.0, 0.5], &s, false).unwrap();
            assert_eq!(a.tape.unwrap().loss(), -b.log_likelihood());
            assert_eq!(a.weights, b.weights);
        }
    }

    #[test]
    fn zero_rate_reinforce_is_constant() {
        let net = RuleNetwork::reinforce(ModelKind::ReinforceParam, 2, 0.0, 0.0);
        let run = net.run_session(&[0.7, -0.3], &session(25, 5), false).unwrap();
        assert!(run.weights.iter().all(|w| w == &vec![0.7, -0.3]));
    }

    #[test]
    fn parametric_matches_reinforce_rule() {
        use crate::rules::{GroundTruthRule, RuleParams};
        let net = RuleNetwork::reinforce(ModelKind::ReinforceParam, 2, 0.05, 0.0);
        let mut stepper = net.stepper();
        let mut truth = GroundTruthRule::new(RuleParams::reinforce(0.05), true);
        for t in &session(40, 6).trials {
            let w = [0.4 * t.stimulus, -0.2];
            let a = stepper.update(&w, t);
            let b = truth.update(&w, t);
            for k in 0..2 {
                assert!((a[k] - b[k]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn projection_enforces_nonpositive_baseline() {
        let mut net = RuleNetwork::reinforce(ModelKind::ReinforceParamNonneg, 2, 0.1, 0.4);
        net.project();
        assert_eq!(net.params[1], 0.0);
    }

    #[test]
    fn kind_names_round_trip() {
        for k in ModelKind::ALL {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
            assert_eq!(ModelKind::from_tag(k.tag()), Some(k));
        }
        assert!("nope".parse::<ModelKind>().is_err());
    }
}
