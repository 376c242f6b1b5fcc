use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::stats::{linear_fit, sample_std};
use crate::error::{Error, Result};
use crate::glm::{log_sigmoid, sigmoid};

/// Idealized two-trial setting: a scalar weight, stimuli `x = +-1` with equal
/// probability, and every replicate animal sharing `w0` on its first trial
/// and `w0 + dw` on its second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdealizedConfig {
    pub w0: f64,
    pub dw: f64,
    /// Right-choice probabilities are clamped to `[eps, 1 - eps]`.
    pub eps: f64,
    pub seed: u64,
    /// Redraws allowed per estimate when the maximum-likelihood estimate does not exist.
    pub max_resamples: usize,
}

impl Default for IdealizedConfig {
    fn default() -> Self {
        IdealizedConfig {
            w0: 0.5,
            dw: 0.25,
            eps: 1e-6,
            seed: 0,
            max_resamples: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SePoint {
    pub n: usize,
    pub se: f64,
    /// Number of redraws needed because every choice agreed with the sign
    /// of the stimulus (or none did).
    pub resampled: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeScaling {
    pub slope: f64,
    pub intercept: f64,
    pub points: Vec<SePoint>,
}

/// Maximum-likelihood estimate of a scalar logistic weight by Newton's
/// method, or `None` when the data are separable and no finite MLE exists.
pub fn scalar_logistic_mle(x: &[f64], y: &[u8]) -> Option<f64> {
    let separable_pos = x.iter().zip(y).all(|(&x, &y)| (x > 0.0) == (y == 1) || x == 0.0);
    let separable_neg = x.iter().zip(y).all(|(&x, &y)| (x < 0.0) == (y == 1) || x == 0.0);
    if separable_pos || separable_neg {
        return None;
    }
    let mut w = 0.0;
    for _ in 0..100 {
        let (mut g, mut h) = (0.0, 0.0);
        for (&x, &y) in x.iter().zip(y) {
            let p = sigmoid(w * x);
            g += (f64::from(y) - p) * x;
            h += p * (1.0 - p) * x * x;
        }
        let mut step = g / h;
        // Halve until the likelihood does not drop.
        let ll = |w: f64| x.iter().zip(y).map(|(&x, &y)| log_sigmoid(if y == 1 { w * x } else { -w * x })).sum::<f64>();
        let base = ll(w);
        while ll(w + step) < base - 1e-12 && step.abs() > 1e-15 {
            step *= 0.5;
        }
        w += step;
        if step.abs() < 1e-12 * (1.0 + w.abs()) {
            break;
        }
    }
    Some(w)
}

fn draw_estimate(rng: &mut ChaCha8Rng, w: f64, n: usize, config: &IdealizedConfig, resampled: &mut usize) -> Result<f64> {
    let mut x = vec![0.0; n];
    let mut y = vec![0u8; n];
    for _ in 0..=config.max_resamples {
        for i in 0..n {
            x[i] = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let p = sigmoid(w * x[i]).clamp(config.eps, 1.0 - config.eps);
            y[i] = u8::from(rng.random::<f64>() < p);
        }
        if let Some(est) = scalar_logistic_mle(&x, &y) {
            return Ok(est);
        }
        *resampled += 1;
    }
    Err(Error::Numerical(format!(
        "no finite estimate after {} redraws at N = {n}",
        config.max_resamples
    )))
}

/// Standard error of the estimated first update `w1_hat - w0_hat` across
/// Monte-Carlo repetitions at each pool size, and the slope of log SE on log N.
pub fn se_scaling_check(n_values: &[usize], repetitions: usize, config: &IdealizedConfig) -> Result<SeScaling> {
    if n_values.len() < 2 || n_values.contains(&0) || repetitions < 2 {
        return Err(Error::Config(
            "need at least two positive pool sizes and two repetitions".into(),
        ));
    }
    if !(config.eps > 0.0 && config.eps < 0.5) {
        return Err(Error::Config("eps must lie in (0, 1/2)".into()));
    }
    let mut points = Vec::with_capacity(n_values.len());
    for (i, &n) in n_values.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(i as u64));
        let mut resampled = 0;
        let mut estimates = Vec::with_capacity(repetitions);
        for _ in 0..repetitions {
            let w0 = draw_estimate(&mut rng, config.w0, n, config, &mut resampled)?;
            let w1 = draw_estimate(&mut rng, config.w0 + config.dw, n, config, &mut resampled)?;
            estimates.push(w1 - w0);
        }
        points.push(SePoint {
            n,
            se: sample_std(&estimates),
            resampled,
        });
    }
    if points.iter().any(|p| !(p.se > 0.0 && p.se.is_finite())) {
        return Err(Error::Numerical("standard error is zero or non-finite".into()));
    }
    let lx: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.se.ln()).collect();
    let (slope, intercept) = linear_fit(&lx, &ly)?;
    Ok(SeScaling {
        slope,
        intercept,
        points,
    })
}
