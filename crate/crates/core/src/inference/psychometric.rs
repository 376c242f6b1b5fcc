use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::glm::{TrialRecord, WeightVector};

/// Number of leading trials used for the initial-weight estimate.
pub const PSYCHOMETRIC_TRIALS: usize = 100;

/// Initial GLM weights from the empirical psychometric curve.
///
/// Trials are grouped by stimulus; each group's right-choice rate is
/// Laplace-smoothed (`(k + 1) / (n + 2)`) and mapped through the logit, and
/// `[stimulus, 1]` is regressed on those logits by least squares weighted by
/// group size.
pub fn estimate_initial_weights(trials: &[TrialRecord]) -> Result<WeightVector> {
    if trials.len() < 10 {
        return Err(Error::Underdetermined(format!(
            "psychometric fit needs at least 10 trials, got {}",
            trials.len()
        )));
    }
    // Stimuli are keyed by bit pattern; grid values compare exactly.
    let mut groups: BTreeMap<u64, (f64, f64, f64)> = BTreeMap::new();
    for t in trials {
        let e = groups.entry(t.stimulus.to_bits()).or_insert((t.stimulus, 0.0, 0.0));
        e.1 += 1.0;
        e.2 += f64::from(t.choice);
    }
    if groups.len() < 2 {
        return Err(Error::Underdetermined(
            "psychometric fit needs at least two distinct stimulus values".into(),
        ));
    }
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(s, n, k) in groups.values() {
        let p = (k + 1.0) / (n + 2.0);
        let target = (p / (1.0 - p)).ln();
        sw += n;
        sx += n * s;
        sy += n * target;
        sxx += n * s * s;
        sxy += n * s * target;
    }
    let det = sw * sxx - sx * sx;
    if det.abs() < 1e-12 * sw * sw {
        return Err(Error::Underdetermined("degenerate stimulus design".into()));
    }
    let slope = (sw * sxy - sx * sy) / det;
    let intercept = (sxx * sy - sx * sxy) / det;
    Ok(WeightVector(vec![slope, intercept]))
}
