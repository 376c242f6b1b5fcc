//! Central finite-difference check of [`RuleNetwork::loss_and_gradient`].

use crate::error::Result;
use crate::glm::SessionRecord;

use super::network::RuleNetwork;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// Largest `|analytic - numeric| / max(|analytic|, |numeric|, floor)`.
    pub max_relative_error: f64,
    pub max_abs_error: f64,
    pub checked: usize,
}

impl GradCheck {
    pub fn merge(self, other: GradCheck) -> GradCheck {
        GradCheck {
            max_relative_error: self.max_relative_error.max(other.max_relative_error),
            max_abs_error: self.max_abs_error.max(other.max_abs_error),
            checked: self.checked + other.checked,
        }
    }
}

impl Default for GradCheck {
    fn default() -> Self {
        GradCheck {
            max_relative_error: 0.0,
            max_abs_error: 0.0,
            checked: 0,
        }
    }
}

fn session_loss(net: &RuleNetwork, w0: &[f64], session: &SessionRecord) -> Result<f64> {
    Ok(-net.run_session(w0, session, false)?.log_likelihood())
}

/// Compares analytic gradients with central differences of step `step` at
/// the parameter indices in `params` and at every coordinate of `w0`.
pub fn check_gradients(
    net: &RuleNetwork,
    w0: &[f64],
    session: &SessionRecord,
    params: &[usize],
    step: f64,
    floor: f64,
) -> Result<GradCheck> {
    let (_, grads) = net.loss_and_gradient(w0, session)?;
    let mut out = GradCheck::default();
    let mut record = |numeric: f64, analytic: f64| {
        let abs = (numeric - analytic).abs();
        out.max_abs_error = out.max_abs_error.max(abs);
        out.max_relative_error = out
            .max_relative_error
            .max(abs / numeric.abs().max(analytic.abs()).max(floor));
        out.checked += 1;
    };
    let mut probe = net.clone();
    for &i in params {
        let orig = probe.params[i];
        probe.params[i] = orig + step;
        let up = session_loss(&probe, w0, session)?;
        probe.params[i] = orig - step;
        let down = session_loss(&probe, w0, session)?;
        probe.params[i] = orig;
        record((up - down) / (2.0 * step), grads.params[i]);
    }
    let mut w = w0.to_vec();
    for k in 0..w.len() {
        let orig = w[k];
        w[k] = orig + step;
        let up = session_loss(net, &w, session)?;
        w[k] = orig - step;
        let down = session_loss(net, &w, session)?;
        w[k] = orig;
        record((up - down) / (2.0 * step), grads.w0[k]);
    }
    Ok(out)
}
