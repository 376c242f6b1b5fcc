use crate::glm::TrialRecord;

/// A learning rule evaluated trial by trial.
///
/// Implementations may carry history between calls; [`reset`](Self::reset)
/// returns them to the start-of-session state.
pub trait UpdateFunction {
    fn reset(&mut self);

    /// Weight change produced on `trial` when the current weights are `w`.
    fn update(&mut self, w: &[f64], trial: &TrialRecord) -> Vec<f64>;

    /// True when updates can depend on earlier trials beyond the current weights.
    fn is_history_dependent(&self) -> bool;
}

/// Update function that is identically zero.
#[derive(Debug, Clone, Copy)]
pub struct ZeroUpdate {
    pub dim: usize,
}

impl UpdateFunction for ZeroUpdate {
    fn reset(&mut self) {}

    fn update(&mut self, _w: &[f64], _trial: &TrialRecord) -> Vec<f64> {
        vec![0.0; self.dim]
    }

    fn is_history_dependent(&self) -> bool {
        false
    }
}
