use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{matvec_add, matvec_backward, uniform_fill};
use crate::error::{check_dim, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the activation's output.
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Activation::Tanh => 0,
            Activation::Relu => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Tanh),
            1 => Some(Activation::Relu),
            _ => None,
        }
    }
}

/// Fully connected network with hidden activations and a linear output head.
///
/// Layout of the flat parameter slice, layer by layer: weight matrix
/// (`out x in`, row-major) followed by the bias vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    activation: Activation,
}

/// Layer activations recorded by a forward pass: `acts[0]` is the input and
/// the last entry is the output.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MlpCache {
    pub acts: Vec<Vec<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl Mlp {
    /// `sizes` lists the input width, each hidden width and the output width.
    pub fn new(sizes: Vec<usize>, activation: Activation) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        Mlp { sizes, activation }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("nonempty")
    }

    pub fn num_params(&self) -> usize {
        self.sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
    }

    /// Offsets of `(weights, bias)` for layer `l`.
    fn layer_offsets(&self, l: usize) -> (usize, usize) {
        let start: usize = self.sizes[..l + 1]
            .windows(2)
            .map(|w| w[1] * w[0] + w[1])
            .sum();
        (start, start + self.sizes[l] * self.sizes[l + 1])
    }

    /// Fan-in uniform initialization, `U(-g / sqrt(fan_in), g / sqrt(fan_in))`
    /// with gain 1 on hidden layers and `output_gain` on the output layer.
    pub fn init<R: Rng>(&self, rng: &mut R, output_gain: f64) -> Vec<f64> {
        let mut params = vec![0.0; self.num_params()];
        let layers = self.sizes.len() - 1;
        for l in 0..layers {
            let (wo, _) = self.layer_offsets(l);
            let n = self.sizes[l + 1] * self.sizes[l] + self.sizes[l + 1];
            let gain = if l + 1 == layers { output_gain } else { 1.0 };
            let bound = gain / (self.sizes[l] as f64).sqrt();
            uniform_fill(rng, bound, &mut params[wo..wo + n]);
        }
        params
    }

    pub fn forward(&self, params: &[f64], input: &[f64]) -> Result<MlpCache> {
        check_dim(self.num_params(), params.len())?;
        check_dim(self.input_dim(), input.len())?;
        let mut cache = MlpCache::default();
        self.forward_into(params, input, &mut cache);
        Ok(cache)
    }

    /// Forward pass without shape checks, reusing the cache buffers.
    pub(crate) fn forward_into(&self, params: &[f64], input: &[f64], cache: &mut MlpCache) {
        let layers = self.sizes.len() - 1;
        cache.acts.resize(layers + 1, Vec::new());
        cache.acts[0].clear();
        cache.acts[0].extend_from_slice(input);
        for l in 0..layers {
            let (wo, bo) = self.layer_offsets(l);
            let (rows, cols) = (self.sizes[l + 1], self.sizes[l]);
            let (prev, next) = cache.acts.split_at_mut(l + 1);
            let out = &mut next[0];
            out.clear();
            out.extend_from_slice(&params[bo..bo + rows]);
            matvec_add(&params[wo..bo], &prev[l], rows, cols, out);
            if l + 1 < layers {
                for v in out.iter_mut() {
                    *v = self.activation.apply(*v);
                }
            }
        }
    }

    /// Accumulates parameter gradients into `grad_params` and writes the input
    /// gradient into `grad_input`, given the gradient of the output.
    pub fn backward(
        &self,
        params: &[f64],
        cache: &MlpCache,
        grad_output: &[f64],
        grad_params: &mut [f64],
        grad_input: &mut [f64],
    ) -> Result<()> {
        check_dim(self.num_params(), params.len())?;
        check_dim(self.num_params(), grad_params.len())?;
        check_dim(self.output_dim(), grad_output.len())?;
        check_dim(self.input_dim(), grad_input.len())?;
        check_dim(self.sizes.len(), cache.acts.len())?;
        self.backward_unchecked(params, cache, grad_output, grad_params, grad_input);
        Ok(())
    }

    pub(crate) fn backward_unchecked(
        &self,
        params: &[f64],
        cache: &MlpCache,
        grad_output: &[f64],
        grad_params: &mut [f64],
        grad_input: &mut [f64],
    ) {
        let layers = self.sizes.len() - 1;
        let mut g = grad_output.to_vec();
        for l in (0..layers).rev() {
            let (wo, bo) = self.layer_offsets(l);
            let (rows, cols) = (self.sizes[l + 1], self.sizes[l]);
            for (gb, gi) in grad_params[bo..bo + rows].iter_mut().zip(&g) {
                *gb += gi;
            }
            let mut g_prev = vec![0.0; cols];
            matvec_backward(
                &params[wo..bo],
                &cache.acts[l],
                &g,
                rows,
                cols,
                &mut grad_params[wo..bo],
                &mut g_prev,
            );
            if l > 0 {
                for (gp, a) in g_prev.iter_mut().zip(&cache.acts[l]) {
                    *gp *= self.activation.derivative_from_output(*a);
                }
            }
            g = g_prev;
        }
        grad_input.copy_from_slice(&g);
    }
}
