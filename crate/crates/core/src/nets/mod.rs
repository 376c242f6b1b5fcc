//! Differentiable building blocks with hand-written reverse-mode gradients.
//!
//! Parameters of every block live in one flat `f64` slice with a documented
//! layout, so optimizers, clipping, serialization and finite-difference checks
//! all work on plain vectors.

mod adam;
mod gru;
mod mlp;

pub use adam::{clip_global_norm, AdamConfig, AdamState};
pub use gru::{Gru, GruCache};
pub use mlp::{Activation, Mlp, MlpCache};

use rand::Rng;

/// Fills `out` with draws from `U(-bound, bound)`.
pub(crate) fn uniform_fill<R: Rng>(rng: &mut R, bound: f64, out: &mut [f64]) {
    for v in out {
        *v = bound * (2.0 * rng.random::<f64>() - 1.0);
    }
}

/// `out += m * v` for a row-major `rows x cols` matrix.
#[inline]
pub(crate) fn matvec_add(m: &[f64], v: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
    debug_assert_eq!(m.len(), rows * cols);
    for (r, o) in out.iter_mut().enumerate().take(rows) {
        let row = &m[r * cols..(r + 1) * cols];
        *o += row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `out += m^T * g` and `grad_m += g * v^T`.
#[inline]
pub(crate) fn matvec_backward(
    m: &[f64],
    v: &[f64],
    g: &[f64],
    rows: usize,
    cols: usize,
    grad_m: &mut [f64],
    grad_v: &mut [f64],
) {
    for r in 0..rows {
        let gr = g[r];
        if gr == 0.0 {
            continue;
        }
        let row = &m[r * cols..(r + 1) * cols];
        let grow = &mut grad_m[r * cols..(r + 1) * cols];
        for c in 0..cols {
            grow[c] += gr * v[c];
            grad_v[c] += gr * row[c];
        }
    }
}
