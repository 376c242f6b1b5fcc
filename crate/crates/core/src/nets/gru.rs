use rand::Rng;

use super::{matvec_add, matvec_backward, uniform_fill};
use crate::error::{check_dim, Result};
use crate::glm::sigmoid;

/// Gated recurrent cell.
///
/// ```text
/// z  = sigmoid(Wz x + bz + Uz h + cz)          update gate
/// r  = sigmoid(Wr x + br + Ur h + cr)          reset gate
/// n  = tanh(Wn x + bn + r * (Un h + cn))       candidate
/// h' = (1 - z) * h + z * n
/// ```
///
/// Parameter layout, gates in the order z, r, n: input matrix `W` (`hidden x
/// input`), recurrent matrix `U` (`hidden x hidden`), input bias `b`,
/// recurrent bias `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gru {
    input: usize,
    hidden: usize,
}

/// Intermediates of one step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GruCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub n: Vec<f64>,
    /// `Un h + cn`, before the reset gate is applied.
    pub hn: Vec<f64>,
    pub h_next: Vec<f64>,
}

struct GateOffsets {
    w: usize,
    u: usize,
    b: usize,
    c: usize,
}

impl Gru {
    pub fn new(input: usize, hidden: usize) -> Self {
        Gru { input, hidden }
    }

    pub fn input_dim(&self) -> usize {
        self.input
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden
    }

    fn gate_size(&self) -> usize {
        self.hidden * self.input + self.hidden * self.hidden + 2 * self.hidden
    }

    pub fn num_params(&self) -> usize {
        3 * self.gate_size()
    }

    fn gate(&self, g: usize) -> GateOffsets {
        let w = g * self.gate_size();
        let u = w + self.hidden * self.input;
        let b = u + self.hidden * self.hidden;
        GateOffsets {
            w,
            u,
            b,
            c: b + self.hidden,
        }
    }

    /// Uniform `±1/sqrt(hidden)` initialization.
    pub fn init<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let mut p = vec![0.0; self.num_params()];
        uniform_fill(rng, 1.0 / (self.hidden as f64).sqrt(), &mut p);
        p
    }

    pub fn step(&self, params: &[f64], h_prev: &[f64], x: &[f64]) -> Result<GruCache> {
        check_dim(self.num_params(), params.len())?;
        check_dim(self.hidden, h_prev.len())?;
        check_dim(self.input, x.len())?;
        let mut cache = GruCache::default();
        self.step_into(params, h_prev, x, &mut cache);
        Ok(cache)
    }

    /// Gate pre-activation `W x + b + U h + c` without shape checks.
    fn affine(&self, params: &[f64], g: &GateOffsets, x: &[f64], h: &[f64], out: &mut Vec<f64>) {
        let (hd, id) = (self.hidden, self.input);
        out.clear();
        out.extend(params[g.b..g.b + hd].iter().zip(&params[g.c..g.c + hd]).map(|(b, c)| b + c));
        matvec_add(&params[g.w..g.u], x, hd, id, out);
        matvec_add(&params[g.u..g.b], h, hd, hd, out);
    }

    pub(crate) fn step_into(&self, params: &[f64], h_prev: &[f64], x: &[f64], cache: &mut GruCache) {
        let (hd, id) = (self.hidden, self.input);
        cache.x.clear();
        cache.x.extend_from_slice(x);
        cache.h_prev.clear();
        cache.h_prev.extend_from_slice(h_prev);

        let gz = self.gate(0);
        self.affine(params, &gz, x, h_prev, &mut cache.z);
        cache.z.iter_mut().for_each(|v| *v = sigmoid(*v));
        let gr = self.gate(1);
        self.affine(params, &gr, x, h_prev, &mut cache.r);
        cache.r.iter_mut().for_each(|v| *v = sigmoid(*v));

        let gn = self.gate(2);
        cache.hn.clear();
        cache.hn.extend_from_slice(&params[gn.c..gn.c + hd]);
        matvec_add(&params[gn.u..gn.b], h_prev, hd, hd, &mut cache.hn);
        cache.n.clear();
        cache.n.extend_from_slice(&params[gn.b..gn.b + hd]);
        matvec_add(&params[gn.w..gn.u], x, hd, id, &mut cache.n);
        for i in 0..hd {
            cache.n[i] = (cache.n[i] + cache.r[i] * cache.hn[i]).tanh();
        }
        cache.h_next.clear();
        cache
            .h_next
            .extend((0..hd).map(|i| (1.0 - cache.z[i]) * h_prev[i] + cache.z[i] * cache.n[i]));
    }

    /// Given the gradient of `h_next`, accumulates parameter gradients and
    /// writes the gradients of `h_prev` and `x`.
    pub fn backward(
        &self,
        params: &[f64],
        cache: &GruCache,
        grad_h_next: &[f64],
        grad_params: &mut [f64],
        grad_h_prev: &mut [f64],
        grad_x: &mut [f64],
    ) -> Result<()> {
        check_dim(self.num_params(), params.len())?;
        check_dim(self.num_params(), grad_params.len())?;
        check_dim(self.hidden, grad_h_next.len())?;
        check_dim(self.hidden, grad_h_prev.len())?;
        check_dim(self.input, grad_x.len())?;
        self.backward_unchecked(params, cache, grad_h_next, grad_params, grad_h_prev, grad_x);
        Ok(())
    }

    pub(crate) fn backward_unchecked(
        &self,
        params: &[f64],
        cache: &GruCache,
        grad_h_next: &[f64],
        grad_params: &mut [f64],
        grad_h_prev: &mut [f64],
        grad_x: &mut [f64],
    ) {
        let (hd, id) = (self.hidden, self.input);
        grad_x.iter_mut().for_each(|v| *v = 0.0);
        let mut d_an = vec![0.0; hd];
        let mut d_az = vec![0.0; hd];
        let mut d_r = vec![0.0; hd];
        for i in 0..hd {
            let g = grad_h_next[i];
            grad_h_prev[i] = g * (1.0 - cache.z[i]);
            let dn = g * cache.z[i];
            let dz = g * (cache.n[i] - cache.h_prev[i]);
            d_an[i] = dn * (1.0 - cache.n[i] * cache.n[i]);
            d_az[i] = dz * cache.z[i] * (1.0 - cache.z[i]);
            d_r[i] = d_an[i] * cache.hn[i];
        }
        let d_ar: Vec<f64> = (0..hd).map(|i| d_r[i] * cache.r[i] * (1.0 - cache.r[i])).collect();
        let d_hn: Vec<f64> = (0..hd).map(|i| d_an[i] * cache.r[i]).collect();

        let gn = self.gate(2);
        for i in 0..hd {
            grad_params[gn.b + i] += d_an[i];
            grad_params[gn.c + i] += d_hn[i];
        }
        let (gp_w, rest) = grad_params[gn.w..].split_at_mut(hd * id);
        matvec_backward(&params[gn.w..gn.u], &cache.x, &d_an, hd, id, gp_w, grad_x);
        matvec_backward(&params[gn.u..gn.b], &cache.h_prev, &d_hn, hd, hd, &mut rest[..hd * hd], grad_h_prev);

        for (gate, d) in [(0usize, &d_az), (1, &d_ar)] {
            let g = self.gate(gate);
            for i in 0..hd {
                grad_params[g.b + i] += d[i];
                grad_params[g.c + i] += d[i];
            }
            let (gp_w, rest) = grad_params[g.w..].split_at_mut(hd * id);
            matvec_backward(&params[g.w..g.u], &cache.x, d, hd, id, gp_w, grad_x);
            matvec_backward(&params[g.u..g.b], &cache.h_prev, d, hd, hd, &mut rest[..hd * hd], grad_h_prev);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_params_zero_state() {
        let g = Gru::new(5, 32);
        let c = g.step(&vec![0.0; g.num_params()], &[0.0; 32], &[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert!(c.h_next.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_params_halve_state() {
        let g = Gru::new(3, 4);
        let h = [0.8, -1.5, 2.0, 0.0];
        let c = g.step(&vec![0.0; g.num_params()], &h, &[1.0, -1.0, 0.5]).unwrap();
        for (a, b) in c.h_next.iter().zip(&h) {
            assert_eq!(*a, 0.5 * b);
        }
    }

    #[test]
    fn output_is_convex_combination() {
        let g = Gru::new(5, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let p: Vec<f64> = (0..g.num_params()).map(|_| rng.random::<f64>() * 6.0 - 3.0).collect();
            let h: Vec<f64> = (0..8).map(|_| rng.random::<f64>() * 10.0 - 5.0).collect();
            let x: Vec<f64> = (0..5).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let c = g.step(&p, &h, &x).unwrap();
            let bound = h.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for i in 0..8 {
                let (lo, hi) = if h[i] < c.n[i] { (h[i], c.n[i]) } else { (c.n[i], h[i]) };
                assert!(c.h_next[i] >= lo - 1e-12 && c.h_next[i] <= hi + 1e-12);
                assert!(c.h_next[i].abs() <= bound + 1e-12);
            }
        }
    }

    #[test]
    fn shape_errors() {
        let g = Gru::new(2, 3);
        assert!(g.step(&vec![0.0; g.num_params()], &[0.0; 2], &[0.0; 2]).is_err());
        assert!(g.step(&vec![0.0; g.num_params()], &[0.0; 3], &[0.0; 3]).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let g = Gru::new(3, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let p: Vec<f64> = (0..g.num_params()).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let h = [0.2, -0.7, 0.9, 0.1];
        let x = [1.0, -0.5, 0.3];
        let gout = [0.5, -1.0, 0.25, 2.0];
        let f = |p: &[f64], h: &[f64], x: &[f64]| -> f64 {
            let c = g.step(p, h, x).unwrap();
            c.h_next.iter().zip(&gout).map(|(a, b)| a * b).sum()
        };
        let cache = g.step(&p, &h, &x).unwrap();
        let mut gp = vec![0.0; p.len()];
        let mut gh = vec![0.0; 4];
        let mut gx = vec![0.0; 3];
        g.backward(&p, &cache, &gout, &mut gp, &mut gh, &mut gx).unwrap();
        let eps = 1e-6;
        let fd = |v: &mut Vec<f64>, k: usize, eval: &dyn Fn(&[f64]) -> f64| {
            let orig = v[k];
            v[k] = orig + eps;
            let a = eval(v);
            v[k] = orig - eps;
            let b = eval(v);
            v[k] = orig;
            (a - b) / (2.0 * eps)
        };
        let mut pv = p.clone();
        for k in 0..p.len() {
            let d = fd(&mut pv, k, &|pp| f(pp, &h, &x));
            assert!((d - gp[k]).abs() < 1e-7, "param {k}: {d} vs {}", gp[k]);
        }
        let mut hv = h.to_vec();
        for k in 0..4 {
            let d = fd(&mut hv, k, &|hh| f(&p, hh, &x));
            assert!((d - gh[k]).abs() < 1e-7);
        }
        let mut xv = x.to_vec();
        for k in 0..3 {
            let d = fd(&mut xv, k, &|xx| f(&p, &h, xx));
            assert!((d - gx[k]).abs() < 1e-7);
        }
    }
}
