use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n - 1 denominator); zero for fewer than two values.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

/// Two-sided paired t-test on `a[i] - b[i]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedTTest {
    pub n: usize,
    pub mean_difference: f64,
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
    /// Set when the differences have no spread (or fewer than two pairs);
    /// `t` is then 0 and `p_value` 1 for all-zero differences, and `t` is
    /// infinite with `p_value` 0 for a nonzero constant difference.
    pub degenerate: bool,
}

pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<PairedTTest> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len();
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("paired t-test on non-finite values".into()));
    }
    if n < 2 {
        return Ok(PairedTTest {
            n,
            mean_difference: if n == 1 { d[0] } else { 0.0 },
            t: 0.0,
            df: n.saturating_sub(1) as f64,
            p_value: 1.0,
            degenerate: true,
        });
    }
    let m = mean(&d);
    let sd = sample_std(&d);
    let df = (n - 1) as f64;
    if sd == 0.0 {
        let (t, p_value) = if m == 0.0 { (0.0, 1.0) } else { (m.signum() * f64::INFINITY, 0.0) };
        return Ok(PairedTTest {
            n,
            mean_difference: m,
            t,
            df,
            p_value,
            degenerate: true,
        });
    }
    let t = m / (sd / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Numerical(e.to_string()))?;
    let p_value = (2.0 * dist.cdf(-t.abs())).clamp(0.0, 1.0);
    Ok(PairedTTest {
        n,
        mean_difference: m,
        t,
        df,
        p_value,
        degenerate: false,
    })
}

/// Ordinary least-squares slope and intercept of `y` on `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidData("linear fit needs at least two paired points".into()));
    }
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Underdetermined("linear fit with constant regressor".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn textbook_example() {
        // mean 2.5, sd sqrt(5/3), t = 2.5 / (sd / 2) = 3.8730; p from a t(3) table.
        let r = paired_t_test(&[1.0, 2.0, 3.0, 4.0], &[0.0; 4]).unwrap();
        assert!((r.t - 3.872983346207417).abs() < 1e-12);
        assert!((r.p_value - 0.030466291662170977).abs() < 1e-6, "{}", r.p_value);
        assert_eq!(r.df, 3.0);
        assert!(!r.degenerate);
    }

    #[test]
    fn t_distribution_tail() {
        // Independent closed form for df = 3:
        // P(|T| > t) = 1 - (2/pi) [atan(u) + u / (1 + u^2)],  u = t / sqrt(3).
        for t in [0.5f64, 1.0, 3.0, 5.477225575051661] {
            let u = t / 3f64.sqrt();
            let p = 1.0 - 2.0 / std::f64::consts::PI * (u.atan() + u / (1.0 + u * u));
            let dist = StudentsT::new(0.0, 1.0, 3.0).unwrap();
            assert!((2.0 * dist.cdf(-t) - p).abs() < 1e-10);
        }
    }

    #[test]
    fn identical_inputs_are_degenerate() {
        let a = [1.0, -2.0, 3.5];
        let r = paired_t_test(&a, &a).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.p_value, 1.0);
        let r = paired_t_test(&[2.0, 3.0], &[1.0, 2.0]).unwrap();
        assert!(r.degenerate && r.p_value == 0.0);
        assert!(paired_t_test(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn line_fit() {
        let (m, c) = linear_fit(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        assert!((m - 2.0).abs() < 1e-12 && (c - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn swapping_negates_t(a in prop::collection::vec(-5.0..5.0f64, 3..20), shift in prop::collection::vec(-1.0..1.0f64, 20)) {
            let b: Vec<f64> = a.iter().zip(&shift).map(|(x, s)| x + s).collect();
            let ab = paired_t_test(&a, &b).unwrap();
            let ba = paired_t_test(&b, &a).unwrap();
            prop_assert!((ab.t + ba.t).abs() < 1e-9 * (1.0 + ab.t.abs()));
            prop_assert!((ab.p_value - ba.p_value).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&ab.p_value));
        }
    }
}
