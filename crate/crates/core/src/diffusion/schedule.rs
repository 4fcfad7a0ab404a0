use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Offset of the cosine schedule, keeping the first steps from being too
/// small near `t = 0`.
pub const COSINE_OFFSET: f64 = 0.008;

/// Discrete noise schedule for `t_diff` diffusion steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub t_diff: usize,
    /// Cumulative signal fraction, length `t_diff + 1`, `alpha_bar[0] = 1`.
    pub alpha_bar: Vec<f64>,
    /// Reverse-step variance, length `t_diff + 1`; entry 0 is unused and
    /// entry 1 is zero.
    pub step_variance: Vec<f64>,
}

impl NoiseSchedule {
    /// Cosine schedule `alpha_bar(t) = f(t) / f(0)` with
    /// `f(t) = cos^2(pi/2 * (t/T + s) / (1 + s))`.
    pub fn cosine(t_diff: usize) -> Result<Self> {
        if t_diff == 0 {
            return Err(Error::InvalidConfig("t_diff must be at least 1".into()));
        }
        let f = |t: usize| {
            let x = (t as f64 / t_diff as f64 + COSINE_OFFSET) / (1.0 + COSINE_OFFSET);
            (x * std::f64::consts::FRAC_PI_2).cos().powi(2)
        };
        let f0 = f(0);
        let mut alpha_bar: Vec<f64> = (0..=t_diff).map(|t| f(t) / f0).collect();
        alpha_bar[0] = 1.0;
        alpha_bar[t_diff] = alpha_bar[t_diff].max(0.0);
        let mut step_variance = vec![0.0; t_diff + 1];
        for t in 2..=t_diff {
            let (prev, cur) = (alpha_bar[t - 1], alpha_bar[t]);
            step_variance[t] = ((1.0 - prev) / (1.0 - cur) * (1.0 - cur / prev)).max(0.0);
        }
        Ok(Self {
            t_diff,
            alpha_bar,
            step_variance,
        })
    }

    fn check_step(&self, t: usize) -> Result<()> {
        if t > self.t_diff {
            return Err(Error::InvalidConfig(format!(
                "diffusion step {t} outside 0..={}",
                self.t_diff
            )));
        }
        Ok(())
    }

    /// `sqrt(alpha_bar[t]) * tau0 + sqrt(1 - alpha_bar[t]) * noise`.
    pub fn forward_noise(&self, tau0: &[f64], t: usize, noise: &[f64]) -> Result<Vec<f64>> {
        self.check_step(t)?;
        if noise.len() != tau0.len() {
            return Err(Error::DimensionMismatch {
                context: "forward noise",
                expected: tau0.len(),
                got: noise.len(),
            });
        }
        let (a, b) = self.coefficients(t);
        Ok(tau0.iter().zip(noise).map(|(x, e)| a * x + b * e).collect())
    }

    /// Signal and noise scales of step `t`.
    pub fn coefficients(&self, t: usize) -> (f64, f64) {
        let ab = self.alpha_bar[t];
        (ab.sqrt(), (1.0 - ab).max(0.0).sqrt())
    }

    /// Weights `(c_clean, c_current)` of the Gaussian posterior mean
    /// `q(x_{t-1} | x_t, x_0)`.
    pub fn posterior_coefficients(&self, t: usize) -> (f64, f64) {
        let (prev, cur) = (self.alpha_bar[t - 1], self.alpha_bar[t]);
        let alpha = cur / prev;
        let denom = 1.0 - cur;
        (
            prev.sqrt() * (1.0 - alpha) / denom,
            alpha.sqrt() * (1.0 - prev) / denom,
        )
    }
}

/// Sinusoidal embedding of a diffusion step: `width/2` sines followed by
/// `width/2` cosines at geometrically spaced frequencies.
pub fn time_embedding(t: usize, width: usize) -> Vec<f64> {
    let half = width / 2;
    let mut out = vec![0.0; width];
    for i in 0..half {
        let freq = (-(10_000f64.ln()) * i as f64 / half as f64).exp();
        let angle = t as f64 * freq;
        out[i] = angle.sin();
        out[half + i] = angle.cos();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn cosine_schedule_matches_formula_at_midpoint() {
        let s = NoiseSchedule::cosine(64).unwrap();
        let g = |t: f64| ((t / 64.0 + 0.008) / 1.008 * PI / 2.0).cos().powi(2);
        let expected = g(32.0) / g(0.0);
        assert!((s.alpha_bar[32] - expected).abs() < 1e-14);
        let noisy = s.forward_noise(&[1.0], 32, &[0.0]).unwrap();
        assert!((noisy[0] - expected.sqrt()).abs() < 1e-14);
        let pure = s.forward_noise(&[0.0], 32, &[1.0]).unwrap();
        assert!((pure[0] - (1.0 - expected).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn schedule_is_strictly_decreasing_with_zero_last_variance() {
        for t_diff in [1, 2, 32, 64, 200] {
            let s = NoiseSchedule::cosine(t_diff).unwrap();
            assert_eq!(s.alpha_bar[0], 1.0);
            assert!(s.alpha_bar.windows(2).all(|w| w[1] < w[0]));
            assert!(s.alpha_bar[t_diff] >= 0.0);
            assert_eq!(s.step_variance[1], 0.0);
            assert!(s.step_variance.iter().all(|v| v.is_finite() && *v >= 0.0));
        }
        assert!(NoiseSchedule::cosine(0).is_err());
    }

    #[test]
    fn forward_noise_edge_cases() {
        let s = NoiseSchedule::cosine(16).unwrap();
        let tau = [1.0, -1.0, 0.5];
        assert_eq!(s.forward_noise(&tau, 0, &[9.0, 9.0, 9.0]).unwrap(), tau.to_vec());
        let mut zero_signal = s.clone();
        zero_signal.alpha_bar[16] = 0.0;
        let noise = [0.3, -0.2, 1.1];
        assert_eq!(zero_signal.forward_noise(&tau, 16, &noise).unwrap(), noise.to_vec());
        assert!(s.forward_noise(&tau, 17, &noise).is_err());
        assert!(s.forward_noise(&tau, 3, &noise[..2]).is_err());
    }

    #[test]
    fn posterior_coefficients_recover_clean_sample_without_noise() {
        // If x_t is the noiseless forward image of x_0, the posterior mean is
        // the noiseless image at t-1.
        let s = NoiseSchedule::cosine(32).unwrap();
        for t in 1..=31 {
            let (c0, ct) = s.posterior_coefficients(t);
            let xt = s.alpha_bar[t].sqrt();
            let expected = s.alpha_bar[t - 1].sqrt();
            assert!((c0 + ct * xt - expected).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn time_embedding_shape_and_values() {
        let e = time_embedding(0, 16);
        assert_eq!(e.len(), 16);
        assert!(e[..8].iter().all(|&v| v == 0.0));
        assert!(e[8..].iter().all(|&v| v == 1.0));
        let e5 = time_embedding(5, 16);
        assert!((e5[0] - 5f64.sin()).abs() < 1e-15);
        assert!((e5[8] - 5f64.cos()).abs() < 1e-15);
    }
}
