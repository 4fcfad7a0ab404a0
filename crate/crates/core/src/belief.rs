//! Gaussian belief over the search vector under one-hot region sensing.
//!
//! Observations only ever touch the cells they sense and the noise is i.i.d.,
//! so a diagonal posterior is exact: each reading is a scalar Kalman update
//! of one cell.

use std::f64::consts::{E, PI};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::env::{self, Grid, Observation, SensingAction};
use crate::error::{Error, Result};
use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefState {
    pub grid: Grid,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

/// Mean grid followed by variance grid, both row-major. This is the
/// conditioning input of the diffusion models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateImage {
    pub grid: Grid,
    pub data: Vec<f64>,
}

impl StateImage {
    pub fn mean_channel(&self) -> &[f64] {
        &self.data[..self.grid.cells()]
    }

    pub fn var_channel(&self) -> &[f64] {
        &self.data[self.grid.cells()..]
    }

    /// Both channels as rows of the grid.
    pub fn channel_rows(&self) -> [Vec<Vec<f64>>; 2] {
        let w = self.grid.n_wid;
        let rows = |c: &[f64]| c.chunks(w).map(|r| r.to_vec()).collect::<Vec<_>>();
        [rows(self.mean_channel()), rows(self.var_channel())]
    }
}

/// How continuous vectors are compared with binary ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecoveryConfig {
    /// Cells at or above this value count as targets.
    pub c_thr: f64,
    /// When a thresholded Thompson sample has no target at all, mark its
    /// largest cell as one.
    pub assume_target_present: bool,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        Self {
            c_thr: 0.5,
            assume_target_present: true,
        }
    }
}

impl RecoveryConfig {
    pub fn new(c_thr: f64, assume_target_present: bool) -> Result<Self> {
        if !(c_thr > 0.0 && c_thr < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "c_thr must lie in (0, 1), got {c_thr}"
            )));
        }
        Ok(Self {
            c_thr,
            assume_target_present,
        })
    }

    pub fn threshold(&self, values: &[f64]) -> Vec<u8> {
        values.iter().map(|&v| u8::from(v >= self.c_thr)).collect()
    }

    /// Thresholds a Thompson sample into a hypothetical ground truth.
    pub fn quantize_sample(&self, sample: &[f64]) -> Vec<u8> {
        let mut q = self.threshold(sample);
        if self.assume_target_present && !q.contains(&1) {
            if let Some(best) = argmax(sample) {
                q[best] = 1;
            }
        }
        q
    }
}

fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.is_none_or(|b| v > values[b]) {
            best = Some(i);
        }
    }
    best
}

/// Outcome of comparing a belief with the ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    /// `found / (k + false_positives)`: the share of true targets recovered,
    /// pushed below one by any false positive.
    pub fraction: f64,
    pub exact: bool,
    pub found: usize,
    pub false_positives: usize,
}

impl BeliefState {
    /// Prior with mean `1/n` and variance `sigma^2` in every cell.
    pub fn new(grid: Grid, sigma: f64) -> Self {
        let n = grid.cells();
        Self {
            grid,
            mean: vec![1.0 / n as f64; n],
            var: vec![sigma * sigma; n],
        }
    }

    pub fn n(&self) -> usize {
        self.mean.len()
    }

    /// Absorbs one scalar reading of `cell`.
    pub fn absorb(&mut self, cell: usize, y: f64, sigma: f64) {
        let noise_var = sigma * sigma;
        let prior_var = self.var[cell];
        let post_var = 1.0 / (1.0 / prior_var + 1.0 / noise_var);
        self.mean[cell] = post_var * (self.mean[cell] / prior_var + y / noise_var);
        self.var[cell] = post_var;
    }

    /// Absorbs every reading of an action, in order.
    pub fn absorb_readings(&mut self, cells: &[usize], values: &[f64], sigma: f64) -> Result<()> {
        if cells.len() != values.len() {
            return Err(Error::DimensionMismatch {
                context: "observation",
                expected: cells.len(),
                got: values.len(),
            });
        }
        for &c in cells {
            self.grid.check_cell(c)?;
        }
        for (&c, &y) in cells.iter().zip(values) {
            self.absorb(c, y, sigma);
        }
        Ok(())
    }

    /// Posterior after one action. The search vector is static, so the
    /// prediction step is the identity.
    pub fn update(
        &self,
        action: &SensingAction,
        observation: &Observation,
        sigma: f64,
    ) -> Result<BeliefState> {
        let mut next = self.clone();
        next.absorb_readings(&action.cells, &observation.values, sigma)?;
        Ok(next)
    }

    pub fn state_image(&self) -> StateImage {
        let mut data = Vec::with_capacity(2 * self.n());
        data.extend_from_slice(&self.mean);
        data.extend_from_slice(&self.var);
        StateImage {
            grid: self.grid,
            data,
        }
    }

    /// Differential entropy in nats.
    pub fn entropy(&self) -> f64 {
        self.var
            .iter()
            .map(|&v| 0.5 * (2.0 * PI * E * v).ln())
            .sum()
    }

    /// Entropy reduction from sensing `action`. For a linear Gaussian model
    /// the posterior covariance does not depend on the readings, so the
    /// expectation over observations is exact.
    pub fn expected_information_gain(&self, action: &SensingAction, sigma: f64) -> f64 {
        let noise_var = sigma * sigma;
        let mut var = self.var.clone();
        let mut gain = 0.0;
        for &c in &action.cells {
            gain += 0.5 * (1.0 + var[c] / noise_var).ln();
            var[c] = 1.0 / (1.0 / var[c] + 1.0 / noise_var);
        }
        gain
    }

    pub fn thompson_sample(&self, rng: &mut SimRng) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.var)
            .map(|(&m, &v)| {
                let z: f64 = rng.sample(StandardNormal);
                m + v.sqrt() * z
            })
            .collect()
    }

    /// Monte Carlo estimate of the expected one-step full-recovery reward of
    /// `action`: +1 when the thresholded one-step posterior mean equals the
    /// quantized Thompson sample, -1 otherwise.
    pub fn expected_onestep_reward(
        &self,
        action: &SensingAction,
        sigma: f64,
        recovery: &RecoveryConfig,
        n_beta: usize,
        n_y: usize,
        rng: &mut SimRng,
    ) -> Result<f64> {
        if n_beta == 0 || n_y == 0 {
            return Err(Error::InvalidConfig(
                "reward estimator needs n_beta, n_y >= 1".into(),
            ));
        }
        let mut total = 0.0;
        let mut post = self.clone();
        for _ in 0..n_beta {
            let sample = self.thompson_sample(rng);
            let truth = recovery.quantize_sample(&sample);
            for _ in 0..n_y {
                let y = env::observe_vector(&truth, self.grid, action, sigma, rng)?;
                post.mean.copy_from_slice(&self.mean);
                post.var.copy_from_slice(&self.var);
                post.absorb_readings(&action.cells, &y, sigma)?;
                total += if post.matches(&truth, recovery) { 1.0 } else { -1.0 };
            }
        }
        Ok(total / (n_beta * n_y) as f64)
    }

    /// Whether the thresholded mean equals `truth` exactly.
    pub fn matches(&self, truth: &[u8], recovery: &RecoveryConfig) -> bool {
        self.mean
            .iter()
            .zip(truth)
            .all(|(&m, &t)| u8::from(m >= recovery.c_thr) == t)
    }

    pub fn recovery(&self, truth: &[u8], recovery: &RecoveryConfig) -> RecoveryReport {
        let mut found = 0;
        let mut false_positives = 0;
        let mut k = 0;
        for (&m, &t) in self.mean.iter().zip(truth) {
            let hit = m >= recovery.c_thr;
            match (t == 1, hit) {
                (true, true) => {
                    k += 1;
                    found += 1
                }
                (true, false) => k += 1,
                (false, true) => false_positives += 1,
                (false, false) => {}
            }
        }
        let denom = k + false_positives;
        let fraction = if denom == 0 {
            1.0
        } else {
            found as f64 / denom as f64
        };
        RecoveryReport {
            fraction,
            exact: found == k && false_positives == 0,
            found,
            false_positives,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{enumerate_actions, Direction, FovPreset};
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    const SIGMA: f64 = 1.0 / 16.0;

    fn line(n: usize) -> Grid {
        Grid::new(1, n).unwrap()
    }

    fn single(cell: usize) -> SensingAction {
        SensingAction {
            index: 0,
            origin: cell,
            direction: Direction::E,
            cells: vec![cell],
        }
    }

    fn obs(values: Vec<f64>) -> Observation {
        Observation {
            values,
            action_index: 0,
            timestamp: 0,
        }
    }

    /// Dense-matrix Kalman update with observation matrix of one-hot rows.
    fn dense_update(mean: &[f64], cov: &mut Vec<Vec<f64>>, cells: &[usize], y: &[f64], sigma: f64) -> Vec<f64> {
        let n = mean.len();
        let q = cells.len();
        // S = X P X^T + sigma^2 I
        let mut s = vec![vec![0.0; q]; q];
        for a in 0..q {
            for b in 0..q {
                s[a][b] = cov[cells[a]][cells[b]] + if a == b { sigma * sigma } else { 0.0 };
            }
        }
        let s_inv = invert(&s);
        // K = P X^T S^-1  (n x q)
        let mut gain = vec![vec![0.0; q]; n];
        for i in 0..n {
            for b in 0..q {
                gain[i][b] = (0..q).map(|a| cov[i][cells[a]] * s_inv[a][b]).sum();
            }
        }
        let innovation: Vec<f64> = (0..q).map(|a| y[a] - mean[cells[a]]).collect();
        let new_mean: Vec<f64> = (0..n)
            .map(|i| mean[i] + (0..q).map(|b| gain[i][b] * innovation[b]).sum::<f64>())
            .collect();
        // P' = P - K X P
        let mut new_cov = cov.clone();
        for i in 0..n {
            for j in 0..n {
                new_cov[i][j] -= (0..q).map(|b| gain[i][b] * cov[cells[b]][j]).sum::<f64>();
            }
        }
        *cov = new_cov;
        new_mean
    }

    fn invert(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = m.len();
        let mut a: Vec<Vec<f64>> = m.to_vec();
        let mut inv: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
                .unwrap();
            a.swap(col, pivot);
            inv.swap(col, pivot);
            let p = a[col][col];
            for j in 0..n {
                a[col][j] /= p;
                inv[col][j] /= p;
            }
            for r in 0..n {
                if r != col {
                    let f = a[r][col];
                    for j in 0..n {
                        a[r][j] -= f * a[col][j];
                        inv[r][j] -= f * inv[col][j];
                    }
                }
            }
        }
        inv
    }

    #[test]
    fn prior_values() {
        let b = BeliefState::new(line(16), SIGMA);
        assert!(b.mean.iter().all(|&m| m == 0.0625));
        assert!(b.var.iter().all(|&v| v == 0.00390625));
        let b = BeliefState::new(line(1), 1.0);
        assert_eq!((b.mean[0], b.var[0]), (1.0, 1.0));
        let b = BeliefState::new(Grid::new(8, 8).unwrap(), 0.2);
        assert_eq!(b.mean[0], 0.015625);
        assert!((b.var[0] - 0.04).abs() < 1e-15);
    }

    #[test]
    fn single_reading_matches_dense_oracle() {
        let prior = BeliefState::new(line(16), SIGMA);
        let post = prior.update(&single(3), &obs(vec![1.0]), SIGMA).unwrap();
        let mut cov: Vec<Vec<f64>> = (0..16)
            .map(|i| (0..16).map(|j| if i == j { SIGMA * SIGMA } else { 0.0 }).collect())
            .collect();
        let dense = dense_update(&prior.mean, &mut cov, &[3], &[1.0], SIGMA);
        assert!((post.var[3] - 0.001953125).abs() < 1e-15);
        assert!((post.mean[3] - 0.53125).abs() < 1e-12);
        assert!((dense[3] - 0.53125).abs() < 1e-12);
        assert!((cov[3][3] - 0.001953125).abs() < 1e-15);
        for i in (0..16).filter(|&i| i != 3) {
            assert_eq!(post.mean[i], prior.mean[i]);
            assert_eq!(post.var[i], prior.var[i]);
        }
    }

    #[test]
    fn repeated_readings_of_one_cell() {
        let prior = BeliefState::new(line(16), SIGMA);
        let once = prior.update(&single(2), &obs(vec![1.0]), SIGMA).unwrap();
        let twice = once.update(&single(2), &obs(vec![1.0]), SIGMA).unwrap();
        let s2 = SIGMA * SIGMA;
        assert!((twice.var[2] - s2 / 3.0).abs() < 1e-15);
        assert!((twice.mean[2] - (0.0625 + 2.0) / 3.0).abs() < 1e-12);

        // Same result when both readings arrive in one action.
        let dup = SensingAction {
            index: 0,
            origin: 2,
            direction: Direction::E,
            cells: vec![2, 2],
        };
        let joint = prior.update(&dup, &obs(vec![1.0, 1.0]), SIGMA).unwrap();
        assert!((joint.mean[2] - twice.mean[2]).abs() < 1e-15);
    }

    #[test]
    fn mismatched_observation_is_rejected() {
        let prior = BeliefState::new(line(4), SIGMA);
        assert!(prior.update(&single(1), &obs(vec![1.0, 0.0]), SIGMA).is_err());
    }

    #[test]
    fn scalar_updates_equal_dense_kalman() {
        let mut rng = rng::seeded(17);
        for trial in 0..40 {
            let n = 1 + trial % 8;
            let grid = line(n);
            let actions = enumerate_actions(grid, &FovPreset::Line3);
            let sigma = rng.random_range(0.05..0.5);
            let mut belief = BeliefState::new(grid, sigma);
            let mut mean = belief.mean.clone();
            let mut cov: Vec<Vec<f64>> = (0..n)
                .map(|i| (0..n).map(|j| if i == j { sigma * sigma } else { 0.0 }).collect())
                .collect();
            for _ in 0..6 {
                let a = &actions[rng.random_range(0..actions.len())];
                let y: Vec<f64> = a.cells.iter().map(|_| rng.random_range(-0.5..1.5)).collect();
                belief = belief.update(a, &obs(y.clone()), sigma).unwrap();
                mean = dense_update(&mean, &mut cov, &a.cells, &y, sigma);
                for i in 0..n {
                    assert!((belief.mean[i] - mean[i]).abs() < 1e-9);
                    assert!((belief.var[i] - cov[i][i]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn entropy_values() {
        let b = BeliefState::new(line(1), 1.0);
        assert!((b.entropy() - 1.4189385332046727).abs() < 1e-12);
        let mut halved = BeliefState::new(line(4), 0.3);
        let before = halved.entropy();
        halved.var[2] /= 2.0;
        assert!((before - halved.entropy() - 0.5 * 2f64.ln()).abs() < 1e-12);
        let b = BeliefState::new(line(16), SIGMA);
        let expected = 16.0 * 0.5 * (2.0 * PI * E / 256.0).ln();
        assert!((b.entropy() - expected).abs() < 1e-12);
    }

    #[test]
    fn information_gain_equals_entropy_drop() {
        let grid = line(16);
        let b = BeliefState::new(grid, SIGMA);
        let actions = enumerate_actions(grid, &FovPreset::Line3);
        for a in [&actions[0], &actions[1], &actions[10]] {
            let after = b.update(a, &obs(vec![0.3; a.cells.len()]), SIGMA).unwrap();
            let drop = b.entropy() - after.entropy();
            assert!((b.expected_information_gain(a, SIGMA) - drop).abs() < 1e-12);
        }
        let gain1 = b.expected_information_gain(&single(4), SIGMA);
        assert!((gain1 - 0.5 * 2f64.ln()).abs() < 1e-12);
        assert!((b.expected_information_gain(&actions[0], SIGMA) - 1.0397207708399179).abs() < 1e-12);
        let mut settled = b.clone();
        settled.var.iter_mut().for_each(|v| *v = 1e-14);
        assert!(settled.expected_information_gain(&actions[0], SIGMA) < 1e-9);
    }

    #[test]
    fn thompson_sample_moments() {
        let grid = line(3);
        let mut b = BeliefState::new(grid, 0.3);
        b.mean = vec![0.1, 0.5, 0.9];
        b.var = vec![0.01, 0.04, 0.09];
        let mut rng = rng::seeded(4);
        let draws = 100_000;
        let mut sums = [0.0; 3];
        let mut cross = 0.0;
        for _ in 0..draws {
            let s = b.thompson_sample(&mut rng);
            for i in 0..3 {
                sums[i] += s[i];
            }
            cross += (s[0] - 0.1) * (s[2] - 0.9);
        }
        for i in 0..3 {
            let mean = sums[i] / draws as f64;
            assert!((mean - b.mean[i]).abs() < 3.0 * (b.var[i] / draws as f64).sqrt());
        }
        let cov = cross / draws as f64;
        // Standard error of the product of independent normals.
        assert!(cov.abs() < 3.0 * (0.01f64 * 0.09).sqrt() / (draws as f64).sqrt());

        let mut certain = b.clone();
        certain.var = vec![0.0; 3];
        assert_eq!(certain.thompson_sample(&mut rng), certain.mean);
    }

    #[test]
    fn reward_is_one_when_nothing_can_change() {
        let grid = line(8);
        let mut b = BeliefState::new(grid, SIGMA);
        b.mean = vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        b.var = vec![1e-16; 8];
        let actions = enumerate_actions(grid, &FovPreset::Line3);
        let mut rng = rng::seeded(5);
        for cfg in [RecoveryConfig::default(), RecoveryConfig::new(0.5, false).unwrap()] {
            for a in &actions {
                let r = b
                    .expected_onestep_reward(a, SIGMA, &cfg, 10, 5, &mut rng)
                    .unwrap();
                assert_eq!(r, 1.0);
            }
        }
    }

    fn normal_cdf(x: f64) -> f64 {
        use statrs::distribution::{ContinuousCDF, Normal};
        Normal::new(0.0, 1.0).unwrap().cdf(x)
    }

    #[test]
    fn reward_matches_exhaustive_two_cell_oracle() {
        let grid = line(2);
        let sigma = 1e-6;
        let cfg = RecoveryConfig::new(0.5, false).unwrap();
        let mut b = BeliefState::new(grid, 0.2);
        b.mean = vec![0.3, 0.6];
        b.var = vec![0.04, 0.09];
        let p_one: Vec<f64> = (0..2)
            .map(|i| 1.0 - normal_cdf((0.5 - b.mean[i]) / b.var[i].sqrt()))
            .collect();
        let current = cfg.threshold(&b.mean);
        let cases = [vec![0usize], vec![1], vec![0, 1]];
        let mut rng = rng::seeded(8);
        for cells in cases {
            let action = SensingAction {
                index: 0,
                origin: cells[0],
                direction: Direction::E,
                cells: cells.clone(),
            };
            let mut oracle = 0.0;
            for pattern in 0..4u8 {
                let truth = [pattern & 1, (pattern >> 1) & 1];
                let prob: f64 = (0..2)
                    .map(|i| if truth[i] == 1 { p_one[i] } else { 1.0 - p_one[i] })
                    .product();
                let recovered = (0..2).all(|i| cells.contains(&i) || current[i] == truth[i]);
                oracle += prob * if recovered { 1.0 } else { -1.0 };
            }
            let n_beta = 40_000;
            let est = b
                .expected_onestep_reward(&action, sigma, &cfg, n_beta, 1, &mut rng)
                .unwrap();
            let se = ((1.0 - oracle * oracle) / n_beta as f64).sqrt();
            assert!((est - oracle).abs() < 3.0 * se + 1e-12, "{cells:?}: {est} vs {oracle}");
        }
    }

    #[test]
    fn reward_stays_in_range() {
        let grid = line(16);
        let b = BeliefState::new(grid, 0.2);
        let actions = enumerate_actions(grid, &FovPreset::Line3);
        let mut rng = rng::seeded(2);
        for a in actions.iter().step_by(5) {
            let r = b
                .expected_onestep_reward(a, 0.2, &RecoveryConfig::default(), 10, 5, &mut rng)
                .unwrap();
            assert!((-1.0..=1.0).contains(&r));
        }
        assert!(b
            .expected_onestep_reward(&actions[0], 0.2, &RecoveryConfig::default(), 0, 5, &mut rng)
            .is_err());
    }

    #[test]
    fn quantization_with_and_without_presence_prior() {
        let sample = [0.1, 0.3, 0.2];
        let literal = RecoveryConfig::new(0.5, false).unwrap();
        assert_eq!(literal.quantize_sample(&sample), vec![0, 0, 0]);
        assert_eq!(RecoveryConfig::default().quantize_sample(&sample), vec![0, 1, 0]);
        assert_eq!(
            RecoveryConfig::default().quantize_sample(&[0.7, 0.1, 0.9]),
            vec![1, 0, 1]
        );
        assert!(RecoveryConfig::new(1.0, true).is_err());
    }

    #[test]
    fn recovery_reports() {
        let grid = line(8);
        let cfg = RecoveryConfig::default();
        let truth = [0, 1, 0, 1, 1, 0, 0, 1];
        let mut b = BeliefState::new(grid, SIGMA);
        b.mean = truth.iter().map(|&t| t as f64).collect();
        let r = b.recovery(&truth, &cfg);
        assert!(r.exact && r.fraction == 1.0);

        b.mean = vec![0.0; 8];
        let r = b.recovery(&[0, 0, 1, 0, 0, 0, 0, 0], &cfg);
        assert_eq!((r.fraction, r.exact), (0.0, false));

        b.mean = vec![0.0, 0.8, 0.0, 0.2, 0.1, 0.0, 0.0, 0.3];
        let r = b.recovery(&truth, &cfg);
        assert_eq!((r.fraction, r.exact), (0.25, false));

        // All targets found plus a false positive.
        b.mean = vec![0.9, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0];
        let r = b.recovery(&truth, &cfg);
        assert!(!r.exact && r.fraction < 1.0 && r.false_positives == 1);
    }

    #[test]
    fn state_image_layout() {
        let grid = Grid::new(2, 3).unwrap();
        let mut b = BeliefState::new(grid, 0.5);
        b.mean = vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5];
        let img = b.state_image();
        assert_eq!(img.mean_channel(), &b.mean[..]);
        assert_eq!(img.var_channel(), &b.var[..]);
        let [m, _] = img.channel_rows();
        assert_eq!(m[1], vec![0.3, 0.4, 0.5]);
    }

    proptest! {
        #[test]
        fn variance_never_increases(
            seed in any::<u64>(),
            steps in 1usize..12,
            sigma in 0.05f64..0.5,
        ) {
            let grid = Grid::new(3, 3).unwrap();
            let actions = enumerate_actions(grid, &FovPreset::Wedge2);
            let mut rng = rng::seeded(seed);
            let mut b = BeliefState::new(grid, sigma);
            for _ in 0..steps {
                let a = &actions[rng.random_range(0..actions.len())];
                let y: Vec<f64> = a.cells.iter().map(|_| rng.random_range(-1.0..2.0)).collect();
                let next = b.update(a, &obs(y), sigma).unwrap();
                for i in 0..9 {
                    prop_assert!(next.var[i] <= b.var[i]);
                    prop_assert!(next.var[i] > 0.0);
                    prop_assert!(next.var[i] <= sigma * sigma);
                }
                b = next;
            }
        }

        #[test]
        fn distinct_cell_updates_commute(
            c1 in 0usize..6, c2 in 0usize..6, y1 in -1.0f64..2.0, y2 in -1.0f64..2.0,
        ) {
            prop_assume!(c1 != c2);
            let b = BeliefState::new(line(6), 0.1);
            let ab = b.update(&single(c1), &obs(vec![y1]), 0.1).unwrap()
                .update(&single(c2), &obs(vec![y2]), 0.1).unwrap();
            let ba = b.update(&single(c2), &obs(vec![y2]), 0.1).unwrap()
                .update(&single(c1), &obs(vec![y1]), 0.1).unwrap();
            prop_assert_eq!(ab, ba);
        }
    }
}
