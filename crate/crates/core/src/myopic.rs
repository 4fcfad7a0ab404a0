//! One-step baselines: information-greedy and Thompson-sampling selection.
//! Neither looks at travel or sensing cost.

use crate::belief::{BeliefState, RecoveryConfig};
use crate::env::{self, SensingAction};
use crate::error::{Error, Result};
use crate::planner::{argmax_first, DecisionContext, Planner};
use crate::rng::{self, SimRng};

/// Action with the largest expected information gain, lowest index on ties.
pub fn eig_select(belief: &BeliefState, actions: &[SensingAction], sigma: f64) -> Result<usize> {
    argmax_first(
        actions
            .iter()
            .map(|a| belief.expected_information_gain(a, sigma)),
    )
    .ok_or(Error::EmptyActions)
}

/// Monte Carlo estimate of `E_y[-|target - posterior_mean(y)|^2]` where the
/// readings are simulated from `target`.
pub fn ts_objective(
    belief: &BeliefState,
    action: &SensingAction,
    target: &[f64],
    sigma: f64,
    n_y: usize,
    rng: &mut SimRng,
) -> Result<f64> {
    let mut post = belief.clone();
    let mut total = 0.0;
    for _ in 0..n_y {
        let y = env::observe_vector(target, belief.grid, action, sigma, rng)?;
        post.mean.copy_from_slice(&belief.mean);
        post.var.copy_from_slice(&belief.var);
        post.absorb_readings(&action.cells, &y, sigma)?;
        total -= post
            .mean
            .iter()
            .zip(target)
            .map(|(m, t)| (m - t) * (m - t))
            .sum::<f64>();
    }
    Ok(total / n_y as f64)
}

/// Thompson-sampling selection: one posterior draw, quantized into a
/// hypothetical ground truth, then the action whose one-step posterior mean
/// lands closest to it.
pub fn ts_select(
    belief: &BeliefState,
    actions: &[SensingAction],
    sigma: f64,
    recovery: &RecoveryConfig,
    n_y: usize,
    rng: &mut SimRng,
) -> Result<usize> {
    let sample = belief.thompson_sample(rng);
    let truth = recovery.quantize_sample(&sample);
    ts_select_for(belief, actions, &truth, sigma, n_y, rng)
}

/// Selection against a given hypothetical ground truth.
pub fn ts_select_for(
    belief: &BeliefState,
    actions: &[SensingAction],
    truth: &[u8],
    sigma: f64,
    n_y: usize,
    rng: &mut SimRng,
) -> Result<usize> {
    if actions.is_empty() {
        return Err(Error::EmptyActions);
    }
    if n_y == 0 {
        return Err(Error::InvalidConfig("n_y must be at least 1".into()));
    }
    let target: Vec<f64> = truth.iter().map(|&b| b as f64).collect();
    let objectives = actions
        .iter()
        .map(|a| ts_objective(belief, a, &target, sigma, n_y, rng))
        .collect::<Result<Vec<_>>>()?;
    argmax_first(objectives).ok_or(Error::EmptyActions)
}

#[derive(Debug, Default)]
pub struct EigPlanner;

impl Planner for EigPlanner {
    fn name(&self) -> &str {
        "eig"
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<usize> {
        eig_select(ctx.belief, ctx.actions, ctx.sigma)
    }
}

#[derive(Debug)]
pub struct TsPlanner {
    pub recovery: RecoveryConfig,
    pub n_y: usize,
    rng: SimRng,
}

impl TsPlanner {
    pub fn new(recovery: RecoveryConfig, n_y: usize, seed: u64) -> Self {
        Self {
            recovery,
            n_y,
            rng: rng::seeded(seed),
        }
    }
}

impl Planner for TsPlanner {
    fn name(&self) -> &str {
        "ts"
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<usize> {
        ts_select(
            ctx.belief,
            ctx.actions,
            ctx.sigma,
            &self.recovery,
            self.n_y,
            &mut self.rng,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{enumerate_actions, FovPreset, Grid};
    use proptest::prelude::*;

    const SIGMA: f64 = 1.0 / 16.0;

    fn setup() -> (BeliefState, Vec<SensingAction>) {
        let grid = Grid::new(1, 16).unwrap();
        (
            BeliefState::new(grid, SIGMA),
            enumerate_actions(grid, &FovPreset::Line3),
        )
    }

    #[test]
    fn eig_prefers_the_only_uncertain_cell() {
        let (mut b, actions) = setup();
        b.var.iter_mut().for_each(|v| *v = 1e-12);
        b.var[9] = SIGMA * SIGMA;
        let chosen = eig_select(&b, &actions, SIGMA).unwrap();
        assert!(actions[chosen].covers(9));
    }

    #[test]
    fn eig_prefers_full_footprints_under_uniform_prior() {
        let (b, actions) = setup();
        let chosen = eig_select(&b, &actions, SIGMA).unwrap();
        assert_eq!(actions[chosen].cells.len(), 3);
        let best = b.expected_information_gain(&actions[chosen], SIGMA);
        for a in actions.iter().filter(|a| a.cells.len() < 3) {
            assert!(b.expected_information_gain(a, SIGMA) < best);
        }
    }

    #[test]
    fn eig_ties_go_to_index_zero() {
        let grid = Grid::new(1, 1).unwrap();
        let b = BeliefState::new(grid, SIGMA);
        let actions = enumerate_actions(grid, &FovPreset::Line3);
        assert_eq!(eig_select(&b, &actions, SIGMA).unwrap(), 0);
        assert!(matches!(eig_select(&b, &[], SIGMA), Err(Error::EmptyActions)));
    }

    #[test]
    fn ts_covers_the_sampled_target() {
        let (b, actions) = setup();
        let mut truth = vec![0u8; 16];
        truth[7] = 1;
        // Exhaustive objective oracle: expected squared error in closed form.
        let oracle: Vec<f64> = actions
            .iter()
            .map(|a| closed_form_objective(&b, a, &truth, SIGMA))
            .collect();
        let best = argmax_first(oracle.iter().copied()).unwrap();
        assert!(actions[best].covers(7));
        let mut rng = rng::seeded(3);
        let chosen = ts_select_for(&b, &actions, &truth, SIGMA, 5, &mut rng).unwrap();
        assert!(actions[chosen].covers(7));
    }

    #[test]
    fn ts_ties_go_to_index_zero_when_belief_is_settled() {
        let (mut b, actions) = setup();
        b.var.iter_mut().for_each(|v| *v = 1e-30);
        let mut rng = rng::seeded(3);
        let chosen = ts_select(&b, &actions, SIGMA, &RecoveryConfig::new(0.5, false).unwrap(), 5, &mut rng).unwrap();
        assert_eq!(chosen, 0);
    }

    /// `E[(t - m')^2]` with `m'` linear in the Gaussian reading.
    fn closed_form_objective(b: &BeliefState, a: &SensingAction, truth: &[u8], sigma: f64) -> f64 {
        let s2 = sigma * sigma;
        let mut mean = b.mean.clone();
        let mut var = b.var.clone();
        let mut spread = vec![0.0; b.n()];
        for &c in &a.cells {
            let post = 1.0 / (1.0 / var[c] + 1.0 / s2);
            let w = post / s2;
            mean[c] = post * mean[c] / var[c] + w * truth[c] as f64;
            spread[c] = (1.0 - w) * (1.0 - w) * spread[c] + w * w * s2;
            var[c] = post;
        }
        -(0..b.n())
            .map(|i| (truth[i] as f64 - mean[i]).powi(2) + spread[i])
            .sum::<f64>()
    }

    #[test]
    fn ts_objective_matches_closed_form_on_two_cells() {
        let grid = Grid::new(1, 2).unwrap();
        let mut b = BeliefState::new(grid, 0.3);
        b.mean = vec![0.2, 0.7];
        b.var = vec![0.05, 0.02];
        let truth = [1u8, 0];
        let target = [1.0, 0.0];
        let actions = enumerate_actions(grid, &FovPreset::Line3);
        let mut rng = rng::seeded(21);
        for a in &actions {
            let n_y = 50_000;
            let mut values = Vec::with_capacity(n_y);
            for _ in 0..n_y {
                values.push(ts_objective(&b, a, &target, 0.3, 1, &mut rng).unwrap());
            }
            let mean = values.iter().sum::<f64>() / n_y as f64;
            let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n_y - 1) as f64).sqrt();
            let exact = closed_form_objective(&b, a, &truth, 0.3);
            assert!((mean - exact).abs() < 3.0 * sd / (n_y as f64).sqrt(), "{mean} vs {exact}");
        }
    }

    proptest! {
        #[test]
        fn eig_is_invariant_to_common_rescaling(seed in any::<u64>(), scale in 0.1f64..10.0) {
            use rand::Rng;
            let grid = Grid::new(4, 4).unwrap();
            let actions = enumerate_actions(grid, &FovPreset::Wedge2);
            let mut rng = rng::seeded(seed);
            let mut b = BeliefState::new(grid, 0.2);
            b.var.iter_mut().for_each(|v| *v = rng.random_range(0.001..0.04));
            let chosen = eig_select(&b, &actions, 0.2).unwrap();
            let mut scaled = b.clone();
            scaled.var.iter_mut().for_each(|v| *v *= scale);
            let rescaled = eig_select(&scaled, &actions, 0.2 * scale.sqrt()).unwrap();
            prop_assert_eq!(chosen, rescaled);
        }

        #[test]
        fn ts_is_deterministic_given_seed(seed in any::<u64>()) {
            let (b, actions) = setup();
            let cfg = RecoveryConfig::default();
            let a = ts_select(&b, &actions, SIGMA, &cfg, 3, &mut rng::seeded(seed)).unwrap();
            let c = ts_select(&b, &actions, SIGMA, &cfg, 3, &mut rng::seeded(seed)).unwrap();
            prop_assert_eq!(a, c);
        }
    }
}
