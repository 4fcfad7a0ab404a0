//! Depth-limited Monte Carlo tree search with Thompson-sampled ground truth
//! and an epsilon-Pareto choice between simulated reward and travel/sensing
//! cost.
//!
//! Each simulation draws one posterior sample, quantizes it into a
//! hypothetical target map, descends the tree with UCB1 while simulating
//! readings and belief updates, and scores the leaf +1 when the simulated
//! posterior recovers the hypothetical map exactly and -1 otherwise. The
//! Pareto rule is a stand-in for the multi-objective front of the original
//! cost-aware tree search, whose internals are not public.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::belief::{BeliefState, RecoveryConfig};
use crate::env::{self, CostModel, SensingAction};
use crate::error::{Error, Result};
use crate::planner::{DecisionContext, Planner};
use crate::rng::{self, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MctsConfig {
    pub depth: usize,
    /// Number of simulations per decision.
    pub budget: usize,
    pub ucb_c: f64,
    pub cost_model: CostModel,
    /// Root actions within this much of the best mean reward are treated as
    /// reward-equivalent; the cheapest of them is chosen.
    pub epsilon_pareto: f64,
    pub recovery: RecoveryConfig,
}

impl Default for MctsConfig {
    fn default() -> Self {
        Self {
            depth: 2,
            budget: 5000,
            ucb_c: std::f64::consts::SQRT_2,
            cost_model: CostModel::default(),
            epsilon_pareto: 0.05,
            recovery: RecoveryConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootStats {
    pub visits: u32,
    pub mean_reward: f64,
    pub mean_cost: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MctsReport {
    pub action: usize,
    pub simulations: usize,
    pub root: Vec<RootStats>,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, Copy, Default)]
struct Node {
    visits: u32,
    value_sum: f64,
    cost_sum: f64,
    /// Offset of the first child in the arena; 0 while unexpanded.
    children: u32,
}

struct Tree {
    nodes: Vec<Node>,
    width: usize,
}

impl Tree {
    fn new(width: usize) -> Self {
        let mut tree = Tree {
            nodes: vec![Node::default()],
            width,
        };
        tree.expand(0);
        tree
    }

    fn expand(&mut self, node: usize) -> usize {
        if self.nodes[node].children == 0 {
            let start = self.nodes.len();
            self.nodes.resize(start + self.width, Node::default());
            self.nodes[node].children = start as u32;
        }
        self.nodes[node].children as usize
    }

    /// Unvisited children first in index order, then UCB1.
    fn select(&self, node: usize, c: f64) -> usize {
        let start = self.nodes[node].children as usize;
        let kids = &self.nodes[start..start + self.width];
        if let Some(i) = kids.iter().position(|k| k.visits == 0) {
            return i;
        }
        let log_n = (self.nodes[node].visits.max(1) as f64).ln();
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (i, k) in kids.iter().enumerate() {
            let n = k.visits as f64;
            let score = k.value_sum / n + c * (log_n / n).sqrt();
            if score > best_score {
                best = i;
                best_score = score;
            }
        }
        best
    }
}

/// Plans one action from `start_cell`.
pub fn mcts_plan(
    belief: &BeliefState,
    actions: &[SensingAction],
    start_cell: usize,
    config: &MctsConfig,
    sigma: f64,
    rng: &mut SimRng,
) -> Result<MctsReport> {
    let began = Instant::now();
    if actions.is_empty() {
        return Err(Error::EmptyActions);
    }
    if config.budget < actions.len() {
        return Err(Error::BudgetTooSmall {
            budget: config.budget,
            actions: actions.len(),
        });
    }
    if config.depth == 0 {
        return Err(Error::InvalidConfig("tree depth must be at least 1".into()));
    }
    let grid = belief.grid;
    let mut tree = Tree::new(actions.len());
    let mut sim = belief.clone();
    let mut path: Vec<usize> = Vec::with_capacity(config.depth + 1);

    for _ in 0..config.budget {
        let sample = belief.thompson_sample(rng);
        let truth = config.recovery.quantize_sample(&sample);
        sim.mean.copy_from_slice(&belief.mean);
        sim.var.copy_from_slice(&belief.var);
        path.clear();
        path.push(0);
        let mut node = 0;
        let mut cell = start_cell;
        let mut cost = 0.0;
        for level in 0..config.depth {
            let start = tree.expand(node);
            let choice = tree.select(node, config.ucb_c);
            let action = &actions[choice];
            let y = env::observe_vector(&truth, grid, action, sigma, rng)?;
            sim.absorb_readings(&action.cells, &y, sigma)?;
            cost += config.cost_model.step_cost(grid, cell, action);
            cell = action.origin;
            node = start + choice;
            path.push(node);
            if level + 1 == config.depth {
                break;
            }
        }
        let value = if sim.matches(&truth, &config.recovery) {
            1.0
        } else {
            -1.0
        };
        for &n in &path {
            let entry = &mut tree.nodes[n];
            entry.visits += 1;
            entry.value_sum += value;
            entry.cost_sum += cost;
        }
    }

    let first = tree.nodes[0].children as usize;
    let root: Vec<RootStats> = tree.nodes[first..first + actions.len()]
        .iter()
        .map(|k| RootStats {
            visits: k.visits,
            mean_reward: if k.visits > 0 {
                k.value_sum / k.visits as f64
            } else {
                f64::NEG_INFINITY
            },
            mean_cost: if k.visits > 0 {
                k.cost_sum / k.visits as f64
            } else {
                f64::INFINITY
            },
        })
        .collect();
    let action = pareto_choice(&root, config.epsilon_pareto);
    Ok(MctsReport {
        action,
        simulations: config.budget,
        root,
        elapsed: began.elapsed(),
    })
}

/// Cheapest root action among those whose mean reward is within `epsilon`
/// of the best, lowest index on ties.
pub fn pareto_choice(root: &[RootStats], epsilon: f64) -> usize {
    let best = root
        .iter()
        .map(|s| s.mean_reward)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut choice = 0;
    let mut cheapest = f64::INFINITY;
    for (i, s) in root.iter().enumerate() {
        if s.visits > 0 && s.mean_reward >= best - epsilon && s.mean_cost < cheapest {
            choice = i;
            cheapest = s.mean_cost;
        }
    }
    choice
}

#[derive(Debug)]
pub struct MctsPlanner {
    pub config: MctsConfig,
    rng: SimRng,
    pub last_report: Option<MctsReport>,
}

impl MctsPlanner {
    pub fn new(config: MctsConfig, seed: u64) -> Self {
        Self {
            config,
            rng: rng::seeded(seed),
            last_report: None,
        }
    }
}

impl Planner for MctsPlanner {
    fn name(&self) -> &str {
        "mcts"
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<usize> {
        let mut config = self.config;
        config.cost_model = *ctx.cost_model;
        let report = mcts_plan(
            ctx.belief,
            ctx.actions,
            ctx.current_cell,
            &config,
            ctx.sigma,
            &mut self.rng,
        )?;
        let action = report.action;
        self.last_report = Some(report);
        Ok(action)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{enumerate_actions, Direction, FovPreset, Grid};
    use statrs::distribution::{ContinuousCDF, Normal};

    fn single(index: usize, cell: usize) -> SensingAction {
        SensingAction {
            index,
            origin: cell,
            direction: Direction::E,
            cells: vec![cell],
        }
    }

    /// Exact expected depth-1 reward for noiseless sensing: the sensed cell
    /// always matches the hypothesis afterwards, unsensed cells must already
    /// agree with it.
    fn depth1_oracle(b: &BeliefState, a: &SensingAction, thr: f64) -> f64 {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let n = b.n();
        let p_one: Vec<f64> = (0..n)
            .map(|i| 1.0 - normal.cdf((thr - b.mean[i]) / b.var[i].sqrt()))
            .collect();
        let mut expected = 0.0;
        for pattern in 0..(1u32 << n) {
            let truth: Vec<u8> = (0..n).map(|i| ((pattern >> i) & 1) as u8).collect();
            let prob: f64 = (0..n)
                .map(|i| if truth[i] == 1 { p_one[i] } else { 1.0 - p_one[i] })
                .product();
            let ok = (0..n).all(|i| a.covers(i) || u8::from(b.mean[i] >= thr) == truth[i]);
            expected += prob * if ok { 1.0 } else { -1.0 };
        }
        expected
    }

    #[test]
    fn depth_one_matches_exhaustive_reward_oracle() {
        let grid = Grid::new(1, 4).unwrap();
        let mut b = BeliefState::new(grid, 0.3);
        b.mean = vec![0.1, 0.45, 0.3, 0.6];
        b.var = vec![0.01, 0.02, 0.04, 0.05];
        let actions: Vec<SensingAction> = (0..4).map(|c| single(c, c)).collect();
        let recovery = RecoveryConfig::new(0.5, false).unwrap();
        let oracle: Vec<f64> = actions.iter().map(|a| depth1_oracle(&b, a, 0.5)).collect();
        let best = crate::planner::argmax_first(oracle.iter().copied()).unwrap();
        let config = MctsConfig {
            depth: 1,
            budget: 40_000,
            epsilon_pareto: 0.0,
            cost_model: CostModel::new(1.0, 1000.0).unwrap(),
            recovery,
            ..MctsConfig::default()
        };
        let report = mcts_plan(&b, &actions, 0, &config, 1e-9, &mut rng::seeded(1)).unwrap();
        assert_eq!(report.action, best, "oracle {oracle:?}, stats {:?}", report.root);
        let s = &report.root[best];
        let se = ((1.0 - oracle[best].powi(2)) / s.visits as f64).sqrt();
        assert!((s.mean_reward - oracle[best]).abs() < 4.0 * se + 1e-9);
    }

    #[test]
    fn equal_rewards_pick_the_nearer_action() {
        let grid = Grid::new(1, 8).unwrap();
        let mut b = BeliefState::new(grid, 0.1);
        b.mean = vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        b.var = vec![1e-14; 8];
        // Start at cell 2: cell 3 is one away, cell 7 five away.
        let actions = vec![single(0, 7), single(1, 3)];
        let config = MctsConfig {
            depth: 1,
            budget: 50,
            cost_model: CostModel::new(1.0, 0.0).unwrap(),
            ..MctsConfig::default()
        };
        let report = mcts_plan(&b, &actions, 2, &config, 0.1, &mut rng::seeded(4)).unwrap();
        assert_eq!(report.root[0].mean_reward, report.root[1].mean_reward);
        assert_eq!(report.action, 1);
    }

    #[test]
    fn single_visit_budget_respects_pareto_rule() {
        let grid = Grid::new(1, 16).unwrap();
        let b = BeliefState::new(grid, 1.0 / 16.0);
        let actions = enumerate_actions(grid, &FovPreset::Line3);
        let config = MctsConfig {
            depth: 2,
            budget: actions.len(),
            ..MctsConfig::default()
        };
        let a = mcts_plan(&b, &actions, 5, &config, 1.0 / 16.0, &mut rng::seeded(9)).unwrap();
        let again = mcts_plan(&b, &actions, 5, &config, 1.0 / 16.0, &mut rng::seeded(9)).unwrap();
        assert_eq!(a.action, again.action);
        assert!(a.root.iter().all(|s| s.visits == 1));
        let best = a.root.iter().map(|s| s.mean_reward).fold(f64::MIN, f64::max);
        let chosen = &a.root[a.action];
        assert!(chosen.mean_reward >= best - config.epsilon_pareto);
        for s in a.root.iter().filter(|s| s.mean_reward >= best - config.epsilon_pareto) {
            assert!(chosen.mean_cost <= s.mean_cost);
        }
    }

    #[test]
    fn epsilon_extremes() {
        let grid = Grid::new(1, 16).unwrap();
        let mut b = BeliefState::new(grid, 0.2);
        b.mean[11] = 0.45;
        let actions = enumerate_actions(grid, &FovPreset::Line3);
        let base = MctsConfig {
            budget: 2000,
            cost_model: CostModel::new(1.0, 0.0).unwrap(),
            ..MctsConfig::default()
        };
        let wide = MctsConfig {
            epsilon_pareto: f64::INFINITY,
            ..base
        };
        let r = mcts_plan(&b, &actions, 10, &wide, 0.2, &mut rng::seeded(2)).unwrap();
        let cheapest = r
            .root
            .iter()
            .map(|s| s.mean_cost)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(r.root[r.action].mean_cost, cheapest);

        let strict = MctsConfig {
            epsilon_pareto: 0.0,
            ..base
        };
        let r = mcts_plan(&b, &actions, 10, &strict, 0.2, &mut rng::seeded(2)).unwrap();
        let best = r.root.iter().map(|s| s.mean_reward).fold(f64::MIN, f64::max);
        assert_eq!(r.root[r.action].mean_reward, best);
        for s in r.root.iter().filter(|s| s.mean_reward == best) {
            assert!(r.root[r.action].mean_cost <= s.mean_cost);
        }
        assert!(r.root.iter().map(|s| s.visits as usize).sum::<usize>() <= base.budget);
    }

    #[test]
    fn rejects_small_budget_and_empty_actions() {
        let grid = Grid::new(1, 4).unwrap();
        let b = BeliefState::new(grid, 0.1);
        let actions = enumerate_actions(grid, &FovPreset::Line3);
        let config = MctsConfig {
            budget: 3,
            ..MctsConfig::default()
        };
        assert!(matches!(
            mcts_plan(&b, &actions, 0, &config, 0.1, &mut rng::seeded(0)),
            Err(Error::BudgetTooSmall { .. })
        ));
        assert!(matches!(
            mcts_plan(&b, &[], 0, &MctsConfig::default(), 0.1, &mut rng::seeded(0)),
            Err(Error::EmptyActions)
        ));
    }
}
