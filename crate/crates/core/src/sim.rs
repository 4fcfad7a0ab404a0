//! Decentralized asynchronous execution on a cost-driven event clock.
//!
//! Each agent acts whenever its own clock (accumulated travel and sensing
//! time) comes up next, reads whatever team messages have arrived by then,
//! plans on its private belief, and broadcasts the raw measurement. The
//! channel may drop or delay messages; no agent ever waits for another.

use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::belief::{BeliefState, RecoveryConfig};
use crate::env::{CostModel, Environment, SensingAction};
use crate::error::{Error, Result};
use crate::planner::{DecisionContext, Planner};
use crate::rng::{self, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub drop_prob: f64,
    pub delay_s: f64,
    pub seed: u64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            drop_prob: 0.0,
            delay_s: 0.0,
            seed: 0,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.drop_prob) || !(self.delay_s >= 0.0) {
            return Err(Error::InvalidConfig(format!("bad channel config {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Stop after this many team measurements.
    pub t_max: usize,
    pub start_cell: usize,
    /// Extra availability time per action when sensing is free, so that
    /// agents standing still still take turns.
    pub idle_tick_s: f64,
    pub recovery: RecoveryConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            t_max: 40,
            start_cell: 0,
            idle_tick_s: 1.0,
            recovery: RecoveryConfig::default(),
        }
    }
}

/// A shared `(action, readings)` pair as held by one agent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Measurement {
    pub sender: usize,
    pub action: usize,
    pub values: Vec<f64>,
    pub arrival_s: f64,
}

#[derive(Debug, Clone)]
pub struct AgentState {
    pub id: usize,
    pub belief: BeliefState,
    /// Own and received measurements in the order they were absorbed.
    pub measurements: Vec<Measurement>,
    pub cell: usize,
    /// Time at which the agent is next free to act.
    pub clock_s: f64,
    /// Travel plus sensing time spent so far.
    pub cost_s: f64,
    inbox: Vec<(f64, u64, Measurement)>,
}

impl AgentState {
    fn new(id: usize, env: &Environment, start: usize) -> Self {
        Self {
            id,
            belief: BeliefState::new(env.grid, env.sigma),
            measurements: Vec::new(),
            cell: start,
            clock_s: 0.0,
            cost_s: 0.0,
            inbox: Vec::new(),
        }
    }

    fn absorb(&mut self, m: Measurement, actions: &[SensingAction], sigma: f64) -> Result<()> {
        self.belief
            .absorb_readings(&actions[m.action].cells, &m.values, sigma)?;
        self.measurements.push(m);
        Ok(())
    }

    /// Absorbs every queued measurement that has arrived by `now`, in
    /// arrival order.
    fn ingest(&mut self, now: f64, actions: &[SensingAction], sigma: f64) -> Result<()> {
        self.inbox
            .sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let ready = self.inbox.partition_point(|(t, _, _)| *t <= now);
        let arrived: Vec<_> = self.inbox.drain(..ready).collect();
        for (_, _, m) in arrived {
            self.absorb(m, actions, sigma)?;
        }
        Ok(())
    }

    /// The belief obtained by replaying `measurements` from the prior.
    pub fn replay_belief(&self, env: &Environment, actions: &[SensingAction]) -> Result<BeliefState> {
        let mut b = BeliefState::new(env.grid, env.sigma);
        for m in &self.measurements {
            b.absorb_readings(&actions[m.action].cells, &m.values, env.sigma)?;
        }
        Ok(b)
    }
}

/// One team measurement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogEntry {
    /// 1-based count of team measurements.
    pub index: usize,
    pub agent: usize,
    pub action: usize,
    /// Completion time of the action on the global clock.
    pub time_s: f64,
    /// Summed travel and sensing cost of the whole team so far.
    pub team_cost_s: f64,
    /// Recovery of the belief built from every team measurement.
    pub recovery_fraction: f64,
    pub exact: bool,
    pub decision_wallclock: Duration,
}

#[derive(Debug, Clone)]
pub struct RunLog {
    pub entries: Vec<LogEntry>,
    pub agents: Vec<AgentState>,
    pub union_belief: BeliefState,
}

impl RunLog {
    /// Team measurement count at which the union belief first recovered
    /// every target exactly.
    pub fn measurements_to_recovery(&self) -> Option<usize> {
        self.entries.iter().find(|e| e.exact).map(|e| e.index)
    }

    pub fn cost_at_recovery(&self) -> Option<f64> {
        self.entries.iter().find(|e| e.exact).map(|e| e.team_cost_s)
    }

    pub fn all_agents_exact(&self, env: &Environment, recovery: &RecoveryConfig) -> bool {
        self.agents
            .iter()
            .all(|a| a.belief.matches(&env.beta_true, recovery))
    }
}

/// Runs `planners.len()` agents until every agent's own belief recovers the
/// targets exactly or the team has taken `config.t_max` measurements.
/// A measurement reaches its own agent when the action completes and the
/// other agents `delay_s` later, unless dropped.
///
/// Readiness ties go to the lower agent id. Observation noise is drawn from
/// `obs_rng` in event order; message drops come from the channel's own
/// stream.
pub fn run_multiagent(
    env: &Environment,
    planners: &mut [Box<dyn Planner>],
    cost_model: &CostModel,
    channel: &ChannelConfig,
    config: &SimConfig,
    obs_rng: &mut SimRng,
) -> Result<RunLog> {
    if planners.is_empty() {
        return Err(Error::InvalidConfig("at least one agent required".into()));
    }
    channel.validate()?;
    env.grid.check_cell(config.start_cell)?;
    let actions = env.actions();
    let sigma = env.sigma;
    let mut channel_rng = rng::seeded(channel.seed);
    let mut agents: Vec<AgentState> = (0..planners.len())
        .map(|j| AgentState::new(j, env, config.start_cell))
        .collect();
    let mut union = BeliefState::new(env.grid, sigma);
    let mut entries = Vec::new();
    let mut seq = 0u64;
    let idle = if cost_model.sense_cost == 0.0 {
        config.idle_tick_s
    } else {
        0.0
    };

    loop {
        let j = (0..agents.len())
            .min_by(|&a, &b| agents[a].clock_s.total_cmp(&agents[b].clock_s))
            .expect("nonempty team");
        let now = agents[j].clock_s;
        for a in agents.iter_mut() {
            a.ingest(now, &actions, sigma)?;
        }
        let all_done = agents
            .iter()
            .all(|a| a.belief.matches(&env.beta_true, &config.recovery));
        if all_done || entries.len() >= config.t_max {
            break;
        }
        let agent = &agents[j];
        let ctx = DecisionContext {
            belief: &agent.belief,
            actions: &actions,
            current_cell: agent.cell,
            sigma,
            cost_model,
        };
        let decision = planners[j].timed_decide(&ctx)?;
        let action = actions.get(decision.action).ok_or(Error::OutOfBounds {
            cell: decision.action,
            n: actions.len(),
        })?;
        let step = cost_model.step_cost(env.grid, agent.cell, action);
        let done = now + step + idle;
        let obs = env.observe(action, entries.len(), obs_rng)?;
        let own = Measurement {
            sender: j,
            action: decision.action,
            values: obs.values.clone(),
            arrival_s: done,
        };
        union.absorb_readings(&action.cells, &obs.values, sigma)?;
        {
            let agent = &mut agents[j];
            agent.cost_s += step;
            agent.clock_s = done;
            agent.cell = action.origin;
        }
        for (r, other) in agents.iter_mut().enumerate() {
            let arrival = if r == j {
                done
            } else if channel.drop_prob > 0.0 && channel_rng.random::<f64>() < channel.drop_prob {
                continue;
            } else {
                done + channel.delay_s
            };
            seq += 1;
            other.inbox.push((
                arrival,
                seq,
                Measurement {
                    arrival_s: arrival,
                    ..own.clone()
                },
            ));
        }
        let report = union.recovery(&env.beta_true, &config.recovery);
        entries.push(LogEntry {
            index: entries.len() + 1,
            agent: j,
            action: decision.action,
            time_s: done,
            team_cost_s: agents.iter().map(|a| a.cost_s).sum(),
            recovery_fraction: report.fraction,
            exact: report.exact,
            decision_wallclock: decision.elapsed,
        });
    }
    let end = agents.iter().map(|a| a.clock_s).fold(0.0, f64::max);
    for a in agents.iter_mut() {
        a.ingest(end, &actions, sigma)?;
    }
    Ok(RunLog {
        entries,
        agents,
        union_belief: union,
    })
}

/// Single-agent episode: the one-agent case of [`run_multiagent`].
pub fn run_single_agent(
    env: &Environment,
    planner: Box<dyn Planner>,
    cost_model: &CostModel,
    config: &SimConfig,
    obs_rng: &mut SimRng,
) -> Result<RunLog> {
    let mut planners = [planner];
    run_multiagent(
        env,
        &mut planners,
        cost_model,
        &ChannelConfig::default(),
        config,
        obs_rng,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::FovPreset;
    use crate::myopic::{EigPlanner, TsPlanner};

    const SIGMA: f64 = 1.0 / 16.0;

    fn team(n: usize) -> Vec<Box<dyn Planner>> {
        (0..n).map(|_| Box::new(EigPlanner) as Box<dyn Planner>).collect()
    }

    fn env2d(seed: u64, k: usize) -> Environment {
        Environment::new(8, 8, k, SIGMA, FovPreset::Wedge2, seed).unwrap()
    }

    /// Plain loop without any event machinery.
    fn reference_loop(env: &Environment, seed: u64, t_max: usize) -> Vec<(usize, f64)> {
        let actions = env.actions();
        let mut planner = TsPlanner::new(RecoveryConfig::default(), 3, seed);
        let mut rng = rng::seeded(seed);
        let mut b = BeliefState::new(env.grid, SIGMA);
        let cost = CostModel::new(1.0, 2.0).unwrap();
        let mut cell = 0;
        let mut spent = 0.0;
        let mut out = Vec::new();
        for t in 0..t_max {
            if b.matches(&env.beta_true, &RecoveryConfig::default()) {
                break;
            }
            let ctx = DecisionContext {
                belief: &b,
                actions: &actions,
                current_cell: cell,
                sigma: SIGMA,
                cost_model: &cost,
            };
            let a = planner.decide(&ctx).unwrap();
            spent += cost.step_cost(env.grid, cell, &actions[a]);
            let obs = env.observe(&actions[a], t, &mut rng).unwrap();
            b.absorb_readings(&actions[a].cells, &obs.values, SIGMA).unwrap();
            cell = actions[a].origin;
            out.push((a, spent));
        }
        out
    }

    #[test]
    fn single_agent_matches_plain_loop() {
        for seed in 0..5 {
            let env = env2d(seed, 2);
            let cfg = SimConfig {
                t_max: 25,
                ..SimConfig::default()
            };
            let cost = CostModel::new(1.0, 2.0).unwrap();
            let planner = Box::new(TsPlanner::new(RecoveryConfig::default(), 3, seed));
            let log = run_single_agent(&env, planner, &cost, &cfg, &mut rng::seeded(seed)).unwrap();
            let got: Vec<(usize, f64)> = log.entries.iter().map(|e| (e.action, e.team_cost_s)).collect();
            assert_eq!(got, reference_loop(&env, seed, 25));
        }
    }

    #[test]
    fn dropped_channel_isolates_agents() {
        let env = env2d(3, 4);
        let channel = ChannelConfig {
            drop_prob: 1.0,
            ..ChannelConfig::default()
        };
        let cfg = SimConfig {
            t_max: 30,
            ..SimConfig::default()
        };
        let mut planners = team(3);
        let log = run_multiagent(&env, &mut planners, &CostModel::default(), &channel, &cfg, &mut rng::seeded(1)).unwrap();
        for a in &log.agents {
            assert!(a.measurements.iter().all(|m| m.sender == a.id));
        }
        assert_eq!(log.entries.len(), 30);
    }

    #[test]
    fn beliefs_replay_from_measurement_sets() {
        let env = env2d(5, 4);
        let channel = ChannelConfig {
            drop_prob: 0.3,
            delay_s: 2.5,
            seed: 9,
        };
        let cfg = SimConfig {
            t_max: 30,
            ..SimConfig::default()
        };
        let mut planners = team(3);
        let cost = CostModel::new(1.0, 0.5).unwrap();
        let log = run_multiagent(&env, &mut planners, &cost, &channel, &cfg, &mut rng::seeded(2)).unwrap();
        let actions = env.actions();
        for a in &log.agents {
            let replay = a.replay_belief(&env, &actions).unwrap();
            for (x, y) in replay.mean.iter().zip(&a.belief.mean) {
                assert!((x - y).abs() <= 1e-12);
            }
            for (x, y) in replay.var.iter().zip(&a.belief.var) {
                assert!((x - y).abs() <= 1e-12);
            }
            let arrivals: Vec<f64> = a.measurements.iter().map(|m| m.arrival_s).collect();
            assert!(arrivals.windows(2).all(|w| w[0] <= w[1]));
        }
        assert_eq!(log.entries.len(), 30);
    }

    #[test]
    fn agents_act_on_their_own_clocks() {
        let env = env2d(8, 4);
        let cfg = SimConfig {
            t_max: 24,
            ..SimConfig::default()
        };
        let mut planners = team(2);
        let cost = CostModel::new(1.0, 0.0).unwrap();
        let log = run_multiagent(&env, &mut planners, &cost, &ChannelConfig::default(), &cfg, &mut rng::seeded(4)).unwrap();
        // Decision start times (completion minus duration) are non-decreasing.
        let mut last_start = 0.0;
        let mut by_agent = [0.0f64; 2];
        for e in &log.entries {
            let start = by_agent[e.agent];
            assert!(start >= last_start - 1e-12);
            last_start = start;
            by_agent[e.agent] = e.time_s;
        }
        assert!(log.entries.iter().any(|e| e.agent == 1));
        // Free sensing still advances the clock by the idle tick.
        assert!(log.entries.iter().all(|e| e.time_s >= 1.0));
    }

    #[test]
    fn team_stops_when_everyone_has_recovered() {
        let env = env2d(11, 4);
        let cfg = SimConfig {
            t_max: 200,
            ..SimConfig::default()
        };
        let mut planners = team(3);
        let log = run_multiagent(&env, &mut planners, &CostModel::default(), &ChannelConfig::default(), &cfg, &mut rng::seeded(5)).unwrap();
        assert!(log.all_agents_exact(&env, &cfg.recovery));
        assert!(log.measurements_to_recovery().is_some());
        assert!(log.entries.len() < 200);
        let mut empty: Vec<Box<dyn Planner>> = Vec::new();
        assert!(run_multiagent(&env, &mut empty, &CostModel::default(), &ChannelConfig::default(), &cfg, &mut rng::seeded(5)).is_err());
    }
}
