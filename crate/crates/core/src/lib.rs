//! Cost-aware active search on gridded worlds.
//!
//! Agents locate hidden targets with noisy region-sensing actions. Beliefs
//! are exact diagonal Gaussian posteriors; planners range from one-step
//! information-greedy and Thompson-sampling rules, through a depth-limited
//! tree search, to a gradient-guided diffusion model that samples whole
//! lookahead action sequences conditioned on the belief.

pub mod belief;
pub mod datagen;
pub mod diffusion;
pub mod env;
pub mod error;
pub mod experiment;
pub mod mcts;
pub mod myopic;
pub mod nn;
pub mod planner;
pub mod rng;
pub mod sim;

pub use belief::{BeliefState, RecoveryConfig, RecoveryReport, StateImage};
pub use env::{CostModel, Direction, Environment, FovPreset, Grid, Observation, SensingAction};
pub use error::{Error, Result};
pub use planner::{Decision, DecisionContext, Planner};
