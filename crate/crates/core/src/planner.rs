//! The common decision interface shared by every planner.

use std::time::Duration;

use crate::belief::BeliefState;
use crate::env::{CostModel, SensingAction};
use crate::error::Result;

/// Everything a planner may look at when choosing the next action.
#[derive(Debug, Clone, Copy)]
pub struct DecisionContext<'a> {
    pub belief: &'a BeliefState,
    pub actions: &'a [SensingAction],
    pub current_cell: usize,
    pub sigma: f64,
    pub cost_model: &'a CostModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    /// Index into `DecisionContext::actions`.
    pub action: usize,
    /// Wall-clock time spent inside the planner.
    pub elapsed: Duration,
}

pub trait Planner: Send {
    fn name(&self) -> &str;

    /// Chooses one action. Planners own their random streams so repeated
    /// runs with the same seed replay exactly.
    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<usize>;

    fn timed_decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Decision> {
        let start = std::time::Instant::now();
        let action = self.decide(ctx)?;
        Ok(Decision {
            action,
            elapsed: start.elapsed(),
        })
    }
}

impl<P: Planner + ?Sized> Planner for Box<P> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<usize> {
        (**self).decide(ctx)
    }
}

/// First index holding the maximum; NaNs never win.
pub(crate) fn argmax_first<I: IntoIterator<Item = f64>>(values: I) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        match best {
            Some((_, b)) if !(v > b) => {}
            _ if v.is_nan() => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}
