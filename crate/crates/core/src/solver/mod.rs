//! Exact solution of the bidding MILP: a built-in branch and bound over LP
//! relaxations, an enumeration oracle for tiny instances, and a post-solve
//! validator.

mod bb;
mod brute;
mod cuts;
mod decomp;
mod dp;
mod lp;
mod plf;
mod pwl;
mod structure;
mod validate;

use std::collections::BTreeMap;
use std::time::Duration;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::formulation::{Dims, MilpModel, VarKind};
use crate::market::MarketId;

pub use bb::solve_bb;
pub use brute::{brute_force, brute_force_with, BruteLimits};
pub use lp::{model_bounds, solve_relaxation, LpPoint};
pub use pwl::ConcavePwl;
pub use validate::{validate, Violation, ViolationKind, ViolationReport};

/// Above this many binaries the built-in solver is not expected to finish.
pub const BINARY_GUARDRAIL: usize = 5_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum Branching {
    /// Fractional value closest to 0.5 within the priority tier.
    #[default]
    MostFractional,
    /// Lowest-index fractional binary within the priority tier.
    FirstFractional,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum Engine {
    /// Branch on the hourly offers with per-scenario dynamic programs and
    /// Lagrangian bounds; falls back to `Lp` for models it cannot read.
    #[default]
    Decomposition,
    /// Branch and bound over LP relaxations of the full model.
    Lp,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    pub engine: Engine,
    pub abs_gap: f64,
    pub int_tol: f64,
    pub node_limit: Option<usize>,
    pub time_limit: Option<Duration>,
    pub branching: Branching,
    /// No wall-clock dependent behaviour; a time limit is ignored.
    pub deterministic: bool,
    /// Re-solve child relaxations from the parent basis.
    pub warm_start: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            engine: Engine::Decomposition,
            abs_gap: 1e-6,
            int_tol: 1e-6,
            node_limit: None,
            time_limit: None,
            branching: Branching::MostFractional,
            deterministic: true,
            warm_start: true,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [("abs_gap", self.abs_gap), ("int_tol", self.int_tol)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation("solver options", field, "must be positive"));
            }
        }
        if self.int_tol >= 0.5 {
            return Err(Error::validation("solver options", "int_tol", "must be below 0.5"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Optimal,
    Infeasible,
    BoundLimit,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub values: BTreeMap<VarKind, f64>,
    pub objective: f64,
    pub status: Status,
    /// Best bound minus incumbent objective (absolute).
    pub gap: f64,
    pub bound: f64,
    pub node_count: usize,
    pub wall_time: Duration,
    pub dims: Dims,
}

impl Solution {
    pub fn value(&self, kind: VarKind) -> Option<f64> {
        self.values.get(&kind).copied()
    }

    /// Value of a variable that must exist.
    pub fn get(&self, kind: VarKind) -> Result<f64> {
        self.value(kind)
            .ok_or_else(|| Error::Consistency(format!("solution has no value for {kind}")))
    }

    /// Values laid out in model order.
    pub fn dense(&self, model: &MilpModel) -> Vec<f64> {
        model
            .variables
            .iter()
            .map(|v| self.values.get(&v.kind).copied().unwrap_or(f64::NAN))
            .collect()
    }

    pub(crate) fn from_dense(
        model: &MilpModel,
        values: &[f64],
        status: Status,
        bound: f64,
        node_count: usize,
        wall_time: Duration,
    ) -> Solution {
        let objective = model.objective_value(values);
        Solution {
            values: model
                .variables
                .iter()
                .zip(values)
                .map(|(v, &x)| (v.kind, x))
                .collect(),
            objective,
            status,
            gap: (bound - objective).max(0.0),
            bound,
            node_count,
            wall_time,
            dims: model.dims,
        }
    }

    pub(crate) fn infeasible(model: &MilpModel, node_count: usize, wall_time: Duration) -> Solution {
        Solution {
            values: BTreeMap::new(),
            objective: f64::NEG_INFINITY,
            status: Status::Infeasible,
            gap: f64::INFINITY,
            bound: f64::NEG_INFINITY,
            node_count,
            wall_time,
            dims: model.dims,
        }
    }

    /// Bid market of hour `h`, if any.
    pub fn bid_market(&self, h: usize) -> Option<MarketId> {
        MarketId::ALL
            .into_iter()
            .find(|&m| self.value(VarKind::Bid { h, m }).unwrap_or(0.0) > 0.5)
    }

    /// JSON dump: status, objective, per-hour decisions, per-step dispatch
    /// (every `thin`-th step) and SOC.
    pub fn to_json(&self, thin: usize) -> Value {
        let Dims {
            scenarios,
            hours,
            steps,
            ..
        } = self.dims;
        let v = |k| self.value(k).unwrap_or(0.0);
        let bids: Vec<Value> = (0..hours)
            .map(|h| {
                json!({
                    "hour": h + 1,
                    "market": self.bid_market(h).map(|m| m.code()),
                    "price": v(VarKind::Price { h }),
                })
            })
            .collect();
        let per_scenario: Vec<Value> = (0..scenarios)
            .map(|s| {
                let hours: Vec<Value> = (0..hours)
                    .map(|h| {
                        let accepted: Vec<&str> = MarketId::ALL
                            .into_iter()
                            .filter(|&m| v(VarKind::Accept { s, h, m }) > 0.5)
                            .map(|m| m.code())
                            .collect();
                        json!({
                            "hour": h + 1,
                            "accepted": accepted,
                            "fulfilled": v(VarKind::Fulfilled { s, h }) > 0.5,
                        })
                    })
                    .collect();
                let dispatch: Vec<Value> = (0..steps)
                    .step_by(thin.max(1))
                    .map(|t| {
                        let (mut dch, mut ch) = (0.0, 0.0);
                        for m in MarketId::ALL {
                            dch += v(VarKind::Discharge { s, t, m });
                            ch += v(VarKind::Charge { s, t, m });
                        }
                        json!({ "step": t + 1, "discharge": dch, "charge": ch, "soc": v(VarKind::Soc { s, t }) })
                    })
                    .collect();
                json!({ "scenario": s + 1, "hours": hours, "dispatch": dispatch })
            })
            .collect();
        json!({
            "status": self.status,
            "objective": self.objective,
            "bound": self.bound,
            "gap": self.gap,
            "node_count": self.node_count,
            "wall_time_s": self.wall_time.as_secs_f64(),
            "bids": bids,
            "scenarios": per_scenario,
        })
    }
}
