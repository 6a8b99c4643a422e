//! LP relaxations through the `microlp` simplex.

use microlp::{ComparisonOp, OptimizationDirection, Problem, Variable};

use crate::error::{Error, Result};
use crate::formulation::{LinearConstraint, MilpModel, Sense};

/// Optimal point of a relaxation.
#[derive(Clone, Debug)]
pub struct LpPoint {
    pub objective: f64,
    pub values: Vec<f64>,
}

pub(crate) struct Relaxation {
    problem: Problem,
    vars: Vec<Variable>,
}

impl Relaxation {
    /// The model with integrality dropped and the given bounds and objective
    /// (`None` keeps the model objective), plus `extra` rows.
    pub(crate) fn new(
        model: &MilpModel,
        extra: &[LinearConstraint],
        lower: &[f64],
        upper: &[f64],
        objective: Option<&[f64]>,
        maximize: bool,
    ) -> Self {
        let direction = if maximize {
            OptimizationDirection::Maximize
        } else {
            OptimizationDirection::Minimize
        };
        let mut problem = Problem::new(direction);
        let obj = objective.unwrap_or(&model.objective);
        let vars: Vec<Variable> = (0..model.variables.len())
            .map(|j| problem.add_var(obj[j], (lower[j], upper[j])))
            .collect();
        for c in model.constraints.iter().chain(extra) {
            let expr: Vec<(Variable, f64)> = c.terms.iter().map(|&(j, a)| (vars[j], a)).collect();
            let op = match c.sense {
                Sense::Le => ComparisonOp::Le,
                Sense::Ge => ComparisonOp::Ge,
                Sense::Eq => ComparisonOp::Eq,
            };
            problem.add_constraint(expr.as_slice(), op, c.rhs);
        }
        Relaxation { problem, vars }
    }

    pub(crate) fn solve(&self) -> Result<Option<microlp::Solution>> {
        outcome(self.problem.solve())
    }

    pub(crate) fn var(&self, j: usize) -> Variable {
        self.vars[j]
    }

    pub(crate) fn point(&self, sol: &microlp::Solution) -> LpPoint {
        LpPoint {
            objective: sol.objective(),
            values: self.vars.iter().map(|&v| sol.var_value_raw(v)).collect(),
        }
    }
}

/// `Ok(None)` on infeasibility; unboundedness cannot occur in a valid model.
pub(crate) fn outcome(
    res: std::result::Result<microlp::SolveOutcome, microlp::Error>,
) -> Result<Option<microlp::Solution>> {
    match res {
        Ok(microlp::SolveOutcome::Solution(s)) => Ok(Some(s)),
        Ok(microlp::SolveOutcome::Interrupted(_)) => Err(Error::Solver("LP solve interrupted".into())),
        Err(microlp::Error::Infeasible) => Ok(None),
        Err(microlp::Error::Unbounded) => Err(Error::Solver("LP relaxation is unbounded".into())),
        Err(e) => Err(Error::Solver(format!("LP solver: {e}"))),
    }
}

/// Solve the continuous relaxation of `model` under the given bounds.
/// `objective` replaces the model objective when given. Returns `None` when
/// the relaxation is infeasible.
pub fn solve_relaxation(
    model: &MilpModel,
    lower: &[f64],
    upper: &[f64],
    objective: Option<&[f64]>,
    maximize: bool,
) -> Result<Option<LpPoint>> {
    let n = model.variables.len();
    if lower.len() != n || upper.len() != n || objective.is_some_and(|o| o.len() != n) {
        return Err(Error::Solver("bound or objective vector has wrong length".into()));
    }
    if lower.iter().zip(upper).any(|(l, u)| l > u) {
        return Ok(None);
    }
    let relax = Relaxation::new(model, &[], lower, upper, objective, maximize);
    Ok(relax.solve()?.map(|s| relax.point(&s)))
}

/// Model bounds as two vectors.
pub fn model_bounds(model: &MilpModel) -> (Vec<f64>, Vec<f64>) {
    model.variables.iter().map(|v| (v.lower, v.upper)).unzip()
}
