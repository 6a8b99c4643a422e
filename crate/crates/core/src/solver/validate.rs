use std::fmt;

use serde::Serialize;

use super::Solution;
use crate::formulation::{Family, MilpModel, VarKind};
use crate::market::MarketId;

const TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum ViolationKind {
    Missing,
    Bound,
    Integrality,
    Constraint(Family),
    Product,
    Objective,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Variable or row name.
    pub name: String,
    pub amount: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
}

impl ViolationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has_family(&self, family: Family) -> bool {
        self.violations
            .iter()
            .any(|v| v.kind == ViolationKind::Constraint(family))
    }

    fn push(&mut self, kind: ViolationKind, name: impl Into<String>, amount: f64) {
        self.violations.push(Violation {
            kind,
            name: name.into(),
            amount,
        });
    }
}

impl fmt::Display for ViolationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{:?} {} by {:.3e}", v.kind, v.name, v.amount)?;
        }
        Ok(())
    }
}

/// Every bound, integrality, row and linearized-product violation beyond
/// 1e-6, plus an objective mismatch.
pub fn validate(solution: &Solution, model: &MilpModel) -> ViolationReport {
    let mut report = ViolationReport::default();
    let x = solution.dense(model);
    for (v, &val) in model.variables.iter().zip(&x) {
        if val.is_nan() {
            report.push(ViolationKind::Missing, v.kind.name(), f64::NAN);
            continue;
        }
        let out = (v.lower - val).max(val - v.upper).max(0.0);
        if out > TOL {
            report.push(ViolationKind::Bound, v.kind.name(), out);
        }
        if v.is_binary() {
            let frac = (val - val.round()).abs();
            if frac > TOL {
                report.push(ViolationKind::Integrality, v.kind.name(), frac);
            }
        }
    }
    if !report.is_empty() {
        return report;
    }
    for c in &model.constraints {
        let amount = c.violation(&x);
        if amount > TOL {
            report.push(ViolationKind::Constraint(c.family), c.name.clone(), amount);
        }
    }
    check_products(model, &x, &mut report);
    let z = model.objective_value(&x);
    if (z - solution.objective).abs() > TOL {
        report.push(ViolationKind::Objective, "objective", (z - solution.objective).abs());
    }
    report
}

fn check_products(model: &MilpModel, x: &[f64], report: &mut ViolationReport) {
    use VarKind::*;
    let val = |k: VarKind| model.var(k).map(|j| x[j]);
    for s in 0..model.dims.scenarios {
        for h in 0..model.dims.hours {
            let d = model.product_data(s, h);
            let acc = |m| x[model.idx(Accept { s, h, m })];
            let ok = x[model.idx(Fulfilled { s, h })];
            let price = x[model.idx(Price { h })];
            let freq = acc(MarketId::FcrN) + acc(MarketId::FcrD);
            let sdch = acc(MarketId::SpotDischarge);
            let sch = acc(MarketId::SpotCharge);
            let avail = d.p_max * price * freq;
            let spot_dch = d.e_spot * d.spot_dch_price * sdch;
            let spot_ch = d.e_spot * d.spot_ch_price * sch;
            let (pen_up, pen_down) = if model.compat.unconditional_spot_penalties {
                (d.c_up * d.e_spot, d.c_down * d.e_spot)
            } else {
                (d.c_up * d.e_spot * sdch, d.c_down * d.e_spot * sch)
            };
            let expected = [
                (Avail { s, h }, avail),
                (SpotDischarge { s, h }, spot_dch),
                (SpotCharge { s, h }, spot_ch),
                (WonAvail { s, h }, avail * ok),
                (LostAvail { s, h }, avail * (1.0 - ok)),
                (WonSpotDischarge { s, h }, spot_dch * ok),
                (LostSpotDischarge { s, h }, pen_up * (1.0 - ok)),
                (LostSpotCharge { s, h }, pen_down * (1.0 - ok)),
                (PaidSpotCharge { s, h }, spot_ch * ok),
            ];
            for (k, want) in expected {
                if let Some(got) = val(k) {
                    let diff = (got - want).abs();
                    if diff > TOL {
                        report.push(ViolationKind::Product, k.name(), diff);
                    }
                }
            }
        }
    }
}
