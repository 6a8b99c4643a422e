//! Settlement recomputed from first principles, participation statistics
//! and plottable CSV output.
//!
//! Nothing here reads model coefficients: revenues are rebuilt from the bid
//! decisions, scenario prices and dispatch values, then compared against the
//! solver's linearized revenue variables and objective.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::droop::EnergyRequirement;
use crate::error::{Error, Result};
use crate::formulation::VarKind;
use crate::market::{BessConfig, DegradationSchedule, MarketId};
use crate::scenario::ScenarioSet;
use crate::solver::Solution;

const TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HourSettlement {
    pub scenario_id: String,
    /// 1-based.
    pub hour: usize,
    pub market: Option<MarketId>,
    pub accepted: bool,
    pub fulfilled: bool,
    pub price: f64,
    pub availability_won: f64,
    pub availability_lost: f64,
    pub spot_dch_won: f64,
    pub spot_dch_penalty: f64,
    pub spot_ch_cost: f64,
    pub spot_ch_penalty: f64,
    pub energy_settlement: f64,
    pub degradation_cost: f64,
    pub soc_target_penalty: f64,
}

impl HourSettlement {
    pub fn net(&self) -> f64 {
        self.availability_won - self.availability_lost + self.spot_dch_won
            - self.spot_dch_penalty
            - self.spot_ch_cost
            - self.spot_ch_penalty
            + self.energy_settlement
            - self.degradation_cost
            - self.soc_target_penalty
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Participation {
    pub scenario_id: String,
    pub market: MarketId,
    pub pct_hours_bid: f64,
    pub pct_hours_accepted: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioTotals {
    pub scenario_id: String,
    pub probability: f64,
    pub won: f64,
    pub lost: f64,
    pub energy: f64,
    pub degradation: f64,
    pub soc_target_penalty: f64,
    pub net: f64,
    pub pct_idle: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DispatchRow {
    pub scenario_id: String,
    /// First minute of the step, 1-based.
    pub minute: usize,
    pub charge_mwh: f64,
    pub discharge_mwh: f64,
    /// SOC at the end of the step.
    pub soc_mwh: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SettlementReport {
    pub hours: Vec<HourSettlement>,
    pub participation: Vec<Participation>,
    pub scenarios: Vec<ScenarioTotals>,
    pub expected_total: f64,
    pub solver_objective: f64,
    #[serde(skip)]
    pub dispatch: Vec<DispatchRow>,
}

impl SettlementReport {
    pub fn participation(&self, scenario: usize, market: MarketId) -> &Participation {
        &self.participation[scenario * MarketId::COUNT + market.index()]
    }

    /// Probability-weighted share of hours with an accepted bid in `market`.
    pub fn expected_pct_accepted(&self, market: MarketId) -> f64 {
        self.scenarios
            .iter()
            .enumerate()
            .map(|(s, t)| t.probability * self.participation(s, market).pct_hours_accepted)
            .sum()
    }
}

fn binary(sol: &Solution, k: VarKind) -> Result<bool> {
    Ok(sol.get(k)? > 0.5)
}

/// Rebuild every revenue term from decisions and prices and check it against
/// the solver's auxiliaries and objective.
pub fn settle(
    solution: &Solution,
    scenarios: &ScenarioSet,
    req: &EnergyRequirement,
    deg: &DegradationSchedule,
    config: &BessConfig,
) -> Result<SettlementReport> {
    use VarKind::*;
    let n_h = scenarios.horizon_hours();
    let n_t = scenarios.steps();
    let k = scenarios.steps_per_hour();
    let d = solution.dims;
    if (d.scenarios, d.hours, d.steps) != (scenarios.len(), n_h, n_t) || req.dims() != (scenarios.len(), n_t) {
        return Err(Error::Consistency(format!(
            "solution dims {d:?} do not match the scenario set"
        )));
    }
    let compat = config.compat;
    let mut mismatches = Vec::new();
    let mut check = |what: VarKind, recomputed: f64| {
        if let Some(v) = solution.value(what) {
            if (v - recomputed).abs() > TOL {
                mismatches.push(format!("{what}: solver {v}, recomputed {recomputed}"));
            }
        }
    };

    let mut hours = Vec::with_capacity(scenarios.len() * n_h);
    let mut participation = Vec::new();
    let mut totals = Vec::new();
    let mut dispatch = Vec::new();
    let target = config.soc_target.filter(|t| t.weight > 0.0);

    for (s, sc) in scenarios.iter().enumerate() {
        let mut bid_hours = [0usize; MarketId::COUNT];
        let mut acc_hours = [0usize; MarketId::COUNT];
        let mut tot = ScenarioTotals {
            scenario_id: sc.id.clone(),
            probability: sc.probability,
            won: 0.0,
            lost: 0.0,
            energy: 0.0,
            degradation: 0.0,
            soc_target_penalty: 0.0,
            net: 0.0,
            pct_idle: 0.0,
        };
        for h in 0..n_h {
            let price = solution.get(Price { h })?;
            let ok = binary(solution, Fulfilled { s, h })?;
            let fail = if ok { 0.0 } else { 1.0 };
            let mut market = None;
            let mut acc = [false; MarketId::COUNT];
            for m in MarketId::ALL {
                if binary(solution, Bid { h, m })? {
                    market = Some(m);
                    bid_hours[m.index()] += 1;
                }
                acc[m.index()] = binary(solution, Accept { s, h, m })?;
                if acc[m.index()] {
                    acc_hours[m.index()] += 1;
                }
            }
            let a = |m: MarketId| if acc[m.index()] { 1.0 } else { 0.0 };
            let freq = a(MarketId::FcrN) + a(MarketId::FcrD);
            let up = sc.prices.balancing_up[h];
            let down = sc.prices.balancing_down[h];
            let avail = config.p_max * price * freq;
            let spot_dch = config.e_spot * sc.prices.threshold(h, MarketId::SpotDischarge) * a(MarketId::SpotDischarge);
            let spot_ch = config.e_spot * sc.prices.threshold(h, MarketId::SpotCharge) * a(MarketId::SpotCharge);
            let (pen_up, pen_down) = if compat.unconditional_spot_penalties {
                (up * config.e_spot, down * config.e_spot)
            } else {
                (
                    up * config.e_spot * a(MarketId::SpotDischarge),
                    down * config.e_spot * a(MarketId::SpotCharge),
                )
            };

            let mut energy = 0.0;
            for t in h * k..(h + 1) * k {
                for m in [MarketId::FcrN, MarketId::FcrD] {
                    energy += up * solution.get(Discharge { s, t, m })? - down * solution.get(Charge { s, t, m })?;
                }
            }
            let degradation: f64 = MarketId::ALL.iter().map(|&m| a(m) * deg.hourly(s, h, m)).sum();
            let soc_target_penalty = match target {
                Some(tg) if h + 1 < n_h => tg.weight * (solution.get(Soc { s, t: (h + 1) * k - 1 })? - tg.level).abs(),
                _ => 0.0,
            };

            let row = HourSettlement {
                scenario_id: sc.id.clone(),
                hour: h + 1,
                market,
                accepted: market.is_some_and(|m| acc[m.index()]),
                fulfilled: ok,
                price,
                availability_won: avail * (1.0 - fail),
                availability_lost: avail * fail,
                spot_dch_won: spot_dch * (1.0 - fail),
                spot_dch_penalty: pen_up * fail,
                spot_ch_cost: if compat.omit_spot_charge_payment { 0.0 } else { spot_ch * (1.0 - fail) },
                spot_ch_penalty: pen_down * fail,
                energy_settlement: energy,
                degradation_cost: degradation,
                soc_target_penalty,
            };
            check(Avail { s, h }, avail);
            check(SpotDischarge { s, h }, spot_dch);
            check(SpotCharge { s, h }, spot_ch);
            check(WonAvail { s, h }, row.availability_won);
            check(LostAvail { s, h }, row.availability_lost);
            check(WonSpotDischarge { s, h }, row.spot_dch_won);
            check(LostSpotDischarge { s, h }, row.spot_dch_penalty);
            check(PaidSpotCharge { s, h }, row.spot_ch_cost);
            check(LostSpotCharge { s, h }, row.spot_ch_penalty);
            check(Energy { s, h }, energy);

            tot.won += row.availability_won + row.spot_dch_won;
            tot.lost += row.availability_lost + row.spot_dch_penalty + row.spot_ch_cost + row.spot_ch_penalty;
            tot.energy += energy;
            tot.degradation += degradation;
            tot.soc_target_penalty += soc_target_penalty;
            tot.net += row.net();
            hours.push(row);
        }
        let pct = |n: usize| 100.0 * n as f64 / n_h as f64;
        for m in MarketId::ALL {
            participation.push(Participation {
                scenario_id: sc.id.clone(),
                market: m,
                pct_hours_bid: pct(bid_hours[m.index()]),
                pct_hours_accepted: pct(acc_hours[m.index()]),
            });
        }
        tot.pct_idle = 100.0 - pct(bid_hours.iter().sum());
        totals.push(tot);

        let step = scenarios.step_minutes() as usize;
        for t in 0..n_t {
            let (mut dch, mut ch) = (0.0, 0.0);
            for m in MarketId::ALL {
                dch += solution.get(Discharge { s, t, m })?;
                ch += solution.get(Charge { s, t, m })?;
            }
            dispatch.push(DispatchRow {
                scenario_id: sc.id.clone(),
                minute: t * step + 1,
                charge_mwh: ch,
                discharge_mwh: dch,
                soc_mwh: solution.get(Soc { s, t })?,
            });
        }
    }

    let expected_total: f64 = totals.iter().map(|t| t.probability * t.net).sum();
    if (expected_total - solution.objective).abs() > TOL {
        mismatches.push(format!(
            "expected total {expected_total} differs from solver objective {}",
            solution.objective
        ));
    }
    if !mismatches.is_empty() {
        return Err(Error::Consistency(mismatches.join("; ")));
    }
    Ok(SettlementReport {
        hours,
        participation,
        scenarios: totals,
        expected_total,
        solver_objective: solution.objective,
        dispatch,
    })
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn f(v: f64) -> String {
    format!("{v}")
}

/// Write `participation.csv`, `earnings.csv`, `dispatch.csv` and
/// `summary.json` into `dir`.
pub fn emit(report: &SettlementReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut w = writer(&dir.join("participation.csv"))?;
    w.write_record(["market", "scenario", "pct_bid", "pct_accepted"])?;
    for p in &report.participation {
        w.write_record([
            p.market.code().to_string(),
            p.scenario_id.clone(),
            format!("{:.1}", p.pct_hours_bid),
            format!("{:.1}", p.pct_hours_accepted),
        ])?;
    }
    w.flush().map_err(|e| Error::io(dir.join("participation.csv"), e))?;

    let mut w = writer(&dir.join("earnings.csv"))?;
    w.write_record([
        "scenario",
        "hour",
        "market",
        "accepted",
        "fulfilled",
        "price",
        "availability_won",
        "availability_lost",
        "spot_dch_won",
        "spot_dch_penalty",
        "spot_ch_cost",
        "spot_ch_penalty",
        "energy_settlement",
        "degradation_cost",
        "soc_target_penalty",
        "net",
    ])?;
    for r in &report.hours {
        w.write_record([
            r.scenario_id.clone(),
            r.hour.to_string(),
            r.market.map_or("IDLE".to_string(), |m| m.code().to_string()),
            r.accepted.to_string(),
            r.fulfilled.to_string(),
            f(r.price),
            f(r.availability_won),
            f(r.availability_lost),
            f(r.spot_dch_won),
            f(r.spot_dch_penalty),
            f(r.spot_ch_cost),
            f(r.spot_ch_penalty),
            f(r.energy_settlement),
            f(r.degradation_cost),
            f(r.soc_target_penalty),
            f(r.net()),
        ])?;
    }
    w.flush().map_err(|e| Error::io(dir.join("earnings.csv"), e))?;

    let mut w = writer(&dir.join("dispatch.csv"))?;
    w.write_record(["scenario", "minute", "charge_mwh", "discharge_mwh", "soc_mwh"])?;
    for r in &report.dispatch {
        w.write_record([
            r.scenario_id.clone(),
            r.minute.to_string(),
            f(r.charge_mwh),
            f(r.discharge_mwh),
            f(r.soc_mwh),
        ])?;
    }
    w.flush().map_err(|e| Error::io(dir.join("dispatch.csv"), e))?;

    let path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(report)?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}
