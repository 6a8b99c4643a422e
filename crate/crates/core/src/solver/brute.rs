//! Enumeration oracle for tiny instances.
//!
//! First-stage decisions (bid market and price per hour) are enumerated over
//! a finite grid that provably contains an optimum: with acceptance fixed the
//! objective is linear in the price, and each acceptance pattern is reachable
//! at `Bid_min`, `Bid_max` or a threshold (a price equal to the threshold
//! leaves acceptance open). Per scenario, every acceptance and fulfilment
//! pattern is scored by direct settlement arithmetic plus the exact optimal
//! dispatch value, obtained by a backward dynamic program over concave
//! piecewise-linear value functions of the SOC. No LP is involved in the
//! search; the winning decisions are afterwards completed into a full model
//! assignment.

use std::collections::HashMap;
use std::time::Instant;

use super::lp::{model_bounds, solve_relaxation};
use super::pwl::ConcavePwl;
use super::{Solution, Status};
use crate::droop::{DroopCurve, EnergyRequirement};
use crate::error::{Error, Result};
use crate::formulation::{build_model, VarKind};
use crate::market::{BessConfig, DegradationSchedule, MarketId};
use crate::scenario::ScenarioSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BruteLimits {
    pub max_hours: usize,
    pub max_scenarios: usize,
    pub min_step_minutes: u32,
}

impl Default for BruteLimits {
    fn default() -> Self {
        BruteLimits {
            max_hours: 4,
            max_scenarios: 2,
            min_step_minutes: 15,
        }
    }
}

/// What a scenario does in one hour.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Mode {
    Off,
    Deliver(MarketId),
    Fail(MarketId),
}

impl Mode {
    fn code(self) -> usize {
        match self {
            Mode::Off => 0,
            Mode::Deliver(m) => 1 + m.index(),
            Mode::Fail(m) => 1 + MarketId::COUNT + m.index(),
        }
    }
}

const MODES: usize = 1 + 2 * MarketId::COUNT;

struct Oracle<'a> {
    scenarios: &'a ScenarioSet,
    req: &'a EnergyRequirement,
    deg: &'a DegradationSchedule,
    config: &'a BessConfig,
    /// Per scenario, dispatch value by base-`MODES` pattern code.
    cache: Vec<HashMap<usize, Option<f64>>>,
}

impl Oracle<'_> {
    /// Optimal dispatch value of scenario `s` under `modes`, from `m_0`.
    fn dispatch_value(&mut self, s: usize, modes: &[Mode]) -> Option<f64> {
        let key = modes.iter().fold(0, |k, m| k * MODES + m.code());
        if let Some(&v) = self.cache[s].get(&key) {
            return v;
        }
        let v = self.dp(s, modes);
        self.cache[s].insert(key, v);
        v
    }

    fn dp(&self, s: usize, modes: &[Mode]) -> Option<f64> {
        let cfg = self.config;
        let sc = self.scenarios.get(s);
        let n_h = modes.len();
        let (lo, hi) = (cfg.e_min, cfg.e_max);
        let target = cfg.soc_target.filter(|t| t.weight > 0.0);
        let mut v = ConcavePwl::constant(lo, hi, 0.0);
        for h in (0..n_h).rev() {
            if h + 1 < n_h {
                if let Some(t) = target {
                    v = v.sub_abs(t.level, t.weight);
                }
            }
            let up = sc.prices.balancing_up[h];
            let down = sc.prices.balancing_down[h];
            for t in self.req.hour_steps(h).rev() {
                v = match modes[h] {
                    Mode::Off => v,
                    Mode::Deliver(m) => {
                        let dch = self.req.discharge(s, t, m);
                        let ch = self.req.charge(s, t, m);
                        if ch > 0.0 && self.charge_blocked(s, t, m) {
                            return None;
                        }
                        let pay = if m.is_frequency() { up * dch - down * ch } else { 0.0 };
                        v.shift(dch - ch, pay).restrict(lo, hi)?
                    }
                    Mode::Fail(m) => {
                        let dch = self.req.discharge(s, t, m);
                        let ch = if self.charge_blocked(s, t, m) {
                            0.0
                        } else {
                            self.req.charge(s, t, m)
                        };
                        let (a_up, a_down) = if m.is_frequency() { (up, down) } else { (0.0, 0.0) };
                        v.sup_convolve(0.0, dch, a_up)
                            .sup_convolve(-ch, 0.0, a_down)
                            .restrict(lo, hi)?
                    }
                };
            }
        }
        v.eval(cfg.m_0)
    }

    /// Charging forbidden above the discharge ramp (strict compatibility).
    fn charge_blocked(&self, s: usize, t: usize, m: MarketId) -> bool {
        if !self.config.compat.strict_dispatch_zero {
            return false;
        }
        let f = self.scenarios.get(s).frequency.samples[t];
        DroopCurve::for_market(m, self.config.p_max).is_some_and(|c| f > c.low_zero)
    }

    /// Settlement of scenario `s`, hour `h` apart from the dispatch value.
    fn hour_value(&self, s: usize, h: usize, mode: Mode, price: f64) -> f64 {
        let cfg = self.config;
        let sc = self.scenarios.get(s);
        let pen_up = sc.prices.balancing_up[h] * cfg.e_spot;
        let pen_down = sc.prices.balancing_down[h] * cfg.e_spot;
        let (m, ok) = match mode {
            Mode::Off => return 0.0,
            Mode::Deliver(m) => (m, true),
            Mode::Fail(m) => (m, false),
        };
        let p = sc.prices.threshold(h, m);
        let mut v = -self.deg.hourly(s, h, m);
        if ok {
            v += match m {
                MarketId::FcrN | MarketId::FcrD => cfg.p_max * price,
                MarketId::SpotDischarge => cfg.e_spot * p,
                MarketId::SpotCharge if cfg.compat.omit_spot_charge_payment => 0.0,
                MarketId::SpotCharge => -cfg.e_spot * p,
            };
        } else {
            if m.is_frequency() {
                v -= cfg.p_max * price;
            }
            if cfg.compat.unconditional_spot_penalties {
                v -= pen_up + pen_down;
            } else {
                match m {
                    MarketId::SpotDischarge => v -= pen_up,
                    MarketId::SpotCharge => v -= pen_down,
                    _ => {}
                }
            }
        }
        v
    }

    /// Best second-stage value of scenario `s` for the given bids, with the
    /// chosen modes.
    fn best_scenario(&mut self, s: usize, bids: &[(Option<MarketId>, f64)]) -> Option<(f64, Vec<Mode>)> {
        let sc = self.scenarios.get(s);
        let options: Vec<Vec<Mode>> = bids
            .iter()
            .enumerate()
            .map(|(h, &(bid, price))| match bid {
                None => vec![Mode::Off],
                Some(m) => {
                    let p = sc.prices.threshold(h, m);
                    if price < p {
                        vec![Mode::Deliver(m), Mode::Fail(m)]
                    } else if price > p {
                        vec![Mode::Off]
                    } else {
                        vec![Mode::Off, Mode::Deliver(m), Mode::Fail(m)]
                    }
                }
            })
            .collect();
        let mut best: Option<(f64, Vec<Mode>)> = None;
        let mut modes: Vec<Mode> = options.iter().map(|o| o[0]).collect();
        let mut idx = vec![0usize; options.len()];
        loop {
            for (h, o) in options.iter().enumerate() {
                modes[h] = o[idx[h]];
            }
            if let Some(dv) = self.dispatch_value(s, &modes) {
                let fixed: f64 = modes
                    .iter()
                    .enumerate()
                    .map(|(h, &m)| self.hour_value(s, h, m, bids[h].1))
                    .sum();
                let total = fixed + dv;
                if best.as_ref().is_none_or(|(b, _)| total > *b) {
                    best = Some((total, modes.clone()));
                }
            }
            if !advance(&mut idx, &options.iter().map(Vec::len).collect::<Vec<_>>()) {
                break;
            }
        }
        best
    }
}

/// Odometer increment; false once every combination has been visited.
fn advance(idx: &mut [usize], radix: &[usize]) -> bool {
    for i in (0..idx.len()).rev() {
        idx[i] += 1;
        if idx[i] < radix[i] {
            return true;
        }
        idx[i] = 0;
    }
    false
}

/// Enumerate the instance exactly, within the default size limits.
pub fn brute_force(
    scenarios: &ScenarioSet,
    req: &EnergyRequirement,
    deg: &DegradationSchedule,
    config: &BessConfig,
) -> Result<Solution> {
    brute_force_with(scenarios, req, deg, config, BruteLimits::default())
}

pub fn brute_force_with(
    scenarios: &ScenarioSet,
    req: &EnergyRequirement,
    deg: &DegradationSchedule,
    config: &BessConfig,
    limits: BruteLimits,
) -> Result<Solution> {
    let start = Instant::now();
    let n_h = scenarios.horizon_hours();
    let n_s = scenarios.len();
    if n_h > limits.max_hours || n_s > limits.max_scenarios || scenarios.step_minutes() < limits.min_step_minutes {
        return Err(Error::Refused(format!(
            "{n_s} scenarios x {n_h} hours at {} min steps exceeds {} x {} at >= {} min",
            scenarios.step_minutes(),
            limits.max_scenarios,
            limits.max_hours,
            limits.min_step_minutes
        )));
    }
    if config.compat.nonnegative_energy {
        return Err(Error::Refused(
            "nonnegative energy settlement couples hours in a way the oracle does not model".into(),
        ));
    }
    // the model validates dimensions and is needed to complete the solution
    let model = build_model(scenarios, req, deg, config)?;
    let bid_max = model.bid_max;

    let choices: Vec<Vec<(Option<MarketId>, f64)>> = (0..n_h)
        .map(|h| {
            let mut c = vec![(None, 0.0)];
            for m in MarketId::ALL.into_iter().filter(|&m| config.market_enabled(m)) {
                let mut prices = vec![config.bid_min, bid_max];
                prices.extend(
                    scenarios
                        .iter()
                        .map(|sc| sc.prices.threshold(h, m))
                        .filter(|&p| p >= config.bid_min && p <= bid_max),
                );
                prices.sort_by(f64::total_cmp);
                prices.dedup();
                c.extend(prices.into_iter().map(|p| (Some(m), p)));
            }
            c
        })
        .collect();

    let mut oracle = Oracle {
        scenarios,
        req,
        deg,
        config,
        cache: vec![HashMap::new(); n_s],
    };
    let radix: Vec<usize> = choices.iter().map(Vec::len).collect();
    let mut idx = vec![0usize; n_h];
    let mut best: Option<(f64, Vec<(Option<MarketId>, f64)>, Vec<Vec<Mode>>)> = None;
    let mut evaluated = 0usize;
    loop {
        evaluated += 1;
        let bids: Vec<_> = idx.iter().enumerate().map(|(h, &i)| choices[h][i]).collect();
        let mut total = 0.0;
        let mut modes = Vec::with_capacity(n_s);
        let mut feasible = true;
        for s in 0..n_s {
            match oracle.best_scenario(s, &bids) {
                Some((v, m)) => {
                    total += scenarios.get(s).probability * v;
                    modes.push(m);
                }
                None => {
                    feasible = false;
                    break;
                }
            }
        }
        if feasible && best.as_ref().is_none_or(|(b, _, _)| total > *b) {
            best = Some((total, bids, modes));
        }
        if !advance(&mut idx, &radix) {
            break;
        }
    }

    let Some((objective, bids, modes)) = best else {
        return Ok(Solution::infeasible(&model, evaluated, start.elapsed()));
    };

    // complete the winning decisions into a full assignment
    let (mut lo, mut up) = model_bounds(&model);
    let mut fix = |k: VarKind, v: f64| {
        let j = model.idx(k);
        lo[j] = v;
        up[j] = v;
    };
    for (h, &(bid, price)) in bids.iter().enumerate() {
        for m in MarketId::ALL {
            fix(VarKind::Bid { h, m }, f64::from(u8::from(bid == Some(m))));
        }
        fix(VarKind::Price { h }, price);
        for (s, sm) in modes.iter().enumerate() {
            let (acc, ok) = match sm[h] {
                Mode::Off => (None, 1.0),
                Mode::Deliver(m) => (Some(m), 1.0),
                Mode::Fail(m) => (Some(m), 0.0),
            };
            for m in MarketId::ALL {
                fix(VarKind::Accept { s, h, m }, f64::from(u8::from(acc == Some(m))));
            }
            fix(VarKind::Fulfilled { s, h }, ok);
        }
    }
    let point = solve_relaxation(&model, &lo, &up, None, true)?.ok_or_else(|| {
        Error::Consistency("enumerated optimum is infeasible in the model".into())
    })?;
    if (point.objective - objective).abs() > 1e-6 {
        return Err(Error::Consistency(format!(
            "enumerated objective {objective} but the model prices the same decisions at {}",
            point.objective
        )));
    }
    let mut sol = Solution::from_dense(&model, &point.values, Status::Optimal, objective, evaluated, start.elapsed());
    sol.objective = objective;
    sol.gap = 0.0;
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::droop::build_requirements;
    use crate::market::degradation_costs;
    use crate::scenario::tests::flat_set;
    use crate::scenario::Scenario;

    fn run(set: &ScenarioSet, cfg: &BessConfig) -> Result<Solution> {
        let req = build_requirements(set, cfg).unwrap();
        let deg = degradation_costs(&req, cfg);
        brute_force(set, &req, &deg, cfg)
    }

    fn cfg60() -> BessConfig {
        BessConfig {
            step_minutes: 60,
            ..BessConfig::default()
        }
    }

    #[test]
    fn fcr_n_single_hour_earns_availability() {
        let set = flat_set(1, 1, 60, [10.0, 0.0, 0.0, 0.0]);
        let mut cfg = cfg60();
        cfg.c_deg = 0.0;
        cfg.markets = vec![MarketId::FcrN];
        let sol = run(&set, &cfg).unwrap();
        assert!((sol.objective - 9.0).abs() < 1e-9);
        assert_eq!(sol.bid_market(0), Some(MarketId::FcrN));
        assert!((sol.value(VarKind::Price { h: 0 }).unwrap() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn undeliverable_spot_discharge_means_no_bid() {
        let set = flat_set(1, 1, 60, [0.0, 0.0, 50.0, 0.0]);
        let mut cfg = cfg60();
        cfg.e_min = 0.5;
        cfg.m_0 = 0.5;
        cfg.markets = vec![MarketId::SpotDischarge];
        let sol = run(&set, &cfg).unwrap();
        assert_eq!(sol.objective, 0.0);
        assert_eq!(sol.bid_market(0), None);
    }

    #[test]
    fn refuses_large_instances() {
        let set = flat_set(3, 1, 60, [10.0; 4]);
        assert!(matches!(run(&set, &cfg60()), Err(Error::Refused(_))));
        let set = flat_set(1, 5, 60, [10.0; 4]);
        assert!(matches!(run(&set, &cfg60()), Err(Error::Refused(_))));
        let set = flat_set(1, 1, 5, [10.0; 4]);
        let cfg = BessConfig {
            step_minutes: 5,
            ..BessConfig::default()
        };
        assert!(matches!(run(&set, &cfg), Err(Error::Refused(_))));
    }

    #[test]
    fn candidate_prices_include_all_thresholds() {
        // two scenarios, FCR-N thresholds 10 and 20: bidding 10 is accepted in
        // both (9 each), bidding 20 only in the second (18 / 2 = 9); with a
        // tie the oracle must still find 9
        let a = Scenario::constant("a", 1, 60, 50.0, [10.0, 0.0, 0.0, 0.0], 60.0, 20.0).unwrap();
        let b = Scenario::constant("b", 1, 60, 50.0, [20.0, 0.0, 0.0, 0.0], 60.0, 20.0).unwrap();
        let set = ScenarioSet::uniform(vec![a, b]).unwrap();
        let mut cfg = cfg60();
        cfg.c_deg = 0.0;
        cfg.markets = vec![MarketId::FcrN];
        let sol = run(&set, &cfg).unwrap();
        assert!((sol.objective - 9.0).abs() < 1e-9);
    }

    #[test]
    fn spot_charge_then_discharge_arbitrage() {
        // buy at 10 in hour 1, sell at 80 in hour 2
        let mut sc = Scenario::constant("a", 2, 60, 50.0, [0.0, 0.0, 0.0, 0.0], 60.0, 20.0).unwrap();
        sc.prices.thresholds[0] = [0.0, 0.0, 5.0, 10.0];
        sc.prices.thresholds[1] = [0.0, 0.0, 80.0, 70.0];
        let set = ScenarioSet::new(vec![sc]).unwrap();
        let mut cfg = cfg60();
        cfg.c_deg = 0.0;
        cfg.m_0 = 0.1;
        cfg.markets = vec![MarketId::SpotDischarge, MarketId::SpotCharge];
        let sol = run(&set, &cfg).unwrap();
        assert!((sol.objective - 0.4 * (80.0 - 10.0)).abs() < 1e-9, "{}", sol.objective);
        assert_eq!(sol.bid_market(0), Some(MarketId::SpotCharge));
        assert_eq!(sol.bid_market(1), Some(MarketId::SpotDischarge));
    }
}
