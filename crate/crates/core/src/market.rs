//! Battery and market parameterization: which markets exist, how large the
//! bids are, SOC limits, bid-price bounds, the wear-cost model and the Big-M
//! constants used by the linearizations.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::droop::EnergyRequirement;
use crate::error::{Error, Result};
use crate::scenario::ScenarioSet;

/// The four products a bid can target in a given hour.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MarketId {
    #[serde(rename = "FCRN")]
    FcrN,
    #[serde(rename = "FCRD")]
    FcrD,
    #[serde(rename = "SDCH")]
    SpotDischarge,
    #[serde(rename = "SCH")]
    SpotCharge,
}

impl MarketId {
    pub const ALL: [MarketId; 4] = [
        MarketId::FcrN,
        MarketId::FcrD,
        MarketId::SpotDischarge,
        MarketId::SpotCharge,
    ];
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> MarketId {
        Self::ALL[i]
    }

    /// Pay-as-bid availability products (FCR-N, FCR-D).
    pub fn is_frequency(self) -> bool {
        matches!(self, MarketId::FcrN | MarketId::FcrD)
    }

    /// Pay-as-clear day-ahead energy products.
    pub fn is_spot(self) -> bool {
        !self.is_frequency()
    }

    pub fn code(self) -> &'static str {
        match self {
            MarketId::FcrN => "FCRN",
            MarketId::FcrD => "FCRD",
            MarketId::SpotDischarge => "SDCH",
            MarketId::SpotCharge => "SCH",
        }
    }
}

impl fmt::Display for MarketId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for MarketId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().replace(['-', '_'], "").as_str() {
            "FCRN" | "N" => Ok(MarketId::FcrN),
            "FCRD" | "D" => Ok(MarketId::FcrD),
            "SDCH" => Ok(MarketId::SpotDischarge),
            "SCH" => Ok(MarketId::SpotCharge),
            other => Err(Error::validation(
                "market",
                "code",
                format!("unknown market {other:?} (expected FCRN, FCRD, SDCH or SCH)"),
            )),
        }
    }
}

/// Parse a comma separated market list such as `N,D,SDCH`.
pub fn parse_market_list(list: &str) -> Result<Vec<MarketId>> {
    let mut out: Vec<MarketId> = Vec::new();
    if list.trim().eq_ignore_ascii_case("none") {
        return Ok(out);
    }
    for part in list.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let m: MarketId = part.parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    out.sort();
    Ok(out)
}

/// Switches that restore literal readings of the original model where the
/// default formulation deliberately differs. All off by default.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Compat {
    /// Droop obligations drop to zero outside the ramps instead of saturating
    /// at full activation.
    pub strict_droop_bands: bool,
    /// Also force charge and net dispatch to zero when the frequency is above
    /// the upper dead-band edge of a frequency product, not only discharge.
    pub strict_dispatch_zero: bool,
    /// Declare the energy-settlement variable nonnegative.
    pub nonnegative_energy: bool,
    /// Drop the spot purchase payment for fulfilled spot-charge hours from
    /// the objective.
    pub omit_spot_charge_payment: bool,
    /// Charge both spot non-delivery penalties in every failed hour,
    /// whichever market was accepted.
    pub unconditional_spot_penalties: bool,
}

impl Compat {
    pub fn paper_literal() -> Self {
        Compat {
            strict_droop_bands: true,
            strict_dispatch_zero: true,
            nonnegative_energy: true,
            omit_spot_charge_payment: true,
            unconditional_spot_penalties: true,
        }
    }
}

/// Optional soft target on the SOC at the end of every hour but the last.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SocTarget {
    /// MWh
    pub level: f64,
    /// EUR per MWh of deviation
    pub weight: f64,
}

fn default_markets() -> Vec<MarketId> {
    MarketId::ALL.to_vec()
}

/// Battery and bidding parameters. Field names double as the JSON config keys.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BessConfig {
    /// Power offered in frequency products, MW.
    pub p_max: f64,
    /// Energy block offered in spot products, MWh.
    pub e_spot: f64,
    pub e_min: f64,
    pub e_max: f64,
    /// Initial SOC, MWh.
    pub m_0: f64,
    pub bid_min: f64,
    /// `None` resolves to twice the largest threshold price in the scenarios.
    pub bid_max: Option<f64>,
    /// Throughput wear cost, EUR/MWh.
    pub c_deg: f64,
    pub step_minutes: u32,
    #[serde(default = "default_markets")]
    pub markets: Vec<MarketId>,
    pub soc_target: Option<SocTarget>,
    pub compat: Compat,
}

impl Default for BessConfig {
    fn default() -> Self {
        BessConfig {
            p_max: 0.9,
            e_spot: 0.4,
            e_min: 0.1,
            e_max: 1.0,
            m_0: 0.5,
            bid_min: 0.0,
            bid_max: None,
            c_deg: 20.0,
            step_minutes: 1,
            markets: default_markets(),
            soc_target: None,
            compat: Compat::default(),
        }
    }
}

impl BessConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::validation("BessConfig", field, msg));
        let finite = [
            ("p_max", self.p_max),
            ("e_spot", self.e_spot),
            ("e_min", self.e_min),
            ("e_max", self.e_max),
            ("m_0", self.m_0),
            ("bid_min", self.bid_min),
            ("c_deg", self.c_deg),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return bad(name, format!("{v} is not finite"));
            }
        }
        if self.p_max <= 0.0 {
            return bad("p_max", format!("{} must be > 0", self.p_max));
        }
        if self.e_spot <= 0.0 {
            return bad("e_spot", format!("{} must be > 0", self.e_spot));
        }
        if !(0.0 <= self.e_min && self.e_min <= self.m_0 && self.m_0 <= self.e_max) {
            return bad(
                "m_0",
                format!(
                    "need 0 <= e_min <= m_0 <= e_max, got {} / {} / {}",
                    self.e_min, self.m_0, self.e_max
                ),
            );
        }
        if self.bid_min < 0.0 {
            return bad("bid_min", format!("{} must be >= 0", self.bid_min));
        }
        if let Some(bmax) = self.bid_max {
            if !bmax.is_finite() || bmax < self.bid_min {
                return bad("bid_max", format!("{bmax} must be finite and >= bid_min"));
            }
        }
        if self.c_deg < 0.0 {
            return bad("c_deg", format!("{} must be >= 0", self.c_deg));
        }
        if self.step_minutes == 0 || 60 % self.step_minutes != 0 {
            return bad(
                "step_minutes",
                format!("{} must be a positive divisor of 60", self.step_minutes),
            );
        }
        if let Some(target) = self.soc_target {
            if !(self.e_min..=self.e_max).contains(&target.level) || !(target.weight >= 0.0) {
                return bad(
                    "soc_target",
                    format!("level must lie in [e_min, e_max] and weight be >= 0, got {target:?}"),
                );
            }
        }
        Ok(())
    }

    pub fn market_enabled(&self, m: MarketId) -> bool {
        self.markets.contains(&m)
    }

    /// Upper bid-price bound, falling back to twice the largest threshold.
    pub fn resolved_bid_max(&self, scenarios: &ScenarioSet) -> f64 {
        match self.bid_max {
            Some(b) => b,
            None => (2.0 * scenarios.max_threshold()).max(self.bid_min),
        }
    }
}

/// Per-step wear cost of an accepted bid: entry `(s, t, m)` is charged when
/// the bid for `hour_of(t)` in market `m` is accepted in scenario `s`.
#[derive(Clone, Debug, PartialEq)]
pub struct DegradationSchedule {
    scenarios: usize,
    steps: usize,
    steps_per_hour: usize,
    costs: Vec<f64>,
}

impl DegradationSchedule {
    pub fn cost(&self, s: usize, t: usize, m: MarketId) -> f64 {
        self.costs[(s * self.steps + t) * MarketId::COUNT + m.index()]
    }

    /// Sum of the per-step costs over the steps of hour `h` (0-based).
    pub fn hourly(&self, s: usize, h: usize, m: MarketId) -> f64 {
        let start = h * self.steps_per_hour;
        (start..start + self.steps_per_hour)
            .map(|t| self.cost(s, t, m))
            .sum()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.scenarios, self.steps)
    }
}

/// Throughput-proportional wear: every MWh an accepted bid obliges the battery
/// to move costs `c_deg`.
pub fn degradation_costs(req: &EnergyRequirement, config: &BessConfig) -> DegradationSchedule {
    let (scenarios, steps) = req.dims();
    let mut costs = Vec::with_capacity(scenarios * steps * MarketId::COUNT);
    for s in 0..scenarios {
        for t in 0..steps {
            for m in MarketId::ALL {
                costs.push(config.c_deg * (req.discharge(s, t, m) + req.charge(s, t, m)));
            }
        }
    }
    DegradationSchedule {
        scenarios,
        steps,
        steps_per_hour: req.steps_per_hour(),
        costs,
    }
}

/// Big-M constants, one per constraint family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BigM {
    /// Bounds the availability payment `p_max * x_price`.
    pub avail: f64,
    /// Bounds spot payments `e_spot * threshold`.
    pub spot: f64,
    /// Bounds the spot-discharge non-delivery penalty `e_spot * C_up`.
    pub pen_up: f64,
    /// Bounds the spot-charge non-delivery penalty `e_spot * C_down`.
    pub pen_down: f64,
    /// Bounds `threshold - x_price` and `x_price - threshold`.
    pub price: f64,
    /// Bounds the undelivered energy of one hour.
    pub slack: f64,
}

pub fn tight_big_m(
    config: &BessConfig,
    scenarios: &ScenarioSet,
    req: &EnergyRequirement,
) -> Result<BigM> {
    if scenarios.is_empty() {
        return Err(Error::validation("ScenarioSet", "scenarios", "empty scenario set"));
    }
    let bid_max = config.resolved_bid_max(scenarios);
    let mut spot_price: f64 = 0.0;
    let mut abs_threshold: f64 = 0.0;
    let mut c_up: f64 = 0.0;
    let mut c_down: f64 = 0.0;
    for sc in scenarios.iter() {
        for h in 0..scenarios.horizon_hours() {
            for m in MarketId::ALL {
                let p = sc.prices.threshold(h, m);
                abs_threshold = abs_threshold.max(p.abs());
                if m.is_spot() {
                    spot_price = spot_price.max(p);
                }
            }
            c_up = c_up.max(sc.prices.balancing_up[h]);
            c_down = c_down.max(sc.prices.balancing_down[h]);
        }
    }
    let (n_s, _) = req.dims();
    let mut slack: f64 = 0.0;
    for s in 0..n_s {
        for h in 0..scenarios.horizon_hours() {
            let total: f64 = req
                .hour_steps(h)
                .flat_map(|t| MarketId::ALL.into_iter().map(move |m| (t, m)))
                .map(|(t, m)| req.discharge(s, t, m) + req.charge(s, t, m))
                .sum();
            slack = slack.max(total);
        }
    }
    Ok(BigM {
        avail: config.p_max * bid_max,
        spot: config.e_spot * spot_price,
        pen_up: config.e_spot * c_up,
        pen_down: config.e_spot * c_down,
        price: bid_max + abs_threshold,
        slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::droop::build_requirements;
    use crate::scenario::tests::flat_set;

    #[test]
    fn classification_is_total_and_exclusive() {
        for m in MarketId::ALL {
            assert!(m.is_frequency() ^ m.is_spot());
            assert_eq!(MarketId::from_index(m.index()), m);
            assert_eq!(m.code().parse::<MarketId>().unwrap(), m);
        }
        assert_eq!(
            parse_market_list("N, D,SDCH,n").unwrap(),
            vec![MarketId::FcrN, MarketId::FcrD, MarketId::SpotDischarge]
        );
        assert!("aFRR".parse::<MarketId>().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(BessConfig::default().validate().is_ok());
        let mut c = BessConfig {
            m_0: 1.5,
            ..BessConfig::default()
        };
        assert!(c.validate().is_err());
        c.m_0 = 0.5;
        c.step_minutes = 7;
        assert!(c.validate().is_err());
        c.step_minutes = 15;
        c.bid_max = Some(-1.0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn zero_wear_rate_gives_zero_schedule() {
        let set = flat_set(1, 2, 60, [10.0, 10.0, 50.0, 40.0]);
        let config = BessConfig {
            c_deg: 0.0,
            step_minutes: 60,
            ..BessConfig::default()
        };
        let req = build_requirements(&set, &config).unwrap();
        let deg = degradation_costs(&req, &config);
        for t in 0..2 {
            for m in MarketId::ALL {
                assert_eq!(deg.cost(0, t, m), 0.0);
            }
        }
    }

    #[test]
    fn wear_on_spot_discharge_minute() {
        let set = flat_set(1, 1, 1, [10.0, 10.0, 50.0, 40.0]);
        let config = BessConfig {
            c_deg: 50.0,
            ..BessConfig::default()
        };
        let req = build_requirements(&set, &config).unwrap();
        let deg = degradation_costs(&req, &config);
        // 50 EUR/MWh * 0.4 MWh / 60
        assert!((deg.cost(0, 0, MarketId::SpotDischarge) - 50.0 * 0.4 / 60.0).abs() < 1e-12);
        assert!((deg.cost(0, 0, MarketId::SpotDischarge) - 0.3333).abs() < 1e-4);
        // flat 50 Hz: FCR-D never activates
        assert_eq!(deg.cost(0, 0, MarketId::FcrD), 0.0);
        // linear in the wear rate
        let doubled = degradation_costs(&req, &BessConfig { c_deg: 100.0, ..config });
        for t in 0..60 {
            for m in MarketId::ALL {
                assert_eq!(doubled.cost(0, t, m), 2.0 * deg.cost(0, t, m));
            }
        }
        let hourly: f64 = (0..60).map(|t| deg.cost(0, t, MarketId::SpotCharge)).sum();
        assert_eq!(deg.hourly(0, 0, MarketId::SpotCharge), hourly);
    }

    #[test]
    fn big_m_examples() {
        let set = flat_set(1, 2, 60, [10.0, 10.0, 80.0, 30.0]);
        let config = BessConfig {
            bid_max: Some(100.0),
            step_minutes: 60,
            ..BessConfig::default()
        };
        let req = build_requirements(&set, &config).unwrap();
        let m = tight_big_m(&config, &set, &req).unwrap();
        assert!((m.avail - 90.0).abs() < 1e-12);
        assert!((m.spot - 32.0).abs() < 1e-12);
        assert!((m.price - 180.0).abs() < 1e-12);

        let zero = BessConfig {
            bid_max: Some(0.0),
            ..config
        };
        let m = tight_big_m(&zero, &set, &req).unwrap();
        assert_eq!(m.avail, 0.0);
    }
}
