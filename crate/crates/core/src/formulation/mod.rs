//! Solver-agnostic MILP for the hourly bidding problem.
//!
//! First stage: one bid market and one bid price per hour. Second stage, per
//! scenario: acceptance of the bid against the scenario threshold, per-step
//! dispatch with slack against the droop/spot obligations, SOC tracking and
//! a fulfilment flag per hour. Revenue terms that multiply a decision by a
//! binary are linearized with three-inequality Big-M envelopes.

mod export;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::Serialize;

use crate::droop::{DroopCurve, EnergyRequirement};
use crate::error::{Error, Result};
use crate::market::{tight_big_m, BessConfig, BigM, Compat, DegradationSchedule, MarketId, SocTarget};
use crate::scenario::ScenarioSet;

pub use export::{export, write_lp, write_mps, ExportFormat};

/// Names are bounded by construction; anything longer is a bug.
pub const MAX_NAME_LEN: usize = 255;

/// Variable identity: kind plus 0-based indices. `Soc { t }` is the SOC at the
/// end of step `t`; the SOC before the first step is the constant `m_0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarKind {
    Bid { h: usize, m: MarketId },
    Price { h: usize },
    Accept { s: usize, h: usize, m: MarketId },
    Soc { s: usize, t: usize },
    Discharge { s: usize, t: usize, m: MarketId },
    Charge { s: usize, t: usize, m: MarketId },
    Net { s: usize, t: usize, m: MarketId },
    DischargeSlack { s: usize, t: usize, m: MarketId },
    ChargeSlack { s: usize, t: usize, m: MarketId },
    Fulfilled { s: usize, h: usize },
    Avail { s: usize, h: usize },
    SpotDischarge { s: usize, h: usize },
    SpotCharge { s: usize, h: usize },
    WonAvail { s: usize, h: usize },
    LostAvail { s: usize, h: usize },
    WonSpotDischarge { s: usize, h: usize },
    LostSpotDischarge { s: usize, h: usize },
    LostSpotCharge { s: usize, h: usize },
    PaidSpotCharge { s: usize, h: usize },
    Energy { s: usize, h: usize },
    SocAbove { s: usize, t: usize },
    SocBelow { s: usize, t: usize },
}

impl VarKind {
    /// Short family prefix used in names and census keys.
    pub fn prefix(&self) -> &'static str {
        use VarKind::*;
        match self {
            Bid { .. } => "xbid",
            Price { .. } => "xprice",
            Accept { .. } => "xacc",
            Soc { .. } => "zsoc",
            Discharge { .. } => "zdch",
            Charge { .. } => "zch",
            Net { .. } => "znet",
            DischargeSlack { .. } => "sdch",
            ChargeSlack { .. } => "sch",
            Fulfilled { .. } => "wok",
            Avail { .. } => "wavail",
            SpotDischarge { .. } => "wspotdch",
            SpotCharge { .. } => "wspotch",
            WonAvail { .. } => "wwonavail",
            LostAvail { .. } => "wlostavail",
            WonSpotDischarge { .. } => "wwonspotdch",
            LostSpotDischarge { .. } => "wlostspotdch",
            LostSpotCharge { .. } => "wlostspotch",
            PaidSpotCharge { .. } => "wpaidspotch",
            Energy { .. } => "wenergy",
            SocAbove { .. } => "ssocp",
            SocBelow { .. } => "ssocm",
        }
    }

    /// Solver-facing name with 1-based indices, e.g. `xacc_s1_h3_FCRN`.
    pub fn name(&self) -> String {
        use VarKind::*;
        let p = self.prefix();
        match *self {
            Bid { h, m } => format!("{p}_h{}_{m}", h + 1),
            Price { h } => format!("{p}_h{}", h + 1),
            Accept { s, h, m } => format!("{p}_s{}_h{}_{m}", s + 1, h + 1),
            Soc { s, t } | SocAbove { s, t } | SocBelow { s, t } => format!("{p}_s{}_t{}", s + 1, t + 1),
            Discharge { s, t, m }
            | Charge { s, t, m }
            | Net { s, t, m }
            | DischargeSlack { s, t, m }
            | ChargeSlack { s, t, m } => format!("{p}_s{}_t{}_{m}", s + 1, t + 1),
            Fulfilled { s, h }
            | Avail { s, h }
            | SpotDischarge { s, h }
            | SpotCharge { s, h }
            | WonAvail { s, h }
            | LostAvail { s, h }
            | WonSpotDischarge { s, h }
            | LostSpotDischarge { s, h }
            | LostSpotCharge { s, h }
            | PaidSpotCharge { s, h }
            | Energy { s, h } => format!("{p}_s{}_h{}", s + 1, h + 1),
        }
    }
}

impl fmt::Display for VarKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Domain {
    Binary,
    Continuous,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub kind: VarKind,
    pub domain: Domain,
    pub lower: f64,
    pub upper: f64,
}

impl Variable {
    pub fn is_binary(&self) -> bool {
        self.domain == Domain::Binary
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

/// Constraint families, in canonical order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Family {
    OneBidPerHour,
    AcceptImpliesBid,
    ForcedAcceptance,
    AcceptanceThreshold,
    BidPriceBounds,
    DispatchSlack,
    NetDispatch,
    Soc,
    Fulfilment,
    Availability,
    SpotPayment,
    WonLost,
    EnergySettlement,
    DispatchZero,
    SocTarget,
}

impl Family {
    pub const ALL: [Family; 15] = [
        Family::OneBidPerHour,
        Family::AcceptImpliesBid,
        Family::ForcedAcceptance,
        Family::AcceptanceThreshold,
        Family::BidPriceBounds,
        Family::DispatchSlack,
        Family::NetDispatch,
        Family::Soc,
        Family::Fulfilment,
        Family::Availability,
        Family::SpotPayment,
        Family::WonLost,
        Family::EnergySettlement,
        Family::DispatchZero,
        Family::SocTarget,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Family::OneBidPerHour => "a",
            Family::AcceptImpliesBid => "b",
            Family::ForcedAcceptance => "c",
            Family::AcceptanceThreshold => "d",
            Family::BidPriceBounds => "e",
            Family::DispatchSlack => "f",
            Family::NetDispatch => "g",
            Family::Soc => "h",
            Family::Fulfilment => "i",
            Family::Availability => "j",
            Family::SpotPayment => "k",
            Family::WonLost => "l",
            Family::EnergySettlement => "m",
            Family::DispatchZero => "z",
            Family::SocTarget => "tgt",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearConstraint {
    pub name: String,
    pub family: Family,
    /// `(variable index, coefficient)`, sorted by index, no zeros.
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, a)| a * values[j]).sum()
    }

    /// Amount by which `values` violate the constraint (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// Problem dimensions `(S, H, T, M)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Dims {
    pub scenarios: usize,
    pub hours: usize,
    pub steps: usize,
    pub markets: usize,
}

impl Dims {
    pub fn steps_per_hour(&self) -> usize {
        self.steps / self.hours
    }
}

/// Data defining the bilinear products of one `(s, h)` cell, kept so a
/// solution can be checked against the exact products.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProductData {
    pub p_max: f64,
    pub e_spot: f64,
    pub spot_dch_price: f64,
    pub spot_ch_price: f64,
    pub c_up: f64,
    pub c_down: f64,
    /// Acceptance thresholds in `MarketId::ALL` order.
    pub thresholds: [f64; 4],
}

#[derive(Clone, Debug)]
pub struct MilpModel {
    pub variables: Vec<Variable>,
    pub constraints: Vec<LinearConstraint>,
    /// Maximized; one coefficient per variable.
    pub objective: Vec<f64>,
    pub dims: Dims,
    pub big_m: BigM,
    pub bid_min: f64,
    pub bid_max: f64,
    pub compat: Compat,
    /// Indexed `[s * H + h]`.
    pub products: Vec<ProductData>,
    index: HashMap<VarKind, usize>,
}

impl MilpModel {
    pub fn var(&self, kind: VarKind) -> Option<usize> {
        self.index.get(&kind).copied()
    }

    /// Index of a variable the model is known to contain.
    pub fn idx(&self, kind: VarKind) -> usize {
        self.index[&kind]
    }

    pub fn binaries(&self) -> impl Iterator<Item = usize> + '_ {
        self.variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_binary())
            .map(|(i, _)| i)
    }

    pub fn num_binaries(&self) -> usize {
        self.binaries().count()
    }

    pub fn product_data(&self, s: usize, h: usize) -> &ProductData {
        &self.products[s * self.dims.hours + h]
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().zip(values).map(|(c, v)| c * v).sum()
    }
}

struct Builder {
    variables: Vec<Variable>,
    index: HashMap<VarKind, usize>,
    objective: Vec<f64>,
    constraints: Vec<LinearConstraint>,
}

impl Builder {
    fn add_var(&mut self, kind: VarKind, domain: Domain, lower: f64, upper: f64) {
        let i = self.variables.len();
        let prev = self.index.insert(kind, i);
        debug_assert!(prev.is_none(), "duplicate variable {kind}");
        self.variables.push(Variable {
            kind,
            domain,
            lower,
            upper,
        });
        self.objective.push(0.0);
    }

    fn obj(&mut self, kind: VarKind, coef: f64) {
        let i = self.index[&kind];
        self.objective[i] += coef;
    }

    fn add(
        &mut self,
        family: Family,
        name: String,
        terms: &[(VarKind, f64)],
        sense: Sense,
        rhs: f64,
    ) -> Result<()> {
        let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
        for &(k, a) in terms {
            if !a.is_finite() {
                return Err(Error::Build {
                    family: family.code().into(),
                    message: format!("{name}: non-finite coefficient on {k}"),
                });
            }
            *merged.entry(self.index[&k]).or_insert(0.0) += a;
        }
        let terms: Vec<(usize, f64)> = merged.into_iter().filter(|&(_, a)| a != 0.0).collect();
        if terms.is_empty() || !rhs.is_finite() {
            return Err(Error::Build {
                family: family.code().into(),
                message: format!("{name}: empty row or non-finite rhs"),
            });
        }
        if name.len() > MAX_NAME_LEN {
            return Err(Error::Build {
                family: family.code().into(),
                message: format!("row name longer than {MAX_NAME_LEN} characters"),
            });
        }
        self.constraints.push(LinearConstraint {
            name,
            family,
            terms,
            sense,
            rhs,
        });
        Ok(())
    }
}

fn sh(s: usize, h: usize) -> String {
    format!("s{}_h{}", s + 1, h + 1)
}

/// Assemble the full MILP.
pub fn build_model(
    scenarios: &ScenarioSet,
    req: &EnergyRequirement,
    deg: &DegradationSchedule,
    config: &BessConfig,
) -> Result<MilpModel> {
    use VarKind::*;

    config.validate()?;
    let n_s = scenarios.len();
    let n_h = scenarios.horizon_hours();
    let n_t = scenarios.steps();
    let k = scenarios.steps_per_hour();
    if req.dims() != (n_s, n_t) || req.step_minutes() != scenarios.step_minutes() {
        return Err(Error::Build {
            family: Family::DispatchSlack.code().into(),
            message: format!(
                "requirement dims {:?} do not match scenarios ({n_s}, {n_t})",
                req.dims()
            ),
        });
    }
    if deg.dims() != (n_s, n_t) {
        return Err(Error::Build {
            family: "objective".into(),
            message: format!(
                "degradation dims {:?} do not match scenarios ({n_s}, {n_t})",
                deg.dims()
            ),
        });
    }
    if config.step_minutes != scenarios.step_minutes() {
        return Err(Error::Build {
            family: Family::Soc.code().into(),
            message: "config and scenario step lengths differ".into(),
        });
    }

    let big_m = tight_big_m(config, scenarios, req)?;
    let bid_max = config.resolved_bid_max(scenarios);
    let compat = config.compat;
    let markets = MarketId::ALL;
    let freq = [MarketId::FcrN, MarketId::FcrD];
    let inf = f64::INFINITY;

    let mut b = Builder {
        variables: Vec::new(),
        index: HashMap::new(),
        objective: Vec::new(),
        constraints: Vec::new(),
    };

    // ---- variables, canonical order --------------------------------------
    for h in 0..n_h {
        for m in markets {
            let ub = if config.market_enabled(m) { 1.0 } else { 0.0 };
            b.add_var(Bid { h, m }, Domain::Binary, 0.0, ub);
        }
    }
    for h in 0..n_h {
        b.add_var(Price { h }, Domain::Continuous, 0.0, inf);
    }
    for s in 0..n_s {
        for h in 0..n_h {
            for m in markets {
                b.add_var(Accept { s, h, m }, Domain::Binary, 0.0, 1.0);
            }
        }
    }
    for s in 0..n_s {
        for t in 0..n_t {
            b.add_var(Soc { s, t }, Domain::Continuous, config.e_min, config.e_max);
        }
    }
    type StepKind = fn(usize, usize, MarketId) -> VarKind;
    let step_kinds: [(StepKind, f64); 5] = [
        (|s, t, m| Discharge { s, t, m }, 0.0),
        (|s, t, m| Charge { s, t, m }, 0.0),
        (|s, t, m| Net { s, t, m }, -inf),
        (|s, t, m| DischargeSlack { s, t, m }, 0.0),
        (|s, t, m| ChargeSlack { s, t, m }, 0.0),
    ];
    for (make, lower) in step_kinds {
        for s in 0..n_s {
            for t in 0..n_t {
                for m in markets {
                    b.add_var(make(s, t, m), Domain::Continuous, lower, inf);
                }
            }
        }
    }
    for s in 0..n_s {
        for h in 0..n_h {
            b.add_var(Fulfilled { s, h }, Domain::Binary, 0.0, 1.0);
        }
    }
    type HourKind = fn(usize, usize) -> VarKind;
    let mut hour_kinds: Vec<HourKind> = vec![
        |s, h| Avail { s, h },
        |s, h| SpotDischarge { s, h },
        |s, h| SpotCharge { s, h },
        |s, h| WonAvail { s, h },
        |s, h| LostAvail { s, h },
        |s, h| WonSpotDischarge { s, h },
        |s, h| LostSpotDischarge { s, h },
        |s, h| LostSpotCharge { s, h },
    ];
    if !compat.omit_spot_charge_payment {
        hour_kinds.push(|s, h| PaidSpotCharge { s, h });
    }
    for make in &hour_kinds {
        for s in 0..n_s {
            for h in 0..n_h {
                b.add_var(make(s, h), Domain::Continuous, 0.0, inf);
            }
        }
    }
    let energy_lb = if compat.nonnegative_energy { 0.0 } else { -inf };
    for s in 0..n_s {
        for h in 0..n_h {
            b.add_var(Energy { s, h }, Domain::Continuous, energy_lb, inf);
        }
    }
    // SOC at the end of every hour except the last
    let target_steps: Vec<usize> = (0..n_h.saturating_sub(1)).map(|h| (h + 1) * k - 1).collect();
    let target: Option<SocTarget> = config.soc_target.filter(|t| t.weight > 0.0);
    if target.is_some() {
        for s in 0..n_s {
            for &t in &target_steps {
                b.add_var(SocAbove { s, t }, Domain::Continuous, 0.0, inf);
                b.add_var(SocBelow { s, t }, Domain::Continuous, 0.0, inf);
            }
        }
    }

    // ---- objective ---------------------------------------------------------
    for (s, sc) in scenarios.iter().enumerate() {
        let p = sc.probability;
        for h in 0..n_h {
            b.obj(WonAvail { s, h }, p);
            b.obj(WonSpotDischarge { s, h }, p);
            b.obj(LostAvail { s, h }, -p);
            b.obj(LostSpotDischarge { s, h }, -p);
            b.obj(LostSpotCharge { s, h }, -p);
            if !compat.omit_spot_charge_payment {
                b.obj(PaidSpotCharge { s, h }, -p);
            }
            b.obj(Energy { s, h }, p);
            for m in markets {
                let wear = deg.hourly(s, h, m);
                if wear != 0.0 {
                    b.obj(Accept { s, h, m }, -p * wear);
                }
            }
        }
        if let Some(tgt) = target {
            for &t in &target_steps {
                b.obj(SocAbove { s, t }, -p * tgt.weight);
                b.obj(SocBelow { s, t }, -p * tgt.weight);
            }
        }
    }

    // ---- constraints -------------------------------------------------------
    let mp = big_m.price;

    // (a)
    for h in 0..n_h {
        let terms: Vec<_> = markets.iter().map(|&m| (Bid { h, m }, 1.0)).collect();
        b.add(Family::OneBidPerHour, format!("a_h{}", h + 1), &terms, Sense::Le, 1.0)?;
    }
    // (b)
    for s in 0..n_s {
        for h in 0..n_h {
            for m in markets {
                b.add(
                    Family::AcceptImpliesBid,
                    format!("b_{}_{m}", sh(s, h)),
                    &[(Accept { s, h, m }, 1.0), (Bid { h, m }, -1.0)],
                    Sense::Le,
                    0.0,
                )?;
            }
        }
    }
    // (c)
    for (s, sc) in scenarios.iter().enumerate() {
        for h in 0..n_h {
            let mut terms = vec![(Price { h }, -1.0)];
            for m in markets {
                terms.push((Bid { h, m }, sc.prices.threshold(h, m)));
                terms.push((Accept { s, h, m }, -mp));
            }
            b.add(Family::ForcedAcceptance, format!("c_{}", sh(s, h)), &terms, Sense::Le, 0.0)?;
        }
    }
    // (d)
    for (s, sc) in scenarios.iter().enumerate() {
        for h in 0..n_h {
            for m in markets {
                b.add(
                    Family::AcceptanceThreshold,
                    format!("d_{}_{m}", sh(s, h)),
                    &[(Price { h }, 1.0), (Accept { s, h, m }, mp)],
                    Sense::Le,
                    mp + sc.prices.threshold(h, m),
                )?;
            }
        }
    }
    // (e)
    for h in 0..n_h {
        b.add(
            Family::BidPriceBounds,
            format!("e_max_h{}", h + 1),
            &[(Price { h }, 1.0)],
            Sense::Le,
            bid_max,
        )?;
        let mut terms = vec![(Price { h }, 1.0)];
        terms.extend(markets.iter().map(|&m| (Bid { h, m }, -config.bid_min)));
        b.add(Family::BidPriceBounds, format!("e_min_h{}", h + 1), &terms, Sense::Ge, 0.0)?;
    }
    // (f)
    for s in 0..n_s {
        for t in 0..n_t {
            let h = scenarios.hour_of_step(t);
            for m in markets {
                let tag = format!("s{}_t{}_{m}", s + 1, t + 1);
                b.add(
                    Family::DispatchSlack,
                    format!("f_dch_{tag}"),
                    &[
                        (Discharge { s, t, m }, 1.0),
                        (DischargeSlack { s, t, m }, 1.0),
                        (Accept { s, h, m }, -req.discharge(s, t, m)),
                    ],
                    Sense::Eq,
                    0.0,
                )?;
                b.add(
                    Family::DispatchSlack,
                    format!("f_ch_{tag}"),
                    &[
                        (Charge { s, t, m }, 1.0),
                        (ChargeSlack { s, t, m }, 1.0),
                        (Accept { s, h, m }, -req.charge(s, t, m)),
                    ],
                    Sense::Eq,
                    0.0,
                )?;
            }
        }
    }
    // (g)
    for s in 0..n_s {
        for t in 0..n_t {
            for m in markets {
                b.add(
                    Family::NetDispatch,
                    format!("g_s{}_t{}_{m}", s + 1, t + 1),
                    &[(Net { s, t, m }, 1.0), (Discharge { s, t, m }, -1.0), (Charge { s, t, m }, 1.0)],
                    Sense::Eq,
                    0.0,
                )?;
            }
        }
    }
    // (h) SOC balance; the [e_min, e_max] band sits on the variable bounds
    for s in 0..n_s {
        for t in 0..n_t {
            let mut terms = vec![(Soc { s, t }, 1.0)];
            if t > 0 {
                terms.push((Soc { s, t: t - 1 }, -1.0));
            }
            terms.extend(markets.iter().map(|&m| (Net { s, t, m }, 1.0)));
            let rhs = if t == 0 { config.m_0 } else { 0.0 };
            b.add(Family::Soc, format!("h_s{}_t{}", s + 1, t + 1), &terms, Sense::Eq, rhs)?;
        }
    }
    // (i)
    for s in 0..n_s {
        for h in 0..n_h {
            let mut terms = vec![(Fulfilled { s, h }, big_m.slack)];
            for t in h * k..(h + 1) * k {
                for m in markets {
                    terms.push((DischargeSlack { s, t, m }, 1.0));
                    terms.push((ChargeSlack { s, t, m }, 1.0));
                }
            }
            b.add(Family::Fulfilment, format!("i_{}", sh(s, h)), &terms, Sense::Le, big_m.slack)?;
        }
    }
    // (j) availability payment p_max * x_price * sum_freq x_acc
    let ma = big_m.avail;
    for s in 0..n_s {
        for h in 0..n_h {
            let tag = sh(s, h);
            let w = Avail { s, h };
            b.add(
                Family::Availability,
                format!("j1_{tag}"),
                &[(w, 1.0), (Price { h }, -config.p_max)],
                Sense::Le,
                0.0,
            )?;
            let mut terms = vec![(w, 1.0)];
            terms.extend(freq.iter().map(|&m| (Accept { s, h, m }, -ma)));
            b.add(Family::Availability, format!("j2_{tag}"), &terms, Sense::Le, 0.0)?;
            let mut terms = vec![(w, 1.0), (Price { h }, -config.p_max)];
            terms.extend(freq.iter().map(|&m| (Accept { s, h, m }, -ma)));
            b.add(Family::Availability, format!("j3_{tag}"), &terms, Sense::Ge, -ma)?;
        }
    }
    // (k) spot payments e_spot * threshold * x_acc
    let ms = big_m.spot;
    for (s, sc) in scenarios.iter().enumerate() {
        for h in 0..n_h {
            for (w, m, tag) in [
                (SpotDischarge { s, h }, MarketId::SpotDischarge, "dch"),
                (SpotCharge { s, h }, MarketId::SpotCharge, "ch"),
            ] {
                let value = config.e_spot * sc.prices.threshold(h, m);
                let name = format!("{tag}_{}", sh(s, h));
                // a negative price can never be accepted (bids are >= 0)
                b.add(Family::SpotPayment, format!("k1{name}"), &[(w, 1.0)], Sense::Le, value.max(0.0))?;
                b.add(
                    Family::SpotPayment,
                    format!("k2{name}"),
                    &[(w, 1.0), (Accept { s, h, m }, -ms)],
                    Sense::Le,
                    0.0,
                )?;
                b.add(
                    Family::SpotPayment,
                    format!("k3{name}"),
                    &[(w, 1.0), (Accept { s, h, m }, -ms)],
                    Sense::Ge,
                    value - ms,
                )?;
            }
        }
    }
    // (l) won/lost products with the fulfilment flag
    for (s, sc) in scenarios.iter().enumerate() {
        for h in 0..n_h {
            let ok = Fulfilled { s, h };
            let tag = sh(s, h);
            // won = base * ok
            let won = |b: &mut Builder, won: VarKind, base: VarKind, m: f64, name: &str| -> Result<()> {
                b.add(Family::WonLost, format!("l_{name}1_{tag}"), &[(won, 1.0), (base, -1.0)], Sense::Le, 0.0)?;
                b.add(Family::WonLost, format!("l_{name}2_{tag}"), &[(won, 1.0), (ok, -m)], Sense::Le, 0.0)?;
                b.add(
                    Family::WonLost,
                    format!("l_{name}3_{tag}"),
                    &[(won, 1.0), (base, -1.0), (ok, -m)],
                    Sense::Ge,
                    -m,
                )
            };
            won(&mut b, WonAvail { s, h }, Avail { s, h }, ma, "wonavail")?;
            won(&mut b, WonSpotDischarge { s, h }, SpotDischarge { s, h }, ms, "wonspotdch")?;
            if !compat.omit_spot_charge_payment {
                won(&mut b, PaidSpotCharge { s, h }, SpotCharge { s, h }, ms, "paidspotch")?;
            }

            // lost = base * (1 - ok), with `base` a linear expression
            let lost = |b: &mut Builder, lost: VarKind, base: &[(VarKind, f64)], base_rhs: f64, m: f64, name: &str| -> Result<()> {
                let mut t1 = vec![(lost, 1.0)];
                t1.extend(base.iter().map(|&(k, a)| (k, -a)));
                b.add(Family::WonLost, format!("l_{name}1_{tag}"), &t1, Sense::Le, base_rhs)?;
                b.add(Family::WonLost, format!("l_{name}2_{tag}"), &[(lost, 1.0), (ok, m)], Sense::Le, m)?;
                let mut t3 = t1.clone();
                t3.push((ok, m));
                b.add(Family::WonLost, format!("l_{name}3_{tag}"), &t3, Sense::Ge, base_rhs)
            };
            lost(&mut b, LostAvail { s, h }, &[(Avail { s, h }, 1.0)], 0.0, ma, "lostavail")?;
            let pen_up = sc.prices.balancing_up[h] * config.e_spot;
            let pen_down = sc.prices.balancing_down[h] * config.e_spot;
            if compat.unconditional_spot_penalties {
                lost(&mut b, LostSpotDischarge { s, h }, &[], pen_up, big_m.pen_up, "lostspotdch")?;
                lost(&mut b, LostSpotCharge { s, h }, &[], pen_down, big_m.pen_down, "lostspotch")?;
            } else {
                lost(
                    &mut b,
                    LostSpotDischarge { s, h },
                    &[(Accept { s, h, m: MarketId::SpotDischarge }, pen_up)],
                    0.0,
                    big_m.pen_up,
                    "lostspotdch",
                )?;
                lost(
                    &mut b,
                    LostSpotCharge { s, h },
                    &[(Accept { s, h, m: MarketId::SpotCharge }, pen_down)],
                    0.0,
                    big_m.pen_down,
                    "lostspotch",
                )?;
            }
        }
    }
    // (m) activated energy of the frequency products at balancing prices
    for (s, sc) in scenarios.iter().enumerate() {
        for h in 0..n_h {
            let up = sc.prices.balancing_up[h];
            let down = sc.prices.balancing_down[h];
            let mut terms = vec![(Energy { s, h }, 1.0)];
            for t in h * k..(h + 1) * k {
                for m in freq {
                    terms.push((Discharge { s, t, m }, -up));
                    terms.push((Charge { s, t, m }, down));
                }
            }
            b.add(Family::EnergySettlement, format!("m_{}", sh(s, h)), &terms, Sense::Eq, 0.0)?;
        }
    }
    // no upward response while the frequency sits above the discharge ramp
    for (s, sc) in scenarios.iter().enumerate() {
        for (t, &f) in sc.frequency.samples.iter().enumerate() {
            for m in freq {
                let curve = DroopCurve::for_market(m, config.p_max).expect("frequency market");
                if f > curve.low_zero {
                    let tag = format!("s{}_t{}_{m}", s + 1, t + 1);
                    b.add(Family::DispatchZero, format!("z_dch_{tag}"), &[(Discharge { s, t, m }, 1.0)], Sense::Eq, 0.0)?;
                    if compat.strict_dispatch_zero {
                        b.add(Family::DispatchZero, format!("z_ch_{tag}"), &[(Charge { s, t, m }, 1.0)], Sense::Eq, 0.0)?;
                        b.add(Family::DispatchZero, format!("z_net_{tag}"), &[(Net { s, t, m }, 1.0)], Sense::Eq, 0.0)?;
                    }
                }
            }
        }
    }
    if let Some(tgt) = target {
        for s in 0..n_s {
            for &t in &target_steps {
                b.add(
                    Family::SocTarget,
                    format!("tgt_s{}_t{}", s + 1, t + 1),
                    &[(Soc { s, t }, 1.0), (SocAbove { s, t }, -1.0), (SocBelow { s, t }, 1.0)],
                    Sense::Eq,
                    tgt.level,
                )?;
            }
        }
    }

    let products = scenarios
        .iter()
        .flat_map(|sc| {
            (0..n_h).map(move |h| ProductData {
                p_max: config.p_max,
                e_spot: config.e_spot,
                spot_dch_price: sc.prices.threshold(h, MarketId::SpotDischarge),
                spot_ch_price: sc.prices.threshold(h, MarketId::SpotCharge),
                c_up: sc.prices.balancing_up[h],
                c_down: sc.prices.balancing_down[h],
                thresholds: MarketId::ALL.map(|m| sc.prices.threshold(h, m)),
            })
        })
        .collect();

    Ok(MilpModel {
        variables: b.variables,
        constraints: b.constraints,
        objective: b.objective,
        dims: Dims {
            scenarios: n_s,
            hours: n_h,
            steps: n_t,
            markets: MarketId::COUNT,
        },
        big_m,
        bid_min: config.bid_min,
        bid_max,
        compat,
        products,
        index: b.index,
    })
}

/// Per-family variable and constraint counts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Census {
    pub variables: BTreeMap<String, usize>,
    pub constraints: BTreeMap<String, usize>,
    pub total_variables: usize,
    pub total_constraints: usize,
    pub binaries: usize,
}

pub fn census(model: &MilpModel) -> Census {
    let mut variables = BTreeMap::new();
    for v in &model.variables {
        *variables.entry(v.kind.prefix().to_string()).or_insert(0) += 1;
    }
    let mut constraints = BTreeMap::new();
    for c in &model.constraints {
        *constraints.entry(c.family.code().to_string()).or_insert(0) += 1;
    }
    Census {
        variables,
        constraints,
        total_variables: model.variables.len(),
        total_constraints: model.constraints.len(),
        binaries: model.num_binaries(),
    }
}

/// JSON-friendly overview of a built model.
#[derive(Clone, Debug, Serialize)]
pub struct ModelSummary {
    pub dims: Dims,
    pub census: Census,
    pub big_m: BigM,
    pub bid_min: f64,
    pub bid_max: f64,
    pub compat: Compat,
}

pub fn summary(model: &MilpModel) -> ModelSummary {
    ModelSummary {
        dims: model.dims,
        census: census(model),
        big_m: model.big_m,
        bid_min: model.bid_min,
        bid_max: model.bid_max,
        compat: model.compat,
    }
}
