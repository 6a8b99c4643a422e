//! Droop control service: maps grid frequency to the energy a frequency
//! product obliges the battery to deliver (discharge) or absorb (charge) in
//! one step, plus the fixed blocks of the spot products.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::market::{BessConfig, MarketId};
use crate::scenario::ScenarioSet;

/// Piecewise-linear droop curve through `(low_full, p_max)`, `(low_zero, 0)`,
/// `(high_zero, 0)`, `(high_full, -p_max)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DroopCurve {
    /// Hz at and below which discharge is at full power.
    pub low_full: f64,
    /// Hz where the discharge ramp reaches zero.
    pub low_zero: f64,
    /// Hz where the charge ramp starts.
    pub high_zero: f64,
    /// Hz at and above which charge is at full power.
    pub high_full: f64,
    /// MW
    pub p_max: f64,
    /// FCR-N responds both ways; FCR-D only upwards.
    pub symmetric: bool,
}

/// How obligations behave beyond the outer breakpoints.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BandMode {
    /// Saturate at full power below `low_full` / above `high_full`.
    #[default]
    FullActivation,
    /// Zero outside the ramps.
    Strict,
}

impl DroopCurve {
    pub fn fcr_n(p_max: f64) -> Self {
        DroopCurve {
            low_full: 49.9,
            low_zero: 50.0,
            high_zero: 50.0,
            high_full: 50.1,
            p_max,
            symmetric: true,
        }
    }

    pub fn fcr_d(p_max: f64) -> Self {
        DroopCurve {
            low_full: 49.5,
            low_zero: 49.9,
            high_zero: 50.1,
            high_full: 50.5,
            p_max,
            symmetric: false,
        }
    }

    pub fn for_market(m: MarketId, p_max: f64) -> Option<Self> {
        match m {
            MarketId::FcrN => Some(Self::fcr_n(p_max)),
            MarketId::FcrD => Some(Self::fcr_d(p_max)),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ordered = self.low_full <= self.low_zero
            && self.low_zero <= self.high_zero
            && self.high_zero <= self.high_full
            && self.low_full < self.high_full;
        if !ordered {
            return Err(Error::validation(
                "DroopCurve",
                "breakpoints",
                format!(
                    "need {} <= {} <= {} <= {} with a non-empty band",
                    self.low_full, self.low_zero, self.high_zero, self.high_full
                ),
            ));
        }
        if !(self.p_max > 0.0 && self.p_max.is_finite()) {
            return Err(Error::validation("DroopCurve", "p_max", format!("{} must be > 0", self.p_max)));
        }
        Ok(())
    }

    /// Power (MW) delivered upwards at frequency `f`.
    fn discharge_power(&self, f: f64, mode: BandMode) -> f64 {
        if f < self.low_full {
            match mode {
                BandMode::FullActivation => self.p_max,
                BandMode::Strict => 0.0,
            }
        } else if f <= self.low_zero {
            if self.low_zero == self.low_full {
                self.p_max
            } else {
                self.p_max * (self.low_zero - f) / (self.low_zero - self.low_full)
            }
        } else {
            0.0
        }
    }

    /// Power (MW) absorbed at frequency `f`.
    fn charge_power(&self, f: f64, mode: BandMode) -> f64 {
        if !self.symmetric || f < self.high_zero {
            0.0
        } else if f <= self.high_full {
            if self.high_full == self.high_zero {
                self.p_max
            } else {
                self.p_max * (f - self.high_zero) / (self.high_full - self.high_zero)
            }
        } else {
            match mode {
                BandMode::FullActivation => self.p_max,
                BandMode::Strict => 0.0,
            }
        }
    }
}

/// Energy (MWh) to discharge and charge during one step at frequency `f`.
pub fn fcr_requirement(f: f64, curve: &DroopCurve, step_minutes: u32, mode: BandMode) -> (f64, f64) {
    let hours = step_minutes as f64 / 60.0;
    let dch = curve.discharge_power(f, mode) * hours;
    let ch = curve.charge_power(f, mode) * hours;
    // the ramps only touch at a zero-width dead band, where both are zero
    if dch > 0.0 {
        (dch, 0.0)
    } else {
        (dch, ch)
    }
}

/// Fixed spot block spread evenly over the steps of the hour.
pub fn spot_requirement(market: MarketId, e_spot: f64, step_minutes: u32) -> (f64, f64) {
    let e = e_spot * step_minutes as f64 / 60.0;
    match market {
        MarketId::SpotDischarge => (e, 0.0),
        MarketId::SpotCharge => (0.0, e),
        _ => (0.0, 0.0),
    }
}

/// Per-step obligations `E_dch[s][t][m]` and `E_ch[s][t][m]`.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyRequirement {
    scenarios: usize,
    steps: usize,
    step_minutes: u32,
    discharge: Vec<f64>,
    charge: Vec<f64>,
}

impl EnergyRequirement {
    fn idx(&self, s: usize, t: usize, m: MarketId) -> usize {
        (s * self.steps + t) * MarketId::COUNT + m.index()
    }

    pub fn discharge(&self, s: usize, t: usize, m: MarketId) -> f64 {
        self.discharge[self.idx(s, t, m)]
    }

    pub fn charge(&self, s: usize, t: usize, m: MarketId) -> f64 {
        self.charge[self.idx(s, t, m)]
    }

    /// `(scenarios, steps)`
    pub fn dims(&self) -> (usize, usize) {
        (self.scenarios, self.steps)
    }

    pub fn step_minutes(&self) -> u32 {
        self.step_minutes
    }

    pub fn steps_per_hour(&self) -> usize {
        60 / self.step_minutes as usize
    }

    /// 0-based steps of 0-based hour `h`.
    pub fn hour_steps(&self, h: usize) -> std::ops::Range<usize> {
        let k = self.steps_per_hour();
        h * k..(h + 1) * k
    }

    /// Write `scenario_id,minute,market,e_dch_mwh,e_ch_mwh`.
    pub fn write_csv(&self, scenarios: &ScenarioSet, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "scenario_id,minute,market,e_dch_mwh,e_ch_mwh").map_err(io)?;
        for (s, sc) in scenarios.iter().enumerate() {
            for t in 0..self.steps {
                for m in MarketId::ALL {
                    writeln!(
                        w,
                        "{},{},{},{},{}",
                        sc.id,
                        t * self.step_minutes as usize + 1,
                        m,
                        self.discharge(s, t, m),
                        self.charge(s, t, m)
                    )
                    .map_err(io)?;
                }
            }
        }
        w.flush().map_err(io)
    }
}

pub fn band_mode(config: &BessConfig) -> BandMode {
    if config.compat.strict_droop_bands {
        BandMode::Strict
    } else {
        BandMode::FullActivation
    }
}

pub fn build_requirements(scenarios: &ScenarioSet, config: &BessConfig) -> Result<EnergyRequirement> {
    config.validate()?;
    if config.step_minutes != scenarios.step_minutes() {
        return Err(Error::validation(
            "BessConfig",
            "step_minutes",
            format!(
                "{} differs from the scenarios' {} min step",
                config.step_minutes,
                scenarios.step_minutes()
            ),
        ));
    }
    let step = scenarios.step_minutes();
    let steps = scenarios.steps();
    let mode = band_mode(config);
    let curves: Vec<(MarketId, DroopCurve)> = MarketId::ALL
        .into_iter()
        .filter_map(|m| DroopCurve::for_market(m, config.p_max).map(|c| (m, c)))
        .collect();
    for (_, c) in &curves {
        c.validate()?;
    }

    let len = scenarios.len() * steps * MarketId::COUNT;
    let mut req = EnergyRequirement {
        scenarios: scenarios.len(),
        steps,
        step_minutes: step,
        discharge: vec![0.0; len],
        charge: vec![0.0; len],
    };
    for (s, sc) in scenarios.iter().enumerate() {
        for (t, &f) in sc.frequency.samples.iter().enumerate() {
            for &(m, curve) in &curves {
                let (d, c) = fcr_requirement(f, &curve, step, mode);
                let i = req.idx(s, t, m);
                req.discharge[i] = d;
                req.charge[i] = c;
            }
            for m in [MarketId::SpotDischarge, MarketId::SpotCharge] {
                let (d, c) = spot_requirement(m, config.e_spot, step);
                let i = req.idx(s, t, m);
                req.discharge[i] = d;
                req.charge[i] = c;
            }
        }
    }
    Ok(req)
}
