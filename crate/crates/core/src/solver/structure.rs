//! Per-scenario data read back from a built model, for the solver's
//! decomposition and strengthening rows.
//!
//! Everything is taken from the model itself (rows, bounds, objective and
//! product data) so the solver follows the model it is given; the final
//! solution is re-priced by the model, which catches any misreading.

use crate::formulation::{Family, MilpModel, VarKind};
use crate::market::{Compat, MarketId};

const M: usize = MarketId::COUNT;

#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct StepData {
    pub dch: [f64; M],
    pub ch: [f64; M],
    pub dch_blocked: [bool; M],
    pub ch_blocked: [bool; M],
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct HourData {
    pub thresholds: [f64; M],
    pub wear: [f64; M],
    pub up: f64,
    pub down: f64,
    /// `(level, weight)` of the SOC target at the end of this hour.
    pub target: Option<(f64, f64)>,
}

#[derive(Clone, Debug)]
pub(crate) struct Structure {
    pub scenarios: usize,
    pub hours: usize,
    pub steps_per_hour: usize,
    pub prob: Vec<f64>,
    pub m0: Vec<f64>,
    pub p_max: f64,
    pub e_spot: f64,
    pub bid_min: f64,
    pub bid_max: f64,
    pub compat: Compat,
    /// `[h][m]`.
    pub enabled: Vec<[bool; M]>,
    /// `[s * T + t]`.
    pub steps: Vec<StepData>,
    /// `[s * H + h]`.
    pub hours_data: Vec<HourData>,
}

impl Structure {
    pub fn step(&self, s: usize, t: usize) -> &StepData {
        &self.steps[s * self.hours * self.steps_per_hour + t]
    }

    pub fn hour(&self, s: usize, h: usize) -> &HourData {
        &self.hours_data[s * self.hours + h]
    }

    /// `None` when the model is outside what the decomposition handles.
    pub fn extract(model: &MilpModel) -> Option<Structure> {
        use VarKind::*;
        let d = model.dims;
        let (n_s, n_h, n_t) = (d.scenarios, d.hours, d.steps);
        if n_s == 0 || n_h == 0 || n_t % n_h != 0 {
            return None;
        }
        let var = |k: VarKind| model.var(k);
        let obj = |k: VarKind| var(k).map_or(0.0, |j| model.objective[j]);

        let mut prob = Vec::with_capacity(n_s);
        for s in 0..n_s {
            let j = var(Energy { s, h: 0 })?;
            if model.variables[j].lower > f64::NEG_INFINITY {
                return None;
            }
            let p = model.objective[j];
            if p <= 0.0 {
                return None;
            }
            prob.push(p);
        }
        let enabled = (0..n_h)
            .map(|h| MarketId::ALL.map(|m| var(Bid { h, m }).is_some_and(|j| model.variables[j].upper > 0.5)))
            .collect();

        let mut steps = vec![StepData::default(); n_s * n_t];
        for s in 0..n_s {
            for t in 0..n_t {
                let v = &model.variables[var(Soc { s, t })?];
                let st = &mut steps[s * n_t + t];
                st.lo = v.lower;
                st.hi = v.upper;
            }
        }
        let mut m0 = vec![f64::NAN; n_s];
        let mut hours_data = vec![HourData::default(); n_s * n_h];
        for s in 0..n_s {
            for h in 0..n_h {
                let pd = model.product_data(s, h);
                let hd = &mut hours_data[s * n_h + h];
                hd.thresholds = pd.thresholds;
                hd.up = pd.c_up;
                hd.down = pd.c_down;
                for m in MarketId::ALL {
                    hd.wear[m.index()] = -obj(Accept { s, h, m }) / prob[s];
                }
            }
        }

        for c in &model.constraints {
            match c.family {
                Family::DispatchSlack => {
                    let mut target = None;
                    let mut r = 0.0;
                    for &(j, a) in &c.terms {
                        match model.variables[j].kind {
                            DischargeSlack { s, t, m } => target = Some((true, s, t, m)),
                            ChargeSlack { s, t, m } => target = Some((false, s, t, m)),
                            Accept { .. } => r = -a,
                            _ => {}
                        }
                    }
                    let (dch, s, t, m) = target?;
                    let st = &mut steps[s * n_t + t];
                    if dch {
                        st.dch[m.index()] = r;
                    } else {
                        st.ch[m.index()] = r;
                    }
                }
                Family::DispatchZero => {
                    if let [(j, _)] = c.terms[..] {
                        match model.variables[j].kind {
                            Discharge { s, t, m } => steps[s * n_t + t].dch_blocked[m.index()] = true,
                            Charge { s, t, m } => steps[s * n_t + t].ch_blocked[m.index()] = true,
                            _ => {}
                        }
                    }
                }
                Family::Soc => {
                    let socs: Vec<(usize, usize)> = c
                        .terms
                        .iter()
                        .filter_map(|&(j, _)| match model.variables[j].kind {
                            Soc { s, t } => Some((s, t)),
                            _ => None,
                        })
                        .collect();
                    if let [(s, 0)] = socs[..] {
                        m0[s] = c.rhs;
                    }
                }
                Family::SocTarget => {
                    let (s, t) = c.terms.iter().find_map(|&(j, _)| match model.variables[j].kind {
                        Soc { s, t } => Some((s, t)),
                        _ => None,
                    })?;
                    let above = -obj(SocAbove { s, t }) / prob[s];
                    let below = -obj(SocBelow { s, t }) / prob[s];
                    if (above - below).abs() > 1e-12 || (t + 1) % (n_t / n_h) != 0 {
                        return None;
                    }
                    hours_data[s * n_h + (t + 1) / (n_t / n_h) - 1].target = Some((c.rhs, above));
                }
                _ => {}
            }
        }
        if m0.iter().any(|x| x.is_nan()) {
            return None;
        }
        let pd = model.product_data(0, 0);
        Some(Structure {
            scenarios: n_s,
            hours: n_h,
            steps_per_hour: n_t / n_h,
            prob,
            m0,
            p_max: pd.p_max,
            e_spot: pd.e_spot,
            bid_min: model.bid_min,
            bid_max: model.bid_max,
            compat: model.compat,
            enabled,
            steps,
            hours_data,
        })
    }
}
