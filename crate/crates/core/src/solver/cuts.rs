//! Valid inequalities that tighten the LP relaxation.
//!
//! Every row here holds at each integer-feasible point of the model, so the
//! set of MILP solutions and the optimum are unchanged; only the relaxation
//! bound improves. The rows are added inside the solver and never exported.
//! Most replace a global big-M with the exact per-cell bound.

use crate::formulation::{Family, LinearConstraint, MilpModel, Sense, VarKind};
use crate::market::MarketId;

struct Rows<'a> {
    model: &'a MilpModel,
    out: Vec<LinearConstraint>,
}

impl Rows<'_> {
    fn push(&mut self, family: Family, name: String, terms: &[(VarKind, f64)], sense: Sense, rhs: f64) {
        let mut t: Vec<(usize, f64)> = terms
            .iter()
            .filter(|(_, a)| *a != 0.0)
            .filter_map(|&(k, a)| self.model.var(k).map(|j| (j, a)))
            .collect();
        if t.len() != terms.iter().filter(|(_, a)| *a != 0.0).count() {
            // a referenced variable is absent from this model variant
            return;
        }
        t.sort_by_key(|&(j, _)| j);
        self.out.push(LinearConstraint {
            name,
            family,
            terms: t,
            sense,
            rhs,
        });
    }
}

/// Strengthening rows for `model`.
pub(crate) fn strengthen(model: &MilpModel) -> Vec<LinearConstraint> {
    use VarKind::*;
    let dims = model.dims;
    let k = dims.steps_per_hour();
    let freq = [MarketId::FcrN, MarketId::FcrD];
    let mut rows = Rows {
        model,
        out: Vec::new(),
    };

    // per-step requirement read back from the dispatch rows
    let mut req_dch = vec![0.0; dims.scenarios * dims.steps * MarketId::COUNT];
    let mut req_ch = req_dch.clone();
    for c in model.constraints.iter().filter(|c| c.family == Family::DispatchSlack) {
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
        if let Some((dch, s, t, m)) = target {
            let i = (s * dims.steps + t) * MarketId::COUNT + m.index();
            if dch {
                req_dch[i] = r;
            } else {
                req_ch[i] = r;
            }
        }
    }

    for s in 0..dims.scenarios {
        for h in 0..dims.hours {
            let d = *model.product_data(s, h);
            let tag = format!("s{}_h{}", s + 1, h + 1);
            let ok = Fulfilled { s, h };
            let thr = |m: MarketId| d.thresholds[m.index()];

            // acceptance rows with per-cell big-M
            for m in MarketId::ALL {
                let md = model.bid_max - thr(m);
                if md > 0.0 && md < model.big_m.price {
                    rows.push(
                        Family::AcceptanceThreshold,
                        format!("cut_d_{tag}_{m}"),
                        &[(Price { h }, 1.0), (Accept { s, h, m }, md)],
                        Sense::Le,
                        thr(m) + md,
                    );
                }
            }
            let top = MarketId::ALL.iter().map(|&m| thr(m)).fold(f64::NEG_INFINITY, f64::max);
            let mc = (top - model.bid_min).max(0.0);
            if mc < model.big_m.price {
                let mut terms: Vec<(VarKind, f64)> = vec![(Price { h }, -1.0)];
                for m in MarketId::ALL {
                    terms.push((Bid { h, m }, thr(m)));
                    terms.push((Accept { s, h, m }, -mc));
                }
                rows.push(Family::ForcedAcceptance, format!("cut_c_{tag}"), &terms, Sense::Le, 0.0);
            }

            // availability is paid at most at the accepted threshold
            let mut terms = vec![(Avail { s, h }, 1.0)];
            terms.extend(freq.iter().map(|&m| (Accept { s, h, m }, -d.p_max * thr(m))));
            rows.push(Family::Availability, format!("cut_j_{tag}"), &terms, Sense::Le, 0.0);

            let v_dch = (d.e_spot * d.spot_dch_price).max(0.0);
            let v_ch = d.e_spot * d.spot_ch_price;
            let u_ch = v_ch.max(0.0);
            let sdch = Accept { s, h, m: MarketId::SpotDischarge };
            let sch = Accept { s, h, m: MarketId::SpotCharge };
            rows.push(
                Family::SpotPayment,
                format!("cut_k_dch_{tag}"),
                &[(SpotDischarge { s, h }, 1.0), (sdch, -v_dch)],
                Sense::Le,
                0.0,
            );
            rows.push(
                Family::SpotPayment,
                format!("cut_k_ch_up_{tag}"),
                &[(SpotCharge { s, h }, 1.0), (sch, -u_ch)],
                Sense::Le,
                0.0,
            );
            rows.push(
                Family::SpotPayment,
                format!("cut_k_ch_lo_{tag}"),
                &[(SpotCharge { s, h }, 1.0), (sch, -v_ch)],
                Sense::Ge,
                0.0,
            );

            // won/lost products with per-cell bounds on the base
            let u_avail = d.p_max * freq.iter().map(|&m| thr(m)).fold(0.0, f64::max);
            rows.push(
                Family::WonLost,
                format!("cut_l_wonavail_{tag}"),
                &[(WonAvail { s, h }, 1.0), (ok, -u_avail)],
                Sense::Le,
                0.0,
            );
            rows.push(
                Family::WonLost,
                format!("cut_l_lostavail_{tag}"),
                &[(LostAvail { s, h }, 1.0), (Avail { s, h }, -1.0), (ok, u_avail)],
                Sense::Ge,
                0.0,
            );
            rows.push(
                Family::WonLost,
                format!("cut_l_wonspotdch_{tag}"),
                &[(WonSpotDischarge { s, h }, 1.0), (ok, -v_dch)],
                Sense::Le,
                0.0,
            );
            if !model.compat.omit_spot_charge_payment {
                rows.push(
                    Family::WonLost,
                    format!("cut_l_paidspotch1_{tag}"),
                    &[(PaidSpotCharge { s, h }, 1.0), (ok, -u_ch)],
                    Sense::Le,
                    0.0,
                );
                rows.push(
                    Family::WonLost,
                    format!("cut_l_paidspotch2_{tag}"),
                    &[(PaidSpotCharge { s, h }, 1.0), (SpotCharge { s, h }, -1.0), (ok, -u_ch)],
                    Sense::Ge,
                    -u_ch,
                );
            }
            let pen_up = d.c_up * d.e_spot;
            let pen_down = d.c_down * d.e_spot;
            for (lost, acc, pen, name) in [
                (LostSpotDischarge { s, h }, sdch, pen_up, "lostspotdch"),
                (LostSpotCharge { s, h }, sch, pen_down, "lostspotch"),
            ] {
                if pen <= 0.0 {
                    continue;
                }
                let row = if model.compat.unconditional_spot_penalties {
                    vec![(lost, 1.0), (ok, pen)]
                } else {
                    vec![(lost, 1.0), (acc, -pen), (ok, pen)]
                };
                let rhs = if model.compat.unconditional_spot_penalties { pen } else { 0.0 };
                rows.push(Family::WonLost, format!("cut_l_{name}_{tag}"), &row, Sense::Ge, rhs);
            }

            // any shortfall in the hour rules out fulfilment
            for t in h * k..(h + 1) * k {
                for m in MarketId::ALL {
                    let i = (s * dims.steps + t) * MarketId::COUNT + m.index();
                    for (slack, r) in [
                        (DischargeSlack { s, t, m }, req_dch[i]),
                        (ChargeSlack { s, t, m }, req_ch[i]),
                    ] {
                        if r > 0.0 {
                            rows.push(
                                Family::Fulfilment,
                                format!("cut_i_{slack}"),
                                &[(slack, 1.0), (ok, r)],
                                Sense::Le,
                                r,
                            );
                        }
                    }
                }
            }
        }
    }
    rows.out
}
