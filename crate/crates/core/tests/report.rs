mod common;

use std::fs;
use std::time::Duration;

use bessplan::formulation::{MilpModel, VarKind};
use bessplan::report::{emit, settle, SettlementReport};
use bessplan::scenario::{synthesize_scenarios, SynthParams};
use bessplan::solver::{model_bounds, solve_bb, solve_relaxation, Solution, SolverOptions, Status};
use bessplan::{Error, MarketId, ScenarioSet};
use common::{config, constant_scenario, random_instance, single, Instance};

fn solve(inst: &Instance) -> (Solution, SettlementReport) {
    let sol = solve_bb(&inst.model(), &SolverOptions::default()).unwrap();
    let rep = settle(&sol, &inst.scenarios, &inst.req, &inst.deg, &inst.config).unwrap();
    (sol, rep)
}

/// Complete a fixed assignment of some binaries through the LP.
fn forced(model: &MilpModel, fixed: &[(VarKind, f64)]) -> Solution {
    let (mut lo, mut hi) = model_bounds(model);
    for &(kind, v) in fixed {
        let j = model.idx(kind);
        lo[j] = v;
        hi[j] = v;
    }
    let point = solve_relaxation(model, &lo, &hi, None, true).unwrap().expect("forced point feasible");
    Solution {
        values: model.variables.iter().zip(&point.values).map(|(v, &x)| (v.kind, x)).collect(),
        objective: point.objective,
        status: Status::Optimal,
        gap: 0.0,
        bound: point.objective,
        node_count: 0,
        wall_time: Duration::ZERO,
        dims: model.dims,
    }
}

#[test]
fn fulfilled_fcr_n_hour_at_ten() {
    let mut cfg = config(60);
    cfg.c_deg = 0.0;
    let inst = Instance::new(single(1, 60, 50.0, [10.0, 0.0, 0.0, 0.0]), cfg);
    let (_, rep) = solve(&inst);
    let h = &rep.hours[0];
    assert_eq!(h.market, Some(MarketId::FcrN));
    assert!(h.accepted && h.fulfilled);
    assert!((h.availability_won - 9.0).abs() < 1e-9, "{}", h.availability_won);
    assert_eq!(h.availability_lost, 0.0);
}

#[test]
fn failed_spot_discharge_pays_full_block_penalty() {
    // empty battery: the accepted discharge block cannot be delivered
    let mut cfg = config(60);
    cfg.m_0 = cfg.e_min;
    let set = ScenarioSet::new(vec![constant_scenario(1, 60, 50.0, [0.0, 0.0, 50.0, 0.0], 60.0, 20.0)]).unwrap();
    let inst = Instance::new(set, cfg);
    let model = inst.model();
    let sd = MarketId::SpotDischarge;
    let mut fixed = vec![
        (VarKind::Price { h: 0 }, 50.0),
        (VarKind::Fulfilled { s: 0, h: 0 }, 0.0),
    ];
    for m in MarketId::ALL {
        let on = if m == sd { 1.0 } else { 0.0 };
        fixed.push((VarKind::Bid { h: 0, m }, on));
        fixed.push((VarKind::Accept { s: 0, h: 0, m }, on));
    }
    let sol = forced(&model, &fixed);
    let rep = settle(&sol, &inst.scenarios, &inst.req, &inst.deg, &inst.config).unwrap();
    let h = &rep.hours[0];
    assert!(h.accepted && !h.fulfilled);
    assert!((h.spot_dch_penalty - 24.0).abs() < 1e-9, "{}", h.spot_dch_penalty);
    assert_eq!(h.spot_dch_won, 0.0);
    assert!((rep.expected_total - sol.objective).abs() < 1e-6);
    assert!(rep.expected_total < 0.0);
}

#[test]
fn twenty_two_of_twenty_four_hours() {
    let mut cfg = config(60);
    cfg.c_deg = 0.0;
    cfg.bid_min = 1.0;
    cfg.markets = vec![MarketId::FcrN];
    let mut sc = constant_scenario(24, 60, 50.0, [12.0, 0.0, 0.0, 0.0], 60.0, 20.0);
    sc.prices.thresholds[4][0] = 0.0;
    sc.prices.thresholds[17][0] = 0.0;
    let inst = Instance::new(ScenarioSet::new(vec![sc]).unwrap(), cfg);
    let (_, rep) = solve(&inst);
    let p = rep.participation(0, MarketId::FcrN);
    assert!((p.pct_hours_accepted - 2200.0 / 24.0).abs() < 1e-9, "{}", p.pct_hours_accepted);
    assert!(p.pct_hours_accepted <= p.pct_hours_bid);

    let dir = tempfile::tempdir().unwrap();
    emit(&rep, dir.path()).unwrap();
    let text = fs::read_to_string(dir.path().join("participation.csv")).unwrap();
    assert!(text.lines().any(|l| l.starts_with("FCRN,s1,") && l.ends_with(",91.7")), "{text}");
}

#[test]
fn no_bid_reports_zeros() {
    let mut cfg = config(60);
    cfg.c_deg = 20.0;
    let set = ScenarioSet::new(vec![constant_scenario(3, 60, 49.95, [0.0; 4], 0.0, 0.0)]).unwrap();
    let inst = Instance::new(set, cfg);
    let (sol, rep) = solve(&inst);
    assert_eq!(sol.objective, 0.0);
    assert!(rep.participation.iter().all(|p| p.pct_hours_bid == 0.0 && p.pct_hours_accepted == 0.0));
    assert!(rep.hours.iter().all(|h| h.net() == 0.0 && h.market.is_none()));
    assert_eq!(rep.scenarios[0].pct_idle, 100.0);

    let dir = tempfile::tempdir().unwrap();
    emit(&rep, dir.path()).unwrap();
    let mut rdr = csv::Reader::from_path(dir.path().join("earnings.csv")).unwrap();
    for row in rdr.records() {
        let row = row.unwrap();
        for field in row.iter().skip(5) {
            assert_eq!(field.parse::<f64>().unwrap(), 0.0);
        }
    }
}

#[test]
fn dispatch_soc_within_limits_and_shares_add_up() {
    for seed in 900..910 {
        let inst = random_instance(seed, 2, 3);
        let (sol, rep) = solve(&inst);
        assert!((rep.expected_total - sol.objective).abs() < 1e-6);
        for r in &rep.dispatch {
            assert!(r.soc_mwh >= inst.config.e_min - 1e-9 && r.soc_mwh <= inst.config.e_max + 1e-9);
        }
        for (s, t) in rep.scenarios.iter().enumerate() {
            let bid: f64 = MarketId::ALL.iter().map(|&m| rep.participation(s, m).pct_hours_bid).sum();
            assert!(bid <= 100.0 + 1e-9 && t.pct_idle >= -1e-9);
            assert!((bid + t.pct_idle - 100.0).abs() < 1e-9);
            for m in MarketId::ALL {
                let p = rep.participation(s, m);
                assert!(p.pct_hours_accepted <= p.pct_hours_bid);
            }
        }

        let dir = tempfile::tempdir().unwrap();
        emit(&rep, dir.path()).unwrap();
        let mut rdr = csv::Reader::from_path(dir.path().join("dispatch.csv")).unwrap();
        assert_eq!(rdr.headers().unwrap(), vec!["scenario", "minute", "charge_mwh", "discharge_mwh", "soc_mwh"]);
        for row in rdr.records() {
            let soc: f64 = row.unwrap()[4].parse().unwrap();
            assert!(soc >= inst.config.e_min - 1e-9 && soc <= inst.config.e_max + 1e-9);
        }
    }
}

#[test]
fn tampered_objective_is_a_consistency_error() {
    let inst = random_instance(11, 1, 2);
    let (mut sol, _) = solve(&inst);
    sol.objective += 1e-3;
    let err = settle(&sol, &inst.scenarios, &inst.req, &inst.deg, &inst.config).unwrap_err();
    assert!(matches!(err, Error::Consistency(_)), "{err}");
}

#[test]
fn degradation_cost_lowers_the_total() {
    let set = synthesize_scenarios(3, 2, &SynthParams::default()).unwrap().resample(60).unwrap();
    let run = |c_deg: f64| {
        let mut cfg = config(60);
        cfg.c_deg = c_deg;
        solve(&Instance::new(set.clone(), cfg)).1.expected_total
    };
    let (free, priced) = (run(0.0), run(30.0));
    assert!(priced <= free + 1e-9, "{priced} > {free}");
}
