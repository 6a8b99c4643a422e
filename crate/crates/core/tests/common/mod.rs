#![allow(dead_code)]

use bessplan::droop::{build_requirements, EnergyRequirement};
use bessplan::market::{degradation_costs, DegradationSchedule};
use bessplan::scenario::{FrequencyTrace, PriceSet};
use bessplan::{BessConfig, MarketId, Scenario, ScenarioSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub scenarios: ScenarioSet,
    pub config: BessConfig,
    pub req: EnergyRequirement,
    pub deg: DegradationSchedule,
}

impl Instance {
    pub fn new(scenarios: ScenarioSet, config: BessConfig) -> Self {
        let req = build_requirements(&scenarios, &config).unwrap();
        let deg = degradation_costs(&req, &config);
        Instance {
            scenarios,
            config,
            req,
            deg,
        }
    }

    pub fn model(&self) -> bessplan::formulation::MilpModel {
        bessplan::formulation::build_model(&self.scenarios, &self.req, &self.deg, &self.config).unwrap()
    }
}

pub fn constant_scenario(hours: usize, step: u32, freq: f64, thresholds: [f64; 4], up: f64, down: f64) -> Scenario {
    Scenario::constant("s1", hours, step, freq, thresholds, up, down).unwrap()
}

pub fn single(hours: usize, step: u32, freq: f64, thresholds: [f64; 4]) -> ScenarioSet {
    ScenarioSet::new(vec![constant_scenario(hours, step, freq, thresholds, 60.0, 20.0)]).unwrap()
}

pub fn config(step: u32) -> BessConfig {
    BessConfig {
        step_minutes: step,
        ..BessConfig::default()
    }
}

/// Random instance with at most `max_s` scenarios and `max_h` hours at
/// hourly resolution.
pub fn random_instance(seed: u64, max_s: usize, max_h: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_s = rng.random_range(1..=max_s);
    let n_h = rng.random_range(1..=max_h);
    let step = 60;
    let freqs = [49.4, 49.6, 49.85, 49.95, 49.98, 50.0, 50.03, 50.08, 50.2];
    let scenarios: Vec<Scenario> = (0..n_s)
        .map(|i| {
            let samples: Vec<f64> = (0..n_h).map(|_| freqs[rng.random_range(0..freqs.len())]).collect();
            let thresholds: Vec<[f64; 4]> = (0..n_h)
                .map(|_| {
                    [
                        rng.random_range(0..=30) as f64,
                        rng.random_range(0..=15) as f64,
                        rng.random_range(0..=100) as f64,
                        rng.random_range(0..=100) as f64,
                    ]
                })
                .collect();
            let up: Vec<f64> = (0..n_h).map(|_| rng.random_range(20..=120) as f64).collect();
            let down: Vec<f64> = (0..n_h).map(|_| rng.random_range(0..=40) as f64).collect();
            let id = format!("r{}", i + 1);
            Scenario {
                frequency: FrequencyTrace::new(id.clone(), samples, step).unwrap(),
                prices: PriceSet {
                    thresholds,
                    balancing_up: up,
                    balancing_down: down,
                },
                probability: 1.0,
                id,
            }
        })
        .collect();
    let scenarios = ScenarioSet::uniform(scenarios).unwrap();
    let mut markets: Vec<MarketId> = MarketId::ALL.into_iter().filter(|_| rng.random_bool(0.7)).collect();
    if markets.is_empty() {
        markets.push(MarketId::FcrN);
    }
    let e_min = 0.1;
    let e_max = 1.0;
    let config = BessConfig {
        step_minutes: step,
        c_deg: [0.0, 5.0, 20.0, 50.0][rng.random_range(0..4)],
        m_0: [0.1, 0.3, 0.5, 0.8, 1.0][rng.random_range(0..5)],
        e_min,
        e_max,
        markets,
        ..BessConfig::default()
    };
    Instance::new(scenarios, config)
}
