//! Price/frequency scenarios: CSV ingestion, validation, persistence and a
//! seeded synthetic generator.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::MarketId;

pub const MINUTES_PER_DAY: u32 = 1440;
pub const FREQ_SANITY_BAND: (f64, f64) = (47.0, 53.0);
pub const SYNTH_CLIP_BAND: (f64, f64) = (49.0, 50.5);
pub const NOMINAL_HZ: f64 = 50.0;

const PROB_TOLERANCE: f64 = 1e-9;

pub const FREQUENCY_FILE: &str = "frequency.csv";
pub const PRICES_FILE: &str = "prices.csv";
pub const PROBABILITIES_FILE: &str = "probabilities.csv";

/// Grid frequency of one scenario, one sample per step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTrace {
    pub scenario_id: String,
    pub samples: Vec<f64>,
    pub step_minutes: u32,
}

impl FrequencyTrace {
    pub fn new(scenario_id: impl Into<String>, samples: Vec<f64>, step_minutes: u32) -> Result<Self> {
        let trace = FrequencyTrace {
            scenario_id: scenario_id.into(),
            samples,
            step_minutes,
        };
        trace.validate()?;
        Ok(trace)
    }

    fn validate(&self) -> Result<()> {
        let ctx = format!("scenario {:?}", self.scenario_id);
        if self.step_minutes == 0 || 60 % self.step_minutes != 0 {
            return Err(Error::validation(
                ctx,
                "step_minutes",
                format!("{} must be a positive divisor of 60", self.step_minutes),
            ));
        }
        let minutes = self.samples.len() as u64 * self.step_minutes as u64;
        if minutes == 0 || !minutes.is_multiple_of(60) || minutes > MINUTES_PER_DAY as u64 {
            return Err(Error::validation(
                ctx,
                "samples",
                format!("incomplete day: {} samples of {} min", self.samples.len(), self.step_minutes),
            ));
        }
        let (lo, hi) = FREQ_SANITY_BAND;
        if let Some((i, f)) = self
            .samples
            .iter()
            .enumerate()
            .find(|(_, f)| !(lo..=hi).contains(*f))
        {
            return Err(Error::validation(
                ctx,
                "freq_hz",
                format!("sample {} = {f} Hz outside [{lo}, {hi}]", i + 1),
            ));
        }
        Ok(())
    }

    pub fn hours(&self) -> usize {
        self.samples.len() * self.step_minutes as usize / 60
    }

    /// Block-average to a coarser step. `step_minutes` must be a multiple of
    /// the current step and divide 60.
    pub fn resample(&self, step_minutes: u32) -> Result<FrequencyTrace> {
        if step_minutes == self.step_minutes {
            return Ok(self.clone());
        }
        if step_minutes == 0 || !step_minutes.is_multiple_of(self.step_minutes) || !60u32.is_multiple_of(step_minutes) {
            return Err(Error::validation(
                format!("scenario {:?}", self.scenario_id),
                "step_minutes",
                format!("cannot resample {} min steps to {step_minutes} min", self.step_minutes),
            ));
        }
        let k = (step_minutes / self.step_minutes) as usize;
        let samples = self
            .samples
            .chunks(k)
            .map(|c| c.iter().sum::<f64>() / k as f64)
            .collect();
        FrequencyTrace::new(self.scenario_id.clone(), samples, step_minutes)
    }
}

/// Hourly prices of one scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriceSet {
    /// `thresholds[h][m]`: EUR/MW for frequency products, EUR/MWh for spot.
    pub thresholds: Vec<[f64; MarketId::COUNT]>,
    /// Up-regulation price, EUR/MWh.
    pub balancing_up: Vec<f64>,
    /// Down-regulation price, EUR/MWh.
    pub balancing_down: Vec<f64>,
}

impl PriceSet {
    pub fn threshold(&self, h: usize, m: MarketId) -> f64 {
        self.thresholds[h][m.index()]
    }

    pub fn hours(&self) -> usize {
        self.thresholds.len()
    }

    fn validate(&self, ctx: &str) -> Result<()> {
        let n = self.thresholds.len();
        if n == 0 || self.balancing_up.len() != n || self.balancing_down.len() != n {
            return Err(Error::validation(
                ctx,
                "prices",
                format!(
                    "series lengths differ or are empty: {} / {} / {}",
                    n,
                    self.balancing_up.len(),
                    self.balancing_down.len()
                ),
            ));
        }
        for h in 0..n {
            for m in MarketId::ALL {
                let p = self.thresholds[h][m.index()];
                if !p.is_finite() {
                    return Err(Error::validation(
                        ctx,
                        "threshold_price",
                        format!("hour {} {m}: {p} is not finite", h + 1),
                    ));
                }
            }
            for (field, v) in [
                ("balancing_up", self.balancing_up[h]),
                ("balancing_down", self.balancing_down[h]),
            ] {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::validation(
                        ctx,
                        field,
                        format!("hour {}: {v} must be finite and >= 0", h + 1),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// One representative day with its probability weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub probability: f64,
    pub frequency: FrequencyTrace,
    pub prices: PriceSet,
}

impl Scenario {
    /// Scenario with a constant frequency and the same prices every hour.
    pub fn constant(
        id: impl Into<String>,
        horizon_hours: usize,
        step_minutes: u32,
        freq_hz: f64,
        thresholds: [f64; MarketId::COUNT],
        balancing_up: f64,
        balancing_down: f64,
    ) -> Result<Scenario> {
        let id = id.into();
        let steps = horizon_hours * 60 / step_minutes.max(1) as usize;
        Ok(Scenario {
            frequency: FrequencyTrace::new(id.clone(), vec![freq_hz; steps], step_minutes)?,
            prices: PriceSet {
                thresholds: vec![thresholds; horizon_hours],
                balancing_up: vec![balancing_up; horizon_hours],
                balancing_down: vec![balancing_down; horizon_hours],
            },
            probability: 1.0,
            id,
        })
    }
}

/// Validated, immutable collection of scenarios sharing step and horizon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    scenarios: Vec<Scenario>,
    horizon_hours: usize,
    step_minutes: u32,
}

impl ScenarioSet {
    pub fn new(scenarios: Vec<Scenario>) -> Result<ScenarioSet> {
        let first = scenarios
            .first()
            .ok_or_else(|| Error::validation("ScenarioSet", "scenarios", "empty scenario set"))?;
        let step_minutes = first.frequency.step_minutes;
        let horizon_hours = first.prices.hours();
        if horizon_hours == 0 || horizon_hours > 24 {
            return Err(Error::validation(
                format!("scenario {:?}", first.id),
                "hour",
                format!("horizon of {horizon_hours} h is outside 1..=24"),
            ));
        }
        let mut seen = HashMap::new();
        let mut total = 0.0;
        for sc in &scenarios {
            let ctx = format!("scenario {:?}", sc.id);
            if seen.insert(sc.id.as_str(), ()).is_some() {
                return Err(Error::validation(ctx, "id", "duplicate scenario id"));
            }
            if sc.frequency.scenario_id != sc.id {
                return Err(Error::validation(ctx, "frequency", "trace belongs to another scenario"));
            }
            sc.frequency.validate()?;
            sc.prices.validate(&ctx)?;
            if sc.frequency.step_minutes != step_minutes {
                return Err(Error::validation(
                    ctx,
                    "step_minutes",
                    format!("{} differs from {step_minutes}", sc.frequency.step_minutes),
                ));
            }
            if sc.prices.hours() != horizon_hours {
                return Err(Error::validation(
                    ctx,
                    "hour",
                    format!("{} hourly entries, expected {horizon_hours}", sc.prices.hours()),
                ));
            }
            if sc.frequency.hours() != horizon_hours {
                return Err(Error::validation(
                    ctx,
                    "minute",
                    format!(
                        "incomplete day: frequency covers {} min, prices cover {} h",
                        sc.frequency.samples.len() * step_minutes as usize,
                        horizon_hours
                    ),
                ));
            }
            if !(sc.probability > 0.0 && sc.probability <= 1.0) {
                return Err(Error::validation(
                    ctx,
                    "probability",
                    format!("{} not in (0, 1]", sc.probability),
                ));
            }
            total += sc.probability;
        }
        if (total - 1.0).abs() > PROB_TOLERANCE {
            return Err(Error::validation(
                "ScenarioSet",
                "probability",
                format!("probabilities sum to {total}, expected 1"),
            ));
        }
        Ok(ScenarioSet {
            scenarios,
            horizon_hours,
            step_minutes,
        })
    }

    /// Builds a set with uniform weights `1/|S|`, overriding whatever the
    /// scenarios carry.
    pub fn uniform(mut scenarios: Vec<Scenario>) -> Result<ScenarioSet> {
        let n = scenarios.len() as f64;
        for sc in &mut scenarios {
            sc.probability = 1.0 / n;
        }
        ScenarioSet::new(scenarios)
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Scenario> {
        self.scenarios.iter()
    }

    pub fn get(&self, s: usize) -> &Scenario {
        &self.scenarios[s]
    }

    pub fn horizon_hours(&self) -> usize {
        self.horizon_hours
    }

    pub fn step_minutes(&self) -> u32 {
        self.step_minutes
    }

    pub fn steps_per_hour(&self) -> usize {
        60 / self.step_minutes as usize
    }

    /// Number of steps `T` in the horizon.
    pub fn steps(&self) -> usize {
        self.horizon_hours * self.steps_per_hour()
    }

    /// 0-based hour of a 0-based step.
    pub fn hour_of_step(&self, t: usize) -> usize {
        t / self.steps_per_hour()
    }

    pub fn max_threshold(&self) -> f64 {
        self.scenarios
            .iter()
            .flat_map(|s| s.prices.thresholds.iter().flatten())
            .copied()
            .fold(0.0, f64::max)
    }

    /// Same scenarios at a coarser step.
    pub fn resample(&self, step_minutes: u32) -> Result<ScenarioSet> {
        let scenarios = self
            .scenarios
            .iter()
            .map(|sc| {
                Ok(Scenario {
                    frequency: sc.frequency.resample(step_minutes)?,
                    ..sc.clone()
                })
            })
            .collect::<Result<Vec<_>>>()?;
        ScenarioSet::new(scenarios)
    }
}

/// Hour (1-based) containing minute-step `t` (1-based) of a day sampled every
/// `step_minutes`.
pub fn hour_of(t: usize, step_minutes: u32) -> Result<usize> {
    if step_minutes == 0 || 60 % step_minutes != 0 {
        return Err(Error::Range {
            what: "step_minutes",
            value: step_minutes as i64,
            lo: 1,
            hi: 60,
        });
    }
    let steps = (MINUTES_PER_DAY / step_minutes) as usize;
    if t == 0 || t > steps {
        return Err(Error::Range {
            what: "step index",
            value: t as i64,
            lo: 1,
            hi: steps as i64,
        });
    }
    Ok((t - 1) * step_minutes as usize / 60 + 1)
}

// ---------------------------------------------------------------------------
// CSV I/O
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
struct FrequencyRow {
    scenario_id: String,
    minute: u32,
    freq_hz: f64,
}

#[derive(Debug, Deserialize)]
struct PriceRow {
    scenario_id: String,
    hour: usize,
    market: String,
    threshold_price: f64,
    balancing_up: f64,
    balancing_down: f64,
}

#[derive(Debug, Deserialize)]
struct ProbabilityRow {
    scenario_id: String,
    probability: f64,
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path, header: &[&str]) -> Result<Vec<(usize, T)>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => parse_err(path, 1, format!("{other:?}")),
        })?;
    let got: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    if got != header {
        return Err(parse_err(
            path,
            1,
            format!("header {:?}, expected {:?}", got.join(","), header.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let row: T = rec
            .deserialize(None)
            .map_err(|e| parse_err(path, line, e.to_string()))?;
        rows.push((line, row));
    }
    Ok(rows)
}

/// Load and validate scenarios. Without a probability file every scenario is
/// weighted `1/|S|`; explicit probabilities must already sum to one.
pub fn load_scenarios(
    frequency_path: &Path,
    prices_path: &Path,
    probabilities_path: Option<&Path>,
) -> Result<ScenarioSet> {
    let freq_rows: Vec<(usize, FrequencyRow)> =
        read_rows(frequency_path, &["scenario_id", "minute", "freq_hz"])?;
    let price_rows: Vec<(usize, PriceRow)> = read_rows(
        prices_path,
        &[
            "scenario_id",
            "hour",
            "market",
            "threshold_price",
            "balancing_up",
            "balancing_down",
        ],
    )?;

    let mut order: Vec<String> = Vec::new();
    let mut minutes: HashMap<String, BTreeMap<u32, f64>> = HashMap::new();
    for (line, row) in freq_rows {
        if row.minute == 0 || row.minute > MINUTES_PER_DAY {
            return Err(parse_err(
                frequency_path,
                line,
                format!("minute {} outside 1..={MINUTES_PER_DAY}", row.minute),
            ));
        }
        let entry = minutes.entry(row.scenario_id.clone()).or_insert_with(|| {
            order.push(row.scenario_id.clone());
            BTreeMap::new()
        });
        if entry.insert(row.minute, row.freq_hz).is_some() {
            return Err(parse_err(
                frequency_path,
                line,
                format!("duplicate minute {} for {:?}", row.minute, row.scenario_id),
            ));
        }
    }

    type HourPrices = ([Option<f64>; MarketId::COUNT], f64, f64, usize);
    let mut prices: HashMap<String, BTreeMap<usize, HourPrices>> = HashMap::new();
    let mut horizon = 0usize;
    for (line, row) in price_rows {
        let market: MarketId = row
            .market
            .parse()
            .map_err(|e: Error| parse_err(prices_path, line, e.to_string()))?;
        if row.hour == 0 || row.hour > 24 {
            return Err(parse_err(prices_path, line, format!("hour {} outside 1..=24", row.hour)));
        }
        horizon = horizon.max(row.hour);
        let hours = prices.entry(row.scenario_id.clone()).or_default();
        let slot = hours
            .entry(row.hour)
            .or_insert(([None; MarketId::COUNT], row.balancing_up, row.balancing_down, line));
        if slot.1.to_bits() != row.balancing_up.to_bits()
            || slot.2.to_bits() != row.balancing_down.to_bits()
        {
            return Err(parse_err(
                prices_path,
                line,
                format!(
                    "balancing prices for {:?} hour {} differ from line {}",
                    row.scenario_id, row.hour, slot.3
                ),
            ));
        }
        if slot.0[market.index()].replace(row.threshold_price).is_some() {
            return Err(parse_err(
                prices_path,
                line,
                format!("duplicate {market} row for {:?} hour {}", row.scenario_id, row.hour),
            ));
        }
    }

    let probabilities = match probabilities_path {
        Some(p) => {
            let rows: Vec<(usize, ProbabilityRow)> = read_rows(p, &["scenario_id", "probability"])?;
            let mut map = HashMap::new();
            for (line, row) in rows {
                if map.insert(row.scenario_id.clone(), row.probability).is_some() {
                    return Err(parse_err(p, line, format!("duplicate scenario {:?}", row.scenario_id)));
                }
            }
            Some(map)
        }
        None => None,
    };

    for id in prices.keys() {
        if !minutes.contains_key(id) {
            return Err(Error::validation(
                format!("scenario {id:?}"),
                "frequency",
                "prices given but no frequency trace",
            ));
        }
    }

    let n = order.len();
    let mut scenarios = Vec::with_capacity(n);
    for id in order {
        let ctx = format!("scenario {id:?}");
        let trace = &minutes[&id];
        let keys: Vec<u32> = trace.keys().copied().collect();
        let step = if keys.len() >= 2 { keys[1] - keys[0] } else { 60 * horizon.max(1) as u32 };
        if keys[0] != 1 || keys.windows(2).any(|w| w[1] - w[0] != step) {
            return Err(Error::validation(
                ctx,
                "minute",
                "minutes must start at 1 and be evenly spaced",
            ));
        }
        let samples: Vec<f64> = trace.values().copied().collect();
        if samples.len() * step as usize != horizon * 60 {
            return Err(Error::validation(
                ctx,
                "minute",
                format!(
                    "incomplete day: {} samples of {step} min cover {} min, prices cover {horizon} h",
                    samples.len(),
                    samples.len() * step as usize
                ),
            ));
        }
        let hours = prices
            .get(&id)
            .ok_or_else(|| Error::validation(&ctx, "prices", "no price rows"))?;
        let mut set = PriceSet {
            thresholds: Vec::with_capacity(horizon),
            balancing_up: Vec::with_capacity(horizon),
            balancing_down: Vec::with_capacity(horizon),
        };
        for h in 1..=horizon {
            let (th, up, down, _) = hours.get(&h).ok_or_else(|| {
                Error::validation(&ctx, "hour", format!("incomplete day: hour {h} missing"))
            })?;
            let mut row = [0.0; MarketId::COUNT];
            for m in MarketId::ALL {
                row[m.index()] = th[m.index()].ok_or_else(|| {
                    Error::validation(&ctx, "market", format!("hour {h} has no {m} price"))
                })?;
            }
            set.thresholds.push(row);
            set.balancing_up.push(*up);
            set.balancing_down.push(*down);
        }
        let probability = match &probabilities {
            Some(map) => *map
                .get(&id)
                .ok_or_else(|| Error::validation(&ctx, "probability", "missing probability"))?,
            None => 1.0 / n as f64,
        };
        scenarios.push(Scenario {
            frequency: FrequencyTrace::new(id.clone(), samples, step)?,
            prices: set,
            probability,
            id,
        });
    }
    ScenarioSet::new(scenarios)
}

fn create(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

/// Write `frequency.csv`, `prices.csv` and `probabilities.csv` into `dir`.
/// Floats use the shortest representation that parses back bit-exactly.
pub fn save_scenarios(set: &ScenarioSet, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(FREQUENCY_FILE);
    let mut w = create(&path)?;
    writeln!(w, "scenario_id,minute,freq_hz").map_err(io(&path))?;
    for sc in set.iter() {
        let step = sc.frequency.step_minutes as usize;
        for (i, f) in sc.frequency.samples.iter().enumerate() {
            writeln!(w, "{},{},{}", sc.id, i * step + 1, f).map_err(io(&path))?;
        }
    }
    w.flush().map_err(io(&path))?;

    let path = dir.join(PRICES_FILE);
    let mut w = create(&path)?;
    writeln!(w, "scenario_id,hour,market,threshold_price,balancing_up,balancing_down")
        .map_err(io(&path))?;
    for sc in set.iter() {
        for h in 0..set.horizon_hours() {
            for m in MarketId::ALL {
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    sc.id,
                    h + 1,
                    m,
                    sc.prices.threshold(h, m),
                    sc.prices.balancing_up[h],
                    sc.prices.balancing_down[h]
                )
                .map_err(io(&path))?;
            }
        }
    }
    w.flush().map_err(io(&path))?;

    let path = dir.join(PROBABILITIES_FILE);
    let mut w = create(&path)?;
    writeln!(w, "scenario_id,probability").map_err(io(&path))?;
    for sc in set.iter() {
        writeln!(w, "{},{}", sc.id, sc.probability).map_err(io(&path))?;
    }
    w.flush().map_err(io(&path))?;
    Ok(())
}

/// Load the three files written by [`save_scenarios`]. The probability file is
/// optional.
pub fn load_dir(dir: &Path) -> Result<ScenarioSet> {
    let probs = dir.join(PROBABILITIES_FILE);
    load_scenarios(
        &dir.join(FREQUENCY_FILE),
        &dir.join(PRICES_FILE),
        probs.exists().then_some(probs.as_path()),
    )
}

// ---------------------------------------------------------------------------
// Synthetic scenarios
// ---------------------------------------------------------------------------

/// Parameters of the synthetic generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub horizon_hours: usize,
    pub step_minutes: u32,
    /// Per-minute pull towards 50 Hz, in [0, 1].
    pub mean_reversion: f64,
    /// Standard deviation of the per-minute frequency innovation, Hz.
    pub noise_scale: f64,
    /// Mean FCR-N availability price, EUR/MW.
    pub fcr_n_price: f64,
    /// Mean FCR-D availability price, EUR/MW.
    pub fcr_d_price: f64,
    /// Mean spot price, EUR/MWh.
    pub spot_price: f64,
    /// Amplitude of the intraday spot shape, EUR/MWh.
    pub spot_swing: f64,
    /// Distance of the balancing prices from spot, EUR/MWh.
    pub balancing_spread: f64,
    /// Relative standard deviation of the hourly price noise.
    pub price_noise: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            horizon_hours: 24,
            step_minutes: 1,
            mean_reversion: 0.1,
            noise_scale: 0.02,
            fcr_n_price: 18.0,
            fcr_d_price: 7.0,
            spot_price: 60.0,
            spot_swing: 25.0,
            balancing_spread: 15.0,
            price_noise: 0.15,
        }
    }
}

impl SynthParams {
    fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::validation("SynthParams", field, msg));
        if self.horizon_hours == 0 || self.horizon_hours > 24 {
            return bad("horizon_hours", format!("{} outside 1..=24", self.horizon_hours));
        }
        if self.step_minutes == 0 || 60 % self.step_minutes != 0 {
            return bad("step_minutes", format!("{} must divide 60", self.step_minutes));
        }
        if !(0.0..=1.0).contains(&self.mean_reversion) {
            return bad("mean_reversion", format!("{} outside [0, 1]", self.mean_reversion));
        }
        let nonneg = [
            ("noise_scale", self.noise_scale),
            ("fcr_n_price", self.fcr_n_price),
            ("fcr_d_price", self.fcr_d_price),
            ("spot_swing", self.spot_swing),
            ("balancing_spread", self.balancing_spread),
            ("price_noise", self.price_noise),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return bad(name, format!("{v} must be finite and >= 0"));
            }
        }
        if !self.spot_price.is_finite() {
            return bad("spot_price", "not finite".into());
        }
        Ok(())
    }
}

/// Two-peaked daily load shape centred near zero.
fn day_shape(hour: f64) -> f64 {
    let bump = |centre: f64| (-((hour - centre) / 2.5).powi(2)).exp();
    bump(8.5) + 1.2 * bump(18.5) - 0.45
}

fn round_to(x: f64, decimals: i32) -> f64 {
    let k = 10f64.powi(decimals);
    (x * k).round() / k
}

/// Generate `days` equally weighted day-scenarios. Frequency follows a
/// mean-reverting walk around 50 Hz (per minute, clipped to 49.0..=50.5 Hz,
/// block-averaged to the step); prices follow a day-shaped curve with
/// multiplicative noise. Identical seeds give identical sets.
pub fn synthesize_scenarios(seed: u64, days: usize, params: &SynthParams) -> Result<ScenarioSet> {
    if days == 0 {
        return Err(Error::validation("SynthParams", "days", "need at least one day"));
    }
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let (lo, hi) = SYNTH_CLIP_BAND;
    let minutes = params.horizon_hours * 60;
    let k = params.step_minutes as usize;

    let mut scenarios = Vec::with_capacity(days);
    for d in 0..days {
        let id = format!("d{}", d + 1);
        let mut f = NOMINAL_HZ;
        let mut per_minute = Vec::with_capacity(minutes);
        for _ in 0..minutes {
            let shock: f64 = unit.sample(&mut rng);
            f = (f + params.mean_reversion * (NOMINAL_HZ - f) + params.noise_scale * shock).clamp(lo, hi);
            per_minute.push(f);
        }
        let samples = per_minute
            .chunks(k)
            .map(|c| round_to(c.iter().sum::<f64>() / k as f64, 4).clamp(lo, hi))
            .collect();

        let level: f64 = 1.0 + 0.1 * unit.sample(&mut rng);
        let mut noisy = |base: f64| -> f64 {
            let z: f64 = unit.sample(&mut rng);
            round_to((base * (1.0 + params.price_noise * z)).max(0.0), 2)
        };
        let mut prices = PriceSet {
            thresholds: Vec::with_capacity(params.horizon_hours),
            balancing_up: Vec::with_capacity(params.horizon_hours),
            balancing_down: Vec::with_capacity(params.horizon_hours),
        };
        for h in 0..params.horizon_hours {
            let shape = day_shape(h as f64 + 0.5);
            let spot = noisy(level * (params.spot_price + params.spot_swing * shape));
            let fcr_n = noisy(level * params.fcr_n_price * (1.0 + 0.3 * shape));
            let fcr_d = noisy(level * params.fcr_d_price * (1.0 + 0.2 * shape));
            let up = round_to(spot + params.balancing_spread, 2);
            let down = round_to((spot - params.balancing_spread).max(0.0), 2);
            prices.thresholds.push([fcr_n, fcr_d, spot, spot]);
            prices.balancing_up.push(up);
            prices.balancing_down.push(down);
        }
        scenarios.push(Scenario {
            frequency: FrequencyTrace::new(id.clone(), samples, params.step_minutes)?,
            prices,
            probability: 1.0,
            id,
        });
    }
    ScenarioSet::uniform(scenarios)
}
