//! Scenario decomposition branch and bound.
//!
//! The first stage is one offer per hour: nothing, or a market with a price
//! from a finite candidate set (the bid limits and every threshold in range;
//! between neighbouring candidates acceptance does not change, so the top of
//! each interval dominates). For fixed offers each scenario is an exact
//! dynamic program over the SOC. Relaxing the requirement that scenarios make
//! the same offer, priced by Lagrange multipliers, gives an upper bound; the
//! search branches on the hour where scenarios disagree most.
//!
//! The winning decisions are completed by the LP with all binaries fixed and
//! the objectives compared, so a misread model cannot go unnoticed.

use std::cell::RefCell;
use std::collections::{HashMap, HashSet};
use std::rc::Rc;
use std::time::Instant;

use log::debug;

use super::dp::{self, Bonus, ScenarioDp, MODES, OFF};
use super::lp::{model_bounds, solve_relaxation};
use super::structure::Structure;
use super::{Solution, SolverOptions, Status};
use crate::error::{Error, Result};
use crate::formulation::{MilpModel, VarKind};
use crate::market::MarketId;

const ROOT_ITERS: usize = 400;
const NODE_ITERS: usize = 40;
const PROBE_ITERS: usize = 15;
const PROBE_ROUNDS: usize = 4;
const MEMO_CAP: usize = 1 << 18;

#[derive(Clone, Copy, Debug, PartialEq)]
struct Offer {
    market: Option<MarketId>,
    price: f64,
}

struct Engine<'a> {
    st: &'a Structure,
    offers: Vec<Vec<Offer>>,
    /// `[(s * H + h) * width + o]`.
    cells: Vec<Bonus>,
    /// Index of the first offer with the same cell, same layout as `cells`.
    class: Vec<u16>,
    width: usize,
    memo: RefCell<Vec<HashMap<Vec<u16>, Option<f64>>>>,
}

struct Node {
    bound: f64,
    depth: usize,
    seq: u64,
    allowed: Vec<Vec<usize>>,
    lambda: Rc<Vec<f64>>,
}

struct Dual {
    value: f64,
    /// Offer chosen by scenario `s` in hour `h`, `[s][h]`.
    choice: Vec<Vec<usize>>,
}

impl<'a> Engine<'a> {
    fn new(st: &'a Structure) -> Engine<'a> {
        let (n_s, n_h) = (st.scenarios, st.hours);
        let mut offers = Vec::with_capacity(n_h);
        for h in 0..n_h {
            let mut list = vec![Offer { market: None, price: 0.0 }];
            for m in MarketId::ALL.into_iter().filter(|m| st.enabled[h][m.index()]) {
                let mut prices = vec![st.bid_min, st.bid_max];
                prices.extend(
                    (0..n_s)
                        .map(|s| st.hour(s, h).thresholds[m.index()])
                        .filter(|&p| p >= st.bid_min && p <= st.bid_max),
                );
                prices.sort_by(f64::total_cmp);
                prices.dedup();
                prices.retain(|&p| p <= st.bid_max && p >= st.bid_min);
                list.extend(prices.into_iter().map(|price| Offer { market: Some(m), price }));
            }
            offers.push(list);
        }
        let width = offers.iter().map(Vec::len).max().unwrap_or(1);
        let mut engine = Engine {
            st,
            offers,
            cells: vec![[None; MODES]; n_s * n_h * width],
            class: Vec::new(),
            width,
            memo: RefCell::new(vec![HashMap::new(); n_s]),
        };
        for s in 0..n_s {
            for h in 0..n_h {
                for o in 0..engine.offers[h].len() {
                    let c = engine.cell_value(s, h, engine.offers[h][o]);
                    engine.cells[(s * n_h + h) * width + o] = c;
                }
            }
        }
        engine.drop_dominated();
        engine.class = vec![0; engine.cells.len()];
        for s in 0..n_s {
            for h in 0..n_h {
                for o in 0..engine.offers[h].len() {
                    let c = engine.cell(s, h, o);
                    let first = (0..o).find(|&p| engine.cell(s, h, p) == c).unwrap_or(o);
                    engine.class[(s * n_h + h) * width + o] = first as u16;
                }
            }
        }
        engine
    }

    fn cell(&self, s: usize, h: usize, o: usize) -> &Bonus {
        &self.cells[(s * self.st.hours + h) * self.width + o]
    }

    /// Settlement of each available mode for scenario `s` under `offer`.
    fn cell_value(&self, s: usize, h: usize, offer: Offer) -> Bonus {
        let st = self.st;
        let mut b = [None; MODES];
        let Some(m) = offer.market else {
            b[OFF] = Some(0.0);
            return b;
        };
        let hd = st.hour(s, h);
        let p = hd.thresholds[m.index()];
        let wear = hd.wear[m.index()];
        let pen_up = hd.up * st.e_spot;
        let pen_down = hd.down * st.e_spot;
        if offer.price >= p {
            b[OFF] = Some(0.0);
        }
        if offer.price <= p {
            let pay = match m {
                MarketId::FcrN | MarketId::FcrD => st.p_max * offer.price,
                MarketId::SpotDischarge => st.e_spot * p,
                MarketId::SpotCharge if st.compat.omit_spot_charge_payment => 0.0,
                MarketId::SpotCharge => -st.e_spot * p,
            };
            let mut lost = if m.is_frequency() { st.p_max * offer.price } else { 0.0 };
            lost += if st.compat.unconditional_spot_penalties {
                pen_up + pen_down
            } else {
                match m {
                    MarketId::SpotDischarge => pen_up,
                    MarketId::SpotCharge => pen_down,
                    _ => 0.0,
                }
            };
            b[dp::deliver(m)] = Some(pay - wear);
            b[dp::fail(m)] = Some(-lost - wear);
        }
        b
    }

    /// Offers whose cells are pointwise no better than another offer's in
    /// every scenario can never be strictly needed; drop them.
    fn drop_dominated(&mut self) {
        let (n_s, n_h) = (self.st.scenarios, self.st.hours);
        for h in 0..n_h {
            let n_o = self.offers[h].len();
            let mut keep = vec![true; n_o];
            for a in 0..n_o {
                for b in 0..n_o {
                    if a == b || !keep[b] || !keep[a] {
                        continue;
                    }
                    // b dominates a: same availability pattern, values no lower;
                    // of two equal offers the earlier one stays
                    if self.dominates(h, b, a) && !(a < b && self.dominates(h, a, b)) {
                        keep[a] = false;
                    }
                }
            }
            let kept: Vec<usize> = (0..n_o).filter(|&o| keep[o]).collect();
            let offers: Vec<Offer> = kept.iter().map(|&o| self.offers[h][o]).collect();
            for s in 0..n_s {
                let base = (s * n_h + h) * self.width;
                let row: Vec<Bonus> = kept.iter().map(|&o| self.cells[base + o]).collect();
                for (i, c) in row.into_iter().enumerate() {
                    self.cells[base + i] = c;
                }
                for o in kept.len()..self.width {
                    self.cells[base + o] = [None; MODES];
                }
            }
            self.offers[h] = offers;
        }
    }

    fn dominates(&self, h: usize, b: usize, a: usize) -> bool {
        (0..self.st.scenarios).all(|s| {
            let (ca, cb) = (self.cell(s, h, a), self.cell(s, h, b));
            ca.iter().zip(cb).all(|(x, y)| match (x, y) {
                (None, None) => true,
                (Some(x), Some(y)) => y >= x,
                _ => false,
            })
        })
    }

    fn lambda_len(&self) -> usize {
        self.st.scenarios * self.st.hours * self.width
    }

    /// Per hour and mode, the best multiplier-adjusted settlement over the
    /// allowed offers, and the offer attaining it.
    fn bonus(&self, s: usize, allowed: &[Vec<usize>], lambda: &[f64]) -> (Vec<Bonus>, Vec<[usize; MODES]>) {
        let n_h = self.st.hours;
        let p = self.st.prob[s];
        let mut bonus = vec![[None; MODES]; n_h];
        let mut arg = vec![[0usize; MODES]; n_h];
        for h in 0..n_h {
            for &o in &allowed[h] {
                let mu = lambda[(s * n_h + h) * self.width + o] / p;
                for (mode, c) in self.cell(s, h, o).iter().enumerate() {
                    if let Some(c) = *c {
                        let v = c + mu;
                        if bonus[h][mode].is_none_or(|b: f64| v > b) {
                            bonus[h][mode] = Some(v);
                            arg[h][mode] = o;
                        }
                    }
                }
            }
        }
        (bonus, arg)
    }

    /// Lagrangian value of one scenario with the modes and offers chosen.
    fn scenario_dual(&self, s: usize, allowed: &[Vec<usize>], lambda: &[f64]) -> Option<(f64, Vec<usize>)> {
        let (bonus, arg) = self.bonus(s, allowed, lambda);
        let (v, modes) = ScenarioDp { st: self.st, s }.solve(&bonus, true)?;
        Some((v, modes.iter().enumerate().map(|(h, &m)| arg[h][m]).collect()))
    }

    /// Lagrangian bound of the node with hour `h` fixed to each allowed
    /// offer in turn, `[h][i]` for `allowed[h][i]`. `None` when infeasible.
    fn probe(&self, allowed: &[Vec<usize>], lambda: &[f64]) -> Option<Vec<Vec<f64>>> {
        let n_h = self.st.hours;
        let mut out: Vec<Vec<f64>> = allowed.iter().map(|a| vec![0.0; a.len()]).collect();
        for s in 0..self.st.scenarios {
            let p = self.st.prob[s];
            let (bonus, _) = self.bonus(s, allowed, lambda);
            let scores = ScenarioDp { st: self.st, s }.mode_scores(&bonus)?;
            for h in 0..n_h {
                for (i, &o) in allowed[h].iter().enumerate() {
                    let mu = lambda[(s * n_h + h) * self.width + o] / p;
                    let best = self
                        .cell(s, h, o)
                        .iter()
                        .zip(&scores[h])
                        .filter_map(|(c, sc)| Some(c.as_ref()? + sc.as_ref()?))
                        .fold(f64::NEG_INFINITY, f64::max);
                    out[h][i] += p * (best + mu);
                }
            }
        }
        Some(out)
    }

    fn dual(&self, allowed: &[Vec<usize>], lambda: &[f64]) -> Option<Dual> {
        let n_s = self.st.scenarios;
        let mut value = 0.0;
        let mut choice = Vec::with_capacity(n_s);
        for s in 0..n_s {
            let (v, c) = self.scenario_dual(s, allowed, lambda)?;
            value += self.st.prob[s] * v;
            choice.push(c);
        }
        Some(Dual { value, choice })
    }

    fn scenario_value(&self, s: usize, x: &[usize], want_modes: bool) -> Option<(f64, Vec<usize>)> {
        let bonus: Vec<Bonus> = x.iter().enumerate().map(|(h, &o)| *self.cell(s, h, o)).collect();
        ScenarioDp { st: self.st, s }.solve(&bonus, want_modes)
    }

    /// Exact expected value of the offers `x`.
    fn evaluate(&self, x: &[usize]) -> Option<f64> {
        let mut total = 0.0;
        let mut memo = self.memo.borrow_mut();
        for s in 0..self.st.scenarios {
            // offers that look the same to this scenario share one entry
            let key: Vec<u16> = x.iter().enumerate().map(|(h, &o)| self.class[(s * self.st.hours + h) * self.width + o]).collect();
            if memo[s].len() > MEMO_CAP {
                memo[s].clear();
            }
            let v = *memo[s]
                .entry(key)
                .or_insert_with(|| self.scenario_value(s, x, false).map(|r| r.0));
            total += self.st.prob[s] * v?;
        }
        Some(total)
    }

    /// Probability-weighted majority offer per hour.
    fn vote(&self, choice: &[Vec<usize>], allowed: &[Vec<usize>]) -> Vec<usize> {
        (0..self.st.hours)
            .map(|h| {
                let mut best = (f64::NEG_INFINITY, allowed[h][0]);
                for &o in &allowed[h] {
                    let w: f64 = (0..self.st.scenarios)
                        .filter(|&s| choice[s][h] == o)
                        .map(|s| self.st.prob[s])
                        .sum();
                    if w > best.0 {
                        best = (w, o);
                    }
                }
                best.1
            })
            .collect()
    }
}

struct Search<'a> {
    engine: Engine<'a>,
    opts: &'a SolverOptions,
    incumbent: Option<(f64, Vec<usize>)>,
    seen: HashSet<Vec<usize>>,
    nodes: usize,
}

impl Search<'_> {
    fn offer(&mut self, x: Vec<usize>) {
        if !self.seen.insert(x.clone()) {
            return;
        }
        if let Some(z) = self.engine.evaluate(&x) {
            if self.incumbent.as_ref().is_none_or(|(b, _)| z > *b) {
                debug!("incumbent {z:.6} at node {}", self.nodes);
                self.incumbent = Some((z, x));
            }
        }
    }

    fn cutoff(&self) -> f64 {
        self.incumbent.as_ref().map_or(f64::NEG_INFINITY, |(z, _)| z + self.opts.abs_gap)
    }

    /// Improve the incumbent one hour at a time until no single change helps.
    fn local_search(&mut self, allowed: &[Vec<usize>], sweeps: usize) {
        let Some((mut z, mut x)) = self.incumbent.clone() else {
            return;
        };
        for _ in 0..sweeps {
            let mut improved = false;
            for h in 0..x.len() {
                for &o in &allowed[h] {
                    if o == x[h] {
                        continue;
                    }
                    let mut y = x.clone();
                    y[h] = o;
                    if !self.seen.insert(y.clone()) {
                        continue;
                    }
                    if let Some(v) = self.engine.evaluate(&y) {
                        if v > z + 1e-9 {
                            z = v;
                            x = y;
                            improved = true;
                        }
                    }
                }
            }
            if !improved {
                break;
            }
        }
        if self.incumbent.as_ref().is_none_or(|(b, _)| z > *b) {
            debug!("local search incumbent {z:.6}");
            self.incumbent = Some((z, x));
        }
    }

    /// Bound a node: alternate multiplier updates with probing each hour's
    /// offers, dropping offers whose probe bound cannot beat the incumbent.
    /// `None` when the node is pruned.
    #[allow(clippy::type_complexity)]
    fn process(
        &mut self,
        depth: usize,
        mut allowed: Vec<Vec<usize>>,
        lambda: &[f64],
        mut bound: f64,
    ) -> Option<(f64, Vec<Vec<usize>>, Vec<f64>, Vec<Vec<f64>>)> {
        let mut lambda = lambda.to_vec();
        let mut iters = if depth == 0 { ROOT_ITERS } else { NODE_ITERS };
        for round in 0.. {
            let (b, _) = self.bound(&allowed, &mut lambda, iters)?;
            bound = bound.min(b);
            if depth == 0 && round == 0 {
                self.local_search(&allowed, 4);
            }
            if bound <= self.cutoff() {
                return None;
            }
            let mut probe = self.engine.probe(&allowed, &lambda)?;
            let cut = self.cutoff();
            let mut removed = 0;
            for (a, l) in allowed.iter_mut().zip(probe.iter_mut()) {
                let keep: Vec<usize> = (0..a.len()).filter(|&i| l[i] > cut).collect();
                if keep.is_empty() {
                    return None;
                }
                removed += a.len() - keep.len();
                *a = keep.iter().map(|&i| a[i]).collect();
                *l = keep.iter().map(|&i| l[i]).collect();
                let top = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                bound = bound.min(top);
            }
            if bound <= cut {
                return None;
            }
            log::trace!("depth {depth} round {round}: bound {bound:.6}, dropped {removed}");
            if removed == 0 || round + 1 >= PROBE_ROUNDS {
                return Some((bound, allowed, lambda, probe));
            }
            iters = PROBE_ITERS;
        }
        unreachable!()
    }

    /// Subgradient descent on the multipliers. Returns the best bound, the
    /// multipliers attaining it and the scenarios' choices there; `None` when
    /// the node is infeasible.
    fn bound(&mut self, allowed: &[Vec<usize>], lambda: &mut Vec<f64>, iters: usize) -> Option<(f64, Vec<Vec<usize>>)> {
        let e = &self.engine;
        let (n_s, n_h, width) = (e.st.scenarios, e.st.hours, e.width);
        let mut best: Option<(f64, Vec<f64>, Vec<Vec<usize>>)> = None;
        let mut theta = 1.0;
        let mut stall = 0;
        let mut lam = lambda.clone();
        for _ in 0..iters {
            let dual = self.engine.dual(allowed, &lam)?;
            let x = self.engine.vote(&dual.choice, allowed);
            self.offer(x);
            if best.as_ref().is_none_or(|(b, _, _)| dual.value < *b - 1e-9) {
                best = Some((dual.value, lam.clone(), dual.choice.clone()));
                stall = 0;
            } else {
                stall += 1;
                if stall >= std::env::var("ST").ok().and_then(|v| v.parse().ok()).unwrap_or(8) {
                    theta *= 0.5;
                    stall = 0;
                }
            }
            let b = best.as_ref().unwrap().0;
            if b <= self.cutoff() || theta < 1e-5 {
                break;
            }
            // subgradient of the relaxed agreement rows, projected on sum = 0
            let mut count = vec![0usize; n_h * width];
            for c in &dual.choice {
                for (h, &o) in c.iter().enumerate() {
                    count[h * width + o] += 1;
                }
            }
            let mut norm = 0.0;
            for c in &dual.choice {
                for h in 0..n_h {
                    for &o in &allowed[h] {
                        let mean = count[h * width + o] as f64 / n_s as f64;
                        let y = f64::from(u8::from(c[h] == o));
                        norm += (y - mean) * (y - mean);
                    }
                }
            }
            if norm < 1e-12 {
                // every scenario made the same offers: the bound is attained
                break;
            }
            let target = self.incumbent.as_ref().map_or(dual.value - 1.0, |(z, _)| *z);
            let step = theta * (dual.value - target).max(1e-9) / norm;
            for (s, c) in dual.choice.iter().enumerate() {
                for h in 0..n_h {
                    for &o in &allowed[h] {
                        let mean = count[h * width + o] as f64 / n_s as f64;
                        let y = f64::from(u8::from(c[h] == o));
                        if y != mean {
                            lam[(s * n_h + h) * width + o] -= step * (y - mean);
                        }
                    }
                }
            }
        }
        let (b, l, choice) = best?;
        *lambda = l;
        Some((b, choice))
    }
}

/// Best-bound search; `None` when the model is outside the decomposition.
pub(crate) fn solve(model: &MilpModel, opts: &SolverOptions) -> Result<Option<Solution>> {
    let start = Instant::now();
    let Some(st) = Structure::extract(model) else {
        return Ok(None);
    };
    let engine = Engine::new(&st);
    let n_h = st.hours;
    let mut search = Search {
        engine,
        opts,
        incumbent: None,
        seen: HashSet::new(),
        nodes: 0,
    };
    let root_allowed: Vec<Vec<usize>> = (0..n_h).map(|h| (0..search.engine.offers[h].len()).collect()).collect();
    debug!(
        "decomposition: {} scenarios, {n_h} hours, {} offers",
        st.scenarios,
        root_allowed.iter().map(Vec::len).sum::<usize>()
    );
    search.offer(vec![0; n_h]);

    let mut open = vec![Node {
        bound: f64::INFINITY,
        depth: 0,
        seq: 0,
        allowed: root_allowed,
        lambda: Rc::new(vec![0.0; search.engine.lambda_len()]),
    }];
    let mut seq = 0u64;
    let mut limited = false;
    let mut root_bound = f64::INFINITY;

    while !open.is_empty() {
        if opts.node_limit.is_some_and(|n| search.nodes >= n)
            || (!opts.deterministic && opts.time_limit.is_some_and(|t| start.elapsed() >= t))
        {
            limited = true;
            break;
        }
        let node = open.swap_remove(select(&open));
        if node.bound <= search.cutoff() {
            continue;
        }
        search.nodes += 1;
        if search.nodes % 50 == 0 {
            let z = search.incumbent.as_ref().map_or(f64::NAN, |(z, _)| *z);
            debug!("{} nodes, {} open, bound {:.6}, incumbent {z:.6}", search.nodes, open.len(), node.bound);
        }
        let Some((bound, allowed, lambda, probe)) = search.process(node.depth, node.allowed, &node.lambda, node.bound)
        else {
            continue;
        };
        if node.depth == 0 {
            root_bound = bound;
            debug!("root bound {bound:.6}, {} offers left", allowed.iter().map(Vec::len).sum::<usize>());
        }

        // branch where fixing the hour lowers the bound most
        let mut pick: Option<(f64, usize)> = None;
        for h in 0..n_h {
            if allowed[h].len() < 2 {
                continue;
            }
            let top = probe[h].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if pick.is_none_or(|(b, _)| top < b) {
                pick = Some((top, h));
            }
        }
        let Some((_, h)) = pick else {
            // a single offer left in every hour
            search.offer(allowed.iter().map(|a| a[0]).collect());
            continue;
        };
        log::trace!("branch at depth {} on hour {h}, bound {bound:.6}", node.depth);
        let lambda = Rc::new(lambda);
        for group in split(&search.engine, h, &allowed[h]) {
            let mut child = allowed.clone();
            child[h] = group.iter().map(|&i| allowed[h][i]).collect();
            let child_bound = group.iter().map(|&i| probe[h][i]).fold(f64::NEG_INFINITY, f64::max);
            seq += 1;
            open.push(Node {
                bound: child_bound.min(bound),
                depth: node.depth + 1,
                seq,
                allowed: child,
                lambda: Rc::clone(&lambda),
            });
        }
    }

    let elapsed = start.elapsed();
    let (z, x) = search
        .incumbent
        .clone()
        .ok_or_else(|| Error::Solver("no feasible offer found; idling should always be feasible".into()))?;
    let bound = if limited {
        open.iter().map(|n| n.bound).fold(z, f64::max).min(root_bound.max(z))
    } else {
        z
    };
    let status = if limited { Status::BoundLimit } else { Status::Optimal };
    let mut sol = complete(model, &search.engine, &x, z, status, bound, search.nodes, elapsed)?;
    if !limited {
        sol.gap = 0.0;
        sol.bound = sol.objective;
    }
    Ok(Some(sol))
}

/// Partition of an hour's offers (as positions in `offers`) into children:
/// one per market, and a market on its own split at its median price.
fn split(engine: &Engine, h: usize, offers: &[usize]) -> Vec<Vec<usize>> {
    let market = |i: usize| engine.offers[h][offers[i]].market;
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..offers.len() {
        match groups.iter_mut().find(|g| market(g[0]) == market(i)) {
            Some(g) => g.push(i),
            None => groups.push(vec![i]),
        }
    }
    if groups.len() == 1 {
        let g = groups.pop().unwrap();
        let mid = g.len() / 2;
        return vec![g[..mid].to_vec(), g[mid..].to_vec()];
    }
    groups
}

fn select(open: &[Node]) -> usize {
    let mut best = 0;
    for (i, n) in open.iter().enumerate().skip(1) {
        let b = &open[best];
        let better = n
            .bound
            .total_cmp(&b.bound)
            .then(n.depth.cmp(&b.depth))
            .then(b.seq.cmp(&n.seq))
            .is_gt();
        if better {
            best = i;
        }
    }
    best
}

/// Fix every binary and the prices from the chosen offers and modes and let
/// the LP fill in the continuous part.
#[allow(clippy::too_many_arguments)]
fn complete(
    model: &MilpModel,
    engine: &Engine,
    x: &[usize],
    z: f64,
    status: Status,
    bound: f64,
    nodes: usize,
    elapsed: std::time::Duration,
) -> Result<Solution> {
    let st = engine.st;
    let (mut lo, mut up) = model_bounds(model);
    let mut fix = |k: VarKind, v: f64| {
        if let Some(j) = model.var(k) {
            lo[j] = v;
            up[j] = v;
        }
    };
    for (h, &o) in x.iter().enumerate() {
        let offer = engine.offers[h][o];
        for m in MarketId::ALL {
            fix(VarKind::Bid { h, m }, f64::from(u8::from(offer.market == Some(m))));
        }
        fix(VarKind::Price { h }, offer.price);
    }
    for s in 0..st.scenarios {
        let (_, modes) = engine
            .scenario_value(s, x, true)
            .ok_or_else(|| Error::Consistency("incumbent offers became infeasible".into()))?;
        for (h, &mode) in modes.iter().enumerate() {
            let decoded = dp::decode(mode);
            for m in MarketId::ALL {
                let acc = decoded.is_some_and(|(dm, _)| dm == m);
                fix(VarKind::Accept { s, h, m }, f64::from(u8::from(acc)));
            }
            fix(VarKind::Fulfilled { s, h }, f64::from(u8::from(decoded.is_none_or(|(_, ok)| ok))));
        }
    }
    let point = solve_relaxation(model, &lo, &up, None, true)?
        .ok_or_else(|| Error::Consistency("decomposition optimum is infeasible in the model".into()))?;
    if (point.objective - z).abs() > 1e-6 * (1.0 + z.abs()) {
        return Err(Error::Consistency(format!(
            "decomposition value {z} but the model prices the same decisions at {}",
            point.objective
        )));
    }
    Ok(Solution::from_dense(model, &point.values, status, bound.max(point.objective), nodes, elapsed))
}
