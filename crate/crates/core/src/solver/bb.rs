//! Branch and bound over LP relaxations.
//!
//! Branching follows the decision cascade: bid binaries first, then
//! acceptance, then fulfilment. The search dives depth-first until an
//! incumbent exists and then switches to best-bound. Children are re-solved
//! from the parent's simplex state when `warm_start` is set.

use std::time::Instant;

use log::{debug, error, warn};

use super::cuts::strengthen;
use super::lp::{model_bounds, Relaxation};
use super::{decomp, Branching, Engine, Solution, SolverOptions, Status, BINARY_GUARDRAIL};
use crate::error::{Error, Result};
use crate::formulation::{LinearConstraint, MilpModel, VarKind};

/// Open nodes beyond this count are stored without their simplex state and
/// re-solved from scratch when selected.
const STATE_CAP: usize = 256;

struct Node {
    bound: f64,
    depth: usize,
    seq: u64,
    fixes: Vec<(usize, f64)>,
    state: Option<microlp::Solution>,
}

struct Search<'a> {
    model: &'a MilpModel,
    opts: &'a SolverOptions,
    relax: Relaxation,
    cuts: Vec<LinearConstraint>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Binary indices by branching priority.
    tiers: [Vec<usize>; 3],
    nodes: usize,
    seq: u64,
}

impl Search<'_> {
    fn values(&self, sol: &microlp::Solution) -> Vec<f64> {
        (0..self.model.variables.len())
            .map(|j| sol.var_value_raw(self.relax.var(j)))
            .collect()
    }

    fn solve_cold(&self, fixes: &[(usize, f64)]) -> Result<Option<microlp::Solution>> {
        let (mut lo, mut up) = (self.lower.clone(), self.upper.clone());
        for &(j, v) in fixes {
            lo[j] = v;
            up[j] = v;
        }
        Relaxation::new(self.model, &self.cuts, &lo, &up, None, true).solve()
    }

    fn child(&mut self, parent: Option<microlp::Solution>, fixes: &[(usize, f64)]) -> Result<Option<microlp::Solution>> {
        self.nodes += 1;
        match parent {
            Some(state) if self.opts.warm_start => {
                let &(j, v) = fixes.last().expect("child has a fix");
                super::lp::outcome(state.fix_var(self.relax.var(j), v))
            }
            _ => self.solve_cold(fixes),
        }
    }

    /// Fractional binary to branch on, or `None` when the point is integral.
    fn pick(&self, x: &[f64]) -> Option<usize> {
        let tol = self.opts.int_tol;
        for tier in &self.tiers {
            let mut best: Option<(usize, f64)> = None;
            for &j in tier {
                let f = (x[j] - x[j].round()).abs();
                if f <= tol {
                    continue;
                }
                match self.opts.branching {
                    Branching::FirstFractional => return Some(j),
                    Branching::MostFractional => {
                        if best.is_none_or(|(_, bf)| f > bf) {
                            best = Some((j, f));
                        }
                    }
                }
            }
            if let Some((j, _)) = best {
                return Some(j);
            }
        }
        None
    }

    fn next_seq(&mut self) -> u64 {
        self.seq += 1;
        self.seq
    }
}

fn tier(kind: &VarKind) -> usize {
    match kind {
        VarKind::Bid { .. } => 0,
        VarKind::Accept { .. } => 1,
        _ => 2,
    }
}

/// Select the next open node: newest first until an incumbent exists, then
/// highest bound (ties: deeper, then older).
fn select(open: &[Node], diving: bool) -> usize {
    if diving {
        return open.len() - 1;
    }
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

pub fn solve_bb(model: &MilpModel, opts: &SolverOptions) -> Result<Solution> {
    opts.validate()?;
    let start = Instant::now();
    if opts.engine == Engine::Decomposition {
        if let Some(sol) = decomp::solve(model, opts)? {
            return Ok(sol);
        }
        debug!("model outside the decomposition; using LP branch and bound");
    }
    let n_bin = model.num_binaries();
    if n_bin > BINARY_GUARDRAIL {
        warn!("{n_bin} binaries exceed the built-in solver guardrail of {BINARY_GUARDRAIL}; consider exporting");
    }

    let (lower, upper) = model_bounds(model);
    let cuts = strengthen(model);
    let relax = Relaxation::new(model, &cuts, &lower, &upper, None, true);
    let mut tiers: [Vec<usize>; 3] = Default::default();
    for j in model.binaries() {
        tiers[tier(&model.variables[j].kind)].push(j);
    }
    let mut search = Search {
        model,
        opts,
        relax,
        cuts,
        lower,
        upper,
        tiers,
        nodes: 1,
        seq: 0,
    };

    let Some(root) = search.relax.solve()? else {
        error!("root relaxation infeasible; the no-bid point should always be feasible");
        return Ok(Solution::infeasible(model, 1, start.elapsed()));
    };
    let root_bound = root.objective();
    debug!("root bound {root_bound:.6}, {n_bin} binaries");

    let mut open = vec![Node {
        bound: root_bound,
        depth: 0,
        seq: 0,
        fixes: Vec::new(),
        state: Some(root),
    }];
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut limited = false;

    while !open.is_empty() {
        if opts.node_limit.is_some_and(|n| search.nodes >= n)
            || (!opts.deterministic && opts.time_limit.is_some_and(|t| start.elapsed() >= t))
        {
            limited = true;
            break;
        }
        if search.nodes % 100 < 2 {
            let best = open.iter().map(|n| n.bound).fold(f64::NEG_INFINITY, f64::max);
            let z = incumbent.as_ref().map_or(f64::NAN, |(z, _)| *z);
            debug!("{} nodes, {} open, bound {best:.6}, incumbent {z:.6}", search.nodes, open.len());
        }
        let i = select(&open, incumbent.is_none());
        let node = open.swap_remove(i);
        let cutoff = incumbent.as_ref().map_or(f64::NEG_INFINITY, |(z, _)| z + opts.abs_gap);
        if node.bound <= cutoff {
            continue;
        }
        let state = match node.state {
            Some(s) => s,
            None => match search.solve_cold(&node.fixes)? {
                Some(s) => s,
                None => continue,
            },
        };
        let x = search.values(&state);
        let Some(j) = search.pick(&x) else {
            let z = state.objective();
            if z > cutoff {
                debug!("incumbent {z:.6} at node {}", search.nodes);
                incumbent = Some((z, x));
            }
            continue;
        };

        // nearest rounding explored first
        let near = x[j].round();
        let mut parent = Some(state);
        for v in [1.0 - near, near] {
            let mut fixes = node.fixes.clone();
            fixes.push((j, v));
            let from = if v == near { parent.take() } else { parent.clone() };
            let Some(sol) = search.child(from, &fixes)? else {
                continue;
            };
            let bound = sol.objective();
            if bound <= cutoff {
                continue;
            }
            let keep = open.len() < STATE_CAP;
            let seq = search.next_seq();
            open.push(Node {
                bound,
                depth: node.depth + 1,
                seq,
                fixes,
                state: keep.then_some(sol),
            });
        }
        if let Some((z, _)) = &incumbent {
            open.retain(|n| n.bound > z + opts.abs_gap);
        }
    }

    let elapsed = start.elapsed();
    let Some((z, x)) = incumbent else {
        if limited {
            return Err(Error::Solver(format!(
                "search stopped after {} nodes without a feasible point",
                search.nodes
            )));
        }
        error!("no integral point found; the model should always admit the no-bid point");
        return Ok(Solution::infeasible(model, search.nodes, elapsed));
    };
    let bound = if limited {
        open.iter().map(|n| n.bound).fold(z, f64::max).min(root_bound)
    } else {
        z
    };
    let status = if limited { Status::BoundLimit } else { Status::Optimal };
    let values = polish(&search, &x)?;
    let mut sol = Solution::from_dense(model, &values, status, bound.max(z), search.nodes, elapsed);
    if (sol.objective - z).abs() > 1e-6 * (1.0 + z.abs()) {
        warn!("polished objective {} differs from node objective {z}", sol.objective);
    }
    if !limited {
        sol.bound = sol.objective.max(bound);
        sol.gap = 0.0;
    }
    Ok(sol)
}

/// Round the binaries and re-solve the continuous part with them fixed.
fn polish(search: &Search, x: &[f64]) -> Result<Vec<f64>> {
    let fixes: Vec<(usize, f64)> = search
        .model
        .binaries()
        .map(|j| (j, x[j].round().clamp(search.lower[j], search.upper[j])))
        .collect();
    match search.solve_cold(&fixes)? {
        Some(sol) => {
            let mut v = search.values(&sol);
            for &(j, b) in &fixes {
                v[j] = b;
            }
            Ok(v)
        }
        None => {
            warn!("re-solve with rounded binaries infeasible; keeping node values");
            let mut v = x.to_vec();
            for (j, b) in fixes {
                v[j] = b;
            }
            Ok(v)
        }
    }
}
