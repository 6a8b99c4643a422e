//! Exact second-stage value of one scenario: a dynamic program over the SOC
//! with one dispatch mode per hour chosen from an allowed set.

use super::plf::Plf;
use super::structure::Structure;
use crate::market::MarketId;

pub(crate) const MODES: usize = 1 + 2 * MarketId::COUNT;
pub(crate) const OFF: usize = 0;

const COARSE_AT: usize = 96;
const COARSE_CELLS: usize = 48;

pub(crate) fn deliver(m: MarketId) -> usize {
    1 + m.index()
}

pub(crate) fn fail(m: MarketId) -> usize {
    1 + MarketId::COUNT + m.index()
}

/// `(market, fulfilled)` of a mode; `None` for idle.
pub(crate) fn decode(mode: usize) -> Option<(MarketId, bool)> {
    match mode {
        OFF => None,
        i if i <= MarketId::COUNT => Some((MarketId::from_index(i - 1), true)),
        i => Some((MarketId::from_index(i - 1 - MarketId::COUNT), false)),
    }
}

/// Per hour and mode: the settlement value of that mode, or `None` when the
/// mode is not available.
pub(crate) type Bonus = [Option<f64>; MODES];

pub(crate) struct ScenarioDp<'a> {
    pub st: &'a Structure,
    pub s: usize,
}

impl ScenarioDp<'_> {
    fn t_steps(&self, h: usize) -> std::ops::Range<usize> {
        let k = self.st.steps_per_hour;
        h * k..(h + 1) * k
    }

    /// Value before the hour given the value `v` after it.
    fn backward(&self, h: usize, mode: usize, v: &Plf) -> Plf {
        let st = self.st;
        let hd = st.hour(self.s, h);
        let mut v = v.clone();
        for t in self.t_steps(h).rev() {
            let sd = st.step(self.s, t);
            v = match decode(mode) {
                None => v,
                Some((m, true)) => {
                    let i = m.index();
                    let (dch, ch) = (sd.dch[i], sd.ch[i]);
                    if (dch > 0.0 && sd.dch_blocked[i]) || (ch > 0.0 && sd.ch_blocked[i]) {
                        return Plf::default();
                    }
                    let pay = if m.is_frequency() { hd.up * dch - hd.down * ch } else { 0.0 };
                    v.shift(dch - ch, pay)
                }
                Some((m, false)) => {
                    let i = m.index();
                    let dch = if sd.dch_blocked[i] { 0.0 } else { sd.dch[i] };
                    let ch = if sd.ch_blocked[i] { 0.0 } else { sd.ch[i] };
                    let (up, down) = if m.is_frequency() { (hd.up, hd.down) } else { (0.0, 0.0) };
                    let mut w = v;
                    if dch > 0.0 {
                        w = w.sup_convolve(0.0, dch, up);
                    }
                    if ch > 0.0 {
                        w = w.sup_convolve(-ch, 0.0, down);
                    }
                    w
                }
            };
            if t > 0 {
                let prev = st.step(self.s, t - 1);
                v = v.restrict(prev.lo, prev.hi);
            }
            if v.is_empty() {
                return v;
            }
        }
        v
    }

    /// Best value to reach each SOC after the hour, given `f` before it.
    fn forward(&self, h: usize, mode: usize, f: &Plf) -> Plf {
        let st = self.st;
        let hd = st.hour(self.s, h);
        let mut f = f.clone();
        for t in self.t_steps(h) {
            let sd = st.step(self.s, t);
            f = match decode(mode) {
                None => f,
                Some((m, true)) => {
                    let i = m.index();
                    let (dch, ch) = (sd.dch[i], sd.ch[i]);
                    if (dch > 0.0 && sd.dch_blocked[i]) || (ch > 0.0 && sd.ch_blocked[i]) {
                        return Plf::default();
                    }
                    let pay = if m.is_frequency() { hd.up * dch - hd.down * ch } else { 0.0 };
                    f.shift(ch - dch, pay)
                }
                Some((m, false)) => {
                    let i = m.index();
                    let dch = if sd.dch_blocked[i] { 0.0 } else { sd.dch[i] };
                    let ch = if sd.ch_blocked[i] { 0.0 } else { sd.ch[i] };
                    let (up, down) = if m.is_frequency() { (hd.up, hd.down) } else { (0.0, 0.0) };
                    let mut g = f;
                    if dch > 0.0 {
                        g = g.sup_convolve(-dch, 0.0, -up);
                    }
                    if ch > 0.0 {
                        g = g.sup_convolve(0.0, ch, -down);
                    }
                    g
                }
            };
            f = f.restrict(sd.lo, sd.hi);
            if f.is_empty() {
                return f;
            }
        }
        f
    }

    fn with_target(&self, h: usize, v: Plf) -> Plf {
        match self.st.hour(self.s, h).target {
            Some((level, weight)) => v.sub_abs(level, weight),
            None => v,
        }
    }

    /// Value functions after each hour (target penalty included), the value
    /// before each hour per mode when `keep`, and the value from `m_0`.
    #[allow(clippy::type_complexity)]
    fn backward_all(&self, bonus: &[Bonus], keep: bool) -> Option<(f64, Vec<Plf>, Vec<Vec<(usize, Plf)>>)> {
        let st = self.st;
        let n_h = st.hours;
        let last = st.step(self.s, n_h * st.steps_per_hour - 1);
        let mut after: Vec<Plf> = if keep { vec![Plf::default(); n_h] } else { Vec::new() };
        let mut by_mode: Vec<Vec<(usize, Plf)>> = if keep { vec![Vec::new(); n_h] } else { Vec::new() };
        let mut v = Plf::constant(last.lo, last.hi, 0.0);
        let mut parts: Vec<(usize, Plf)> = Vec::with_capacity(MODES);
        for h in (0..n_h).rev() {
            let w = self.with_target(h, v);
            parts.clear();
            for (mode, b) in bonus[h].iter().enumerate() {
                if let Some(b) = *b {
                    let p = self.backward(h, mode, &w);
                    if !p.is_empty() {
                        parts.push((mode, p.shift(0.0, b)));
                    }
                }
            }
            v = Plf::max_all(parts.iter().map(|(_, p)| p));
            if keep {
                after[h] = w;
                by_mode[h] = std::mem::take(&mut parts);
            }
            if v.is_empty() {
                return None;
            }
        }
        Some((v.eval(st.m0[self.s])?, after, by_mode))
    }

    /// Value functions at the end of each step of hour `h` under `mode`,
    /// in step order, given the value `w` after the hour.
    fn step_values(&self, h: usize, mode: usize, w: &Plf) -> Vec<Plf> {
        let k = self.st.steps_per_hour;
        let mut out = vec![Plf::default(); k];
        out[k - 1] = w.clone();
        for i in (1..k).rev() {
            // one-step chain: value at the end of step i-1
            let t = h * k + i;
            out[i - 1] = self.step_back(h, t, mode, &out[i]);
        }
        out
    }

    fn step_back(&self, h: usize, t: usize, mode: usize, v: &Plf) -> Plf {
        let st = self.st;
        let hd = st.hour(self.s, h);
        let sd = st.step(self.s, t);
        let v = match decode(mode) {
            None => v.clone(),
            Some((m, true)) => {
                let i = m.index();
                let pay = if m.is_frequency() { hd.up * sd.dch[i] - hd.down * sd.ch[i] } else { 0.0 };
                v.shift(sd.dch[i] - sd.ch[i], pay)
            }
            Some((m, false)) => {
                let (dch, ch, up, down) = self.fail_window(h, t, m);
                let mut w = v.clone();
                if dch > 0.0 {
                    w = w.sup_convolve(0.0, dch, up);
                }
                if ch > 0.0 {
                    w = w.sup_convolve(-ch, 0.0, down);
                }
                w
            }
        };
        let prev = st.step(self.s, t - 1);
        v.restrict(prev.lo, prev.hi)
    }

    /// Discharge and charge limits and their per-unit energy value in a
    /// failed hour.
    fn fail_window(&self, h: usize, t: usize, m: MarketId) -> (f64, f64, f64, f64) {
        let hd = self.st.hour(self.s, h);
        let sd = self.st.step(self.s, t);
        let i = m.index();
        let dch = if sd.dch_blocked[i] { 0.0 } else { sd.dch[i] };
        let ch = if sd.ch_blocked[i] { 0.0 } else { sd.ch[i] };
        let (up, down) = if m.is_frequency() { (hd.up, hd.down) } else { (0.0, 0.0) };
        (dch, ch, up, down)
    }

    /// Optimal value from `m_0` and, when `want_modes`, a mode per hour
    /// attaining it. `None` when no allowed mode sequence is feasible.
    pub fn solve(&self, bonus: &[Bonus], want_modes: bool) -> Option<(f64, Vec<usize>)> {
        let (value, after, by_mode) = self.backward_all(bonus, want_modes)?;
        if !want_modes {
            return Some((value, Vec::new()));
        }
        let st = self.st;
        let k = st.steps_per_hour;
        let mut modes = Vec::with_capacity(st.hours);
        let mut x = st.m0[self.s];
        for h in 0..st.hours {
            let (mode, _) = by_mode[h]
                .iter()
                .filter_map(|(mode, p)| Some((*mode, p.eval(x)?)))
                .fold(None, |best: Option<(usize, f64)>, c| match best {
                    Some(b) if b.1 >= c.1 => Some(b),
                    _ => Some(c),
                })?;
            modes.push(mode);
            let values = self.step_values(h, mode, &after[h]);
            for (i, g) in values.iter().enumerate() {
                let t = h * k + i;
                let sd = st.step(self.s, t);
                match decode(mode) {
                    None => {}
                    Some((m, true)) => x -= sd.dch[m.index()] - sd.ch[m.index()],
                    Some((m, false)) => {
                        let (dch, ch, up, down) = self.fail_window(h, t, m);
                        if ch > 0.0 {
                            let mid = if dch > 0.0 { g.sup_convolve(0.0, dch, up) } else { g.clone() };
                            x -= mid.argmax_shift(x, -ch, 0.0, down)?;
                        }
                        if dch > 0.0 {
                            x -= g.argmax_shift(x, 0.0, dch, up)?;
                        }
                    }
                }
            }
        }
        Some((value, modes))
    }

    /// For every hour and available mode, an upper bound on the value of a
    /// sequence that uses that mode in that hour, leaving out the hour's own
    /// bonus. Exact unless the forward functions had to be coarsened.
    pub fn mode_scores(&self, bonus: &[Bonus]) -> Option<Vec<[Option<f64>; MODES]>> {
        let (_, after, _) = self.backward_all(bonus, true)?;
        let mut scores = vec![[None; MODES]; self.st.hours];
        let mut f = Plf::point(self.st.m0[self.s], 0.0);
        let mut parts: Vec<Plf> = Vec::with_capacity(MODES);
        for h in 0..self.st.hours {
            parts.clear();
            for (mode, b) in bonus[h].iter().enumerate() {
                if let Some(b) = *b {
                    let g = self.forward(h, mode, &f);
                    scores[h][mode] = g.sum_max(&after[h]);
                    if !g.is_empty() {
                        parts.push(g.shift(0.0, b));
                    }
                }
            }
            f = self.with_target(h, Plf::max_all(parts.iter()));
            if f.is_empty() {
                return None;
            }
            if f.len() > COARSE_AT {
                // the reachable set can split into exponentially many pieces
                let sd = self.st.step(self.s, (h + 1) * self.st.steps_per_hour - 1);
                f = f.coarsen(sd.lo, sd.hi, COARSE_CELLS);
            }
        }
        Some(scores)
    }
}
