//! Piecewise-linear functions of the SOC that need be neither concave nor
//! continuous: the pointwise maximum over dispatch modes of value functions
//! with different domains.
//!
//! A function is a list of closed segments; its value at `x` is the largest
//! value of any segment containing `x` and it is undefined (minus infinity)
//! elsewhere. All functions produced here are upper semicontinuous, so the
//! maximum over a closed window is attained and the closure representation
//! is exact.

const TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Seg {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Seg {
    fn point(x: f64, y: f64) -> Seg {
        Seg { x0: x, x1: x, y0: y, y1: y }
    }

    fn is_point(&self) -> bool {
        self.x1 - self.x0 <= TOL
    }

    fn slope(&self) -> f64 {
        if self.is_point() {
            0.0
        } else {
            (self.y1 - self.y0) / (self.x1 - self.x0)
        }
    }

    fn at(&self, x: f64) -> f64 {
        if self.is_point() {
            self.y0.max(self.y1)
        } else if x <= self.x0 {
            self.y0
        } else if x >= self.x1 {
            self.y1
        } else {
            self.y0 + (self.y1 - self.y0) * ((x - self.x0) / (self.x1 - self.x0))
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub(crate) struct Plf {
    /// Sorted by `x0`, interiors pairwise disjoint.
    segs: Vec<Seg>,
}

impl Plf {
    pub fn constant(lo: f64, hi: f64, value: f64) -> Plf {
        Plf {
            segs: vec![Seg {
                x0: lo,
                x1: hi.max(lo),
                y0: value,
                y1: value,
            }],
        }
    }

    pub fn point(x: f64, value: f64) -> Plf {
        Plf {
            segs: vec![Seg::point(x, value)],
        }
    }

    pub fn len(&self) -> usize {
        self.segs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segs.is_empty()
    }

    #[cfg(test)]
    pub fn segments(&self) -> &[Seg] {
        &self.segs
    }

    pub fn eval(&self, x: f64) -> Option<f64> {
        let end = self.segs.partition_point(|s| s.x0 <= x + TOL);
        let mut best: Option<f64> = None;
        for s in self.segs[..end].iter().rev() {
            if s.x1 >= x - TOL {
                let v = s.at(x);
                best = Some(best.map_or(v, |b: f64| b.max(v)));
            } else if !s.is_point() {
                break;
            }
        }
        best
    }

    #[cfg(test)]
    pub fn max_value(&self) -> Option<f64> {
        self.segs.iter().map(|s| s.y0.max(s.y1)).reduce(f64::max)
    }

    /// `g(x) = f(x - d) + c`.
    pub fn shift(&self, d: f64, c: f64) -> Plf {
        Plf {
            segs: self
                .segs
                .iter()
                .map(|s| Seg {
                    x0: s.x0 + d,
                    x1: s.x1 + d,
                    y0: s.y0 + c,
                    y1: s.y1 + c,
                })
                .collect(),
        }
    }

    /// `g(x) = f(x) + slope * x`.
    fn add_slope(&self, slope: f64) -> Plf {
        Plf {
            segs: self
                .segs
                .iter()
                .map(|s| Seg {
                    y0: s.y0 + slope * s.x0,
                    y1: s.y1 + slope * s.x1,
                    ..*s
                })
                .collect(),
        }
    }

    pub fn restrict(&self, lo: f64, hi: f64) -> Plf {
        let mut segs = Vec::with_capacity(self.segs.len());
        for s in &self.segs {
            if s.x1 < lo - TOL || s.x0 > hi + TOL {
                continue;
            }
            let a = s.x0.max(lo);
            let b = s.x1.min(hi);
            if b - a <= TOL {
                let x = a.min(b).clamp(s.x0, s.x1);
                segs.push(Seg::point(x, s.at(x)));
            } else {
                segs.push(Seg {
                    x0: a,
                    x1: b,
                    y0: s.at(a),
                    y1: s.at(b),
                });
            }
        }
        Plf { segs }
    }

    /// Pointwise maximum.
    #[cfg(test)]
    pub fn max(&self, other: &Plf) -> Plf {
        if self.is_empty() {
            return other.clone();
        }
        if other.is_empty() {
            return self.clone();
        }
        envelope(self.segs.iter().chain(&other.segs).copied().collect())
    }

    /// Pointwise maximum of many functions.
    pub fn max_all<'a>(fs: impl IntoIterator<Item = &'a Plf>) -> Plf {
        envelope(fs.into_iter().flat_map(|f| f.segs.iter().copied()).collect())
    }

    /// `W(x) = max { f(y) : x + a <= y <= x + b }`.
    fn window_max(&self, a: f64, b: f64) -> Plf {
        let mut segs: Vec<Seg> = Vec::with_capacity(self.segs.len() * 4);
        segs.extend(self.shift(-a, 0.0).segs);
        segs.extend(self.shift(-b, 0.0).segs);
        // Inside the window the maximum sits at a local peak; maxima at the
        // window's edges are covered by the two shifted copies.
        let n = self.segs.len();
        for (i, s) in self.segs.iter().enumerate() {
            let point = s.is_point();
            let rising = !point && s.y1 > s.y0;
            let falling = !point && s.y1 < s.y0;
            let left_peak = !rising
                && !(i > 0 && {
                    let p = &self.segs[i - 1];
                    !p.is_point() && (p.x1 - s.x0).abs() <= TOL && p.y1 > p.y0 && p.y1 >= s.y0
                });
            let right_peak = !point
                && !falling
                && !(i + 1 < n && {
                    let q = &self.segs[i + 1];
                    !q.is_point() && (q.x0 - s.x1).abs() <= TOL && q.y1 > q.y0 && q.y0 >= s.y1
                });
            for (x, y, keep) in [(s.x0, s.y0, left_peak), (s.x1, s.y1, right_peak)] {
                if keep {
                    segs.push(Seg {
                        x0: x - b,
                        x1: x - a,
                        y0: y,
                        y1: y,
                    });
                }
            }
        }
        envelope(segs)
    }

    /// `g(y) = max { f(y - u) + slope * u : u0 <= u <= u1 }`.
    pub fn sup_convolve(&self, u0: f64, u1: f64, slope: f64) -> Plf {
        if self.is_empty() {
            return Plf::default();
        }
        if u1 - u0 <= TOL {
            return self.shift(u0, slope * u0);
        }
        // with w = y - u: g(y) = slope*y + max { f(w) - slope*w : w in [y-u1, y-u0] }
        self.add_slope(-slope).window_max(-u1, -u0).add_slope(slope)
    }

    /// `g(x) = f(x) - weight * |x - level|`.
    pub fn sub_abs(&self, level: f64, weight: f64) -> Plf {
        let mut segs = Vec::with_capacity(self.segs.len() + 1);
        for s in &self.segs {
            if !s.is_point() && s.x0 < level - TOL && s.x1 > level + TOL {
                let y = s.at(level);
                segs.push(Seg { x1: level, y1: y, ..*s });
                segs.push(Seg { x0: level, y0: y, ..*s });
            } else {
                segs.push(*s);
            }
        }
        for s in &mut segs {
            s.y0 -= weight * (s.x0 - level).abs();
            s.y1 -= weight * (s.x1 - level).abs();
        }
        Plf { segs }
    }

    /// An upper bound of `f` with a bounded number of pieces: on each of
    /// `cells` equal parts of `[lo, hi]`, the concave majorant of `f` there.
    /// Exact wherever `f` is concave within a cell.
    pub fn coarsen(&self, lo: f64, hi: f64, cells: usize) -> Plf {
        let width = (hi - lo) / cells as f64;
        let mut out: Vec<Seg> = Vec::new();
        let mut pts: Vec<(f64, f64)> = Vec::new();
        let mut first = 0;
        for c in 0..cells {
            let a = lo + width * c as f64;
            let b = if c + 1 == cells { hi } else { a + width };
            pts.clear();
            while first < self.segs.len() && self.segs[first].x1 < a - TOL {
                first += 1;
            }
            for s in self.segs[first..].iter().take_while(|s| s.x0 <= b + TOL) {
                if s.x1 < a - TOL {
                    continue;
                }
                let x0 = s.x0.max(a);
                let x1 = s.x1.min(b);
                if x1 < x0 {
                    continue;
                }
                pts.push((x0, s.at(x0)));
                pts.push((x1, s.at(x1)));
            }
            if pts.is_empty() {
                continue;
            }
            pts.sort_by(|p, q| p.0.total_cmp(&q.0).then(q.1.total_cmp(&p.1)));
            pts.dedup_by(|q, p| (q.0 - p.0).abs() <= TOL);
            let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
            for &p in &pts {
                while hull.len() >= 2 {
                    let (o, a1) = (hull[hull.len() - 2], hull[hull.len() - 1]);
                    let cross = (a1.0 - o.0) * (p.1 - o.1) - (a1.1 - o.1) * (p.0 - o.0);
                    if cross >= 0.0 {
                        hull.pop();
                    } else {
                        break;
                    }
                }
                hull.push(p);
            }
            if hull.len() == 1 {
                out.push(Seg::point(hull[0].0, hull[0].1));
            } else {
                for w in hull.windows(2) {
                    out.push(Seg {
                        x0: w[0].0,
                        x1: w[1].0,
                        y0: w[0].1,
                        y1: w[1].1,
                    });
                }
            }
        }
        envelope(out)
    }

    /// A `u` in `[lo, hi]` maximising `f(c - u) + slope * u`.
    pub fn argmax_shift(&self, c: f64, lo: f64, hi: f64, slope: f64) -> Option<f64> {
        let mut best: Option<(f64, f64)> = None;
        let cands = self
            .segs
            .iter()
            .flat_map(|s| [c - s.x0, c - s.x1])
            .filter(|&u| u > lo && u < hi)
            .chain([lo, hi]);
        for u in cands {
            if let Some(v) = self.eval(c - u) {
                let v = v + slope * u;
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((u, v));
                }
            }
        }
        best.map(|(u, _)| u)
    }

    /// `max_x f(x) + g(x)`, `None` when the domains do not meet.
    pub fn sum_max(&self, other: &Plf) -> Option<f64> {
        let mut best: Option<f64> = None;
        let xs = self
            .segs
            .iter()
            .chain(&other.segs)
            .flat_map(|s| [s.x0, s.x1]);
        for x in xs {
            if let (Some(a), Some(b)) = (self.eval(x), other.eval(x)) {
                best = Some(best.map_or(a + b, |v: f64| v.max(a + b)));
            }
        }
        best
    }
}

/// Canonical upper envelope of arbitrary closed segments.
fn envelope(mut segs: Vec<Seg>) -> Plf {
    if segs.is_empty() {
        return Plf::default();
    }
    let mut cuts: Vec<f64> = segs.iter().flat_map(|s| [s.x0, s.x1]).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|b, a| *b - *a <= TOL);
    segs.sort_by(|a, b| a.x0.total_cmp(&b.x0));

    let mut pieces: Vec<Seg> = Vec::with_capacity(cuts.len() * 2);
    // value at each cut and whether it needs its own point
    let mut point_vals: Vec<f64> = Vec::with_capacity(cuts.len());
    let mut active: Vec<Seg> = Vec::new();
    let mut next = 0;
    let mut interval_start: Vec<usize> = Vec::with_capacity(cuts.len());
    let mut lines: Vec<(f64, f64)> = Vec::new();
    for (i, &c) in cuts.iter().enumerate() {
        while next < segs.len() && segs[next].x0 <= c + TOL {
            active.push(segs[next]);
            next += 1;
        }
        active.retain(|s| s.x1 >= c - TOL);
        let pv = active.iter().map(|s| s.at(c)).fold(f64::NEG_INFINITY, f64::max);
        point_vals.push(pv);
        interval_start.push(pieces.len());
        if let Some(&b) = cuts.get(i + 1) {
            lines.clear();
            lines.extend(
                active
                    .iter()
                    .filter(|s| !s.is_point() && s.x1 >= b - TOL)
                    .map(|s| (s.slope(), s.at(c))),
            );
            upper_lines(&lines, c, b, &mut pieces);
        }
    }
    interval_start.push(pieces.len());

    // interleave isolated point values that exceed the neighbouring pieces
    let mut out: Vec<Seg> = Vec::with_capacity(pieces.len() + 4);
    for (i, &c) in cuts.iter().enumerate() {
        let pv = point_vals[i];
        if pv.is_finite() {
            let left = out.last().filter(|s| !s.is_point() && (s.x1 - c).abs() <= TOL).map(|s| s.y1);
            let right = pieces.get(interval_start[i]).filter(|_| interval_start[i] < interval_start[i + 1]).map(|s| s.y0);
            let covered = left.into_iter().chain(right).fold(f64::NEG_INFINITY, f64::max);
            if pv > covered + TOL * (1.0 + pv.abs()) {
                out.push(Seg::point(c, pv));
            }
        }
        out.extend_from_slice(&pieces[interval_start[i]..interval_start[i + 1]]);
    }
    Plf { segs: merge(out) }
}

/// Upper envelope of lines `(slope, value at a)` on `[a, b]`.
fn upper_lines(lines: &[(f64, f64)], a: f64, b: f64, out: &mut Vec<Seg>) {
    if lines.is_empty() {
        return;
    }
    let val = |l: (f64, f64), x: f64| l.1 + l.0 * (x - a);
    let mut cur = lines[0];
    for &l in &lines[1..] {
        if l.1 > cur.1 || (l.1 == cur.1 && l.0 > cur.0) {
            cur = l;
        }
    }
    let mut x = a;
    loop {
        let vc = val(cur, x);
        let mut best: Option<(f64, (f64, f64))> = None;
        for &l in lines {
            if l.0 <= cur.0 {
                continue;
            }
            let xc = x + (vc - val(l, x)).max(0.0) / (l.0 - cur.0);
            if xc < b - TOL && best.is_none_or(|(bx, bl)| xc < bx || (xc == bx && l.0 > bl.0)) {
                best = Some((xc, l));
            }
        }
        match best {
            None => {
                out.push(Seg {
                    x0: x,
                    x1: b,
                    y0: vc,
                    y1: val(cur, b),
                });
                return;
            }
            Some((xc, l)) => {
                if xc > x + TOL {
                    out.push(Seg {
                        x0: x,
                        x1: xc,
                        y0: vc,
                        y1: val(cur, xc),
                    });
                    x = xc;
                }
                cur = l;
            }
        }
    }
}

/// Join adjacent collinear pieces.
fn merge(segs: Vec<Seg>) -> Vec<Seg> {
    let mut out: Vec<Seg> = Vec::with_capacity(segs.len());
    for s in segs {
        if let Some(p) = out.last_mut() {
            if !p.is_point()
                && !s.is_point()
                && (p.x1 - s.x0).abs() <= TOL
                && (p.y1 - s.y0).abs() <= TOL * (1.0 + p.y1.abs())
            {
                let (sp, ss) = (p.slope(), s.slope());
                if (sp - ss).abs() <= 1e-12 * (1.0 + sp.abs()) {
                    p.x1 = s.x1;
                    p.y1 = s.y1;
                    continue;
                }
            }
        }
        out.push(s);
    }
    out
}
