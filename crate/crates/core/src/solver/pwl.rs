//! Concave piecewise-linear functions on a closed interval, used by the
//! enumeration oracle's exact SOC dynamic program.

const EPS: f64 = 1e-12;

/// Concave piecewise-linear function given by breakpoints `xs` (strictly
/// increasing) and values `ys`. A single breakpoint is a point domain.
#[derive(Clone, Debug, PartialEq)]
pub struct ConcavePwl {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl ConcavePwl {
    pub fn constant(lo: f64, hi: f64, value: f64) -> Self {
        if hi - lo <= EPS {
            ConcavePwl {
                xs: vec![lo],
                ys: vec![value],
            }
        } else {
            ConcavePwl {
                xs: vec![lo, hi],
                ys: vec![value, value],
            }
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    pub fn breakpoints(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }

    /// Value at `x`; `None` outside the domain (with a small tolerance).
    pub fn eval(&self, x: f64) -> Option<f64> {
        let (lo, hi) = self.domain();
        if x < lo - 1e-9 || x > hi + 1e-9 {
            return None;
        }
        Some(self.eval_clamped(x))
    }

    fn eval_clamped(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if n == 1 || x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let i = self.xs.partition_point(|&b| b <= x) - 1;
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let w = (x - x0) / (x1 - x0);
        self.ys[i] + w * (self.ys[i + 1] - self.ys[i])
    }

    /// `g(x) = f(x - d) + c`.
    pub fn shift(&self, d: f64, c: f64) -> Self {
        ConcavePwl {
            xs: self.xs.iter().map(|x| x + d).collect(),
            ys: self.ys.iter().map(|y| y + c).collect(),
        }
    }

    /// Restriction to `[lo, hi]`; `None` when the intersection is empty.
    pub fn restrict(&self, lo: f64, hi: f64) -> Option<Self> {
        let (a, b) = self.domain();
        let l = lo.max(a);
        let u = hi.min(b);
        if l > u + 1e-9 {
            return None;
        }
        if u - l <= EPS {
            let x = l.min(u);
            return Some(ConcavePwl {
                xs: vec![x],
                ys: vec![self.eval_clamped(x)],
            });
        }
        let mut xs = vec![l];
        xs.extend(self.xs.iter().copied().filter(|&x| x > l + EPS && x < u - EPS));
        xs.push(u);
        let ys = xs.iter().map(|&x| self.eval_clamped(x)).collect();
        Some(ConcavePwl { xs, ys })
    }

    /// Sup-convolution with the linear piece `u -> slope * u` on `[u0, u1]`:
    /// `g(y) = max { f(x) + slope * u : x + u = y, u0 <= u <= u1 }`.
    pub fn sup_convolve(&self, u0: f64, u1: f64, slope: f64) -> Self {
        let len = u1 - u0;
        let start_x = self.xs[0] + u0;
        let start_y = self.ys[0] + slope * u0;
        if len <= EPS {
            return self.shift(u0, slope * u0);
        }
        // merge segments in decreasing slope order
        let mut segs: Vec<(f64, f64)> = self
            .xs
            .windows(2)
            .zip(self.ys.windows(2))
            .map(|(x, y)| (x[1] - x[0], (y[1] - y[0]) / (x[1] - x[0])))
            .collect();
        let at = segs.partition_point(|&(_, s)| s >= slope);
        segs.insert(at, (len, slope));
        let mut xs = vec![start_x];
        let mut ys = vec![start_y];
        for (l, s) in segs {
            let x = xs.last().unwrap() + l;
            let y = ys.last().unwrap() + s * l;
            xs.push(x);
            ys.push(y);
        }
        ConcavePwl { xs, ys }
    }

    /// `g(x) = f(x) - weight * |x - level|`.
    pub fn sub_abs(&self, level: f64, weight: f64) -> Self {
        let mut xs = self.xs.clone();
        let (lo, hi) = self.domain();
        if level > lo + EPS && level < hi - EPS && !xs.iter().any(|&x| (x - level).abs() <= EPS) {
            let at = xs.partition_point(|&x| x < level);
            xs.insert(at, level);
        }
        let ys = xs
            .iter()
            .map(|&x| self.eval_clamped(x) - weight * (x - level).abs())
            .collect();
        ConcavePwl { xs, ys }
    }

    pub fn is_concave(&self) -> bool {
        let slopes: Vec<f64> = self
            .xs
            .windows(2)
            .zip(self.ys.windows(2))
            .map(|(x, y)| (y[1] - y[0]) / (x[1] - x[0]))
            .collect();
        slopes.windows(2).all(|s| s[1] <= s[0] + 1e-9)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_sup(f: &ConcavePwl, u0: f64, u1: f64, slope: f64, y: f64) -> Option<f64> {
        let n = 4000;
        (0..=n)
            .filter_map(|i| {
                let u = u0 + (u1 - u0) * i as f64 / n as f64;
                f.eval(y - u).map(|v| v + slope * u)
            })
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
    }

    #[test]
    fn eval_interpolates() {
        let f = ConcavePwl::constant(0.0, 1.0, 2.0).sub_abs(0.5, 4.0);
        assert_eq!(f.eval(0.5), Some(2.0));
        assert_eq!(f.eval(0.25), Some(1.0));
        assert_eq!(f.eval(1.0), Some(0.0));
        assert_eq!(f.eval(1.1), None);
        assert!(f.is_concave());
    }

    #[test]
    fn restrict_to_disjoint_interval_is_empty() {
        let f = ConcavePwl::constant(0.0, 1.0, 0.0).shift(2.0, 0.0);
        assert!(f.restrict(0.0, 1.0).is_none());
        let g = f.restrict(0.0, 2.5).unwrap();
        assert_eq!(g.domain(), (2.0, 2.5));
    }

    #[test]
    fn restrict_to_touching_point() {
        let f = ConcavePwl::constant(0.0, 1.0, 3.0);
        let g = f.restrict(1.0, 2.0).unwrap();
        assert_eq!(g.domain(), (1.0, 1.0));
        assert_eq!(g.eval(1.0), Some(3.0));
    }

    #[test]
    fn sup_convolve_with_discharge_segment() {
        // value 0 on [0.1, 1]; discharging up to 0.2 pays 60 per unit
        let f = ConcavePwl::constant(0.1, 1.0, 0.0);
        let g = f.sup_convolve(0.0, 0.2, 60.0).restrict(0.1, 1.0).unwrap();
        assert!((g.eval(0.5).unwrap() - 12.0).abs() < 1e-12);
        assert!((g.eval(0.2).unwrap() - 6.0).abs() < 1e-12);
        assert!((g.eval(0.1).unwrap()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn sup_convolve_matches_grid_search(
            a in -5.0f64..5.0,
            b in -5.0f64..5.0,
            level in 0.2f64..0.9,
            u_len in 0.0f64..0.3,
            neg in any::<bool>(),
            slope in -50.0f64..50.0,
            y in 0.0f64..1.2,
        ) {
            let f = ConcavePwl::constant(0.1, 1.0, a).sub_abs(level, b.abs());
            let (u0, u1) = if neg { (-u_len, 0.0) } else { (0.0, u_len) };
            let g = f.sup_convolve(u0, u1, slope);
            prop_assert!(g.is_concave());
            let exact = g.eval(y);
            let approx = brute_sup(&f, u0, u1, slope, y);
            match (exact, approx) {
                (Some(e), Some(p)) => prop_assert!(e >= p - 1e-9 && e - p < 0.05, "{e} vs {p}"),
                (None, None) => {}
                (e, p) => prop_assert!(
                    e.is_some() && (y - g.domain().0).abs().min((y - g.domain().1).abs()) < 1e-3,
                    "{e:?} vs {p:?}"
                ),
            }
        }
    }
}
