//! Scalar piecewise-C1 feedback laws `j` and their Clarke subdifferentials.

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::field::Field;
use crate::gamma::GammaMode;
use crate::grid::Grid;
use crate::scalar::solve_increasing;

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "invalid interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    pub fn clip(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }

    pub fn contains(&self, v: f64, tol: f64) -> bool {
        v >= self.lo - tol && v <= self.hi + tol
    }

    pub fn distance(&self, v: f64) -> f64 {
        (self.lo - v).max(v - self.hi).max(0.0)
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Per-node intervals shaped like a feedback-side field.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalField {
    nt: usize,
    cols: usize,
    data: Vec<Interval>,
}

impl IntervalField {
    pub fn from_fn(nt: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Interval) -> Self {
        let mut data = Vec::with_capacity(nt * cols);
        for n in 0..nt {
            for j in 0..cols {
                data.push(f(n, j));
            }
        }
        IntervalField { nt, cols, data }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nt, self.cols)
    }

    pub fn get(&self, n: usize, j: usize) -> Interval {
        self.data[n * self.cols + j]
    }

    pub fn lo(&self) -> Field {
        Field::from_fn(self.nt, self.cols, |n, j| self.get(n, j).lo)
    }

    pub fn hi(&self) -> Field {
        Field::from_fn(self.nt, self.cols, |n, j| self.get(n, j).hi)
    }

    /// Largest distance of the entries of `xi` from their intervals.
    pub fn max_distance(&self, xi: &Field) -> f64 {
        (0..self.nt)
            .flat_map(|n| (0..self.cols).map(move |j| (n, j)))
            .map(|(n, j)| self.get(n, j).distance(xi.get(n, j)))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LawKind {
    /// `l0 |s|`.
    Abs,
    /// `-l0 |s|`, nonconvex.
    NegAbs,
    /// Continuous piecewise linear, `j(0) = 0`, slopes `params` between `kinks`.
    Zigzag,
    /// `l0 |s|^(theta_g + 1) / (theta_g + 1)`.
    SmoothPower,
}

/// Separable locally Lipschitz integrand of the feedback functional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrictionLaw {
    pub kind: LawKind,
    pub params: Vec<f64>,
    #[serde(default)]
    pub kinks: Vec<f64>,
    #[serde(default = "default_theta_g")]
    pub theta_g: f64,
}

fn default_theta_g() -> f64 {
    1.0
}

impl FrictionLaw {
    pub fn abs(l0: f64) -> Self {
        FrictionLaw {
            kind: LawKind::Abs,
            params: vec![l0],
            kinks: vec![],
            theta_g: 1.0,
        }
    }

    pub fn neg_abs(l0: f64) -> Self {
        FrictionLaw {
            kind: LawKind::NegAbs,
            params: vec![l0],
            kinks: vec![],
            theta_g: 1.0,
        }
    }

    pub fn zigzag(slopes: Vec<f64>, kinks: Vec<f64>) -> Self {
        FrictionLaw {
            kind: LawKind::Zigzag,
            params: slopes,
            kinks,
            theta_g: 1.0,
        }
    }

    pub fn smooth_power(l0: f64, theta_g: f64) -> Self {
        FrictionLaw {
            kind: LawKind::SmoothPower,
            params: vec![l0],
            kinks: vec![],
            theta_g,
        }
    }

    pub fn validate(&self) -> Result<()> {
        contract(self.params.iter().all(|v| v.is_finite()), || {
            "law parameters must be finite".into()
        })?;
        match self.kind {
            LawKind::Abs | LawKind::NegAbs => {
                contract(self.params.len() == 1 && self.params[0] >= 0.0, || {
                    format!("{:?} law takes one nonnegative parameter", self.kind)
                })
            }
            LawKind::SmoothPower => {
                contract(self.params.len() == 1 && self.params[0] >= 0.0, || {
                    "smooth-power law takes one nonnegative parameter".into()
                })?;
                contract(self.theta_g > 0.0 && self.theta_g.is_finite(), || {
                    "theta_g must be positive".into()
                })
            }
            LawKind::Zigzag => {
                contract(self.params.len() == self.kinks.len() + 1, || {
                    format!(
                        "zigzag needs {} slopes for {} kinks",
                        self.kinks.len() + 1,
                        self.kinks.len()
                    )
                })?;
                contract(self.kinks.windows(2).all(|w| w[0] < w[1]), || {
                    "zigzag kinks must increase".into()
                })
            }
        }
    }

    /// Control parameters `l` (the slope or scale list).
    pub fn with_params(&self, l: &[f64]) -> Self {
        FrictionLaw {
            params: l.to_vec(),
            ..self.clone()
        }
    }

    pub fn kink_points(&self) -> Vec<f64> {
        match self.kind {
            LawKind::Abs | LawKind::NegAbs => vec![0.0],
            LawKind::Zigzag => self.kinks.clone(),
            LawKind::SmoothPower => vec![],
        }
    }

    pub fn is_single_valued(&self) -> bool {
        match self.kind {
            LawKind::SmoothPower => true,
            LawKind::Abs | LawKind::NegAbs => self.params[0] == 0.0,
            LawKind::Zigzag => self.params.windows(2).all(|w| w[0] == w[1]),
        }
    }

    fn zigzag_slope(&self, s: f64, right: bool) -> f64 {
        let idx = self
            .kinks
            .iter()
            .filter(|&&k| if right { k <= s } else { k < s })
            .count();
        self.params[idx]
    }

    pub fn value(&self, s: f64) -> f64 {
        match self.kind {
            LawKind::Abs => self.params[0] * s.abs(),
            LawKind::NegAbs => -self.params[0] * s.abs(),
            LawKind::SmoothPower => {
                let t = self.theta_g + 1.0;
                self.params[0] * s.abs().powf(t) / t
            }
            LawKind::Zigzag => {
                // integrate the slope from 0 to s across the kinks in between
                let (a, b, sign) = if s >= 0.0 {
                    (0.0, s, 1.0)
                } else {
                    (s, 0.0, -1.0)
                };
                let mut cuts = vec![a];
                cuts.extend(self.kinks.iter().copied().filter(|&k| k > a && k < b));
                cuts.push(b);
                let mut acc = 0.0;
                for w in cuts.windows(2) {
                    acc += self.zigzag_slope(0.5 * (w[0] + w[1]), true) * (w[1] - w[0]);
                }
                sign * acc
            }
        }
    }

    /// Left and right derivatives at `s`.
    pub fn one_sided(&self, s: f64) -> (f64, f64) {
        let l0 = self.params[0];
        match self.kind {
            LawKind::Abs if s == 0.0 => (-l0, l0),
            LawKind::Abs => (l0 * s.signum(), l0 * s.signum()),
            LawKind::NegAbs if s == 0.0 => (l0, -l0),
            LawKind::NegAbs => (-l0 * s.signum(), -l0 * s.signum()),
            LawKind::SmoothPower => {
                let d = self.smooth_derivative(s);
                (d, d)
            }
            LawKind::Zigzag => (self.zigzag_slope(s, false), self.zigzag_slope(s, true)),
        }
    }

    fn smooth_derivative(&self, s: f64) -> f64 {
        if s == 0.0 {
            0.0
        } else {
            (self.params[0] * s.abs().powf(self.theta_g)).copysign(s)
        }
    }

    /// Raw growth data `(c_J, d_J, theta_g)` with `|j'(s)| <= c_J |s|^theta_g + d_J`.
    pub fn growth(&self) -> (f64, f64, f64) {
        match self.kind {
            LawKind::Abs | LawKind::NegAbs => (0.0, self.params[0], self.theta_g),
            LawKind::Zigzag => (
                0.0,
                self.params.iter().fold(0.0, |m, a| m.max(a.abs())),
                self.theta_g,
            ),
            LawKind::SmoothPower => (self.params[0], 0.0, self.theta_g),
        }
    }

    /// Range of all derivative values when it is bounded.
    pub fn derivative_range(&self) -> Option<Interval> {
        let l0 = self.params[0];
        match self.kind {
            LawKind::Abs | LawKind::NegAbs => Some(Interval::new(-l0, l0)),
            LawKind::Zigzag => {
                let lo = self.params.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = self
                    .params
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max);
                Some(Interval::new(lo, hi))
            }
            LawKind::SmoothPower if l0 == 0.0 => Some(Interval::point(0.0)),
            LawKind::SmoothPower => None,
        }
    }

    /// Points `(s, eta)` of the graph of the Clarke subdifferential on the
    /// line `eta + rho s = v`, ordered by `s`.
    pub fn line_intersections(&self, v: f64, rho: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        match self.kind {
            LawKind::SmoothPower => {
                let s = solve_increasing(|s| self.smooth_derivative(s) + rho * s - v, v / rho);
                out.push((s, self.smooth_derivative(s)));
            }
            _ => {
                let kinks = self.kink_points();
                let slopes: Vec<f64> = match self.kind {
                    LawKind::Zigzag => self.params.clone(),
                    LawKind::Abs => vec![-self.params[0], self.params[0]],
                    _ => vec![self.params[0], -self.params[0]],
                };
                for (m, &a) in slopes.iter().enumerate() {
                    let s = (v - a) / rho;
                    let left_ok = m == 0 || s > kinks[m - 1];
                    let right_ok = m == kinks.len() || s < kinks[m];
                    if left_ok && right_ok {
                        out.push((s, a));
                    }
                    if m < kinks.len() {
                        let k = kinks[m];
                        let eta = v - rho * k;
                        if clarke_subdiff(self, k).contains(eta, 0.0) {
                            out.push((k, eta));
                        }
                    }
                }
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
        out
    }
}

/// Clarke subdifferential: hull of the one-sided derivatives.
pub fn clarke_subdiff(law: &FrictionLaw, s: f64) -> Interval {
    let (l, r) = law.one_sided(s);
    Interval::new(l.min(r), l.max(r))
}

/// Clarke directional derivative `j0(s; v) = max { eta v : eta in d_C j(s) }`.
pub fn clarke_dirderiv(law: &FrictionLaw, s: f64, v: f64) -> f64 {
    let iv = clarke_subdiff(law, s);
    if v >= 0.0 {
        iv.hi * v
    } else {
        iv.lo * v
    }
}

/// Nodewise `d_C j(y)` on weighted feedback columns; zero-weight columns get `[0, 0]`.
pub fn apply_g(grid: &Grid, mode: &GammaMode, law: &FrictionLaw, y: &Field) -> IntervalField {
    let w = mode.y_weights(grid);
    IntervalField::from_fn(y.nt(), y.cols(), |n, j| {
        if w[j] > 0.0 {
            clarke_subdiff(law, y.get(n, j))
        } else {
            Interval::point(0.0)
        }
    })
}
