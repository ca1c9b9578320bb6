//! The bifunction `Psi(v, u) = sum_{D x (0,T)} theta(v) |u|^beta`.

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::field::Field;
use crate::gamma::{analytic_upper_bound, GammaMode};
use crate::grid::Grid;
use crate::operators::friction::Interval;
use crate::scalar::{bisect, solve_inclusion};
use crate::space::NormParams;

/// Weight function `theta` with known bounds and Lipschitz constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Theta {
    Constant {
        value: f64,
    },
    /// `lo + (hi - lo) / (1 + exp(-k s))`.
    Sigmoid {
        lo: f64,
        hi: f64,
        k: f64,
    },
}

impl Theta {
    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            Theta::Constant { value } => value,
            Theta::Sigmoid { lo, hi, k } => lo + (hi - lo) / (1.0 + (-k * s).exp()),
        }
    }

    /// `(c_theta, d_theta)`.
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            Theta::Constant { value } => (value, value),
            Theta::Sigmoid { lo, hi, .. } => (lo, hi),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match *self {
            Theta::Constant { .. } => 0.0,
            Theta::Sigmoid { lo, hi, k } => (hi - lo) * k.abs() / 4.0,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Theta::Constant { .. })
    }
}

/// Built-in `Psi` on the node mask `nodes` of every time row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiSpec {
    pub theta: Theta,
    pub beta: f64,
    pub nodes: Vec<usize>,
    #[serde(default)]
    pub c_psi: f64,
    #[serde(default)]
    pub d_psi: f64,
    #[serde(default)]
    pub e_psi: f64,
}

impl PsiSpec {
    pub fn validate(&self, grid: &Grid, p: f64) -> Result<()> {
        let (c, d) = self.theta.bounds();
        contract(c > 0.0 && c <= d && d.is_finite(), || {
            format!("theta bounds must satisfy 0 < {c} <= {d}")
        })?;
        if let Theta::Sigmoid { k, .. } = self.theta {
            contract(k.is_finite(), || "sigmoid slope must be finite".into())?;
        }
        contract(self.beta >= 1.0 && self.beta < p, || {
            format!("need 1 <= beta < p, got beta = {}", self.beta)
        })?;
        contract(
            self.c_psi >= 0.0 && self.d_psi >= 0.0 && self.e_psi >= 0.0,
            || "Psi constants must be nonnegative".into(),
        )?;
        GammaMode::Restriction {
            nodes: self.nodes.clone(),
        }
        .validate(grid)
    }

    /// Node mask as a boolean row.
    pub fn mask(&self, grid: &Grid) -> Vec<bool> {
        let mut m = vec![false; grid.nodes()];
        for &i in &self.nodes {
            m[i] = true;
        }
        m
    }

    /// Exponent of the H(Psi)(ii) bound used by this crate.
    pub fn eta(&self) -> f64 {
        1.0
    }

    /// `|D x (0,T)|` in quadrature weights.
    pub fn measure(&self, grid: &Grid) -> f64 {
        grid.t_final * self.nodes.iter().map(|&i| grid.node_weight(i)).sum::<f64>()
    }

    /// Embedding constant of `X` into `L^p(D x (0,T))`.
    pub fn embedding_constant(&self, grid: &Grid, np: NormParams) -> f64 {
        analytic_upper_bound(
            grid,
            np,
            &GammaMode::Restriction {
                nodes: self.nodes.clone(),
            },
        )
    }

    /// `b_Psi(y1, y2)` given `||y1||_X + ||y2||_X`.
    pub fn b_psi(&self, grid: &Grid, np: NormParams, norm_sum: f64) -> f64 {
        let (_, d_theta) = self.theta.bounds();
        let cx = self.embedding_constant(grid, np);
        let m = self.measure(grid);
        if self.beta == 1.0 {
            d_theta * m.powf(1.0 / np.q()) * cx
        } else {
            d_theta
                * self.beta
                * m.powf(1.0 - self.beta / np.p())
                * cx.powf(self.beta)
                * norm_sum.powf(self.beta - 1.0)
        }
    }
}

pub fn psi_eval(grid: &Grid, spec: &PsiSpec, v: &Field, u: &Field) -> f64 {
    let dt = grid.dt();
    let mut s = 0.0;
    for n in 0..u.nt() {
        for &i in &spec.nodes {
            s += dt
                * grid.node_weight(i)
                * spec.theta.eval(v.get(n, i))
                * u.get(n, i).abs().powf(spec.beta);
        }
    }
    s
}

/// Minimizer over `bx` of `(w - a)^2 / 2 + t theta_val |w|^beta`.
pub fn psi_scalar_prox(spec: &PsiSpec, theta_val: f64, t: f64, a: f64, bx: Interval) -> f64 {
    let kappa = t * theta_val;
    if bx.lo <= 0.0 && bx.hi >= 0.0 {
        return solve_inclusion(|w| w - a, kappa, spec.beta, bx.lo, bx.hi);
    }
    // 0 outside the box: the Psi term is smooth on it
    let m = |w: f64| w - a + kappa * spec.beta * w.abs().powf(spec.beta - 1.0) * w.signum();
    if m(bx.lo) >= 0.0 {
        bx.lo
    } else if m(bx.hi) <= 0.0 {
        bx.hi
    } else {
        bisect(&m, bx.lo, bx.hi)
    }
}
