//! The feedback operator `gamma`: boundary trace or subdomain restriction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{contract, EqviError, Result};
use crate::field::Field;
use crate::grid::{BoundaryMode, Grid};
use crate::space::{check_state, row_norm_pow, row_sup_constants, solve_tridiagonal, NormParams};

/// Which part of the state the feedback law sees.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum GammaMode {
    /// Values at `a` and `b`; requires free boundary mode.
    BoundaryTrace,
    /// Values on the listed nodes of every time row, zero elsewhere.
    Restriction { nodes: Vec<usize> },
}

impl GammaMode {
    pub fn full_restriction(grid: &Grid) -> Self {
        GammaMode::Restriction {
            nodes: (0..grid.nodes()).collect(),
        }
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        match self {
            GammaMode::BoundaryTrace => {
                if grid.boundary == BoundaryMode::ZeroDirichlet {
                    return Err(EqviError::Config(
                        "boundary trace on a zero-Dirichlet grid is identically zero; use free boundary mode"
                            .into(),
                    ));
                }
                Ok(())
            }
            GammaMode::Restriction { nodes } => {
                for w in nodes.windows(2) {
                    contract(w[0] < w[1], || {
                        "restriction nodes must be strictly increasing".into()
                    })?;
                }
                contract(nodes.iter().all(|&i| i < grid.nodes()), || {
                    format!(
                        "restriction node out of range (row has {} nodes)",
                        grid.nodes()
                    )
                })
            }
        }
    }

    /// Columns of a feedback-side field.
    pub fn cols(&self, grid: &Grid) -> usize {
        match self {
            GammaMode::BoundaryTrace => 2,
            GammaMode::Restriction { .. } => grid.nodes(),
        }
    }

    /// Spatial quadrature weights of the feedback-side columns.
    pub fn y_weights(&self, grid: &Grid) -> Vec<f64> {
        match self {
            GammaMode::BoundaryTrace => vec![1.0, 1.0],
            GammaMode::Restriction { nodes } => {
                let mut w = vec![0.0; grid.nodes()];
                for &i in nodes {
                    w[i] = grid.node_weight(i);
                }
                w
            }
        }
    }

    /// State node feeding feedback column `j`.
    pub fn source_node(&self, grid: &Grid, j: usize) -> usize {
        match self {
            GammaMode::BoundaryTrace if j == 0 => 0,
            GammaMode::BoundaryTrace => grid.nodes() - 1,
            GammaMode::Restriction { .. } => j,
        }
    }

    /// Columns carrying positive weight.
    pub fn active_cols(&self, grid: &Grid) -> Vec<usize> {
        self.y_weights(grid)
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(j, _)| j)
            .collect()
    }

    /// Measure `T * sum(omega)` of the feedback domain.
    pub fn y_measure(&self, grid: &Grid) -> f64 {
        grid.t_final * self.y_weights(grid).iter().sum::<f64>()
    }

    fn check_y(&self, grid: &Grid, y: &Field) -> Result<()> {
        contract(y.shape() == (grid.nt, self.cols(grid)), || {
            format!(
                "feedback field shape {:?}, expected ({}, {})",
                y.shape(),
                grid.nt,
                self.cols(grid)
            )
        })
    }
}

pub fn apply_gamma(grid: &Grid, mode: &GammaMode, f: &Field) -> Result<Field> {
    mode.validate(grid)?;
    check_state(grid, f)?;
    let w = mode.y_weights(grid);
    Ok(Field::from_fn(grid.nt, mode.cols(grid), |n, j| {
        if w[j] > 0.0 {
            f.get(n, mode.source_node(grid, j))
        } else {
            0.0
        }
    }))
}

/// Adjoint for the quadrature pairings: `<gamma* g, f>_X = <g, gamma f>_Y`.
pub fn gamma_adjoint(grid: &Grid, mode: &GammaMode, g: &Field) -> Result<Field> {
    mode.validate(grid)?;
    mode.check_y(grid, g)?;
    let w = mode.y_weights(grid);
    let mut out = Field::zeros(grid.nt, grid.nodes());
    for n in 0..grid.nt {
        for (j, &wj) in w.iter().enumerate() {
            if wj > 0.0 {
                let i = mode.source_node(grid, j);
                let v = out.get(n, i) + g.get(n, j) * (wj / grid.node_weight(i));
                out.set(n, i, v);
            }
        }
    }
    Ok(out)
}

pub fn pairing_y(grid: &Grid, mode: &GammaMode, eta: &Field, y: &Field) -> f64 {
    let dt = grid.dt();
    let w = mode.y_weights(grid);
    let mut s = 0.0;
    for n in 0..grid.nt {
        for (j, wj) in w.iter().enumerate() {
            s += dt * wj * eta.get(n, j) * y.get(n, j);
        }
    }
    s
}

fn weighted_lr(grid: &Grid, mode: &GammaMode, y: &Field, r: f64) -> f64 {
    let dt = grid.dt();
    let w = mode.y_weights(grid);
    let mut s = 0.0;
    for n in 0..grid.nt {
        for (j, wj) in w.iter().enumerate() {
            s += dt * wj * y.get(n, j).abs().powf(r);
        }
    }
    s.powf(1.0 / r)
}

/// `L^p` norm on the feedback side.
pub fn norm_y(grid: &Grid, mode: &GammaMode, y: &Field, np: NormParams) -> f64 {
    weighted_lr(grid, mode, y, np.p())
}

/// Dual (`L^q`) norm on the feedback side.
pub fn dual_norm_y(grid: &Grid, mode: &GammaMode, eta: &Field, np: NormParams) -> f64 {
    weighted_lr(grid, mode, eta, np.q())
}

/// Operator norm estimate of `gamma: X -> Y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaNorm {
    /// The value used by certificates (an upper bound for `p != 2`).
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub method: String,
}

impl GammaNorm {
    pub fn gap(&self) -> f64 {
        self.upper - self.lower
    }
}

const SAMPLES: usize = 10_000;

pub fn gamma_norm(grid: &Grid, np: NormParams, mode: &GammaMode) -> Result<GammaNorm> {
    mode.validate(grid)?;
    let lower = sampled_lower_bound(grid, np, mode);
    let analytic = analytic_upper_bound(grid, np, mode);
    if np.p() == 2.0 {
        let value = power_iteration(grid, mode);
        Ok(GammaNorm {
            value,
            lower,
            upper: value,
            method: "power-iteration".into(),
        })
    } else {
        Ok(GammaNorm {
            value: analytic,
            lower,
            upper: analytic,
            method: "analytic-upper-bound".into(),
        })
    }
}

/// Hölder bound from the per-node sup constants.
pub fn analytic_upper_bound(grid: &Grid, np: NormParams, mode: &GammaMode) -> f64 {
    let p = np.p();
    if let (GammaMode::Restriction { nodes }, BoundaryMode::Free) = (mode, grid.boundary) {
        return if nodes.is_empty() { 0.0 } else { 1.0 };
    }
    let c = row_sup_constants(grid, np);
    let w = mode.y_weights(grid);
    let s: f64 = w
        .iter()
        .enumerate()
        .filter(|(_, wj)| **wj > 0.0)
        .map(|(j, wj)| wj * c[mode.source_node(grid, j)].powf(p))
        .sum();
    s.powf(1.0 / p)
}

// Ratios are row-separable, so single-row fields suffice.
fn sampled_lower_bound(grid: &Grid, np: NormParams, mode: &GammaMode) -> f64 {
    let p = np.p();
    let n = grid.nodes();
    let w = mode.y_weights(grid);
    let ratio = |row: &[f64]| {
        let num: f64 = w
            .iter()
            .enumerate()
            .map(|(j, wj)| wj * row[mode.source_node(grid, j)].abs().powf(p))
            .sum();
        let den = row_norm_pow(grid, row, p);
        if den > 0.0 {
            (num / den).powf(1.0 / p)
        } else {
            0.0
        }
    };
    let mut best = 0.0f64;
    let mut candidates: Vec<Vec<f64>> = vec![vec![1.0; n]];
    for k in 0..n {
        let xk = grid.x(k);
        candidates.push((0..n).map(|i| if i == k { 1.0 } else { 0.0 }).collect());
        candidates.push(
            (0..n)
                .map(|i| 1.0 / (1.0 + (grid.x(i) - xk).abs() / grid.dx()))
                .collect(),
        );
    }
    for c in &candidates {
        best = best.max(ratio(c));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x6a77a);
    let mut row = vec![0.0; n];
    for _ in 0..SAMPLES {
        for v in row.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        best = best.max(ratio(&row));
    }
    best
}

// Generalized eigenproblem B v = lambda A v per row, A the X Gram matrix
// and B = gamma^T Omega gamma (diagonal).
fn power_iteration(grid: &Grid, mode: &GammaMode) -> f64 {
    let n = grid.nodes();
    let b = row_b_diagonal(grid, mode);
    if b.iter().all(|&v| v == 0.0) {
        return 0.0;
    }
    let (lower, diag, upper) = row_gram(grid);
    let apply_a = |v: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let mut s = diag[i] * v[i];
                if i > 0 {
                    s += lower[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    s += upper[i] * v[i + 1];
                }
                s
            })
            .collect()
    };
    let dot = |a: &[f64], c: &[f64]| a.iter().zip(c).map(|(x, y)| x * y).sum::<f64>();
    let mut v = vec![1.0; n];
    let mut lambda = 0.0;
    for _ in 0..100_000 {
        let bv: Vec<f64> = v.iter().zip(&b).map(|(x, y)| x * y).collect();
        let mut next = solve_tridiagonal(&lower, &diag, &upper, &bv);
        let norm = dot(&next, &next).sqrt();
        next.iter_mut().for_each(|x| *x /= norm);
        let bn: Vec<f64> = next.iter().zip(&b).map(|(x, y)| x * y).collect();
        let new_lambda = dot(&next, &bn) / dot(&next, &apply_a(&next));
        v = next;
        let done = (new_lambda - lambda).abs() <= 1e-15 * new_lambda;
        lambda = new_lambda;
        if done {
            break;
        }
    }
    lambda.sqrt()
}

pub(crate) fn row_b_diagonal(grid: &Grid, mode: &GammaMode) -> Vec<f64> {
    let mut b = vec![0.0; grid.nodes()];
    for (j, wj) in mode.y_weights(grid).iter().enumerate() {
        b[mode.source_node(grid, j)] += wj;
    }
    b
}

/// Tridiagonal Gram matrix of the row norm at `p = 2`.
pub(crate) fn row_gram(grid: &Grid) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = grid.nodes();
    let dx = grid.dx();
    let off = vec![-1.0 / dx; n.saturating_sub(1)];
    let diag = (0..n)
        .map(|i| match grid.boundary {
            BoundaryMode::ZeroDirichlet => 2.0 / dx,
            BoundaryMode::Free => {
                let edges = (i > 0) as usize + (i + 1 < n) as usize;
                edges as f64 / dx + grid.node_weight(i)
            }
        })
        .collect();
    (off.clone(), diag, off)
}
