//! Discrete `L^p(0,T; W^{1,p})` geometry: norms, pairings, the time
//! derivative and exact dual norms.
//!
//! Dual objects are stored as densities, so `<g, f> = sum_n dt sum_i w_i g f`.

use serde::{Deserialize, Serialize};

use crate::error::{contract, EqviError, Result};
use crate::field::Field;
use crate::grid::{BoundaryMode, Grid};

/// Integrability exponent `p` and its conjugate `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NormParamsRaw", into = "NormParamsRaw")]
pub struct NormParams {
    p: f64,
    q: f64,
}

#[derive(Serialize, Deserialize)]
struct NormParamsRaw {
    p: f64,
}

impl TryFrom<NormParamsRaw> for NormParams {
    type Error = EqviError;
    fn try_from(raw: NormParamsRaw) -> Result<Self> {
        NormParams::new(raw.p)
    }
}

impl From<NormParams> for NormParamsRaw {
    fn from(np: NormParams) -> Self {
        NormParamsRaw { p: np.p }
    }
}

impl NormParams {
    pub fn new(p: f64) -> Result<Self> {
        contract(p.is_finite() && p > 1.0, || {
            format!("p must lie in (1, inf), got {p}")
        })?;
        Ok(NormParams {
            p,
            q: p / (p - 1.0),
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }
}

/// `|s|^(p-2) s`, the duality map of `|.|^p / p`.
pub fn phi(s: f64, p: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else if p == 2.0 {
        s
    } else {
        s.abs().powf(p - 1.0).copysign(s)
    }
}

/// Inverse of [`phi`].
pub fn phi_inv(t: f64, p: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else if p == 2.0 {
        t
    } else {
        t.abs().powf(1.0 / (p - 1.0)).copysign(t)
    }
}

pub(crate) fn check_state(grid: &Grid, f: &Field) -> Result<()> {
    contract(f.shape() == (grid.nt, grid.nodes()), || {
        format!(
            "field shape {:?} does not match grid ({}, {})",
            f.shape(),
            grid.nt,
            grid.nodes()
        )
    })
}

/// Forward differences of one row, including the ghost zeros in Dirichlet mode.
pub fn row_gradient(grid: &Grid, row: &[f64]) -> Vec<f64> {
    let dx = grid.dx();
    match grid.boundary {
        BoundaryMode::ZeroDirichlet => {
            let nx = grid.nx;
            (0..=nx)
                .map(|k| {
                    let left = if k == 0 { 0.0 } else { row[k - 1] };
                    let right = if k == nx { 0.0 } else { row[k] };
                    (right - left) / dx
                })
                .collect()
        }
        BoundaryMode::Free => row.windows(2).map(|w| (w[1] - w[0]) / dx).collect(),
    }
}

/// Row contribution `sum dx |Du|^p (+ sum w |u|^p in free mode)`.
pub fn row_norm_pow(grid: &Grid, row: &[f64], p: f64) -> f64 {
    let dx = grid.dx();
    let grad: f64 = row_gradient(grid, row)
        .iter()
        .map(|d| dx * d.abs().powf(p))
        .sum();
    match grid.boundary {
        BoundaryMode::ZeroDirichlet => grad,
        BoundaryMode::Free => {
            grad + row
                .iter()
                .enumerate()
                .map(|(i, u)| grid.node_weight(i) * u.abs().powf(p))
                .sum::<f64>()
        }
    }
}

pub fn norm_x_pow(grid: &Grid, f: &Field, p: f64) -> f64 {
    let dt = grid.dt();
    (0..f.nt())
        .map(|n| dt * row_norm_pow(grid, f.row(n), p))
        .sum()
}

/// Discrete `L^p(0,T; W^{1,p}(_0))` norm.
pub fn norm_x(grid: &Grid, f: &Field, np: NormParams) -> Result<f64> {
    check_state(grid, f)?;
    Ok(norm_x_pow(grid, f, np.p()).powf(1.0 / np.p()))
}

/// Quadrature pairing of a density `g` with a state `f`.
pub fn pairing_x(grid: &Grid, g: &Field, f: &Field) -> f64 {
    let dt = grid.dt();
    let w = grid.node_weights();
    let mut s = 0.0;
    for n in 0..f.nt() {
        for (i, (a, b)) in g.row(n).iter().zip(f.row(n)).enumerate() {
            s += dt * w[i] * a * b;
        }
    }
    s
}

/// Weighted `L^2` inner product of two states.
pub fn inner_l2(grid: &Grid, a: &Field, b: &Field) -> f64 {
    pairing_x(grid, a, b)
}

/// Backward difference in time with zero initial value.
pub fn apply_l(grid: &Grid, f: &Field) -> Field {
    let dt = grid.dt();
    Field::from_fn(f.nt(), f.cols(), |n, i| {
        let prev = if n == 0 { 0.0 } else { f.get(n - 1, i) };
        (f.get(n, i) - prev) / dt
    })
}

/// Exact discrete dual norm `sup <g, v> / ||v||_X`.
pub fn dual_norm_x(grid: &Grid, g: &Field, np: NormParams) -> Result<f64> {
    check_state(grid, g)?;
    let dt = grid.dt();
    let q = np.q();
    let mut total = 0.0;
    for n in 0..g.nt() {
        total += dt * row_dual_norm_pow(grid, g.row(n), np)?;
    }
    Ok(total.powf(1.0 / q))
}

/// `R*(g)^q` for one time row, where `R` is the row norm.
pub fn row_dual_norm_pow(grid: &Grid, g: &[f64], np: NormParams) -> Result<f64> {
    if g.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    match grid.boundary {
        BoundaryMode::ZeroDirichlet => Ok(dirichlet_row_dual(grid, g, np)),
        BoundaryMode::Free if np.p() == 2.0 => Ok(free_row_dual_p2(grid, g)),
        BoundaryMode::Free => free_row_dual_shooting(grid, g, np),
    }
}

// The minimizer of (1/p) R(v)^p - <g, v> has fluxes sigma_k = phi(Dv_k) with
// sigma_{k+1} = sigma_k - w g_k; the free constant sigma_0 makes the
// gradient sum to zero. Then R*(g)^q = sum dx |sigma|^q.
fn dirichlet_row_dual(grid: &Grid, g: &[f64], np: NormParams) -> f64 {
    let dx = grid.dx();
    let p = np.p();
    let mut cum = Vec::with_capacity(g.len() + 1);
    let mut s = 0.0;
    cum.push(0.0);
    for &gi in g {
        s += dx * gi;
        cum.push(s);
    }
    let balance = |s0: f64| cum.iter().map(|c| phi_inv(s0 - c, p)).sum::<f64>();
    let (mut lo, mut hi) = cum
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &c| {
            (a.min(c), b.max(c))
        });
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if balance(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let s0 = 0.5 * (lo + hi);
    cum.iter().map(|c| dx * (s0 - c).abs().powf(np.q())).sum()
}

// Tridiagonal system (stiffness + mass) v = W g; then R*^2 = <g, v>.
fn free_row_dual_p2(grid: &Grid, g: &[f64]) -> f64 {
    let n = g.len();
    let dx = grid.dx();
    let w = grid.node_weights();
    let mut diag = vec![0.0; n];
    let off = -1.0 / dx;
    for i in 0..n {
        diag[i] = w[i];
        if i > 0 {
            diag[i] += 1.0 / dx;
        }
        if i + 1 < n {
            diag[i] += 1.0 / dx;
        }
    }
    let rhs: Vec<f64> = (0..n).map(|i| w[i] * g[i]).collect();
    let v = solve_tridiagonal(
        &vec![off; n.saturating_sub(1)],
        &diag,
        &vec![off; n.saturating_sub(1)],
        &rhs,
    );
    rhs.iter().zip(&v).map(|(a, b)| a * b).sum()
}

// Shooting on the left boundary value: with fluxes sigma_i = phi(Dv_i) the
// optimality system reads sigma_i = sigma_{i-1} + w_i (phi(v_i) - g_i) and
// sigma_last = 0; every quantity is increasing in v_0. The optimal value
// equals -(1/q) R*(g)^q.
fn free_row_dual_shooting(grid: &Grid, g: &[f64], np: NormParams) -> Result<f64> {
    let n = g.len();
    let p = np.p();
    let dx = grid.dx();
    let w = grid.node_weights();
    let shoot = |v0: f64, v: &mut Vec<f64>| -> f64 {
        v.clear();
        v.push(v0);
        let mut sigma = 0.0;
        for i in 0..n {
            sigma += w[i] * (phi(v[i], p) - g[i]);
            if !sigma.is_finite() || sigma.abs() > 1e200 {
                return if sigma > 0.0 {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                };
            }
            if i + 1 < n {
                let next = v[i] + dx * phi_inv(sigma, p);
                v.push(next);
            }
        }
        sigma
    };
    let mut v = Vec::with_capacity(n);
    let scale = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut step = phi_inv(scale, p).max(1e-300);
    let (mut lo, mut hi) = (-step, step);
    for _ in 0..2000 {
        if shoot(lo, &mut v) <= 0.0 {
            break;
        }
        step *= 2.0;
        lo = -step;
    }
    step = hi;
    for _ in 0..2000 {
        if shoot(hi, &mut v) >= 0.0 {
            break;
        }
        step *= 2.0;
        hi = step;
    }
    let v0 = crate::scalar::bisect(
        &|s| {
            let mut tmp = Vec::with_capacity(n);
            shoot(s, &mut tmp)
        },
        lo,
        hi,
    );
    shoot(v0, &mut v);
    if v.len() != n || v.iter().any(|x| !x.is_finite()) {
        return Err(EqviError::Numerical("dual norm shooting failed".into()));
    }
    let grad = row_gradient(grid, &v);
    let obj: f64 = grad.iter().map(|d| dx * d.abs().powf(p)).sum::<f64>() / p
        + (0..n)
            .map(|i| w[i] * (v[i].abs().powf(p) / p - g[i] * v[i]))
            .sum::<f64>();
    Ok((-np.q() * obj).max(0.0))
}

/// Thomas algorithm for `lower[i-1] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    for i in 0..n {
        let a = if i > 0 { lower[i - 1] } else { 0.0 };
        let denom = diag[i] - if i > 0 { a * c[i - 1] } else { 0.0 };
        c[i] = if i + 1 < n { upper[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - if i > 0 { a * d[i - 1] } else { 0.0 }) / denom;
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        x[i] = d[i] - if i + 1 < n { c[i] * x[i + 1] } else { 0.0 };
    }
    x
}

/// Per-node constants `C_i` with `|u_i| <= C_i R(u)` for every row `u`.
///
/// Exact in Dirichlet mode; in free mode the mean-plus-oscillation bound.
pub fn row_sup_constants(grid: &Grid, np: NormParams) -> Vec<f64> {
    let p = np.p();
    let q = np.q();
    match grid.boundary {
        BoundaryMode::ZeroDirichlet => (0..grid.nodes())
            .map(|i| {
                let l = grid.x(i) - grid.a;
                let r = grid.b - grid.x(i);
                (l.powf(1.0 - p) + r.powf(1.0 - p)).powf(-1.0 / p)
            })
            .collect(),
        BoundaryMode::Free => {
            let len = grid.length();
            let a = len.powf(-1.0 / p);
            let w = grid.node_weights();
            (0..grid.nodes())
                .map(|i| {
                    let k: f64 = (0..grid.nodes())
                        .map(|j| w[j] * (grid.x(i) - grid.x(j)).abs().powf(1.0 / q))
                        .sum::<f64>()
                        / len;
                    (a.powf(q) + k.powf(q)).powf(1.0 / q)
                })
                .collect()
        }
    }
}

/// `C` with `max |f| <= C ||f||_X` on the whole space-time grid.
pub fn sup_embedding_constant(grid: &Grid, np: NormParams) -> f64 {
    let row = row_sup_constants(grid, np).into_iter().fold(0.0, f64::max);
    grid.dt().powf(-1.0 / np.p()) * row
}
