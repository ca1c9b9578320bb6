//! Inner solver for the frozen problem: given the constraint argument `z`
//! and the load `g = E - gamma* xi`, find `u` in the box `|u| <= r` with
//!
//! `L u + F(u) + eps u + d Psi(z, .)(u) + N_box(u) ∋ g`.
//!
//! Backward differences decouple the time rows, so the solve marches in
//! time and each row is a strictly convex minimization handled by
//! nonlinear Gauss-Seidel with a bisection per node.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{contract, EqviError, Result};
use crate::field::Field;
use crate::gamma::GammaMode;
use crate::grid::{BoundaryMode, Grid};
use crate::operators::friction::{FrictionLaw, Interval};
use crate::operators::plaplace::apply_f;
use crate::operators::psi::{psi_eval, psi_scalar_prox, PsiSpec};
use crate::scalar::solve_inclusion;
use crate::space::{apply_l, check_state, pairing_x, phi, solve_tridiagonal, NormParams};

/// Single-valued feedback folded into the inner problem (used as the
/// reference solve when the feedback law is smooth).
#[derive(Debug, Clone, PartialEq)]
pub struct ImplicitFeedback {
    pub mode: GammaMode,
    pub law: FrictionLaw,
}

/// Data of the frozen problem.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerProblem {
    pub grid: Grid,
    pub np: NormParams,
    pub e: f64,
    pub psi: Option<PsiSpec>,
    pub radius: f64,
    pub z: Field,
    pub load: Field,
    pub feedback: Option<ImplicitFeedback>,
}

impl InnerProblem {
    pub fn validate(&self) -> Result<()> {
        check_state(&self.grid, &self.z)?;
        check_state(&self.grid, &self.load)?;
        contract(self.radius > 0.0 && self.radius.is_finite(), || {
            format!("box radius must be positive, got {}", self.radius)
        })?;
        contract(self.e > 0.0, || {
            format!("e must be positive, got {}", self.e)
        })?;
        if let Some(psi) = &self.psi {
            psi.validate(&self.grid, self.np.p())?;
        }
        if let Some(fb) = &self.feedback {
            contract(fb.law.is_single_valued(), || {
                "implicit feedback needs a single-valued law".into()
            })?;
            fb.mode.validate(&self.grid)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    pub tol_residual: f64,
    pub max_sweeps: usize,
    pub relaxation: f64,
    pub epsilon_reg: f64,
    /// Minty samples drawn after the solve; 0 skips the check.
    pub minty_samples: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol_residual: 1e-9,
            max_sweeps: 100_000,
            relaxation: 1.0,
            epsilon_reg: 0.0,
            minty_samples: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub node_residual_max: f64,
    pub sweeps_used: usize,
    pub minty_gap: Option<f64>,
    pub converged: bool,
}

/// Per-node data of one time row.
struct RowContext<'a> {
    prob: &'a InnerProblem,
    n: usize,
    prev: Vec<f64>,
    eps: f64,
    weights: Vec<f64>,
    kappa: Vec<f64>,
    beta: f64,
    feedback_w: Vec<f64>,
}

impl<'a> RowContext<'a> {
    fn new(prob: &'a InnerProblem, n: usize, prev: Vec<f64>, eps: f64) -> Self {
        let grid = &prob.grid;
        let weights = grid.node_weights();
        let mut kappa = vec![0.0; grid.nodes()];
        let mut beta = 1.0;
        if let Some(psi) = &prob.psi {
            beta = psi.beta;
            for &i in &psi.nodes {
                kappa[i] = weights[i] * psi.theta.eval(prob.z.get(n, i));
            }
        }
        let mut feedback_w = vec![0.0; grid.nodes()];
        if let Some(fb) = &prob.feedback {
            for (j, w) in fb.mode.y_weights(grid).iter().enumerate() {
                feedback_w[fb.mode.source_node(grid, j)] += w;
            }
        }
        RowContext {
            prob,
            n,
            prev,
            eps,
            weights,
            kappa,
            beta,
            feedback_w,
        }
    }

    /// Smooth part of the node-`i` optimality condition (row units),
    /// as a function of the node value `s` with neighbours from `row`.
    fn smooth(&self, row: &[f64], i: usize, s: f64) -> f64 {
        let grid = &self.prob.grid;
        let p = self.prob.np.p();
        let e = self.prob.e;
        let dx = grid.dx();
        let dt = grid.dt();
        let w = self.weights[i];
        let last = row.len() - 1;
        let mut h = w * ((s - self.prev[i]) / dt + self.eps * s - self.prob.load.get(self.n, i));
        let (left, right) = match grid.boundary {
            BoundaryMode::ZeroDirichlet => (
                Some(if i == 0 { 0.0 } else { row[i - 1] }),
                Some(if i == last { 0.0 } else { row[i + 1] }),
            ),
            BoundaryMode::Free => ((i > 0).then(|| row[i - 1]), (i < last).then(|| row[i + 1])),
        };
        if let Some(l) = left {
            h += e * phi((s - l) / dx, p);
        }
        if let Some(r) = right {
            h -= e * phi((r - s) / dx, p);
        }
        if grid.boundary == BoundaryMode::Free {
            h += e * w * phi(s, p);
        }
        if self.feedback_w[i] > 0.0 {
            if let Some(fb) = &self.prob.feedback {
                h += self.feedback_w[i] * fb.law.one_sided(s).0;
            }
        }
        h
    }

    /// Exact minimizer in node `i` with the other nodes frozen.
    fn node_update(&self, row: &[f64], i: usize) -> f64 {
        let r = self.prob.radius;
        let p = self.prob.np.p();
        if p == 2.0 && self.prob.feedback.is_none() && (self.kappa[i] == 0.0 || self.beta == 1.0) {
            // affine smooth part: soft threshold then clip
            let c0 = self.smooth(row, i, 0.0);
            let alpha = self.smooth(row, i, 1.0) - c0;
            let a = -c0 / alpha;
            let t = self.kappa[i] / alpha;
            let shrunk = if a > t {
                a - t
            } else if a < -t {
                a + t
            } else {
                0.0
            };
            return shrunk.clamp(-r, r);
        }
        solve_inclusion(|s| self.smooth(row, i, s), self.kappa[i], self.beta, -r, r)
    }

    /// Natural residual `|u_i - prox(u_i - dt R_i)| / dt` in density units.
    fn node_residual(&self, row: &[f64], i: usize) -> f64 {
        let dt = self.prob.grid.dt();
        let r = self.prob.radius;
        let u = row[i];
        let dens = self.smooth(row, i, u) / self.weights[i];
        let theta = self.kappa[i] / self.weights[i];
        let target = u - dt * dens;
        let bx = Interval::new(-r, r);
        let proj = match &self.prob.psi {
            Some(psi) if theta > 0.0 => psi_scalar_prox(psi, theta, dt, target, bx),
            _ => target.clamp(-r, r),
        };
        (u - proj).abs() / dt
    }

    fn neighbours(&self, row: &[f64], i: usize) -> (Option<f64>, Option<f64>) {
        let last = row.len() - 1;
        match self.prob.grid.boundary {
            BoundaryMode::ZeroDirichlet => (
                Some(if i == 0 { 0.0 } else { row[i - 1] }),
                Some(if i == last { 0.0 } else { row[i + 1] }),
            ),
            BoundaryMode::Free => ((i > 0).then(|| row[i - 1]), (i < last).then(|| row[i + 1])),
        }
    }

    /// Row energy whose node-wise stationarity is [`Self::smooth`] plus the
    /// `Psi` term.
    fn energy(&self, row: &[f64]) -> f64 {
        let grid = &self.prob.grid;
        let p = self.prob.np.p();
        let e = self.prob.e;
        let dx = grid.dx();
        let dt = grid.dt();
        let pw = |s: f64| s.abs().powf(p) / p;
        let mut en = 0.0;
        for (i, &u) in row.iter().enumerate() {
            let w = self.weights[i];
            let d = u - self.prev[i];
            en += w
                * (d * d / (2.0 * dt) + 0.5 * self.eps * u * u - self.prob.load.get(self.n, i) * u);
            if let (Some(l), _) = self.neighbours(row, i) {
                en += e * dx * pw((u - l) / dx);
            }
            if grid.boundary == BoundaryMode::Free {
                en += e * w * pw(u);
            }
            if self.kappa[i] > 0.0 {
                en += self.kappa[i] * u.abs().powf(self.beta);
            }
            if self.feedback_w[i] > 0.0 {
                if let Some(fb) = &self.prob.feedback {
                    en += self.feedback_w[i] * fb.law.value(u);
                }
            }
        }
        if grid.boundary == BoundaryMode::ZeroDirichlet {
            en += e * dx * pw(row[row.len() - 1] / dx);
        }
        en
    }

    /// Projected Newton on the row energy with an Armijo search. Used for
    /// `p != 2`, where node-wise sweeps stall next to flat regions of the
    /// p-Laplacian.
    /// Returns the number of iterations, counting the opening sweeps.
    #[allow(clippy::needless_range_loop)]
    fn newton(&self, row: &mut [f64], tol: f64) -> usize {
        let grid = &self.prob.grid;
        let p = self.prob.np.p();
        let e = self.prob.e;
        let dx = grid.dx();
        let dt = grid.dt();
        let r = self.prob.radius;
        let m = row.len();
        let free_mode = grid.boundary == BoundaryMode::Free;
        // a flat start has huge p < 2 curvature; a few exact node sweeps move off it
        for _ in 0..3 {
            for i in 0..m {
                row[i] = self.node_update(row, i);
            }
        }
        // edge k joins nodes k-1 and k (ghost zeros in Dirichlet mode)
        let edge_d = |row: &[f64], k: usize| -> Option<f64> {
            let left = if k == 0 {
                (!free_mode).then_some(0.0)
            } else {
                Some(row[k - 1])
            };
            let right = if k == m {
                (!free_mode).then_some(0.0)
            } else {
                Some(row[k])
            };
            Some((right? - left?) / dx)
        };
        let mut res = self.row_residual(row);
        let mut iters = 3;
        for _ in 0..200 {
            if res <= tol {
                return iters;
            }
            iters += 1;
            let mut g = vec![0.0; m];
            let mut fixed = vec![false; m];
            for i in 0..m {
                let mut gi = self.smooth(row, i, row[i]);
                let k = self.kappa[i];
                if k > 0.0 {
                    if self.beta == 1.0 {
                        if row[i] != 0.0 {
                            gi += k.copysign(row[i]);
                        } else if gi.abs() <= k {
                            fixed[i] = true;
                        } else {
                            gi -= k.copysign(gi);
                        }
                    } else if row[i] != 0.0 {
                        gi += (k * self.beta * row[i].abs().powf(self.beta - 1.0)).copysign(row[i]);
                    }
                }
                if (row[i] >= r && gi < 0.0) || (row[i] <= -r && gi > 0.0) {
                    fixed[i] = true;
                }
                g[i] = if fixed[i] { 0.0 } else { gi };
            }
            let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
            // exact curvature (p-1)|d|^(p-2), except on edges or nodes whose
            // sign the step would flip: there the lagged weight |d|^(p-2)
            // majorizes and Newton would bounce d -> -d
            let mut edge_fac = vec![p - 1.0; m + 1];
            let mut node_fac = vec![p - 1.0; m];
            let mut dir = vec![0.0; m];
            for _attempt in 0..4 {
                let mut lower = vec![0.0; m.saturating_sub(1)];
                let mut diag = vec![0.0; m];
                let mut upper = vec![0.0; m];
                for i in 0..m {
                    if fixed[i] {
                        diag[i] = 1.0;
                        continue;
                    }
                    let w = self.weights[i];
                    let mut dg = w * (1.0 / dt + self.eps);
                    for (k, side) in [(i, -1i32), (i + 1, 1)] {
                        if let Some(d) = edge_d(row, k) {
                            let c = e / dx * edge_fac[k] * d.abs().max(1e-12).powf(p - 2.0);
                            dg += c;
                            if side < 0 && i > 0 && !fixed[i - 1] {
                                lower[i - 1] = -c;
                            }
                            if side > 0 && i + 1 < m && !fixed[i + 1] {
                                upper[i] = -c;
                            }
                        }
                    }
                    if free_mode {
                        dg += e * w * node_fac[i] * row[i].abs().max(1e-12).powf(p - 2.0);
                    }
                    if self.kappa[i] > 0.0 && self.beta > 1.0 {
                        dg += self.kappa[i]
                            * self.beta
                            * (self.beta - 1.0)
                            * row[i].abs().max(1e-12).powf(self.beta - 2.0);
                    }
                    diag[i] = dg;
                }
                dir = solve_tridiagonal(&lower, &diag, &upper, &rhs);
                if p >= 2.0 {
                    break;
                }
                let trial: Vec<f64> = (0..m).map(|i| row[i] + dir[i]).collect();
                let mut changed = false;
                for k in 0..=m {
                    if let (Some(d0), Some(d1)) = (edge_d(row, k), edge_d(&trial, k)) {
                        if d0 * d1 <= 0.0 && edge_fac[k] != 1.0 {
                            edge_fac[k] = 1.0;
                            changed = true;
                        }
                    }
                }
                if free_mode {
                    for i in 0..m {
                        if row[i] * trial[i] <= 0.0 && node_fac[i] != 1.0 {
                            node_fac[i] = 1.0;
                            changed = true;
                        }
                    }
                }
                if !changed {
                    break;
                }
            }
            let e0 = self.energy(row);
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let cand: Vec<f64> = (0..m)
                    .map(|i| {
                        let mut v = (row[i] + t * dir[i]).clamp(-r, r);
                        if self.kappa[i] > 0.0
                            && self.beta == 1.0
                            && row[i] != 0.0
                            && v * row[i] < 0.0
                        {
                            v = 0.0;
                        }
                        v
                    })
                    .collect();
                let decrease: f64 = (0..m).map(|i| g[i] * (cand[i] - row[i])).sum();
                let e1 = self.energy(&cand);
                let armijo = e1 <= e0 + 1e-4 * decrease;
                // below energy resolution, fall back to the residual
                let flat = (e1 - e0).abs() <= 1e-13 * (1.0 + e0.abs());
                let cand_res = if armijo || flat {
                    self.row_residual(&cand)
                } else {
                    f64::INFINITY
                };
                if (armijo && cand_res.is_finite()) || (flat && cand_res < res) {
                    row.copy_from_slice(&cand);
                    res = cand_res;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                return iters;
            }
        }
        iters
    }

    fn row_residual(&self, row: &[f64]) -> f64 {
        (0..row.len())
            .map(|i| self.node_residual(row, i))
            .fold(0.0, f64::max)
    }
}

pub fn solve_inner(prob: &InnerProblem, opts: &SolveOptions) -> Result<(Field, ResidualReport)> {
    solve_inner_from(prob, opts, None)
}

/// [`solve_inner`] with an initial guess for the sweeps.
pub fn solve_inner_from(
    prob: &InnerProblem,
    opts: &SolveOptions,
    start: Option<&Field>,
) -> Result<(Field, ResidualReport)> {
    prob.validate()?;
    contract(
        opts.tol_residual > 0.0 && opts.relaxation > 0.0 && opts.relaxation <= 1.0,
        || "need tol_residual > 0 and relaxation in (0, 1]".into(),
    )?;
    contract(opts.epsilon_reg >= 0.0, || {
        "epsilon_reg must be nonnegative".into()
    })?;
    if let Some(s) = start {
        check_state(&prob.grid, s)?;
    }
    let grid = &prob.grid;
    let nodes = grid.nodes();
    let r = prob.radius;
    let mut u = Field::zeros(grid.nt, nodes);
    let mut sweeps_total = 0;
    let mut worst = 0.0f64;
    let mut converged = true;
    for n in 0..grid.nt {
        let prev = if n == 0 {
            vec![0.0; nodes]
        } else {
            u.row(n - 1).to_vec()
        };
        let ctx = RowContext::new(prob, n, prev.clone(), opts.epsilon_reg);
        let mut row: Vec<f64> = match start {
            Some(s) => s.row(n).iter().map(|v| v.clamp(-r, r)).collect(),
            None => prev.iter().map(|v| v.clamp(-r, r)).collect(),
        };
        let mut sweeps = 0;
        if prob.np.p() != 2.0 || prob.feedback.is_some() {
            sweeps += ctx.newton(&mut row, opts.tol_residual);
        }
        let mut omega = opts.relaxation;
        let mut res = ctx.row_residual(&row);
        let mut rises = 0;
        while res > opts.tol_residual && sweeps < opts.max_sweeps {
            for i in 0..nodes {
                let target = ctx.node_update(&row, i);
                row[i] += omega * (target - row[i]);
            }
            sweeps += 1;
            if row.iter().any(|v| !v.is_finite()) {
                return Err(EqviError::Numerical(format!(
                    "non-finite value in time row {n}"
                )));
            }
            let next = ctx.row_residual(&row);
            rises = if next > res { rises + 1 } else { 0 };
            if rises >= 3 && omega > 0.125 {
                omega = (omega * 0.5).max(0.125);
                rises = 0;
            }
            res = next;
        }
        if res > opts.tol_residual {
            converged = false;
        }
        worst = worst.max(res);
        sweeps_total += sweeps;
        u.row_mut(n).copy_from_slice(&row);
    }
    let minty = (opts.minty_samples > 0)
        .then(|| minty_gap_eps(prob, &u, opts.minty_samples, 0x6d1e7, opts.epsilon_reg));
    Ok((
        u,
        ResidualReport {
            node_residual_max: worst,
            sweeps_used: sweeps_total,
            minty_gap: minty,
            converged,
        },
    ))
}

/// Max natural residual of the frozen problem at `x` (with `eps = 0`).
pub fn vi_residual(prob: &InnerProblem, x: &Field) -> f64 {
    vi_residual_eps(prob, x, 0.0)
}

pub fn vi_residual_eps(prob: &InnerProblem, x: &Field, eps: f64) -> f64 {
    let grid = &prob.grid;
    let r = prob.radius;
    let mut worst = 0.0f64;
    for n in 0..grid.nt {
        let prev = if n == 0 {
            vec![0.0; grid.nodes()]
        } else {
            x.row(n - 1).to_vec()
        };
        let ctx = RowContext::new(prob, n, prev, eps);
        let row = x.row(n);
        let infeasible = row
            .iter()
            .map(|v| (v.abs() - r).max(0.0))
            .fold(0.0, f64::max);
        worst = worst.max(ctx.row_residual(row)).max(infeasible / grid.dt());
    }
    worst
}

/// Most negative Minty left-hand side at sampled feasible `y` (0 if none).
pub fn minty_gap(prob: &InnerProblem, x: &Field, n_samples: usize, seed: u64) -> f64 {
    minty_gap_eps(prob, x, n_samples, seed, 0.0)
}

pub fn minty_gap_eps(prob: &InnerProblem, x: &Field, n_samples: usize, seed: u64, eps: f64) -> f64 {
    let grid = &prob.grid;
    let r = prob.radius;
    let p = prob.np.p();
    let psi_x = prob
        .psi
        .as_ref()
        .map_or(0.0, |s| psi_eval(grid, s, &prob.z, x));
    let lhs = |y: &Field| {
        let op = apply_l(grid, y)
            .add(&apply_f(grid, prob.e, p, y))
            .axpy(eps, y)
            .sub(&prob.load);
        let psi_y = prob
            .psi
            .as_ref()
            .map_or(0.0, |s| psi_eval(grid, s, &prob.z, y));
        pairing_x(grid, &op, &y.sub(x)) + psi_y - psi_x
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = lhs(&Field::zeros(grid.nt, grid.nodes())).min(0.0);
    let steps = [1e-3, 1e-2, 1e-1, 0.5, 1.0];
    let random = n_samples / 2;
    for _ in 0..random {
        let y = Field::from_fn(grid.nt, grid.nodes(), |_, _| rng.gen_range(-r..=r));
        worst = worst.min(lhs(&y));
    }
    let vertices = (n_samples - random).div_ceil(steps.len());
    for _ in 0..vertices {
        let v = Field::from_fn(grid.nt, grid.nodes(), |_, _| {
            if rng.gen::<bool>() {
                r
            } else {
                -r
            }
        });
        for s in steps {
            let y = x.axpy(s, &v.sub(x));
            worst = worst.min(lhs(&y));
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::psi::Theta;

    fn problem(grid: Grid, p: f64, load: Field, radius: f64) -> InnerProblem {
        let z = Field::zeros(grid.nt, grid.nodes());
        InnerProblem {
            grid,
            np: NormParams::new(p).unwrap(),
            e: 1.0,
            psi: None,
            radius,
            z,
            load,
            feedback: None,
        }
    }

    #[test]
    fn zero_load_gives_zero() {
        let g = Grid::new(4, 3, 1.0, 0.0, 1.0, BoundaryMode::Free).unwrap();
        let mut prob = problem(g.clone(), 1.5, Field::zeros(3, 6), 0.3);
        prob.psi = Some(PsiSpec {
            theta: Theta::Constant { value: 0.5 },
            beta: 1.0,
            nodes: vec![1, 2],
            c_psi: 0.0,
            d_psi: 0.0,
            e_psi: 0.0,
        });
        let (u, rep) = solve_inner(&prob, &SolveOptions::default()).unwrap();
        assert_eq!(u, Field::zeros(3, 6));
        assert_eq!(rep.node_residual_max, 0.0);
        assert!(rep.converged);
    }

    #[test]
    fn single_node_backward_euler() {
        let g = Grid::new(1, 5, 1.0, 0.0, 1.0, BoundaryMode::ZeroDirichlet).unwrap();
        let load = Field::constant(5, 1, 3.0);
        let prob = problem(g.clone(), 2.0, load, 100.0);
        let (u, rep) = solve_inner(
            &prob,
            &SolveOptions {
                tol_residual: 1e-12,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(rep.converged);
        // one interior node: F density is 2 u / dx^2
        let k = 2.0 / (g.dx() * g.dx());
        let mut prev = 0.0;
        for n in 0..5 {
            let want = (prev / g.dt() + 3.0) / (1.0 / g.dt() + k);
            assert!((u.get(n, 0) - want).abs() < 1e-10);
            prev = want;
        }
    }

    #[test]
    fn residual_positive_away_from_solution() {
        let g = Grid::new(3, 2, 1.0, 0.0, 1.0, BoundaryMode::ZeroDirichlet).unwrap();
        let prob = problem(g, 2.0, Field::constant(2, 3, 1.0), 10.0);
        assert!(vi_residual(&prob, &Field::zeros(2, 3)) > 0.5);
    }

    #[test]
    fn minty_detects_wrong_vertex() {
        let g = Grid::new(3, 2, 1.0, 0.0, 1.0, BoundaryMode::ZeroDirichlet).unwrap();
        let prob = problem(g, 2.0, Field::constant(2, 3, 1.0), 0.5);
        let opts = SolveOptions {
            minty_samples: 200,
            ..Default::default()
        };
        let (u, rep) = solve_inner(&prob, &opts).unwrap();
        assert!(rep.minty_gap.unwrap() >= -1e-8);
        assert!(minty_gap(&prob, &Field::constant(2, 3, -0.5), 200, 1) < -1e-3);
        assert!(vi_residual(&prob, &u) <= 1e-9);
    }
}

#[cfg(test)]
mod energy_tests {
    use super::*;

    #[test]
    fn energy_gradient_matches_smooth() {
        for bm in [BoundaryMode::Free, BoundaryMode::ZeroDirichlet] {
            let g = Grid::new(5, 2, 1.0, 0.0, 1.0, bm).unwrap();
            let nodes = g.nodes();
            let load = Field::from_fn(2, nodes, |n, i| 0.3 + 0.1 * (i + n) as f64);
            let prob = InnerProblem {
                grid: g,
                np: NormParams::new(1.5).unwrap(),
                e: 1.3,
                psi: None,
                radius: 10.0,
                z: Field::zeros(2, nodes),
                load,
                feedback: None,
            };
            let ctx = RowContext::new(
                &prob,
                1,
                (0..nodes).map(|i| 0.05 * i as f64).collect(),
                0.01,
            );
            let row: Vec<f64> = (0..nodes).map(|i| 0.1 + 0.07 * (i as f64).sin()).collect();
            for i in 0..nodes {
                let h = 1e-6;
                let mut a = row.clone();
                let mut b = row.clone();
                a[i] += h;
                b[i] -= h;
                let fd = (ctx.energy(&a) - ctx.energy(&b)) / (2.0 * h);
                let an = ctx.smooth(&row, i, row[i]);
                assert!(
                    (fd - an).abs() < 1e-6 * (1.0 + an.abs()),
                    "{bm:?} node {i}: fd {fd} vs {an}"
                );
            }
        }
    }
}
