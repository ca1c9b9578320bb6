//! Brute-force reference solvers for toy sizes (`p = 2`), and the
//! difference-quotient estimate of Clarke subdifferentials.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{contract, EqviError, Result};
use crate::field::Field;
use crate::grid::{BoundaryMode, Grid};
use crate::inner::{vi_residual, InnerProblem};
use crate::instance::QviInstance;
use crate::operators::constraint::{constraint_radius, Aggregator};
use crate::operators::friction::{clarke_subdiff, FrictionLaw, Interval, LawKind};
use crate::outer::{xi_membership, MEMBERSHIP_TOL};

/// Largest number of unknowns the enumeration oracles accept.
pub const MAX_UNKNOWNS: usize = 6;

/// Largest number of unknowns [`oracle_qvi`] accepts.
pub const MAX_QVI_UNKNOWNS: usize = 4;

/// Linear part `A U - b` of the frozen problem in row units, flattened
/// time-major, at `p = 2`.
#[derive(Debug, Clone)]
pub(crate) struct LinearModel {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    /// Row-unit weight of the `Psi` term per unknown.
    pub kappa: Vec<f64>,
}

#[allow(clippy::needless_range_loop)]
pub(crate) fn linear_model(
    grid: &Grid,
    e: f64,
    eps: f64,
    load: &Field,
    kappa_density: &[f64],
) -> LinearModel {
    let nodes = grid.nodes();
    let k = grid.nt * nodes;
    let dx = grid.dx();
    let dt = grid.dt();
    let w = grid.node_weights();
    let mut a = DMatrix::zeros(k, k);
    let mut b = DVector::zeros(k);
    let mut kappa = vec![0.0; k];
    for n in 0..grid.nt {
        for i in 0..nodes {
            let row = n * nodes + i;
            let (has_left, has_right) = match grid.boundary {
                BoundaryMode::ZeroDirichlet => (true, true),
                BoundaryMode::Free => (i > 0, i + 1 < nodes),
            };
            let mut diag = w[i] * (1.0 / dt + eps);
            if grid.boundary == BoundaryMode::Free {
                diag += e * w[i];
            }
            if has_left {
                diag += e / dx;
                if i > 0 {
                    a[(row, row - 1)] = -e / dx;
                }
            }
            if has_right {
                diag += e / dx;
                if i + 1 < nodes {
                    a[(row, row + 1)] = -e / dx;
                }
            }
            a[(row, row)] = diag;
            if n > 0 {
                a[(row, row - nodes)] = -w[i] / dt;
            }
            b[row] = w[i] * load.get(n, i);
            kappa[row] = w[i] * kappa_density[row];
        }
    }
    LinearModel { a, b, kappa }
}

/// State of one unknown in an active-set pattern.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum NodeState {
    Lower,
    Upper,
    /// Interior with nonzero sign `-1` or `+1` (or unconstrained sign when no `Psi`).
    Free(i8),
    Zero,
    /// Held at a kink value; the feedback multiplier balances the row.
    Pinned(f64),
}

pub(crate) fn node_states(kappa: f64) -> Vec<NodeState> {
    if kappa > 0.0 {
        vec![
            NodeState::Lower,
            NodeState::Free(-1),
            NodeState::Zero,
            NodeState::Free(1),
            NodeState::Upper,
        ]
    } else {
        vec![NodeState::Lower, NodeState::Free(0), NodeState::Upper]
    }
}

/// Solves the pattern's linear system with `radius[k]` the box bound of
/// unknown `k`; `extra` adds a fixed row-unit load. Returns `None` if the
/// reduced matrix is singular.
pub(crate) fn solve_pattern(
    model: &LinearModel,
    states: &[NodeState],
    radius: &[f64],
    extra: &DVector<f64>,
) -> Option<DVector<f64>> {
    let k = states.len();
    let mut u = DVector::zeros(k);
    let mut free = Vec::new();
    for (idx, st) in states.iter().enumerate() {
        match st {
            NodeState::Lower => u[idx] = -radius[idx],
            NodeState::Upper => u[idx] = radius[idx],
            NodeState::Zero => u[idx] = 0.0,
            NodeState::Pinned(v) => u[idx] = *v,
            NodeState::Free(_) => free.push(idx),
        }
    }
    if free.is_empty() {
        return Some(u);
    }
    // (A u - b + extra)_f + kappa_f sign_f = 0 on free nodes
    let mut m = DMatrix::zeros(free.len(), free.len());
    let mut rhs = DVector::zeros(free.len());
    for (r, &fr) in free.iter().enumerate() {
        let mut acc = model.b[fr] - extra[fr];
        for (c, &fc) in free.iter().enumerate() {
            m[(r, c)] = model.a[(fr, fc)];
        }
        for j in 0..k {
            if !free.contains(&j) {
                acc -= model.a[(fr, j)] * u[j];
            }
        }
        if let NodeState::Free(s) = states[fr] {
            acc -= model.kappa[fr] * s as f64;
        }
        rhs[r] = acc;
    }
    let sol = m.lu().solve(&rhs)?;
    for (r, &fr) in free.iter().enumerate() {
        u[fr] = sol[r];
    }
    Some(u)
}

/// Checks the sign and multiplier conditions of a candidate; `tol` is
/// relative to the size of the system.
pub(crate) fn verify_pattern(
    model: &LinearModel,
    states: &[NodeState],
    u: &DVector<f64>,
    radius: &[f64],
    extra: &DVector<f64>,
    tol: f64,
) -> bool {
    let m = &model.a * u - &model.b + extra;
    let scale = 1.0 + model.b.amax() + model.a.amax() * u.amax() + extra.amax();
    let t = tol * scale;
    states.iter().enumerate().all(|(k, st)| {
        let kap = model.kappa[k];
        match st {
            NodeState::Lower => m[k] - kap >= -t,
            NodeState::Upper => m[k] + kap <= t,
            NodeState::Zero => m[k].abs() <= kap + t,
            NodeState::Pinned(_) => true,
            NodeState::Free(s) => {
                let inside = u[k] >= -radius[k] - t && u[k] <= radius[k] + t;
                let sign_ok = match s {
                    -1 => u[k] <= t,
                    1 => u[k] >= -t,
                    _ => true,
                };
                inside && sign_ok
            }
        }
    })
}

/// Calls `f` on every tuple in the product of the option lists.
pub(crate) fn for_each_product<T: Copy>(options: &[Vec<T>], mut f: impl FnMut(&[T])) {
    let mut idx = vec![0usize; options.len()];
    let mut cur: Vec<T> = options.iter().map(|o| o[0]).collect();
    loop {
        f(&cur);
        let mut d = 0;
        loop {
            if d == options.len() {
                return;
            }
            idx[d] += 1;
            if idx[d] < options[d].len() {
                cur[d] = options[d][idx[d]];
                break;
            }
            idx[d] = 0;
            cur[d] = options[d][0];
            d += 1;
        }
    }
}

pub(crate) fn unflatten(grid: &Grid, v: &DVector<f64>) -> Field {
    Field::from_vec(grid.nt, grid.nodes(), v.iter().copied().collect()).expect("shape")
}

pub(crate) fn psi_kappa_density(prob: &InnerProblem) -> Result<Vec<f64>> {
    let grid = &prob.grid;
    let mut kd = vec![0.0; grid.nt * grid.nodes()];
    if let Some(psi) = &prob.psi {
        contract(psi.beta == 1.0, || {
            "enumeration oracles support beta = 1 only".into()
        })?;
        for n in 0..grid.nt {
            for &i in &psi.nodes {
                kd[n * grid.nodes() + i] = psi.theta.eval(prob.z.get(n, i));
            }
        }
    }
    Ok(kd)
}

/// Active-set enumeration for the frozen problem with `epsilon`; returns
/// the verified solution.
pub fn oracle_inner_vi(prob: &InnerProblem, epsilon: f64) -> Result<Field> {
    prob.validate()?;
    let grid = &prob.grid;
    contract(prob.np.p() == 2.0, || "oracle requires p = 2".into())?;
    contract(prob.feedback.is_none(), || {
        "oracle does not fold feedback".into()
    })?;
    let k = grid.nt * grid.nodes();
    contract(k <= MAX_UNKNOWNS, || {
        format!("oracle limited to {MAX_UNKNOWNS} unknowns, got {k}")
    })?;
    let model = linear_model(grid, prob.e, epsilon, &prob.load, &psi_kappa_density(prob)?);
    let radius = vec![prob.radius; k];
    let extra = DVector::zeros(k);
    let options: Vec<Vec<NodeState>> = model.kappa.iter().map(|&kap| node_states(kap)).collect();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for_each_product(&options, |states| {
        if let Some(u) = solve_pattern(&model, states, &radius, &extra) {
            if verify_pattern(&model, states, &u, &radius, &extra, 1e-12) {
                let res = (&model.a * &u - &model.b).amax();
                if best.as_ref().is_none_or(|(r, _)| res < *r) {
                    best = Some((res, u));
                }
            }
        }
    });
    best.map(|(_, u)| unflatten(grid, &u))
        .ok_or_else(|| EqviError::Numerical("no active-set pattern verified".into()))
}

/// Interval estimate `[-j0(s; -1), j0(s; +1)]` from difference quotients
/// at the finest sampled level.
pub fn oracle_clarke(law: &FrictionLaw, s: f64, t_levels: &[f64], z_levels: &[f64]) -> Interval {
    let t = t_levels.iter().copied().fold(f64::INFINITY, f64::min);
    let dz = z_levels.iter().copied().fold(f64::INFINITY, f64::min);
    let zs = [s - dz, s, s + dz];
    let up = zs
        .iter()
        .map(|&z| (law.value(z + t) - law.value(z)) / t)
        .fold(f64::NEG_INFINITY, f64::max);
    let down = zs
        .iter()
        .map(|&z| (law.value(z - t) - law.value(z)) / t)
        .fold(f64::NEG_INFINITY, f64::max);
    Interval::new((-down).min(up), up.max(-down))
}

/// Piece of a law on which `j'(s) = a + c s` for `s` in `[lo, hi]`.
#[derive(Debug, Clone, Copy)]
struct Piece {
    lo: f64,
    hi: f64,
    a: f64,
    c: f64,
}

fn affine_pieces(law: &FrictionLaw) -> Result<(Vec<Piece>, Vec<f64>)> {
    let inf = f64::INFINITY;
    let l0 = law.params[0];
    Ok(match law.kind {
        LawKind::Abs => (
            vec![
                Piece {
                    lo: -inf,
                    hi: 0.0,
                    a: -l0,
                    c: 0.0,
                },
                Piece {
                    lo: 0.0,
                    hi: inf,
                    a: l0,
                    c: 0.0,
                },
            ],
            vec![0.0],
        ),
        LawKind::NegAbs => (
            vec![
                Piece {
                    lo: -inf,
                    hi: 0.0,
                    a: l0,
                    c: 0.0,
                },
                Piece {
                    lo: 0.0,
                    hi: inf,
                    a: -l0,
                    c: 0.0,
                },
            ],
            vec![0.0],
        ),
        LawKind::Zigzag => {
            let k = &law.kinks;
            let pieces = law
                .params
                .iter()
                .enumerate()
                .map(|(m, &a)| Piece {
                    lo: if m == 0 { -inf } else { k[m - 1] },
                    hi: if m == k.len() { inf } else { k[m] },
                    a,
                    c: 0.0,
                })
                .collect();
            (pieces, k.clone())
        }
        LawKind::SmoothPower => {
            contract(law.theta_g == 1.0 || l0 == 0.0, || {
                "oracle_qvi needs a linear smooth law (theta_g = 1)".into()
            })?;
            (
                vec![Piece {
                    lo: -inf,
                    hi: inf,
                    a: 0.0,
                    c: l0,
                }],
                vec![],
            )
        }
    })
}

#[derive(Debug, Clone, Copy)]
enum Branch {
    Piece(Piece),
    Kink(f64),
}

/// Feedback entry: time row, feedback column, flat state index, weight.
#[derive(Debug, Clone, Copy)]
struct GammaEntry {
    n: usize,
    j: usize,
    k: usize,
    w: f64,
}

/// A verified solution pair of the full problem.
#[derive(Debug, Clone, Serialize)]
pub struct OracleQviSolution {
    #[serde(skip)]
    pub x: Field,
    #[serde(skip)]
    pub xi: Field,
    pub radius: f64,
    pub residual: f64,
    pub membership: f64,
}

/// Radii `R` in `[r0, r_max]` solving `R = min(r_max, r0 + r1 mean|u0 + R du|)`.
fn radius_candidates(
    r0: f64,
    r1: f64,
    r_max: f64,
    u0: &DVector<f64>,
    du: &DVector<f64>,
) -> Vec<f64> {
    if r1 == 0.0 || r_max == r0 {
        return vec![r0];
    }
    let k = u0.len() as f64;
    let mut cuts = vec![r0, r_max];
    for (a, d) in u0.iter().zip(du.iter()) {
        if *d != 0.0 {
            let r = -a / d;
            if r > r0 && r < r_max {
                cuts.push(r);
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    for seg in cuts.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let mid = 0.5 * (a + b);
        let (mut alpha, mut beta) = (r0, 0.0);
        for (u, d) in u0.iter().zip(du.iter()) {
            let sg = (u + mid * d).signum();
            alpha += r1 * sg * u / k;
            beta += r1 * sg * d / k;
        }
        let slack = 1e-12 * (1.0 + r_max);
        if (1.0 - beta).abs() > 1e-14 {
            let r = alpha / (1.0 - beta);
            if r >= a - slack && r <= b + slack && alpha + beta * r <= r_max + slack {
                out.push(r.clamp(a, b));
            }
        }
        if b == r_max && alpha + beta * b >= r_max - slack {
            out.push(r_max);
        }
    }
    out
}

/// Feedback multiplier at a pinned row: `xi` in `I` with
/// `-m - w xi` in the `Psi` subgradient set `P`.
fn pinned_multiplier(m: f64, w: f64, iv: Interval, p: Interval, tol: f64) -> Option<f64> {
    let q = Interval::new((-m - p.hi) / w, (-m - p.lo) / w);
    let lo = iv.lo.max(q.lo);
    let hi = iv.hi.min(q.hi);
    (lo <= hi + tol / w).then(|| iv.clip(0.5 * (lo + hi.max(lo))))
}

/// Branch enumeration for the full problem: every feedback entry takes a
/// smooth piece of the law or sits at a kink with a free multiplier, crossed
/// with the active-set patterns and the self-consistent radius. Returns the
/// verified, deduplicated solutions in lexicographic order of `x`.
pub fn oracle_qvi(inst: &QviInstance) -> Result<Vec<OracleQviSolution>> {
    inst.validate()?;
    let grid = &inst.grid;
    contract(inst.np.p() == 2.0, || "oracle requires p = 2".into())?;
    let nodes = grid.nodes();
    let kk = grid.nt * nodes;
    contract(kk <= MAX_QVI_UNKNOWNS, || {
        format!("oracle_qvi limited to {MAX_QVI_UNKNOWNS} unknowns, got {kk}")
    })?;
    let cm = &inst.constraint;
    contract(cm.r1 == 0.0 || cm.aggregator == Aggregator::MeanAbs, || {
        "oracle_qvi supports the mean-abs aggregator only".into()
    })?;
    let mut kd = vec![0.0; kk];
    if let Some(psi) = &inst.psi {
        contract(psi.beta == 1.0 && psi.theta.is_constant(), || {
            "oracle_qvi supports beta = 1 with constant theta only".into()
        })?;
        for n in 0..grid.nt {
            for &i in &psi.nodes {
                kd[n * nodes + i] = psi.theta.eval(0.0);
            }
        }
    }
    let (pieces, kinks) = affine_pieces(&inst.law)?;
    let base = linear_model(grid, inst.f.e, 0.0, &inst.source, &kd);
    let wy = inst.gamma.y_weights(grid);
    let mut entries = Vec::new();
    for n in 0..grid.nt {
        for (j, &w) in wy.iter().enumerate() {
            if w > 0.0 {
                entries.push(GammaEntry {
                    n,
                    j,
                    k: n * nodes + inst.gamma.source_node(grid, j),
                    w,
                });
            }
        }
    }
    let branch_opts: Vec<Branch> = pieces
        .iter()
        .map(|&p| Branch::Piece(p))
        .chain(kinks.iter().map(|&k| Branch::Kink(k)))
        .collect();
    let options: Vec<Vec<usize>> = entries
        .iter()
        .map(|_| (0..branch_opts.len()).collect())
        .collect();
    let zeros = vec![0.0; kk];
    let ones = vec![1.0; kk];
    let mut found: Vec<OracleQviSolution> = Vec::new();
    for_each_product(&options, |choice| {
        let mut model = base.clone();
        let mut extra = DVector::zeros(kk);
        let mut pinned: Vec<Option<f64>> = vec![None; kk];
        for (e, &c) in entries.iter().zip(choice) {
            match branch_opts[c] {
                Branch::Piece(p) => {
                    extra[e.k] += e.w * p.a;
                    model.a[(e.k, e.k)] += e.w * p.c;
                }
                Branch::Kink(v) => pinned[e.k] = Some(v),
            }
        }
        let node_opts: Vec<Vec<NodeState>> = (0..kk)
            .map(|k| match pinned[k] {
                Some(v) => vec![NodeState::Pinned(v)],
                None => node_states(model.kappa[k]),
            })
            .collect();
        for_each_product(&node_opts, |states| {
            let (Some(u0), Some(u1)) = (
                solve_pattern(&model, states, &zeros, &extra),
                solve_pattern(&model, states, &ones, &extra),
            ) else {
                return;
            };
            let du = &u1 - &u0;
            for r in radius_candidates(cm.r0, cm.r1, cm.r_max, &u0, &du) {
                if let Some(sol) = check_branch(
                    inst,
                    &model,
                    &entries,
                    &branch_opts,
                    choice,
                    states,
                    &u0,
                    &du,
                    r,
                    &extra,
                ) {
                    found.push(sol);
                }
            }
        });
    });
    let lex = |a: &Field, b: &Field| {
        a.as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    };
    found.sort_by(|a, b| lex(&a.x, &b.x));
    let mut out: Vec<OracleQviSolution> = Vec::new();
    for s in found {
        if !out
            .iter()
            .any(|o| o.x.sub(&s.x).max_abs() <= 1e-9 * (1.0 + s.x.max_abs()))
        {
            out.push(s);
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn check_branch(
    inst: &QviInstance,
    model: &LinearModel,
    entries: &[GammaEntry],
    branch_opts: &[Branch],
    choice: &[usize],
    states: &[NodeState],
    u0: &DVector<f64>,
    du: &DVector<f64>,
    r: f64,
    extra: &DVector<f64>,
) -> Option<OracleQviSolution> {
    let grid = &inst.grid;
    let kk = u0.len();
    let u = u0 + du * r;
    let radius = vec![r; kk];
    let tol = 1e-10;
    if !verify_pattern(model, states, &u, &radius, extra, tol) {
        return None;
    }
    let scale = 1.0 + model.b.amax() + model.a.amax() * u.amax();
    let t = tol * scale;
    let m = &model.a * &u - &model.b;
    let mut xi = inst.zero_feedback();
    for (e, &c) in entries.iter().zip(choice) {
        let v = match branch_opts[c] {
            Branch::Piece(p) => {
                if u[e.k] < p.lo - t || u[e.k] > p.hi + t {
                    return None;
                }
                p.a + p.c * u[e.k]
            }
            Branch::Kink(kv) => {
                if kv.abs() > r + t {
                    return None;
                }
                let kap = model.kappa[e.k];
                let p = if kap == 0.0 {
                    Interval::point(0.0)
                } else if kv == 0.0 {
                    Interval::new(-kap, kap)
                } else {
                    Interval::point(kap * kv.signum())
                };
                pinned_multiplier(m[e.k], e.w, clarke_subdiff(&inst.law, kv), p, t)?
            }
        };
        xi.set(e.n, e.j, v);
    }
    let x = unflatten(grid, &u);
    if (constraint_radius(grid, inst.np, &inst.constraint, &x) - r).abs() > 1e-10 * (1.0 + r) {
        return None;
    }
    let residual = vi_residual(&inst.inner_problem(&x, &xi).ok()?, &x);
    let membership = xi_membership(inst, &x, &xi).ok()?;
    (residual <= 1e-9 && membership <= MEMBERSHIP_TOL).then_some(OracleQviSolution {
        x,
        xi,
        radius: r,
        residual,
        membership,
    })
}

/// One row of the cross-validation table.
#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::friction::clarke_subdiff;
    use crate::space::NormParams;

    fn toy(load: f64, radius: f64) -> InnerProblem {
        let g = Grid::new(1, 1, 1.0, 0.0, 1.0, BoundaryMode::ZeroDirichlet).unwrap();
        InnerProblem {
            grid: g,
            np: NormParams::new(2.0).unwrap(),
            e: 1.0,
            psi: None,
            radius,
            z: Field::zeros(1, 1),
            load: Field::constant(1, 1, load),
            feedback: None,
        }
    }

    #[test]
    fn one_unknown_closed_form() {
        // dx = 1/2: stiffness density 2 / dx^2 = 8, dt = 1
        let u = oracle_inner_vi(&toy(3.0, 10.0), 0.0).unwrap();
        assert!((u.get(0, 0) - 3.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn clamped_by_box() {
        let u = oracle_inner_vi(&toy(50.0, 1.0), 0.0).unwrap();
        assert_eq!(u.get(0, 0), 1.0);
    }

    #[test]
    fn clarke_estimates() {
        let levels = [1e-3, 1e-4, 1e-5];
        let iv = oracle_clarke(&FrictionLaw::abs(1.0), 0.0, &levels, &levels);
        assert!((iv.lo + 1.0).abs() < 1e-3 && (iv.hi - 1.0).abs() < 1e-3);
        let sp = FrictionLaw::smooth_power(1.5, 1.0);
        let iv = oracle_clarke(&sp, 0.7, &levels, &levels);
        let exact = clarke_subdiff(&sp, 0.7);
        assert!((iv.lo - exact.lo).abs() < 1e-4 && (iv.hi - exact.hi).abs() < 1e-4);
    }
}
