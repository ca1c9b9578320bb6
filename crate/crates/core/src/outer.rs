//! Outer fixed-point loop `(z, xi) -> (S(z, xi), G(gamma z))` with
//! epsilon continuation, and the multi-start solution-set probe.
//!
//! The default feedback update is a resolvent step: with `v = xi + rho y`
//! the new value is the `eta` of a graph point `(s, eta)` of the Clarke
//! subdifferential on the line `eta + rho s = v`. At a fixed point `s = y`,
//! so the pair is on the graph, including stick states at kinks, which a
//! plain pick of `G(y)` can never reach. The literal pick update is kept as
//! an option.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::certificates::{audit_solution, check_smallness, AuditReport, Certificate};
use crate::certificates::{compute_certificate, smallness_message};
use crate::error::{contract, EqviError, Result};
use crate::field::Field;
use crate::gamma::dual_norm_y;
use crate::inner::{solve_inner_from, vi_residual, ResidualReport, SolveOptions};
use crate::instance::QviInstance;
use crate::operators::friction::{apply_g, clarke_subdiff, FrictionLaw, Interval, IntervalField};
use crate::space::{apply_l, check_state, dual_norm_x, norm_x};

/// Half-width of the `s`-window used when testing `xi` against `G(y)`.
pub const MEMBERSHIP_WINDOW: f64 = 1e-6;
/// Tolerance of the membership test.
pub const MEMBERSHIP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selection {
    #[default]
    MinNorm,
    Midpoint,
    Lo,
    Hi,
}

impl Selection {
    pub const ALL: [Selection; 4] = [
        Selection::MinNorm,
        Selection::Midpoint,
        Selection::Lo,
        Selection::Hi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Selection::MinNorm => "min-norm",
            Selection::Midpoint => "midpoint",
            Selection::Lo => "lo",
            Selection::Hi => "hi",
        }
    }

    /// Picks a point of one interval.
    pub fn pick(self, iv: Interval) -> f64 {
        match self {
            Selection::MinNorm => iv.clip(0.0),
            Selection::Midpoint => iv.mid(),
            Selection::Lo => iv.lo,
            Selection::Hi => iv.hi,
        }
    }

    /// Picks one `eta` among graph points `(s, eta)`.
    fn pick_point(self, pts: &[(f64, f64)]) -> Option<f64> {
        let etas = pts.iter().map(|p| p.1);
        let lo = etas.clone().fold(f64::INFINITY, f64::min);
        let hi = etas.clone().fold(f64::NEG_INFINITY, f64::max);
        let key = |eta: f64| match self {
            Selection::MinNorm => eta.abs(),
            Selection::Midpoint => (eta - 0.5 * (lo + hi)).abs(),
            Selection::Lo => eta,
            Selection::Hi => -eta,
        };
        etas.min_by(|a, b| key(*a).total_cmp(&key(*b)).then(a.total_cmp(b)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum XiUpdate {
    #[default]
    Resolvent,
    Pick,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OuterOptions {
    pub selection: Selection,
    pub damping: f64,
    pub eps_schedule: Vec<f64>,
    pub tol_fp: f64,
    pub max_outer: usize,
    pub xi_update: XiUpdate,
    /// Resolvent step; estimated from a perturbed inner solve when absent.
    pub rho: Option<f64>,
    pub inner: SolveOptions,
    /// Solve even when the smallness condition fails.
    pub force: bool,
    /// Record `||z||` and `||Lz||_*` of every outer iterate.
    pub track_iterates: bool,
    /// Stage `i` stops at movement `min(tol_fp, stage_tol_ratio * eps_i)`.
    pub stage_tol_ratio: f64,
    /// Update `rho` from the secant of consecutive feedback responses
    /// (resolvent update with estimated `rho` only).
    pub adaptive_rho: bool,
}

impl Default for OuterOptions {
    fn default() -> Self {
        OuterOptions {
            selection: Selection::MinNorm,
            damping: 0.5,
            eps_schedule: default_eps_schedule(),
            tol_fp: 1e-7,
            max_outer: 500,
            xi_update: XiUpdate::Resolvent,
            rho: None,
            inner: SolveOptions {
                tol_residual: 1e-10,
                ..SolveOptions::default()
            },
            force: false,
            track_iterates: false,
            stage_tol_ratio: 1e-2,
            adaptive_rho: true,
        }
    }
}

/// `1e-2, 1e-3, ..., 1e-8`.
pub fn default_eps_schedule() -> Vec<f64> {
    (2..=8).map(|k| 10f64.powi(-k)).collect()
}

impl OuterOptions {
    pub fn validate(&self) -> Result<()> {
        contract(self.damping > 0.0 && self.damping <= 1.0, || {
            format!("damping must be in (0, 1], got {}", self.damping)
        })?;
        contract(!self.eps_schedule.is_empty(), || {
            "eps_schedule must not be empty".into()
        })?;
        contract(
            self.eps_schedule.iter().all(|e| *e > 0.0 && e.is_finite()),
            || "eps_schedule entries must be positive".into(),
        )?;
        contract(self.eps_schedule.windows(2).all(|w| w[1] < w[0]), || {
            "eps_schedule must be decreasing".into()
        })?;
        contract(self.tol_fp > 0.0, || {
            format!("tol_fp must be positive, got {}", self.tol_fp)
        })?;
        contract(self.max_outer > 0, || "max_outer must be positive".into())?;
        contract(self.stage_tol_ratio > 0.0, || {
            "stage_tol_ratio must be positive".into()
        })?;
        if let Some(r) = self.rho {
            contract(r > 0.0 && r.is_finite(), || {
                format!("rho must be positive, got {r}")
            })?;
        }
        Ok(())
    }
}

/// Nodewise selection, damped toward `current` when given:
/// `lambda * pick + (1 - lambda) * clip(current)`.
pub fn select_xi(
    ivf: &IntervalField,
    current: Option<&Field>,
    strategy: Selection,
    damping: f64,
) -> Field {
    let (nt, cols) = ivf.shape();
    Field::from_fn(nt, cols, |n, j| {
        let iv = ivf.get(n, j);
        let pick = strategy.pick(iv);
        match current {
            Some(c) => damping * pick + (1.0 - damping) * iv.clip(c.get(n, j)),
            None => pick,
        }
    })
}

/// Hull of `d_C j` over `[s - h, s + h]`.
pub fn windowed_subdiff(law: &FrictionLaw, s: f64, h: f64) -> Interval {
    let mut iv = clarke_subdiff(law, s)
        .hull(&clarke_subdiff(law, s - h))
        .hull(&clarke_subdiff(law, s + h));
    for k in law.kink_points() {
        if (k - s).abs() <= h {
            iv = iv.hull(&clarke_subdiff(law, k));
        }
    }
    iv
}

/// Largest distance from `xi` to `G(gamma x)`, with the `s`-window.
pub fn xi_membership(inst: &QviInstance, x: &Field, xi: &Field) -> Result<f64> {
    let y = inst.gamma(x)?;
    contract(xi.same_shape(&y), || "feedback shape mismatch".into())?;
    let w = inst.gamma.y_weights(&inst.grid);
    let mut worst = 0.0f64;
    for n in 0..y.nt() {
        for (j, &wj) in w.iter().enumerate() {
            let d = if wj > 0.0 {
                windowed_subdiff(&inst.law, y.get(n, j), MEMBERSHIP_WINDOW).distance(xi.get(n, j))
            } else {
                xi.get(n, j).abs()
            };
            worst = worst.max(d);
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub epsilon: f64,
    pub iters: usize,
    pub movement: f64,
    pub converged: bool,
    /// `||x(eps_i) - x(eps_{i-1})||_X`, absent for the first stage.
    pub drift: Option<f64>,
    pub rho: f64,
    pub damping: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerSummary {
    pub solves: usize,
    pub total_sweeps: usize,
    pub max_residual: f64,
    pub all_converged: bool,
    pub last: Option<ResidualReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QviSolution {
    #[serde(skip)]
    pub x: Field,
    #[serde(skip)]
    pub xi: Field,
    pub strategy: Selection,
    pub outer_iters: usize,
    /// Final-stage movement `||dz||_X + ||dxi||_Y*`.
    pub fp_residual: f64,
    /// Problem 1 natural residual with `M` frozen at `x`.
    pub frozen_residual: f64,
    /// `||x - S(x, xi)||_X` with a fresh `eps = 0` inner solve.
    pub fixed_point_gap: f64,
    pub xi_membership: f64,
    pub converged: bool,
    pub stages: Vec<StageRecord>,
    pub inner: InnerSummary,
    pub smallness_ok: bool,
    pub audit: Option<AuditReport>,
    pub max_iterate_norm: Option<f64>,
    pub max_iterate_lx: Option<f64>,
    pub warnings: Vec<String>,
}

impl QviSolution {
    pub fn x_norm(&self, inst: &QviInstance) -> f64 {
        norm_x(&inst.grid, &self.x, inst.np).unwrap_or(f64::NAN)
    }
}

/// Smallness check plus certificate, computed once per instance.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub smallness_ok: bool,
    pub certificate: Option<Certificate>,
}

pub fn prepare(inst: &QviInstance, force: bool) -> Result<Prepared> {
    let hc = inst.constants()?;
    let ok = check_smallness(&hc).0;
    if !ok && !force {
        return Err(EqviError::Refused(smallness_message(&hc)));
    }
    let certificate = if ok {
        Some(compute_certificate(&hc, &inst.certificate_inputs()?)?)
    } else {
        None
    };
    Ok(Prepared {
        smallness_ok: ok,
        certificate,
    })
}

/// Runs the outer loop from `x0`, with the feedback started from the
/// selection of `G(gamma x0)`.
pub fn solve_qvi(inst: &QviInstance, opts: &OuterOptions, x0: &Field) -> Result<QviSolution> {
    let prep = prepare(inst, opts.force)?;
    solve_prepared(inst, opts, &prep, x0, None)
}

struct Tracker {
    solves: usize,
    sweeps: usize,
    max_res: f64,
    all_conv: bool,
    last: Option<ResidualReport>,
}

impl Tracker {
    fn push(&mut self, r: ResidualReport) {
        self.solves += 1;
        self.sweeps += r.sweeps_used;
        self.max_res = self.max_res.max(r.node_residual_max);
        self.all_conv &= r.converged;
        self.last = Some(r);
    }
}

/// Resolvent step `1 / B`, with `B` the instantaneous `gamma` response to
/// a feedback perturbation confined to one time row, maximized over a few
/// rows. Later rows only see decayed copies of a perturbation, so the
/// same-row response is what limits the step.
fn estimate_rho(inst: &QviInstance, z: &Field, xi: &Field, inner: &SolveOptions) -> Result<f64> {
    let active = inst.gamma.active_cols(&inst.grid);
    if active.is_empty() {
        return Ok(1.0);
    }
    let nt = inst.grid.nt;
    let delta = 1e-3 * (1.0 + xi.max_abs());
    let (u0, _) = solve_inner_from(&inst.inner_problem(z, xi)?, inner, Some(z))?;
    let y0 = inst.gamma(&u0)?;
    let mut rows: Vec<usize> = (0..4).map(|k| (nt - 1) * k / 3).collect();
    rows.dedup();
    let mut b = 0.0f64;
    for &n in &rows {
        let mut xi_p = xi.clone();
        for &j in &active {
            xi_p.set(n, j, xi.get(n, j) + delta);
        }
        let (u1, _) = solve_inner_from(&inst.inner_problem(z, &xi_p)?, inner, Some(&u0))?;
        let y1 = inst.gamma(&u1)?;
        for &j in &active {
            b = b.max((y1.get(n, j) - y0.get(n, j)).abs() / delta);
        }
    }
    Ok(if b > 1e-12 {
        (1.0 / b).clamp(1e-6, 1e6)
    } else {
        1.0
    })
}

/// Resolvent update of every active feedback column.
/// Barzilai-Borwein estimate `<s, s> / <s, -dy>` from two consecutive
/// feedback inputs and their traces.
fn secant_rho(prev: &Option<(Field, Field)>, xi: &Field, y: &Field) -> Option<f64> {
    let (pxi, py) = prev.as_ref()?;
    let s = xi.sub(pxi);
    let d = y.sub(py);
    let ss = s.dot(&s);
    let sd = -s.dot(&d);
    (ss > 0.0 && sd > 1e-300 && (ss / sd).is_finite()).then(|| ss / sd)
}

fn resolvent_update(
    inst: &QviInstance,
    xi: &Field,
    y: &Field,
    rho: f64,
    strategy: Selection,
) -> Field {
    let w = inst.gamma.y_weights(&inst.grid);
    Field::from_fn(xi.nt(), xi.cols(), |n, j| {
        if w[j] == 0.0 {
            return 0.0;
        }
        let v = xi.get(n, j) + rho * y.get(n, j);
        let pts = inst.law.line_intersections(v, rho);
        strategy
            .pick_point(&pts)
            .unwrap_or_else(|| strategy.pick(clarke_subdiff(&inst.law, y.get(n, j))))
    })
}

fn undamped_update(
    inst: &QviInstance,
    opts: &OuterOptions,
    xi: &Field,
    y: &Field,
    rho: f64,
) -> Field {
    match opts.xi_update {
        XiUpdate::Resolvent => resolvent_update(inst, xi, y, rho, opts.selection),
        XiUpdate::Pick => select_xi(
            &apply_g(&inst.grid, &inst.gamma, &inst.law, y),
            None,
            opts.selection,
            1.0,
        ),
    }
}

/// [`solve_qvi`] with precomputed certificate data and an optional
/// initial feedback.
pub fn solve_prepared(
    inst: &QviInstance,
    opts: &OuterOptions,
    prep: &Prepared,
    x0: &Field,
    xi0: Option<&Field>,
) -> Result<QviSolution> {
    opts.validate()?;
    inst.validate()?;
    check_state(&inst.grid, x0)?;
    let grid = &inst.grid;
    let np = inst.np;
    let mut z = x0.clone();
    let mut xi = match xi0 {
        Some(f) => {
            contract(f.same_shape(&inst.zero_feedback()), || {
                "initial feedback shape mismatch".into()
            })?;
            f.clone()
        }
        None => select_xi(
            &apply_g(grid, &inst.gamma, &inst.law, &inst.gamma(x0)?),
            None,
            opts.selection,
            1.0,
        ),
    };
    let mut inner = opts.inner;
    inner.epsilon_reg = opts.eps_schedule[0];
    let mut rho = match opts.rho {
        Some(r) => r,
        None if opts.xi_update == XiUpdate::Resolvent => estimate_rho(inst, &z, &xi, &inner)?,
        None => 1.0,
    };
    let mut lambda = opts.damping;
    let rho_floor = rho * 1e-3;
    let mut rho_cap = rho * 1e8;
    let mut prev_pair: Option<(Field, Field)> = None;
    let mut tr = Tracker {
        solves: 0,
        sweeps: 0,
        max_res: 0.0,
        all_conv: true,
        last: None,
    };
    let mut stages: Vec<StageRecord> = Vec::new();
    let mut prev_stage_x: Option<Field> = None;
    let mut total_iters = 0;
    let mut max_norm: Option<f64> = None;
    let mut max_lx: Option<f64> = None;
    let mut last_move = f64::INFINITY;
    let last_stage = opts.eps_schedule.len() - 1;
    for (si, &eps) in opts.eps_schedule.iter().enumerate() {
        inner.epsilon_reg = eps;
        let stage_tol = opts.tol_fp.min(opts.stage_tol_ratio * eps);
        let mut iters = 0;
        let mut stage_ok = false;
        let mut prev_move = f64::INFINITY;
        let mut rises = 0;
        while iters < opts.max_outer {
            let (z_new, rep) = solve_inner_from(&inst.inner_problem(&z, &xi)?, &inner, Some(&z))?;
            tr.push(rep);
            let y = inst.gamma(&z_new)?;
            if opts.adaptive_rho && opts.rho.is_none() && opts.xi_update == XiUpdate::Resolvent {
                if let Some(r) = secant_rho(&prev_pair, &xi, &y) {
                    rho = r.clamp(rho_floor, rho_cap);
                }
                prev_pair = Some((xi.clone(), y.clone()));
            }
            let target = undamped_update(inst, opts, &xi, &y, rho);
            let xi_new = xi.scale(1.0 - lambda).axpy(lambda, &target);
            let mv = norm_x(grid, &z_new.sub(&z), np)?
                + dual_norm_y(grid, &inst.gamma, &xi_new.sub(&xi), np);
            if !mv.is_finite() {
                return Err(EqviError::Numerical(
                    "outer iterate became non-finite".into(),
                ));
            }
            z = z_new;
            xi = xi_new;
            iters += 1;
            if opts.track_iterates {
                let nz = norm_x(grid, &z, np)?;
                let nl = dual_norm_x(grid, &apply_l(grid, &z), np)?;
                max_norm = Some(max_norm.map_or(nz, |m: f64| m.max(nz)));
                max_lx = Some(max_lx.map_or(nl, |m: f64| m.max(nl)));
            }
            last_move = mv;
            if mv <= stage_tol {
                // the final stage also has to meet the frozen residual target
                let done = si < last_stage || {
                    let snapped = undamped_update(inst, opts, &xi, &inst.gamma(&z)?, rho);
                    vi_residual(&inst.inner_problem(&z, &snapped)?, &z) <= opts.tol_fp
                };
                if done {
                    stage_ok = true;
                    break;
                }
            }
            rises = if mv >= prev_move { rises + 1 } else { 0 };
            if rises >= 3 {
                match opts.xi_update {
                    XiUpdate::Resolvent => {
                        rho *= 0.5;
                        rho_cap = rho.max(rho_floor);
                    }
                    XiUpdate::Pick => lambda = (lambda * 0.5).max(1e-3),
                }
                rises = 0;
            }
            prev_move = mv;
        }
        total_iters += iters;
        let drift = match &prev_stage_x {
            Some(px) => Some(norm_x(grid, &z.sub(px), np)?),
            None => None,
        };
        stages.push(StageRecord {
            epsilon: eps,
            iters,
            movement: last_move,
            converged: stage_ok,
            drift,
            rho,
            damping: lambda,
        });
        prev_stage_x = Some(z.clone());
    }
    let x = z;
    let y = inst.gamma(&x)?;
    xi = undamped_update(inst, opts, &xi, &y, rho);
    let frozen_problem = inst.inner_problem(&x, &xi)?;
    let frozen_residual = vi_residual(&frozen_problem, &x);
    let mut check_opts = opts.inner;
    check_opts.epsilon_reg = 0.0;
    let (s_x, rep) = solve_inner_from(&frozen_problem, &check_opts, Some(&x))?;
    tr.push(rep);
    let fixed_point_gap = norm_x(grid, &x.sub(&s_x), np)?;
    let membership = xi_membership(inst, &x, &xi)?;
    let final_ok = stages.last().is_some_and(|s| s.converged);
    let converged = final_ok
        && last_move <= opts.tol_fp
        && frozen_residual <= 10.0 * opts.tol_fp
        && membership <= MEMBERSHIP_TOL;
    let mut warnings = Vec::new();
    if !prep.smallness_ok {
        warnings.push("smallness: violated".to_string());
    }
    if !final_ok {
        warnings.push(format!(
            "outer loop hit max_outer = {} in the final stage",
            opts.max_outer
        ));
    }
    if frozen_residual > 10.0 * opts.tol_fp {
        warnings.push(format!(
            "frozen residual {frozen_residual:.3e} above 10 * tol_fp"
        ));
    }
    if membership > MEMBERSHIP_TOL {
        warnings.push(format!("xi membership distance {membership:.3e}"));
    }
    let audit = match &prep.certificate {
        Some(cert) => {
            let xi_norm = dual_norm_y(grid, &inst.gamma, &xi, np);
            let a = audit_solution(grid, np, cert, &x, xi_norm)?;
            if !a.x_ok {
                warnings.push(format!(
                    "certificate violation: ||x|| = {:.6e} > c0 = {:.6e}",
                    a.x_norm, a.c0
                ));
            }
            if !a.lx_ok {
                warnings.push(format!(
                    "certificate violation: ||Lx||_* = {:.6e} > c5 = {:.6e}",
                    a.lx_dual_norm, a.c5
                ));
            }
            if !a.xi_ok {
                warnings.push(format!(
                    "certificate violation: ||xi|| = {:.6e} > c2 = {:.6e}",
                    a.xi_dual_norm, a.c2
                ));
            }
            Some(a)
        }
        None => None,
    };
    Ok(QviSolution {
        x,
        xi,
        strategy: opts.selection,
        outer_iters: total_iters,
        fp_residual: last_move,
        frozen_residual,
        fixed_point_gap,
        xi_membership: membership,
        converged,
        stages,
        inner: InnerSummary {
            solves: tr.solves,
            total_sweeps: tr.sweeps,
            max_residual: tr.max_res,
            all_converged: tr.all_conv,
            last: tr.last,
        },
        smallness_ok: prep.smallness_ok,
        audit,
        max_iterate_norm: max_norm,
        max_iterate_lx: max_lx,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeOptions {
    pub n_starts: usize,
    pub seed: u64,
    pub strategies: Vec<Selection>,
    pub cluster_tol: f64,
    pub outer: OuterOptions,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions {
            n_starts: 4,
            seed: 0,
            strategies: Selection::ALL.to_vec(),
            cluster_tol: 1e-5,
            outer: OuterOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub start: usize,
    pub strategy: Selection,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub representative: QviSolution,
    #[serde(skip)]
    pub x: Field,
    #[serde(skip)]
    pub xi: Field,
    pub x_norm: f64,
    pub members: Vec<Member>,
    /// `||x|| <= c0 (1 + 1e-6)`; absent without a certificate.
    pub in_c0_ball: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedRun {
    pub start: usize,
    pub strategy: Selection,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub clusters: Vec<Cluster>,
    pub failed: Vec<FailedRun>,
    pub c0: Option<f64>,
    pub runs: usize,
}

/// Initial state and feedback for start `k` (`k = 0` is the zero start).
pub fn probe_start(inst: &QviInstance, seed: u64, k: usize) -> Result<(Field, Option<Field>)> {
    if k == 0 {
        return Ok((inst.zero_state(), None));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (k as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let r = inst.radius(&inst.zero_state());
    let grid = &inst.grid;
    let x0 = Field::from_fn(grid.nt, grid.nodes(), |_, _| r * rng.gen_range(-1.0..=1.0));
    let xi0 = match inst.law.derivative_range() {
        Some(iv) if !iv.is_degenerate() => {
            let w = inst.gamma.y_weights(grid);
            Some(Field::from_fn(grid.nt, w.len(), |_, j| {
                if w[j] > 0.0 {
                    rng.gen_range(iv.lo..=iv.hi)
                } else {
                    0.0
                }
            }))
        }
        _ => None,
    };
    Ok((x0, xi0))
}

/// Multi-start probe: every start crossed with every strategy, merged in
/// `(start, strategy)` order and clustered by `||.||_X` distance.
pub fn probe_solution_set(inst: &QviInstance, popts: &ProbeOptions) -> Result<ProbeResult> {
    probe_solution_set_with(inst, popts, crate::par::threads_from_env())
}

/// [`probe_solution_set`] on `threads` workers (`0` = sequential).
pub fn probe_solution_set_with(
    inst: &QviInstance,
    popts: &ProbeOptions,
    threads: usize,
) -> Result<ProbeResult> {
    contract(popts.n_starts > 0, || "n_starts must be positive".into())?;
    contract(!popts.strategies.is_empty(), || {
        "at least one strategy required".into()
    })?;
    let prep = prepare(inst, popts.outer.force)?;
    let starts: Vec<(Field, Option<Field>)> = (0..popts.n_starts)
        .map(|k| probe_start(inst, popts.seed, k))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, Selection)> = (0..popts.n_starts)
        .flat_map(|k| popts.strategies.iter().map(move |&s| (k, s)))
        .collect();
    let results = crate::par::map_with(threads, &jobs, |&(k, s)| {
        let opts = OuterOptions {
            selection: s,
            ..popts.outer.clone()
        };
        let (x0, xi0) = &starts[k];
        solve_prepared(inst, &opts, &prep, x0, xi0.as_ref())
    });
    let c0 = prep.certificate.as_ref().map(|c| c.c0);
    let mut clusters: Vec<Cluster> = Vec::new();
    let mut failed = Vec::new();
    for (&(start, strategy), res) in jobs.iter().zip(results) {
        let sol = match res {
            Ok(s) if s.converged => s,
            Ok(s) => {
                failed.push(FailedRun {
                    start,
                    strategy,
                    reason: s.warnings.join("; "),
                });
                continue;
            }
            Err(e) => {
                failed.push(FailedRun {
                    start,
                    strategy,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let mut placed = false;
        for c in clusters.iter_mut() {
            let d = norm_x(&inst.grid, &sol.x.sub(&c.x), inst.np)?;
            if d < popts.cluster_tol {
                c.members.push(Member {
                    start,
                    strategy,
                    distance: d,
                });
                placed = true;
                break;
            }
        }
        if !placed {
            let x_norm = sol.x_norm(inst);
            clusters.push(Cluster {
                x: sol.x.clone(),
                xi: sol.xi.clone(),
                x_norm,
                members: vec![Member {
                    start,
                    strategy,
                    distance: 0.0,
                }],
                in_c0_ball: c0.map(|c| x_norm <= c * (1.0 + crate::certificates::AUDIT_SLACK)),
                representative: sol,
            });
        }
    }
    Ok(ProbeResult {
        clusters,
        failed,
        c0,
        runs: jobs.len(),
    })
}
