//! Cross-validation suite: main solvers against the brute-force oracles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::field::Field;
use crate::grid::{BoundaryMode, Grid};
use crate::inner::{solve_inner, InnerProblem, SolveOptions};
use crate::instance::QviInstance;
use crate::operators::friction::{clarke_subdiff, FrictionLaw};
use crate::operators::psi::{PsiSpec, Theta};
use crate::oracle::{oracle_clarke, oracle_inner_vi, oracle_qvi, CheckRow};
use crate::outer::{probe_solution_set_with, ProbeOptions, MEMBERSHIP_TOL};
use crate::space::NormParams;

pub const INNER_TOL: f64 = 1e-8;
pub const CLARKE_TOL: f64 = 1e-3;
pub const BRANCH_TOL: f64 = 1e-6;
pub const FROZEN_TOL: f64 = 1e-6;
pub const CLARKE_POINTS: usize = 100;

/// Difference-quotient levels for the Clarke comparison.
pub const CLARKE_LEVELS: [f64; 5] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

/// Random `p = 2` inner toy with at most 6 unknowns and its regularization.
pub fn random_inner_toy(rng: &mut ChaCha8Rng) -> (InnerProblem, f64) {
    let (boundary, nx, nt) = match rng.gen_range(0..5) {
        0 => (BoundaryMode::ZeroDirichlet, 1, rng.gen_range(1..=6)),
        1 => (BoundaryMode::ZeroDirichlet, 2, rng.gen_range(1..=3)),
        2 => (BoundaryMode::ZeroDirichlet, 3, rng.gen_range(1..=2)),
        3 => (BoundaryMode::ZeroDirichlet, 6, 1),
        _ => (BoundaryMode::Free, 1, rng.gen_range(1..=2)),
    };
    let grid = Grid::new(
        nx,
        nt,
        rng.gen_range(0.2..2.0),
        0.0,
        rng.gen_range(0.5..2.0),
        boundary,
    )
    .expect("toy grid is valid");
    let nodes = grid.nodes();
    let load = Field::from_fn(nt, nodes, |_, _| rng.gen_range(-20.0..20.0));
    let z = Field::from_fn(nt, nodes, |_, _| rng.gen_range(-1.0..1.0));
    let psi = rng.gen_bool(0.5).then(|| PsiSpec {
        theta: if rng.gen_bool(0.5) {
            Theta::Constant {
                value: rng.gen_range(0.1..3.0),
            }
        } else {
            Theta::Sigmoid {
                lo: 0.2,
                hi: 2.0,
                k: 2.0,
            }
        },
        beta: 1.0,
        nodes: (0..nodes).filter(|_| rng.gen_bool(0.6)).collect(),
        c_psi: 0.0,
        d_psi: 0.0,
        e_psi: 0.0,
    });
    let prob = InnerProblem {
        grid,
        np: NormParams::new(2.0).expect("p = 2"),
        e: rng.gen_range(0.5..2.0),
        psi,
        radius: rng.gen_range(0.05..1.0),
        z,
        load,
        feedback: None,
    };
    let eps = if rng.gen_bool(0.5) { 0.0 } else { 1e-2 };
    (prob, eps)
}

/// Worst max-norm gap between `solve_inner` and the enumeration oracle.
pub fn inner_equivalence(n_cases: usize, seed: u64) -> CheckRow {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for case in 0..n_cases {
        let (prob, eps) = random_inner_toy(&mut rng);
        let opts = SolveOptions {
            epsilon_reg: eps,
            ..Default::default()
        };
        let res = solve_inner(&prob, &opts)
            .and_then(|(u, rep)| Ok((u, rep, oracle_inner_vi(&prob, eps)?)));
        match res {
            Ok((u, rep, want)) => {
                let err = u.sub(&want).max_abs();
                worst = worst.max(err);
                if !rep.converged || err > INNER_TOL {
                    failures.push(case);
                }
            }
            Err(_) => failures.push(case),
        }
    }
    CheckRow {
        name: format!("inner: solve_inner vs oracle ({n_cases} toys)"),
        passed: failures.is_empty(),
        detail: format!("max error {worst:.3e} (tol {INNER_TOL:.0e}), failing cases {failures:?}"),
    }
}

/// Built-in laws with the parameters used by the Clarke comparison.
pub fn builtin_laws() -> Vec<(String, FrictionLaw)> {
    vec![
        ("abs".into(), FrictionLaw::abs(1.0)),
        ("neg-abs".into(), FrictionLaw::neg_abs(0.7)),
        (
            "zigzag".into(),
            FrictionLaw::zigzag(vec![-0.5, 1.0, 0.25], vec![-1.0, 0.5]),
        ),
        (
            "smooth-power(1)".into(),
            FrictionLaw::smooth_power(1.0, 1.0),
        ),
        (
            "smooth-power(0.5)".into(),
            FrictionLaw::smooth_power(0.5, 0.5),
        ),
    ]
}

/// Every kink of `law` plus evenly spaced points of `[-2, 2]`, `n` in total.
pub fn clarke_points(law: &FrictionLaw, n: usize) -> Vec<f64> {
    let mut pts = law.kink_points();
    let m = n.saturating_sub(pts.len()).max(2);
    pts.extend((0..m).map(|k| -2.0 + 4.0 * (k as f64 + 0.5) / m as f64));
    pts
}

pub fn clarke_agreement(name: &str, law: &FrictionLaw) -> CheckRow {
    let pts = clarke_points(law, CLARKE_POINTS);
    let mut worst = 0.0f64;
    let mut at = 0.0;
    for &s in &pts {
        let exact = clarke_subdiff(law, s);
        let est = oracle_clarke(law, s, &CLARKE_LEVELS, &CLARKE_LEVELS);
        let err = (exact.lo - est.lo).abs().max((exact.hi - est.hi).abs());
        if err > worst {
            worst = err;
            at = s;
        }
    }
    CheckRow {
        name: format!("clarke: {name} ({} points)", pts.len()),
        passed: worst <= CLARKE_TOL,
        detail: format!("max error {worst:.3e} at s = {at} (tol {CLARKE_TOL:.0e})"),
    }
}

/// `d|.|(0)` is exactly `[-1, 1]`.
pub fn abs_at_zero() -> CheckRow {
    let iv = clarke_subdiff(&FrictionLaw::abs(1.0), 0.0);
    CheckRow {
        name: "clarke: abs at 0 exact".into(),
        passed: iv.lo == -1.0 && iv.hi == 1.0,
        detail: format!("[{}, {}]", iv.lo, iv.hi),
    }
}

/// Outcome of comparing a probe against the enumerated solution set.
#[derive(Debug, Clone)]
pub struct QviComparison {
    pub oracle_branches: usize,
    pub clusters: usize,
    pub missed: usize,
    pub spurious: usize,
    /// Worst distance from an oracle branch to its nearest probe solution.
    pub worst_distance: f64,
    pub row: CheckRow,
}

/// Probe `inst` and require every oracle branch to be found and every
/// returned solution to satisfy the frozen residual and membership bounds.
pub fn qvi_equivalence(
    name: &str,
    inst: &QviInstance,
    popts: &ProbeOptions,
    threads: usize,
) -> Result<QviComparison> {
    let branches = oracle_qvi(inst)?;
    let probe = probe_solution_set_with(inst, popts, threads)?;
    let mut worst = 0.0f64;
    let mut missed = 0;
    for b in &branches {
        let d = probe
            .clusters
            .iter()
            .map(|c| c.x.sub(&b.x).max_abs())
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(d);
        if d > BRANCH_TOL {
            missed += 1;
        }
    }
    let spurious = probe
        .clusters
        .iter()
        .filter(|c| {
            let s = &c.representative;
            !(s.frozen_residual <= FROZEN_TOL && s.xi_membership <= MEMBERSHIP_TOL)
        })
        .count();
    let passed = missed == 0 && spurious == 0 && !branches.is_empty();
    let row = CheckRow {
        name: format!("qvi: {name}"),
        passed,
        detail: format!(
            "{} oracle branches, {} clusters, {missed} missed, {spurious} spurious, worst distance {worst:.3e}, {} failed runs",
            branches.len(),
            probe.clusters.len(),
            probe.failed.len()
        ),
    };
    Ok(QviComparison {
        oracle_branches: branches.len(),
        clusters: probe.clusters.len(),
        missed,
        spurious,
        worst_distance: worst,
        row,
    })
}

/// Inner and Clarke rows of the suite.
pub fn builtin_rows(n_inner: usize, seed: u64) -> Vec<CheckRow> {
    let mut rows = vec![inner_equivalence(n_inner, seed), abs_at_zero()];
    rows.extend(builtin_laws().iter().map(|(n, l)| clarke_agreement(n, l)));
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clarke_points_include_kinks() {
        for (_, law) in builtin_laws() {
            let pts = clarke_points(&law, CLARKE_POINTS);
            assert!(pts.len() >= CLARKE_POINTS);
            assert!(law.kink_points().iter().all(|k| pts.contains(k)));
        }
    }
}
