use eqvi::gamma::GammaMode;
use eqvi::inner::{solve_inner, ImplicitFeedback, InnerProblem, SolveOptions};
use eqvi::instance::{ConstantOverrides, QviInstance};
use eqvi::operators::constraint::{Aggregator, ConstraintMapSpec};
use eqvi::operators::friction::FrictionLaw;
use eqvi::operators::plaplace::PLaplacianParams;
use eqvi::oracle::oracle_qvi;
use eqvi::outer::{probe_solution_set, solve_qvi, OuterOptions, ProbeOptions, Selection};
use eqvi::{BoundaryMode, EqviError, Field, Grid, NormParams};

fn free_instance(p: f64, law: FrictionLaw, amp: f64, r1: f64) -> QviInstance {
    let grid = Grid::new(6, 6, 1.0, 0.0, 1.0, BoundaryMode::Free).unwrap();
    let source = Field::from_fn(6, grid.nodes(), |n, i| {
        amp * (1.0 + (0.7 * i as f64 + 0.3 * n as f64).sin())
    });
    QviInstance {
        grid,
        np: NormParams::new(p).unwrap(),
        f: PLaplacianParams {
            e: 1.0,
            e_min: 1e-3,
        },
        law,
        psi: None,
        constraint: ConstraintMapSpec {
            r0: 0.5,
            r1,
            aggregator: Aggregator::MeanAbs,
            r_max: 2.0,
        },
        source,
        gamma: GammaMode::BoundaryTrace,
        overrides: ConstantOverrides::default(),
    }
}

fn toy_two_branch() -> QviInstance {
    let grid = Grid::new(3, 1, 1.0, 0.0, 1.0, BoundaryMode::ZeroDirichlet).unwrap();
    QviInstance {
        grid,
        np: NormParams::new(2.0).unwrap(),
        f: PLaplacianParams {
            e: 1.0,
            e_min: 1e-3,
        },
        law: FrictionLaw::neg_abs(1.0),
        psi: None,
        constraint: ConstraintMapSpec {
            r0: 0.3,
            r1: 0.5,
            aggregator: Aggregator::MeanAbs,
            r_max: 2.0,
        },
        source: Field::from_fn(1, 3, |_, i| 0.5 - 0.1 * i as f64),
        gamma: GammaMode::Restriction { nodes: vec![1] },
        overrides: ConstantOverrides::default(),
    }
}

#[test]
fn zero_data_gives_zero_solution() {
    let mut inst = free_instance(2.0, FrictionLaw::abs(0.3), 0.0, 0.2);
    inst.source = inst.zero_state();
    let sol = solve_qvi(&inst, &OuterOptions::default(), &inst.zero_state()).unwrap();
    assert!(sol.converged);
    assert!(sol.x.max_abs() <= 1e-12);
    let toy = QviInstance {
        source: Field::zeros(1, 3),
        law: FrictionLaw::abs(1.0),
        ..toy_two_branch()
    };
    let sols = oracle_qvi(&toy).unwrap();
    assert_eq!(sols.len(), 1);
    assert_eq!(sols[0].x.max_abs(), 0.0);
}

#[test]
fn reduction_matches_implicit_feedback_solve() {
    for p in [1.5, 2.0, 3.0] {
        let inst = free_instance(
            p,
            FrictionLaw::smooth_power(0.4, (p - 1.0).min(1.0)),
            0.5,
            0.0,
        );
        let sol = solve_qvi(&inst, &OuterOptions::default(), &inst.zero_state()).unwrap();
        assert!(sol.converged, "p = {p}: {:?}", sol.warnings);
        let prob = InnerProblem {
            grid: inst.grid.clone(),
            np: inst.np,
            e: inst.f.e,
            psi: None,
            radius: inst.constraint.r0,
            z: inst.zero_state(),
            load: inst.source.clone(),
            feedback: Some(ImplicitFeedback {
                mode: inst.gamma.clone(),
                law: inst.law.clone(),
            }),
        };
        let (u, rep) = solve_inner(
            &prob,
            &SolveOptions {
                tol_residual: 1e-12,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(rep.converged);
        let err = sol.x.sub(&u).max_abs();
        assert!(err <= 1e-7, "p = {p}: reduction error {err}");
    }
}

#[test]
fn refuses_without_force() {
    let mut inst = free_instance(2.0, FrictionLaw::smooth_power(50.0, 1.0), 0.5, 0.2);
    inst.overrides.c_f = Some(0.1);
    let err = solve_qvi(&inst, &OuterOptions::default(), &inst.zero_state()).unwrap_err();
    assert!(matches!(err, EqviError::Refused(_)));
    let forced = OuterOptions {
        force: true,
        max_outer: 5,
        ..Default::default()
    };
    let sol = solve_qvi(&inst, &forced, &inst.zero_state()).unwrap();
    assert!(sol.warnings.iter().any(|w| w == "smallness: violated"));
}

#[test]
fn iterates_stay_in_certificate_ball() {
    for (p, law) in [
        (2.0, FrictionLaw::abs(0.3)),
        (3.0, FrictionLaw::smooth_power(0.2, 1.0)),
    ] {
        let inst = free_instance(p, law, 0.5, 0.2);
        let (_, cert) = inst.certify().unwrap();
        assert!(cert.smallness_ok);
        for s in Selection::ALL {
            let opts = OuterOptions {
                selection: s,
                track_iterates: true,
                ..Default::default()
            };
            let sol = solve_qvi(&inst, &opts, &inst.zero_state()).unwrap();
            assert!(sol.converged);
            assert!(sol.audit.as_ref().unwrap().passed);
            assert!(sol.max_iterate_norm.unwrap() <= cert.c0 * (1.0 + 1e-6));
            assert!(sol.max_iterate_lx.unwrap() <= cert.c5 * (1.0 + 1e-6));
        }
    }
}

#[test]
fn lo_and_hi_reach_distinct_oracle_branches() {
    let inst = toy_two_branch();
    let sols = oracle_qvi(&inst).unwrap();
    assert_eq!(sols.len(), 3);
    let mut hit = Vec::new();
    for s in [Selection::Lo, Selection::Hi] {
        let opts = OuterOptions {
            selection: s,
            force: true,
            ..Default::default()
        };
        let sol = solve_qvi(&inst, &opts, &inst.zero_state()).unwrap();
        assert!(sol.converged);
        let (idx, d) = sols
            .iter()
            .enumerate()
            .map(|(i, o)| (i, o.x.sub(&sol.x).max_abs()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        assert!(d <= 1e-6, "{s:?} distance {d}");
        hit.push(idx);
    }
    assert_ne!(hit[0], hit[1]);
}

#[test]
fn probe_covers_oracle_branches() {
    let inst = toy_two_branch();
    let sols = oracle_qvi(&inst).unwrap();
    let popts = ProbeOptions {
        n_starts: 6,
        outer: OuterOptions {
            force: true,
            ..Default::default()
        },
        ..Default::default()
    };
    let res = probe_solution_set(&inst, &popts).unwrap();
    assert!(res.failed.is_empty());
    for o in &sols {
        let d = res
            .clusters
            .iter()
            .map(|c| c.x.sub(&o.x).max_abs())
            .fold(f64::INFINITY, f64::min);
        assert!(
            d <= 1e-6,
            "oracle branch {:?} missed by {d}; clusters {:?}",
            o.x.as_slice(),
            res.clusters
                .iter()
                .map(|c| c.x.as_slice().to_vec())
                .collect::<Vec<_>>()
        );
    }
    // every cluster is a verified branch
    for c in &res.clusters {
        assert!(sols.iter().any(|o| o.x.sub(&c.x).max_abs() <= 1e-6));
    }
}

#[test]
fn monotone_instance_has_one_cluster() {
    let inst = free_instance(2.0, FrictionLaw::abs(0.3), 0.5, 0.0);
    let res = probe_solution_set(&inst, &ProbeOptions::default()).unwrap();
    assert_eq!(res.clusters.len(), 1);
    assert_eq!(res.clusters[0].in_c0_ball, Some(true));
}

#[test]
fn oracle_reduction_has_one_self_consistent_solution() {
    let base = toy_two_branch();
    let inst = QviInstance {
        law: FrictionLaw::smooth_power(0.4, 1.0),
        constraint: ConstraintMapSpec::constant(0.3),
        source: Field::from_fn(1, 3, |_, i| 4.0 - 2.0 * i as f64),
        ..base
    };
    let sols = oracle_qvi(&inst).unwrap();
    assert_eq!(sols.len(), 1);
    let s = &sols[0];
    let mut frozen = inst.inner_problem(&s.x, &s.xi).unwrap();
    frozen.feedback = None;
    let direct = eqvi::oracle::oracle_inner_vi(&frozen, 0.0).unwrap();
    assert!(direct.sub(&s.x).max_abs() <= 1e-12);
    let sol = solve_qvi(&inst, &OuterOptions::default(), &inst.zero_state()).unwrap();
    assert!(sol.x.sub(&s.x).max_abs() <= 1e-7);
    assert_eq!(oracle_qvi(&inst).unwrap()[0].x, s.x);
}
