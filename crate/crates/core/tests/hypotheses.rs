use eqvi::certificates::validate_hypotheses;
use eqvi::gamma::{dual_norm_y, GammaMode};
use eqvi::instance::{ConstantOverrides, QviInstance};
use eqvi::operators::constraint::{Aggregator, ConstraintMapSpec};
use eqvi::operators::friction::FrictionLaw;
use eqvi::operators::plaplace::PLaplacianParams;
use eqvi::operators::psi::{PsiSpec, Theta};
use eqvi::{BoundaryMode, Field, Grid, NormParams};

fn instance(
    p: f64,
    law: FrictionLaw,
    boundary: BoundaryMode,
    psi_beta: Option<f64>,
) -> QviInstance {
    let grid = Grid::new(6, 5, 1.0, 0.0, 1.0, boundary).unwrap();
    let gamma = match boundary {
        BoundaryMode::Free => GammaMode::BoundaryTrace,
        BoundaryMode::ZeroDirichlet => GammaMode::Restriction { nodes: vec![1, 2] },
    };
    let psi = psi_beta.map(|beta| PsiSpec {
        theta: Theta::Sigmoid {
            lo: 0.5,
            hi: 1.5,
            k: 2.0,
        },
        beta,
        nodes: vec![0, 3],
        c_psi: 0.0,
        d_psi: 0.0,
        e_psi: 0.0,
    });
    QviInstance {
        source: Field::constant(5, grid.nodes(), 0.3),
        grid,
        np: NormParams::new(p).unwrap(),
        f: PLaplacianParams {
            e: 1.3,
            e_min: 1e-3,
        },
        law,
        psi,
        constraint: ConstraintMapSpec {
            r0: 0.4,
            r1: 0.3,
            aggregator: Aggregator::MeanAbs,
            r_max: 3.0,
        },
        gamma,
        overrides: ConstantOverrides::default(),
    }
}

#[test]
fn builtin_instances_pass() {
    for p in [1.5, 2.0, 3.0] {
        for boundary in [BoundaryMode::Free, BoundaryMode::ZeroDirichlet] {
            for law in [
                FrictionLaw::abs(0.3),
                FrictionLaw::neg_abs(0.2),
                FrictionLaw::zigzag(vec![-0.2, 0.4, -0.1], vec![-0.5, 0.5]),
                FrictionLaw::smooth_power(0.4, (p - 1.0) * 0.5),
                FrictionLaw::smooth_power(0.4, p - 1.0),
            ] {
                for beta in [None, Some(1.0), Some(0.5 * (1.0 + p))] {
                    let inst = instance(p, law.clone(), boundary, beta);
                    let rep = validate_hypotheses(&inst, 300, 7).unwrap();
                    assert!(
                        rep.passed,
                        "p = {p}, {boundary:?}, {law:?}, beta {beta:?}: {:#?}",
                        rep.checks
                    );
                }
            }
        }
    }
}

#[test]
fn understated_coercivity_fails() {
    let mut inst = instance(2.0, FrictionLaw::abs(0.3), BoundaryMode::Free, None);
    inst.f.e = 1.0;
    inst.overrides.c_f = Some(2.0);
    let rep = validate_hypotheses(&inst, 100, 1).unwrap();
    let c = rep
        .checks
        .iter()
        .find(|c| c.name == "H(F) coercivity")
        .unwrap();
    assert!(!c.passed);
    assert!(rep
        .checks
        .iter()
        .filter(|c| c.name != "H(F) coercivity")
        .all(|c| c.passed));
}

#[test]
fn abs_growth_is_tight_at_zero() {
    let inst = instance(2.0, FrictionLaw::abs(0.3), BoundaryMode::Free, None);
    let hc = inst.constants().unwrap();
    let xi = Field::constant(inst.grid.nt, 2, 0.3);
    let at_zero = dual_norm_y(&inst.grid, &inst.gamma, &xi, inst.np);
    assert!((hc.d_g - at_zero).abs() <= 1e-14 * hc.d_g);
}

#[test]
fn validation_is_deterministic() {
    let inst = instance(
        3.0,
        FrictionLaw::abs(0.3),
        BoundaryMode::ZeroDirichlet,
        Some(2.0),
    );
    assert_eq!(
        validate_hypotheses(&inst, 50, 3).unwrap(),
        validate_hypotheses(&inst, 50, 3).unwrap()
    );
}
