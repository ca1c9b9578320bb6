use eqvi::control::{
    eval_cost, plant_instance, refinement_study, solve_control, ControlProblem, ControlSpace,
    CostSpec, Search,
};
use eqvi::gamma::GammaMode;
use eqvi::instance::{ConstantOverrides, QviInstance};
use eqvi::operators::constraint::{Aggregator, ConstraintMapSpec};
use eqvi::operators::friction::FrictionLaw;
use eqvi::operators::plaplace::PLaplacianParams;
use eqvi::outer::{OuterOptions, ProbeOptions, Selection};
use eqvi::{BoundaryMode, Field, Grid, NormParams};

fn problem() -> ControlProblem {
    let grid = Grid::new(6, 6, 1.0, 0.0, 1.0, BoundaryMode::Free).unwrap();
    let basis = Field::from_fn(6, grid.nodes(), |n, i| {
        1.0 + (0.9 * i as f64 + 0.4 * n as f64).sin()
    });
    let base = QviInstance {
        grid: grid.clone(),
        np: NormParams::new(2.0).unwrap(),
        f: PLaplacianParams {
            e: 1.0,
            e_min: 1e-3,
        },
        law: FrictionLaw::smooth_power(0.5, 1.0),
        psi: None,
        constraint: ConstraintMapSpec {
            r0: 0.6,
            r1: 0.2,
            aggregator: Aggregator::MeanAbs,
            r_max: 2.0,
        },
        source: basis.clone(),
        gamma: GammaMode::BoundaryTrace,
        overrides: ConstantOverrides::default(),
    };
    let space = ControlSpace {
        e_box: [0.5, 2.0],
        l_box: vec![[0.1, 1.0]],
        e_basis: vec![basis],
        coeff_box: vec![[0.2, 1.0]],
    };
    let probe = ProbeOptions {
        n_starts: 1,
        strategies: vec![Selection::MinNorm],
        outer: OuterOptions::default(),
        ..Default::default()
    };
    let cost = CostSpec {
        x_obs: base.zero_state(),
        misfit_weight: 1.0,
        reg_weight: 1e-8,
    };
    ControlProblem {
        base,
        space,
        cost,
        probe,
        prune: true,
    }
}

fn planted(seed: u64) -> (ControlProblem, eqvi::control::ControlTriple) {
    let mut prob = problem();
    let (cost, truth) = plant_instance(&prob, seed, 0.0).unwrap();
    prob.cost = cost;
    (prob, truth)
}

#[test]
fn noiseless_truth_costs_its_regularization() {
    let (prob, truth) = planted(3);
    let e = eval_cost(&prob, &truth).unwrap();
    assert!(e.converged);
    assert!(e.cost - truth.regularization(prob.cost.reg_weight) <= 1e-8);
    let (_, other) = planted(4);
    assert_ne!(truth, other);
}

#[test]
fn grid_recovers_planted_truth_and_refines_monotonically() {
    let (prob, truth) = planted(3);
    let t0 = std::time::Instant::now();
    let table = refinement_study(&prob, &[3, 5, 9]).unwrap();
    eprintln!(
        "refinement {:?}: {:?}",
        t0.elapsed(),
        table
            .rows
            .iter()
            .map(|r| (r.best_cost, r.evaluations))
            .collect::<Vec<_>>()
    );
    assert!(table
        .rows
        .windows(2)
        .all(|w| w[1].best_cost <= w[0].best_cost));
    assert!(table.monotone);
    let best = &table.rows[2].best;
    let cells: Vec<f64> = prob
        .space
        .boxes()
        .iter()
        .map(|b| (b[1] - b[0]) / 8.0)
        .collect();
    for ((b, t), c) in best.to_vec().iter().zip(truth.to_vec()).zip(cells) {
        assert!(
            (b - t).abs() <= c * (1.0 + 1e-12),
            "best {best:?} vs truth {truth:?}"
        );
    }
}

#[test]
fn pruning_keeps_the_argmin() {
    let (prob, _) = planted(5);
    let pruned = solve_control(&prob, &Search::Grid { resolution: 5 }).unwrap();
    let full = solve_control(
        &ControlProblem {
            prune: false,
            ..prob.clone()
        },
        &Search::Grid { resolution: 5 },
    )
    .unwrap();
    assert_eq!(full.pruned, 0);
    assert_eq!(pruned.best, full.best);
    assert_eq!(pruned.best_cost, full.best_cost);
}

#[test]
fn nelder_mead_improves_on_the_grid() {
    let (prob, _) = planted(3);
    let grid = solve_control(&prob, &Search::Grid { resolution: 5 }).unwrap();
    let nm = solve_control(
        &prob,
        &Search::NelderMead {
            restarts: 5,
            max_iters: 60,
            seed: 1,
        },
    )
    .unwrap();
    assert!(
        nm.best_cost <= grid.best_cost + 1e-6,
        "nm {} grid {}",
        nm.best_cost,
        grid.best_cost
    );
}

#[test]
fn degenerate_box_returns_its_point() {
    let mut prob = problem();
    prob.space.e_box = [1.2, 1.2];
    prob.space.l_box = vec![[0.3, 0.3]];
    prob.space.coeff_box = vec![[0.5, 0.5]];
    for search in [
        Search::Grid { resolution: 4 },
        Search::NelderMead {
            restarts: 2,
            max_iters: 10,
            seed: 0,
        },
        Search::Random { n: 3, seed: 2 },
    ] {
        let r = solve_control(&prob, &search).unwrap();
        assert_eq!(r.best.to_vec(), vec![1.2, 0.3, 0.5]);
    }
}

#[test]
fn heavy_regularization_picks_smallest_norm_corner() {
    let mut prob = problem();
    prob.cost.reg_weight = 1e6;
    let r = solve_control(&prob, &Search::Grid { resolution: 3 }).unwrap();
    assert_eq!(r.best.to_vec(), vec![0.5, 0.1, 0.2]);
}

#[test]
fn random_search_is_deterministic() {
    let (prob, _) = planted(2);
    let a = solve_control(&prob, &Search::Random { n: 12, seed: 9 }).unwrap();
    let b = solve_control(&prob, &Search::Random { n: 12, seed: 9 }).unwrap();
    assert_eq!(a, b);
}
