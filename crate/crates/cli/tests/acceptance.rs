//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on
//! any failure.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use eqvi::certificates::validate_hypotheses;
use eqvi::control::{refinement_study, solve_control, Search};
use eqvi::inner::{solve_inner, ImplicitFeedback, InnerProblem, SolveOptions};
use eqvi::operators::friction::FrictionLaw;
use eqvi::operators::plaplace::apply_f;
use eqvi::outer::{probe_solution_set_with, solve_qvi, OuterOptions};
use eqvi::space::{norm_x_pow, pairing_x};
use eqvi::suite::{
    abs_at_zero, builtin_laws, clarke_agreement, inner_equivalence, qvi_equivalence,
};
use eqvi::{BoundaryMode, Field, Grid, QviInstance};
use eqvi_cli::commands::config_files;
use eqvi_cli::config::{load_config, Loaded};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = (bool, String);
type Snapshot = (i32, Vec<(String, Vec<u8>)>);
type Criterion = (&'static str, fn() -> Verdict);

fn instances_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../instances")
}

fn load(name: &str) -> Loaded {
    load_config(&instances_dir().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn shipped() -> Vec<Loaded> {
    let mut files = config_files(&instances_dir()).unwrap();
    files.extend(config_files(&instances_dir().join("toy")).unwrap());
    files
        .iter()
        .map(|f| load_config(f).unwrap_or_else(|e| panic!("{}: {e}", f.display())))
        .collect()
}

fn toys() -> Vec<Loaded> {
    config_files(&instances_dir().join("toy"))
        .unwrap()
        .iter()
        .map(|f| load_config(f).unwrap())
        .collect()
}

fn within(elapsed: Duration, limit: Duration) -> Verdict {
    (
        elapsed <= limit,
        format!("{:.1}s of {}s", elapsed.as_secs_f64(), limit.as_secs()),
    )
}

fn hypothesis_validators() -> Verdict {
    let t0 = Instant::now();
    let mut worst = f64::INFINITY;
    let mut failing = Vec::new();
    let all = shipped();
    for l in &all {
        let rep = validate_hypotheses(&l.instance, 1000, 1).unwrap();
        for c in &rep.checks {
            worst = worst.min(c.worst_margin);
            if !c.passed {
                failing.push(format!("{}: {}", l.name, c.name));
            }
        }
    }
    let (ok_t, t) = within(t0.elapsed(), Duration::from_secs(30));
    (
        failing.is_empty() && ok_t,
        format!(
            "{} instances, worst relative margin {worst:.3e}, failing {failing:?}, {t}",
            all.len()
        ),
    )
}

fn plaplacian_identity() -> Verdict {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let nx = rng.gen_range(1..8);
        let nt = rng.gen_range(1..5);
        let g = Grid::new(
            nx,
            nt,
            rng.gen_range(0.3..3.0),
            0.0,
            rng.gen_range(0.5..3.0),
            BoundaryMode::ZeroDirichlet,
        )
        .unwrap();
        let p = rng.gen_range(1.1..5.0);
        let u = Field::from_fn(nt, nx, |_, _| rng.gen_range(-3.0..3.0));
        let lhs = pairing_x(&g, &apply_f(&g, 1.0, p, &u), &u);
        let rhs = norm_x_pow(&g, &u, p);
        worst = worst.max((lhs - rhs).abs() / rhs.max(f64::MIN_POSITIVE));
    }
    let (ok_t, t) = within(t0.elapsed(), Duration::from_secs(10));
    (
        worst <= 1e-10 && ok_t,
        format!("worst relative error {worst:.3e} over 1000 fields, {t}"),
    )
}

fn inner_oracle() -> Verdict {
    let t0 = Instant::now();
    let row = inner_equivalence(200, 20);
    let (ok_t, t) = within(t0.elapsed(), Duration::from_secs(120));
    (row.passed && ok_t, format!("{}, {t}", row.detail))
}

fn outer_oracle() -> Verdict {
    let t0 = Instant::now();
    let mut bad = Vec::new();
    let mut branches = 0;
    let all = toys();
    for l in &all {
        let cmp = qvi_equivalence(&l.name, &l.instance, &l.probe, 0).unwrap();
        branches += cmp.oracle_branches;
        if !cmp.row.passed {
            bad.push(format!("{}: {}", l.name, cmp.row.detail));
        }
    }
    let (ok_t, t) = within(t0.elapsed(), Duration::from_secs(300));
    (
        bad.is_empty() && all.len() == 20 && ok_t,
        format!(
            "{} toys, {branches} oracle branches, failures {bad:?}, {t}",
            all.len()
        ),
    )
}

fn certificate_containment() -> Verdict {
    let mut audited = 0;
    let mut failures = Vec::new();
    for l in shipped() {
        let inst = &l.instance;
        let hc = inst.constants().unwrap();
        if !eqvi::certificates::check_smallness(&hc).0 {
            continue;
        }
        let mut sols = Vec::new();
        if let Ok(s) = solve_qvi(inst, &l.outer, &inst.zero_state()) {
            sols.push(s);
        }
        if inst.grid.nt * inst.grid.nodes() <= 4 {
            let res = probe_solution_set_with(inst, &l.probe, 0).unwrap();
            sols.extend(res.clusters.into_iter().map(|c| c.representative));
        }
        for s in sols.iter().filter(|s| s.converged) {
            audited += 1;
            match &s.audit {
                Some(a) if a.passed => {}
                other => failures.push(format!("{}: {:?}", l.name, other)),
            }
        }
    }
    (
        failures.is_empty() && audited > 0,
        format!("{audited} converged solves audited, failures {failures:?}"),
    )
}

fn run_cli(args: &[&str], out: &Path) -> (i32, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_eqvi"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("EQVI_THREADS", "0")
        .output()
        .expect("cli runs");
    (
        o.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&o.stderr).into_owned(),
    )
}

fn smallness_refusal() -> Verdict {
    let cfg = instances_dir().join("refuse.json");
    let cfg = cfg.to_str().unwrap();
    let mut reports = Vec::new();
    let mut codes = Vec::new();
    let mut msg = String::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let (code, err) = run_cli(&["certify", "--config", cfg], dir.path());
        codes.push(code);
        msg = err;
        reports.push(std::fs::read(dir.path().join("certificate.json")).unwrap_or_default());
        let (code, _) = run_cli(&["solve", "--config", cfg], dir.path());
        codes.push(code);
    }
    let report: serde_json::Value = serde_json::from_slice(&reports[0]).unwrap_or_default();
    let names = report["violated_inequality"] == "c_F > c_G * ||gamma||^p"
        && msg.contains("c_F > c_G * ||gamma||^p");
    (
        codes.iter().all(|&c| c == 3) && names && reports[0] == reports[1],
        format!(
            "exit codes {codes:?}, names inequality: {names}, reports identical: {}",
            reports[0] == reports[1]
        ),
    )
}

fn regularization_path() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["demo-p15.json", "demo-p3.json"] {
        let l = load(name);
        let t0 = Instant::now();
        let sol = solve_qvi(&l.instance, &l.outer, &l.instance.zero_state()).unwrap();
        let el = t0.elapsed();
        let drifts: Vec<f64> = sol.stages.iter().filter_map(|s| s.drift).collect();
        let last = &drifts[drifts.len().saturating_sub(3)..];
        let monotone = last.len() == 3 && last.windows(2).all(|w| w[1] <= w[0]);
        let good = sol.converged
            && monotone
            && sol.frozen_residual <= 1e-6
            && el <= Duration::from_secs(120);
        ok &= good;
        parts.push(format!(
            "{}: p = {}, last drifts {:?}, frozen residual {:.3e}, {:.1}s",
            l.name,
            l.instance.np.p(),
            last.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>(),
            sol.frozen_residual,
            el.as_secs_f64()
        ));
    }
    (ok, parts.join("; "))
}

fn clarke_arithmetic() -> Verdict {
    let t0 = Instant::now();
    let mut rows = vec![abs_at_zero()];
    rows.extend(builtin_laws().iter().map(|(n, l)| clarke_agreement(n, l)));
    let (ok_t, t) = within(t0.elapsed(), Duration::from_secs(10));
    let bad: Vec<String> = rows
        .iter()
        .filter(|r| !r.passed)
        .map(|r| format!("{}: {}", r.name, r.detail))
        .collect();
    (
        bad.is_empty() && ok_t,
        format!("{} rows, failures {bad:?}, {t}", rows.len()),
    )
}

fn reduction() -> Verdict {
    let t0 = Instant::now();
    let base = load("monotone.json").instance;
    let mut worst = 0.0f64;
    let mut ok = true;
    for p in [1.5, 2.0, 3.0] {
        let mut inst: QviInstance = base.clone();
        inst.np = eqvi::NormParams::new(p).unwrap();
        inst.constraint.r1 = 0.0;
        inst.law = FrictionLaw::smooth_power(0.4, (p - 1.0).min(1.0));
        let sol = solve_qvi(&inst, &OuterOptions::default(), &inst.zero_state()).unwrap();
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
        ok &= sol.converged && rep.converged;
        worst = worst.max(sol.x.sub(&u).max_abs());
    }
    let (ok_t, t) = within(t0.elapsed(), Duration::from_secs(30));
    (
        ok && worst <= 1e-7 && ok_t,
        format!("p in {{1.5, 2, 3}}, max deviation {worst:.3e}, {t}"),
    )
}

fn control_recovery() -> Verdict {
    let t0 = Instant::now();
    let l = load("control.json");
    let setup = l.control.as_ref().unwrap();
    let (prob, truth) = setup.problem(&l.instance).unwrap();
    let truth = truth.unwrap();
    let res = solve_control(&prob, &Search::Grid { resolution: 9 }).unwrap();
    let cells: Vec<f64> = prob
        .space
        .boxes()
        .iter()
        .map(|b| (b[1] - b[0]) / 8.0)
        .collect();
    let near = res
        .best
        .to_vec()
        .iter()
        .zip(truth.to_vec())
        .zip(&cells)
        .all(|((b, t), c)| (b - t).abs() <= *c);
    let table = refinement_study(&prob, &[3, 5, 9]).unwrap();
    let costs: Vec<f64> = table.rows.iter().map(|r| r.best_cost).collect();
    let monotone = costs.windows(2).all(|w| w[1] <= w[0]);
    let (ok_t, t) = within(t0.elapsed(), Duration::from_secs(600));
    (
        near && monotone && ok_t,
        format!(
            "truth {:?}, best {:?}, within one cell: {near}, refinement costs {:?}, {t}",
            truth.to_vec(),
            res.best.to_vec(),
            costs.iter().map(|c| format!("{c:.3e}")).collect::<Vec<_>>()
        ),
    )
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

fn determinism() -> Verdict {
    let inst = |n: &str| instances_dir().join(n).to_string_lossy().into_owned();
    let cases: Vec<(&str, Vec<String>)> = vec![
        (
            "solve",
            vec![
                "solve".into(),
                "--config".into(),
                inst("demo-a.json"),
                "--seed".into(),
                "5".into(),
            ],
        ),
        (
            "certify",
            vec![
                "certify".into(),
                "--config".into(),
                inst("demo-a.json"),
                "--strict".into(),
                "--seed".into(),
                "5".into(),
            ],
        ),
        (
            "probe",
            vec![
                "probe".into(),
                "--config".into(),
                inst("branches.json"),
                "--seed".into(),
                "5".into(),
            ],
        ),
        (
            "control",
            vec![
                "control".into(),
                "--config".into(),
                inst("control.json"),
                "--seed".into(),
                "5".into(),
            ],
        ),
        (
            "oracle-check",
            vec![
                "oracle-check".into(),
                "--config".into(),
                inst("toy"),
                "--seed".into(),
                "5".into(),
            ],
        ),
    ];
    let mut bad = Vec::new();
    for (name, args) in &cases {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let runs: Vec<Snapshot> = (0..2)
            .map(|_| {
                let dir = tempfile::tempdir().unwrap();
                let (code, _) = run_cli(&args, dir.path());
                (code, dir_bytes(dir.path()))
            })
            .collect();
        if runs[0] != runs[1] || runs[0].1.is_empty() || runs[0].0 != 0 {
            bad.push(format!("{name} (exit {})", runs[0].0));
        }
    }
    (
        bad.is_empty(),
        format!(
            "{} subcommands run twice, differing or failing {bad:?}",
            cases.len()
        ),
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("hypothesis validators", hypothesis_validators),
        ("p-Laplacian identity", plaplacian_identity),
        ("inner oracle equivalence", inner_oracle),
        ("outer oracle equivalence", outer_oracle),
        ("certificate containment", certificate_containment),
        ("smallness refusal", smallness_refusal),
        ("regularization path", regularization_path),
        ("Clarke arithmetic", clarke_arithmetic),
        ("reduction consistency", reduction),
        ("control recovery", control_recovery),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|x| name.contains(x.as_str())) {
            continue;
        }
        let (ok, detail) = f();
        failed += usize::from(!ok);
        println!(
            "criterion {:>2} {} {name}: {detail}",
            k + 1,
            if ok { "PASS" } else { "FAIL" }
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
