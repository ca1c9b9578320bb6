//! Subcommand implementations and the exit-code contract.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use eqvi::certificates::{check_smallness, validate_hypotheses};
use eqvi::control::{refinement_study, solve_control, ControlResult};
use eqvi::oracle::CheckRow;
use eqvi::outer::{probe_solution_set, solve_qvi};
use eqvi::suite::{builtin_rows, qvi_equivalence};
use eqvi::EqviError;
use serde_json::json;

use crate::config::{load_config, ConfigError, Loaded, Overrides};
use crate::output::{feedback_csv, fmt_f64, state_csv, table_csv, write_atomic, write_json};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_REFUSED: i32 = 3;

/// Random samples per hypothesis in `--strict` mode.
pub const STRICT_SAMPLES: usize = 1000;
/// Random inner toys in the oracle suite.
pub const SUITE_INNER_TOYS: usize = 200;

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct Common {
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub strict: bool,
    pub force: bool,
    pub starts: Option<usize>,
    pub grid_res: Option<usize>,
    pub tol: Option<f64>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            force: self.force,
            starts: self.starts,
            grid_res: self.grid_res,
            tol: self.tol,
        }
    }

    fn out_file(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Certify,
    Probe,
    Control,
    OracleCheck,
}

/// Exit code plus the lines to print on stdout.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub lines: Vec<String>,
}

impl Outcome {
    fn new(code: i32, lines: Vec<String>) -> Self {
        Outcome { code, lines }
    }
}

/// Runs a subcommand; every failure maps onto the exit-code contract.
pub fn run(cmd: Command, common: &Common) -> Outcome {
    let res = match cmd {
        Command::Solve => cmd_solve(common),
        Command::Certify => cmd_certify(common),
        Command::Probe => cmd_probe(common),
        Command::Control => cmd_control(common),
        Command::OracleCheck => cmd_oracle_check(common),
    };
    res.unwrap_or_else(|e| Outcome::new(classify(&e), vec![format!("error: {e:#}")]))
}

fn classify(e: &anyhow::Error) -> i32 {
    if e.downcast_ref::<ConfigError>().is_some() {
        return EXIT_CONFIG;
    }
    match e.downcast_ref::<EqviError>() {
        Some(EqviError::Refused(_)) => EXIT_REFUSED,
        Some(EqviError::Numerical(_) | EqviError::Infeasible(_)) => EXIT_NOT_CONVERGED,
        _ => EXIT_CONFIG,
    }
}

fn load(common: &Common) -> Result<Loaded> {
    let path = common.config.as_deref().ok_or_else(|| ConfigError {
        message: "--config PATH is required".into(),
        line: None,
        column: None,
    })?;
    let mut loaded = load_config(path).map_err(|e| ConfigError {
        message: format!("{}: {e}", path.display()),
        ..e
    })?;
    loaded.apply(&common.overrides());
    if common.strict {
        strict_check(&loaded, common)?;
    }
    Ok(loaded)
}

/// Checks the declared constants against the operators.
fn strict_check(loaded: &Loaded, common: &Common) -> Result<()> {
    let rep = validate_hypotheses(&loaded.instance, STRICT_SAMPLES, common.seed.unwrap_or(0))?;
    write_json(&common.out_file("hypotheses.json"), &rep)?;
    if !rep.passed {
        let failing: Vec<String> = rep
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| {
                format!(
                    "{} ({}) worst margin {:.3e}",
                    c.name, c.inequality, c.worst_margin
                )
            })
            .collect();
        return Err(ConfigError {
            message: format!(
                "declared constants are inconsistent: {}",
                failing.join("; ")
            ),
            line: None,
            column: None,
        }
        .into());
    }
    Ok(())
}

fn refusal(loaded: &Loaded, common: &Common, file: &str, message: &str) -> Result<Outcome> {
    let hc = loaded.instance.constants()?;
    let (_, margin) = check_smallness(&hc);
    write_json(
        &common.out_file(file),
        &json!({
            "instance": loaded.name,
            "smallness": "violated",
            "violated_inequality": "c_F > c_G * ||gamma||^p",
            "margin": margin,
            "message": message,
            "constants": hc,
        }),
    )?;
    Ok(Outcome::new(
        EXIT_REFUSED,
        vec![format!("refused: {message}")],
    ))
}

fn column_docs() -> serde_json::Value {
    json!({
        "solution.csv": {"1": "t (time level)", "2": "x (node position)", "3": "value (state x)"},
        "xi.csv": {"1": "t (time level)", "2": "x (feedback point)", "3": "value (selection xi in G(gamma x))"},
        "gnuplot": "set datafile separator ','; splot 'solution.csv' every ::1 using 2:1:3 with points",
    })
}

pub fn cmd_solve(common: &Common) -> Result<Outcome> {
    let loaded = load(common)?;
    let inst = &loaded.instance;
    let sol = match solve_qvi(inst, &loaded.outer, &inst.zero_state()) {
        Ok(s) => s,
        Err(EqviError::Refused(m)) => return refusal(&loaded, common, "report.json", &m),
        Err(e) => return Err(e.into()),
    };
    write_atomic(
        &common.out_file("solution.csv"),
        &state_csv(&inst.grid, &sol.x)?,
    )?;
    write_atomic(
        &common.out_file("xi.csv"),
        &feedback_csv(&inst.grid, &inst.gamma, &sol.xi)?,
    )?;
    let audited = sol.audit.as_ref().map(|a| a.passed);
    let code = if sol.converged && audited != Some(false) {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    };
    let cert = if sol.smallness_ok {
        Some(inst.certify()?.1)
    } else {
        None
    };
    write_json(
        &common.out_file("report.json"),
        &json!({
            "instance": loaded.name,
            "converged": sol.converged,
            "smallness": if sol.smallness_ok { "satisfied" } else { "violated" },
            "audit_passed": audited,
            "exit_code": code,
            "x_norm": sol.x_norm(inst),
            "certificate": cert.map(|c| json!({"c0": c.c0, "c2": c.c2, "c5": c.c5})),
            "solution": sol,
            "columns": column_docs(),
        }),
    )?;
    let mut lines = vec![format!(
        "{}: converged = {}, outer iterations = {}, frozen residual = {:.3e}, audit = {}",
        loaded.name,
        sol.converged,
        sol.outer_iters,
        sol.frozen_residual,
        audited.map_or("none".to_string(), |a| if a {
            "passed".into()
        } else {
            "failed".into()
        })
    )];
    lines.extend(sol.warnings.iter().map(|w| format!("warning: {w}")));
    Ok(Outcome::new(code, lines))
}

pub fn cmd_certify(common: &Common) -> Result<Outcome> {
    let loaded = load(common)?;
    let inst = &loaded.instance;
    match inst.certify() {
        Ok((hc, cert)) => {
            write_json(
                &common.out_file("certificate.json"),
                &json!({"instance": loaded.name, "smallness": "satisfied", "constants": hc, "certificate": cert}),
            )?;
            Ok(Outcome::new(
                EXIT_OK,
                vec![format!(
                    "{}: smallness holds (margin {:.6e}); c0 = {:.6e}, c2 = {:.6e}, c5 = {:.6e}",
                    loaded.name, cert.margin, cert.c0, cert.c2, cert.c5
                )],
            ))
        }
        Err(EqviError::Refused(m)) => refusal(&loaded, common, "certificate.json", &m),
        Err(e) => Err(e.into()),
    }
}

pub fn cmd_probe(common: &Common) -> Result<Outcome> {
    let loaded = load(common)?;
    let inst = &loaded.instance;
    let res = match probe_solution_set(inst, &loaded.probe) {
        Ok(r) => r,
        Err(EqviError::Refused(m)) => return refusal(&loaded, common, "clusters.json", &m),
        Err(e) => return Err(e.into()),
    };
    let code = if res.clusters.is_empty() {
        EXIT_NOT_CONVERGED
    } else {
        EXIT_OK
    };
    write_json(
        &common.out_file("clusters.json"),
        &json!({
            "instance": loaded.name,
            "seed": loaded.probe.seed,
            "n_clusters": res.clusters.len(),
            "probe": res,
        }),
    )?;
    let mut lines = vec![format!(
        "{}: {} runs, {} clusters, {} failed",
        loaded.name,
        res.runs,
        res.clusters.len(),
        res.failed.len()
    )];
    for (k, c) in res.clusters.iter().enumerate() {
        lines.push(format!(
            "  cluster {k}: ||x|| = {:.6e}, {} members",
            c.x_norm,
            c.members.len()
        ));
    }
    Ok(Outcome::new(code, lines))
}

fn history_csv(res: &ControlResult, nl: usize, nc: usize) -> Result<Vec<u8>> {
    let mut header = vec!["e".to_string()];
    header.extend((1..=nl).map(|k| format!("l_{k}")));
    header.extend((1..=nc).map(|k| format!("E_{k}")));
    header.extend(["cost", "converged", "pruned"].map(String::from));
    let rows: Vec<Vec<String>> = res
        .history
        .iter()
        .map(|h| {
            let mut r: Vec<String> = h.triple.to_vec().into_iter().map(fmt_f64).collect();
            r.push(fmt_f64(h.cost()));
            r.push(h.eval.as_ref().is_some_and(|e| e.converged).to_string());
            r.push(h.pruned.to_string());
            r
        })
        .collect();
    table_csv(&header, &rows)
}

pub fn cmd_control(common: &Common) -> Result<Outcome> {
    let loaded = load(common)?;
    let setup = loaded.control.as_ref().ok_or_else(|| ConfigError {
        message: "the configuration has no control section".into(),
        line: None,
        column: None,
    })?;
    let (prob, truth) = setup.problem(&loaded.instance)?;
    let res = solve_control(&prob, &setup.search)?;
    let nl = setup.space.l_box.len();
    let nc = setup.space.coeff_box.len();
    write_atomic(
        &common.out_file("control_history.csv"),
        &history_csv(&res, nl, nc)?,
    )?;
    let mut lines = vec![format!(
        "{}: best cost {:.6e} at {:?} ({} evaluations, {} pruned)",
        loaded.name,
        res.best_cost,
        res.best.to_vec(),
        res.evaluations,
        res.pruned
    )];
    let refinement = if setup.resolutions.is_empty() {
        None
    } else {
        let table = refinement_study(&prob, &setup.resolutions)?;
        for r in &table.rows {
            lines.push(format!(
                "  resolution {}: best cost {:.6e}",
                r.resolution, r.best_cost
            ));
        }
        lines.push(format!("  refinement monotone: {}", table.monotone));
        Some(table)
    };
    write_json(
        &common.out_file("best_triple.json"),
        &json!({
            "instance": loaded.name,
            "search": setup.search,
            "best": res.best,
            "best_cost": res.best_cost,
            "evaluations": res.evaluations,
            "pruned": res.pruned,
            "planted_truth": truth,
            "refinement": refinement,
        }),
    )?;
    let code = if res.best_cost.is_finite() {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    };
    Ok(Outcome::new(code, lines))
}

/// Configuration files named by `path`: the file itself, or the sorted
/// `.json` files of a directory.
pub fn config_files(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_dir() {
        let mut v: Vec<PathBuf> = std::fs::read_dir(path)
            .with_context(|| format!("reading {}", path.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        v.sort();
        if v.is_empty() {
            bail!("no .json configurations in {}", path.display());
        }
        Ok(v)
    } else {
        Ok(vec![path.to_path_buf()])
    }
}

fn format_table(rows: &[CheckRow]) -> Vec<String> {
    let w = rows.iter().map(|r| r.name.len()).max().unwrap_or(0);
    rows.iter()
        .map(|r| {
            format!(
                "{:<w$}  {}  {}",
                r.name,
                if r.passed { "PASS" } else { "FAIL" },
                r.detail
            )
        })
        .collect()
}

pub fn cmd_oracle_check(common: &Common) -> Result<Outcome> {
    let mut rows = builtin_rows(SUITE_INNER_TOYS, common.seed.unwrap_or(20));
    if let Some(path) = &common.config {
        for file in config_files(path)? {
            let mut loaded = load_config(&file).map_err(|e| {
                anyhow!(ConfigError {
                    message: format!("{}: {e}", file.display()),
                    ..e
                })
            })?;
            loaded.apply(&common.overrides());
            let threads = eqvi::par::threads_from_env();
            rows.push(qvi_equivalence(&loaded.name, &loaded.instance, &loaded.probe, threads)?.row);
        }
    }
    let passed = rows.iter().all(|r| r.passed);
    write_json(
        &common.out_file("oracle_check.json"),
        &json!({"passed": passed, "rows": rows}),
    )?;
    let mut lines = format_table(&rows);
    lines.push(format!(
        "{} of {} checks passed",
        rows.iter().filter(|r| r.passed).count(),
        rows.len()
    ));
    Ok(Outcome::new(
        if passed { EXIT_OK } else { EXIT_NOT_CONVERGED },
        lines,
    ))
}
