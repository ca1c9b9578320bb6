//! Parameter identification: minimize `h(x, e, l, E)` over a box of
//! operator coefficients, law parameters and source-basis coefficients,
//! with the infimum over the solution set taken on probed clusters.

use std::collections::HashMap;
use std::sync::Mutex;

use argmin::core::{CostFunction, Error as ArgminError, Executor};
use argmin::solver::neldermead::NelderMead;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{contract, EqviError, Result};
use crate::field::Field;
use crate::instance::QviInstance;
use crate::outer::{probe_solution_set_with, solve_qvi, ProbeOptions};
use crate::space::{check_state, inner_l2};

/// Admissible boxes `Pi x Theta x Sigma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSpace {
    pub e_box: [f64; 2],
    pub l_box: Vec<[f64; 2]>,
    /// Source basis; empty keeps the base instance's source.
    pub e_basis: Vec<Field>,
    pub coeff_box: Vec<[f64; 2]>,
}

impl ControlSpace {
    pub fn validate(&self, base: &QviInstance) -> Result<()> {
        for b in self.boxes() {
            contract(b[0].is_finite() && b[1].is_finite() && b[0] <= b[1], || {
                format!("box [{}, {}] must be finite and nonempty", b[0], b[1])
            })?;
        }
        contract(self.e_box[0] >= base.f.e_min, || {
            format!(
                "e box starts at {} below e_min = {}",
                self.e_box[0], base.f.e_min
            )
        })?;
        contract(self.l_box.len() == base.law.params.len(), || {
            format!(
                "law takes {} parameters, l box has {}",
                base.law.params.len(),
                self.l_box.len()
            )
        })?;
        contract(self.coeff_box.len() == self.e_basis.len(), || {
            format!(
                "{} source basis fields but {} coefficient boxes",
                self.e_basis.len(),
                self.coeff_box.len()
            )
        })?;
        for f in &self.e_basis {
            check_state(&base.grid, f)?;
        }
        Ok(())
    }

    /// Boxes in the flat order `e, l.., coeffs..`.
    pub fn boxes(&self) -> Vec<[f64; 2]> {
        std::iter::once(self.e_box)
            .chain(self.l_box.iter().copied())
            .chain(self.coeff_box.iter().copied())
            .collect()
    }

    pub fn dim(&self) -> usize {
        1 + self.l_box.len() + self.coeff_box.len()
    }

    pub fn triple(&self, v: &[f64]) -> ControlTriple {
        let nl = self.l_box.len();
        ControlTriple {
            e: v[0],
            l: v[1..1 + nl].to_vec(),
            e_coeffs: v[1 + nl..].to_vec(),
        }
    }

    pub fn contains(&self, t: &ControlTriple) -> bool {
        let v = t.to_vec();
        v.len() == self.dim()
            && self
                .boxes()
                .iter()
                .zip(&v)
                .all(|(b, x)| *x >= b[0] && *x <= b[1])
    }
}

/// Misfit target and regularization `r = reg_weight (e^2 + |l|^2 + |c|^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    pub x_obs: Field,
    pub misfit_weight: f64,
    pub reg_weight: f64,
}

impl CostSpec {
    pub fn validate(&self, base: &QviInstance) -> Result<()> {
        check_state(&base.grid, &self.x_obs)?;
        contract(
            self.misfit_weight >= 0.0 && self.misfit_weight.is_finite(),
            || "misfit weight must be nonnegative".into(),
        )?;
        contract(self.reg_weight > 0.0 && self.reg_weight.is_finite(), || {
            "regularization weight must be positive".into()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlTriple {
    pub e: f64,
    pub l: Vec<f64>,
    pub e_coeffs: Vec<f64>,
}

impl ControlTriple {
    pub fn to_vec(&self) -> Vec<f64> {
        std::iter::once(self.e)
            .chain(self.l.iter().copied())
            .chain(self.e_coeffs.iter().copied())
            .collect()
    }

    pub fn regularization(&self, reg_weight: f64) -> f64 {
        reg_weight * self.to_vec().iter().map(|v| v * v).sum::<f64>()
    }

    fn key(&self) -> Vec<u64> {
        self.to_vec().iter().map(|v| v.to_bits()).collect()
    }
}

/// Everything an evaluation needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlProblem {
    pub base: QviInstance,
    pub space: ControlSpace,
    pub cost: CostSpec,
    pub probe: ProbeOptions,
    /// Skip candidates whose regularization alone exceeds the best cost.
    pub prune: bool,
}

impl ControlProblem {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        self.space.validate(&self.base)?;
        self.cost.validate(&self.base)
    }

    /// Instance induced by a triple.
    pub fn instance(&self, t: &ControlTriple) -> QviInstance {
        let mut inst = self.base.clone();
        inst.f.e = t.e;
        inst.law = inst.law.with_params(&t.l);
        if !self.space.e_basis.is_empty() {
            let mut src = inst.zero_state();
            for (c, b) in t.e_coeffs.iter().zip(&self.space.e_basis) {
                src = src.axpy(*c, b);
            }
            inst.source = src;
        }
        inst
    }
}

/// Probed cost of one triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostEval {
    /// `+inf` when no converged, audited solution was found.
    pub cost: f64,
    pub misfit: f64,
    pub regularization: f64,
    pub converged: bool,
    pub clusters: usize,
    #[serde(skip)]
    pub x: Option<Field>,
    pub note: Option<String>,
}

/// `C(e, l, E) = min over probed clusters of h`.
pub fn eval_cost(prob: &ControlProblem, t: &ControlTriple) -> Result<CostEval> {
    contract(prob.space.contains(t), || {
        format!("triple {:?} outside the control boxes", t.to_vec())
    })?;
    let reg = t.regularization(prob.cost.reg_weight);
    let inst = prob.instance(t);
    let infinite = |note: String| CostEval {
        cost: f64::INFINITY,
        misfit: f64::INFINITY,
        regularization: reg,
        converged: false,
        clusters: 0,
        x: None,
        note: Some(note),
    };
    let res = match probe_solution_set_with(&inst, &prob.probe, 0) {
        Ok(r) => r,
        Err(EqviError::Refused(m)) => return Ok(infinite(format!("smallness: {m}"))),
        Err(EqviError::Contract(m)) => return Err(EqviError::Contract(m)),
        Err(e) => return Ok(infinite(e.to_string())),
    };
    let mut best: Option<(f64, &Field)> = None;
    for c in &res.clusters {
        if c.representative.audit.as_ref().is_some_and(|a| !a.passed) {
            continue;
        }
        let d = c.x.sub(&prob.cost.x_obs);
        let m = prob.cost.misfit_weight * inner_l2(&inst.grid, &d, &d);
        if best.is_none_or(|(bm, _)| m < bm) {
            best = Some((m, &c.x));
        }
    }
    Ok(match best {
        Some((m, x)) => CostEval {
            cost: m + reg,
            misfit: m,
            regularization: reg,
            converged: true,
            clusters: res.clusters.len(),
            x: Some(x.clone()),
            note: None,
        },
        None => infinite(format!(
            "no converged audited solution in {} runs",
            res.runs
        )),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Search {
    Grid {
        resolution: usize,
    },
    NelderMead {
        restarts: usize,
        max_iters: usize,
        seed: u64,
    },
    Random {
        n: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub index: usize,
    pub triple: ControlTriple,
    /// `None` when pruned by the regularization bound.
    pub eval: Option<CostEval>,
    pub pruned: bool,
}

impl HistoryEntry {
    pub fn cost(&self) -> f64 {
        self.eval.as_ref().map_or(f64::INFINITY, |e| e.cost)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlResult {
    pub best: ControlTriple,
    pub best_cost: f64,
    #[serde(skip)]
    pub best_x: Option<Field>,
    pub history: Vec<HistoryEntry>,
    pub evaluations: usize,
    pub pruned: usize,
}

/// Candidates evaluated between pruning updates; fixed so that results do
/// not depend on the worker count.
const BATCH: usize = 16;

type Cache = HashMap<Vec<u64>, CostEval>;

fn evaluate_all(
    prob: &ControlProblem,
    points: &[ControlTriple],
    cache: &mut Cache,
) -> Result<Vec<HistoryEntry>> {
    let regs: Vec<f64> = points
        .iter()
        .map(|t| t.regularization(prob.cost.reg_weight))
        .collect();
    let mut order: Vec<usize> = (0..points.len()).collect();
    if prob.prune {
        order.sort_by(|&a, &b| regs[a].total_cmp(&regs[b]).then(a.cmp(&b)));
    }
    let mut evals: Vec<Option<CostEval>> = vec![None; points.len()];
    let mut pruned = vec![false; points.len()];
    let mut best = cache.values().fold(f64::INFINITY, |m, e| m.min(e.cost));
    for chunk in order.chunks(BATCH) {
        let mut todo = Vec::new();
        for &i in chunk {
            if let Some(e) = cache.get(&points[i].key()) {
                evals[i] = Some(e.clone());
            } else if prob.prune && regs[i] > best {
                pruned[i] = true;
            } else {
                todo.push(i);
            }
        }
        let out = crate::par::map(&todo, |&i| eval_cost(prob, &points[i]));
        for (&i, r) in todo.iter().zip(out) {
            let e = r?;
            cache.insert(points[i].key(), e.clone());
            evals[i] = Some(e);
        }
        for &i in chunk {
            if let Some(e) = &evals[i] {
                best = best.min(e.cost);
            }
        }
    }
    Ok(points
        .iter()
        .enumerate()
        .map(|(i, t)| HistoryEntry {
            index: i,
            triple: t.clone(),
            eval: evals[i].take(),
            pruned: pruned[i],
        })
        .collect())
}

fn finish(history: Vec<HistoryEntry>) -> Result<ControlResult> {
    let mut best: Option<&HistoryEntry> = None;
    for h in &history {
        if h.cost().is_finite() && best.is_none_or(|b| h.cost() < b.cost()) {
            best = Some(h);
        }
    }
    let b = best.ok_or_else(|| {
        EqviError::Infeasible(format!(
            "all {} evaluated control candidates have infinite cost",
            history.len()
        ))
    })?;
    let (best, best_cost, best_x) = (
        b.triple.clone(),
        b.cost(),
        b.eval.as_ref().and_then(|e| e.x.clone()),
    );
    Ok(ControlResult {
        best,
        best_cost,
        best_x,
        evaluations: history.iter().filter(|h| h.eval.is_some()).count(),
        pruned: history.iter().filter(|h| h.pruned).count(),
        history,
    })
}

/// `k`-th of `res` evenly spaced points of `[lo, hi]`; nested resolutions
/// `2^j + 1` reproduce the coarse points bit for bit.
fn grid_coord(b: [f64; 2], k: usize, res: usize) -> f64 {
    if res == 1 || b[0] == b[1] {
        return if res == 1 { 0.5 * (b[0] + b[1]) } else { b[0] };
    }
    if k == res - 1 {
        return b[1];
    }
    b[0] + (b[1] - b[0]) * (k as f64 / (res - 1) as f64)
}

pub fn grid_points(space: &ControlSpace, res: usize) -> Vec<ControlTriple> {
    let boxes = space.boxes();
    let sizes: Vec<usize> = boxes
        .iter()
        .map(|b| if b[0] == b[1] { 1 } else { res })
        .collect();
    let total: usize = sizes.iter().product();
    (0..total)
        .map(|mut idx| {
            let mut v = vec![0.0; boxes.len()];
            for d in (0..boxes.len()).rev() {
                let k = idx % sizes[d];
                idx /= sizes[d];
                v[d] = if sizes[d] == 1 {
                    boxes[d][0]
                } else {
                    grid_coord(boxes[d], k, res)
                };
            }
            space.triple(&v)
        })
        .collect()
}

fn random_point(space: &ControlSpace, rng: &mut ChaCha8Rng) -> Vec<f64> {
    space
        .boxes()
        .iter()
        .map(|b| {
            if b[0] == b[1] {
                b[0]
            } else {
                rng.gen_range(b[0]..=b[1])
            }
        })
        .collect()
}

/// Nelder-Mead in unit coordinates of the non-degenerate dimensions.
struct Scaled<'a> {
    prob: &'a ControlProblem,
    boxes: Vec<[f64; 2]>,
    free: Vec<usize>,
    log: Mutex<(Vec<ControlTriple>, Cache)>,
}

impl Scaled<'_> {
    fn point(&self, u: &[f64]) -> Vec<f64> {
        let mut v: Vec<f64> = self.boxes.iter().map(|b| b[0]).collect();
        for (&d, &ui) in self.free.iter().zip(u) {
            let b = self.boxes[d];
            v[d] = b[0] + (b[1] - b[0]) * ui.clamp(0.0, 1.0);
        }
        v
    }
}

impl CostFunction for &Scaled<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, u: &Self::Param) -> std::result::Result<f64, ArgminError> {
        let t = self.prob.space.triple(&self.point(u));
        let mut log = self.log.lock().expect("cost log");
        let e = match log.1.get(&t.key()) {
            Some(e) => e.clone(),
            None => {
                let e = eval_cost(self.prob, &t).map_err(|e| ArgminError::msg(e.to_string()))?;
                log.1.insert(t.key(), e.clone());
                e
            }
        };
        log.0.push(t);
        // outside the unit box the cost grows with the distance to it
        let excess: f64 = u.iter().map(|x| (x - x.clamp(0.0, 1.0)).powi(2)).sum();
        Ok(if e.cost.is_finite() {
            e.cost + excess
        } else {
            f64::MAX / 4.0
        })
    }
}

fn nelder_mead(
    prob: &ControlProblem,
    restarts: usize,
    max_iters: usize,
    seed: u64,
) -> Result<Vec<HistoryEntry>> {
    let boxes = prob.space.boxes();
    let free: Vec<usize> = (0..boxes.len())
        .filter(|&d| boxes[d][0] < boxes[d][1])
        .collect();
    let problem = Scaled {
        prob,
        boxes,
        free: free.clone(),
        log: Mutex::new((Vec::new(), Cache::new())),
    };
    if free.is_empty() {
        (&problem)
            .cost(&vec![])
            .map_err(|e| EqviError::Numerical(e.to_string()))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for r in 0..restarts.max(1) {
        if free.is_empty() {
            break;
        }
        let start: Vec<f64> = if r == 0 {
            vec![0.5; free.len()]
        } else {
            (0..free.len()).map(|_| rng.gen_range(0.0..1.0)).collect()
        };
        let mut simplex = vec![start.clone()];
        for d in 0..free.len() {
            let mut v = start.clone();
            v[d] = if v[d] + 0.25 <= 1.0 {
                v[d] + 0.25
            } else {
                v[d] - 0.25
            };
            simplex.push(v);
        }
        let solver = NelderMead::new(simplex)
            .with_sd_tolerance(1e-10)
            .map_err(|e| EqviError::Contract(e.to_string()))?;
        Executor::new(&problem, solver)
            .configure(|s| s.max_iters(max_iters as u64))
            .run()
            .map_err(|e| EqviError::Numerical(e.to_string()))?;
    }
    let (points, cache) = problem.log.into_inner().expect("cost log");
    Ok(points
        .into_iter()
        .enumerate()
        .map(|(i, t)| {
            let eval = cache.get(&t.key()).cloned();
            HistoryEntry {
                index: i,
                triple: t,
                eval,
                pruned: false,
            }
        })
        .collect())
}

/// Minimizes the probed cost; grid is the deterministic reference search.
pub fn solve_control(prob: &ControlProblem, search: &Search) -> Result<ControlResult> {
    prob.validate()?;
    let history = match *search {
        Search::Grid { resolution } => {
            contract(resolution >= 1, || {
                "grid resolution must be positive".into()
            })?;
            evaluate_all(
                prob,
                &grid_points(&prob.space, resolution),
                &mut Cache::new(),
            )?
        }
        Search::Random { n, seed } => {
            contract(n >= 1, || "random search needs at least one sample".into())?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<ControlTriple> = (0..n)
                .map(|_| prob.space.triple(&random_point(&prob.space, &mut rng)))
                .collect();
            evaluate_all(prob, &pts, &mut Cache::new())?
        }
        Search::NelderMead {
            restarts,
            max_iters,
            seed,
        } => nelder_mead(prob, restarts, max_iters, seed)?,
    };
    finish(history)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementRow {
    pub resolution: usize,
    pub best_cost: f64,
    pub best: ControlTriple,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementTable {
    pub rows: Vec<RefinementRow>,
    /// Best costs non-increasing up to `1e-9`.
    pub monotone: bool,
}

/// Grid search over increasing resolutions, sharing evaluations.
pub fn refinement_study(prob: &ControlProblem, resolutions: &[usize]) -> Result<RefinementTable> {
    prob.validate()?;
    contract(
        !resolutions.is_empty() && resolutions.windows(2).all(|w| w[0] < w[1]),
        || "resolutions must be strictly increasing".into(),
    )?;
    let mut cache = Cache::new();
    let mut rows = Vec::new();
    for &res in resolutions {
        contract(res >= 1, || "grid resolution must be positive".into())?;
        let r = finish(evaluate_all(
            prob,
            &grid_points(&prob.space, res),
            &mut cache,
        )?)?;
        rows.push(RefinementRow {
            resolution: res,
            best_cost: r.best_cost,
            best: r.best,
            evaluations: r.evaluations,
        });
    }
    let monotone = rows.windows(2).all(|w| w[1].best_cost <= w[0].best_cost);
    Ok(RefinementTable { rows, monotone })
}

/// Samples a truth strictly inside the boxes, forward-solves it and sets
/// `x_obs = x_true + noise_level * N(0, 1)` nodewise.
pub fn plant_instance(
    prob: &ControlProblem,
    seed: u64,
    noise_level: f64,
) -> Result<(CostSpec, ControlTriple)> {
    prob.base.validate()?;
    prob.space.validate(&prob.base)?;
    contract(noise_level >= 0.0, || {
        "noise level must be nonnegative".into()
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last = String::new();
    for _ in 0..10 {
        let v: Vec<f64> = prob
            .space
            .boxes()
            .iter()
            .map(|b| b[0] + (b[1] - b[0]) * rng.gen_range(0.15..0.85))
            .collect();
        let truth = prob.space.triple(&v);
        let inst = prob.instance(&truth);
        match solve_qvi(&inst, &prob.probe.outer, &inst.zero_state()) {
            Ok(sol) if sol.converged => {
                let x_obs = Field::from_fn(sol.x.nt(), sol.x.cols(), |n, i| {
                    sol.x.get(n, i) + noise_level * rng.sample::<f64, _>(StandardNormal)
                });
                let cost = CostSpec {
                    x_obs,
                    ..prob.cost.clone()
                };
                return Ok((cost, truth));
            }
            Ok(sol) => last = sol.warnings.join("; "),
            Err(e) => last = e.to_string(),
        }
    }
    Err(EqviError::Numerical(format!(
        "no planted truth converged in 10 tries: {last}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_grids_share_points() {
        let b = [0.3, 1.7];
        for k in 0..3 {
            assert_eq!(
                grid_coord(b, k, 3).to_bits(),
                grid_coord(b, 2 * k, 5).to_bits()
            );
            assert_eq!(
                grid_coord(b, 2 * k, 5).to_bits(),
                grid_coord(b, 4 * k, 9).to_bits()
            );
        }
        assert_eq!(grid_coord(b, 8, 9), 1.7);
    }
}
