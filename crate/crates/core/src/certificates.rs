//! A priori constant chain, smallness check, audits and numerical
//! validation of the structural hypotheses.

use serde::{Deserialize, Serialize};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{contract, EqviError, Result};
use crate::field::Field;
use crate::gamma::{dual_norm_y, norm_y};
use crate::grid::Grid;
use crate::instance::QviInstance;
use crate::operators::friction::{apply_g, clarke_subdiff};
use crate::operators::plaplace::apply_f;
use crate::operators::psi::psi_eval;
use crate::space::{apply_l, dual_norm_x, norm_x, pairing_x, sup_embedding_constant, NormParams};

/// All constants entering the certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisConstants {
    pub p: f64,
    pub beta: f64,
    pub eta: f64,
    pub c_f: f64,
    pub d_f: f64,
    pub c_g: f64,
    pub d_g: f64,
    pub c_psi: f64,
    pub d_psi: f64,
    pub e_psi: f64,
    pub gamma_norm: f64,
    pub d0: f64,
    pub c_j: f64,
    pub d_j: f64,
    pub theta_g: f64,
    /// Constant produced by the Young lift (0 when no lift was applied).
    pub e_j: f64,
    pub lifted: bool,
}

impl HypothesisConstants {
    pub fn validate(&self) -> Result<()> {
        contract(self.p > 1.0, || "p must exceed 1".into())?;
        contract(self.beta >= 1.0 && self.beta < self.p, || {
            format!("need 1 <= beta < p, got {}", self.beta)
        })?;
        contract(self.eta > 0.0 && self.eta < self.p, || {
            format!("need 0 < eta < p, got {}", self.eta)
        })?;
        contract(self.c_f > 0.0, || {
            format!("c_F must be positive, got {}", self.c_f)
        })?;
        contract(self.d0 > 0.0, || {
            format!("d0 must be positive, got {}", self.d0)
        })?;
        let rest = [
            self.d_f,
            self.c_g,
            self.d_g,
            self.c_psi,
            self.d_psi,
            self.e_psi,
            self.gamma_norm,
        ];
        contract(rest.iter().all(|v| *v >= 0.0 && v.is_finite()), || {
            "constants must be finite and nonnegative".into()
        })
    }
}

/// Norm-level growth `(c_G, d_G, e_J, lifted)` of the feedback from the
/// pointwise bound `|j'(s)| <= c_J |s|^theta_g + d_J` on a feedback domain
/// of measure `y_measure`. For `theta_g < p - 1` the sublinear part is
/// absorbed by Young's inequality into `c_F / (2 ||gamma||^p)`.
pub fn lift_growth(
    c_j: f64,
    d_j: f64,
    theta_g: f64,
    np: NormParams,
    y_measure: f64,
    gamma_norm: f64,
    c_f: f64,
) -> Result<(f64, f64, f64, bool)> {
    let p = np.p();
    let q = np.q();
    let d_base = d_j * y_measure.powf(1.0 / q);
    if c_j == 0.0 {
        return Ok((0.0, d_base, 0.0, false));
    }
    contract(theta_g > 0.0 && theta_g <= p - 1.0 + 1e-12, || {
        format!(
            "growth exponent theta_g = {theta_g} must lie in (0, p - 1 = {}]",
            p - 1.0
        )
    })?;
    if (theta_g - (p - 1.0)).abs() <= 1e-12 {
        return Ok((c_j, d_base, 0.0, false));
    }
    let c_prime = c_j * y_measure.powf(1.0 / q - theta_g / p);
    if gamma_norm == 0.0 {
        return Ok((c_prime, d_base + c_prime, c_prime, true));
    }
    let kappa = c_f / (2.0 * gamma_norm.powf(p));
    let r = theta_g / (p - 1.0);
    let u_star = (c_prime * r / kappa).powf(1.0 / (1.0 - r));
    let e_j = (1.0 - r) * c_prime * u_star.powf(r);
    Ok((kappa, d_base + e_j, e_j, true))
}

/// `(c_F - c_G ||gamma||^p > 0, margin)`.
pub fn check_smallness(hc: &HypothesisConstants) -> (bool, f64) {
    let margin = hc.c_f - hc.c_g * hc.gamma_norm.powf(hc.p);
    (margin > 0.0, margin)
}

/// `max_{s >= 0} c_Psi s^(beta-1) - (c_F - m0) s^(p-1)` and its maximizer.
pub fn compute_c3(hc: &HypothesisConstants, m0: f64) -> Result<(f64, f64)> {
    contract(hc.beta < hc.p, || {
        format!("beta = {} must be below p = {}", hc.beta, hc.p)
    })?;
    let k = hc.c_f - m0;
    contract(k > 0.0, || "smallness must hold before c3 is formed".into())?;
    if hc.c_psi == 0.0 {
        return Ok((0.0, 0.0));
    }
    if hc.beta == 1.0 {
        return Ok((hc.c_psi, 0.0));
    }
    let s = (hc.c_psi * (hc.beta - 1.0) / (k * (hc.p - 1.0))).powf(1.0 / (hc.p - hc.beta));
    Ok((hc.c_psi * s.powf(hc.beta - 1.0) - k * s.powf(hc.p - 1.0), s))
}

/// Problem data that enters the chain beyond the hypothesis constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateInputs {
    /// `||E||_{X*}`.
    pub e_dual_norm: f64,
    /// `sup_{||x|| <= r} ||F(x)||_{X*} = f_growth r^(p-1)`.
    pub f_growth: f64,
    /// `b_Psi` bound as `coeff * (c0 + d0)^exponent`.
    pub psi_coeff: f64,
    pub psi_exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub name: String,
    pub formula: String,
    pub inputs: Vec<(String, f64)>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub smallness_ok: bool,
    pub margin: f64,
    pub m0: f64,
    pub m1: f64,
    pub m1_as_written: f64,
    pub c3: f64,
    pub s_star: f64,
    pub c4: f64,
    pub c4_as_written: f64,
    pub c2: f64,
    pub c0: f64,
    pub l_psi: f64,
    pub f_sup: f64,
    pub c5: f64,
    pub d0: f64,
    pub gamma_norm: f64,
    pub trace: Vec<TraceEntry>,
}

fn entry(name: &str, formula: &str, inputs: &[(&str, f64)], value: f64) -> TraceEntry {
    TraceEntry {
        name: name.into(),
        formula: formula.into(),
        inputs: inputs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        value,
    }
}

/// Message naming the violated smallness inequality.
pub fn smallness_message(hc: &HypothesisConstants) -> String {
    let (_, margin) = check_smallness(hc);
    format!(
        "smallness condition c_F > c_G * ||gamma||^p violated: c_F = {:.6e}, c_G = {:.6e}, ||gamma|| = {:.6e}, p = {}, margin = {:.6e}",
        hc.c_f, hc.c_g, hc.gamma_norm, hc.p, margin
    )
}

pub fn compute_certificate(
    hc: &HypothesisConstants,
    inputs: &CertificateInputs,
) -> Result<Certificate> {
    hc.validate()?;
    let (ok, margin) = check_smallness(hc);
    if !ok {
        return Err(EqviError::Refused(smallness_message(hc)));
    }
    let p = hc.p;
    let g = hc.gamma_norm;
    let gp = g.powf(p);
    let gp1 = g.powf(p - 1.0);
    let mut trace = Vec::new();
    trace.push(entry(
        "margin",
        "c_F - c_G*|g|^p",
        &[("c_F", hc.c_f), ("c_G", hc.c_g), ("|g|", g)],
        margin,
    ));

    let m0 = 0.5 * (hc.c_f + hc.c_g * gp);
    trace.push(entry(
        "m0",
        "(c_F + c_G*|g|^p)/2",
        &[("c_F", hc.c_f), ("c_G", hc.c_g), ("|g|", g)],
        m0,
    ));
    let m1 = 0.5 * (hc.c_f - hc.c_g * gp);
    trace.push(entry(
        "m1",
        "(c_F - c_G*|g|^p)/2",
        &[("c_F", hc.c_f), ("c_G", hc.c_g), ("|g|", g)],
        m1,
    ));
    let m1_lit = 0.5 * (hc.c_f - hc.c_g);
    trace.push(entry(
        "m1_as_written",
        "(c_F - c_G)/2",
        &[("c_F", hc.c_f), ("c_G", hc.c_g)],
        m1_lit,
    ));

    let (c3, s_star) = compute_c3(hc, m0)?;
    trace.push(entry(
        "c3",
        "max_s c_Psi*s^(beta-1) - (c_F - m0)*s^(p-1), s* = (c_Psi(beta-1)/((c_F-m0)(p-1)))^(1/(p-beta))",
        &[("c_Psi", hc.c_psi), ("beta", hc.beta), ("p", p), ("c_F - m0", hc.c_f - m0), ("s*", s_star)],
        c3,
    ));

    let data = inputs.e_dual_norm + hc.d_f + hc.d_psi + hc.e_psi;
    let slack = hc.d_f + hc.d_psi + hc.e_psi;
    let c4 = (hc.c_g * gp1 * (data + c3) + m0 * hc.d_g) / m1;
    trace.push(entry(
        "c4",
        "(c_G*|g|^(p-1)*(|E| + d_F + d_Psi + e_Psi + c3) + m0*d_G)/m1",
        &[
            ("c_G", hc.c_g),
            ("|g|", g),
            ("|E|", inputs.e_dual_norm),
            ("c3", c3),
            ("m0", m0),
            ("d_G", hc.d_g),
            ("m1", m1),
        ],
        c4,
    ));
    let c4_lit = (hc.c_g * gp1 * data + c3 + m0 * hc.d_g) / m1_lit;
    trace.push(entry(
        "c4_as_written",
        "(c_G*|g|^(p-1)*(|E| + d_F + d_Psi + e_Psi) + c3 + m0*d_G)/m1_as_written",
        &[
            ("c_G", hc.c_g),
            ("|g|", g),
            ("c3", c3),
            ("m0", m0),
            ("d_G", hc.d_g),
            ("m1_as_written", m1_lit),
        ],
        c4_lit,
    ));
    let unit_ball = hc.c_g * gp1 + hc.d_g;
    let c2 = if slack > 0.0 { c4.max(unit_ball) } else { c4 };
    trace.push(entry(
        "c2",
        "c4, or max(c4, c_G*|g|^(p-1) + d_G) when d_F + d_Psi + e_Psi > 0",
        &[
            ("c4", c4),
            ("c_G*|g|^(p-1) + d_G", unit_ball),
            ("d_F + d_Psi + e_Psi", slack),
        ],
        c2,
    ));
    let base = ((data + g * c2 + c3) / m0).powf(1.0 / (p - 1.0));
    let c0 = if slack > 0.0 { base.max(1.0) } else { base };
    trace.push(entry(
        "c0",
        "((|E| + |g|*c2 + d_F + d_Psi + e_Psi + c3)/m0)^(1/(p-1)), at least 1 when d_F + d_Psi + e_Psi > 0",
        &[("|E|", inputs.e_dual_norm), ("|g|", g), ("c2", c2), ("c3", c3), ("m0", m0), ("p", p)],
        c0,
    ));
    let f_sup = inputs.f_growth * c0.powf(p - 1.0);
    trace.push(entry(
        "f_sup",
        "f_growth*c0^(p-1)",
        &[("f_growth", inputs.f_growth), ("c0", c0)],
        f_sup,
    ));
    let l_psi = inputs.psi_coeff * (c0 + hc.d0).powf(inputs.psi_exponent);
    trace.push(entry(
        "l_Psi",
        "b_coeff*(c0 + d0)^b_exponent",
        &[
            ("b_coeff", inputs.psi_coeff),
            ("b_exponent", inputs.psi_exponent),
            ("c0", c0),
            ("d0", hc.d0),
        ],
        l_psi,
    ));
    let c5 = (f_sup + inputs.e_dual_norm + g * c2 + l_psi) * (c0 + hc.d0) / hc.d0;
    trace.push(entry(
        "c5",
        "(f_sup + |E| + |g|*c2 + l_Psi)*(c0 + d0)/d0",
        &[
            ("f_sup", f_sup),
            ("|E|", inputs.e_dual_norm),
            ("|g|", g),
            ("c2", c2),
            ("l_Psi", l_psi),
            ("c0", c0),
            ("d0", hc.d0),
        ],
        c5,
    ));
    Ok(Certificate {
        smallness_ok: ok,
        margin,
        m0,
        m1,
        m1_as_written: m1_lit,
        c3,
        s_star,
        c4,
        c4_as_written: c4_lit,
        c2,
        c0,
        l_psi,
        f_sup,
        c5,
        d0: hc.d0,
        gamma_norm: g,
        trace,
    })
}

/// Result of checking a solution against the certificate ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub x_norm: f64,
    pub lx_dual_norm: f64,
    pub xi_dual_norm: f64,
    pub c0: f64,
    pub c5: f64,
    pub c2: f64,
    pub x_ok: bool,
    pub lx_ok: bool,
    pub xi_ok: bool,
    pub passed: bool,
}

pub const AUDIT_SLACK: f64 = 1e-6;

/// Checks `||x|| <= c0`, `||Lx||_* <= c5` and `||xi||_* <= c2` with relative slack.
pub fn audit_solution(
    grid: &Grid,
    np: NormParams,
    cert: &Certificate,
    x: &Field,
    xi_dual_norm: f64,
) -> Result<AuditReport> {
    let x_norm = norm_x(grid, x, np)?;
    let lx = dual_norm_x(grid, &apply_l(grid, x), np)?;
    let up = 1.0 + AUDIT_SLACK;
    let x_ok = x_norm <= cert.c0 * up;
    let lx_ok = lx <= cert.c5 * up;
    let xi_ok = xi_dual_norm <= cert.c2 * up;
    Ok(AuditReport {
        x_norm,
        lx_dual_norm: lx,
        xi_dual_norm,
        c0: cert.c0,
        c5: cert.c5,
        c2: cert.c2,
        x_ok,
        lx_ok,
        xi_ok,
        passed: x_ok && lx_ok && xi_ok,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TruncationMode {
    /// `r x / ||x||` outside the ball.
    #[default]
    Radial,
    /// `x / ||x||` outside the ball, as literally written.
    UnitSphere,
}

pub fn truncate(
    grid: &Grid,
    np: NormParams,
    f: &Field,
    r: f64,
    mode: TruncationMode,
) -> Result<Field> {
    contract(r > 0.0, || {
        format!("truncation radius must be positive, got {r}")
    })?;
    let n = norm_x(grid, f, np)?;
    if n <= r {
        return Ok(f.clone());
    }
    Ok(match mode {
        TruncationMode::Radial => f.scale(r / n),
        TruncationMode::UnitSphere => f.scale(1.0 / n),
    })
}

/// Worst relative margin of one hypothesis inequality over the samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub name: String,
    pub inequality: String,
    pub samples: usize,
    pub worst_margin: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub constants: HypothesisConstants,
    pub checks: Vec<HypothesisCheck>,
    pub passed: bool,
}

/// Margins at or above this (relative) count as satisfied.
pub const VALIDATION_TOL: f64 = -1e-10;

fn rel_margin(lhs: f64, rhs: f64) -> f64 {
    (lhs - rhs) / lhs.abs().max(rhs.abs()).max(1.0)
}

fn random_state(rng: &mut ChaCha8Rng, grid: &Grid) -> Field {
    let scale = 10f64.powf(rng.gen_range(-2.0..2.0));
    Field::from_fn(grid.nt, grid.nodes(), |_, _| {
        scale * rng.gen_range(-1.0..1.0)
    })
}

struct Tally {
    name: &'static str,
    inequality: &'static str,
    samples: usize,
    worst: f64,
}

impl Tally {
    fn new(name: &'static str, inequality: &'static str) -> Self {
        Tally {
            name,
            inequality,
            samples: 0,
            worst: f64::INFINITY,
        }
    }

    fn push(&mut self, margin: f64) {
        self.samples += 1;
        self.worst = self.worst.min(margin);
    }

    fn finish(self) -> HypothesisCheck {
        let worst = if self.samples == 0 { 0.0 } else { self.worst };
        HypothesisCheck {
            name: self.name.into(),
            inequality: self.inequality.into(),
            samples: self.samples,
            worst_margin: worst,
            passed: worst >= VALIDATION_TOL,
        }
    }
}

/// Randomized check of every quantitative hypothesis with the instance's
/// declared constants.
pub fn validate_hypotheses(
    inst: &QviInstance,
    n_samples: usize,
    seed: u64,
) -> Result<ValidationReport> {
    let hc = inst.constants()?;
    let grid = &inst.grid;
    let np = inst.np;
    let p = np.p();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coercive = Tally::new("H(F) coercivity", "<F(u), u> >= c_F ||u||^p - d_F");
    let mut growth = Tally::new(
        "H(G) growth",
        "||xi||_Y* <= c_G ||y||_Y^(p-1) + d_G for xi in G(y)",
    );
    let mut closed = Tally::new(
        "H(G) closed graph",
        "dist(G(s + h), G(s)) -> 0 along h -> 0",
    );
    let mut psi_lip = Tally::new(
        "H(Psi)(ii)",
        "Psi(v, y1) - Psi(v, y2) <= b_Psi ||y1 - y2||^eta",
    );
    let mut psi_low = Tally::new(
        "H(Psi)(iv) lower",
        "Psi(v, y) >= max(0, -c_Psi ||y||^beta - d_Psi)",
    );
    let mut psi_zero = Tally::new("H(Psi)(iv) zero", "|Psi(v, 0)| <= e_Psi");
    let mut ball = Tally::new("H(M) interior ball", "r(w) >= d0 * C_sup");
    let c_sup = sup_embedding_constant(grid, np);
    let kinks = inst.law.kink_points();
    for k in 0..n_samples {
        let u = random_state(&mut rng, grid);
        let nu = norm_x(grid, &u, np)?;
        let lhs = pairing_x(grid, &apply_f(grid, inst.f.e, p, &u), &u);
        coercive.push(rel_margin(lhs, hc.c_f * nu.powf(p) - hc.d_f));

        let y = inst.gamma(&u)?;
        let g = apply_g(grid, &inst.gamma, &inst.law, &y);
        let worst_sel = Field::from_fn(y.nt(), y.cols(), |n, j| {
            let iv = g.get(n, j);
            if iv.lo.abs() > iv.hi.abs() {
                iv.lo
            } else {
                iv.hi
            }
        });
        let lhs = dual_norm_y(grid, &inst.gamma, &worst_sel, np);
        let ny = norm_y(grid, &inst.gamma, &y, np);
        growth.push(rel_margin(hc.c_g * ny.powf(p - 1.0) + hc.d_g, lhs));

        let s = match kinks.get(k % (kinks.len() + 1)) {
            Some(&kp) => kp,
            None => rng.gen_range(-2.0..2.0),
        };
        let base = clarke_subdiff(&inst.law, s);
        // the excess over the limit set must shrink along the sequence
        let mut peak = 0.0f64;
        let mut last = 0.0;
        for m in 2..=12 {
            let h = 10f64.powi(-m) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let iv = clarke_subdiff(&inst.law, s + h);
            last = base.distance(iv.lo).max(base.distance(iv.hi));
            peak = peak.max(last);
        }
        closed.push((0.5 * peak + 1e-14 - last) / (1.0 + peak));

        if let Some(spec) = &inst.psi {
            let v = random_state(&mut rng, grid);
            let y1 = random_state(&mut rng, grid);
            let y2 = if rng.gen_bool(0.5) {
                y1.axpy(1e-3, &random_state(&mut rng, grid))
            } else {
                random_state(&mut rng, grid)
            };
            let n1 = norm_x(grid, &y1, np)?;
            let n2 = norm_x(grid, &y2, np)?;
            let diff = psi_eval(grid, spec, &v, &y1) - psi_eval(grid, spec, &v, &y2);
            let b = spec.b_psi(grid, np, n1 + n2);
            psi_lip.push(rel_margin(
                b * norm_x(grid, &y1.sub(&y2), np)?.powf(hc.eta),
                diff,
            ));
            let val = psi_eval(grid, spec, &v, &y1);
            psi_low.push(rel_margin(
                val,
                (-hc.c_psi * n1.powf(hc.beta) - hc.d_psi).max(0.0),
            ));
            psi_zero.push(rel_margin(
                hc.e_psi,
                psi_eval(grid, spec, &v, &inst.zero_state()).abs(),
            ));
        }

        let w = random_state(&mut rng, grid);
        ball.push(rel_margin(inst.radius(&w), hc.d0 * c_sup));
    }
    let mut checks = vec![coercive.finish(), growth.finish(), closed.finish()];
    if inst.psi.is_some() {
        checks.extend([psi_lip.finish(), psi_low.finish(), psi_zero.finish()]);
    }
    checks.push(ball.finish());
    let passed = checks.iter().all(|c| c.passed);
    Ok(ValidationReport {
        constants: hc,
        checks,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn hc(c_f: f64, c_g: f64, gamma: f64, p: f64) -> HypothesisConstants {
        HypothesisConstants {
            p,
            beta: 1.0,
            eta: 1.0,
            c_f,
            d_f: 0.0,
            c_g,
            d_g: 0.0,
            c_psi: 0.0,
            d_psi: 0.0,
            e_psi: 0.0,
            gamma_norm: gamma,
            d0: 0.5,
            c_j: c_g,
            d_j: 0.0,
            theta_g: p - 1.0,
            e_j: 0.0,
            lifted: false,
        }
    }

    #[test]
    fn smallness_examples() {
        assert_eq!(check_smallness(&hc(1.0, 0.5, 1.0, 2.0)), (true, 0.5));
        assert_eq!(check_smallness(&hc(1.0, 2.0, 1.0, 2.0)), (false, -1.0));
    }

    #[test]
    fn sublinear_growth_is_lifted() {
        let np = NormParams::new(3.0).unwrap();
        let (c_g, d_g, e_j, lifted) = lift_growth(5.0, 0.0, 1.0, np, 2.0, 1.3, 1.0).unwrap();
        assert!(lifted && e_j > 0.0 && d_g == e_j);
        let mut h = hc(1.0, c_g, 1.3, 3.0);
        h.d_g = d_g;
        let (ok, margin) = check_smallness(&h);
        assert!(ok && (margin - 0.5).abs() < 1e-14);
    }

    #[test]
    fn c3_cases() {
        let mut h = hc(1.0, 0.0, 1.0, 3.0);
        assert_eq!(compute_c3(&h, 0.5).unwrap().0, 0.0);
        h.c_psi = 0.7;
        assert_eq!(compute_c3(&h, 0.5).unwrap().0, 0.7);
        h.c_psi = 1.0;
        h.beta = 2.0;
        let (c3, s) = compute_c3(&h, 0.75).unwrap();
        assert!((s - 2.0).abs() < 1e-14 && (c3 - 1.0).abs() < 1e-14);
        h.beta = 3.0;
        assert!(compute_c3(&h, 0.75).is_err());
    }

    #[test]
    fn zero_data_degenerates() {
        let inputs = CertificateInputs {
            e_dual_norm: 0.0,
            f_growth: 1.0,
            psi_coeff: 0.0,
            psi_exponent: 0.0,
        };
        let cert = compute_certificate(&hc(1.0, 0.2, 1.0, 2.0), &inputs).unwrap();
        assert_eq!(cert.c0, 0.0);
        assert_eq!(cert.c2, 0.0);
        assert_eq!(cert.c5, 0.0);
    }

    #[test]
    fn refuses_without_smallness() {
        let inputs = CertificateInputs {
            e_dual_norm: 1.0,
            f_growth: 1.0,
            psi_coeff: 0.0,
            psi_exponent: 0.0,
        };
        let err = compute_certificate(&hc(1.0, 2.0, 1.0, 2.0), &inputs).unwrap_err();
        assert!(matches!(err, EqviError::Refused(m) if m.contains("c_F > c_G")));
    }

    #[test]
    fn larger_source_increases_bounds() {
        let h = hc(1.0, 0.2, 0.8, 2.0);
        let a = CertificateInputs {
            e_dual_norm: 1.0,
            f_growth: 1.0,
            psi_coeff: 0.1,
            psi_exponent: 0.0,
        };
        let b = CertificateInputs {
            e_dual_norm: 2.0,
            ..a
        };
        let ca = compute_certificate(&h, &a).unwrap();
        let cb = compute_certificate(&h, &b).unwrap();
        assert!(cb.c0 > ca.c0 && cb.c5 > ca.c5);
    }
}
