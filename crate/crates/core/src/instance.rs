//! Full problem description and derived constants.

use serde::{Deserialize, Serialize};

use crate::certificates::{
    check_smallness, compute_certificate, lift_growth, smallness_message, Certificate,
    CertificateInputs, HypothesisConstants,
};
use crate::error::{contract, EqviError, Result};
use crate::field::Field;
use crate::gamma::{apply_gamma, gamma_adjoint, gamma_norm, GammaMode, GammaNorm};
use crate::grid::Grid;
use crate::inner::InnerProblem;
use crate::operators::constraint::{constraint_radius, ConstraintMapSpec};
use crate::operators::friction::FrictionLaw;
use crate::operators::plaplace::PLaplacianParams;
use crate::operators::psi::PsiSpec;
use crate::space::{check_state, dual_norm_x, sup_embedding_constant, NormParams};

/// User-declared replacements for computed constants.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantOverrides {
    pub c_f: Option<f64>,
    pub d_f: Option<f64>,
    pub c_g: Option<f64>,
    pub d_g: Option<f64>,
    pub c_psi: Option<f64>,
    pub d_psi: Option<f64>,
    pub e_psi: Option<f64>,
    pub gamma_norm: Option<f64>,
    pub d0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QviInstance {
    pub grid: Grid,
    pub np: NormParams,
    pub f: PLaplacianParams,
    pub law: FrictionLaw,
    pub psi: Option<PsiSpec>,
    pub constraint: ConstraintMapSpec,
    /// Density of `E`.
    pub source: Field,
    pub gamma: GammaMode,
    pub overrides: ConstantOverrides,
}

impl QviInstance {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.f.validate()?;
        self.law.validate()?;
        self.constraint.validate()?;
        self.gamma.validate(&self.grid)?;
        check_state(&self.grid, &self.source)?;
        contract(self.source.is_finite(), || "source must be finite".into())?;
        if let Some(psi) = &self.psi {
            psi.validate(&self.grid, self.np.p())?;
        }
        Ok(())
    }

    pub fn zero_state(&self) -> Field {
        Field::zeros(self.grid.nt, self.grid.nodes())
    }

    pub fn zero_feedback(&self) -> Field {
        Field::zeros(self.grid.nt, self.gamma.cols(&self.grid))
    }

    pub fn gamma_norm(&self) -> Result<GammaNorm> {
        gamma_norm(&self.grid, self.np, &self.gamma)
    }

    pub fn radius(&self, z: &Field) -> f64 {
        constraint_radius(&self.grid, self.np, &self.constraint, z)
    }

    pub fn gamma(&self, x: &Field) -> Result<Field> {
        apply_gamma(&self.grid, &self.gamma, x)
    }

    /// Frozen problem for `(z, xi)`.
    pub fn inner_problem(&self, z: &Field, xi: &Field) -> Result<InnerProblem> {
        let load = self
            .source
            .sub(&gamma_adjoint(&self.grid, &self.gamma, xi)?);
        Ok(InnerProblem {
            grid: self.grid.clone(),
            np: self.np,
            e: self.f.e,
            psi: self.psi.clone(),
            radius: self.radius(z),
            z: z.clone(),
            load,
            feedback: None,
        })
    }

    /// Constants computed from the operators, then overridden where declared.
    pub fn constants(&self) -> Result<HypothesisConstants> {
        self.validate()?;
        let ov = &self.overrides;
        let gnorm = match ov.gamma_norm {
            Some(v) => v,
            None => self.gamma_norm()?.value,
        };
        let c_f = ov.c_f.unwrap_or(self.f.e);
        let (c_j, d_j, theta_g) = self.law.growth();
        let (c_g, d_g, e_j, lifted) = lift_growth(
            c_j,
            d_j,
            theta_g,
            self.np,
            self.gamma.y_measure(&self.grid),
            gnorm,
            c_f,
        )?;
        let d0 = ov
            .d0
            .unwrap_or(self.constraint.r0 / sup_embedding_constant(&self.grid, self.np));
        let (beta, c_psi, d_psi, e_psi) = match &self.psi {
            Some(s) => (s.beta, s.c_psi, s.d_psi, s.e_psi),
            None => (1.0, 0.0, 0.0, 0.0),
        };
        Ok(HypothesisConstants {
            p: self.np.p(),
            beta,
            eta: 1.0,
            c_f,
            d_f: ov.d_f.unwrap_or(0.0),
            c_g: ov.c_g.unwrap_or(c_g),
            d_g: ov.d_g.unwrap_or(d_g),
            c_psi: ov.c_psi.unwrap_or(c_psi),
            d_psi: ov.d_psi.unwrap_or(d_psi),
            e_psi: ov.e_psi.unwrap_or(e_psi),
            gamma_norm: gnorm,
            d0,
            c_j,
            d_j,
            theta_g,
            e_j,
            lifted,
        })
    }

    pub fn certificate_inputs(&self) -> Result<CertificateInputs> {
        let e_dual_norm = dual_norm_x(&self.grid, &self.source, self.np)?;
        let (psi_coeff, psi_exponent) = match &self.psi {
            None => (0.0, 0.0),
            Some(s) if s.beta == 1.0 => (s.b_psi(&self.grid, self.np, 0.0), 0.0),
            Some(s) => (s.b_psi(&self.grid, self.np, 1.0), s.beta - 1.0),
        };
        Ok(CertificateInputs {
            e_dual_norm,
            f_growth: self.f.e,
            psi_coeff,
            psi_exponent,
        })
    }

    /// Smallness verdict and, when it holds, the certificate.
    pub fn certify(&self) -> Result<(HypothesisConstants, Certificate)> {
        let hc = self.constants()?;
        let inputs = self.certificate_inputs()?;
        let cert = compute_certificate(&hc, &inputs)?;
        Ok((hc, cert))
    }

    /// Refusal error if the smallness condition fails.
    pub fn require_smallness(&self) -> Result<HypothesisConstants> {
        let hc = self.constants()?;
        if !check_smallness(&hc).0 {
            return Err(EqviError::Refused(smallness_message(&hc)));
        }
        Ok(hc)
    }
}
