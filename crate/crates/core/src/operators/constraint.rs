//! Solution-dependent box constraint `M(z) = { |y| <= r(z) }`.

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::space::{norm_x_pow, NormParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregator {
    /// Mean of `|z|` over all nodes.
    MeanAbs,
    /// `||z||_X`; the radius cap clips it.
    ClippedNorm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintMapSpec {
    pub r0: f64,
    #[serde(default)]
    pub r1: f64,
    #[serde(default = "default_aggregator")]
    pub aggregator: Aggregator,
    pub r_max: f64,
}

fn default_aggregator() -> Aggregator {
    Aggregator::MeanAbs
}

impl ConstraintMapSpec {
    pub fn constant(r: f64) -> Self {
        ConstraintMapSpec {
            r0: r,
            r1: 0.0,
            aggregator: Aggregator::MeanAbs,
            r_max: r,
        }
    }

    pub fn validate(&self) -> Result<()> {
        contract(self.r0 > 0.0 && self.r0.is_finite(), || {
            format!("r0 must be positive, got {}", self.r0)
        })?;
        contract(self.r1 >= 0.0, || {
            format!("r1 must be nonnegative, got {}", self.r1)
        })?;
        contract(self.r_max >= self.r0 && self.r_max.is_finite(), || {
            format!(
                "r_max = {} must be finite and at least r0 = {}",
                self.r_max, self.r0
            )
        })
    }

    pub fn aggregate(&self, grid: &Grid, np: NormParams, z: &Field) -> f64 {
        match self.aggregator {
            Aggregator::MeanAbs => {
                let n = z.as_slice().len().max(1) as f64;
                z.as_slice().iter().map(|v| v.abs()).sum::<f64>() / n
            }
            Aggregator::ClippedNorm => norm_x_pow(grid, z, np.p())
                .powf(1.0 / np.p())
                .min(self.r_max),
        }
    }
}

pub fn constraint_radius(grid: &Grid, np: NormParams, spec: &ConstraintMapSpec, z: &Field) -> f64 {
    if spec.r1 == 0.0 {
        return spec.r0;
    }
    (spec.r0 + spec.r1 * spec.aggregate(grid, np, z)).min(spec.r_max)
}

/// Nodewise clipping to `[-r(z), r(z)]`.
pub fn project_m(
    grid: &Grid,
    np: NormParams,
    spec: &ConstraintMapSpec,
    z: &Field,
    f: &Field,
) -> Field {
    let r = constraint_radius(grid, np, spec, z);
    f.map(|v| v.clamp(-r, r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BoundaryMode;

    #[test]
    fn radius_and_projection() {
        let g = Grid::new(3, 2, 1.0, 0.0, 1.0, BoundaryMode::ZeroDirichlet).unwrap();
        let np = NormParams::new(2.0).unwrap();
        let spec = ConstraintMapSpec {
            r0: 0.5,
            r1: 1.0,
            aggregator: Aggregator::MeanAbs,
            r_max: 2.0,
        };
        let z = Field::zeros(2, 3);
        assert_eq!(constraint_radius(&g, np, &spec, &z), 0.5);
        let r = constraint_radius(&g, np, &spec, &Field::constant(2, 3, 1.0));
        assert_eq!(r, 1.5);
        let f = Field::constant(2, 3, 3.0);
        assert_eq!(
            project_m(&g, np, &spec, &Field::constant(2, 3, 1.0), &f),
            Field::constant(2, 3, 1.5)
        );
        let inside = Field::constant(2, 3, 0.1);
        assert_eq!(project_m(&g, np, &spec, &z, &inside), inside);
        assert_eq!(
            constraint_radius(&g, np, &spec, &Field::constant(2, 3, 10.0)),
            2.0
        );
    }
}
