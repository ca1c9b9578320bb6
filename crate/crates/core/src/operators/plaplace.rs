//! Weak-form p-Laplacian `F(e, u)`.

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::field::Field;
use crate::grid::{BoundaryMode, Grid};
use crate::space::{phi, row_gradient};

/// Coefficient `e` of the p-Laplacian and its admissible floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PLaplacianParams {
    pub e: f64,
    #[serde(default = "default_e_min")]
    pub e_min: f64,
}

fn default_e_min() -> f64 {
    1e-3
}

impl PLaplacianParams {
    pub fn validate(&self) -> Result<()> {
        contract(
            self.e_min > 0.0 && self.e >= self.e_min && self.e.is_finite(),
            || {
                format!(
                    "need e >= e_min > 0, got e = {}, e_min = {}",
                    self.e, self.e_min
                )
            },
        )
    }
}

/// Density of `F(e, u)`: `<F(u), v> = e sum dt dx |Du|^(p-2) Du Dv`, plus
/// `e sum dt w |u|^(p-2) u v` in free mode so that `<F(u), u> = e ||u||_X^p`.
pub fn apply_f(grid: &Grid, e: f64, p: f64, u: &Field) -> Field {
    let mut out = Field::zeros(u.nt(), u.cols());
    for n in 0..u.nt() {
        let row = u.row(n);
        let flux: Vec<f64> = row_gradient(grid, row).iter().map(|&d| phi(d, p)).collect();
        let dst = out.row_mut(n);
        for (i, v) in dst.iter_mut().enumerate() {
            let pos = grid.position(i);
            let mut s = 0.0;
            // edge k joins positions k and k + 1 (edges counted from a)
            let (left, right) = match grid.boundary {
                BoundaryMode::ZeroDirichlet => (Some(pos - 1), Some(pos)),
                BoundaryMode::Free => (pos.checked_sub(1), (pos < grid.nx + 1).then_some(pos)),
            };
            if let Some(k) = left {
                s += flux[k];
            }
            if let Some(k) = right {
                s -= flux[k];
            }
            let mut dens = s / grid.node_weight(i);
            if grid.boundary == BoundaryMode::Free {
                dens += phi(row[i], p);
            }
            *v = e * dens;
        }
    }
    out
}

/// Energy `(e/p) ||u||_X^p` whose gradient is [`apply_f`].
pub fn energy_f(grid: &Grid, e: f64, p: f64, u: &Field) -> f64 {
    e / p * crate::space::norm_x_pow(grid, u, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{norm_x_pow, pairing_x};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pairing_with_self_is_norm_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for mode in [BoundaryMode::ZeroDirichlet, BoundaryMode::Free] {
            let g = Grid::new(5, 3, 1.0, -1.0, 2.0, mode).unwrap();
            for p in [1.5, 2.0, 3.0] {
                let u = Field::from_fn(g.nt, g.nodes(), |_, _| rng.gen_range(-2.0..2.0));
                let lhs = pairing_x(&g, &apply_f(&g, 1.0, p, &u), &u);
                let rhs = norm_x_pow(&g, &u, p);
                assert!((lhs - rhs).abs() <= 1e-12 * rhs);
            }
        }
    }

    #[test]
    fn gradient_of_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = Grid::new(4, 2, 1.0, 0.0, 1.0, BoundaryMode::Free).unwrap();
        let p = 3.0;
        let u = Field::from_fn(g.nt, g.nodes(), |_, _| rng.gen_range(-1.0..1.0));
        let fu = apply_f(&g, 0.7, p, &u);
        let h = 1e-6;
        for n in 0..g.nt {
            for i in 0..g.nodes() {
                let mut up = u.clone();
                up.set(n, i, u.get(n, i) + h);
                let mut dn = u.clone();
                dn.set(n, i, u.get(n, i) - h);
                let fd = (energy_f(&g, 0.7, p, &up) - energy_f(&g, 0.7, p, &dn)) / (2.0 * h);
                let w = g.dt() * g.node_weight(i);
                assert!((fd - w * fu.get(n, i)).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn zero_maps_to_zero() {
        let g = Grid::new(3, 2, 1.0, 0.0, 1.0, BoundaryMode::ZeroDirichlet).unwrap();
        assert_eq!(
            apply_f(&g, 1.0, 1.5, &Field::zeros(2, 3)),
            Field::zeros(2, 3)
        );
    }
}
