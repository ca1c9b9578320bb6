//! Uniform space-time grid on `(a, b) x (0, T)`.

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};

/// Boundary treatment of the spatial grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryMode {
    /// Homogeneous Dirichlet: only the `nx` interior nodes are unknowns.
    ZeroDirichlet,
    /// Boundary nodes are unknowns too (`nx + 2` nodes per row).
    Free,
}

/// Uniform grid with `nx` interior nodes and `nt` implicit time steps.
///
/// Unknowns live at times `t_n = n dt`, `n = 1..=nt`; the initial row is
/// the fixed zero state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub nx: usize,
    pub nt: usize,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub a: f64,
    pub b: f64,
    pub boundary: BoundaryMode,
}

impl Grid {
    pub fn new(
        nx: usize,
        nt: usize,
        t_final: f64,
        a: f64,
        b: f64,
        boundary: BoundaryMode,
    ) -> Result<Self> {
        let g = Grid {
            nx,
            nt,
            t_final,
            a,
            b,
            boundary,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        contract(self.nx >= 1, || {
            format!("nx must be at least 1, got {}", self.nx)
        })?;
        contract(self.nt >= 1, || {
            format!("nt must be at least 1, got {}", self.nt)
        })?;
        contract(self.t_final.is_finite() && self.t_final > 0.0, || {
            format!("T must be positive, got {}", self.t_final)
        })?;
        contract(
            self.a.is_finite() && self.b.is_finite() && self.b > self.a,
            || format!("need b > a, got a = {}, b = {}", self.a, self.b),
        )
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.nt as f64
    }

    pub fn dx(&self) -> f64 {
        (self.b - self.a) / (self.nx + 1) as f64
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    /// Unknown nodes per time row.
    pub fn nodes(&self) -> usize {
        match self.boundary {
            BoundaryMode::ZeroDirichlet => self.nx,
            BoundaryMode::Free => self.nx + 2,
        }
    }

    /// Forward-difference edges per row (always `nx + 1`).
    pub fn edges(&self) -> usize {
        self.nx + 1
    }

    /// Position index (0 = `a`, `nx + 1` = `b`) of unknown node `i`.
    pub fn position(&self, i: usize) -> usize {
        match self.boundary {
            BoundaryMode::ZeroDirichlet => i + 1,
            BoundaryMode::Free => i,
        }
    }

    pub fn x(&self, i: usize) -> f64 {
        self.a + self.position(i) as f64 * self.dx()
    }

    pub fn t(&self, n: usize) -> f64 {
        (n + 1) as f64 * self.dt()
    }

    /// Quadrature weight of node `i` (dual-cell rule in free mode).
    pub fn node_weight(&self, i: usize) -> f64 {
        let dx = self.dx();
        match self.boundary {
            BoundaryMode::ZeroDirichlet => dx,
            BoundaryMode::Free if i == 0 || i == self.nx + 1 => 0.5 * dx,
            BoundaryMode::Free => dx,
        }
    }

    pub fn node_weights(&self) -> Vec<f64> {
        (0..self.nodes()).map(|i| self.node_weight(i)).collect()
    }

    /// Total node weight of one row.
    pub fn spatial_measure(&self) -> f64 {
        self.node_weights().iter().sum()
    }
}
