//! Built-in model operators: the p-Laplacian family, Clarke feedback laws,
//! the bifunction `Psi` and the solution-dependent box constraint.

pub mod constraint;
pub mod friction;
pub mod plaplace;
pub mod psi;

pub use constraint::{constraint_radius, project_m, Aggregator, ConstraintMapSpec};
pub use friction::{
    apply_g, clarke_dirderiv, clarke_subdiff, FrictionLaw, Interval, IntervalField, LawKind,
};
pub use plaplace::{apply_f, PLaplacianParams};
pub use psi::{psi_eval, psi_scalar_prox, PsiSpec, Theta};
