//! Numerical laboratory for evolution multivalued quasi-variational
//! inequalities with feedback.
//!
//! The discrete problem: find `x` with `|x| <= r(x)` nodewise and a
//! selection `xi` of the Clarke feedback `G(gamma x)` such that
//! `L x + F(x) - E + gamma* xi` lies in the normal cone of the box, up to
//! the subdifferential of `Psi(x, .)`. The solver stack is the inner
//! time-marching Gauss-Seidel solve, the outer fixed-point loop with
//! epsilon continuation, a priori certificates, brute-force oracles and
//! a derivative-free control layer.

pub mod certificates;
pub mod control;
pub mod error;
pub mod field;
pub mod gamma;
pub mod grid;
pub mod inner;
pub mod instance;
pub mod operators;
pub mod oracle;
pub mod outer;
pub mod par;
pub mod scalar;
pub mod space;
pub mod suite;

pub use error::{EqviError, Result};
pub use field::Field;
pub use grid::{BoundaryMode, Grid};
pub use instance::QviInstance;
pub use space::NormParams;
