//! Numerical machinery for coupled boundary value systems of the form
//!
//! ```text
//! -(phi(t, v, |u'|^{p-1}) |u'|^{p-2} u')' = f(t, u, v),   u(0) = u(1) = 0,
//! -(|v'|^{q-2} v')'                       = g(t, u, v),
//!  v(0) = ∫ h0(v) dA0,   v(1) = ∫ h1(v) dA1,
//! ```
//!
//! solved by gluing a regularized monotone-operator solve for the first
//! equation to a fixed-point iteration for the second.
//!
//! Module map:
//!
//! * [`grid`]: uniform P1 grids, norms, quadrature, bounded-variation
//!   integrators, the Volterra operator and the Poincaré constant.
//! * [`expr`]: the small expression language used to configure the
//!   nonlinearities.
//! * [`engine`]: the finite-dimensional monotone/fixed-point engine.
//! * [`plaplace`]: the discrete perturbed p-Laplacian operator and its
//!   verifiers.
//! * [`nonlocal`]: the q-Laplacian with Stieltjes boundary conditions.
//! * [`coupled`]: problem specs, radius certification, the coupled solve and
//!   the problem registry.

pub mod checks;
pub mod coupled;
pub mod engine;
pub mod error;
pub mod expr;
pub mod grid;
pub mod linalg;
pub mod nonlocal;
pub mod par;
pub mod plaplace;

pub use error::{Error, Result};
