//! Numerical workbench for boundary-feedback control of 1-D PDE plants.
//!
//! The crate covers the full chain from kernel equations to closed-loop
//! verdicts:
//!
//! * [`grid`], [`field`], [`quad`], [`norm`], [`volterra`] — uniform grids on
//!   `[0, 1]`, nodal fields on the interval and on the triangle
//!   `0 <= xi <= x <= 1`, trapezoid quadrature, Sobolev-style norms, and
//!   Volterra transform machinery (apply / invert).
//! * [`kernel`] — solvers for the three kernel families: transport with
//!   recirculation ([`kernel::hyperbolic`]), reaction-diffusion with Dirichlet
//!   or Neumann actuation ([`kernel::parabolic`]), and the 2x2 counter-
//!   convecting system ([`kernel::coupled`]), each with its sup-norm bound.
//! * [`gain`] — approximation budgets (`epsilon_star`), perturbed-gain
//!   generators, a least-squares gain surrogate, and the boundary-perturbation
//!   field induced by a gain error.
//! * [`sim`] — closed-loop simulators for the three plants, decay-rate
//!   estimation, Lyapunov derivative checks, and the end-to-end
//!   [`sim::verify_theorem`] pipeline.
//!
//! All numerics are generic over the scalar type through [`scalar::Real`];
//! the aliases below fix `f64`, which is what the CLI and the test suite use.

pub mod error;
pub mod field;
pub mod gain;
pub mod grid;
pub mod kernel;
pub mod norm;
pub mod quad;
pub mod scalar;
pub mod sim;
pub mod volterra;

pub use error::{Error, Result};
pub use scalar::Real;

/// Default-precision uniform grid.
pub type Grid = grid::UniformGrid<f64>;
/// Default-precision nodal field on `[0, 1]`.
pub type Field = field::ScalarField1D<f64>;
/// Default-precision nodal field on the triangle `0 <= xi <= x <= 1`.
pub type TriField = field::TriangularField<f64>;
/// Default-precision norm selector.
pub type Norm = norm::NormKind<f64>;
