//! Scalar abstraction for the numerical kernels.

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar the whole crate is generic over.
///
/// `f32` and `f64` both qualify. Solver tolerances quoted in the operation
/// docs are `f64` figures; [`solver_tol`] widens them when the scalar cannot
/// resolve them.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + std::fmt::Debug + std::fmt::Display + Send + Sync + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` literal into the working scalar.
#[inline]
pub fn real<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal must be representable in the working scalar")
}

/// Iteration tolerance: the nominal figure, floored at 100 machine epsilons
/// so single precision can still converge.
#[inline]
pub fn solver_tol<T: Real>(nominal: f64) -> T {
    let floor = T::epsilon() * real::<T>(100.0);
    real::<T>(nominal).max(floor)
}
