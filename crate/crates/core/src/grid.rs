//! Uniform grids on the unit interval.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// `n` equispaced nodes on `[0, 1]`, spacing `h = 1/(n-1)`.
///
/// Nodes are computed as `i / (n-1)` so the endpoints are exactly `0` and `1`
/// regardless of how `h` rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UniformGrid<T: Real> {
    n: usize,
    _marker: std::marker::PhantomData<T>,
}

/// Builds a grid with `n >= 2` nodes.
pub fn make_uniform_grid<T: Real>(n: usize) -> Result<UniformGrid<T>> {
    if n < 2 {
        return Err(Error::invalid(format!("grid needs at least 2 nodes, got {n}")));
    }
    Ok(UniformGrid {
        n,
        _marker: std::marker::PhantomData,
    })
}

impl<T: Real> UniformGrid<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Node spacing `1/(n-1)`.
    pub fn h(&self) -> T {
        T::one() / T::from_usize(self.n - 1).unwrap()
    }

    /// Node `i/(n-1)`; exact at both endpoints.
    pub fn node(&self, i: usize) -> T {
        debug_assert!(i < self.n);
        T::from_usize(i).unwrap() / T::from_usize(self.n - 1).unwrap()
    }

    pub fn nodes(&self) -> Vec<T> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    /// Index of the cell containing `x`, clamped to `[0, n-2]`.
    pub(crate) fn cell_of(&self, x: T) -> usize {
        let nm1 = T::from_usize(self.n - 1).unwrap();
        let raw = (x * nm1).floor().to_usize().unwrap_or(0);
        raw.min(self.n - 2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate() {
        assert!(make_uniform_grid::<f64>(0).is_err());
        assert!(make_uniform_grid::<f64>(1).is_err());
        assert!(make_uniform_grid::<f64>(2).is_ok());
    }

    #[test]
    fn endpoints_exact() {
        for n in [2usize, 3, 7, 101, 400, 401] {
            let g = make_uniform_grid::<f64>(n).unwrap();
            assert_eq!(g.node(0), 0.0);
            assert_eq!(g.node(n - 1), 1.0);
            let drift = (g.h() * (n as f64 - 1.0) - 1.0).abs();
            assert!(drift <= f64::EPSILON, "h*(n-1) off by {drift:e} at n={n}");
        }
    }

    #[test]
    fn nodes_monotone_and_spaced() {
        let g = make_uniform_grid::<f64>(11).unwrap();
        let xs = g.nodes();
        for w in xs.windows(2) {
            assert!((w[1] - w[0] - g.h()).abs() < 1e-15);
        }
    }

    #[test]
    fn works_in_single_precision() {
        let g = make_uniform_grid::<f32>(101).unwrap();
        assert_eq!(g.node(100), 1.0f32);
    }
}
