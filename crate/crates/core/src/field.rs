//! Nodal fields on the interval and on the triangle `0 <= xi <= x <= 1`.

use crate::error::{Error, Result};
use crate::grid::UniformGrid;
use crate::scalar::Real;

/// Nodal values on a [`UniformGrid`], read between nodes by linear
/// interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField1D<T: Real> {
    grid: UniformGrid<T>,
    values: Vec<T>,
}

impl<T: Real> ScalarField1D<T> {
    pub fn new(grid: UniformGrid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::invalid(format!(
                "field has {} values for a grid of {} nodes",
                values.len(),
                grid.n()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("field values must be finite"));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: UniformGrid<T>, f: impl Fn(T) -> T) -> Result<Self> {
        let values = (0..grid.n()).map(|i| f(grid.node(i))).collect();
        Self::new(grid, values)
    }

    pub fn zeros(grid: UniformGrid<T>) -> Self {
        Self {
            grid,
            values: vec![T::zero(); grid.n()],
        }
    }

    pub fn constant(grid: UniformGrid<T>, value: T) -> Result<Self> {
        Self::new(grid, vec![value; grid.n()])
    }

    pub fn grid(&self) -> UniformGrid<T> {
        self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    /// Linear interpolation; `x` is clamped to `[0, 1]`.
    pub fn eval(&self, x: T) -> T {
        let x = x.max(T::zero()).min(T::one());
        let i = self.grid.cell_of(x);
        let xi = self.grid.node(i);
        let t = (x - xi) / self.grid.h();
        self.values[i] + t * (self.values[i + 1] - self.values[i])
    }

    pub fn sup_norm(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |acc, v| acc.max(v.abs()))
    }

    pub fn min_value(&self) -> T {
        self.values
            .iter()
            .fold(T::infinity(), |acc, v| acc.min(*v))
    }

    /// Nodewise `self + scale * other`.
    pub fn axpy(&self, scale: T, other: &Self) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::invalid("axpy on mismatched grids"));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| *a + scale * *b)
            .collect();
        Self::new(self.grid, values)
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| *v * s).collect(),
        }
    }
}

/// Nodal values on the triangle `T = { 0 <= xi <= x <= 1 }`.
///
/// Row `i` holds the nodes `(x_i, xi_j)` for `j <= i`, so the storage is the
/// lower triangle of an `n x n` array, flattened row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangularField<T: Real> {
    grid: UniformGrid<T>,
    values: Vec<T>,
}

impl<T: Real> TriangularField<T> {
    pub fn zeros(grid: UniformGrid<T>) -> Self {
        let n = grid.n();
        Self {
            grid,
            values: vec![T::zero(); n * (n + 1) / 2],
        }
    }

    pub fn from_fn(grid: UniformGrid<T>, f: impl Fn(T, T) -> T) -> Result<Self> {
        let mut out = Self::zeros(grid);
        for i in 0..grid.n() {
            for j in 0..=i {
                out.set(i, j, f(grid.node(i), grid.node(j)));
            }
        }
        if out.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("triangular field values must be finite"));
        }
        Ok(out)
    }

    pub fn grid(&self) -> UniformGrid<T> {
        self.grid
    }

    #[inline]
    fn idx(i: usize, j: usize) -> usize {
        debug_assert!(j <= i);
        i * (i + 1) / 2 + j
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize) -> T {
        self.values[Self::idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.values[Self::idx(i, j)] = v;
    }

    /// Row `i` as a slice over `j = 0..=i`.
    pub fn row(&self, i: usize) -> &[T] {
        &self.values[Self::idx(i, 0)..=Self::idx(i, i)]
    }

    pub fn sup_norm(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |acc, v| acc.max(v.abs()))
    }

    pub fn sup_diff(&self, other: &Self) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |acc, (a, b)| acc.max((*a - *b).abs()))
    }

    /// Diagonal trace `K(x, x)` as a 1-D field.
    pub fn diag_trace(&self) -> ScalarField1D<T> {
        let values = (0..self.grid.n()).map(|i| self.value(i, i)).collect();
        ScalarField1D {
            grid: self.grid,
            values,
        }
    }

    /// Bottom trace `K(x, 0)` as a 1-D field.
    pub fn bottom_trace(&self) -> ScalarField1D<T> {
        let values = (0..self.grid.n()).map(|i| self.value(i, 0)).collect();
        ScalarField1D {
            grid: self.grid,
            values,
        }
    }

    /// Top row `K(1, xi)`: the nodal values feeding boundary gains, taken
    /// directly from storage with no re-interpolation.
    pub fn top_trace(&self) -> ScalarField1D<T> {
        let n = self.grid.n();
        ScalarField1D {
            grid: self.grid,
            values: self.row(n - 1).to_vec(),
        }
    }

    /// Interpolated value at `(x, xi)` inside the triangle.
    ///
    /// Cells fully inside the triangle interpolate bilinearly; diagonal cells
    /// interpolate barycentrically on their three stored corners. Points are
    /// clamped onto the triangle first.
    pub fn eval(&self, x: T, xi: T) -> T {
        let x = x.max(T::zero()).min(T::one());
        let xi = xi.max(T::zero()).min(x);
        let n = self.grid.n();
        let h = self.grid.h();
        let mut i = self.grid.cell_of(x);
        let mut j = self.grid.cell_of(xi);
        if j > i {
            j = i;
        }
        if i >= n - 1 {
            i = n - 2;
        }
        let u = ((x - self.grid.node(i)) / h).max(T::zero()).min(T::one());
        let v = ((xi - self.grid.node(j)) / h).max(T::zero()).min(T::one());
        if j < i {
            let f00 = self.value(i, j);
            let f10 = self.value(i + 1, j);
            let f01 = self.value(i, j + 1);
            let f11 = self.value(i + 1, j + 1);
            let one = T::one();
            (one - u) * ((one - v) * f00 + v * f01) + u * ((one - v) * f10 + v * f11)
        } else {
            // diagonal cell: corners (i,j), (i+1,j), (i+1,j+1); v <= u inside
            let v = v.min(u);
            let f00 = self.value(i, j);
            let f10 = self.value(i + 1, j);
            let f11 = self.value(i + 1, j + 1);
            (T::one() - u) * f00 + (u - v) * f10 + v * f11
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_uniform_grid;

    #[test]
    fn rejects_wrong_len_and_nonfinite() {
        let g = make_uniform_grid::<f64>(5).unwrap();
        assert!(ScalarField1D::new(g, vec![0.0; 4]).is_err());
        assert!(ScalarField1D::new(g, vec![0.0, 1.0, f64::NAN, 0.0, 0.0]).is_err());
    }

    #[test]
    fn eval_reproduces_linear_functions() {
        let g = make_uniform_grid::<f64>(9).unwrap();
        let f = ScalarField1D::from_fn(g, |x| 3.0 * x - 0.5).unwrap();
        for &x in &[0.0, 0.127, 0.5, 0.93, 1.0] {
            assert!((f.eval(x) - (3.0 * x - 0.5)).abs() < 1e-14);
        }
    }

    #[test]
    fn triangular_traces_match_storage() {
        let g = make_uniform_grid::<f64>(6).unwrap();
        let k = TriangularField::from_fn(g, |x, xi| x * 10.0 + xi).unwrap();
        let n = g.n();
        let top = k.top_trace();
        for j in 0..n {
            assert_eq!(top.values()[j], k.value(n - 1, j));
        }
        let diag = k.diag_trace();
        for i in 0..n {
            assert_eq!(diag.values()[i], k.value(i, i));
        }
        let bottom = k.bottom_trace();
        for i in 0..n {
            assert_eq!(bottom.values()[i], k.value(i, 0));
        }
    }

    #[test]
    fn triangular_eval_reproduces_affine() {
        let g = make_uniform_grid::<f64>(21).unwrap();
        let k = TriangularField::from_fn(g, |x, xi| 2.0 * x - 3.0 * xi + 0.25).unwrap();
        for &(x, xi) in &[(0.3, 0.1), (0.77, 0.77), (1.0, 0.0), (0.5, 0.499), (0.62, 0.6)] {
            let want = 2.0 * x - 3.0 * xi + 0.25;
            assert!(
                (k.eval(x, xi) - want).abs() < 1e-12,
                "at ({x},{xi}): {} vs {want}",
                k.eval(x, xi)
            );
        }
    }
}
