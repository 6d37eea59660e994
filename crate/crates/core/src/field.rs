//! Sampled scalar, vector and one-form fields on uniform grids.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::scalar::Real;

/// One real value per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField<T = f64> {
    grid: Grid,
    values: Vec<T>,
}

/// One vector of `dim` components per grid node, stored node-major.
#[derive(Debug, Clone, PartialEq)]
pub struct VecField<T = f64> {
    grid: Grid,
    dim: usize,
    values: Vec<T>,
}

/// A one-form `comp_u du + comp_v dv` on a 2-D grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OneForm2<T = f64> {
    pub comp_u: ScalarField<T>,
    pub comp_v: ScalarField<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn new(grid: Grid, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("non-finite field value".into()));
        }
        Ok(ScalarField { grid, values })
    }

    /// Builds a field without the finiteness check; used by internal kernels.
    pub(crate) fn from_raw(grid: Grid, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        ScalarField { grid, values }
    }

    pub fn sample(grid: &Grid, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|idx| {
                let [u, v, s] = grid.point(idx);
                T::lit(f(u, v, s))
            })
            .collect();
        ScalarField { grid: grid.clone(), values }
    }

    pub fn constant(grid: &Grid, c: T) -> Self {
        ScalarField { grid: grid.clone(), values: vec![c; grid.len()] }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> T {
        self.values[self.grid.idx(i, j, k)]
    }

    #[inline]
    pub fn get(&self, idx: usize) -> T {
        self.values[idx]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        ScalarField { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        ScalarField { grid: self.grid.clone(), values }
    }

    pub fn sup_norm(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Sup norm over nodes interior in every direction.
    pub fn interior_sup(&self) -> T {
        self.values
            .iter()
            .enumerate()
            .filter(|(i, _)| self.grid.is_interior(*i))
            .fold(T::zero(), |m, (_, v)| m.max(v.abs()))
    }

    /// Sup norm over nodes at least `margin` nodes from every face.
    pub fn sup_inside(&self, margin: usize) -> T {
        self.values
            .iter()
            .enumerate()
            .filter(|(i, _)| self.grid.is_inside(*i, margin))
            .fold(T::zero(), |m, (_, v)| m.max(v.abs()))
    }

    pub fn cast<U: Real>(&self) -> ScalarField<U> {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

impl<T: Real> VecField<T> {
    pub fn new(grid: Grid, dim: usize, values: Vec<T>) -> Result<Self> {
        if dim == 0 || values.len() != grid.len() * dim {
            return Err(Error::Dimension(format!(
                "{} values for {} nodes of dimension {dim}",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("non-finite field value".into()));
        }
        Ok(VecField { grid, dim, values })
    }

    pub(crate) fn from_raw(grid: Grid, dim: usize, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), grid.len() * dim);
        VecField { grid, dim, values }
    }

    pub fn zeros(grid: &Grid, dim: usize) -> Self {
        VecField { grid: grid.clone(), dim, values: vec![T::zero(); grid.len() * dim] }
    }

    pub fn sample(grid: &Grid, dim: usize, f: impl Fn(f64, f64, f64) -> Vec<f64>) -> Self {
        let mut values = Vec::with_capacity(grid.len() * dim);
        for idx in 0..grid.len() {
            let [u, v, s] = grid.point(idx);
            let x = f(u, v, s);
            assert_eq!(x.len(), dim, "sampler returned wrong dimension");
            values.extend(x.into_iter().map(T::lit));
        }
        VecField { grid: grid.clone(), dim, values }
    }

    /// Stacks scalar components into a vector field.
    pub fn from_components(comps: &[ScalarField<T>]) -> Result<Self> {
        let first = comps.first().ok_or_else(|| Error::Dimension("no components".into()))?;
        let grid = first.grid.clone();
        if comps.iter().any(|c| c.grid != grid) {
            return Err(Error::Dimension("components on different grids".into()));
        }
        let dim = comps.len();
        let mut values = Vec::with_capacity(grid.len() * dim);
        for idx in 0..grid.len() {
            values.extend(comps.iter().map(|c| c.values[idx]));
        }
        Ok(VecField { grid, dim, values })
    }

    pub fn component(&self, c: usize) -> ScalarField<T> {
        let values = self.values.iter().skip(c).step_by(self.dim).copied().collect();
        ScalarField { grid: self.grid.clone(), values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    #[inline]
    pub fn node(&self, idx: usize) -> &[T] {
        &self.values[idx * self.dim..(idx + 1) * self.dim]
    }

    #[inline]
    pub fn node_mut(&mut self, idx: usize) -> &mut [T] {
        &mut self.values[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn norms(&self) -> ScalarField<T> {
        let values = self
            .values
            .chunks(self.dim)
            .map(|x| x.iter().map(|&a| a * a).sum::<T>().sqrt())
            .collect();
        ScalarField { grid: self.grid.clone(), values }
    }

    pub fn sup_norm(&self) -> T {
        self.norms().sup_norm()
    }

    pub fn scale(&self, c: T) -> Self {
        VecField { grid: self.grid.clone(), dim: self.dim, values: self.values.iter().map(|&v| v * c).collect() }
    }
}

impl<T: Real> OneForm2<T> {
    pub fn new(comp_u: ScalarField<T>, comp_v: ScalarField<T>) -> Result<Self> {
        if comp_u.grid != comp_v.grid {
            return Err(Error::Dimension("one-form components on different grids".into()));
        }
        if comp_u.grid.dim() != 2 {
            return Err(Error::Dimension("one-forms live on 2-D grids".into()));
        }
        Ok(OneForm2 { comp_u, comp_v })
    }

    pub fn grid(&self) -> &Grid {
        self.comp_u.grid()
    }

    pub fn sup_norm(&self) -> T {
        self.comp_u.sup_norm().max(self.comp_v.sup_norm())
    }
}

/// Euclidean inner product of two node vectors.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
