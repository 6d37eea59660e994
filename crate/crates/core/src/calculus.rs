//! Finite-difference jets, closedness residuals and line integration of one-forms.
//!
//! All stencils are second order: centered in the interior, one-sided at the
//! boundary. Derivatives of polynomials of degree two are exact per direction.

use crate::error::{Error, Result};
use crate::field::{OneForm2, ScalarField, VecField};
use crate::grid::{Dir, Grid};
use crate::scalar::Real;

/// Derivative order requested from [`diff`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    First,
    Second,
    /// `d/d(dir) d/d(other)`.
    Mixed(Dir),
}

/// Fields that carry `comps` values per node of a grid.
pub trait Sampled: Sized {
    type Scalar: Real;
    fn grid(&self) -> &Grid;
    fn comps(&self) -> usize;
    fn raw(&self) -> &[Self::Scalar];
    fn with_raw(&self, values: Vec<Self::Scalar>) -> Self;
}

impl<T: Real> Sampled for ScalarField<T> {
    type Scalar = T;
    fn grid(&self) -> &Grid {
        ScalarField::grid(self)
    }
    fn comps(&self) -> usize {
        1
    }
    fn raw(&self) -> &[T] {
        self.values()
    }
    fn with_raw(&self, values: Vec<T>) -> Self {
        ScalarField::from_raw(self.grid().clone(), values)
    }
}

impl<T: Real> Sampled for VecField<T> {
    type Scalar = T;
    fn grid(&self) -> &Grid {
        VecField::grid(self)
    }
    fn comps(&self) -> usize {
        self.dim()
    }
    fn raw(&self) -> &[T] {
        self.values()
    }
    fn with_raw(&self, values: Vec<T>) -> Self {
        VecField::from_raw(self.grid().clone(), self.dim(), values)
    }
}

/// Partial derivative of a sampled field.
pub fn diff<F: Sampled>(field: &F, dir: Dir, order: Order) -> Result<F> {
    let grid = field.grid();
    let out = match order {
        Order::First => diff_flat(grid, field.comps(), field.raw(), dir, false)?,
        Order::Second => diff_flat(grid, field.comps(), field.raw(), dir, true)?,
        Order::Mixed(other) => {
            let inner = diff_flat(grid, field.comps(), field.raw(), other, false)?;
            diff_flat(grid, field.comps(), &inner, dir, false)?
        }
    };
    Ok(field.with_raw(out))
}

/// Stencil weights of the first derivative at position `i` of a line of `n` nodes.
/// Returns (offset of first node, weights) with weights already divided by `h`.
pub fn first_stencil(i: usize, n: usize, h: f64) -> (usize, [f64; 3]) {
    let c = 0.5 / h;
    if i == 0 {
        (0, [-3.0 * c, 4.0 * c, -c])
    } else if i + 1 == n {
        (n - 3, [c, -4.0 * c, 3.0 * c])
    } else {
        (i - 1, [-c, 0.0, c])
    }
}

fn second_stencil(i: usize, n: usize, h: f64) -> (usize, [f64; 4], usize) {
    let c = 1.0 / (h * h);
    if i == 0 {
        (0, [2.0 * c, -5.0 * c, 4.0 * c, -c], 4)
    } else if i + 1 == n {
        (n - 4, [-c, 4.0 * c, -5.0 * c, 2.0 * c], 4)
    } else {
        (i - 1, [c, -2.0 * c, c, 0.0], 3)
    }
}

/// Differentiates a flat node-major array carrying `comps` values per node.
pub fn diff_flat<T: Real>(grid: &Grid, comps: usize, values: &[T], dir: Dir, second: bool) -> Result<Vec<T>> {
    let axis = grid.axis(dir)?;
    let n = axis.n;
    let h = axis.spacing();
    let stride = grid.stride(dir);
    let mut out = vec![T::zero(); values.len()];
    for idx in 0..grid.len() {
        let (i, j, k) = grid.ijk(idx);
        let pos = [i, j, k][dir.index()];
        let line0 = idx - pos * stride;
        let dst = &mut out[idx * comps..(idx + 1) * comps];
        if second {
            let (start, w, len) = second_stencil(pos, n, h);
            for (m, wm) in w.iter().take(len).enumerate() {
                let src = (line0 + (start + m) * stride) * comps;
                let wm = T::lit(*wm);
                for c in 0..comps {
                    dst[c] += wm * values[src + c];
                }
            }
        } else {
            let (start, w) = first_stencil(pos, n, h);
            for (m, wm) in w.iter().enumerate() {
                if *wm == 0.0 {
                    continue;
                }
                let src = (line0 + (start + m) * stride) * comps;
                let wm = T::lit(*wm);
                for c in 0..comps {
                    dst[c] += wm * values[src + c];
                }
            }
        }
    }
    Ok(out)
}

/// `d(comp_v)/du - d(comp_u)/dv` at every node.
pub fn exactness_residual<T: Real>(omega: &OneForm2<T>) -> ScalarField<T> {
    let dv_u = diff(&omega.comp_v, Dir::U, Order::First).expect("2-D grid");
    let du_v = diff(&omega.comp_u, Dir::V, Order::First).expect("2-D grid");
    dv_u.zip_map(&du_v, |a, b| a - b)
}

/// Default closedness gate: `50 h^2 (sup|omega| + 1)`.
pub fn closedness_tolerance<T: Real>(omega: &OneForm2<T>) -> T {
    let h = T::lit(omega.grid().h_max());
    T::lit(50.0) * h * h * (omega.sup_norm() + T::one())
}

/// Path order used by [`integrate_form`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathOrder {
    /// Along the u-line through the base, then along v-lines.
    UFirst,
    /// Along the v-line through the base, then along u-lines.
    VFirst,
}

/// Integrates a closed one-form from a base node; `Phi(base) = 0`.
///
/// Fails with [`Error::NonClosedForm`] when the exactness residual over
/// interior nodes exceeds `tol` (default [`closedness_tolerance`]). Boundary
/// nodes are left out of the gate: there the residual differentiates data
/// that was itself produced by one-sided stencils.
pub fn path_integrate<T: Real>(omega: &OneForm2<T>, base: (usize, usize), tol: Option<T>) -> Result<ScalarField<T>> {
    let residual = exactness_residual(omega).interior_sup();
    let gate = tol.unwrap_or_else(|| closedness_tolerance(omega));
    if residual > gate {
        return Err(Error::NonClosedForm { residual: residual.as_f64(), gate: gate.as_f64() });
    }
    integrate_form(omega, base, PathOrder::UFirst)
}

/// Trapezoid integration along the chosen path order without a closedness check.
pub fn integrate_form<T: Real>(omega: &OneForm2<T>, base: (usize, usize), order: PathOrder) -> Result<ScalarField<T>> {
    let grid = omega.grid().clone();
    let nu = grid.n(Dir::U);
    let nv = grid.n(Dir::V);
    if base.0 >= nu || base.1 >= nv {
        return Err(Error::Input(format!("base node {base:?} outside grid")));
    }
    let hu = T::lit(grid.spacing(Dir::U));
    let hv = T::lit(grid.spacing(Dir::V));
    let half = T::lit(0.5);
    let wu = omega.comp_u.values();
    let wv = omega.comp_v.values();
    let mut phi = vec![T::zero(); grid.len()];

    let march_u = |phi: &mut [T], j: usize| {
        for i in base.0 + 1..nu {
            let (a, b) = (grid.idx(i - 1, j, 0), grid.idx(i, j, 0));
            phi[b] = phi[a] + half * hu * (wu[a] + wu[b]);
        }
        for i in (0..base.0).rev() {
            let (a, b) = (grid.idx(i + 1, j, 0), grid.idx(i, j, 0));
            phi[b] = phi[a] - half * hu * (wu[a] + wu[b]);
        }
    };
    let march_v = |phi: &mut [T], i: usize| {
        for j in base.1 + 1..nv {
            let (a, b) = (grid.idx(i, j - 1, 0), grid.idx(i, j, 0));
            phi[b] = phi[a] + half * hv * (wv[a] + wv[b]);
        }
        for j in (0..base.1).rev() {
            let (a, b) = (grid.idx(i, j + 1, 0), grid.idx(i, j, 0));
            phi[b] = phi[a] - half * hv * (wv[a] + wv[b]);
        }
    };

    match order {
        PathOrder::UFirst => {
            march_u(&mut phi, base.1);
            for i in 0..nu {
                march_v(&mut phi, i);
            }
        }
        PathOrder::VFirst => {
            march_v(&mut phi, base.0);
            for j in 0..nv {
                // re-anchor each u-line at the base column
                let anchor = phi[grid.idx(base.0, j, 0)];
                let mut line = vec![T::zero(); grid.len()];
                line[grid.idx(base.0, j, 0)] = anchor;
                march_u(&mut line, j);
                for i in 0..nu {
                    phi[grid.idx(i, j, 0)] = line[grid.idx(i, j, 0)];
                }
            }
        }
    }
    Ok(ScalarField::from_raw(grid, phi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    fn unit() -> Grid {
        make_grid((0.0, 1.0), (0.0, 1.0), 11, 11).unwrap()
    }

    #[test]
    fn quadratic_exactness() {
        let g = unit();
        let f: ScalarField = ScalarField::sample(&g, |u, _, _| u * u);
        let d = diff(&f, Dir::U, Order::First).unwrap();
        for idx in 0..g.len() {
            let u = g.point(idx)[0];
            assert!((d.get(idx) - 2.0 * u).abs() < 1e-12);
        }
        let d2 = diff(&f, Dir::U, Order::Second).unwrap();
        assert!(d2.values().iter().all(|v| (v - 2.0).abs() < 1e-10));
    }

    #[test]
    fn bilinear_mixed_is_one() {
        let g = unit();
        let f: ScalarField = ScalarField::sample(&g, |u, v, _| u * v);
        let d = diff(&f, Dir::U, Order::Mixed(Dir::V)).unwrap();
        assert!(d.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn sine_derivative_converges_second_order() {
        let err = |n: usize| {
            let g = make_grid((0.0, 1.0), (0.0, 1.0), n, 5).unwrap();
            let f: ScalarField = ScalarField::sample(&g, |u, _, _| u.sin());
            let d = diff(&f, Dir::U, Order::First).unwrap();
            (0..g.len()).map(|i| (d.get(i) - g.point(i)[0].cos()).abs()).fold(0.0, f64::max)
        };
        let (e1, e2) = (err(65), err(129));
        assert!(e1 <= 1e-3);
        let ratio = e1 / e2;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn missing_direction_is_dimension_error() {
        let f: ScalarField = ScalarField::constant(&unit(), 1.0);
        assert!(matches!(diff(&f, Dir::S, Order::First), Err(Error::Dimension(_))));
    }

    #[test]
    fn exactness_of_standard_forms() {
        let g = unit();
        let form = |a: fn(f64, f64) -> f64, b: fn(f64, f64) -> f64| {
            OneForm2::<f64>::new(ScalarField::sample(&g, |u, v, _| a(u, v)), ScalarField::sample(&g, |u, v, _| b(u, v)))
                .unwrap()
        };
        let du = form(|_, _| 1.0, |_, _| 0.0);
        assert!(exactness_residual(&du).sup_norm() < 1e-12);
        let closed = form(|_, v| v, |u, _| u);
        assert!(exactness_residual(&closed).sup_norm() < 1e-12);
        let rot = form(|_, v| -v, |u, _| u);
        assert!(exactness_residual(&rot).values().iter().all(|r| (r - 2.0).abs() < 1e-12));
    }

    #[test]
    fn integrates_exact_forms() {
        let g = unit();
        let du = OneForm2::<f64>::new(ScalarField::constant(&g, 1.0), ScalarField::constant(&g, 0.0)).unwrap();
        let phi = path_integrate(&du, (0, 0), None).unwrap();
        for idx in 0..g.len() {
            assert!((phi.get(idx) - g.point(idx)[0]).abs() < 1e-12);
        }
        let d_uv = OneForm2::<f64>::new(ScalarField::sample(&g, |_, v, _| v), ScalarField::sample(&g, |u, _, _| u)).unwrap();
        let phi = path_integrate(&d_uv, (0, 0), None).unwrap();
        for idx in 0..g.len() {
            let [u, v, _] = g.point(idx);
            assert!((phi.get(idx) - u * v).abs() < 1e-12);
        }
        let rot = OneForm2::<f64>::new(ScalarField::sample(&g, |_, v, _| v), ScalarField::sample(&g, |u, _, _| -u)).unwrap();
        assert!(matches!(path_integrate(&rot, (0, 0), None), Err(Error::NonClosedForm { .. })));
    }

    #[test]
    fn interior_base_integration() {
        let g = unit();
        let d_uv = OneForm2::<f64>::new(ScalarField::sample(&g, |_, v, _| v), ScalarField::sample(&g, |u, _, _| u)).unwrap();
        let phi = path_integrate(&d_uv, (5, 3), None).unwrap();
        let (u0, v0) = (0.5, 0.3);
        for idx in 0..g.len() {
            let [u, v, _] = g.point(idx);
            assert!((phi.get(idx) - (u * v - u0 * v0)).abs() < 1e-12);
        }
    }

    #[test]
    fn generic_over_f32() {
        let g = unit();
        let f: ScalarField<f32> = ScalarField::sample(&g, |u, v, _| u * v);
        let d = diff(&f, Dir::U, Order::Mixed(Dir::V)).unwrap();
        assert!(d.values().iter().all(|v| (v - 1.0).abs() < 1e-4));
    }
}
