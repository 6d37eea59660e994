//! The pair `(g, gamma)`: a surface in the sphere with a support function,
//! its metric gradient and Hessian, and a frame of the normal bundle.

use nalgebra::{Matrix2, Vector2};

use crate::calculus::{diff, Order};
use crate::error::{Error, Result};
use crate::field::{dot, ScalarField, VecField};
use crate::grid::Dir;
use crate::pde::PhiFamily;
use crate::surface::{build_jet, enforce_sphere_identities, homogeneous_jet, orthonormalize, SurfaceJet};

/// Surface `g` in `S^n` with support function `gamma`.
#[derive(Debug, Clone)]
pub struct GaussPair {
    pub jet: SurfaceJet,
    pub gamma: ScalarField,
    pub gamma_u: ScalarField,
    pub gamma_v: ScalarField,
    pub gamma_uu: ScalarField,
    pub gamma_uv: ScalarField,
    pub gamma_vv: ScalarField,
    /// Orthonormal frame of the normal bundle of `g` in the sphere (`n - 2` fields).
    pub normal_frame: Vec<VecField>,
}

/// `g = phi/|phi|`, `gamma = phi_0/|phi|`.
pub fn pair_from_phi(family: &PhiFamily) -> Result<GaussPair> {
    let (jet, rad) = homogeneous_jet(&family.phi)?;
    let p0 = &family.phi0;
    let p0u = diff(p0, Dir::U, Order::First)?;
    let p0v = diff(p0, Dir::V, Order::First)?;
    let p0uu = diff(p0, Dir::U, Order::Second)?;
    let p0vv = diff(p0, Dir::V, Order::Second)?;
    let p0uv = diff(p0, Dir::V, Order::Mixed(Dir::U))?;
    let grid = p0.grid().clone();
    let n = grid.len();
    let mut out: Vec<Vec<f64>> = (0..6).map(|_| Vec::with_capacity(n)).collect();
    for i in 0..n {
        let r = rad.r.get(i);
        let ra = [rad.r_u.get(i), rad.r_v.get(i)];
        let rab = [[rad.r_uu.get(i), rad.r_uv.get(i)], [rad.r_uv.get(i), rad.r_vv.get(i)]];
        let d1 = [p0u.get(i), p0v.get(i)];
        let d2 = [[p0uu.get(i), p0uv.get(i)], [p0uv.get(i), p0vv.get(i)]];
        let g = p0.get(i) / r;
        let ga = [(d1[0] - g * ra[0]) / r, (d1[1] - g * ra[1]) / r];
        let gab = |a: usize, b: usize| (d2[a][b] - rab[a][b] * g - ra[a] * ga[b] - ra[b] * ga[a]) / r;
        for (slot, v) in [g, ga[0], ga[1], gab(0, 0), gab(0, 1), gab(1, 1)].into_iter().enumerate() {
            out[slot].push(v);
        }
    }
    let mut it = out.into_iter().map(|v| ScalarField::from_raw(grid.clone(), v));
    let mut next = || it.next().expect("six fields");
    let (gamma, gamma_u, gamma_v, gamma_uu, gamma_uv, gamma_vv) = (next(), next(), next(), next(), next(), next());
    let normal_frame = normal_frame(&jet)?;
    Ok(GaussPair { jet, gamma, gamma_u, gamma_v, gamma_uu, gamma_uv, gamma_vv, normal_frame })
}

/// Pair from sampled points of the sphere and a sampled support function.
pub fn pair_from_samples(h: &VecField, gamma: &ScalarField) -> Result<GaussPair> {
    if h.grid() != gamma.grid() {
        return Err(Error::Dimension("support function and surface on different grids".into()));
    }
    let mut jet = build_jet(h)?;
    enforce_sphere_identities(&mut jet)?;
    let normal_frame = normal_frame(&jet)?;
    Ok(GaussPair {
        gamma_u: diff(gamma, Dir::U, Order::First)?,
        gamma_v: diff(gamma, Dir::V, Order::First)?,
        gamma_uu: diff(gamma, Dir::U, Order::Second)?,
        gamma_uv: diff(gamma, Dir::V, Order::Mixed(Dir::U))?,
        gamma_vv: diff(gamma, Dir::V, Order::Second)?,
        gamma: gamma.clone(),
        jet,
        normal_frame,
    })
}

/// Generalized cross product of three vectors of R^4.
pub fn cross4(a: &[f64], b: &[f64], c: &[f64]) -> [f64; 4] {
    let m3 = |i: usize, j: usize, k: usize| {
        a[i] * (b[j] * c[k] - b[k] * c[j]) - a[j] * (b[i] * c[k] - b[k] * c[i]) + a[k] * (b[i] * c[j] - b[j] * c[i])
    };
    // cofactor expansion of det[a; b; c; e_l] along the last row
    [-m3(1, 2, 3), m3(0, 2, 3), -m3(0, 1, 3), m3(0, 1, 2)]
}

/// Orthonormal frame of the complement of `span{h, h_u, h_v}`.
///
/// In `R^4` the single normal is the oriented cross product, which keeps the
/// frame equivariant under rotations. In higher dimension the frame is
/// seeded by Gram-Schmidt at node 0 and carried along by projecting the
/// frame of the previous node (row-major order).
pub fn normal_frame(jet: &SurfaceJet) -> Result<Vec<VecField>> {
    let grid = jet.h.grid().clone();
    let dim = jet.ambient_dim();
    let count = dim - 3;
    let n = grid.len();
    let mut frames: Vec<Vec<Vec<f64>>> = Vec::with_capacity(n);
    for idx in 0..n {
        let span = orthonormalize(&[jet.h.node(idx), jet.h_u.node(idx), jet.h_v.node(idx)]);
        if span.len() < 3 {
            return Err(Error::FrameDegeneracy { node: idx });
        }
        let frame = if dim == 4 {
            let x = cross4(jet.h.node(idx), jet.h_u.node(idx), jet.h_v.node(idx));
            let r = dot(&x, &x).sqrt();
            vec![x.iter().map(|c| c / r).collect::<Vec<f64>>()]
        } else {
            let prev: Vec<Vec<f64>> = if idx == 0 {
                (0..dim).map(|l| (0..dim).map(|c| if c == l { 1.0 } else { 0.0 }).collect()).collect()
            } else {
                let (i, j, _) = grid.ijk(idx);
                let p = if i > 0 { grid.idx(i - 1, j, 0) } else { grid.idx(i, j - 1, 0) };
                frames[p].clone()
            };
            let mut refs: Vec<&[f64]> = span.iter().map(|v| v.as_slice()).collect();
            refs.extend(prev.iter().map(|v| v.as_slice()));
            let full = orthonormalize(&refs);
            if full.len() < 3 + count {
                return Err(Error::FrameDegeneracy { node: idx });
            }
            full[3..3 + count].to_vec()
        };
        frames.push(frame);
    }
    Ok((0..count)
        .map(|c| {
            let values = frames.iter().flat_map(|f| f[c].iter().copied()).collect();
            VecField::from_raw(grid.clone(), dim, values)
        })
        .collect())
}

impl GaussPair {
    pub fn len(&self) -> usize {
        self.gamma.values().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn metric(&self, idx: usize) -> Matrix2<f64> {
        let m = self.jet.metric(idx);
        Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1])
    }

    pub fn metric_inv(&self, idx: usize) -> Result<Matrix2<f64>> {
        self.metric(idx).try_inverse().ok_or(Error::NotImmersed { node: idx })
    }

    pub fn dgamma(&self, idx: usize) -> Vector2<f64> {
        Vector2::new(self.gamma_u.get(idx), self.gamma_v.get(idx))
    }

    /// Chart components `gamma^a` of the metric gradient.
    pub fn grad(&self, idx: usize) -> Result<Vector2<f64>> {
        Ok(self.metric_inv(idx)? * self.dgamma(idx))
    }

    /// Covariant Hessian `gamma_ab - Gamma^c_ab gamma_c`.
    pub fn hess_cov(&self, idx: usize) -> Result<Matrix2<f64>> {
        let c = self.jet.christoffel_at(idx)?;
        let d = self.dgamma(idx);
        let second = [[self.gamma_uu.get(idx), self.gamma_uv.get(idx)], [self.gamma_uv.get(idx), self.gamma_vv.get(idx)]];
        Ok(Matrix2::from_fn(|a, b| second[a][b] - c[0][a][b] * d[0] - c[1][a][b] * d[1]))
    }

    /// Hessian as an operator, `g^{-1} Hess`.
    pub fn hess_op(&self, idx: usize) -> Result<Matrix2<f64>> {
        Ok(self.metric_inv(idx)? * self.hess_cov(idx)?)
    }

    /// Shape operator of `g` along the unit normal `xi`, `g^{-1} [<h_ab, xi>]`.
    pub fn shape_op(&self, idx: usize, xi: &[f64]) -> Result<Matrix2<f64>> {
        let b = Matrix2::from_fn(|a, c| dot(self.jet.second(idx, a, c), xi));
        Ok(self.metric_inv(idx)? * b)
    }

    /// `P_w = gamma I + Hess gamma - A_w` at `w = s xi_0`.
    pub fn p_w(&self, idx: usize, s: f64) -> Result<Matrix2<f64>> {
        let xi = self.normal_frame[0].node(idx);
        Ok(Matrix2::identity() * self.gamma.get(idx) + self.hess_op(idx)? - self.shape_op(idx, xi)? * s)
    }

    /// Largest deviation of the normal frame from orthonormality and from
    /// orthogonality to `h, h_u, h_v`.
    pub fn frame_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for idx in 0..self.len() {
            for (a, fa) in self.normal_frame.iter().enumerate() {
                let x = fa.node(idx);
                for t in [self.jet.h.node(idx), self.jet.h_u.node(idx), self.jet.h_v.node(idx)] {
                    worst = worst.max(dot(x, t).abs() / dot(t, t).sqrt());
                }
                for (b, fb) in self.normal_frame.iter().enumerate() {
                    let want = if a == b { 1.0 } else { 0.0 };
                    worst = worst.max((dot(x, fb.node(idx)) - want).abs());
                }
            }
        }
        worst
    }
}
