//! Verification of a bending from its displacement field alone, and the
//! triviality fit `T = D f + w`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, Vector4};

use crate::calculus::{diff, Order};
use crate::error::{Error, Result};
use crate::field::{dot, VecField};
use crate::grid::Dir;
use crate::hypersurface::sample::induced_christoffels;
use crate::hypersurface::HypersurfaceSample;

use super::synth::{gate, lowered, BendingTensors};

const DIRS: [Dir; 3] = [Dir::U, Dir::V, Dir::S];

/// Residuals of a bending measured on finite differences of `T`.
#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub t_probe: f64,
    /// `max |<L_i, psi_j> + <psi_i, L_j>|` with `L_i = d_i T`.
    pub iif: f64,
    /// `max | |d_i (psi + t T)|^2 - |d_i psi|^2 - t^2 |d_i T|^2 |`.
    pub var: f64,
    /// `<Y, N>`.
    pub tau: Option<f64>,
    /// `<Y, psi_i> + <L d_i, N>`.
    pub theta: Option<f64>,
    /// `<L d_i, psi_j> + <L d_j, psi_i>` for the integrated `L`.
    pub beta: Option<f64>,
    /// `<(d_i L_j - L(nabla_i d_j)), N>` per node, lowered chart form.
    pub recovered_b: Vec<Matrix3<f64>>,
    pub recovered_b_sup: f64,
    /// `max |recovered B - B|` against the synthesized `B`.
    pub b_mismatch: Option<f64>,
    /// `max |d_i Y + L(A d_i) + f_* B d_i|`.
    pub y_equation: Option<f64>,
    pub gate: f64,
}

/// Names of the verification residuals.
pub const RESIDUAL_NAMES: [&str; 5] = ["iif", "var", "tau-theta-beta", "recovered-B", "Y-equation"];

impl VerifyReport {
    /// Named residuals present in this report.
    pub fn residuals(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        out.insert("iif".to_string(), self.iif);
        out.insert("var".to_string(), self.var);
        if let (Some(a), Some(b), Some(c)) = (self.tau, self.theta, self.beta) {
            out.insert("tau-theta-beta".to_string(), a.max(b).max(c));
        }
        out.insert("recovered-B".to_string(), self.b_mismatch.unwrap_or(self.recovered_b_sup));
        if let Some(y) = self.y_equation {
            out.insert("Y-equation".to_string(), y);
        }
        out
    }

    pub fn passed(&self) -> bool {
        self.residuals().values().all(|&r| r <= self.gate)
    }
}

fn sup_vec(f: &VecField) -> f64 {
    f.values().iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Verifies a displacement field `T` against the geometry of `hyp`; when the
/// synthesized tensors are given, also the normalization and the
/// `Y`-equation and the match of the recovered `B`.
pub fn verify_bending(hyp: &HypersurfaceSample, t: &VecField, t_probe: f64, tensors: Option<&BendingTensors>) -> Result<VerifyReport> {
    if t.grid() != &hyp.grid || t.dim() != hyp.psi.dim() {
        return Err(Error::Dimension("displacement field must live on the chart of the hypersurface".into()));
    }
    let grid = &hyp.grid;
    let lhat: Vec<VecField> = DIRS.iter().map(|&d| diff(t, d, Order::First)).collect::<Result<_>>()?;
    let psi_hat: Vec<VecField> = DIRS.iter().map(|&d| diff(&hyp.psi, d, Order::First)).collect::<Result<_>>()?;
    let moved = VecField::new(grid.clone(), t.dim(), hyp.psi.values().iter().zip(t.values()).map(|(p, x)| p + t_probe * x).collect())?;
    let moved_d: Vec<VecField> = DIRS.iter().map(|&d| diff(&moved, d, Order::First)).collect::<Result<_>>()?;
    // d_i L_j, symmetrized
    let mut ll: Vec<Vec<VecField>> = Vec::with_capacity(3);
    for i in 0..3 {
        let mut row = Vec::with_capacity(3);
        for j in 0..3 {
            let a = diff(&lhat[j], DIRS[i], Order::First)?;
            let b = diff(&lhat[i], DIRS[j], Order::First)?;
            let vals = a.values().iter().zip(b.values()).map(|(x, y)| 0.5 * (x + y)).collect();
            row.push(VecField::new(grid.clone(), t.dim(), vals)?);
        }
        ll.push(row);
    }
    let chr = induced_christoffels(hyp)?;
    let dy = match tensors {
        Some(bt) => Some(DIRS.iter().map(|&d| diff(&bt.y, d, Order::First)).collect::<Result<Vec<_>>>()?),
        None => None,
    };

    let (mut iif, mut var) = (0.0f64, 0.0f64);
    let (mut tau, mut theta, mut beta, mut ymax, mut bmis) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut rec = Vec::with_capacity(grid.len());
    let mut rec_sup = 0.0f64;
    let dim = t.dim();
    for idx in 0..grid.len() {
        let interior = grid.is_interior(idx);
        let nn = hyp.normal.node(idx);
        let mut bhat = Matrix3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                let mut v: Vec<f64> = ll[i][j].node(idx).to_vec();
                for k in 0..3 {
                    let g = chr[idx][k][i][j];
                    for (x, l) in v.iter_mut().zip(lhat[k].node(idx)) {
                        *x -= g * l;
                    }
                }
                bhat[(i, j)] = dot(&v, nn);
            }
        }
        if !hyp.regular[idx] {
            rec.push(bhat);
            continue;
        }
        for i in 0..3 {
            for j in 0..3 {
                let b = dot(lhat[i].node(idx), hyp.tangent(idx, j)) + dot(hyp.tangent(idx, i), lhat[j].node(idx));
                iif = iif.max(b.abs());
            }
            let (m, p, l) = (moved_d[i].node(idx), psi_hat[i].node(idx), lhat[i].node(idx));
            var = var.max((dot(m, m) - dot(p, p) - t_probe * t_probe * dot(l, l)).abs());
        }
        if interior {
            rec_sup = rec_sup.max(bhat.abs().max());
        }
        if let (Some(bt), Some(dy)) = (tensors, dy.as_ref()) {
            let y = bt.y.node(idx);
            tau = tau.max(dot(y, nn).abs());
            for i in 0..3 {
                theta = theta.max((dot(y, hyp.tangent(idx, i)) + dot(bt.l_cols[i].node(idx), nn)).abs());
                for j in 0..3 {
                    let b = dot(bt.l_cols[i].node(idx), hyp.tangent(idx, j)) + dot(bt.l_cols[j].node(idx), hyp.tangent(idx, i));
                    beta = beta.max(b.abs());
                }
            }
            if interior {
                let s = lowered(&hyp.metric[idx], &bt.b_chart[idx]);
                bmis = bmis.max((bhat - s).abs().max());
                let a = &hyp.a_chart[idx];
                let fb = &bt.b_chart[idx];
                for i in 0..3 {
                    let mut r: Vec<f64> = dy[i].node(idx).to_vec();
                    for k in 0..3 {
                        for c in 0..dim {
                            r[c] += a[(k, i)] * lhat[k].node(idx)[c] + fb[(k, i)] * hyp.tangent(idx, k)[c];
                        }
                    }
                    ymax = ymax.max(dot(&r, &r).sqrt());
                }
            }
        }
        rec.push(bhat);
    }
    let mut scale = lhat.iter().map(sup_vec).fold(0.0, f64::max);
    if let Some(bt) = tensors {
        scale += sup_vec(&bt.y) + bt.b_chart.iter().map(|m| m.abs().max()).fold(0.0, f64::max);
    }
    let has = tensors.is_some();
    Ok(VerifyReport {
        t_probe,
        iif,
        var,
        tau: has.then_some(tau),
        theta: has.then_some(theta),
        beta: has.then_some(beta),
        recovered_b: rec,
        recovered_b_sup: rec_sup,
        b_mismatch: has.then_some(bmis),
        y_equation: has.then_some(ymax),
        gate: gate(hyp.h(), scale),
    })
}

/// Least-squares fit of `T = D psi + w` with `D` skew.
#[derive(Debug, Clone)]
pub struct Triviality {
    pub is_trivial: bool,
    pub d: Matrix4<f64>,
    pub w: Vector4<f64>,
    /// `|T - D psi - w| / |T|` over all nodes (zero for `T = 0`).
    pub relative_residual: f64,
}

/// Relative fit residual at or below which a bending is trivial.
pub const TRIVIAL_TOL: f64 = 1e-6;

const SKEW: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

pub fn triviality_test(hyp: &HypersurfaceSample, t: &VecField) -> Result<Triviality> {
    if t.grid() != &hyp.grid || t.dim() != 4 || hyp.psi.dim() != 4 {
        return Err(Error::Dimension("triviality fit needs a displacement field in R^4 on the chart".into()));
    }
    let n = hyp.len();
    let mut a = DMatrix::zeros(4 * n, 10);
    let mut rhs = DVector::zeros(4 * n);
    for idx in 0..n {
        let p = hyp.psi.node(idx);
        let x = t.node(idx);
        for c in 0..4 {
            let r = 4 * idx + c;
            for (q, &(i, j)) in SKEW.iter().enumerate() {
                // (D psi)_c with D_ij = x_q, D_ji = -x_q
                if c == i {
                    a[(r, q)] = p[j];
                } else if c == j {
                    a[(r, q)] = -p[i];
                }
            }
            a[(r, 6 + c)] = 1.0;
            rhs[r] = x[c];
        }
    }
    let tn = rhs.norm();
    if tn == 0.0 {
        return Ok(Triviality { is_trivial: true, d: Matrix4::zeros(), w: Vector4::zeros(), relative_residual: 0.0 });
    }
    let svd = a.clone().svd(true, true);
    let tol = 1e-13 * svd.singular_values.max();
    let sol = svd.solve(&rhs, tol).map_err(|e| Error::Rank(e.to_string()))?;
    let rel = (&a * &sol - &rhs).norm() / tn;
    let mut d = Matrix4::zeros();
    for (q, &(i, j)) in SKEW.iter().enumerate() {
        d[(i, j)] = sol[q];
        d[(j, i)] = -sol[q];
    }
    let w = Vector4::new(sol[6], sol[7], sol[8], sol[9]);
    Ok(Triviality { is_trivial: rel <= TRIVIAL_TOL, d, w, relative_residual: rel })
}
