//! Sampled hypersurfaces on `(u, v, s)` charts and their second-order geometry.

use std::collections::BTreeMap;

use nalgebra::{Matrix2, Matrix3, SymmetricEigen, Vector3};

use crate::calculus::{diff, Order};
use crate::error::{Error, Result};
use crate::field::{dot, VecField};
use crate::grid::{Axis, Dir, Grid};

use super::pair::{cross4, GaussPair};

/// Relative singular-value threshold of the rank count.
pub const EPS_RANK: f64 = 1e-6;

/// Consistency measurements of a Gauss parametrization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussChecks {
    /// `max |<N, psi_i>|` over nodes and chart directions.
    pub normal_orthogonality: f64,
    /// `max min |n -+ N|` for the unit normal of finite-difference tangents.
    pub normal_match: f64,
    /// `max |A_bar + P_w^{-1}|_F` over regular nodes, quotient basis.
    pub shape_cross_check: f64,
    pub regular_count: usize,
}

/// A hypersurface of `R^4` sampled on a 3-D chart.
#[derive(Debug, Clone)]
pub struct HypersurfaceSample {
    pub grid: Grid,
    pub psi: VecField,
    pub psi_u: VecField,
    pub psi_v: VecField,
    pub psi_s: VecField,
    pub normal: VecField,
    /// Shape operator in the chart frame; column `i` is `A d_i`.
    pub a_chart: Vec<Matrix3<f64>>,
    pub metric: Vec<Matrix3<f64>>,
    /// Chart vector spanning the relative nullity, unit length in the induced metric.
    pub nullity: Vec<Vector3<f64>>,
    pub pw: Option<Vec<Matrix2<f64>>>,
    pub regular: Vec<bool>,
    /// Gauss data the sample was built from, if any.
    pub pair: Option<GaussPair>,
    pub checks: Option<GaussChecks>,
}

/// Names of the Gauss-parametrization checks.
pub const GAUSS_CHECK_NAMES: [&str; 3] = ["normal-orthogonality", "normal-match", "shape-cross-check"];

/// Absolute bound on `<N, psi_i>`.
pub const ORTHOGONALITY_TOL: f64 = 1e-8;

impl GaussChecks {
    /// `(value, gate)` per check at spacing `h`.
    pub fn residuals(&self, h: f64) -> BTreeMap<String, (f64, f64)> {
        let gate = 100.0 * h * h;
        let vals = [
            (self.normal_orthogonality, ORTHOGONALITY_TOL),
            (self.normal_match, gate),
            (self.shape_cross_check, gate),
        ];
        GAUSS_CHECK_NAMES.iter().zip(vals).map(|(n, v)| (n.to_string(), v)).collect()
    }
}

impl HypersurfaceSample {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn h(&self) -> f64 {
        self.grid.h_max()
    }

    /// Tangent `psi_i` at a node.
    pub fn tangent(&self, idx: usize, i: usize) -> &[f64] {
        match i {
            0 => self.psi_u.node(idx),
            1 => self.psi_v.node(idx),
            _ => self.psi_s.node(idx),
        }
    }

    /// `f_* x` for a chart vector `x`.
    pub fn push(&self, idx: usize, x: &Vector3<f64>) -> Vec<f64> {
        let mut out = vec![0.0; self.psi.dim()];
        for i in 0..3 {
            for (o, t) in out.iter_mut().zip(self.tangent(idx, i)) {
                *o += x[i] * t;
            }
        }
        out
    }

    /// Largest relative asymmetry of `G A`.
    pub fn self_adjoint_residual(&self) -> f64 {
        (0..self.len())
            .filter(|&i| self.regular[i])
            .map(|i| {
                let ga = self.metric[i] * self.a_chart[i];
                (ga - ga.transpose()).norm() / (1.0 + ga.norm())
            })
            .fold(0.0, f64::max)
    }

    /// Index of the node on the 2-D base grid below a chart node.
    pub fn base_index(&self, idx: usize) -> usize {
        idx % (self.grid.n(Dir::U) * self.grid.n(Dir::V))
    }
}

fn tangents_fd(psi: &VecField) -> Result<[VecField; 3]> {
    Ok([diff(psi, Dir::U, Order::First)?, diff(psi, Dir::V, Order::First)?, diff(psi, Dir::S, Order::First)?])
}

/// Metric, Weingarten shape operator and nullity from tangents and Gauss map.
#[allow(clippy::type_complexity)]
fn second_order(
    tangents: &[&VecField; 3],
    normal: &VecField,
    usable: &[bool],
) -> Result<(Vec<Matrix3<f64>>, Vec<Matrix3<f64>>, Vec<Vector3<f64>>)> {
    let dn = tangents_fd(normal)?;
    let n = normal.grid().len();
    let mut metric = Vec::with_capacity(n);
    let mut shape = Vec::with_capacity(n);
    let mut nullity = Vec::with_capacity(n);
    for idx in 0..n {
        let g = Matrix3::from_fn(|i, j| dot(tangents[i].node(idx), tangents[j].node(idx)));
        metric.push(g);
        if !usable[idx] {
            shape.push(Matrix3::zeros());
            nullity.push(Vector3::zeros());
            continue;
        }
        let ginv = g.try_inverse().ok_or(Error::NotAnImmersion { node: idx })?;
        // <N_i, psi_j> laid out with i as the column index
        let w = Matrix3::from_fn(|j, i| dot(dn[i].node(idx), tangents[j].node(idx)));
        let a = -(ginv * w);
        nullity.push(nullity_of(&g, &a).ok_or(Error::NotAnImmersion { node: idx })?.1);
        shape.push(a);
    }
    Ok((metric, shape, nullity))
}

/// Singular values (descending) and unit nullity vector of `A` in the metric `G`.
pub fn nullity_of(g: &Matrix3<f64>, a: &Matrix3<f64>) -> Option<([f64; 3], Vector3<f64>)> {
    let l = g.cholesky()?.l();
    let linv_t = l.try_inverse()?.transpose();
    let ahat = l.transpose() * a * linv_t;
    let sym = (ahat + ahat.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&p, &q| eig.eigenvalues[q].abs().total_cmp(&eig.eigenvalues[p].abs()));
    let sv = [eig.eigenvalues[order[0]].abs(), eig.eigenvalues[order[1]].abs(), eig.eigenvalues[order[2]].abs()];
    let e = eig.eigenvectors.column(order[2]).into_owned();
    let mut v = linv_t * e;
    let k = (0..3).max_by(|&p, &q| v[p].abs().total_cmp(&v[q].abs())).unwrap_or(2);
    if v[2].abs() > 1e-8 * v.norm() {
        if v[2] < 0.0 {
            v = -v;
        }
    } else if v[k] < 0.0 {
        v = -v;
    }
    Some((sv, v))
}

/// Builds `psi = gamma h + h_* grad gamma + s xi` over `s in s_range`.
///
/// Tangents are assembled analytically from the jet; the shape operator is
/// recovered from the Weingarten equation with finite differences of the
/// Gauss map `N = g o pi` and checked against `-P_w^{-1}`.
pub fn gauss_parametrize(pair: &GaussPair, s_range: (f64, f64), ns: usize) -> Result<HypersurfaceSample> {
    let dim = pair.jet.ambient_dim();
    if dim != 4 {
        return Err(Error::Dimension(format!(
            "Gauss parametrization is sampled for hypersurfaces of R^4 (got R^{dim})"
        )));
    }
    let base = pair.jet.h.grid().clone();
    let grid = base.extend(Axis::new(s_range.0, s_range.1, ns)?)?;
    let nb = base.len();
    let n = grid.len();
    let mut psi = Vec::with_capacity(n * dim);
    let mut tan: [Vec<f64>; 3] = [Vec::with_capacity(n * dim), Vec::with_capacity(n * dim), Vec::with_capacity(n * dim)];
    let mut normal = Vec::with_capacity(n * dim);
    let mut pw = Vec::with_capacity(n);
    let mut scale = 1.0 + pair.gamma.sup_norm();
    let mut hess_max = 0.0f64;

    // per-base-node quantities
    struct BaseData {
        grad: nalgebra::Vector2<f64>,
        dgrad: Matrix2<f64>,
        shape: Matrix2<f64>,
        hess: Matrix2<f64>,
    }
    let mut bd = Vec::with_capacity(nb);
    for b in 0..nb {
        let jet = &pair.jet;
        let ginv = pair.metric_inv(b)?;
        let grad = ginv * pair.dgamma(b);
        let gab = Matrix2::new(pair.gamma_uu.get(b), pair.gamma_uv.get(b), pair.gamma_uv.get(b), pair.gamma_vv.get(b));
        // column a holds d_a (gamma^b)
        let mut dgrad = Matrix2::zeros();
        for a in 0..2 {
            let dg = Matrix2::from_fn(|d, e| {
                dot(jet.second(b, a, d), jet.first(b, e)) + dot(jet.first(b, d), jet.second(b, a, e))
            });
            let col = -(ginv * dg * ginv) * pair.dgamma(b) + ginv * gab.column(a);
            dgrad.set_column(a, &col);
        }
        let xi = pair.normal_frame[0].node(b);
        let shape = pair.shape_op(b, xi)?;
        let hess = pair.hess_op(b)?;
        hess_max = hess_max.max(hess.abs().max());
        bd.push(BaseData { grad, dgrad, shape, hess });
    }
    scale += hess_max;
    let eps_reg = 1e-6 * scale;

    let mut regular = Vec::with_capacity(n);
    for idx in 0..n {
        let b = idx % nb;
        let s = grid.point(idx)[2];
        let jet = &pair.jet;
        let (h, hu, hv) = (jet.h.node(b), jet.h_u.node(b), jet.h_v.node(b));
        let xi = pair.normal_frame[0].node(b);
        let g = pair.gamma.get(b);
        let d = &bd[b];
        for c in 0..dim {
            psi.push(g * h[c] + d.grad[0] * hu[c] + d.grad[1] * hv[c] + s * xi[c]);
        }
        let dg = [pair.gamma_u.get(b), pair.gamma_v.get(b)];
        for a in 0..2 {
            let ha = jet.first(b, a);
            for c in 0..dim {
                let xi_a = -(d.shape[(0, a)] * hu[c] + d.shape[(1, a)] * hv[c]);
                let v = dg[a] * h[c]
                    + g * ha[c]
                    + d.dgrad[(0, a)] * hu[c]
                    + d.dgrad[(1, a)] * hv[c]
                    + d.grad[0] * jet.second(b, a, 0)[c]
                    + d.grad[1] * jet.second(b, a, 1)[c]
                    + s * xi_a;
                tan[a].push(v);
            }
        }
        tan[2].extend_from_slice(xi);
        normal.extend_from_slice(h);
        let p = Matrix2::identity() * g + d.hess - d.shape * s;
        regular.push(p.determinant().abs() > eps_reg);
        pw.push(p);
    }
    if !regular.iter().any(|&r| r) {
        return Err(Error::NowhereRegular);
    }
    let psi = VecField::from_raw(grid.clone(), dim, psi);
    let [tu, tv, ts] = tan.map(|t| VecField::from_raw(grid.clone(), dim, t));
    let normal = VecField::from_raw(grid.clone(), dim, normal);
    let hyp = from_parts(psi, [tu, tv, ts], normal, regular, Some(pw), Some(pair.clone()))?;
    let checks = hyp.checks.as_ref().expect("checks run when P_w is present");
    let gate = 100.0 * hyp.h() * hyp.h();
    if checks.shape_cross_check > gate {
        return Err(Error::InconsistentGeometry {
            what: "shape operator vs -P_w^{-1}".into(),
            residual: checks.shape_cross_check,
            gate,
        });
    }
    Ok(hyp)
}

/// Assembles a sample from points, tangents and Gauss map; metric and shape
/// operator are recomputed, and the Gauss checks run when `pw` is given.
pub fn from_parts(
    psi: VecField,
    tangents: [VecField; 3],
    normal: VecField,
    regular: Vec<bool>,
    pw: Option<Vec<Matrix2<f64>>>,
    pair: Option<GaussPair>,
) -> Result<HypersurfaceSample> {
    let grid = psi.grid().clone();
    let n = grid.len();
    let fields_ok = grid.dim() == 3
        && psi.dim() == 4
        && [&tangents[0], &tangents[1], &tangents[2], &normal].iter().all(|f| f.grid() == &grid && f.dim() == 4);
    if !fields_ok || regular.len() != n || pw.as_ref().is_some_and(|p| p.len() != n) {
        return Err(Error::Dimension("hypersurface parts need a 3-D chart in R^4".into()));
    }
    if !regular.iter().any(|&r| r) {
        return Err(Error::NowhereRegular);
    }
    let [tu, tv, ts] = tangents;
    let (metric, a_chart, nullity) = second_order(&[&tu, &tv, &ts], &normal, &regular)?;
    let mut hyp = HypersurfaceSample {
        grid,
        psi,
        psi_u: tu,
        psi_v: tv,
        psi_s: ts,
        normal,
        a_chart,
        metric,
        nullity,
        pw,
        regular,
        pair,
        checks: None,
    };
    if hyp.pw.is_some() {
        hyp.checks = Some(gauss_checks(&hyp)?);
    }
    Ok(hyp)
}

/// Shape operator on the quotient, `A_bar e_a = pi_*(A X_a)` with the
/// horizontal lifts `X_a = d_a - (G_as/G_ss) d_s`.
pub fn quotient_shape(g: &Matrix3<f64>, a: &Matrix3<f64>) -> Matrix2<f64> {
    let c = [g[(0, 2)] / g[(2, 2)], g[(1, 2)] / g[(2, 2)]];
    let mut out = Matrix2::zeros();
    for col in 0..2 {
        let x = Vector3::new(if col == 0 { 1.0 } else { 0.0 }, if col == 1 { 1.0 } else { 0.0 }, -c[col]);
        let ax = a * x;
        out[(0, col)] = ax[0];
        out[(1, col)] = ax[1];
    }
    out
}

/// Measures the Gauss-parametrization identities on a sample built from a pair.
pub fn gauss_checks(hyp: &HypersurfaceSample) -> Result<GaussChecks> {
    let pw = hyp.pw.as_ref().ok_or_else(|| Error::Input("sample carries no P_w".into()))?;
    let fd = tangents_fd(&hyp.psi)?;
    let mut orth = 0.0f64;
    let mut matchn = 0.0f64;
    let mut cross = 0.0f64;
    let mut count = 0;
    for idx in 0..hyp.len() {
        if !hyp.regular[idx] {
            continue;
        }
        count += 1;
        let nn = hyp.normal.node(idx);
        for i in 0..3 {
            orth = orth.max(dot(nn, hyp.tangent(idx, i)).abs());
        }
        let x = cross4(fd[0].node(idx), fd[1].node(idx), fd[2].node(idx));
        let r = dot(&x, &x).sqrt();
        let (mut dp, mut dm) = (0.0f64, 0.0f64);
        for c in 0..4 {
            dp += (x[c] / r - nn[c]).powi(2);
            dm += (x[c] / r + nn[c]).powi(2);
        }
        matchn = matchn.max(dp.min(dm).sqrt());
        let pinv = pw[idx].try_inverse().ok_or(Error::NowhereRegular)?;
        let abar = quotient_shape(&hyp.metric[idx], &hyp.a_chart[idx]);
        cross = cross.max((abar + pinv).norm());
    }
    Ok(GaussChecks { normal_orthogonality: orth, normal_match: matchn, shape_cross_check: cross, regular_count: count })
}

/// Hypersurface from sampled points and unit normals; tangents and shape
/// operator by finite differences.
pub fn from_samples(psi: &VecField, normal: &VecField) -> Result<HypersurfaceSample> {
    let grid = psi.grid().clone();
    if grid.dim() != 3 || normal.grid() != &grid || psi.dim() != 4 || normal.dim() != 4 {
        return Err(Error::Dimension("hypersurface samples need 3-D charts in R^4".into()));
    }
    let dev = normal.norms().values().iter().fold(0.0f64, |m, r| m.max((r - 1.0).abs()));
    if dev > 1e-8 {
        return Err(Error::Input(format!("Gauss map samples are not unit (deviation {dev:.3e})")));
    }
    let [tu, tv, ts] = tangents_fd(psi)?;
    let regular = vec![true; grid.len()];
    let (metric, a_chart, nullity) = second_order(&[&tu, &tv, &ts], normal, &regular)?;
    Ok(HypersurfaceSample {
        grid,
        psi: psi.clone(),
        psi_u: tu,
        psi_v: tv,
        psi_s: ts,
        normal: normal.clone(),
        a_chart,
        metric,
        nullity,
        pw: None,
        regular,
        pair: None,
        checks: None,
    })
}

/// Christoffel symbols `Gamma^k_{ij}` (indexed `[k][i][j]`) of the induced
/// metric, from symmetrized differences of the tangents.
pub fn induced_christoffels(hyp: &HypersurfaceSample) -> Result<Vec<[[[f64; 3]; 3]; 3]>> {
    let tans = [&hyp.psi_u, &hyp.psi_v, &hyp.psi_s];
    let mut d: Vec<Vec<VecField>> = Vec::with_capacity(3);
    for t in tans {
        d.push(vec![diff(t, Dir::U, Order::First)?, diff(t, Dir::V, Order::First)?, diff(t, Dir::S, Order::First)?]);
    }
    let dim = hyp.psi.dim();
    let mut out = Vec::with_capacity(hyp.len());
    for idx in 0..hyp.len() {
        let g = hyp.metric[idx];
        let ginv = g.try_inverse().ok_or(Error::NotAnImmersion { node: idx })?;
        let mut gam = [[[0.0; 3]; 3]; 3];
        for i in 0..3 {
            for j in i..3 {
                // psi_ij = (d_i psi_j + d_j psi_i) / 2
                let (a, b) = (d[j][i].node(idx), d[i][j].node(idx));
                let second: Vec<f64> = (0..dim).map(|c| 0.5 * (a[c] + b[c])).collect();
                let low = Vector3::from_fn(|l, _| dot(&second, hyp.tangent(idx, l)));
                let up = ginv * low;
                for k in 0..3 {
                    gam[k][i][j] = up[k];
                    gam[k][j][i] = up[k];
                }
            }
        }
        out.push(gam);
    }
    Ok(out)
}

/// Per-node singular values and ranks of the shape operator.
#[derive(Debug, Clone)]
pub struct RankProfile {
    pub singular_values: Vec<[f64; 3]>,
    pub rank: Vec<usize>,
    /// Number of regular nodes with rank 0, 1, 2, 3.
    pub histogram: [usize; 4],
    pub nullity: Vec<Vector3<f64>>,
}

impl RankProfile {
    /// The rank shared by every regular node, if any.
    pub fn constant_rank(&self) -> Option<usize> {
        let used: Vec<usize> = (0..4).filter(|&r| self.histogram[r] > 0).collect();
        if used.len() == 1 {
            Some(used[0])
        } else {
            None
        }
    }
}

pub fn rank_profile(hyp: &HypersurfaceSample) -> RankProfile {
    let mut sv = Vec::with_capacity(hyp.len());
    let mut rank = Vec::with_capacity(hyp.len());
    let mut hist = [0usize; 4];
    for idx in 0..hyp.len() {
        let s = if hyp.regular[idx] {
            nullity_of(&hyp.metric[idx], &hyp.a_chart[idx]).map(|x| x.0).unwrap_or([0.0; 3])
        } else {
            [0.0; 3]
        };
        let r = if s[0] == 0.0 { 0 } else { s.iter().filter(|&&x| x > EPS_RANK * s[0]).count() };
        if hyp.regular[idx] {
            hist[r] += 1;
        }
        sv.push(s);
        rank.push(r);
    }
    RankProfile { singular_values: sv, rank, histogram: hist, nullity: hyp.nullity.clone() }
}
