//! Synthesis of the bending: `B` from the classification, the linear system
//! for `(L, Y)` and the displacement field `T`.

use std::collections::BTreeMap;

use nalgebra::{Matrix2, Matrix3, Matrix4, Vector3, Vector4};

use crate::calculus::{diff, Order};
use crate::error::{Error, Result};
use crate::field::{dot, ScalarField, VecField};
use crate::grid::{Dir, Grid};
use crate::hypersurface::sample::induced_christoffels;
use crate::hypersurface::{Classification, HypersurfaceSample, Verdict};

pub type Christoffels = [[[f64; 3]; 3]; 3];

/// Largest condition number of the tangent Gram matrix accepted by the
/// per-node least-squares solve.
pub const FRAME_COND_LIMIT: f64 = 1e12;

/// Infinitesimal bending and the tensors it is built from.
#[derive(Debug, Clone)]
pub struct BendingTensors {
    /// `B` in the chart frame; column `i` is `B d_i`.
    pub b_chart: Vec<Matrix3<f64>>,
    /// `L d_u`, `L d_v`, `L d_s`.
    pub l_cols: [VecField; 3],
    pub y: VecField,
    pub t: VecField,
    pub residuals: BTreeMap<String, f64>,
    /// Gate of each entry of `residuals`.
    pub gates: BTreeMap<String, f64>,
}

/// Names of the synthesis residuals.
pub const RESIDUAL_NAMES: [&str; 5] = ["symmetry", "wedge-5", "codazzi-B", "S-compat", "T-path"];

/// Residual gate `100 h^2 (1 + scale)`.
pub fn gate(h: f64, scale: f64) -> f64 {
    100.0 * h * h * (1.0 + scale)
}

/// `<B d_i, d_j>` for a chart-frame `B`.
pub fn lowered(g: &Matrix3<f64>, b: &Matrix3<f64>) -> Matrix3<f64> {
    (g * b).transpose()
}

/// Builds `B` from `f_* B X = -h_*(D_bar pi_* X)` and `B d_s = 0`.
///
/// Returns `B` per node together with the symmetry, wedge and Codazzi
/// residuals (in that order).
pub fn build_b(hyp: &HypersurfaceSample, cls: &Classification) -> Result<(Vec<Matrix3<f64>>, [f64; 3])> {
    if !matches!(cls.verdict, Verdict::Hyperbolic | Verdict::Elliptic) {
        return Err(Error::Classification(format!("B is built from D_bar of hyperbolic or elliptic pieces, not {}", cls.verdict)));
    }
    build_b_from(hyp, &cls.d_bar)
}

/// [`build_b`] for an explicit `D_bar` on the base grid.
pub fn build_b_from(hyp: &HypersurfaceSample, d_bar: &[Matrix2<f64>]) -> Result<(Vec<Matrix3<f64>>, [f64; 3])> {
    let nb = hyp.grid.n(Dir::U) * hyp.grid.n(Dir::V);
    if d_bar.len() != nb {
        return Err(Error::Dimension(format!("{} D_bar entries for {nb} base nodes", d_bar.len())));
    }
    let nu = diff(&hyp.normal, Dir::U, Order::First)?;
    let nv = diff(&hyp.normal, Dir::V, Order::First)?;
    let dim = hyp.psi.dim();
    let mut out = Vec::with_capacity(hyp.len());
    for idx in 0..hyp.len() {
        let g = hyp.metric[idx];
        let ginv = invert_frame(&g, idx)?;
        let d = d_bar[hyp.base_index(idx)];
        let mut b = Matrix3::zeros();
        for a in 0..2 {
            let rhs: Vec<f64> = (0..dim).map(|c| -(d[(0, a)] * nu.node(idx)[c] + d[(1, a)] * nv.node(idx)[c])).collect();
            let low = Vector3::from_fn(|k, _| dot(&rhs, hyp.tangent(idx, k)));
            b.set_column(a, &(ginv * low));
        }
        out.push(b);
    }
    let res = b_residuals(hyp, &out)?;
    Ok((out, res))
}

fn invert_frame(g: &Matrix3<f64>, node: usize) -> Result<Matrix3<f64>> {
    let eig = g.symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    if lo <= 0.0 || hi / lo > FRAME_COND_LIMIT {
        return Err(Error::FrameDegeneracy { node });
    }
    g.try_inverse().ok_or(Error::FrameDegeneracy { node })
}

/// Symmetry, wedge and Codazzi residuals of a chart-frame `B`, each relative
/// to `1 + sup |B|`.
pub fn b_residuals(hyp: &HypersurfaceSample, b: &[Matrix3<f64>]) -> Result<[f64; 3]> {
    let scale = 1.0 + b.iter().map(|m| m.abs().max()).fold(0.0, f64::max);
    let mut sym = 0.0f64;
    let mut wedge = 0.0f64;
    for idx in 0..hyp.len() {
        if !hyp.regular[idx] {
            continue;
        }
        let s = lowered(&hyp.metric[idx], &b[idx]);
        sym = sym.max((s - s.transpose()).abs().max());
        wedge = wedge.max(wedge_residual(&b[idx], &hyp.a_chart[idx]));
    }
    let codazzi = codazzi_residual(hyp, b)?;
    Ok([sym / scale, wedge / scale, codazzi / scale])
}

/// `max |B X ^ A Y - B Y ^ A X|` over chart pairs, chart components.
pub fn wedge_residual(b: &Matrix3<f64>, a: &Matrix3<f64>) -> f64 {
    let mut worst = 0.0f64;
    for x in 0..3 {
        for y in x + 1..3 {
            let (bx, by, ax, ay) = (b.column(x), b.column(y), a.column(x), a.column(y));
            for k in 0..3 {
                for l in k + 1..3 {
                    let w = (bx[k] * ay[l] - bx[l] * ay[k]) - (by[k] * ax[l] - by[l] * ax[k]);
                    worst = worst.max(w.abs());
                }
            }
        }
    }
    worst
}

/// Interior sup of `(nabla_i S)_{jk} - (nabla_j S)_{ik}` for `S = <B., .>`.
pub fn codazzi_residual(hyp: &HypersurfaceSample, b: &[Matrix3<f64>]) -> Result<f64> {
    let chr = induced_christoffels(hyp)?;
    codazzi_field(&hyp.grid, &hyp.metric, &chr, b)
}

pub(crate) fn codazzi_field(grid: &Grid, metric: &[Matrix3<f64>], chr: &[Christoffels], b: &[Matrix3<f64>]) -> Result<f64> {
    let s: Vec<Matrix3<f64>> = metric.iter().zip(b).map(|(g, m)| lowered(g, m)).collect();
    let comp = |j: usize, k: usize| ScalarField::new(grid.clone(), s.iter().map(|m| m[(j, k)]).collect());
    let dirs = [Dir::U, Dir::V, Dir::S];
    // ds[i][j][k] = d_i S_jk
    let mut ds: Vec<Vec<Vec<ScalarField>>> = Vec::with_capacity(3);
    for &d in &dirs {
        let mut row = Vec::with_capacity(3);
        for j in 0..3 {
            let mut col = Vec::with_capacity(3);
            for k in 0..3 {
                col.push(diff(&comp(j, k)?, d, Order::First)?);
            }
            row.push(col);
        }
        ds.push(row);
    }
    let mut worst = 0.0f64;
    for idx in 0..grid.len() {
        if !grid.is_interior(idx) {
            continue;
        }
        let g = &chr[idx];
        let m = &s[idx];
        for i in 0..3 {
            for j in i + 1..3 {
                for k in 0..3 {
                    let mut r = ds[i][j][k].get(idx) - ds[j][i][k].get(idx);
                    for l in 0..3 {
                        r += -g[l][i][k] * m[(j, l)] + g[l][j][k] * m[(i, l)];
                    }
                    worst = worst.max(r.abs());
                }
            }
        }
    }
    Ok(worst)
}

/// Per-node coefficients of the linear system for `(L, Y)`.
struct SystemCoeffs {
    chr: Vec<Christoffels>,
    /// `<A d_i, d_j>`.
    second: Vec<Matrix3<f64>>,
    /// `<B d_i, d_j>`.
    sb: Vec<Matrix3<f64>>,
    /// Columns `f_* B d_i`.
    fb: Vec<[Vector4<f64>; 3]>,
    normal: Vec<Vector4<f64>>,
    a: Vec<Matrix3<f64>>,
}

fn vec4(x: &[f64]) -> Vector4<f64> {
    Vector4::new(x[0], x[1], x[2], x[3])
}

impl SystemCoeffs {
    fn new(hyp: &HypersurfaceSample, b: &[Matrix3<f64>]) -> Result<Self> {
        let chr = induced_christoffels(hyp)?;
        let n = hyp.len();
        let mut second = Vec::with_capacity(n);
        let mut sb = Vec::with_capacity(n);
        let mut fb = Vec::with_capacity(n);
        let mut normal = Vec::with_capacity(n);
        for idx in 0..n {
            let g = hyp.metric[idx];
            second.push(lowered(&g, &hyp.a_chart[idx]));
            sb.push(lowered(&g, &b[idx]));
            let cols = [0, 1, 2].map(|i| vec4(&hyp.push(idx, &b[idx].column(i).into_owned())));
            fb.push(cols);
            normal.push(vec4(hyp.normal.node(idx)));
        }
        Ok(SystemCoeffs { chr, second, sb, fb, normal, a: hyp.a_chart.clone() })
    }

    /// `d_i Z = m Z + f`, rows of `Z` are `L d_u, L d_v, L d_s, Y`.
    fn step_data(&self, idx: usize, i: usize) -> (Matrix4<f64>, Matrix4<f64>) {
        let mut m = Matrix4::zeros();
        let mut f = Matrix4::zeros();
        let g = &self.chr[idx];
        for j in 0..3 {
            for k in 0..3 {
                m[(j, k)] = g[k][i][j];
            }
            m[(j, 3)] = self.second[idx][(i, j)];
            f.set_row(j, &(self.normal[idx] * self.sb[idx][(i, j)]).transpose());
        }
        for k in 0..3 {
            m[(3, k)] = -self.a[idx][(k, i)];
        }
        f.set_row(3, &(-self.fb[idx][i]).transpose());
        (m, f)
    }
}

/// Marches a first-order system from node 0 along the given direction order;
/// `step(from, to, dir, h, value)` advances one node.
pub(crate) fn march<S: Clone>(grid: &Grid, order: [Dir; 3], init: S, mut step: impl FnMut(usize, usize, Dir, f64, &S) -> S) -> Vec<S> {
    let mut vals: Vec<Option<S>> = vec![None; grid.len()];
    vals[0] = Some(init);
    let n = [grid.n(Dir::U), grid.n(Dir::V), grid.n(Dir::S)];
    let at = |c: [usize; 3]| grid.idx(c[0], c[1], c[2]);
    let (d0, d1, d2) = (order[0].index(), order[1].index(), order[2].index());
    // first direction from the origin, then lines of the second, then the third
    let mut c = [0usize; 3];
    for a in 1..n[d0] {
        c[d0] = a;
        let (p, q) = ({
            let mut pc = c;
            pc[d0] = a - 1;
            at(pc)
        }, at(c));
        let v = step(p, q, order[0], grid.spacing(order[0]), vals[p].as_ref().expect("marched"));
        vals[q] = Some(v);
    }
    for a in 0..n[d0] {
        for b in 1..n[d1] {
            let mut qc = [0usize; 3];
            qc[d0] = a;
            qc[d1] = b;
            let mut pc = qc;
            pc[d1] = b - 1;
            let (p, q) = (at(pc), at(qc));
            let v = step(p, q, order[1], grid.spacing(order[1]), vals[p].as_ref().expect("marched"));
            vals[q] = Some(v);
        }
    }
    for a in 0..n[d0] {
        for b in 0..n[d1] {
            for k in 1..n[d2] {
                let mut qc = [0usize; 3];
                qc[d0] = a;
                qc[d1] = b;
                qc[d2] = k;
                let mut pc = qc;
                pc[d2] = k - 1;
                let (p, q) = (at(pc), at(qc));
                let v = step(p, q, order[2], grid.spacing(order[2]), vals[p].as_ref().expect("marched"));
                vals[q] = Some(v);
            }
        }
    }
    vals.into_iter().map(|v| v.expect("every node reached")).collect()
}

pub const FORWARD: [Dir; 3] = [Dir::U, Dir::V, Dir::S];
pub const TRANSPOSED: [Dir; 3] = [Dir::S, Dir::V, Dir::U];

fn march_s(grid: &Grid, coeffs: &SystemCoeffs, order: [Dir; 3]) -> Result<Vec<Matrix4<f64>>> {
    let mut failed = None;
    let vals = march(grid, order, Matrix4::zeros(), |p, q, dir, h, z| {
        let i = dir.index();
        let (mp, fp) = coeffs.step_data(p, i);
        let (mq, fq) = coeffs.step_data(q, i);
        let lhs = Matrix4::identity() - mq * (0.5 * h);
        let rhs = z + (mp * z) * (0.5 * h) + (fp + fq) * (0.5 * h);
        match lhs.lu().solve(&rhs) {
            Some(x) => x,
            None => {
                failed.get_or_insert(q);
                Matrix4::zeros()
            }
        }
    });
    match failed {
        Some(node) => Err(Error::FrameDegeneracy { node }),
        None => Ok(vals),
    }
}

/// Integrates `d_i Y = -L(A d_i) - f_* B d_i`,
/// `d_i L d_j = L(Gamma^k_ij d_k) + <B d_i, d_j> N + <A d_i, d_j> Y`
/// from zero data at node 0 along `u`, then `v`, then `s`.
///
/// Returns `L d_u, L d_v, L d_s`, `Y` and the discrepancy against the
/// transposed order `s, v, u`.
pub fn integrate_s(hyp: &HypersurfaceSample, b: &[Matrix3<f64>]) -> Result<([VecField; 3], VecField, f64)> {
    if hyp.psi.dim() != 4 {
        return Err(Error::Dimension("the bending system is integrated in R^4".into()));
    }
    let coeffs = SystemCoeffs::new(hyp, b)?;
    let fwd = march_s(&hyp.grid, &coeffs, FORWARD)?;
    let back = march_s(&hyp.grid, &coeffs, TRANSPOSED)?;
    let compat = fwd.iter().zip(&back).map(|(x, y)| (x - y).abs().max()).fold(0.0, f64::max);
    let scale = fwd.iter().map(|x| x.abs().max()).fold(0.0, f64::max);
    let g = gate(hyp.h(), scale);
    if compat > g {
        return Err(Error::NonIntegrable { residual: compat, gate: g });
    }
    let grid = &hyp.grid;
    let row = |r: usize| {
        let vals = fwd.iter().flat_map(|z| z.row(r).iter().copied().collect::<Vec<_>>()).collect();
        VecField::new(grid.clone(), 4, vals)
    };
    Ok(([row(0)?, row(1)?, row(2)?], row(3)?, compat))
}

fn march_t(grid: &Grid, l: &[VecField; 3], order: [Dir; 3]) -> Vec<Vector4<f64>> {
    march(grid, order, Vector4::zeros(), |p, q, dir, h, t| {
        let i = dir.index();
        t + (vec4(l[i].node(p)) + vec4(l[i].node(q))) * (0.5 * h)
    })
}

/// Integrates `d_i T = L d_i` from `T = 0` at node 0; returns `T` and the
/// discrepancy against the transposed path order.
pub fn integrate_t(hyp: &HypersurfaceSample, l: &[VecField; 3]) -> Result<(VecField, f64)> {
    for c in l {
        if c.grid() != &hyp.grid || c.dim() != 4 {
            return Err(Error::Dimension("L columns must live on the chart in R^4".into()));
        }
    }
    let fwd = march_t(&hyp.grid, l, FORWARD);
    let back = march_t(&hyp.grid, l, TRANSPOSED);
    let res = fwd.iter().zip(&back).map(|(x, y)| (x - y).abs().max()).fold(0.0, f64::max);
    let scale = fwd.iter().map(|x| x.abs().max()).fold(0.0, f64::max);
    let g = gate(hyp.h(), scale);
    if res > g {
        return Err(Error::NonClosed { residual: res, gate: g });
    }
    let vals = fwd.iter().flat_map(|x| x.iter().copied().collect::<Vec<_>>()).collect();
    Ok((VecField::new(hyp.grid.clone(), 4, vals)?, res))
}

/// Runs `build_b`, `integrate_s` and `integrate_t` and collects their residuals.
pub fn synthesize(hyp: &HypersurfaceSample, cls: &Classification) -> Result<BendingTensors> {
    let (b, [sym, wedge, codazzi]) = build_b(hyp, cls)?;
    let (l_cols, y, compat) = integrate_s(hyp, &b)?;
    let (t, path) = integrate_t(hyp, &l_cols)?;
    let h = hyp.h();
    let sup = |f: &VecField| f.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let z_scale = l_cols.iter().chain([&y]).map(sup).fold(0.0, f64::max);
    let values = [sym, wedge, codazzi, compat, path];
    // the first three are already relative to 1 + sup |B|
    let gates = [gate(h, 0.0), gate(h, 0.0), gate(h, 0.0), gate(h, z_scale), gate(h, sup(&t))];
    let residuals = RESIDUAL_NAMES.iter().zip(values).map(|(n, v)| (n.to_string(), v)).collect();
    let gates = RESIDUAL_NAMES.iter().zip(gates).map(|(n, v)| (n.to_string(), v)).collect();
    Ok(BendingTensors { b_chart: b, l_cols, y, t, residuals, gates })
}
