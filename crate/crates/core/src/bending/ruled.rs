//! Bendings of ruled hypersurfaces. In the frame `X, Y` of the nullity
//! complement with `<A Y, Y> = 0`, the Codazzi tensors are `B X = theta X`,
//! `B Y = 0`, `B T = 0`, that is `B = A D` with `D = (theta / <A Y, X>) J`,
//! `J X = Y`, `J Y = 0`.

use nalgebra::{Matrix2, Matrix3, Vector3};

use crate::calculus::{diff, Order};
use crate::error::{Error, Result};
use crate::field::{ScalarField, VecField};
use crate::grid::Dir;
use crate::hypersurface::sample::induced_christoffels;
use crate::hypersurface::{Classification, HypersurfaceSample, Verdict};

use super::synth::codazzi_field;

/// Largest `|<d_v, X>|`, `|<d_s, X>|` (unit vectors) accepted as a chart whose
/// `(v, s)` planes are the rulings.
pub const ADAPTED_TOL: f64 = 1e-3;

/// Names of the ruled-bending residuals.
pub const RESIDUAL_NAMES: [&str; 2] = ["ruling", "codazzi-A"];

/// The function-sized family of bendings of a ruled hypersurface.
#[derive(Debug, Clone)]
pub struct RuledBending {
    pub theta: ScalarField,
    /// `theta` on the seed curve `{v = v_0, s = s_0}`.
    pub seed_curve_values: Vec<f64>,
    /// Chart components of the unit fields `X` (transverse) and `Y` (along the rulings).
    pub x: Vec<Vector3<f64>>,
    pub y: Vec<Vector3<f64>>,
    /// `B = theta X <X, .>` in the chart frame.
    pub b_chart: Vec<Matrix3<f64>>,
    /// `max |<A Y, Y>|`, relative to `|A|`.
    pub ruling_residual: f64,
    a: Vec<Matrix3<f64>>,
}

impl RuledBending {
    /// `A(t) = A + t B` per node.
    pub fn a_family(&self, t: f64) -> Vec<Matrix3<f64>> {
        self.a.iter().zip(&self.b_chart).map(|(a, b)| a + b * t).collect()
    }

    /// Interior Codazzi residual of `A(t)`.
    pub fn codazzi_residual(&self, hyp: &HypersurfaceSample, t: f64) -> Result<f64> {
        let chr = induced_christoffels(hyp)?;
        codazzi_field(&hyp.grid, &hyp.metric, &chr, &self.a_family(t))
    }
}

/// Interior Codazzi residual of `A + t B` for a stored bending tensor.
pub fn deformed_codazzi(hyp: &HypersurfaceSample, b_chart: &[Matrix3<f64>], t: f64) -> Result<f64> {
    if b_chart.len() != hyp.len() {
        return Err(Error::Dimension(format!("{} bending tensors for {} nodes", b_chart.len(), hyp.len())));
    }
    let a: Vec<Matrix3<f64>> = hyp.a_chart.iter().zip(b_chart).map(|(a, b)| a + b * t).collect();
    let chr = induced_christoffels(hyp)?;
    codazzi_field(&hyp.grid, &hyp.metric, &chr, &a)
}

fn unit(g: &Matrix3<f64>, v: Vector3<f64>) -> Vector3<f64> {
    let n = (v.transpose() * g * v)[0].sqrt();
    v / n
}

/// Frames `X`, `Y` from the nilpotent `J_bar` of the classification.
/// Chart fields `X`, `Y` and the ruling residual.
type Frames = (Vec<Vector3<f64>>, Vec<Vector3<f64>>, f64);

fn ruling_frames(hyp: &HypersurfaceSample, j_bar: &[Matrix2<f64>]) -> Result<Frames> {
    let n = hyp.len();
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    let mut ruling = 0.0f64;
    for idx in 0..n {
        let g = hyp.metric[idx];
        let j = j_bar[hyp.base_index(idx)];
        // kernel of the nilpotent J_bar: the larger column spans its image
        let (c0, c1) = (j.column(0), j.column(1));
        let ybar = if c0.norm() >= c1.norm() { c0.into_owned() } else { c1.into_owned() };
        if ybar.norm() == 0.0 {
            return Err(Error::Classification(format!("J_bar vanishes at base node {}", hyp.base_index(idx))));
        }
        let c = [g[(0, 2)] / g[(2, 2)], g[(1, 2)] / g[(2, 2)]];
        let lift = |a: f64, b: f64| Vector3::new(a, b, -(a * c[0] + b * c[1]));
        let guess = unit(&g, lift(ybar[0], ybar[1]));
        let t = hyp.nullity[idx];
        // orthonormal basis of the nullity complement, then the null
        // direction of <A., .> there closest to the kernel of J_bar
        let e1 = unit(&g, lift(1.0, 0.0));
        let ip = |p: &Vector3<f64>, q: &Vector3<f64>| (p.transpose() * g * q)[0];
        let raw = lift(0.0, 1.0);
        let e2 = unit(&g, raw - e1 * ip(&raw, &e1));
        let a = hyp.a_chart[idx];
        let q = |p: &Vector3<f64>, r: &Vector3<f64>| ip(&(a * p), r);
        let (qa, qc, qd) = (q(&e1, &e1), 0.5 * (q(&e1, &e2) + q(&e2, &e1)), q(&e2, &e2));
        let disc = qc * qc - qa * qd;
        if disc < -1e-8 * (qa * qa + qc * qc + qd * qd) {
            return Err(Error::Classification(format!("second fundamental form is definite on the nullity complement at node {idx}")));
        }
        let root = disc.max(0.0).sqrt();
        // null directions e1 x + e2 y: qa x^2 + 2 qc x y + qd y^2 = 0
        let cands = if qa.abs() >= qd.abs() && qa != 0.0 {
            [e1 * (-qc + root) + e2 * qa, e1 * (-qc - root) + e2 * qa]
        } else if qd != 0.0 {
            [e1 * qd + e2 * (-qc + root), e1 * qd + e2 * (-qc - root)]
        } else {
            [e1, e2]
        };
        let mut y = cands
            .iter()
            .map(|v| unit(&g, *v))
            .max_by(|p, r| ip(p, &guess).abs().total_cmp(&ip(r, &guess).abs()))
            .expect("two candidates");
        if y[1] < 0.0 {
            y = -y;
        }
        // X completes (Y, T) to an orthonormal frame
        let mut x: Vector3<f64> = Vector3::zeros();
        for probe in [Vector3::x(), Vector3::y(), Vector3::z()] {
            let low = g * probe;
            let cand = probe - y * (y.transpose() * low)[0] - t * (t.transpose() * low)[0];
            if (cand.transpose() * g * cand)[0] > (x.transpose() * g * x)[0] {
                x = cand;
            }
        }
        let mut x = unit(&g, x);
        if x[0] < 0.0 {
            x = -x;
        }
        let ay = a * y;
        ruling = ruling.max((ay.transpose() * g * y)[0].abs() / (1.0 + a.norm()));
        xs.push(x);
        ys.push(y);
    }
    Ok((xs, ys, ruling))
}

/// Extends seed values of `theta` on the `u`-line through node 0 by the
/// linear equations `Y(theta) = <nabla_X X, Y> theta`,
/// `T(theta) = <nabla_X X, T> theta` and assembles `B` with `<B X, X> = theta`.
///
/// The chart must have the rulings as its `(v, s)` planes.
pub fn ruled_bending(hyp: &HypersurfaceSample, cls: &Classification, seeds: &[f64]) -> Result<RuledBending> {
    if cls.verdict != Verdict::Ruled {
        return Err(Error::Classification(format!("ruled bendings need a ruled hypersurface, got {}", cls.verdict)));
    }
    let grid = &hyp.grid;
    let (nu, nv, ns) = (grid.n(Dir::U), grid.n(Dir::V), grid.n(Dir::S));
    if seeds.len() != nu {
        return Err(Error::Dimension(format!("{} seed values for a seed curve of {nu} nodes", seeds.len())));
    }
    let (xs, ys, ruling) = ruling_frames(hyp, &cls.j_bar)?;
    let n = hyp.len();
    let chr = induced_christoffels(hyp)?;
    let xfield = VecField::new(grid.clone(), 3, xs.iter().flat_map(|x| x.iter().copied().collect::<Vec<_>>()).collect())?;
    let dx = [diff(&xfield, Dir::U, Order::First)?, diff(&xfield, Dir::V, Order::First)?, diff(&xfield, Dir::S, Order::First)?];
    // rates of log theta along d_v and d_s
    let mut pv = vec![0.0; n];
    let mut ps = vec![0.0; n];
    for idx in 0..n {
        let g = hyp.metric[idx];
        let (x, y, t) = (xs[idx], ys[idx], hyp.nullity[idx]);
        let mut nabla = Vector3::zeros();
        for k in 0..3 {
            for i in 0..3 {
                nabla[k] += x[i] * dx[i].node(idx)[k];
                for j in 0..3 {
                    nabla[k] += chr[idx][k][i][j] * x[i] * x[j];
                }
            }
        }
        let ip = |a: &Vector3<f64>, b: &Vector3<f64>| (a.transpose() * g * b)[0];
        let (ky, kt) = (ip(&nabla, &y), ip(&nabla, &t));
        let ev = Vector3::y();
        let es = Vector3::z();
        let norm_v = ip(&ev, &ev).sqrt();
        let norm_s = ip(&es, &es).sqrt();
        if ip(&ev, &x).abs() > ADAPTED_TOL * norm_v || ip(&es, &x).abs() > ADAPTED_TOL * norm_s {
            return Err(Error::Classification(format!("chart is not adapted to the rulings at node {idx}")));
        }
        pv[idx] = ip(&ev, &y) * ky + ip(&ev, &t) * kt;
        ps[idx] = ip(&es, &y) * ky + ip(&es, &t) * kt;
    }
    // log of the propagation factor, trapezoid rule along v then s
    let (hv, hs) = (grid.spacing(Dir::V), grid.spacing(Dir::S));
    let mut logf = vec![0.0; n];
    for i in 0..nu {
        for j in 1..nv {
            let (p, q) = (grid.idx(i, j - 1, 0), grid.idx(i, j, 0));
            logf[q] = logf[p] + 0.5 * hv * (pv[p] + pv[q]);
        }
        for j in 0..nv {
            for k in 1..ns {
                let (p, q) = (grid.idx(i, j, k - 1), grid.idx(i, j, k));
                logf[q] = logf[p] + 0.5 * hs * (ps[p] + ps[q]);
            }
        }
    }
    let theta: Vec<f64> = (0..n).map(|idx| seeds[grid.ijk(idx).0] * logf[idx].exp()).collect();
    let b_chart = (0..n)
        .map(|idx| {
            let g = hyp.metric[idx];
            xs[idx] * (g * xs[idx]).transpose() * theta[idx]
        })
        .collect();
    Ok(RuledBending {
        theta: ScalarField::new(grid.clone(), theta)?,
        seed_curve_values: seeds.to_vec(),
        x: xs,
        y: ys,
        b_chart,
        ruling_residual: ruling,
        a: hyp.a_chart.clone(),
    })
}
