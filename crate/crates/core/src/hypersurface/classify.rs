//! Splitting tensor of the nullity and the four-way classification.

use std::collections::BTreeMap;

use nalgebra::{Matrix2, Matrix3, Vector2};

use crate::calculus::{diff, exactness_residual, integrate_form, Order, PathOrder};
use crate::error::{Error, Result};
use crate::field::{dot, OneForm2, ScalarField, VecField};
use crate::grid::{Dir, Grid};

use super::pair::{pair_from_samples, GaussPair};
use super::sample::{quotient_shape, rank_profile, HypersurfaceSample};

/// Largest normalized determinant still read as zero; the determinant lies
/// in `[-1, 1]`, so coarse grids must not turn every node ruled.
pub const RULED_CAP: f64 = 0.1;

/// Relative gate of the surface-like span test.
pub const SPAN_GATE: f64 = 1e-3;

/// Splitting tensor `C_T`, `T = d_s`, on the regular nodes of a sample.
#[derive(Debug, Clone)]
pub struct Splitting {
    /// In the quotient basis (horizontal lifts of `d_u`, `d_v`).
    pub c_bar: Vec<Matrix2<f64>>,
    /// In an orthonormal frame of the nullity complement.
    pub c_on: Vec<Matrix2<f64>>,
    /// `|C - (tr C / 2) I|_F / (|C|_F + 1)` in the orthonormal frame.
    pub span_residual: Vec<f64>,
    /// Largest relative asymmetry of `A C_T` (should be self-adjoint).
    pub codazzi_residual: f64,
    pub active: Vec<bool>,
}

/// Second derivatives of `psi` needed for the Christoffels `Gamma^k_{is}`.
struct SecondDerivs {
    us: VecField,
    vs: VecField,
    ss: VecField,
}

fn second_derivs(hyp: &HypersurfaceSample) -> Result<SecondDerivs> {
    let sym = |a: &VecField, b: &VecField| {
        let vals = a.values().iter().zip(b.values()).map(|(x, y)| 0.5 * (x + y)).collect();
        VecField::from_raw(a.grid().clone(), a.dim(), vals)
    };
    let us = sym(&diff(&hyp.psi_s, Dir::U, Order::First)?, &diff(&hyp.psi_u, Dir::S, Order::First)?);
    let vs = sym(&diff(&hyp.psi_s, Dir::V, Order::First)?, &diff(&hyp.psi_v, Dir::S, Order::First)?);
    let ss = diff(&hyp.psi_s, Dir::S, Order::First)?;
    Ok(SecondDerivs { us, vs, ss })
}

/// Cholesky factor of the quotient metric `G_ab - G_as G_bs / G_ss`.
fn quotient_metric(g: &Matrix3<f64>) -> Matrix2<f64> {
    Matrix2::from_fn(|a, b| g[(a, b)] - g[(a, 2)] * g[(b, 2)] / g[(2, 2)])
}

pub fn splitting_tensor(hyp: &HypersurfaceSample) -> Result<Splitting> {
    let profile = rank_profile(hyp);
    for idx in 0..hyp.len() {
        if hyp.regular[idx] && profile.rank[idx] != 2 {
            return Err(Error::Rank(format!("shape operator has rank {} at node {idx}", profile.rank[idx])));
        }
        if hyp.regular[idx] {
            let v = hyp.nullity[idx];
            let cos = (hyp.metric[idx].row(2) * v)[0].abs() / hyp.metric[idx][(2, 2)].sqrt();
            if cos < 1.0 - 1e-4 {
                return Err(Error::Rank(format!("nullity is not tangent to the fibers at node {idx}")));
            }
        }
    }
    let sd = second_derivs(hyp)?;
    let n = hyp.len();
    let mut c_bar = Vec::with_capacity(n);
    let mut c_on = Vec::with_capacity(n);
    let mut span = Vec::with_capacity(n);
    let mut codazzi = 0.0f64;
    for idx in 0..n {
        if !hyp.regular[idx] {
            c_bar.push(Matrix2::zeros());
            c_on.push(Matrix2::zeros());
            span.push(0.0);
            continue;
        }
        let g = hyp.metric[idx];
        let ginv = g.try_inverse().ok_or(Error::NotAnImmersion { node: idx })?;
        let christ = |x: &[f64]| {
            let low = nalgebra::Vector3::from_fn(|l, _| dot(x, hyp.tangent(idx, l)));
            ginv * low
        };
        let gs = [christ(sd.us.node(idx)), christ(sd.vs.node(idx))];
        let gss = christ(sd.ss.node(idx));
        let c = [g[(0, 2)] / g[(2, 2)], g[(1, 2)] / g[(2, 2)]];
        let cb = Matrix2::from_fn(|b, a| -(gs[a][b] - c[a] * gss[b]));
        let gbar = quotient_metric(&g);
        let l = gbar.cholesky().ok_or(Error::NotAnImmersion { node: idx })?.l();
        let lt = l.transpose();
        let lt_inv = lt.try_inverse().ok_or(Error::NotAnImmersion { node: idx })?;
        let con = lt * cb * lt_inv;
        let tf = con - Matrix2::identity() * (0.5 * con.trace());
        span.push(tf.norm() / (con.norm() + 1.0));
        let abar = lt * quotient_shape(&g, &hyp.a_chart[idx]) * lt_inv;
        let ac = abar * con;
        codazzi = codazzi.max((ac - ac.transpose()).norm() / (1.0 + abar.norm() * con.norm()));
        c_bar.push(cb);
        c_on.push(con);
    }
    Ok(Splitting { c_bar, c_on, span_residual: span, codazzi_residual: codazzi, active: hyp.regular.clone() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    SurfaceLike,
    Ruled,
    Hyperbolic,
    Elliptic,
    Mixed,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Verdict::SurfaceLike => "surface-like",
            Verdict::Ruled => "ruled",
            Verdict::Hyperbolic => "hyperbolic",
            Verdict::Elliptic => "elliptic",
            Verdict::Mixed => "mixed",
        };
        f.write_str(s)
    }
}

/// Outcome of [`classify`]. Tensors live on the base grid, in the `(u, v)` chart basis.
#[derive(Debug, Clone)]
pub struct Classification {
    pub verdict: Verdict,
    pub j_bar: Vec<Matrix2<f64>>,
    pub d_bar: Vec<Matrix2<f64>>,
    /// Scale of `D_bar = mu_bar J_bar` (hyperbolic and elliptic only), `mu_bar(base) = 1`.
    pub mu_bar: Option<ScalarField>,
    /// Normalized determinant of the commuting trace-free direction, in `[-1, 1]`.
    pub normalized_det: ScalarField,
    pub residuals: BTreeMap<String, f64>,
    pub base: Grid,
}

/// Names of the residuals every classification reports.
pub const RESIDUAL_NAMES: [&str; 9] = [
    "splitting-span",
    "commutation",
    "fiber-parallel",
    "trace",
    "codazzi-D",
    "gamma-compat",
    "det-D",
    "j-square",
    "splitting-codazzi",
];

/// Gate of every classification residual at spacing `h`. The splitting span
/// discriminates surface-like pieces rather than certifying anything and
/// has no gate.
pub fn residual_gates(h: f64) -> BTreeMap<String, Option<f64>> {
    let gate = 100.0 * h * h;
    RESIDUAL_NAMES
        .iter()
        .map(|&name| {
            let g = match name {
                "splitting-span" => None,
                "j-square" => Some(J_SQUARE_TOL),
                "det-D" => Some(gate.clamp(1e-6, RULED_CAP)),
                _ => Some(gate),
            };
            (name.to_string(), g)
        })
        .collect()
}

/// Tolerance on `|J_bar^2 -+ I|`.
pub const J_SQUARE_TOL: f64 = 1e-10;

/// Quotient data `(g, gamma)`: the stored pair, or the Gauss map and support
/// function of the `s`-index-0 slice.
pub fn quotient_pair(hyp: &HypersurfaceSample) -> Result<GaussPair> {
    if let Some(p) = &hyp.pair {
        return Ok(p.clone());
    }
    let base = hyp.grid.base();
    let nb = base.len();
    let dim = hyp.normal.dim();
    let nvals = hyp.normal.values()[..nb * dim].to_vec();
    let gamma: Vec<f64> = (0..nb).map(|b| dot(hyp.psi.node(b), hyp.normal.node(b))).collect();
    pair_from_samples(&VecField::new(base.clone(), dim, nvals)?, &ScalarField::new(base, gamma)?)
}

fn normalized_det(d: &Matrix2<f64>, lg: &Matrix2<f64>) -> f64 {
    // lg: transpose of the Cholesky factor of the quotient metric of g
    let inv = lg.try_inverse().unwrap_or_else(Matrix2::identity);
    let don = lg * d * inv;
    let f = 0.5 * don.norm_squared();
    if f == 0.0 {
        0.0
    } else {
        don.determinant() / f
    }
}

pub fn classify(hyp: &HypersurfaceSample) -> Result<Classification> {
    let sp = splitting_tensor(hyp)?;
    let base = hyp.grid.base();
    let nb = base.len();
    let ns = hyp.grid.n(Dir::S);
    let h = hyp.h();
    let gate = 100.0 * h * h;

    let active: Vec<usize> = (0..hyp.len()).filter(|&i| sp.active[i]).collect();
    let span_max = active.iter().map(|&i| sp.span_residual[i]).fold(0.0, f64::max);
    let mut residuals = BTreeMap::new();
    residuals.insert("splitting-span".to_string(), span_max);
    residuals.insert("splitting-codazzi".to_string(), sp.codazzi_residual);
    let zero_field = ScalarField::constant(&base, 0.0);
    if span_max <= SPAN_GATE {
        for name in RESIDUAL_NAMES.iter().skip(1) {
            residuals.entry(name.to_string()).or_insert(0.0);
        }
        return Ok(Classification {
            verdict: Verdict::SurfaceLike,
            j_bar: vec![Matrix2::zeros(); nb],
            d_bar: vec![Matrix2::zeros(); nb],
            mu_bar: None,
            normalized_det: zero_field,
            residuals,
            base,
        });
    }

    let pair = quotient_pair(hyp)?;
    let lg: Vec<Matrix2<f64>> = (0..nb)
        .map(|b| {
            pair.metric(b).cholesky().map(|c| c.l().transpose()).ok_or(Error::NotImmersed { node: b })
        })
        .collect::<Result<_>>()?;

    // commuting trace-free direction per fiber
    let mut dhat = vec![Matrix2::zeros(); nb];
    let mut fiber_par = 0.0f64;
    let mut commutation = 0.0f64;
    let mut det_spread = 0.0f64;
    for b in 0..nb {
        let mut dirs: Vec<Matrix2<f64>> = Vec::with_capacity(ns);
        for k in 0..ns {
            let idx = b + k * nb;
            if !sp.active[idx] {
                continue;
            }
            let c = sp.c_bar[idx];
            let tf = c - Matrix2::identity() * (0.5 * c.trace());
            let nrm = tf.norm();
            if nrm <= 1e-8 * (1.0 + c.norm()) {
                continue;
            }
            let mut d = tf / nrm;
            if let Some(first) = dirs.first() {
                if d.dot(first) < 0.0 {
                    d = -d;
                }
            }
            dirs.push(d);
        }
        if dirs.is_empty() {
            return Err(Error::Unclassifiable(format!(
                "splitting tensor is a multiple of the identity along the whole fiber over base node {b}"
            )));
        }
        let mut avg = dirs.iter().fold(Matrix2::zeros(), |a, d| a + d);
        avg /= avg.norm();
        let dets: Vec<f64> = dirs.iter().map(|d| normalized_det(d, &lg[b])).collect();
        let (lo, hi) = dets.iter().fold((f64::MAX, f64::MIN), |(l, u), &x| (l.min(x), u.max(x)));
        det_spread = det_spread.max(hi - lo);
        for d in &dirs {
            fiber_par = fiber_par.max((d - avg).norm());
        }
        for k in 0..ns {
            let idx = b + k * nb;
            if sp.active[idx] {
                let c = sp.c_bar[idx];
                commutation = commutation.max((avg * c - c * avg).norm() / (1.0 + c.norm()));
            }
        }
        dhat[b] = avg;
    }
    if fiber_par > gate.max(SPAN_GATE) {
        return Err(Error::Unclassifiable(format!(
            "no trace-free tensor commutes with the splitting tensor along fibers (fiber deviation {fiber_par:.3e})"
        )));
    }

    // sign continuation over the base grid
    for b in 1..nb {
        let (i, j, _) = base.ijk(b);
        let p = if i > 0 { base.idx(i - 1, j, 0) } else { base.idx(i, j - 1, 0) };
        if dhat[b].dot(&dhat[p]) < 0.0 {
            dhat[b] = -dhat[b];
        }
    }

    let nu: Vec<f64> = (0..nb).map(|b| normalized_det(&dhat[b], &lg[b])).collect();
    let normalized = ScalarField::new(base.clone(), nu.clone())?;
    let ruled_gate = gate.clamp(1e-6, RULED_CAP);
    let kinds: Vec<i8> = nu.iter().map(|&x| if x.abs() <= ruled_gate { 0 } else if x < 0.0 { -1 } else { 1 }).collect();
    let verdict = if kinds.iter().all(|&k| k == 0) {
        Verdict::Ruled
    } else if kinds.iter().all(|&k| k == -1) {
        Verdict::Hyperbolic
    } else if kinds.iter().all(|&k| k == 1) {
        Verdict::Elliptic
    } else {
        Verdict::Mixed
    };

    let mut j_bar: Vec<Matrix2<f64>> = match verdict {
        Verdict::Hyperbolic => dhat.iter().map(|d| d / (-d.determinant()).sqrt()).collect(),
        Verdict::Elliptic => dhat.iter().map(|d| d / d.determinant().sqrt()).collect(),
        _ => dhat.iter().zip(&lg).map(|(d, l)| d / (l * d * l.try_inverse().unwrap()).norm()).collect(),
    };
    match verdict {
        Verdict::Hyperbolic => {
            let j0 = j_bar[0];
            let flip = if j0[(0, 0)].abs() > 1e-6 { j0[(0, 0)] < 0.0 } else { j0[(1, 0)] < 0.0 };
            if flip {
                j_bar.iter_mut().for_each(|j| *j = -*j);
            }
        }
        Verdict::Elliptic => {
            for j in j_bar.iter_mut() {
                if j[(1, 0)] < 0.0 {
                    *j = -*j;
                }
            }
        }
        _ => {}
    }

    let sign = match verdict {
        Verdict::Hyperbolic => 1.0,
        Verdict::Elliptic => -1.0,
        _ => 0.0,
    };
    let jsq = j_bar.iter().map(|j| (j * j - Matrix2::identity() * sign).norm()).fold(0.0, f64::max);
    let trace = j_bar.iter().map(|j| j.trace().abs()).fold(0.0, f64::max);
    let det_res = match verdict {
        Verdict::Ruled => nu.iter().map(|x| x.abs()).fold(0.0, f64::max),
        _ => det_spread,
    };

    // compatibility of the support function with J_bar
    let mut gamma_compat = 0.0f64;
    for b in 0..nb {
        let g = pair.metric(b);
        let ginv = pair.metric_inv(b)?;
        let p = pair.hess_op(b)? + Matrix2::identity() * pair.gamma.get(b);
        let jstar = ginv * j_bar[b].transpose() * g;
        gamma_compat = gamma_compat.max((p * j_bar[b] - jstar * p).norm() / (1.0 + p.norm()));
    }

    let (mu_bar, codazzi_d) = match verdict {
        Verdict::Hyperbolic | Verdict::Elliptic => {
            let (mu, res) = solve_mu_bar(&pair, &j_bar)?;
            (Some(mu), res)
        }
        _ => (None, 0.0),
    };
    let d_bar = match &mu_bar {
        Some(mu) => j_bar.iter().enumerate().map(|(b, j)| j * mu.get(b)).collect(),
        None => j_bar.clone(),
    };

    residuals.insert("commutation".into(), commutation);
    residuals.insert("fiber-parallel".into(), fiber_par);
    residuals.insert("trace".into(), trace);
    residuals.insert("codazzi-D".into(), codazzi_d);
    residuals.insert("gamma-compat".into(), gamma_compat);
    residuals.insert("det-D".into(), det_res);
    residuals.insert("j-square".into(), jsq);
    Ok(Classification { verdict, j_bar, d_bar, mu_bar, normalized_det: normalized, residuals, base })
}

/// Solves the Codazzi equation of `mu J` on the metric of `g` for `log mu`.
/// Returns `mu` (with `mu(base) = 1`) and the closedness residual of `d log mu`.
pub fn solve_mu_bar(pair: &GaussPair, j_bar: &[Matrix2<f64>]) -> Result<(ScalarField, f64)> {
    let base = pair.gamma.grid().clone();
    let nb = base.len();
    let entry = |r: usize, c: usize| ScalarField::new(base.clone(), j_bar.iter().map(|j| j[(r, c)]).collect());
    // columns J e_u = (J00, J10), J e_v = (J01, J11)
    let ju_v = [diff(&entry(0, 0)?, Dir::V, Order::First)?, diff(&entry(1, 0)?, Dir::V, Order::First)?];
    let jv_u = [diff(&entry(0, 1)?, Dir::U, Order::First)?, diff(&entry(1, 1)?, Dir::U, Order::First)?];
    let mut lu = Vec::with_capacity(nb);
    let mut lv = Vec::with_capacity(nb);
    for b in 0..nb {
        let chr = pair.jet.christoffel_at(b)?;
        let j = j_bar[b];
        let q = Vector2::from_fn(|k, _| {
            let mut x = jv_u[k].get(b) - ju_v[k].get(b);
            for c in 0..2 {
                x += chr[k][0][c] * j[(c, 1)] - chr[k][1][c] * j[(c, 0)];
            }
            x
        });
        let m = Matrix2::new(j[(0, 1)], -j[(0, 0)], j[(1, 1)], -j[(1, 0)]);
        let l = m.try_inverse().ok_or_else(|| Error::Classification(format!("J_bar singular at base node {b}")))? * (-q);
        lu.push(l[0]);
        lv.push(l[1]);
    }
    let form = OneForm2::new(ScalarField::new(base.clone(), lu)?, ScalarField::new(base.clone(), lv)?)?;
    // d log mu already carries first derivatives of J, so its curl is read
    // three nodes in, clear of the faces where one-sided stencils dominate
    let res = exactness_residual(&form).sup_inside(3);
    let ell = integrate_form(&form, (0, 0), PathOrder::UFirst)?;
    Ok((ell.map(f64::exp), res))
}
