//! Surfaces in the unit sphere: jets, Christoffel symbols, conjugate-net
//! residuals, the integrating factor `mu`, the reduced potential `M` and the
//! normalized immersion `k = sqrt(mu) h`.

use crate::calculus::{diff, path_integrate, Order};
use crate::error::{Error, Result};
use crate::field::{dot, OneForm2, ScalarField, VecField};
use crate::grid::Dir;

/// Which conjugate-net equation a jet is expected to satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    /// `k_uv + M k = 0`.
    Real,
    /// `k_{z zbar} + M k = 0`, i.e. `(k_uu + k_vv)/4 + M k = 0`.
    Complex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JetKind {
    HyperbolicCandidate,
    EllipticCandidate,
    Unknown,
}

/// Sampled immersion `h: L -> S^n` with first and second derivatives and metric.
#[derive(Debug, Clone)]
pub struct SurfaceJet {
    pub h: VecField,
    pub h_u: VecField,
    pub h_v: VecField,
    pub h_uu: VecField,
    pub h_uv: VecField,
    pub h_vv: VecField,
    pub e: ScalarField,
    pub f_metric: ScalarField,
    pub g_metric: ScalarField,
    pub kind: JetKind,
}

/// Norm `r = |phi|` of a homogeneous representative and its derivatives.
#[derive(Debug, Clone)]
pub struct RadialJet {
    pub r: ScalarField,
    pub r_u: ScalarField,
    pub r_v: ScalarField,
    pub r_uu: ScalarField,
    pub r_uv: ScalarField,
    pub r_vv: ScalarField,
}

/// Christoffel data of a conjugate chart.
#[derive(Debug, Clone)]
pub struct ConjugateData {
    pub kind: Kind,
    /// `Gamma^u_{uv}`.
    pub gamma1: ScalarField,
    /// `Gamma^v_{uv}`.
    pub gamma2: ScalarField,
    pub gamma_c_re: ScalarField,
    pub gamma_c_im: ScalarField,
    pub conj_residual: ScalarField,
    pub integ_residual: ScalarField,
}

/// Integrating factor, reduced potential and normalized immersion.
#[derive(Debug, Clone)]
pub struct ReducedData {
    pub mu: ScalarField,
    pub m: ScalarField,
    pub k: VecField,
    pub form_residual: ScalarField,
}

const SPHERE_TOL: f64 = 1e-8;
const COND_LIMIT: f64 = 1e8;

fn metric_of(h_u: &VecField, h_v: &VecField) -> (ScalarField, ScalarField, ScalarField) {
    let grid = h_u.grid();
    let n = grid.len();
    let (mut e, mut f, mut g) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for idx in 0..n {
        let (a, b) = (h_u.node(idx), h_v.node(idx));
        e.push(dot(a, a));
        f.push(dot(a, b));
        g.push(dot(b, b));
    }
    (
        ScalarField::from_raw(grid.clone(), e),
        ScalarField::from_raw(grid.clone(), f),
        ScalarField::from_raw(grid.clone(), g),
    )
}

fn check_immersed(e: &ScalarField, f: &ScalarField, g: &ScalarField) -> Result<()> {
    for idx in 0..e.values().len() {
        let (a, b, c) = (e.get(idx), f.get(idx), g.get(idx));
        let det = a * c - b * b;
        if !(det > 1e-14 * (a * c).max(f64::MIN_POSITIVE)) {
            return Err(Error::NotImmersed { node: idx });
        }
    }
    Ok(())
}

fn require_2d(field: &VecField) -> Result<()> {
    if field.grid().dim() != 2 {
        return Err(Error::Dimension("surface samples must live on a 2-D grid".into()));
    }
    Ok(())
}

/// Builds the jet of sampled points of the unit sphere.
pub fn build_jet(h_samples: &VecField) -> Result<SurfaceJet> {
    require_2d(h_samples)?;
    let norms = h_samples.norms();
    let dev = norms.values().iter().fold(0.0f64, |m, r| m.max((r - 1.0).abs()));
    if dev > SPHERE_TOL {
        return Err(Error::NotSpherical(dev));
    }
    let mut h = h_samples.clone();
    let dim = h.dim();
    for idx in 0..h.grid().len() {
        let r = norms.get(idx);
        for x in h.node_mut(idx).iter_mut().take(dim) {
            *x /= r;
        }
    }
    let h_u = diff(&h, Dir::U, Order::First)?;
    let h_v = diff(&h, Dir::V, Order::First)?;
    let h_uu = diff(&h, Dir::U, Order::Second)?;
    let h_vv = diff(&h, Dir::V, Order::Second)?;
    let h_uv = diff(&h, Dir::V, Order::Mixed(Dir::U))?;
    let (e, f_metric, g_metric) = metric_of(&h_u, &h_v);
    check_immersed(&e, &f_metric, &g_metric)?;
    Ok(SurfaceJet { h, h_u, h_v, h_uu, h_uv, h_vv, e, f_metric, g_metric, kind: JetKind::Unknown })
}

/// Restores `<h, h_a> = 0` and `<h, h_ab> = -<h_a, h_b>`, which stencils on
/// sampled points keep only to `O(h^2)`, and recomputes the metric.
pub fn enforce_sphere_identities(jet: &mut SurfaceJet) -> Result<()> {
    for idx in 0..jet.h.grid().len() {
        let p = jet.h.node(idx).to_vec();
        for f in [&mut jet.h_u, &mut jet.h_v] {
            let c = dot(&p, f.node(idx));
            f.node_mut(idx).iter_mut().zip(&p).for_each(|(x, q)| *x -= c * q);
        }
        let (a, b) = (jet.h_u.node(idx).to_vec(), jet.h_v.node(idx).to_vec());
        for (f, want) in [(&mut jet.h_uu, -dot(&a, &a)), (&mut jet.h_uv, -dot(&a, &b)), (&mut jet.h_vv, -dot(&b, &b))] {
            let c = want - dot(&p, f.node(idx));
            f.node_mut(idx).iter_mut().zip(&p).for_each(|(x, q)| *x += c * q);
        }
    }
    let (e, f_metric, g_metric) = metric_of(&jet.h_u, &jet.h_v);
    check_immersed(&e, &f_metric, &g_metric)?;
    jet.e = e;
    jet.f_metric = f_metric;
    jet.g_metric = g_metric;
    Ok(())
}

/// Jet of `h = phi/|phi|` for a homogeneous representative `phi`.
///
/// Derivatives of `phi` are taken by finite differences and pushed through
/// the quotient rule exactly, so `h` and its derivatives are mutually
/// consistent with the radial jet.
pub fn homogeneous_jet(phi: &VecField) -> Result<(SurfaceJet, RadialJet)> {
    require_2d(phi)?;
    let grid = phi.grid().clone();
    let dim = phi.dim();
    let p_u = diff(phi, Dir::U, Order::First)?;
    let p_v = diff(phi, Dir::V, Order::First)?;
    let p_uu = diff(phi, Dir::U, Order::Second)?;
    let p_vv = diff(phi, Dir::V, Order::Second)?;
    let p_uv = diff(phi, Dir::V, Order::Mixed(Dir::U))?;

    let n = grid.len();
    let mut out: Vec<Vec<f64>> = (0..6).map(|_| Vec::with_capacity(n * dim)).collect();
    let mut rad: Vec<Vec<f64>> = (0..6).map(|_| Vec::with_capacity(n)).collect();
    for idx in 0..n {
        let p = phi.node(idx);
        let d1 = [p_u.node(idx), p_v.node(idx)];
        let d2 = [[p_uu.node(idx), p_uv.node(idx)], [p_uv.node(idx), p_vv.node(idx)]];
        let r = dot(p, p).sqrt();
        if !(r > 1e-12) {
            return Err(Error::OriginCrossing { node: idx });
        }
        let ra = [dot(p, d1[0]) / r, dot(p, d1[1]) / r];
        let mut rab = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                rab[a][b] = (dot(d1[a], d1[b]) + dot(p, d2[a][b])) / r - ra[a] * ra[b] / r;
            }
        }
        let (r2, r3) = (r * r, r * r * r);
        for c in 0..dim {
            out[0].push(p[c] / r);
            for a in 0..2 {
                out[1 + a].push(d1[a][c] / r - p[c] * ra[a] / r2);
            }
            for (slot, (a, b)) in [(3, (0, 0)), (4, (0, 1)), (5, (1, 1))] {
                let v = d2[a][b][c] / r - (d1[a][c] * ra[b] + d1[b][c] * ra[a]) / r2 - p[c] * rab[a][b] / r2
                    + 2.0 * p[c] * ra[a] * ra[b] / r3;
                out[slot].push(v);
            }
        }
        for (slot, v) in [r, ra[0], ra[1], rab[0][0], rab[0][1], rab[1][1]].into_iter().enumerate() {
            rad[slot].push(v);
        }
    }
    let mut vf = out.into_iter().map(|v| VecField::from_raw(grid.clone(), dim, v));
    let mut sf = rad.into_iter().map(|v| ScalarField::from_raw(grid.clone(), v));
    let h = vf.next().unwrap();
    let h_u = vf.next().unwrap();
    let h_v = vf.next().unwrap();
    let h_uu = vf.next().unwrap();
    let h_uv = vf.next().unwrap();
    let h_vv = vf.next().unwrap();
    let (e, f_metric, g_metric) = metric_of(&h_u, &h_v);
    check_immersed(&e, &f_metric, &g_metric)?;
    let radial = RadialJet {
        r: sf.next().unwrap(),
        r_u: sf.next().unwrap(),
        r_v: sf.next().unwrap(),
        r_uu: sf.next().unwrap(),
        r_uv: sf.next().unwrap(),
        r_vv: sf.next().unwrap(),
    };
    Ok((SurfaceJet { h, h_u, h_v, h_uu, h_uv, h_vv, e, f_metric, g_metric, kind: JetKind::Unknown }, radial))
}

impl SurfaceJet {
    /// Reassembles a jet from stored samples and derivatives.
    pub fn from_parts(derivs: [VecField; 6], kind: JetKind) -> Result<SurfaceJet> {
        let [h, h_u, h_v, h_uu, h_uv, h_vv] = derivs;
        require_2d(&h)?;
        let grid = h.grid();
        if [&h_u, &h_v, &h_uu, &h_uv, &h_vv].iter().any(|f| f.grid() != grid || f.dim() != h.dim()) {
            return Err(Error::Dimension("jet derivatives disagree with the samples".into()));
        }
        let (e, f_metric, g_metric) = metric_of(&h_u, &h_v);
        check_immersed(&e, &f_metric, &g_metric)?;
        Ok(SurfaceJet { h, h_u, h_v, h_uu, h_uv, h_vv, e, f_metric, g_metric, kind })
    }

    pub fn ambient_dim(&self) -> usize {
        self.h.dim()
    }

    pub fn len(&self) -> usize {
        self.h.grid().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Metric `[[E, F], [F, G]]` at a node.
    pub fn metric(&self, idx: usize) -> [[f64; 2]; 2] {
        let f = self.f_metric.get(idx);
        [[self.e.get(idx), f], [f, self.g_metric.get(idx)]]
    }

    /// `h_ab` at a node, `a, b in {0, 1}`.
    pub fn second(&self, idx: usize, a: usize, b: usize) -> &[f64] {
        match (a, b) {
            (0, 0) => self.h_uu.node(idx),
            (1, 1) => self.h_vv.node(idx),
            _ => self.h_uv.node(idx),
        }
    }

    pub fn first(&self, idx: usize, a: usize) -> &[f64] {
        if a == 0 {
            self.h_u.node(idx)
        } else {
            self.h_v.node(idx)
        }
    }

    /// Christoffel symbols `Gamma^k_ij` at a node, indexed `[k][i][j]`.
    pub fn christoffel_at(&self, idx: usize) -> Result<[[[f64; 2]; 2]; 2]> {
        let g = self.metric(idx);
        let inv = inverse2(&g).ok_or(Error::IllConditionedMetric { node: idx, cond: f64::INFINITY })?;
        let cond = cond2(&g);
        if cond > COND_LIMIT {
            return Err(Error::IllConditionedMetric { node: idx, cond });
        }
        let mut out = [[[0.0; 2]; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let low = [dot(self.second(idx, i, j), self.first(idx, 0)), dot(self.second(idx, i, j), self.first(idx, 1))];
                for k in 0..2 {
                    out[k][i][j] = inv[k][0] * low[0] + inv[k][1] * low[1];
                }
            }
        }
        Ok(out)
    }

    /// Component of `x` orthogonal to `span{h, h_u, h_v}` at a node.
    pub fn normal_part(&self, idx: usize, x: &[f64]) -> Vec<f64> {
        let basis = orthonormalize(&[self.h.node(idx), self.h_u.node(idx), self.h_v.node(idx)]);
        let mut y = x.to_vec();
        for b in &basis {
            let c = dot(&y, b);
            for (yi, bi) in y.iter_mut().zip(b) {
                *yi -= c * bi;
            }
        }
        y
    }
}

/// Gram-Schmidt on a short list of vectors, dropping near-dependent ones.
pub fn orthonormalize(vs: &[&[f64]]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(vs.len());
    for v in vs {
        let mut w = v.to_vec();
        for _ in 0..2 {
            for b in &out {
                let c = dot(&w, b);
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= c * bi;
                }
            }
        }
        let n = dot(&w, &w).sqrt();
        if n > 1e-12 * (1.0 + dot(v, v).sqrt()) {
            w.iter_mut().for_each(|x| *x /= n);
            out.push(w);
        }
    }
    out
}

pub(crate) fn inverse2(m: &[[f64; 2]; 2]) -> Option<[[f64; 2]; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some([[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]])
}

/// Spectral condition number of a symmetric 2x2 matrix.
fn cond2(m: &[[f64; 2]; 2]) -> f64 {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
    let (l1, l2) = ((0.5 * tr + disc).abs(), (0.5 * tr - disc).abs());
    let (hi, lo) = (l1.max(l2), l1.min(l2));
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// `|normal part of h_uv|` (real) or `|normal part of h_uu + h_vv|` (complex).
pub fn conjugate_residual(jet: &SurfaceJet, kind: Kind) -> ScalarField {
    let grid = jet.h.grid().clone();
    let values = (0..grid.len())
        .map(|idx| {
            let x: Vec<f64> = match kind {
                Kind::Real => jet.h_uv.node(idx).to_vec(),
                Kind::Complex => jet.h_uu.node(idx).iter().zip(jet.h_vv.node(idx)).map(|(a, b)| a + b).collect(),
            };
            let y = jet.normal_part(idx, &x);
            dot(&y, &y).sqrt()
        })
        .collect();
    ScalarField::from_raw(grid, values)
}

/// Real and complex Christoffel data of the chart.
pub fn christoffels(jet: &SurfaceJet, kind: Kind) -> Result<ConjugateData> {
    let grid = jet.h.grid().clone();
    let n = grid.len();
    let mut g1 = Vec::with_capacity(n);
    let mut g2 = Vec::with_capacity(n);
    let mut cre = Vec::with_capacity(n);
    let mut cim = Vec::with_capacity(n);
    for idx in 0..n {
        let c = jet.christoffel_at(idx)?;
        g1.push(c[0][0][1]);
        g2.push(c[1][0][1]);
        cre.push(0.25 * (c[0][0][0] + c[0][1][1]));
        cim.push(0.25 * (c[1][0][0] + c[1][1][1]));
    }
    let gamma1 = ScalarField::from_raw(grid.clone(), g1);
    let gamma2 = ScalarField::from_raw(grid.clone(), g2);
    let gamma_c_re = ScalarField::from_raw(grid.clone(), cre);
    let gamma_c_im = ScalarField::from_raw(grid.clone(), cim);
    let integ_residual = match kind {
        Kind::Real => {
            diff(&gamma1, Dir::U, Order::First)?.zip_map(&diff(&gamma2, Dir::V, Order::First)?, |a, b| a - b)
        }
        Kind::Complex => diff(&gamma_c_im, Dir::U, Order::First)?
            .zip_map(&diff(&gamma_c_re, Dir::V, Order::First)?, |a, b| 0.5 * (a - b)),
    };
    Ok(ConjugateData {
        kind,
        gamma1,
        gamma2,
        gamma_c_re,
        gamma_c_im,
        conj_residual: conjugate_residual(jet, kind),
        integ_residual,
    })
}

/// The one-form whose path integral gives `-log(mu/c)/2`.
pub fn mu_form(cdata: &ConjugateData) -> OneForm2 {
    match cdata.kind {
        Kind::Real => OneForm2 { comp_u: cdata.gamma2.clone(), comp_v: cdata.gamma1.clone() },
        Kind::Complex => OneForm2 {
            comp_u: cdata.gamma_c_re.map(|x| 2.0 * x),
            comp_v: cdata.gamma_c_im.map(|x| 2.0 * x),
        },
    }
}

/// Solves `d mu + 2 mu omega = 0` with `mu(base) = c`, base node (0, 0).
pub fn solve_mu(cdata: &ConjugateData, c: f64) -> Result<ScalarField> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Input(format!("scale {c} must be positive")));
    }
    let omega = mu_form(cdata);
    let phi = path_integrate(&omega, (0, 0), None).map_err(|e| match e {
        Error::NonClosedForm { residual, gate } => Error::NoSolution { residual, gate },
        other => other,
    })?;
    Ok(phi.map(|p| c * (-2.0 * p).exp()))
}

/// `M`, `k = sqrt(mu) h` and the residual of the normalized equation.
pub fn reduced_potential(jet: &SurfaceJet, cdata: &ConjugateData, mu: &ScalarField) -> Result<ReducedData> {
    let mu_u = diff(mu, Dir::U, Order::First)?;
    let mu_v = diff(mu, Dir::V, Order::First)?;
    let grid = mu.grid().clone();
    let n = grid.len();
    let m_values: Vec<f64> = match cdata.kind {
        Kind::Real => {
            let mu_uv = diff(mu, Dir::V, Order::Mixed(Dir::U))?;
            (0..n)
                .map(|i| {
                    let m = mu.get(i);
                    jet.f_metric.get(i) - mu_uv.get(i) / (2.0 * m) + mu_u.get(i) * mu_v.get(i) / (4.0 * m * m)
                })
                .collect()
        }
        Kind::Complex => {
            let lap = diff(mu, Dir::U, Order::Second)?.zip_map(&diff(mu, Dir::V, Order::Second)?, |a, b| a + b);
            (0..n)
                .map(|i| {
                    let m = mu.get(i);
                    let (a, b) = (mu_u.get(i), mu_v.get(i));
                    0.25 * (jet.e.get(i) + jet.g_metric.get(i)) - lap.get(i) / (8.0 * m) + (a * a + b * b) / (16.0 * m * m)
                })
                .collect()
        }
    };
    let m = ScalarField::from_raw(grid.clone(), m_values);
    let dim = jet.ambient_dim();
    let mut k = jet.h.clone();
    for idx in 0..n {
        let s = mu.get(idx).sqrt();
        k.node_mut(idx).iter_mut().take(dim).for_each(|x| *x *= s);
    }
    let form_residual = form_residual(&k, &m, cdata.kind)?;
    Ok(ReducedData { mu: mu.clone(), m, k, form_residual })
}

/// `|k_uv + M k|` or `|(k_uu + k_vv)/4 + M k|` per node.
pub fn form_residual(k: &VecField, m: &ScalarField, kind: Kind) -> Result<ScalarField> {
    let lead = match kind {
        Kind::Real => diff(k, Dir::V, Order::Mixed(Dir::U))?,
        Kind::Complex => {
            let a = diff(k, Dir::U, Order::Second)?;
            let b = diff(k, Dir::V, Order::Second)?;
            let vals = a.values().iter().zip(b.values()).map(|(x, y)| 0.25 * (x + y)).collect();
            VecField::from_raw(k.grid().clone(), k.dim(), vals)
        }
    };
    let values = (0..k.grid().len())
        .map(|idx| {
            let mm = m.get(idx);
            lead.node(idx).iter().zip(k.node(idx)).map(|(a, b)| (a + mm * b).powi(2)).sum::<f64>().sqrt()
        })
        .collect();
    Ok(ScalarField::from_raw(k.grid().clone(), values))
}

/// Chooses the candidate kind by comparing the two conjugate residuals.
pub fn candidate_kind(jet: &SurfaceJet) -> JetKind {
    let gate = 50.0 * jet.h.grid().h_max().powi(2);
    let real = conjugate_residual(jet, Kind::Real).sup_norm();
    let cplx = conjugate_residual(jet, Kind::Complex).sup_norm();
    if real <= gate {
        JetKind::HyperbolicCandidate
    } else if cplx <= gate {
        JetKind::EllipticCandidate
    } else {
        JetKind::Unknown
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, Grid};

    fn clifford(g: &Grid) -> VecField {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        VecField::sample(g, 4, |u, v, _| vec![s * u.cos(), s * u.sin(), s * v.cos(), s * v.sin()])
    }

    fn grid() -> Grid {
        make_grid((-0.5, 0.5), (-0.5, 0.5), 33, 33).unwrap()
    }

    fn gate(g: &Grid) -> f64 {
        10.0 * g.h_max().powi(2)
    }

    #[test]
    fn clifford_metric() {
        let g = grid();
        let jet = build_jet(&clifford(&g)).unwrap();
        for idx in (0..g.len()).filter(|&i| g.is_interior(i)) {
            assert!((jet.e.get(idx) - 0.5).abs() < gate(&g));
            assert!((jet.g_metric.get(idx) - 0.5).abs() < gate(&g));
            assert!(jet.f_metric.get(idx).abs() < 1e-14);
        }
    }

    #[test]
    fn equator_is_not_immersed() {
        let g = grid();
        let f = VecField::sample(&g, 4, |u, _, _| vec![u.cos(), u.sin(), 0.0, 0.0]);
        assert!(matches!(build_jet(&f), Err(Error::NotImmersed { .. })));
    }

    #[test]
    fn scaled_samples_are_not_spherical() {
        let g = grid();
        assert!(matches!(build_jet(&clifford(&g).scale(2.0)), Err(Error::NotSpherical(_))));
    }

    #[test]
    fn clifford_christoffels_vanish() {
        let g = grid();
        let jet = build_jet(&clifford(&g)).unwrap();
        let cd = christoffels(&jet, Kind::Real).unwrap();
        assert!(cd.gamma1.sup_norm() < gate(&g));
        assert!(cd.gamma2.sup_norm() < gate(&g));
        assert!(cd.conj_residual.sup_norm() < gate(&g), "{} vs {}", cd.conj_residual.sup_norm(), gate(&g));
        // the Clifford torus is minimal, so its coordinate net is complex-conjugate as well
        let complex = conjugate_residual(&jet, Kind::Complex);
        assert!(complex.sup_norm() < gate(&g), "{}", complex.sup_norm());
    }

    /// Christoffels of `p / |p|` with `p = (u, v, 1, c)` from the closed-form metric
    /// `g_ab = delta_ab / r^2 - x_a x_b / r^4`, `r^2 = u^2 + v^2 + 1 + c^2`.
    fn graph_oracle(u: f64, v: f64, c: f64) -> [[[f64; 2]; 2]; 2] {
        let x = [u, v];
        let r2 = u * u + v * v + 1.0 + c * c;
        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        let g = |a: usize, b: usize| d(a, b) / r2 - x[a] * x[b] / (r2 * r2);
        let dg = |cc: usize, a: usize, b: usize| {
            -2.0 * x[cc] * d(a, b) / (r2 * r2) - (d(a, cc) * x[b] + x[a] * d(b, cc)) / (r2 * r2)
                + 4.0 * x[a] * x[b] * x[cc] / (r2 * r2 * r2)
        };
        let gm = [[g(0, 0), g(0, 1)], [g(1, 0), g(1, 1)]];
        let inv = inverse2(&gm).unwrap();
        let mut out = [[[0.0; 2]; 2]; 2];
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    out[k][i][j] = (0..2)
                        .map(|l| 0.5 * inv[k][l] * (dg(i, j, l) + dg(j, i, l) - dg(l, i, j)))
                        .sum();
                }
            }
        }
        out
    }

    #[test]
    fn graph_christoffels_match_metric_oracle() {
        // small sphere of latitude 0.6, graph coordinates; the cosine factor
        // rescales the metric and leaves the Christoffels of the graph metric
        let (c, rho) = (0.0f64, 0.6f64);
        let g = make_grid((0.1, 0.4), (-0.2, 0.1), 33, 33).unwrap();
        let h = VecField::sample(&g, 4, |u, v, _| {
            let r = (u * u + v * v + 1.0).sqrt() / rho.cos();
            vec![u / r, v / r, 1.0 / r, rho.sin()]
        });
        let jet = build_jet(&h).unwrap();
        for idx in 0..g.len() {
            let [u, v, _] = g.point(idx);
            let got = jet.christoffel_at(idx).unwrap();
            let want = graph_oracle(u, v, c);
            for k in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        assert!((got[k][i][j] - want[k][i][j]).abs() < gate(&g), "node {idx}");
                    }
                }
            }
        }
        let cd = christoffels(&jet, Kind::Real).unwrap();
        assert!(cd.conj_residual.sup_norm() > 1e-3, "{} vs {}", cd.conj_residual.sup_norm(), 1e-3);
    }

    #[test]
    fn minimal_grid_jet() {
        let g = make_grid((0.0, 0.4), (0.0, 0.4), 5, 5).unwrap();
        let jet = build_jet(&clifford(&g)).unwrap();
        assert!(christoffels(&jet, Kind::Real).is_ok());
    }

    #[test]
    fn clifford_mu_and_potential() {
        let g = grid();
        let jet = build_jet(&clifford(&g)).unwrap();
        let cd = christoffels(&jet, Kind::Real).unwrap();
        let mu = solve_mu(&cd, 1.0).unwrap();
        assert!(mu.values().iter().all(|m| (m - 1.0).abs() < 1e-10));
        let mu2 = solve_mu(&cd, 2.0).unwrap();
        assert!(mu.values().iter().zip(mu2.values()).all(|(a, b)| *b == 2.0 * a));
        let red = reduced_potential(&jet, &cd, &mu).unwrap();
        assert!(red.m.sup_norm() < gate(&g), "{} vs {}", red.m.sup_norm(), gate(&g));
        assert!(red.form_residual.sup_norm() < gate(&g), "{} vs {}", red.form_residual.sup_norm(), gate(&g));
    }

    #[test]
    fn constant_mu_gives_metric_potential() {
        let g = grid();
        let jet = build_jet(&clifford(&g)).unwrap();
        let cd = christoffels(&jet, Kind::Real).unwrap();
        let mu = ScalarField::constant(&g, 1.0);
        let red = reduced_potential(&jet, &cd, &mu).unwrap();
        assert_eq!(red.m.values(), jet.f_metric.values());
    }

    #[test]
    fn nonintegrable_metric_has_no_mu() {
        let g = make_grid((0.2, 1.2), (0.2, 1.2), 33, 33).unwrap();
        let h = VecField::sample(&g, 4, |u, v, _| {
            let x = [1.0, u, v, u * u * v];
            let r = x.iter().map(|a| a * a).sum::<f64>().sqrt();
            x.iter().map(|a| a / r).collect()
        });
        let jet = build_jet(&h).unwrap();
        let cd = christoffels(&jet, Kind::Real).unwrap();
        assert!(cd.integ_residual.interior_sup() > 0.1, "{} vs {}", cd.integ_residual.interior_sup(), 0.1);
        assert!(matches!(solve_mu(&cd, 1.0), Err(Error::NoSolution { .. })));
    }

    /// `k = (1, u, v, u^3 + v^2)` solves `k_uv = 0`; the recovered `mu` is `|k|^2` up to scale.
    #[test]
    fn converse_from_separable_solution() {
        let g = make_grid((0.0, 0.6), (0.0, 0.6), 41, 41).unwrap();
        let k = |u: f64, v: f64| [1.0, u, v, u * u * u + v * v];
        let h = VecField::sample(&g, 4, |u, v, _| {
            let x = k(u, v);
            let r = x.iter().map(|a| a * a).sum::<f64>().sqrt();
            x.iter().map(|a| a / r).collect()
        });
        let jet = build_jet(&h).unwrap();
        let cd = christoffels(&jet, Kind::Real).unwrap();
        let gate50 = 50.0 * g.h_max().powi(2);
        assert!(cd.conj_residual.sup_norm() < gate50, "{} vs {}", cd.conj_residual.sup_norm(), gate50);
        assert!(cd.integ_residual.interior_sup() < gate50, "{} vs {}", cd.integ_residual.interior_sup(), gate50);
        let mu = solve_mu(&cd, 1.0).unwrap();
        for idx in 0..g.len() {
            let [u, v, _] = g.point(idx);
            let want: f64 = k(u, v).iter().map(|a| a * a).sum();
            assert!((mu.get(idx) - want).abs() < gate50, "node {idx}");
        }
        let red = reduced_potential(&jet, &cd, &mu).unwrap();
        // M carries second differences of the integrated mu: downstream gate
        let gate100 = 2.0 * gate50;
        assert!(red.form_residual.interior_sup() < gate100, "{}", red.form_residual.interior_sup());
        assert!(red.m.interior_sup() < gate100, "{}", red.m.interior_sup());
    }

    #[test]
    fn converse_complex_harmonic() {
        // k = (1, u, v, uv) is harmonic, so M = 0 in the complex equation
        let g = make_grid((0.0, 0.6), (0.0, 0.6), 41, 41).unwrap();
        let k = |u: f64, v: f64| [1.0, u, v, u * v];
        let h = VecField::sample(&g, 4, |u, v, _| {
            let x = k(u, v);
            let r = x.iter().map(|a| a * a).sum::<f64>().sqrt();
            x.iter().map(|a| a / r).collect()
        });
        let jet = build_jet(&h).unwrap();
        let cd = christoffels(&jet, Kind::Complex).unwrap();
        let gate50 = 50.0 * g.h_max().powi(2);
        assert!(cd.conj_residual.sup_norm() < gate50, "{} vs {}", cd.conj_residual.sup_norm(), gate50);
        assert!(cd.integ_residual.interior_sup() < gate50, "{} vs {}", cd.integ_residual.interior_sup(), gate50);
        let mu = solve_mu(&cd, 1.0).unwrap();
        for idx in 0..g.len() {
            let [u, v, _] = g.point(idx);
            let want: f64 = k(u, v).iter().map(|a| a * a).sum();
            assert!((mu.get(idx) - want).abs() < gate50, "node {idx}");
        }
        let red = reduced_potential(&jet, &cd, &mu).unwrap();
        assert!(red.m.interior_sup() < gate50, "{} vs {}", red.m.interior_sup(), gate50);
        assert!(red.form_residual.interior_sup() < gate50, "{} vs {}", red.form_residual.interior_sup(), gate50);
    }

    #[test]
    fn homogeneous_jet_matches_fd_jet() {
        let g = make_grid((0.0, 0.5), (0.0, 0.5), 33, 33).unwrap();
        let phi = VecField::sample(&g, 4, |u, v, _| vec![1.0 + u, u, v, u * v + 0.3]);
        let (jet, rad) = homogeneous_jet(&phi).unwrap();
        let h = VecField::sample(&g, 4, |u, v, _| {
            let x = [1.0 + u, u, v, u * v + 0.3];
            let r = x.iter().map(|a| a * a).sum::<f64>().sqrt();
            x.iter().map(|a| a / r).collect()
        });
        let fd = build_jet(&h).unwrap();
        let gate50 = 50.0 * g.h_max().powi(2);
        for (a, b) in [(&jet.h_u, &fd.h_u), (&jet.h_uv, &fd.h_uv), (&jet.h_vv, &fd.h_vv)] {
            assert!(a.values().iter().zip(b.values()).all(|(x, y)| (x - y).abs() < gate50));
        }
        assert!((rad.r.get(0) - (1.0f64 + 0.09).sqrt()).abs() < 1e-14);
    }
}
