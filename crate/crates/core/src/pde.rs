//! Solvers for the characteristic equation `phi_{z1 z2} + M phi = 0`:
//! Goursat marching in characteristic coordinates (`phi_uv + M phi = 0`) and
//! a five-point Dirichlet solve in isothermal ones (`phi_uu + phi_vv + 4 M phi = 0`).

use crate::calculus::{diff, Order};
use crate::error::{Error, Result};
use crate::field::{dot, ScalarField, VecField};
use crate::grid::{Dir, Grid};
use crate::linalg::BandMatrix;
use crate::scalar::Real;
use crate::surface::Kind;

/// Characteristic data for `phi_uv + M phi = 0` on the lower-left corner lines.
#[derive(Debug, Clone)]
pub struct GoursatProblem<T = f64> {
    m: ScalarField<T>,
    /// `phi(u, v0)`, one value per u-node.
    a: Vec<T>,
    /// `phi(u0, v)`, one value per v-node.
    b: Vec<T>,
}

impl<T: Real> GoursatProblem<T> {
    pub fn new(m: ScalarField<T>, a: Vec<T>, b: Vec<T>) -> Result<Self> {
        let grid = m.grid();
        if grid.dim() != 2 {
            return Err(Error::Dimension("Goursat data lives on a 2-D grid".into()));
        }
        if a.len() != grid.n(Dir::U) || b.len() != grid.n(Dir::V) {
            return Err(Error::Dimension(format!(
                "edge lengths {}x{} do not match grid {}x{}",
                a.len(),
                b.len(),
                grid.n(Dir::U),
                grid.n(Dir::V)
            )));
        }
        if (a[0] - b[0]).abs() > T::lit(1e-12) {
            return Err(Error::Input(format!(
                "corner values disagree: a(u0) = {:?}, b(v0) = {:?}",
                a[0], b[0]
            )));
        }
        if a.iter().chain(&b).any(|x| !x.is_finite()) {
            return Err(Error::Input("non-finite characteristic data".into()));
        }
        Ok(GoursatProblem { m, a, b })
    }

    /// Edge data sampled from functions of one variable.
    pub fn from_fns(m: ScalarField<T>, a: impl Fn(f64) -> f64, b: impl Fn(f64) -> f64) -> Result<Self> {
        let grid = m.grid().clone();
        let au = grid.axis(Dir::U)?.coords().into_iter().map(|u| T::lit(a(u))).collect();
        let bv = grid.axis(Dir::V)?.coords().into_iter().map(|v| T::lit(b(v))).collect();
        GoursatProblem::new(m, au, bv)
    }

    pub fn m(&self) -> &ScalarField<T> {
        &self.m
    }
}

/// Marches the box rule from the corner `(u0, v0)`.
///
/// Each cell solves `phi_ij - phi_{i-1,j} - phi_{i,j-1} + phi_{i-1,j-1}
/// = -hu hv avg(M phi)` with the unknown corner taken implicitly.
pub fn solve_goursat<T: Real>(prob: &GoursatProblem<T>) -> Result<ScalarField<T>> {
    let grid = prob.m.grid().clone();
    let (nu, nv) = (grid.n(Dir::U), grid.n(Dir::V));
    let q = T::lit(grid.spacing(Dir::U) * grid.spacing(Dir::V) * 0.25);
    let m = prob.m.values();
    let mut phi = vec![T::zero(); grid.len()];
    phi[..nu].copy_from_slice(&prob.a);
    for j in 0..nv {
        phi[j * nu] = prob.b[j];
    }
    for j in 1..nv {
        for i in 1..nu {
            let (c, w, s, sw) = (j * nu + i, j * nu + i - 1, (j - 1) * nu + i, (j - 1) * nu + i - 1);
            let known = m[w] * phi[w] + m[s] * phi[s] + m[sw] * phi[sw];
            let denom = T::one() + q * m[c];
            if denom.abs() < T::lit(1e-12) {
                return Err(Error::Input(format!("box rule singular at node {c} (hu hv M / 4 = -1)")));
            }
            phi[c] = (phi[w] + phi[s] - phi[sw] - q * known) / denom;
        }
    }
    Ok(ScalarField::from_raw(grid, phi))
}

/// Dirichlet values on the four edges of a 2-D grid.
#[derive(Debug, Clone)]
pub struct Dirichlet<T = f64> {
    /// `v = v_lo`, one value per u-node.
    pub south: Vec<T>,
    /// `v = v_hi`, one value per u-node.
    pub north: Vec<T>,
    /// `u = u_lo`, one value per v-node.
    pub west: Vec<T>,
    /// `u = u_hi`, one value per v-node.
    pub east: Vec<T>,
}

impl<T: Real> Dirichlet<T> {
    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let (ua, va) = (grid.axis(Dir::U)?, grid.axis(Dir::V)?);
        let us = ua.coords();
        let vs = va.coords();
        Ok(Dirichlet {
            south: us.iter().map(|&u| T::lit(f(u, va.lo))).collect(),
            north: us.iter().map(|&u| T::lit(f(u, va.hi))).collect(),
            west: vs.iter().map(|&v| T::lit(f(ua.lo, v))).collect(),
            east: vs.iter().map(|&v| T::lit(f(ua.hi, v))).collect(),
        })
    }

    /// Boundary trace of a field.
    pub fn from_field(field: &ScalarField<T>) -> Self {
        let g = field.grid();
        let (nu, nv) = (g.n(Dir::U), g.n(Dir::V));
        Dirichlet {
            south: (0..nu).map(|i| field.at(i, 0, 0)).collect(),
            north: (0..nu).map(|i| field.at(i, nv - 1, 0)).collect(),
            west: (0..nv).map(|j| field.at(0, j, 0)).collect(),
            east: (0..nv).map(|j| field.at(nu - 1, j, 0)).collect(),
        }
    }

    fn check(&self, grid: &Grid) -> Result<()> {
        let (nu, nv) = (grid.n(Dir::U), grid.n(Dir::V));
        if self.south.len() != nu || self.north.len() != nu || self.west.len() != nv || self.east.len() != nv {
            return Err(Error::Dimension("Dirichlet edge lengths do not match the grid".into()));
        }
        if [&self.south, &self.north, &self.west, &self.east].iter().any(|e| e.iter().any(|x| !x.is_finite())) {
            return Err(Error::Input("non-finite boundary value".into()));
        }
        Ok(())
    }
}

/// Relative threshold of the resonance guard.
pub const RESONANCE_RATIO: f64 = 1e-10;

/// Solves `phi_uu + phi_vv + 4 M phi = 0` with Dirichlet data.
pub fn solve_elliptic<T: Real>(m: &ScalarField<T>, boundary: &Dirichlet<T>) -> Result<ScalarField<T>> {
    let grid = m.grid().clone();
    if grid.dim() != 2 {
        return Err(Error::Dimension("elliptic solve needs a 2-D grid".into()));
    }
    boundary.check(&grid)?;
    let (nu, nv) = (grid.n(Dir::U), grid.n(Dir::V));
    let mut phi = vec![T::zero(); grid.len()];
    for i in 0..nu {
        phi[i] = boundary.south[i];
        phi[(nv - 1) * nu + i] = boundary.north[i];
    }
    for j in 0..nv {
        phi[j * nu] = boundary.west[j];
        phi[j * nu + nu - 1] = boundary.east[j];
    }
    let (iu, iv) = (nu - 2, nv - 2);
    let n = iu * iv;
    let cu = T::lit(1.0 / grid.spacing(Dir::U).powi(2));
    let cv = T::lit(1.0 / grid.spacing(Dir::V).powi(2));
    let four = T::lit(4.0);
    let mut a = BandMatrix::zeros(n, iu, iu);
    let mut rhs = vec![T::zero(); n];
    let unknown = |i: usize, j: usize| (j - 1) * iu + (i - 1);
    for j in 1..nv - 1 {
        for i in 1..nu - 1 {
            let row = unknown(i, j);
            a.add(row, row, -T::lit(2.0) * (cu + cv) + four * m.at(i, j, 0));
            for (ni, nj, c) in [(i - 1, j, cu), (i + 1, j, cu), (i, j - 1, cv), (i, j + 1, cv)] {
                if ni == 0 || nj == 0 || ni == nu - 1 || nj == nv - 1 {
                    rhs[row] -= c * phi[nj * nu + ni];
                } else {
                    a.add(row, unknown(ni, nj), c);
                }
            }
        }
    }
    let norm = a.norm_inf();
    let lu = a.factor().ok_or(Error::Resonance { sigma_min: 0.0, norm: norm.as_f64() })?;
    let sigma = lu.sigma_min_estimate(30);
    if sigma < T::lit(RESONANCE_RATIO) * norm {
        return Err(Error::Resonance { sigma_min: sigma.as_f64(), norm: norm.as_f64() });
    }
    let x = lu.solve(&rhs);
    for j in 1..nv - 1 {
        for i in 1..nu - 1 {
            phi[j * nu + i] = x[unknown(i, j)];
        }
    }
    Ok(ScalarField::from_raw(grid, phi))
}

/// `|phi_uv + M phi|` (real) or `|(phi_uu + phi_vv)/4 + M phi|` (complex) at
/// interior nodes; boundary nodes are reported as zero.
pub fn pde_residual<T: Real>(field: &ScalarField<T>, m: &ScalarField<T>, kind: Kind) -> Result<ScalarField<T>> {
    let lead = match kind {
        Kind::Real => diff(field, Dir::V, Order::Mixed(Dir::U))?,
        Kind::Complex => {
            let quarter = T::lit(0.25);
            diff(field, Dir::U, Order::Second)?.zip_map(&diff(field, Dir::V, Order::Second)?, |a, b| quarter * (a + b))
        }
    };
    let grid = field.grid();
    let mut out = lead.zip_map(&field.zip_map(m, |p, q| p * q), |a, b| (a + b).abs());
    for (idx, v) in out.values_mut().iter_mut().enumerate() {
        if !grid.is_interior(idx) {
            *v = T::zero();
        }
    }
    Ok(out)
}

/// Data for one component of a family.
#[derive(Debug, Clone)]
pub enum Seed {
    /// `phi(u, v0)` and `phi(u0, v)` for the real kind.
    Characteristic { a: Vec<f64>, b: Vec<f64> },
    /// Four edges for the complex kind.
    Dirichlet(Dirichlet<f64>),
}

/// The functions `phi_0, ..., phi_{n+1}` solving one equation with a shared `M`.
#[derive(Debug, Clone)]
pub struct PhiFamily {
    pub phi0: ScalarField,
    /// Components `phi_1 ... phi_{n+1}`.
    pub phi: VecField,
    pub kind: Kind,
    pub m: ScalarField,
}

/// Solves one component of a family.
pub fn solve_component(m: &ScalarField, kind: Kind, seed: &Seed) -> Result<ScalarField> {
    match (kind, seed) {
        (Kind::Real, Seed::Characteristic { a, b }) => {
            solve_goursat(&GoursatProblem::new(m.clone(), a.clone(), b.clone())?)
        }
        (Kind::Complex, Seed::Dirichlet(d)) => solve_elliptic(m, d),
        _ => Err(Error::Input("seed type does not match the equation kind".into())),
    }
}

/// Solves `n + 2` components and validates the immersion hypotheses.
pub fn build_phi_family(m: &ScalarField, kind: Kind, seeds: &[Seed], n: usize) -> Result<PhiFamily> {
    if n < 3 {
        return Err(Error::Dimension(format!("ambient dimension n + 1 = {} below 4", n + 1)));
    }
    if seeds.len() != n + 2 {
        return Err(Error::Dimension(format!("{} seeds for n = {n} (need {})", seeds.len(), n + 2)));
    }
    let comps = seeds.iter().map(|s| solve_component(m, kind, s)).collect::<Result<Vec<_>>>()?;
    let phi0 = comps[0].clone();
    let phi = VecField::from_components(&comps[1..])?;
    check_immersion(&phi)?;
    Ok(PhiFamily { phi0, phi, kind, m: m.clone() })
}

/// Rank-2 Jacobian and `phi != 0` at every node.
pub fn check_immersion(phi: &VecField) -> Result<()> {
    let pu = diff(phi, Dir::U, Order::First)?;
    let pv = diff(phi, Dir::V, Order::First)?;
    for idx in 0..phi.grid().len() {
        let p = phi.node(idx);
        if dot(p, p).sqrt() <= 1e-12 {
            return Err(Error::OriginCrossing { node: idx });
        }
        let (a, b) = (pu.node(idx), pv.node(idx));
        let (e, f, g) = (dot(a, a), dot(a, b), dot(b, b));
        if !(e * g - f * f > 1e-10 * e * g) || e * g == 0.0 {
            return Err(Error::NotAnImmersion { node: idx });
        }
    }
    Ok(())
}

impl PhiFamily {
    /// Largest interior PDE residual over all components.
    pub fn max_residual(&self) -> Result<f64> {
        let mut worst = pde_residual(&self.phi0, &self.m, self.kind)?.sup_norm();
        for c in 0..self.phi.dim() {
            worst = worst.max(pde_residual(&self.phi.component(c), &self.m, self.kind)?.sup_norm());
        }
        Ok(worst)
    }

    /// `50 h^2 (1 + sup|M|)`.
    pub fn residual_gate(&self) -> f64 {
        50.0 * self.m.grid().h_max().powi(2) * (1.0 + self.m.sup_norm())
    }

    /// All `n + 2` components, `phi_0` first.
    pub fn components(&self) -> Vec<ScalarField> {
        let mut out = vec![self.phi0.clone()];
        out.extend((0..self.phi.dim()).map(|c| self.phi.component(c)));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    fn bessel_series() -> f64 {
        let mut s = 0.0;
        let mut fact = 1.0;
        for k in 0..20 {
            if k > 0 {
                fact *= k as f64;
            }
            s += (-1f64).powi(k) / (fact * fact);
        }
        s
    }

    fn corner_error(n: usize) -> f64 {
        let g = make_grid((0.0, 1.0), (0.0, 1.0), n, n).unwrap();
        let prob = GoursatProblem::from_fns(ScalarField::constant(&g, 1.0), |_| 1.0, |_| 1.0).unwrap();
        let phi = solve_goursat(&prob).unwrap();
        (phi.at(n - 1, n - 1, 0) - bessel_series()).abs()
    }

    #[test]
    fn goursat_additive_solution_is_exact() {
        let g = make_grid((0.0, 1.0), (0.0, 1.0), 17, 13).unwrap();
        let prob = GoursatProblem::from_fns(ScalarField::constant(&g, 0.0), |u| u, |v| v * v).unwrap();
        let phi = solve_goursat(&prob).unwrap();
        for idx in 0..g.len() {
            let [u, v, _] = g.point(idx);
            assert!((phi.get(idx) - (u + v * v)).abs() < 1e-14);
        }
    }

    #[test]
    fn goursat_bessel_oracle_and_order() {
        assert!((bessel_series() - 0.22389).abs() < 1e-5);
        let e129 = corner_error(129);
        assert!(e129 < 1e-3, "{e129}");
        let ratio = corner_error(65) / e129;
        assert!((3.2..=4.8).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn goursat_mismatched_corner_rejected() {
        let g = make_grid((0.0, 1.0), (0.0, 1.0), 9, 9).unwrap();
        let r = GoursatProblem::from_fns(ScalarField::<f64>::constant(&g, 0.0), |_| 1.0, |_| 2.0);
        assert!(matches!(r, Err(Error::Input(_))));
    }

    #[test]
    fn goursat_residual_within_gate() {
        let g = make_grid((0.0, 1.0), (0.0, 1.0), 65, 65).unwrap();
        let m: ScalarField = ScalarField::sample(&g, |u, v, _| 1.0 + 0.5 * u * v);
        let prob = GoursatProblem::from_fns(m.clone(), |u| 1.0 + u.sin(), |v| (2.0 * v).cos()).unwrap();
        let phi = solve_goursat(&prob).unwrap();
        let res = pde_residual(&phi, &m, Kind::Real).unwrap().sup_norm();
        assert!(res <= 50.0 * g.h_max().powi(2) * (1.0 + m.sup_norm()), "{res}");
    }

    #[test]
    fn goursat_in_f32() {
        let g = make_grid((0.0, 1.0), (0.0, 1.0), 33, 33).unwrap();
        let prob = GoursatProblem::from_fns(ScalarField::<f32>::constant(&g, 1.0), |_| 1.0, |_| 1.0).unwrap();
        let phi = solve_goursat(&prob).unwrap();
        assert!((phi.at(32, 32, 0) as f64 - bessel_series()).abs() < 1e-2);
    }

    #[test]
    fn elliptic_helmholtz_sine() {
        let g = make_grid((0.0, 1.0), (0.0, 1.0), 33, 33).unwrap();
        let m = ScalarField::constant(&g, 0.25);
        let phi = solve_elliptic(&m, &Dirichlet::from_fn(&g, |u, _| u.sin()).unwrap()).unwrap();
        for idx in 0..g.len() {
            let u = g.point(idx)[0];
            assert!((phi.get(idx) - u.sin()).abs() < 50.0 * g.h_max().powi(2));
        }
        let res = pde_residual(&phi, &m, Kind::Complex).unwrap().sup_norm();
        assert!(res < 50.0 * g.h_max().powi(2));
    }

    #[test]
    fn elliptic_quadratic_harmonic_is_exact() {
        let g = make_grid((-1.0, 1.0), (-0.5, 1.0), 21, 17).unwrap();
        let m = ScalarField::constant(&g, 0.0);
        let phi = solve_elliptic(&m, &Dirichlet::from_fn(&g, |u, v| u * u - v * v).unwrap()).unwrap();
        for idx in 0..g.len() {
            let [u, v, _] = g.point(idx);
            assert!((phi.get(idx) - (u * u - v * v)).abs() < 1e-12);
        }
    }

    #[test]
    fn elliptic_resonance_detected() {
        // lowest Dirichlet eigenvalue of the discrete Laplacian on the unit square
        let n = 17;
        let g = make_grid((0.0, 1.0), (0.0, 1.0), n, n).unwrap();
        let h = g.spacing(Dir::U);
        let lam = 2.0 * 4.0 / (h * h) * (std::f64::consts::PI * h / 2.0).sin().powi(2);
        let m = ScalarField::constant(&g, lam / 4.0);
        let r = solve_elliptic(&m, &Dirichlet::from_fn(&g, |u, v| u + v).unwrap());
        assert!(matches!(r, Err(Error::Resonance { .. })), "{r:?}");
    }

    #[test]
    fn residual_of_simple_solutions() {
        let g = make_grid((0.0, 1.0), (0.0, 1.0), 17, 17).unwrap();
        let phi = ScalarField::sample(&g, |u, v, _| u + v);
        let zero = ScalarField::constant(&g, 0.0);
        assert!(pde_residual(&phi, &zero, Kind::Real).unwrap().sup_norm() < 1e-12);
        let s = ScalarField::sample(&g, |u, _, _| u.sin());
        let quarter = ScalarField::constant(&g, 0.25);
        assert!(pde_residual(&s, &quarter, Kind::Complex).unwrap().sup_norm() < 50.0 * g.h_max().powi(2));
    }

    fn edges(g: &Grid, f: impl Fn(f64, f64) -> f64) -> Seed {
        let us = g.axis(Dir::U).unwrap().coords();
        let vs = g.axis(Dir::V).unwrap().coords();
        let (u0, v0) = (us[0], vs[0]);
        Seed::Characteristic { a: us.iter().map(|&u| f(u, v0)).collect(), b: vs.iter().map(|&v| f(u0, v)).collect() }
    }

    #[test]
    fn clifford_family() {
        let g = make_grid((-0.5, 0.5), (-0.5, 0.5), 33, 33).unwrap();
        let m = ScalarField::constant(&g, 0.0);
        let seeds = vec![
            edges(&g, |u, _| u.cos()),
            edges(&g, |u, _| u.cos()),
            edges(&g, |u, _| u.sin()),
            edges(&g, |_, v| v.cos()),
            edges(&g, |_, v| v.sin()),
        ];
        let fam = build_phi_family(&m, Kind::Real, &seeds, 3).unwrap();
        assert!(fam.phi.norms().values().iter().all(|r| (r * r - 2.0).abs() < 1e-12));
        assert!(fam.max_residual().unwrap() <= fam.residual_gate());
    }

    #[test]
    fn duplicated_component_is_not_an_immersion() {
        let g = make_grid((-0.5, 0.5), (-0.5, 0.5), 17, 17).unwrap();
        let m = ScalarField::constant(&g, 0.0);
        let seeds = vec![
            edges(&g, |u, _| u.cos()),
            edges(&g, |u, v| u + v),
            edges(&g, |u, v| u + v),
            edges(&g, |_, _| 1.0),
            edges(&g, |_, _| 2.0),
        ];
        assert!(matches!(build_phi_family(&m, Kind::Real, &seeds, 3), Err(Error::NotAnImmersion { .. })));
    }

    #[test]
    fn random_polynomial_family() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let g = make_grid((0.0, 1.0), (0.0, 1.0), 65, 65).unwrap();
        let m = ScalarField::constant(&g, 1.0);
        let seeds: Vec<Seed> = (0..5)
            .map(|_| {
                let c: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
                edges(&g, move |u, v| c[0] + c[1] * u + c[2] * u * u + c[3] * v + c[4] * v * v)
            })
            .collect();
        let fam = build_phi_family(&m, Kind::Real, &seeds, 3).unwrap();
        assert!(fam.max_residual().unwrap() <= 50.0 * g.h_max().powi(2) * 2.0);
    }
}
