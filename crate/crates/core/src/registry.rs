//! Built-in examples generated analytically at a requested resolution.

use crate::error::{Error, Result};
use crate::field::{ScalarField, VecField};
use crate::grid::{make_grid, Axis, Dir, Grid};
use crate::hypersurface::{from_samples, gauss_parametrize, pair_from_phi, pair_from_samples, HypersurfaceSample};
use crate::pde::{build_phi_family, Dirichlet, PhiFamily, Seed};
use crate::surface::Kind;

/// Names accepted by [`build_example`].
pub const EXAMPLES: [&str; 6] = ["clifford", "cone", "sphere-patch", "ruled-demo", "elliptic-demo", "cylinder"];

/// Node counts of an example chart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Resolution {
    pub nu: usize,
    pub nv: usize,
    pub ns: usize,
}

impl Default for Resolution {
    fn default() -> Self {
        Resolution { nu: 65, nv: 65, ns: 9 }
    }
}

/// An example hypersurface with the family it came from, when there is one.
#[derive(Debug, Clone)]
pub struct Example {
    pub name: String,
    pub family: Option<PhiFamily>,
    pub hyp: HypersurfaceSample,
}

pub type Expr = fn(f64, f64) -> f64;

/// Closed-form functions of `(u, v)` that configuration files may name.
pub const EXPRESSIONS: [(&str, Expr); 15] = [
    ("zero", |_, _| 0.0),
    ("one", |_, _| 1.0),
    ("quarter", |_, _| 0.25),
    ("u", |u, _| u),
    ("v", |_, v| v),
    ("uv", |u, v| u * v),
    ("two-u-plus-v", |u, v| 2.0 * (u + v)),
    ("u2-minus-v2", |u, v| u * u - v * v),
    ("cos-u", |u, _| u.cos()),
    ("sin-u", |u, _| u.sin()),
    ("cos-v", |_, v| v.cos()),
    ("sin-v", |_, v| v.sin()),
    ("sin-u-plus-v", |u, v| (u + v).sin()),
    ("clifford-phi0", clifford_phi0),
    ("elliptic-phi0", |u, v| 2.0 + u * u - v * v + 0.5 * u),
];

/// Looks up a named expression.
pub fn expression(id: &str) -> Result<Expr> {
    EXPRESSIONS.iter().find(|(name, _)| *name == id).map(|(_, f)| *f).ok_or_else(|| {
        let known: Vec<&str> = EXPRESSIONS.iter().map(|(n, _)| *n).collect();
        Error::Input(format!("unknown expression '{id}' (known: {})", known.join(", ")))
    })
}

/// Characteristic seed of a closed-form solution of `phi_uv + M phi = 0`.
pub fn characteristic_seed(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Seed {
    let us = grid.axes()[0].coords();
    let vs = grid.axes()[1].coords();
    let (u0, v0) = (us[0], vs[0]);
    Seed::Characteristic { a: us.iter().map(|&u| f(u, v0)).collect(), b: vs.iter().map(|&v| f(u0, v)).collect() }
}

/// Dirichlet seed of a closed-form solution of the complex equation.
pub fn dirichlet_seed(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Result<Seed> {
    Ok(Seed::Dirichlet(Dirichlet::from_fn(grid, f)?))
}

pub const CLIFFORD_RANGE: (f64, f64) = (-0.5, 0.5);
pub const CLIFFORD_FIBER: (f64, f64) = (-0.2, 0.2);

/// Support function of the Clifford example.
pub fn clifford_phi0(u: f64, v: f64) -> f64 {
    1.0 + 0.5 * u.sin() + 0.3 * v.cos()
}

/// `phi = (cos u, sin u, cos v, sin v)` with `M = 0`, real kind.
pub fn clifford_family(nu: usize, nv: usize, phi0: impl Fn(f64, f64) -> f64) -> Result<PhiFamily> {
    let grid = make_grid(CLIFFORD_RANGE, CLIFFORD_RANGE, nu, nv)?;
    let m = ScalarField::constant(&grid, 0.0);
    let seeds = vec![
        characteristic_seed(&grid, phi0),
        characteristic_seed(&grid, |u, _| u.cos()),
        characteristic_seed(&grid, |u, _| u.sin()),
        characteristic_seed(&grid, |_, v| v.cos()),
        characteristic_seed(&grid, |_, v| v.sin()),
    ];
    build_phi_family(&m, Kind::Real, &seeds, 3)
}

/// Clifford family with `|phi|^2 = 1 + cos^2 v + 4 (u + v)^2`: the last component is
/// replaced by the independent solution `2 (u + v)`.
pub fn non_bendable_family(nu: usize, nv: usize) -> Result<PhiFamily> {
    let grid = make_grid(CLIFFORD_RANGE, CLIFFORD_RANGE, nu, nv)?;
    let m = ScalarField::constant(&grid, 0.0);
    let seeds = vec![
        characteristic_seed(&grid, clifford_phi0),
        characteristic_seed(&grid, |u, _| u.cos()),
        characteristic_seed(&grid, |u, _| u.sin()),
        characteristic_seed(&grid, |_, v| v.cos()),
        characteristic_seed(&grid, |u, v| 2.0 * (u + v)),
    ];
    build_phi_family(&m, Kind::Real, &seeds, 3)
}

pub const ELLIPTIC_RANGE: (f64, f64) = (-0.3, 0.3);
pub const ELLIPTIC_FIBER: (f64, f64) = (-0.1, 0.1);

/// Harmonic family `phi = (1, u, v, uv)`, `phi_0 = 2 + u^2 - v^2 + 0.5 u`.
pub fn elliptic_family(nu: usize, nv: usize) -> Result<PhiFamily> {
    let grid = make_grid(ELLIPTIC_RANGE, ELLIPTIC_RANGE, nu, nv)?;
    let m = ScalarField::constant(&grid, 0.0);
    let seeds = vec![
        dirichlet_seed(&grid, |u, v| 2.0 + u * u - v * v + 0.5 * u)?,
        dirichlet_seed(&grid, |_, _| 1.0)?,
        dirichlet_seed(&grid, |u, _| u)?,
        dirichlet_seed(&grid, |_, v| v)?,
        dirichlet_seed(&grid, |u, v| u * v)?,
    ];
    build_phi_family(&m, Kind::Complex, &seeds, 3)
}

pub const RULED_KAPPA: f64 = 1.0;
pub const RULED_TAU: f64 = 0.5;

/// Rotation `exp(u K)` of the first three coordinates, `K e1 = k e2`,
/// `K e2 = -k e1 + t e3`, `K e3 = -t e2`; returns the images of `e1, e2, e3`.
pub fn ruled_frame(u: f64) -> [[f64; 4]; 3] {
    let (k, t) = (RULED_KAPPA, RULED_TAU);
    let w = (k * k + t * t).sqrt();
    // axis of K is (t, 0, k)/w; Rodrigues' formula for exp(u K)
    let axis = [t / w, 0.0, k / w];
    let (s, c) = ((w * u).sin(), (w * u).cos());
    let kmat = [[0.0, -k, 0.0], [k, 0.0, -t], [0.0, t, 0.0]];
    let mut out = [[0.0; 4]; 3];
    for (col, o) in out.iter_mut().enumerate() {
        for row in 0..3 {
            let id = if row == col { 1.0 } else { 0.0 };
            let k1 = kmat[row][col] / w;
            let k2 = axis[row] * axis[col] - id;
            o[row] = id + s * k1 + (1.0 - c) * k2;
        }
    }
    out
}

pub fn ruled_point(u: f64, v: f64, s: f64) -> [f64; 4] {
    let r = ruled_frame(u);
    let mut p = [0.0, 0.0, 0.0, u];
    for c in 0..4 {
        p[c] += v * r[1][c] + s * r[0][c];
    }
    p
}

pub fn ruled_normal(u: f64, v: f64) -> [f64; 4] {
    let r = ruled_frame(u);
    let q = (1.0 + v * v * RULED_TAU * RULED_TAU).sqrt();
    let mut n = r[2];
    n[3] -= v * RULED_TAU;
    n.map(|x| x / q)
}

fn sample3(grid: &Grid, f: impl Fn(f64, f64, f64) -> [f64; 4]) -> VecField {
    VecField::sample(grid, 4, |u, v, s| f(u, v, s).to_vec())
}

/// Builds a named example at the given resolution.
pub fn build_example(name: &str, res: Resolution) -> Result<Example> {
    let Resolution { nu, nv, ns } = res;
    let (family, hyp) = match name {
        "clifford" => {
            let fam = clifford_family(nu, nv, clifford_phi0)?;
            let hyp = gauss_parametrize(&pair_from_phi(&fam)?, CLIFFORD_FIBER, ns)?;
            (Some(fam), hyp)
        }
        "cone" => {
            let fam = clifford_family(nu, nv, |_, _| 0.0)?;
            let hyp = gauss_parametrize(&pair_from_phi(&fam)?, (0.3, 0.7), ns)?;
            (Some(fam), hyp)
        }
        "elliptic-demo" => {
            let fam = elliptic_family(nu, nv)?;
            let hyp = gauss_parametrize(&pair_from_phi(&fam)?, ELLIPTIC_FIBER, ns)?;
            (Some(fam), hyp)
        }
        "cylinder" => {
            let grid = make_grid((-0.5, 0.5), (-0.5, 0.5), nu, nv)?;
            let h = VecField::sample(&grid, 4, |u, v, _| vec![u.cos() * v.cos(), u.sin() * v.cos(), v.sin(), 0.0]);
            let gamma = ScalarField::sample(&grid, |u, _, _| 1.0 + 0.2 * u);
            let hyp = gauss_parametrize(&pair_from_samples(&h, &gamma)?, (-0.2, 0.2), ns)?;
            (None, hyp)
        }
        "sphere-patch" => {
            let grid = Grid::new3(Axis::new(-0.4, 0.4, nu)?, Axis::new(-0.4, 0.4, nv)?, Axis::new(-0.4, 0.4, ns)?)?;
            let f = |u: f64, v: f64, s: f64| {
                [s.cos() * v.cos() * u.cos(), s.cos() * v.cos() * u.sin(), s.cos() * v.sin(), s.sin()]
            };
            let psi = sample3(&grid, f);
            (None, from_samples(&psi, &psi)?)
        }
        "ruled-demo" => {
            let grid = Grid::new3(Axis::new(0.0, 0.5, nu)?, Axis::new(0.0, 0.5, nv)?, Axis::new(0.0, 0.5, ns)?)?;
            let psi = sample3(&grid, ruled_point);
            let normal = sample3(&grid, |u, v, _| ruled_normal(u, v));
            (None, from_samples(&psi, &normal)?)
        }
        other => return Err(Error::Input(format!("unknown example '{other}' (known: {})", EXAMPLES.join(", ")))),
    };
    Ok(Example { name: name.to_string(), family, hyp })
}

/// Affine hyperplane `x4 = 0` on a unit chart; rank zero everywhere.
pub fn hyperplane(n: usize) -> Result<HypersurfaceSample> {
    let grid = Grid::new3(Axis::new(0.0, 1.0, n)?, Axis::new(0.0, 1.0, n)?, Axis::new(0.0, 1.0, n)?)?;
    let psi = sample3(&grid, |u, v, s| [u, v, s, 0.0]);
    let normal = sample3(&grid, |_, _, _| [0.0, 0.0, 0.0, 1.0]);
    from_samples(&psi, &normal)
}

/// Grid of the base of an example.
pub fn base_grid(hyp: &HypersurfaceSample) -> Grid {
    hyp.grid.base()
}

/// Number of nodes on the seed curve `{v = v0, s = s0}` of a chart.
pub fn seed_curve_len(grid: &Grid) -> usize {
    grid.n(Dir::U)
}
