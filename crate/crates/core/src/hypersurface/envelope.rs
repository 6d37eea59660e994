//! Envelopes of the hyperplane family `<phi, x> = phi_0`.

use nalgebra::{DMatrix, DVector};

use crate::calculus::{diff, Order};
use crate::error::{Error, Result};
use crate::field::{dot, ScalarField, VecField};
use crate::grid::Dir;
use crate::pde::PhiFamily;
use crate::surface::orthonormalize;

use super::sample::HypersurfaceSample;

/// Affine leaf `point + span(basis)` solving the envelope system at a node.
#[derive(Debug, Clone)]
pub struct Leaf {
    pub point: Vec<f64>,
    pub basis: Vec<Vec<f64>>,
}

/// First derivatives of a family, cached for repeated envelope solves.
#[derive(Debug, Clone)]
pub struct EnvelopeSystem {
    phi: VecField,
    phi_u: VecField,
    phi_v: VecField,
    p0: ScalarField,
    p0_u: ScalarField,
    p0_v: ScalarField,
}

impl EnvelopeSystem {
    pub fn new(family: &PhiFamily) -> Result<Self> {
        Ok(EnvelopeSystem {
            phi: family.phi.clone(),
            phi_u: diff(&family.phi, Dir::U, Order::First)?,
            phi_v: diff(&family.phi, Dir::V, Order::First)?,
            p0: family.phi0.clone(),
            p0_u: diff(&family.phi0, Dir::U, Order::First)?,
            p0_v: diff(&family.phi0, Dir::V, Order::First)?,
        })
    }

    /// Minimum-norm solution of `<phi, x> = phi_0`, `<phi_u, x> = d_u phi_0`,
    /// `<phi_v, x> = d_v phi_0` and an orthonormal basis of its kernel.
    pub fn solve(&self, node: usize) -> Result<Leaf> {
        let dim = self.phi.dim();
        let rows = [self.phi.node(node), self.phi_u.node(node), self.phi_v.node(node)];
        let a = DMatrix::from_fn(3, dim, |r, c| rows[r][c]);
        let b = DVector::from_vec(vec![self.p0.get(node), self.p0_u.get(node), self.p0_v.get(node)]);
        let svd = a.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let rank = svd.singular_values.iter().filter(|&&s| s > 1e-10 * smax).count();
        if rank < 3 {
            return Err(Error::DegenerateEnvelope { node, rank });
        }
        let x = svd.solve(&b, 1e-14 * smax).map_err(|e| Error::Rank(e.to_string()))?;
        let mut refs: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        refs.extend((0..dim).map(|l| (0..dim).map(|c| if c == l { 1.0 } else { 0.0 }).collect()));
        let slices: Vec<&[f64]> = refs.iter().map(|v| v.as_slice()).collect();
        let full = orthonormalize(&slices);
        Ok(Leaf { point: x.iter().copied().collect(), basis: full[3..].to_vec() })
    }
}

pub fn envelope_solve(family: &PhiFamily, node: usize) -> Result<Leaf> {
    EnvelopeSystem::new(family)?.solve(node)
}

impl Leaf {
    /// Largest residual of the three defining equations at `point + t basis_k`.
    pub fn equation_residual(&self, sys: &EnvelopeSystem, node: usize, t: f64) -> f64 {
        let rows = [sys.phi.node(node), sys.phi_u.node(node), sys.phi_v.node(node)];
        let rhs = [sys.p0.get(node), sys.p0_u.get(node), sys.p0_v.get(node)];
        let mut worst = 0.0f64;
        for k in 0..self.basis.len() {
            let x: Vec<f64> = self.point.iter().zip(&self.basis[k]).map(|(p, b)| p + t * b).collect();
            for r in 0..3 {
                worst = worst.max((dot(rows[r], &x) - rhs[r]).abs());
            }
        }
        worst
    }
}

/// Distance from the leaf point to the fiber line of the sample over the
/// same base node, and the misalignment of the leaf direction with it.
pub fn leaf_distance(hyp: &HypersurfaceSample, leaf: &Leaf, base_node: usize) -> (f64, f64) {
    let p = hyp.psi.node(base_node);
    let t = hyp.psi_s.node(base_node);
    let tn = dot(t, t).sqrt();
    let d: Vec<f64> = leaf.point.iter().zip(p).map(|(x, y)| x - y).collect();
    let along = dot(&d, t) / tn;
    let dist = (dot(&d, &d) - along * along).max(0.0).sqrt();
    let align = leaf.basis.first().map_or(0.0, |b| 1.0 - (dot(b, t) / tn).abs());
    (dist, align)
}

/// Name of the envelope cross-check residual.
pub const ENVELOPE_RESIDUAL: &str = "envelope-distance";

/// Bound on the leaf-to-sample distance.
pub const ENVELOPE_TOL: f64 = 1e-6;

/// Largest leaf distance over a `count x count` lattice of base nodes kept a
/// few nodes clear of the edges, together with the number of probed nodes.
pub fn envelope_cross_check(family: &PhiFamily, hyp: &HypersurfaceSample, count: usize) -> Result<(f64, usize)> {
    let base = hyp.grid.base();
    if family.phi.grid() != &base {
        return Err(Error::Dimension("family and hypersurface have different base grids".into()));
    }
    let sys = EnvelopeSystem::new(family)?;
    let (nu, nv) = (base.n(Dir::U), base.n(Dir::V));
    let pick = |n: usize, k: usize| {
        let margin = (n / 8).min(4);
        if count <= 1 {
            n / 2
        } else {
            margin + k * (n - 1 - 2 * margin) / (count - 1)
        }
    };
    let mut worst = 0.0f64;
    let mut probed = 0;
    for a in 0..count {
        for b in 0..count {
            let node = base.idx(pick(nu, a), pick(nv, b), 0);
            if !hyp.regular[node] {
                continue;
            }
            let leaf = sys.solve(node)?;
            worst = worst.max(leaf_distance(hyp, &leaf, node).0);
            probed += 1;
        }
    }
    Ok((worst, probed))
}
