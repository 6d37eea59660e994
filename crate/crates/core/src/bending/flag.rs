//! Necessary condition on `|phi|^2` for a family to yield a bendable hypersurface.

use crate::calculus::{diff, Order};
use crate::error::Result;
use crate::field::ScalarField;
use crate::grid::Dir;
use crate::pde::PhiFamily;
use crate::surface::Kind;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BendabilityFlag {
    pub bendable: bool,
    /// Interior sup of `(|phi|^2)_uv` (real) or `Delta(|phi|^2) / 4` (complex),
    /// divided by `sup |phi|^2`.
    pub residual: f64,
    pub gate: f64,
}

pub fn bendability_flag(family: &PhiFamily) -> Result<BendabilityFlag> {
    let grid = family.phi.grid();
    let sq: ScalarField = family.phi.norms().map(|r| r * r);
    let op = match family.kind {
        Kind::Real => diff(&sq, Dir::U, Order::Mixed(Dir::V))?,
        Kind::Complex => {
            let lap = diff(&sq, Dir::U, Order::Second)?.zip_map(&diff(&sq, Dir::V, Order::Second)?, |a, b| a + b);
            lap.map(|x| 0.25 * x)
        }
    };
    let scale = sq.sup_norm();
    let residual = if scale == 0.0 { 0.0 } else { op.interior_sup() / scale };
    let h = grid.h_max();
    let gate = 50.0 * h * h;
    Ok(BendabilityFlag { bendable: residual <= gate, residual, gate })
}
