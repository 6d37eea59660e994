//! Uniform parameter grids over (u, v) charts and (u, v, s) hypersurface charts.
//!
//! Nodes are stored row-major with `u` fastest, then `v`, then `s`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible node count per direction.
pub const MIN_NODES: usize = 5;

/// Coordinate direction of a chart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dir {
    U,
    V,
    S,
}

impl Dir {
    pub const ALL: [Dir; 3] = [Dir::U, Dir::V, Dir::S];

    pub fn index(self) -> usize {
        match self {
            Dir::U => 0,
            Dir::V => 1,
            Dir::S => 2,
        }
    }

    pub fn from_index(i: usize) -> Dir {
        Dir::ALL[i]
    }
}

/// Closed interval sampled by `n` uniformly spaced nodes, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Axis> {
        if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
            return Err(Error::InvalidGrid(format!("degenerate range [{lo}, {hi}]")));
        }
        if n < MIN_NODES {
            return Err(Error::InvalidGrid(format!(
                "node count {n} below minimum {MIN_NODES}"
            )));
        }
        Ok(Axis { lo, hi, n })
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.hi
        } else {
            self.lo + i as f64 * self.spacing()
        }
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.coord(i)).collect()
    }
}

/// A 2-D or 3-D uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    axes: Vec<Axis>,
}

/// Builds a 2-D grid; spacing is range length over `count - 1`.
pub fn make_grid(u_range: (f64, f64), v_range: (f64, f64), nu: usize, nv: usize) -> Result<Grid> {
    Grid::new2(Axis::new(u_range.0, u_range.1, nu)?, Axis::new(v_range.0, v_range.1, nv)?)
}

impl Grid {
    pub fn new2(u: Axis, v: Axis) -> Result<Grid> {
        Grid::from_axes(vec![u, v])
    }

    pub fn new3(u: Axis, v: Axis, s: Axis) -> Result<Grid> {
        Grid::from_axes(vec![u, v, s])
    }

    pub fn from_axes(axes: Vec<Axis>) -> Result<Grid> {
        if !(2..=3).contains(&axes.len()) {
            return Err(Error::InvalidGrid(format!("{} axes", axes.len())));
        }
        for a in &axes {
            Axis::new(a.lo, a.hi, a.n)?;
        }
        Ok(Grid { axes })
    }

    /// Extends a 2-D grid by a fiber axis.
    pub fn extend(&self, s: Axis) -> Result<Grid> {
        if self.dim() != 2 {
            return Err(Error::Dimension("grid already has a fiber axis".into()));
        }
        Grid::new3(self.axes[0], self.axes[1], s)
    }

    /// The (u, v) base of this grid.
    pub fn base(&self) -> Grid {
        Grid { axes: self.axes[..2].to_vec() }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn has(&self, d: Dir) -> bool {
        d.index() < self.dim()
    }

    pub fn axis(&self, d: Dir) -> Result<&Axis> {
        self.axes
            .get(d.index())
            .ok_or_else(|| Error::Dimension(format!("direction {d:?} absent from {}-D grid", self.dim())))
    }

    pub fn n(&self, d: Dir) -> usize {
        self.axes.get(d.index()).map_or(1, |a| a.n)
    }

    pub fn spacing(&self, d: Dir) -> f64 {
        self.axes.get(d.index()).map_or(0.0, |a| a.spacing())
    }

    /// Largest spacing over all directions; the `h` of every `C h^2` gate.
    pub fn h_max(&self) -> f64 {
        self.axes.iter().map(|a| a.spacing()).fold(0.0, f64::max)
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index stride of a direction.
    pub fn stride(&self, d: Dir) -> usize {
        match d {
            Dir::U => 1,
            Dir::V => self.n(Dir::U),
            Dir::S => self.n(Dir::U) * self.n(Dir::V),
        }
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n(Dir::U) * (j + self.n(Dir::V) * k)
    }

    #[inline]
    pub fn ijk(&self, idx: usize) -> (usize, usize, usize) {
        let nu = self.n(Dir::U);
        let nv = self.n(Dir::V);
        (idx % nu, (idx / nu) % nv, idx / (nu * nv))
    }

    /// Coordinates of a node (s is 0 on 2-D grids).
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let (i, j, k) = self.ijk(idx);
        let s = if self.dim() == 3 { self.axes[2].coord(k) } else { 0.0 };
        [self.axes[0].coord(i), self.axes[1].coord(j), s]
    }

    /// Whether a node is interior in every direction of the grid.
    pub fn is_interior(&self, idx: usize) -> bool {
        let (i, j, k) = self.ijk(idx);
        let inner = |x: usize, n: usize| x > 0 && x + 1 < n;
        inner(i, self.n(Dir::U))
            && inner(j, self.n(Dir::V))
            && (self.dim() == 2 || inner(k, self.n(Dir::S)))
    }

    /// Whether a node is at least `margin` nodes away from every face.
    pub fn is_inside(&self, idx: usize, margin: usize) -> bool {
        let (i, j, k) = self.ijk(idx);
        let inner = |x: usize, n: usize| x >= margin && x + margin < n;
        inner(i, self.n(Dir::U)) && inner(j, self.n(Dir::V)) && (self.dim() == 2 || inner(k, self.n(Dir::S)))
    }

    /// Whether a node is interior in the (u, v) directions.
    pub fn is_interior_uv(&self, idx: usize) -> bool {
        let (i, j, _) = self.ijk(idx);
        i > 0 && i + 1 < self.n(Dir::U) && j > 0 && j + 1 < self.n(Dir::V)
    }

    /// Sub-grid with the given start indices, counts and stride per direction.
    pub fn sub(&self, start: [usize; 3], count: [usize; 3], stride: [usize; 3]) -> Result<Grid> {
        let mut axes = Vec::with_capacity(self.dim());
        for (d, a) in self.axes.iter().enumerate() {
            let last = start[d] + (count[d].saturating_sub(1)) * stride[d];
            if count[d] < MIN_NODES.min(a.n) || last >= a.n || stride[d] == 0 {
                return Err(Error::InvalidGrid(format!(
                    "sub-grid start {} count {} stride {} out of range for axis with {} nodes",
                    start[d], count[d], stride[d], a.n
                )));
            }
            axes.push(Axis { lo: a.coord(start[d]), hi: a.coord(last), n: count[d] });
        }
        Ok(Grid { axes })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_spacing() {
        let g = make_grid((0.0, 1.0), (0.0, 1.0), 11, 11).unwrap();
        assert!((g.spacing(Dir::U) - 0.1).abs() < 1e-15);
        assert!((g.spacing(Dir::V) - 0.1).abs() < 1e-15);
        let tau = std::f64::consts::TAU;
        let g = make_grid((0.0, tau), (0.0, tau), 65, 65).unwrap();
        assert!((g.spacing(Dir::U) - tau / 64.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_range_rejected() {
        assert!(matches!(make_grid((0.0, 1.0), (0.0, 0.0), 11, 11), Err(Error::InvalidGrid(_))));
        assert!(matches!(make_grid((0.0, 1.0), (0.0, 1.0), 4, 11), Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn index_roundtrip() {
        let g = Grid::new3(
            Axis::new(0.0, 1.0, 5).unwrap(),
            Axis::new(0.0, 1.0, 6).unwrap(),
            Axis::new(0.0, 1.0, 7).unwrap(),
        )
        .unwrap();
        for idx in 0..g.len() {
            let (i, j, k) = g.ijk(idx);
            assert_eq!(g.idx(i, j, k), idx);
        }
        assert_eq!(g.point(g.idx(4, 5, 6)), [1.0, 1.0, 1.0]);
    }
}
