//! Pointwise and global counts of admissible `B` tensors.

use nalgebra::{DMatrix, Matrix3, SymmetricEigen};

use crate::calculus::first_stencil;
use crate::error::{Error, Result};
use crate::grid::Dir;
use crate::hypersurface::sample::{induced_christoffels, EPS_RANK};
use crate::hypersurface::HypersurfaceSample;

/// Singular values at or below this multiple of the largest count as zero in
/// the pointwise kernel.
pub const KERNEL_TOL: f64 = 1e-9;

/// Ratio between consecutive singular values that separates a numerical
/// nullspace from the rest of the spectrum.
pub const GAP_RATIO: f64 = 1e3;

/// Largest global system assembled by [`bending_space_dimension`].
pub const MAX_UNKNOWNS: usize = 10_000;

/// Solutions of the pointwise constraints at one point.
#[derive(Debug, Clone)]
pub struct PointKernel {
    /// Orthonormal basis (Frobenius) of admissible symmetric `B`.
    pub basis: Vec<DMatrix<f64>>,
    /// All singular values of the row-normalized constraint matrix, ascending.
    pub singular_values: Vec<f64>,
}

impl PointKernel {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Smallest singular value outside the kernel.
    pub fn smallest_nonzero(&self) -> f64 {
        self.singular_values.get(self.dim()).copied().unwrap_or(f64::INFINITY)
    }
}

/// Index pairs `(i, j)`, `i <= j`, of the symmetric unknowns of a `k x k` matrix.
fn sym_pairs(k: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(k * (k + 1) / 2);
    for i in 0..k {
        for j in i..k {
            out.push((i, j));
        }
    }
    out
}

/// Symmetric basis matrix of unit Frobenius norm for the pair `(i, j)`.
fn sym_unit(k: usize, (i, j): (usize, usize)) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(k, k);
    if i == j {
        m[(i, i)] = 1.0;
    } else {
        m[(i, j)] = std::f64::consts::FRAC_1_SQRT_2;
        m[(j, i)] = std::f64::consts::FRAC_1_SQRT_2;
    }
    m
}

/// Components of `BX ^ AY - BY ^ AX` for all pairs `x < y`, `k < l`.
fn wedge_components(b: &DMatrix<f64>, a: &DMatrix<f64>) -> Vec<f64> {
    let k = a.nrows();
    let mut out = Vec::new();
    for x in 0..k {
        for y in x + 1..k {
            for p in 0..k {
                for q in p + 1..k {
                    let w = (b[(p, x)] * a[(q, y)] - b[(q, x)] * a[(p, y)]) - (b[(p, y)] * a[(q, x)] - b[(q, y)] * a[(p, x)]);
                    out.push(w);
                }
            }
        }
    }
    out
}

/// Unit vectors spanning the numerical kernel of a symmetric matrix.
fn kernel_of_symmetric(a: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let eig = SymmetricEigen::new(a.clone());
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    (0..a.nrows())
        .filter(|&c| top == 0.0 || eig.eigenvalues[c].abs() <= EPS_RANK * top)
        .map(|c| eig.eigenvectors.column(c).iter().copied().collect())
        .collect()
}

fn push_normalized(rows: &mut Vec<Vec<f64>>, r: Vec<f64>) {
    let n = r.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        rows.push(r.into_iter().map(|x| x / n).collect());
    }
}

/// Symmetric `B` solving `BX ^ AY - BY ^ AX = 0` with `ker A` inside
/// `ker B`, for `A` given in an orthonormal basis.
pub fn pointwise_constraint_kernel(a: &DMatrix<f64>) -> Result<PointKernel> {
    let k = a.nrows();
    if a.ncols() != k || k == 0 {
        return Err(Error::Dimension(format!("shape operator must be square, got {}x{}", a.nrows(), a.ncols())));
    }
    let a = (a + a.transpose()) * 0.5;
    let pairs = sym_pairs(k);
    let p = pairs.len();
    let units: Vec<DMatrix<f64>> = pairs.iter().map(|&ij| sym_unit(k, ij)).collect();
    let cols: Vec<Vec<f64>> = units.iter().map(|u| wedge_components(u, &a)).collect();
    let mut rows = Vec::new();
    for r in 0..cols.first().map_or(0, |c| c.len()) {
        push_normalized(&mut rows, cols.iter().map(|c| c[r]).collect());
    }
    for v in kernel_of_symmetric(&a) {
        for i in 0..k {
            push_normalized(&mut rows, units.iter().map(|u| (0..k).map(|j| u[(i, j)] * v[j]).sum()).collect());
        }
    }
    let m = DMatrix::from_fn(rows.len().max(p), p, |r, c| rows.get(r).map_or(0.0, |row| row[c]));
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&x, &y| svd.singular_values[x].total_cmp(&svd.singular_values[y]));
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let top = sv.last().copied().unwrap_or(0.0);
    let mut basis = Vec::new();
    for (&i, &s) in order.iter().zip(&sv) {
        if s <= KERNEL_TOL * top.max(1.0) {
            let mut b = DMatrix::zeros(k, k);
            for (q, u) in units.iter().enumerate() {
                b += u * vt[(i, q)];
            }
            basis.push(b);
        }
    }
    Ok(PointKernel { basis, singular_values: sv })
}

/// Shape operator of a sample node in an orthonormal frame of the induced metric.
pub fn orthonormal_shape(hyp: &HypersurfaceSample, idx: usize) -> Result<DMatrix<f64>> {
    let g = hyp.metric[idx];
    let l = g.cholesky().ok_or(Error::NotAnImmersion { node: idx })?.l();
    let lt = l.transpose();
    let lt_inv = lt.try_inverse().ok_or(Error::NotAnImmersion { node: idx })?;
    let a = lt * hyp.a_chart[idx] * lt_inv;
    Ok(DMatrix::from_fn(3, 3, |r, c| a[(r, c)]))
}

/// Nodes `start + m * stride` of a chart, `m < count`, per direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Probe {
    pub start: [usize; 3],
    pub count: [usize; 3],
    pub stride: [usize; 3],
}

impl Probe {
    /// Probe of `count` nodes per direction with unit stride, centred in the chart.
    pub fn centered(hyp: &HypersurfaceSample, count: [usize; 3]) -> Result<Probe> {
        let n = [hyp.grid.n(Dir::U), hyp.grid.n(Dir::V), hyp.grid.n(Dir::S)];
        let mut start = [0; 3];
        for d in 0..3 {
            if count[d] < 3 || count[d] > n[d] {
                return Err(Error::InvalidGrid(format!("probe count {} for an axis of {} nodes", count[d], n[d])));
            }
            start[d] = (n[d] - count[d]) / 2;
        }
        Ok(Probe { start, count, stride: [1; 3] })
    }

    pub fn len(&self) -> usize {
        self.count.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn local(&self, p: usize) -> [usize; 3] {
        let (cu, cv) = (self.count[0], self.count[1]);
        [p % cu, (p / cu) % cv, p / (cu * cv)]
    }

    fn local_idx(&self, c: [usize; 3]) -> usize {
        c[0] + self.count[0] * (c[1] + self.count[1] * c[2])
    }

    fn chart_idx(&self, hyp: &HypersurfaceSample, c: [usize; 3]) -> usize {
        hyp.grid.idx(
            self.start[0] + c[0] * self.stride[0],
            self.start[1] + c[1] * self.stride[1],
            self.start[2] + c[2] * self.stride[2],
        )
    }
}

/// Singular values of the global constraint system and its numerical nullity.
#[derive(Debug, Clone)]
pub struct BendingSpace {
    /// Ascending.
    pub singular_values: Vec<f64>,
    pub nullity: usize,
    /// `sigma[nullity] / sigma[nullity - 1]`, or `sigma[0] / sigma_max` when
    /// the nullity is zero.
    pub gap_ratio: f64,
    pub unknowns: usize,
}

const SYM3: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

fn sym3_slot(i: usize, j: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    SYM3.iter().position(|&x| x == (a, b)).expect("pair in range")
}

/// Assembles the pointwise wedge and kernel constraints and the discretized
/// Codazzi equations for the lowered `S = <B., .>` on the probe nodes and
/// counts the near-null singular values.
pub fn bending_space_dimension(hyp: &HypersurfaceSample, probe: &Probe) -> Result<BendingSpace> {
    let np = probe.len();
    let unknowns = 6 * np;
    if unknowns > MAX_UNKNOWNS {
        return Err(Error::Size { unknowns, limit: MAX_UNKNOWNS });
    }
    let n = [hyp.grid.n(Dir::U), hyp.grid.n(Dir::V), hyp.grid.n(Dir::S)];
    for d in 0..3 {
        let last = probe.start[d] + (probe.count[d].max(1) - 1) * probe.stride[d];
        if probe.count[d] < 3 || probe.stride[d] == 0 || last >= n[d] {
            return Err(Error::InvalidGrid(format!("probe does not fit axis {d} of {} nodes", n[d])));
        }
    }
    let chr = induced_christoffels(hyp)?;
    let spacing = [0, 1, 2].map(|d| hyp.grid.spacing(Dir::from_index(d)) * probe.stride[d] as f64);
    let mut ata = DMatrix::<f64>::zeros(unknowns, unknowns);
    let mut add_row = |entries: &[(usize, f64)]| {
        let nrm = entries.iter().map(|(_, x)| x * x).sum::<f64>().sqrt();
        if nrm == 0.0 {
            return;
        }
        for &(c1, x1) in entries {
            for &(c2, x2) in entries {
                ata[(c1, c2)] += x1 * x2 / (nrm * nrm);
            }
        }
    };
    for p in 0..np {
        let loc = probe.local(p);
        let idx = probe.chart_idx(hyp, loc);
        let g = hyp.metric[idx];
        let ginv = g.try_inverse().ok_or(Error::NotAnImmersion { node: idx })?;
        let a = DMatrix::from_fn(3, 3, |r, c| hyp.a_chart[idx][(r, c)]);
        // wedge rows in the chart frame, B = G^{-1} S
        let cols: Vec<Vec<f64>> = SYM3
            .iter()
            .map(|&(i, j)| {
                let mut s = Matrix3::zeros();
                s[(i, j)] = 1.0;
                s[(j, i)] = 1.0;
                let b = ginv * s;
                wedge_components(&DMatrix::from_fn(3, 3, |r, c| b[(r, c)]), &a)
            })
            .collect();
        for r in 0..cols[0].len() {
            let e: Vec<(usize, f64)> = (0..6).map(|q| (6 * p + q, cols[q][r])).filter(|(_, x)| *x != 0.0).collect();
            add_row(&e);
        }
        // S n = 0 along the nullity
        let v = hyp.nullity[idx];
        for i in 0..3 {
            let e: Vec<(usize, f64)> = (0..3).map(|j| (6 * p + sym3_slot(i, j), v[j])).filter(|(_, x)| *x != 0.0).collect();
            add_row(&e);
        }
        // (nabla_i S)_{jk} = (nabla_j S)_{ik}
        let gam = &chr[idx];
        for i in 0..3 {
            for j in i + 1..3 {
                for k in 0..3 {
                    let mut e: Vec<(usize, f64)> = Vec::new();
                    for (dir, (r, c), sign) in [(i, (j, k), 1.0), (j, (i, k), -1.0)] {
                        let (off, w) = first_stencil(loc[dir], probe.count[dir], spacing[dir]);
                        for (m, wm) in w.iter().enumerate() {
                            if *wm == 0.0 {
                                continue;
                            }
                            let mut c2 = loc;
                            c2[dir] = off + m;
                            e.push((6 * probe.local_idx(c2) + sym3_slot(r, c), sign * wm));
                        }
                    }
                    for l in 0..3 {
                        e.push((6 * p + sym3_slot(j, l), -gam[l][i][k]));
                        e.push((6 * p + sym3_slot(i, l), gam[l][j][k]));
                    }
                    add_row(&e);
                }
            }
        }
    }
    let eig = SymmetricEigen::new(ata);
    let mut sv: Vec<f64> = eig.eigenvalues.iter().map(|x| x.max(0.0).sqrt()).collect();
    sv.sort_by(f64::total_cmp);
    let (nullity, gap_ratio) = numerical_nullity(&sv);
    Ok(BendingSpace { singular_values: sv, nullity, gap_ratio, unknowns })
}

/// Nullity read off an ascending spectrum: the position of the largest jump
/// by more than [`GAP_RATIO`] among values below `1e-3` of the largest.
/// Values under `1e-9` of the largest are treated as that floor, so exact
/// zeros do not produce spurious infinite ratios.
pub fn numerical_nullity(sv: &[f64]) -> (usize, f64) {
    let top = sv.last().copied().unwrap_or(0.0);
    if top == 0.0 {
        return (sv.len(), f64::INFINITY);
    }
    let floor = 1e-9 * top;
    let mut best = (0, 0.0);
    for k in 1..sv.len() {
        if sv[k - 1] > 1e-3 * top {
            break;
        }
        let ratio = sv[k].max(floor) / sv[k - 1].max(floor);
        if ratio > best.1 {
            best = (k, ratio);
        }
    }
    if best.1 > GAP_RATIO {
        best
    } else {
        (0, sv[0] / top)
    }
}
