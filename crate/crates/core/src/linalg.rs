//! Banded LU factorization with partial pivoting.

use crate::scalar::Real;

/// Square band matrix with `kl` sub- and `ku` super-diagonals.
///
/// Storage follows the LAPACK `gbtrf` layout: `kl` extra rows of fill space
/// above the band so that row interchanges never leave the array.
#[derive(Debug, Clone)]
pub struct BandMatrix<T> {
    n: usize,
    kl: usize,
    ku: usize,
    ld: usize,
    data: Vec<T>,
}

impl<T: Real> BandMatrix<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ld = 2 * kl + ku + 1;
        BandMatrix { n, kl, ku, ld, data: vec![T::zero(); ld * n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn pos(&self, i: usize, j: usize) -> usize {
        // column-major band storage, diagonal at row kl + ku
        j * self.ld + (self.kl + self.ku + i - j)
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        i <= j + self.kl && j <= i + self.ku
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        if self.in_band(i, j) {
            self.data[self.pos(i, j)]
        } else {
            T::zero()
        }
    }

    /// Adds `x` to entry `(i, j)`; panics outside the band.
    pub fn add(&mut self, i: usize, j: usize, x: T) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside band");
        let p = self.pos(i, j);
        self.data[p] += x;
    }

    /// Infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> T {
        let mut rows = vec![T::zero(); self.n];
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl + 1).min(self.n);
            for (i, r) in rows.iter_mut().enumerate().take(hi).skip(lo) {
                *r += self.get(i, j).abs();
            }
        }
        rows.into_iter().fold(T::zero(), |m, r| m.max(r))
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n];
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl + 1).min(self.n);
            for (i, yi) in y.iter_mut().enumerate().take(hi).skip(lo) {
                *yi += self.get(i, j) * x[j];
            }
        }
        y
    }

    /// Factorizes in place. Returns `None` on an exactly zero pivot.
    pub fn factor(mut self) -> Option<BandLu<T>> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let kv = kl + ku;
        let mut piv = vec![0usize; n];
        for j in 0..n {
            let last = (j + kl).min(n - 1);
            let mut p = j;
            let mut best = T::zero();
            for i in j..=last {
                let a = self.data[self.pos(i, j)].abs();
                if a > best {
                    best = a;
                    p = i;
                }
            }
            piv[j] = p;
            if best == T::zero() {
                return None;
            }
            let cmax = (j + kv).min(n - 1);
            if p != j {
                for c in j..=cmax {
                    let (a, b) = (self.pos(j, c), self.pos(p, c));
                    self.data.swap(a, b);
                }
            }
            let d = self.data[self.pos(j, j)];
            for i in j + 1..=last {
                let pij = self.pos(i, j);
                let l = self.data[pij] / d;
                self.data[pij] = l;
                if l == T::zero() {
                    continue;
                }
                for c in j + 1..=cmax {
                    let (a, b) = (self.pos(i, c), self.pos(j, c));
                    let u = self.data[b];
                    self.data[a] -= l * u;
                }
            }
        }
        Some(BandLu { a: self, piv })
    }
}

/// Factors produced by [`BandMatrix::factor`].
#[derive(Debug, Clone)]
pub struct BandLu<T> {
    a: BandMatrix<T>,
    piv: Vec<usize>,
}

impl<T: Real> BandLu<T> {
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let a = &self.a;
        let (n, kl) = (a.n, a.kl);
        let kv = a.kl + a.ku;
        let mut x = b.to_vec();
        for j in 0..n {
            x.swap(j, self.piv[j]);
            let xj = x[j];
            for (i, xi) in x.iter_mut().enumerate().take((j + kl + 1).min(n)).skip(j + 1) {
                *xi -= a.data[a.pos(i, j)] * xj;
            }
        }
        for j in (0..n).rev() {
            x[j] /= a.data[a.pos(j, j)];
            let xj = x[j];
            let lo = j.saturating_sub(kv);
            for (i, xi) in x.iter_mut().enumerate().take(j).skip(lo) {
                *xi -= a.data[a.pos(i, j)] * xj;
            }
        }
        x
    }

    /// Estimate of the smallest singular value of a symmetric factored matrix
    /// by inverse iteration from a fixed start vector.
    pub fn sigma_min_estimate(&self, iterations: usize) -> T {
        let n = self.a.n;
        let mut x: Vec<T> = (0..n).map(|i| T::lit(1.0 + ((i * 7919) % 101) as f64 / 101.0)).collect();
        let mut growth = T::zero();
        for _ in 0..iterations {
            let nx = x.iter().map(|v| *v * *v).sum::<T>().sqrt();
            x.iter_mut().for_each(|v| *v /= nx);
            let y = self.solve(&x);
            growth = y.iter().map(|v| *v * *v).sum::<T>().sqrt();
            if !growth.is_finite() {
                return T::zero();
            }
            x = y;
        }
        if growth == T::zero() {
            T::infinity()
        } else {
            T::one() / growth
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize, d: f64) -> BandMatrix<f64> {
        let mut a = BandMatrix::zeros(n, 1, 1);
        for i in 0..n {
            a.add(i, i, d);
            if i + 1 < n {
                a.add(i, i + 1, -1.0);
                a.add(i + 1, i, -1.0);
            }
        }
        a
    }

    #[test]
    fn solves_tridiagonal() {
        let a = tridiag(10, 2.5);
        let x: Vec<f64> = (0..10).map(|i| (i as f64).sin()).collect();
        let b = a.matvec(&x);
        let y = a.clone().factor().unwrap().solve(&b);
        assert!(x.iter().zip(&y).all(|(p, q)| (p - q).abs() < 1e-13));
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        let mut a = BandMatrix::zeros(3, 1, 1);
        a.add(0, 1, 1.0);
        a.add(1, 0, 1.0);
        a.add(1, 2, 2.0);
        a.add(2, 1, 3.0);
        a.add(2, 2, 1.0);
        let x = [1.0f64, -2.0, 0.5];
        let b = a.matvec(&x);
        let y = a.factor().unwrap().solve(&b);
        assert!(x.iter().zip(&y).all(|(p, q)| (p - q).abs() < 1e-14));
    }

    #[test]
    fn smallest_singular_value_of_laplacian() {
        // eigenvalues of tridiag(-1, 2, -1) are 2 - 2 cos(k pi / (n + 1))
        let n = 20;
        let lu = tridiag(n, 2.0).factor().unwrap();
        let want = 2.0 - 2.0 * (std::f64::consts::PI / (n as f64 + 1.0)).cos();
        let got = lu.sigma_min_estimate(200);
        assert!((got - want).abs() / want < 1e-6, "{got} vs {want}");
    }
}
