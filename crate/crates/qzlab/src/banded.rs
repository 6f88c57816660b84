//! Banded matrices and LU factorization with partial pivoting.
//!
//! Shared by the BVP solver, the coupled Newton iterations and the implicit
//! time stepper (which factors complex matrices), so the kernels are generic
//! over the scalar type.

use num_complex::Complex64;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Scalar:
    Copy
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    const ZERO: Self;
    const ONE: Self;
    fn modulus(self) -> f64;
}

impl Scalar for f64 {
    const ZERO: f64 = 0.0;
    const ONE: f64 = 1.0;
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl Scalar for Complex64 {
    const ZERO: Complex64 = Complex64::new(0.0, 0.0);
    const ONE: Complex64 = Complex64::new(1.0, 0.0);
    fn modulus(self) -> f64 {
        self.norm()
    }
}

/// Square banded matrix with `kl` sub- and `ku` superdiagonals.
#[derive(Debug, Clone)]
pub struct BandMatrix<T: Scalar> {
    pub n: usize,
    pub kl: usize,
    pub ku: usize,
    data: Vec<T>, // (kl+ku+1) x n, entry (ku + i - j, j)
}

impl<T: Scalar> BandMatrix<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        BandMatrix {
            n,
            kl,
            ku,
            data: vec![T::ZERO; (kl + ku + 1) * n],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        (self.ku as i64 + i as i64 - j as i64) as usize * self.n + j
    }

    #[inline]
    pub fn in_band(&self, i: usize, j: usize) -> bool {
        let d = i as i64 - j as i64;
        -(self.ku as i64) <= d && d <= self.kl as i64
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        if self.in_band(i, j) {
            self.data[self.idx(i, j)]
        } else {
            T::ZERO
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        assert!(self.in_band(i, j), "({i},{j}) outside band");
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: T) {
        assert!(self.in_band(i, j), "({i},{j}) outside band");
        let k = self.idx(i, j);
        self.data[k] = self.data[k] + v;
    }

    pub fn clear_row(&mut self, i: usize) {
        let lo = i.saturating_sub(self.kl);
        let hi = (i + self.ku).min(self.n - 1);
        for j in lo..=hi {
            let k = self.idx(i, j);
            self.data[k] = T::ZERO;
        }
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![T::ZERO; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            let mut acc = T::ZERO;
            for j in lo..=hi {
                acc = acc + self.data[self.idx(i, j)] * x[j];
            }
            y[i] = acc;
        }
        y
    }

    /// Row-sum norm.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j).modulus()).sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// C = A * B with summed bandwidths.
    pub fn matmul(&self, other: &BandMatrix<T>) -> BandMatrix<T> {
        assert_eq!(self.n, other.n);
        let mut out = BandMatrix::zeros(self.n, self.kl + other.kl, self.ku + other.ku);
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            for k in lo..=hi {
                let a = self.data[self.idx(i, k)];
                if a == T::ZERO {
                    continue;
                }
                let lo2 = k.saturating_sub(other.kl);
                let hi2 = (k + other.ku).min(self.n - 1);
                for j in lo2..=hi2 {
                    let b = other.data[other.idx(k, j)];
                    if b != T::ZERO {
                        out.add(i, j, a * b);
                    }
                }
            }
        }
        out
    }

    /// Scale every entry.
    pub fn scale(&mut self, s: T) {
        for v in &mut self.data {
            *v = *v * s;
        }
    }
}

/// LU factorization of a banded matrix (partial pivoting).
pub struct BandLu<T: Scalar> {
    n: usize,
    kl: usize,
    ku: usize, // working band: original ku + kl fill
    data: Vec<T>,
    ipiv: Vec<usize>,
    pub smallest_pivot: f64,
    pub largest_pivot: f64,
}

impl<T: Scalar> BandLu<T> {
    /// Factor `a`. Returns the factorization even when nearly singular;
    /// `is_singular` reports a pivot collapse.
    pub fn new(a: &BandMatrix<T>) -> Self {
        let n = a.n;
        let kl = a.kl;
        let ku = a.ku + a.kl; // fill-in
        let rows = kl + ku + 1;
        let mut data = vec![T::ZERO; rows * n];
        let idx = |i: usize, j: usize| -> usize {
            (ku as i64 + i as i64 - j as i64) as usize * n + j
        };
        for i in 0..n {
            let lo = i.saturating_sub(a.kl);
            let hi = (i + a.ku).min(n - 1);
            for j in lo..=hi {
                data[idx(i, j)] = a.get(i, j);
            }
        }
        let mut ipiv = vec![0usize; n];
        let mut smallest = f64::INFINITY;
        let mut largest = 0.0f64;
        for k in 0..n {
            let imax = (k + kl).min(n - 1);
            let mut p = k;
            let mut pmax = data[idx(k, k)].modulus();
            for i in (k + 1)..=imax {
                let v = data[idx(i, k)].modulus();
                if v > pmax {
                    pmax = v;
                    p = i;
                }
            }
            ipiv[k] = p;
            smallest = smallest.min(pmax);
            largest = largest.max(pmax);
            let jmax = (k + ku).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    data.swap(idx(k, j), idx(p, j));
                }
            }
            let piv = data[idx(k, k)];
            if piv == T::ZERO {
                continue;
            }
            for i in (k + 1)..=imax {
                let l = data[idx(i, k)] / piv;
                data[idx(i, k)] = l;
                if l != T::ZERO {
                    for j in (k + 1)..=jmax {
                        let akj = data[idx(k, j)];
                        if akj != T::ZERO {
                            let t = data[idx(i, j)] - l * akj;
                            data[idx(i, j)] = t;
                        }
                    }
                }
            }
        }
        BandLu {
            n,
            kl,
            ku,
            data,
            ipiv,
            smallest_pivot: smallest,
            largest_pivot: largest,
        }
    }

    pub fn is_singular(&self) -> bool {
        self.smallest_pivot <= 1e-14 * self.largest_pivot.max(1e-300)
    }

    /// Rough condition estimate from the pivot range.
    pub fn condition_estimate(&self) -> f64 {
        self.largest_pivot / self.smallest_pivot.max(1e-300)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        (self.ku as i64 + i as i64 - j as i64) as usize * self.n + j
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let mut x = b.to_vec();
        for k in 0..n {
            let p = self.ipiv[k];
            if p != k {
                x.swap(k, p);
            }
            let imax = (k + self.kl).min(n - 1);
            let xk = x[k];
            if xk != T::ZERO {
                for i in (k + 1)..=imax {
                    let l = self.data[self.idx(i, k)];
                    if l != T::ZERO {
                        x[i] = x[i] - l * xk;
                    }
                }
            }
        }
        for k in (0..n).rev() {
            let jmax = (k + self.ku).min(n - 1);
            let mut acc = x[k];
            for j in (k + 1)..=jmax {
                let u = self.data[self.idx(k, j)];
                if u != T::ZERO {
                    acc = acc - u * x[j];
                }
            }
            x[k] = acc / self.data[self.idx(k, k)];
        }
        x
    }

    /// Solve with one round of iterative refinement against `a`.
    pub fn solve_refined(&self, a: &BandMatrix<T>, b: &[T]) -> Vec<T> {
        let mut x = self.solve(b);
        let ax = a.apply(&x);
        let r: Vec<T> = b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect();
        let dx = self.solve(&r);
        for (xi, di) in x.iter_mut().zip(dx) {
            *xi = *xi + di;
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize) -> BandMatrix<f64> {
        let mut a = BandMatrix::zeros(n, 1, 1);
        for i in 0..n {
            a.set(i, i, 2.0 + i as f64 * 0.01);
            if i > 0 {
                a.set(i, i - 1, -1.0);
            }
            if i + 1 < n {
                a.set(i, i + 1, -1.0);
            }
        }
        a
    }

    #[test]
    fn lu_roundtrip() {
        let n = 200;
        let a = tridiag(n);
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let b = a.apply(&x);
        let lu = BandLu::new(&a);
        assert!(!lu.is_singular());
        let y = lu.solve_refined(&a, &b);
        let err = x
            .iter()
            .zip(&y)
            .map(|(u, v)| (u - v).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "err {err}");
    }

    #[test]
    fn complex_lu_roundtrip() {
        let n = 100;
        let mut a = BandMatrix::<Complex64>::zeros(n, 2, 2);
        for i in 0..n {
            a.set(i, i, Complex64::new(3.0, 0.5 + 0.01 * i as f64));
            if i > 1 {
                a.set(i, i - 2, Complex64::new(0.0, -1.0));
            }
            if i + 2 < n {
                a.set(i, i + 2, Complex64::new(-1.0, 0.3));
            }
        }
        let x: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new((i as f64).cos(), (i as f64 * 0.5).sin()))
            .collect();
        let b = a.apply(&x);
        let lu = BandLu::new(&a);
        let y = lu.solve_refined(&a, &b);
        let err = x
            .iter()
            .zip(&y)
            .map(|(u, v)| (u - v).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-11, "err {err}");
    }

    #[test]
    fn singular_matrix_detected() {
        let n = 50;
        let mut a = BandMatrix::<f64>::zeros(n, 1, 1);
        for i in 0..n {
            // row sums to zero -> constants in the kernel
            if i > 0 {
                a.set(i, i - 1, 1.0);
            }
            if i + 1 < n {
                a.set(i, i + 1, 1.0);
            }
            let deg = (i > 0) as i32 + (i + 1 < n) as i32;
            a.set(i, i, -(deg as f64));
        }
        let lu = BandLu::new(&a);
        assert!(lu.is_singular());
    }

    #[test]
    fn matmul_matches_double_apply() {
        let n = 60;
        let a = tridiag(n);
        let sq = a.matmul(&a);
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.11).cos()).collect();
        let y1 = a.apply(&a.apply(&x));
        let y2 = sq.apply(&x);
        for (u, v) in y1.iter().zip(&y2) {
            assert!((u - v).abs() < 1e-12);
        }
    }
}
