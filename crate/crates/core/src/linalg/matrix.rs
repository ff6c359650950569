//! Dense row-major matrices over any [`Scalar`].

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Panics on ragged input.
    pub fn from_rows(rows: Vec<Vec<T>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self { rows: r, cols: c, data: rows.into_iter().flatten().collect() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].clone())
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> Matrix<U> {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(f).collect() }
    }

    pub fn to_f64(&self) -> Matrix<f64> {
        self.map(|x| x.to_f64_lossy())
    }

    pub fn scale(&self, s: &T) -> Self {
        self.map(|x| x.clone() * s.clone())
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a.clone() + b.clone()).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a.clone() - b.clone()).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    /// `self - c I`.
    pub fn shift(&self, c: &T) -> Self {
        let mut m = self.clone();
        for i in 0..self.rows.min(self.cols) {
            m[(i, i)] = m[(i, i)].clone() - c.clone();
        }
        m
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = &other[(k, j)];
                    if !b.is_zero() {
                        out[(i, j)] = out[(i, j)].clone() + a.clone() * b.clone();
                    }
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "dimension mismatch");
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(T::zero(), |acc, (a, b)| if a.is_zero() { acc } else { acc + a.clone() * b.clone() })
            })
            .collect()
    }

    /// Row vector times matrix.
    pub fn vec_mul(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.rows, v.len(), "dimension mismatch");
        let mut out = vec![T::zero(); self.cols];
        for (i, vi) in v.iter().enumerate() {
            if vi.is_zero() {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o = o.clone() + vi.clone() * a.clone();
            }
        }
        out
    }

    pub fn pow(&self, n: u32) -> Self {
        assert!(self.is_square());
        let mut acc = Self::identity(self.rows);
        let mut base = self.clone();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).fold(T::zero(), |acc, i| acc + self[(i, i)].clone())
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> T {
        (0..self.rows)
            .map(|i| self.row(i).iter().fold(T::zero(), |acc, x| acc + x.abs()))
            .fold(T::zero(), |m, s| if s > m { s } else { m })
    }

    /// Rank by Gaussian elimination; pivots below `T::tol(eps)` count as zero.
    pub fn rank(&self, eps: f64) -> usize {
        let mut m = self.clone();
        let tol = T::tol(eps) * (T::one() + m.norm_inf());
        let mut rank = 0;
        for col in 0..m.cols {
            if rank == m.rows {
                break;
            }
            let mut best = rank;
            for r in rank + 1..m.rows {
                if m[(r, col)].abs() > m[(best, col)].abs() {
                    best = r;
                }
            }
            if m[(best, col)].abs() <= tol {
                continue;
            }
            m.swap_rows(rank, best);
            let pivot = m[(rank, col)].clone();
            for r in rank + 1..m.rows {
                if m[(r, col)].is_zero() {
                    continue;
                }
                let factor = m[(r, col)].clone() / pivot.clone();
                for c in col..m.cols {
                    let v = m[(rank, c)].clone() * factor.clone();
                    m[(r, c)] = m[(r, c)].clone() - v;
                }
            }
            rank += 1;
        }
        rank
    }

    /// Solves `M x = b` by Gaussian elimination with partial pivoting;
    /// `None` when a pivot falls below `T::tol(eps)`.
    pub fn solve(&self, b: &[T], eps: f64) -> Option<Vec<T>> {
        let n = self.rows;
        assert!(self.is_square() && b.len() == n);
        let mut m = Matrix::from_fn(n, n + 1, |i, j| if j < n { self[(i, j)].clone() } else { b[i].clone() });
        let tol = T::tol(eps) * (T::one() + self.norm_inf());
        for col in 0..n {
            let best = (col..n).max_by(|&a, &c| m[(a, col)].abs().partial_cmp(&m[(c, col)].abs()).unwrap())?;
            if m[(best, col)].abs() <= tol {
                return None;
            }
            m.swap_rows(col, best);
            let pivot = m[(col, col)].clone();
            for r in 0..n {
                if r == col || m[(r, col)].is_zero() {
                    continue;
                }
                let factor = m[(r, col)].clone() / pivot.clone();
                for c in col..=n {
                    let v = m[(col, c)].clone() * factor.clone();
                    m[(r, c)] = m[(r, c)].clone() - v;
                }
            }
        }
        Some((0..n).map(|i| m[(i, n)].clone() / m[(i, i)].clone()).collect())
    }

    /// A nonzero vector spanning the kernel when it is one-dimensional.
    pub fn kernel_vector(&self, eps: f64) -> Option<Vec<T>> {
        let (rows, cols) = (self.rows, self.cols);
        let mut m = self.clone();
        let tol = T::tol(eps) * (T::one() + m.norm_inf());
        let mut pivots = Vec::new();
        let mut rank = 0;
        for col in 0..cols {
            if rank == rows {
                break;
            }
            let best = (rank..rows).max_by(|&a, &c| m[(a, col)].abs().partial_cmp(&m[(c, col)].abs()).unwrap())?;
            if m[(best, col)].abs() <= tol {
                continue;
            }
            m.swap_rows(rank, best);
            let pivot = m[(rank, col)].clone();
            for c in col..cols {
                m[(rank, c)] = m[(rank, c)].clone() / pivot.clone();
            }
            for r in 0..rows {
                if r == rank || m[(r, col)].is_zero() {
                    continue;
                }
                let factor = m[(r, col)].clone();
                for c in col..cols {
                    let v = m[(rank, c)].clone() * factor.clone();
                    m[(r, c)] = m[(r, c)].clone() - v;
                }
            }
            pivots.push(col);
            rank += 1;
        }
        if cols - rank != 1 {
            return None;
        }
        let free = (0..cols).find(|c| !pivots.contains(c))?;
        let mut v = vec![T::zero(); cols];
        v[free] = T::one();
        for (r, &pc) in pivots.iter().enumerate() {
            v[pc] = -m[(r, free)].clone();
        }
        Some(v)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for c in 0..self.cols {
            self.data.swap(a * self.cols + c, b * self.cols + c);
        }
    }

    /// Characteristic polynomial `det(zI - M)`, coefficients in ascending degree.
    ///
    /// Faddeev-LeVerrier; exact over the rationals.
    pub fn charpoly(&self) -> Vec<T> {
        assert!(self.is_square());
        let n = self.rows;
        let mut coeffs = vec![T::zero(); n + 1];
        coeffs[n] = T::one();
        let mut mk = Self::zeros(n, n);
        for k in 1..=n {
            mk = self.mul(&mk);
            for i in 0..n {
                mk[(i, i)] = mk[(i, i)].clone() + coeffs[n - k + 1].clone();
            }
            let t = self.mul(&mk).trace();
            coeffs[n - k] = -t / T::from_usize_lossless(k);
        }
        coeffs
    }

    /// Nullities `dim ker (M - cI)^m` for m = 1, 2, ... until they stabilise.
    pub fn nullity_sequence(&self, c: &T, eps: f64) -> Vec<usize> {
        let n = self.rows;
        let shifted = self.shift(c);
        let mut power = shifted.clone();
        let mut seq = Vec::new();
        loop {
            let nullity = n - power.rank(eps);
            if seq.last() == Some(&nullity) || seq.len() > n {
                break;
            }
            seq.push(nullity);
            power = power.mul(&shifted);
        }
        seq
    }
}

/// Jordan block sizes (descending) from a nullity sequence d_1 <= d_2 <= ...
pub fn jordan_sizes_from_nullities(seq: &[usize]) -> Vec<usize> {
    // blocks of size >= m: d_m - d_{m-1}
    let mut at_least = Vec::with_capacity(seq.len());
    let mut prev = 0;
    for &d in seq {
        at_least.push(d - prev);
        prev = d;
    }
    let mut sizes = Vec::new();
    for m in 1..=at_least.len() {
        let here = at_least[m - 1];
        let next = at_least.get(m).copied().unwrap_or(0);
        for _ in 0..here.saturating_sub(next) {
            sizes.push(m);
        }
    }
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Polynomial product, ascending coefficients.
pub fn poly_mul<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![T::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] = out[i + j].clone() + x.clone() * y.clone();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{rat, Rational};
    use num_traits::Zero;

    fn jordan_3x3() -> Matrix<Rational> {
        Matrix::from_rows(vec![
            vec![rat(2, 1), rat(1, 1), rat(0, 1)],
            vec![rat(0, 1), rat(2, 1), rat(0, 1)],
            vec![rat(0, 1), rat(0, 1), rat(5, 1)],
        ])
    }

    #[test]
    fn charpoly_of_jordan_block() {
        // (z-2)^2 (z-5) = z^3 - 9z^2 + 24z - 20
        let p = jordan_3x3().charpoly();
        assert_eq!(p, vec![rat(-20, 1), rat(24, 1), rat(-9, 1), rat(1, 1)]);
    }

    #[test]
    fn nullities_and_blocks() {
        let m = jordan_3x3();
        let seq = m.nullity_sequence(&rat(2, 1), 0.0);
        assert_eq!(seq, vec![1, 2]);
        assert_eq!(jordan_sizes_from_nullities(&seq), vec![2]);
        assert_eq!(jordan_sizes_from_nullities(&[2, 3, 4]), vec![3, 1]);
        assert_eq!(jordan_sizes_from_nullities(&[3]), vec![1, 1, 1]);
    }

    #[test]
    fn rank_and_pow() {
        let m = Matrix::from_rows(vec![vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert_eq!(m.rank(1e-12), 1);
        let p = m.pow(3);
        assert_eq!(p, m.mul(&m).mul(&m));
        assert_eq!(Matrix::<f64>::identity(3).rank(1e-12), 3);
    }

    #[test]
    fn solve_and_kernel() {
        let m = Matrix::from_rows(vec![vec![rat(2, 1), rat(1, 1)], vec![rat(1, 1), rat(3, 1)]]);
        assert_eq!(m.solve(&[rat(3, 1), rat(4, 1)], 0.0), Some(vec![rat(1, 1), rat(1, 1)]));
        let s = Matrix::from_rows(vec![vec![rat(1, 1), rat(2, 1)], vec![rat(2, 1), rat(4, 1)]]);
        assert_eq!(s.solve(&[rat(1, 1), rat(1, 1)], 0.0), None);
        let k = s.kernel_vector(0.0).unwrap();
        assert!(s.mul_vec(&k).iter().all(|x| x.is_zero()));
        let f = Matrix::<f64>::from_rows(vec![vec![0.5, -0.5], vec![-0.5, 0.5]]);
        let v: Vec<f64> = f.kernel_vector(1e-12).unwrap();
        assert!((v[0] - v[1]).abs() < 1e-15);
    }

    #[test]
    fn vec_products() {
        let m = Matrix::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(m.mul_vec(&[1.0, 1.0]), vec![3.0, 7.0]);
        assert_eq!(m.vec_mul(&[1.0, 1.0]), vec![4.0, 6.0]);
    }

    #[test]
    fn poly_product() {
        let p = poly_mul(&[rat(-1, 1), rat(1, 1)], &[rat(1, 1), rat(1, 1)]);
        assert_eq!(p, vec![rat(-1, 1), rat(0, 1), rat(1, 1)]);
    }
}
