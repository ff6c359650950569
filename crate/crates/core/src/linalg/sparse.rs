use super::Matrix;

/// Compressed sparse rows over `f64`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Csr {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl Csr {
    /// Builds from per-row `(column, value)` lists; duplicate columns are summed.
    pub fn from_rows(cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in rows.iter().cloned() {
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                debug_assert!(c < cols);
                if last == Some(c) {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    values.push(v);
                    last = Some(c);
                }
            }
            indptr.push(indices.len());
        }
        Self { rows: rows.len(), cols, indptr, indices, values }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| self.row(i).map(|(c, v)| v * x[c]).sum()).collect()
    }

    /// `xᵀ M`.
    pub fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, xi) in x.iter().enumerate() {
            for (c, v) in self.row(i) {
                out[c] += xi * v;
            }
        }
        out
    }

    /// Multiplies every row `i` by `s[i]`.
    pub fn scale_rows(&self, s: &[f64]) -> Self {
        let mut out = self.clone();
        for i in 0..self.rows {
            for k in self.indptr[i]..self.indptr[i + 1] {
                out.values[k] *= s[i];
            }
        }
        out
    }

    pub fn to_dense(&self) -> Matrix<f64> {
        let mut m = Matrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for (c, v) in self.row(i) {
                m[(i, c)] += v;
            }
        }
        m
    }

    /// Sparse times dense.
    pub fn mul_dense(&self, d: &Matrix<f64>) -> Matrix<f64> {
        assert_eq!(self.cols, d.rows());
        let mut out = Matrix::zeros(self.rows, d.cols());
        for i in 0..self.rows {
            for (c, v) in self.row(i) {
                let src = d.row(c);
                for (j, s) in src.iter().enumerate() {
                    out[(i, j)] += v * s;
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_agree_with_dense() {
        let s = Csr::from_rows(3, vec![vec![(0, 1.0), (2, 2.0), (0, 1.0)], vec![], vec![(1, -1.0)]]);
        let d = s.to_dense();
        assert_eq!(d.row(0), &[2.0, 0.0, 2.0]);
        let x = [1.0, 2.0, 3.0];
        assert_eq!(s.apply(&x), d.mul_vec(&x));
        assert_eq!(s.apply_transpose(&x), d.vec_mul(&x));
        assert_eq!(s.mul_dense(&Matrix::identity(3)), d);
    }
}
