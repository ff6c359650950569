//! Perron roots and vectors of nonnegative matrices.

use super::Matrix;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct PerronPair {
    /// Spectral radius.
    pub rho: f64,
    /// Positive eigenvector normalised to unit sum.
    pub vector: Vec<f64>,
    /// Collatz-Wielandt lower and upper bounds at termination.
    pub bounds: (f64, f64),
    pub iterations: usize,
}

/// Strong connectivity of the support graph (i -> j when m[i,j] != 0).
pub fn is_irreducible(m: &Matrix<f64>) -> bool {
    let n = m.rows();
    if n == 0 {
        return false;
    }
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let e = if forward { m[(i, j)] } else { m[(j, i)] };
                if e != 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

/// Right Perron pair of an irreducible nonnegative matrix, by power iteration on I + M.
pub fn perron_right(m: &Matrix<f64>, tol: f64, max_iter: usize) -> Result<PerronPair> {
    let n = m.rows();
    if !m.is_square() || n == 0 {
        return Err(Error::InvalidArgument("Perron vector needs a nonempty square matrix".into()));
    }
    if (0..n).any(|i| m.row(i).iter().any(|&x| x < 0.0 || !x.is_finite())) {
        return Err(Error::InvalidArgument("matrix is not nonnegative".into()));
    }
    if !is_irreducible(m) {
        return Err(Error::NotTransitive("leading eigenvalue is not simple (reducible matrix)".into()));
    }
    let mut v = vec![1.0 / n as f64; n];
    let mut bounds = (0.0, f64::INFINITY);
    for it in 1..=max_iter {
        let mv = m.mul_vec(&v);
        let w: Vec<f64> = v.iter().zip(&mv).map(|(a, b)| a + b).collect();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..n {
            let q = w[i] / v[i];
            lo = lo.min(q);
            hi = hi.max(q);
        }
        bounds = (lo - 1.0, hi - 1.0);
        let s: f64 = w.iter().sum();
        v = w.into_iter().map(|x| x / s).collect();
        if hi - lo <= tol * hi {
            return Ok(PerronPair { rho: 0.5 * (bounds.0 + bounds.1), vector: v, bounds, iterations: it });
        }
    }
    Err(Error::NoConvergence(format!(
        "power iteration stalled with Collatz-Wielandt bounds [{}, {}]",
        bounds.0, bounds.1
    )))
}

/// Left Perron pair (eigenvector of the transpose).
pub fn perron_left(m: &Matrix<f64>, tol: f64, max_iter: usize) -> Result<PerronPair> {
    perron_right(&m.transpose(), tol, max_iter)
}
