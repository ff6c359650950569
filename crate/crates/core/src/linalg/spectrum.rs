//! Dense eigenvalues with multiplicities and Jordan structure.

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};

/// One distinct eigenvalue of a [`SpectrumReport`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenEntry {
    pub re: f64,
    pub im: f64,
    /// Algebraic multiplicity.
    pub alg: usize,
    /// Geometric multiplicity, absent when the structure was not analysed.
    pub geo: Option<usize>,
    /// Jordan block sizes, descending.
    pub jordan: Option<Vec<usize>>,
    /// False when the eigenvalue lies inside the essential bound.
    pub trusted: bool,
}

impl EigenEntry {
    pub fn value(&self) -> C64 {
        C64::new(self.re, self.im)
    }

    pub fn modulus(&self) -> f64 {
        self.value().norm()
    }

    pub fn max_jordan(&self) -> Option<usize> {
        self.jordan.as_ref().and_then(|j| j.iter().copied().max())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<EigenEntry>,
    pub essential_bound: f64,
    /// Relative tolerance used to group eigenvalues.
    pub grouping_tol: f64,
    pub dim: usize,
    pub mode: Option<String>,
    pub k: Option<usize>,
    pub r: Option<usize>,
}

impl SpectrumReport {
    pub fn total_multiplicity(&self) -> usize {
        self.eigenvalues.iter().map(|e| e.alg).sum()
    }

    /// Entry whose value lies within `tol` of `z`.
    pub fn find(&self, z: C64, tol: f64) -> Option<&EigenEntry> {
        self.eigenvalues
            .iter()
            .filter(|e| (e.value() - z).norm() <= tol)
            .min_by(|a, b| (a.value() - z).norm().total_cmp(&(b.value() - z).norm()))
    }

    pub fn trusted(&self) -> impl Iterator<Item = &EigenEntry> {
        self.eigenvalues.iter().filter(|e| e.trusted)
    }

    /// Every eigenvalue repeated by algebraic multiplicity.
    pub fn expanded(&self) -> Vec<C64> {
        self.eigenvalues.iter().flat_map(|e| std::iter::repeat(e.value()).take(e.alg)).collect()
    }
}

#[derive(Clone, Debug)]
pub struct SpectrumOptions {
    /// Relative distance below which eigenvalues are grouped.
    pub cluster_tol: f64,
    /// Singular values below `rank_cutoff * ||M||` count as zero.
    pub rank_cutoff: f64,
    /// Largest matrix dimension for which Jordan structure is analysed.
    pub max_analyzed_dim: usize,
    /// Also analyse eigenvalues inside the essential bound.
    pub analyze_untrusted: bool,
    /// Radius (relative) within which split defective eigenvalues are regrouped.
    pub merge_radius: f64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            cluster_tol: 1e-8,
            rank_cutoff: 1e-10,
            max_analyzed_dim: 400,
            analyze_untrusted: false,
            merge_radius: 1e-3,
        }
    }
}

pub(crate) fn to_faer(m: &Matrix<f64>) -> Mat<f64> {
    Mat::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

fn to_faer_complex(m: &Matrix<f64>) -> Mat<C64> {
    Mat::from_fn(m.rows(), m.cols(), |i, j| C64::new(m[(i, j)], 0.0))
}

/// Raw eigenvalues of a real square matrix.
pub fn eigenvalues(m: &Matrix<f64>) -> Result<Vec<C64>> {
    if !m.is_square() {
        return Err(Error::InvalidArgument("matrix is not square".into()));
    }
    if m.rows() == 0 {
        return Ok(Vec::new());
    }
    if (0..m.rows()).any(|i| m.row(i).iter().any(|x| !x.is_finite())) {
        return Err(Error::Eigen("matrix has non-finite entries".into()));
    }
    to_faer(m).eigenvalues().map_err(|e| Error::Eigen(format!("{e:?}")))
}

/// Eigenvalues and right eigenvectors (columns) of a real square matrix.
pub fn eigen_decomposition(m: &Matrix<f64>) -> Result<(Vec<C64>, Vec<Vec<C64>>)> {
    let evd = to_faer(m).eigen().map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let n = m.rows();
    let s = evd.S();
    let u = evd.U();
    let values: Vec<C64> = (0..n).map(|i| s.column_vector()[i]).collect();
    let vectors = (0..n).map(|j| (0..n).map(|i| u[(i, j)]).collect()).collect();
    Ok((values, vectors))
}

/// Deterministic ordering key: modulus descending, |arg| ascending, imaginary part ascending.
pub fn order_key(z: C64) -> (i64, i64, i64) {
    let q = |x: f64| (x * 1e9).round() as i64;
    (-q(z.norm()), q(z.im.atan2(z.re).abs()), q(z.im))
}

pub fn sort_eigenvalues(values: &mut [C64]) {
    values.sort_by_key(|z| order_key(*z));
}

fn frobenius(m: &Matrix<f64>) -> f64 {
    (0..m.rows()).flat_map(|i| m.row(i).iter()).map(|x| x * x).sum::<f64>().sqrt()
}

/// Nullities of (M - cI)^m, m = 1, 2, ..., computed by deflating the kernel
/// found so far instead of forming powers.
fn deflated_nullities(m: &Mat<C64>, c: C64, cutoff: f64, cap: usize) -> Result<Vec<usize>> {
    let n = m.nrows();
    let a = Mat::from_fn(n, n, |i, j| if i == j { m[(i, j)] - c } else { m[(i, j)] });
    let mut basis: Mat<C64> = Mat::zeros(n, 0);
    let mut seq: Vec<usize> = Vec::new();
    loop {
        let b = if basis.ncols() == 0 {
            a.clone()
        } else {
            let proj = &basis * (basis.adjoint() * &a);
            &a - proj
        };
        let svd = b.svd().map_err(|e| Error::Eigen(format!("svd: {e:?}")))?;
        let s = svd.S().column_vector();
        let d = (0..n).filter(|&i| s[i].re <= cutoff).count();
        if seq.last() == Some(&d) || d == 0 {
            break;
        }
        seq.push(d);
        let v = svd.V();
        basis = Mat::from_fn(n, d, |i, j| v[(i, n - d + j)]);
        if d >= cap || d >= n {
            break;
        }
    }
    Ok(seq)
}

fn sizes_from(seq: &[usize]) -> Vec<usize> {
    super::matrix::jordan_sizes_from_nullities(seq)
}

/// Groups eigenvalues of `m`, reporting multiplicities and, where feasible, Jordan blocks.
pub fn spectrum_with_multiplicity(
    m: &Matrix<f64>,
    essential_bound: f64,
    opts: &SpectrumOptions,
) -> Result<SpectrumReport> {
    let raw = eigenvalues(m)?;
    let n = raw.len();
    let norm = frobenius(m).max(f64::MIN_POSITIVE);
    let scale = norm.max(1.0);
    let analyze = n <= opts.max_analyzed_dim;
    let fm = if analyze { Some(to_faer_complex(m)) } else { None };
    let cutoff = opts.rank_cutoff * norm;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| order_key(raw[i]));
    let mut remaining = order;
    let mut entries = Vec::new();

    while let Some(&first) = remaining.first() {
        let tol = opts.cluster_tol * raw[first].norm().max(scale * 1e-3);
        // single linkage around the seed
        let mut members = vec![first];
        let mut grew = true;
        while grew {
            grew = false;
            for &j in &remaining {
                if !members.contains(&j) && members.iter().any(|&i| (raw[i] - raw[j]).norm() <= tol) {
                    members.push(j);
                    grew = true;
                }
            }
        }
        let mean = |ms: &[usize]| ms.iter().map(|&i| raw[i]).sum::<C64>() / ms.len() as f64;
        let mut center = mean(&members);
        let trusted = center.norm() > essential_bound;
        let mut jordan = None;
        if let Some(fm) = &fm {
            if trusted || opts.analyze_untrusted {
                let mut seq = deflated_nullities(fm, center, cutoff, n)?;
                // A defective eigenvalue is split by rounding into a ring of radius
                // O(eps^{1/m}); try absorbing the nearest neighbours, largest group first.
                let radius = opts.merge_radius * center.norm().max(scale * 1e-3);
                let mut near: Vec<usize> = remaining
                    .iter()
                    .copied()
                    .filter(|j| !members.contains(j) && (raw[*j] - center).norm() <= radius)
                    .collect();
                near.sort_by(|&a, &b| (raw[a] - center).norm().total_cmp(&(raw[b] - center).norm()));
                for extra in (1..=near.len()).rev() {
                    let mut group = members.clone();
                    group.extend_from_slice(&near[..extra]);
                    let c = mean(&group);
                    let s = deflated_nullities(fm, c, cutoff, n)?;
                    if s.last().copied() == Some(group.len()) {
                        members = group;
                        center = c;
                        seq = s;
                        break;
                    }
                }
                if seq.last().copied() == Some(members.len()) {
                    jordan = Some(sizes_from(&seq));
                }
            }
        }
        remaining.retain(|j| !members.contains(j));
        let im_tol = opts.cluster_tol * center.norm().max(1.0);
        let im = if center.im.abs() <= im_tol.max(1e3 * f64::EPSILON * scale) { 0.0 } else { center.im };
        entries.push(EigenEntry {
            re: center.re,
            im,
            alg: members.len(),
            geo: jordan.as_ref().map(Vec::len),
            jordan,
            trusted,
        });
    }
    pair_conjugates(&mut entries);
    entries.sort_by_key(|e| order_key(e.value()));
    Ok(SpectrumReport {
        eigenvalues: entries,
        essential_bound,
        grouping_tol: opts.cluster_tol,
        dim: n,
        mode: None,
        k: None,
        r: None,
    })
}

/// Makes conjugate pairs of a real matrix exactly conjugate in the output.
fn pair_conjugates(entries: &mut [EigenEntry]) {
    let n = entries.len();
    for i in 0..n {
        if entries[i].im <= 0.0 {
            continue;
        }
        let zi = entries[i].value();
        let partner = (0..n)
            .filter(|&j| entries[j].im < 0.0 && entries[j].alg == entries[i].alg)
            .min_by(|&a, &b| (entries[a].value() - zi.conj()).norm().total_cmp(&(entries[b].value() - zi.conj()).norm()));
        if let Some(j) = partner {
            if (entries[j].value() - zi.conj()).norm() <= 1e-6 * zi.norm().max(1.0) {
                entries[j].re = entries[i].re;
                entries[j].im = -entries[i].im;
            }
        }
    }
}

/// Dense LU with partial pivoting over complex numbers.
#[derive(Clone, Debug)]
pub struct ComplexLu {
    n: usize,
    lu: Vec<C64>,
    perm: Vec<usize>,
}

impl ComplexLu {
    /// Factors the row-major `n x n` matrix `a`.
    pub fn new(n: usize, mut a: Vec<C64>) -> Result<Self> {
        assert_eq!(a.len(), n * n);
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        for k in 0..n {
            let p = (k..n).max_by(|&x, &y| a[x * n + k].norm().total_cmp(&a[y * n + k].norm())).unwrap();
            if a[p * n + k].norm() <= 1e-300 + f64::EPSILON * 1e-3 * scale {
                return Err(Error::Numeric("singular matrix in LU".into()));
            }
            if p != k {
                for c in 0..n {
                    a.swap(p * n + c, k * n + c);
                }
                perm.swap(p, k);
            }
            let pivot = a[k * n + k];
            for r in k + 1..n {
                let f = a[r * n + k] / pivot;
                if f == C64::new(0.0, 0.0) {
                    continue;
                }
                a[r * n + k] = f;
                for c in k + 1..n {
                    let v = a[k * n + c];
                    a[r * n + c] -= f * v;
                }
            }
        }
        Ok(Self { n, lu: a, perm })
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let n = self.n;
        let mut x: Vec<C64> = self.perm.iter().map(|&p| b[p]).collect();
        for r in 0..n {
            let mut s = x[r];
            for c in 0..r {
                s -= self.lu[r * n + c] * x[c];
            }
            x[r] = s;
        }
        for r in (0..n).rev() {
            let mut s = x[r];
            for c in r + 1..n {
                s -= self.lu[r * n + c] * x[c];
            }
            x[r] = s / self.lu[r * n + r];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn diagonal_spectrum_sorted() {
        let m = Matrix::from_rows(vec![
            vec![0.5, 0.0, 0.0],
            vec![0.0, -2.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ]);
        let rep = spectrum_with_multiplicity(&m, 0.0, &SpectrumOptions::default()).unwrap();
        let vals: Vec<f64> = rep.eigenvalues.iter().map(|e| e.re).collect();
        assert_eq!(vals, vec![-2.0, 1.0, 0.5]);
        assert!(rep.eigenvalues.iter().all(|e| e.alg == 1 && e.jordan == Some(vec![1])));
    }

    #[test]
    fn defective_block_detected() {
        let m = Matrix::from_rows(vec![
            vec![2.0, 1.0, 0.0, 0.0],
            vec![0.0, 2.0, 1.0, 0.0],
            vec![0.0, 0.0, 2.0, 0.0],
            vec![0.0, 0.0, 0.0, 2.0],
        ]);
        let rep = spectrum_with_multiplicity(&m, 0.0, &SpectrumOptions::default()).unwrap();
        assert_eq!(rep.eigenvalues.len(), 1);
        let e = &rep.eigenvalues[0];
        assert_eq!(e.alg, 4);
        assert_eq!(e.geo, Some(2));
        assert_eq!(e.jordan, Some(vec![3, 1]));
        assert_abs_diff_eq!(e.re, 2.0, epsilon = 1e-4);
    }

    #[test]
    fn rotation_gives_exact_conjugates() {
        let m = Matrix::from_rows(vec![vec![0.0, -1.0], vec![1.0, 0.0]]);
        let rep = spectrum_with_multiplicity(&m, 0.0, &SpectrumOptions::default()).unwrap();
        assert_eq!(rep.eigenvalues.len(), 2);
        assert_eq!(rep.eigenvalues[0].im, -rep.eigenvalues[1].im);
        assert!(rep.eigenvalues[0].im < 0.0);
    }

    #[test]
    fn untrusted_flag() {
        let m = Matrix::from_rows(vec![vec![1.0, 0.0], vec![0.0, 0.1]]);
        let rep = spectrum_with_multiplicity(&m, 0.2, &SpectrumOptions::default()).unwrap();
        assert!(rep.eigenvalues[0].trusted);
        assert!(!rep.eigenvalues[1].trusted);
        assert_eq!(rep.eigenvalues[1].jordan, None);
    }

    #[test]
    fn complex_lu_solves() {
        let a = vec![C64::new(2.0, 1.0), C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(3.0, 0.0)];
        let lu = ComplexLu::new(2, a.clone()).unwrap();
        let b = vec![C64::new(1.0, 0.0), C64::new(0.0, 2.0)];
        let x = lu.solve(&b);
        for r in 0..2 {
            let s = a[r * 2] * x[0] + a[r * 2 + 1] * x[1];
            assert_abs_diff_eq!((s - b[r]).norm(), 0.0, epsilon = 1e-14);
        }
    }
}
