//! Piecewise-affine Markov maps.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::map_model::{BranchMap, ValidationReport};
use crate::scalar::Scalar;

/// Piecewise-affine expanding Markov map, `f(x) = λ_j x + offset_j` on `I_j = [p_j, p_{j+1})`.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkovAffineMap<T> {
    partition: Vec<T>,
    slopes: Vec<T>,
    offsets: Vec<T>,
    adjacency: Vec<Vec<bool>>,
    knots_f64: Vec<f64>,
}

impl<T: Scalar> MarkovAffineMap<T> {
    /// Builds and validates the map; the adjacency matrix is derived from the images.
    pub fn new(partition: Vec<T>, slopes: Vec<T>, offsets: Vec<T>) -> Result<Self> {
        let report = Self::validate_parts(&partition, &slopes, &offsets);
        if !report.passed() {
            return Err(Error::Validation(Box::new(report)));
        }
        let adjacency = adjacency_of(&partition, &slopes, &offsets);
        let knots_f64 = partition.iter().map(Scalar::to_f64_lossy).collect();
        Ok(Self { partition, slopes, offsets, adjacency, knots_f64 })
    }

    pub fn partition(&self) -> &[T] {
        &self.partition
    }

    pub fn slopes(&self) -> &[T] {
        &self.slopes
    }

    pub fn offsets(&self) -> &[T] {
        &self.offsets
    }

    pub fn n(&self) -> usize {
        self.slopes.len()
    }

    /// Interval length `|I_j|`.
    pub fn width(&self, j: usize) -> T {
        self.partition[j + 1].clone() - self.partition[j].clone()
    }

    /// `q_j = f(p_j^+)`.
    pub fn q(&self, j: usize) -> T {
        self.slopes[j].clone() * self.partition[j].clone() + self.offsets[j].clone()
    }

    pub fn f(&self, j: usize, x: &T) -> T {
        self.slopes[j].clone() * x.clone() + self.offsets[j].clone()
    }

    /// Inverse branch `g_j(y) = (y - q_j) / λ_j + p_j`.
    pub fn g(&self, j: usize, y: &T) -> T {
        (y.clone() - self.q(j)) / self.slopes[j].clone() + self.partition[j].clone()
    }

    /// `A[i][j]`: whether `I_j ⊆ f(I_i)`.
    pub fn adjacency(&self) -> &[Vec<bool>] {
        &self.adjacency
    }

    pub fn adjacency_matrix(&self) -> Matrix<T> {
        Matrix::from_fn(self.n(), self.n(), |i, j| if self.adjacency[i][j] { T::one() } else { T::zero() })
    }

    /// Smallest `|λ_j|`.
    pub fn lambda_min(&self) -> T {
        self.slopes.iter().map(|s| s.abs()).fold(None, |m: Option<T>, s| match m {
            Some(m) if m <= s => Some(m),
            _ => Some(s),
        })
        .expect("at least one branch")
    }

    pub fn is_full_branch_exact(&self) -> bool {
        self.adjacency.iter().all(|row| row.iter().all(|&a| a))
    }

    /// Runs every structural invariant.
    pub fn validate(&self) -> ValidationReport {
        let mut r = Self::validate_parts(&self.partition, &self.slopes, &self.offsets);
        let n = self.n();
        let mut worst = 0.0f64;
        let mut at = None;
        for j in 0..n {
            let covered = (0..n)
                .filter(|&i| self.adjacency[j][i])
                .fold(T::zero(), |acc, i| acc + self.width(i));
            let expect = self.slopes[j].abs() * self.width(j);
            let d = (covered - expect).abs().to_f64_lossy();
            if d > worst || at.is_none() {
                worst = worst.max(d);
                at = Some(self.knots_f64[j]);
            }
        }
        r.push("image_length", worst <= 1e-12, at, worst, "sum of covered interval lengths equals |λ_j||I_j|");
        r
    }

    fn validate_parts(partition: &[T], slopes: &[T], offsets: &[T]) -> ValidationReport {
        let mut r = ValidationReport::default();
        let n = partition.len().saturating_sub(1);
        r.push(
            "branch_count",
            slopes.len() == n && offsets.len() == n && n >= 1,
            None,
            slopes.len() as f64,
            format!("{} branches for {} partition intervals", slopes.len(), n),
        );
        let endpoints_ok = partition.first().map_or(false, |p| p.is_zero())
            && partition.last().map_or(false, |p| p.is_one());
        r.push("partition_endpoints", endpoints_ok, None, 0.0, "partition starts at 0 and ends at 1");
        let mut sorted = true;
        let mut gap_min = f64::INFINITY;
        let mut gap_at = None;
        for w in partition.windows(2) {
            let gap = (w[1].clone() - w[0].clone()).to_f64_lossy();
            if gap < gap_min {
                gap_min = gap;
                gap_at = Some(w[0].to_f64_lossy());
            }
            sorted &= w[1] > w[0];
        }
        r.push("partition_sorted", sorted, gap_at, gap_min, "partition strictly increasing");

        let mut min_slope = f64::INFINITY;
        let mut min_at = None;
        for (j, s) in slopes.iter().enumerate() {
            let v = s.abs().to_f64_lossy();
            if v < min_slope {
                min_slope = v;
                min_at = partition.get(j).map(Scalar::to_f64_lossy);
            }
        }
        r.push("expansion", min_slope > 1.0, min_at, min_slope, "min |λ_j| > 1");
        if slopes.len() != n || offsets.len() != n || !sorted || n == 0 {
            return r;
        }

        let unit_tol = T::tol(1e-12);
        let mut worst_out = 0.0f64;
        let mut out_at = None;
        let mut markov_ok = true;
        let mut markov_worst = 0.0f64;
        let mut markov_at = None;
        for j in 0..n {
            let a = slopes[j].clone() * partition[j].clone() + offsets[j].clone();
            let b = slopes[j].clone() * partition[j + 1].clone() + offsets[j].clone();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let out = (-lo.clone()).to_f64_lossy().max((hi.clone() - T::one()).to_f64_lossy()).max(0.0);
            if out > worst_out {
                worst_out = out;
                out_at = Some(partition[j].to_f64_lossy());
            }
            if -lo.clone() > unit_tol || hi.clone() - T::one() > unit_tol.clone() {
                continue;
            }
            for end in [lo, hi] {
                let d = nearest_knot_distance(partition, &end);
                let df = d.to_f64_lossy();
                if df > markov_worst {
                    markov_worst = df;
                    markov_at = Some(end.to_f64_lossy());
                }
                if d > T::tol(1e-10) {
                    markov_ok = false;
                }
            }
        }
        r.push("images_in_unit_interval", worst_out <= 1e-12, out_at, worst_out, "branch images inside [0,1]");
        r.push("markov", markov_ok, markov_at, markov_worst, "image endpoints are partition points");
        r
    }
}

fn nearest_knot_distance<T: Scalar>(partition: &[T], x: &T) -> T {
    partition
        .iter()
        .map(|p| (p.clone() - x.clone()).abs())
        .fold(None, |m: Option<T>, d| match m {
            Some(m) if m <= d => Some(m),
            _ => Some(d),
        })
        .unwrap_or_else(T::zero)
}

fn adjacency_of<T: Scalar>(partition: &[T], slopes: &[T], offsets: &[T]) -> Vec<Vec<bool>> {
    let n = slopes.len();
    let tol = T::tol(1e-10);
    (0..n)
        .map(|i| {
            let a = slopes[i].clone() * partition[i].clone() + offsets[i].clone();
            let b = slopes[i].clone() * partition[i + 1].clone() + offsets[i].clone();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            (0..n)
                .map(|j| partition[j].clone() >= lo.clone() - tol.clone() && partition[j + 1].clone() <= hi.clone() + tol.clone())
                .collect()
        })
        .collect()
}

impl MarkovAffineMap<f64> {
    /// Converts an exact map to floating point.
    pub fn from_exact<T: Scalar>(m: &MarkovAffineMap<T>) -> Self {
        let conv = |v: &[T]| v.iter().map(Scalar::to_f64_lossy).collect::<Vec<_>>();
        Self {
            partition: conv(&m.partition),
            slopes: conv(&m.slopes),
            offsets: conv(&m.offsets),
            adjacency: m.adjacency.clone(),
            knots_f64: conv(&m.partition),
        }
    }
}

impl<T: Scalar> BranchMap for MarkovAffineMap<T> {
    fn knots(&self) -> &[f64] {
        &self.knots_f64
    }

    fn eval(&self, j: usize, x: f64) -> f64 {
        self.slopes[j].to_f64_lossy() * x + self.offsets[j].to_f64_lossy()
    }

    fn deriv(&self, j: usize, _x: f64) -> f64 {
        self.slopes[j].to_f64_lossy()
    }

    fn distortion(&self, _j: usize, _x: f64) -> f64 {
        0.0
    }

    fn inverse(&self, j: usize, y: f64) -> Result<f64> {
        let (lo, hi) = BranchMap::image(self, j);
        if y < lo - 1e-12 || y > hi + 1e-12 {
            return Err(Error::OutsideImage { branch: j, y });
        }
        let q = self.q(j).to_f64_lossy();
        Ok((y - q) / self.slopes[j].to_f64_lossy() + self.knots_f64[j])
    }

    fn is_full_branch(&self) -> bool {
        self.is_full_branch_exact()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map_model::catalog;
    use crate::scalar::{rat, Rational};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn jordan_adjacency() {
        let m = catalog::jordan_map::<Rational>();
        let a: Vec<Vec<u8>> = m.adjacency().iter().map(|r| r.iter().map(|&b| b as u8).collect()).collect();
        assert_eq!(a, vec![vec![0, 1, 1, 1], vec![1, 1, 1, 0], vec![1, 1, 0, 0], vec![1, 1, 1, 0]]);
        let report = m.validate();
        assert!(report.passed(), "{}", report.summary());
        assert_eq!(report.get("expansion").unwrap().measured, 2.0);
    }

    #[test]
    fn branch_inverse_examples() {
        let m = catalog::jordan_map::<f64>();
        assert_abs_diff_eq!(m.inverse(2, 0.3).unwrap(), 0.65, epsilon = 1e-15);
        let d = catalog::doubling_map::<f64>();
        assert_abs_diff_eq!(d.inverse(0, 0.8).unwrap(), 0.4, epsilon = 1e-15);
        assert!(m.inverse(2, 0.9).is_err());
        let e = catalog::jordan_map::<Rational>();
        assert_eq!(e.g(2, &rat(3, 10)), rat(13, 20));
    }

    #[test]
    fn slope_one_fails_expansion() {
        let err = MarkovAffineMap::new(vec![0.0, 1.0], vec![1.0], vec![0.0]).unwrap_err();
        match err {
            Error::Validation(r) => {
                let c = r.get("expansion").unwrap();
                assert!(!c.passed);
                assert_eq!(c.measured, 1.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_markov_rejected() {
        // image of the first branch ends at 0.6, not a partition point
        let err = MarkovAffineMap::new(vec![0.0, 0.3, 1.0], vec![2.0, 1.0 / 0.7], vec![0.0, -0.3 / 0.7]).unwrap_err();
        assert!(matches!(err, Error::Validation(r) if !r.get("markov").unwrap().passed));
    }

    proptest! {
        #[test]
        fn inverse_of_f_is_identity(t in proptest::collection::vec(0.0f64..1.0, 100)) {
            for m in [catalog::jordan_map::<f64>(), catalog::scan_map::<f64>()] {
                for &u in &t {
                    let s = u * m.n() as f64;
                    let j = (s as usize).min(m.n() - 1);
                    let k = m.knots();
                    let x = k[j] + (k[j + 1] - k[j]) * (s - j as f64);
                    let back = m.inverse(j, m.eval(j, x)).unwrap();
                    prop_assert!((back - x).abs() <= 1e-13);
                }
            }
        }
    }
}
