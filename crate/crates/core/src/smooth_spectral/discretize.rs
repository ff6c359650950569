//! Finite-rank spectra: Ulam cells and piecewise Chebyshev collocation.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::operators::{OperatorTag, SmoothOperators};
use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, spectrum_with_multiplicity, Matrix, SpectrumOptions, SpectrumReport};
use crate::map_model::BranchMap;
use crate::quadrature::{self, NodeFamily, PanelGrid, Rule};

pub const MAX_BASIS: usize = 4096;
pub const DRIFT_TOL: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Basis {
    /// Indicators of `N` equal cells.
    Ulam,
    /// Collocation at Chebyshev points of the given order on panels inside each branch.
    Chebyshev { order: usize },
}

/// Spectrum at size `N`, each eigenvalue paired with its distance to the spectrum at `2N`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiscreteSpectrum {
    pub basis: Basis,
    pub operator: OperatorTag,
    pub size: usize,
    pub dim: usize,
    pub report: SpectrumReport,
    /// Aligned with `report.eigenvalues`.
    pub drift: Vec<f64>,
}

impl DiscreteSpectrum {
    pub fn converged(&self) -> impl Iterator<Item = (C64, usize)> + '_ {
        self.report.eigenvalues.iter().zip(&self.drift).filter(|(_, d)| **d <= DRIFT_TOL).map(|(e, _)| (e.value(), e.alg))
    }

    pub fn unconverged(&self) -> usize {
        self.drift.iter().filter(|d| **d > DRIFT_TOL).count()
    }
}

/// Matrix of `op` in `basis` with `size` cells (Ulam) or about `size` nodes (Chebyshev).
pub fn discretize(map: &dyn BranchMap, op: OperatorTag, basis: Basis, size: usize) -> Result<Matrix<f64>> {
    if size == 0 || size > MAX_BASIS {
        return Err(Error::InvalidArgument(format!("basis size {size} outside 1..={MAX_BASIS}")));
    }
    match basis {
        Basis::Ulam => match op {
            OperatorTag::L(k) => ulam_matrix(map, k as i32, size),
            _ => Err(Error::Unsupported(format!("Ulam basis supports L_k only, not {}", op.as_string()))),
        },
        Basis::Chebyshev { order } => {
            if order < 2 {
                return Err(Error::InvalidArgument("Chebyshev order must be at least 2".into()));
            }
            let panels = (size / (order * map.n_branches())).max(1);
            let grid = PanelGrid::uniform(map.knots(), panels, Rule::new(NodeFamily::Chebyshev, order));
            Ok(SmoothOperators::from_grid(map, grid)?.matrix(op))
        }
    }
}

/// `P_{ij} = (1/|C_i|) ∫_{C_j ∩ f^{-1} C_i} |f'|^{1-k}`; for `k = 1` the exact
/// cell-preimage measures, so columns sum to one.
fn ulam_matrix(map: &dyn BranchMap, k: i32, n: usize) -> Result<Matrix<f64>> {
    let h = 1.0 / n as f64;
    let mut m = Matrix::zeros(n, n);
    for j in 0..map.n_branches() {
        let (lo, hi) = map.image(j);
        let first = ((lo / h).floor() as usize).min(n - 1);
        for i in first..n {
            let (a, b) = (i as f64 * h, (i + 1) as f64 * h);
            let (a, b) = (a.max(lo), b.min(hi));
            if b <= a {
                if a >= hi {
                    break;
                }
                continue;
            }
            let (ya, yb) = (map.inverse(j, a)?, map.inverse(j, b)?);
            let (ya, yb) = (ya.min(yb), ya.max(yb));
            let mut c = ((ya / h).floor() as usize).min(n - 1);
            while c < n && (c as f64) * h < yb {
                let (s, t) = (ya.max(c as f64 * h), yb.min((c + 1) as f64 * h));
                if t > s {
                    let w = if k == 1 {
                        t - s
                    } else {
                        quadrature::integrate(|y| map.deriv(j, y).abs().powi(1 - k), s, t, 8, 1)
                    };
                    m[(i, c)] += w / h;
                }
                c += 1;
            }
        }
    }
    Ok(m)
}

/// Spectrum of `op` at sizes `N` and `2N`.
pub fn discretize_spectrum(map: &dyn BranchMap, op: OperatorTag, basis: Basis, size: usize) -> Result<DiscreteSpectrum> {
    if 2 * size > MAX_BASIS {
        return Err(Error::InvalidArgument(format!("basis size {size} too large for the 2N comparison (max {})", MAX_BASIS / 2)));
    }
    let (coarse, fine) = rayon::join(|| discretize(map, op, basis, size), || discretize(map, op, basis, 2 * size));
    let (coarse, fine) = (coarse?, fine?);
    let opts = SpectrumOptions { max_analyzed_dim: 0, ..Default::default() };
    let (report, fine_values) = rayon::join(|| spectrum_with_multiplicity(&coarse, 0.0, &opts), || eigenvalues(&fine));
    let (report, fine_values) = (report?, fine_values?);
    let drift = report
        .eigenvalues
        .iter()
        .map(|e| fine_values.iter().map(|z| (z - e.value()).norm()).fold(f64::INFINITY, f64::min))
        .collect();
    Ok(DiscreteSpectrum { basis, operator: op, size, dim: coarse.rows(), report, drift })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map_model::catalog;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ulam_columns_sum_to_one() {
        for size in [64, 100] {
            let m = ulam_matrix(&catalog::quadratic_map(), 1, size).unwrap();
            for c in 0..size {
                let s: f64 = (0..size).map(|r| m[(r, c)]).sum();
                assert_abs_diff_eq!(s, 1.0, epsilon = 1e-10);
            }
        }
        let m = ulam_matrix(&catalog::scan_map::<f64>(), 1, 48).unwrap();
        for c in 0..48 {
            let s: f64 = (0..48).map(|r| m[(r, c)]).sum();
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn chebyshev_l0_of_quadratic_map() {
        let s = discretize_spectrum(&catalog::quadratic_map(), OperatorTag::L(0), Basis::Chebyshev { order: 16 }, 96).unwrap();
        let lead = s.report.eigenvalues[0].value();
        assert_abs_diff_eq!(lead.re, 3.0, epsilon = 1e-8);
        assert!(s.report.eigenvalues[1..].iter().all(|e| e.modulus() <= 1.0 + 1e-6));
    }

    #[test]
    fn chebyshev_l1_of_doubling_map() {
        let s = discretize_spectrum(&catalog::doubling_map::<f64>(), OperatorTag::L(1), Basis::Chebyshev { order: 12 }, 24).unwrap();
        let vals: Vec<f64> = s.converged().map(|(z, _)| z.re).filter(|x| x.abs() > 1e-6).collect();
        for (v, l) in vals.iter().zip(0..5) {
            assert_abs_diff_eq!(*v, 0.5f64.powi(l), epsilon = 1e-10);
        }
    }
}
