//! Locating eigenvalues through `ν - L = (ν - L_2)[Id - (ν - L_2)^{-1} 𝒦]`.
//!
//! On a full-branch map the state is `g = h'` and `𝒦 = L_1(D_f φ(·))`. When the
//! branches are not full, `h` jumps at the knots, so the state is extended by the
//! values `c_i = h(p_i^+)`: on each interval `h = c_i + ∫_{p_i}^x g`, and
//!
//! ```text
//! 𝒦 = | L_1 D_f Ψ_I   L_1 D_f C |      R(ν) = diag((ν - L_2)^{-1}, 1/ν)
//!     | E             B         |
//! ```
//!
//! with `Ψ_I g = ∫_{p_i}^x g`, `C` the piecewise constant built from `c`,
//! `E` the integrals read off at the preimages of the knots and `B` the matrix
//! of knot-to-knot weights (`B_1` for an affine map).

use faer::prelude::*;
use faer::Mat;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::map_model::BranchMap;
use crate::quadrature::{NodeFamily, PanelGrid, Rule};
use crate::transfer::GridTransfer;

pub const DEFAULT_SCAN_TOL: f64 = 1e-3;
const SECANT_STEPS: usize = 60;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    Continuous,
    Piecewise,
}

/// The `ν`-independent pieces at one basis size.
#[derive(Clone, Debug)]
pub struct ScanOperator {
    pub formulation: Formulation,
    /// Number of grid nodes; the state has `nodes + extra` entries.
    pub nodes: usize,
    pub extra: usize,
    l2: Matrix<f64>,
    kernel: Matrix<f64>,
}

impl ScanOperator {
    /// Chebyshev collocation of the given order on each branch interval.
    pub fn new(map: &dyn BranchMap, order: usize) -> Result<Self> {
        if order < 2 {
            return Err(Error::InvalidArgument("scan basis order must be at least 2".into()));
        }
        let grid = PanelGrid::uniform(map.knots(), 1, Rule::new(NodeFamily::Chebyshev, order));
        let t = GridTransfer::new(map, grid)?;
        let l2 = t.operator(|p| p.deriv.signum() / (p.deriv * p.deriv)).to_dense();
        let l1d = t.l1_distortion();
        let g = &t.grid;
        let n = g.len();
        if map.is_full_branch() {
            let mut phi = g.cumulative_operator(&[0.0]).to_dense();
            for i in 0..n {
                for j in 0..n {
                    phi[(i, j)] -= g.weights[j] * (1.0 - g.nodes[j]);
                }
            }
            let kernel = l1d.mul_dense(&phi);
            return Ok(Self { formulation: Formulation::Continuous, nodes: n, extra: 0, l2, kernel });
        }
        let knots = map.knots().to_vec();
        let m = map.n_branches();
        let psi = l1d.mul_dense(&g.cumulative_operator(&knots[..m]).to_dense());
        let mut kernel = Matrix::zeros(n + m, n + m);
        for i in 0..n {
            for j in 0..n {
                kernel[(i, j)] = psi[(i, j)];
            }
            for p in &t.preimages[i] {
                kernel[(i, n + p.branch)] += p.distortion / p.deriv.abs();
            }
        }
        for (i, &x) in knots[..m].iter().enumerate() {
            for j in 0..m {
                let (lo, hi) = map.image(j);
                if x < lo - 1e-12 || x >= hi - 1e-12 {
                    continue;
                }
                let y = map.inverse(j, x.max(lo))?;
                // right limit of x is the left limit of y on a decreasing branch
                let w = 1.0 / map.deriv(j, y).abs();
                for (col, v) in g.integral_row(knots[j], y) {
                    kernel[(n + i, col)] += w * v;
                }
                kernel[(n + i, n + j)] += w;
            }
        }
        Ok(Self { formulation: Formulation::Piecewise, nodes: n, extra: m, l2, kernel })
    }

    pub fn dim(&self) -> usize {
        self.nodes + self.extra
    }

    /// `R(ν) 𝒦` as a dense complex matrix.
    pub fn resolvent_product(&self, nu: C64) -> Mat<C64> {
        let (n, d) = (self.nodes, self.dim());
        let a = Mat::from_fn(n, n, |i, j| {
            let v = C64::new(-self.l2[(i, j)], 0.0);
            if i == j {
                v + nu
            } else {
                v
            }
        });
        let top = Mat::from_fn(n, d, |i, j| C64::new(self.kernel[(i, j)], 0.0));
        let solved = a.partial_piv_lu().solve(&top);
        Mat::from_fn(d, d, |i, j| if i < n { solved[(i, j)] } else { C64::new(self.kernel[(i, j)], 0.0) / nu })
    }

    /// Eigenvalue of `R(ν) 𝒦` nearest to 1.
    pub fn test_eigenvalue(&self, nu: C64) -> Result<C64> {
        let m = self.resolvent_product(nu);
        let eig = m.eigenvalues().map_err(|e| Error::Eigen(format!("{e:?}")))?;
        Ok(eig
            .into_iter()
            .min_by(|a, b| (a - 1.0).norm().total_cmp(&(b - 1.0).norm()))
            .unwrap_or(C64::new(0.0, 0.0)))
    }
}

/// Polar grid on `r_min < |ν| < r_max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub r_min: f64,
    pub r_max: f64,
    pub n_r: usize,
    pub n_theta: usize,
}

impl ScanGrid {
    /// The annulus `1/λ < |ν| < 1` with a small margin at both ends.
    pub fn annulus(lambda: f64, n_r: usize, n_theta: usize) -> Self {
        let r_min = 1.0 / lambda;
        Self { r_min: r_min + 1e-3 * (1.0 - r_min), r_max: 1.0 - 1e-3 * (1.0 - r_min), n_r, n_theta }
    }

    pub fn point(&self, i: usize, k: usize) -> C64 {
        let r = self.r_min + (self.r_max - self.r_min) * (i as f64 + 0.5) / self.n_r as f64;
        C64::from_polar(r, 2.0 * std::f64::consts::PI * k as f64 / self.n_theta as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub nu: C64,
    /// `|μ_N(ν) - 1|`.
    pub distance: f64,
    /// `|μ_N(ν) - μ_{2N}(ν)|`.
    pub drift: f64,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub nu: C64,
    pub distance: f64,
    pub drift: f64,
    /// Grid point the refinement started from.
    pub seed: C64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanResult {
    pub formulation: Formulation,
    pub order: usize,
    pub dim: usize,
    pub lambda: f64,
    pub grid: ScanGrid,
    pub tol: f64,
    pub points: Vec<ScanPoint>,
    pub candidates: Vec<Candidate>,
    /// Largest drift over grid points that are not within `tol` of a candidate.
    pub max_drift_elsewhere: f64,
}

/// `min |f'|` over a dense sample of each branch.
pub fn min_expansion(map: &dyn BranchMap) -> f64 {
    let k = map.knots();
    (0..map.n_branches())
        .flat_map(|j| (0..=512).map(move |i| (j, k[j] + (k[j + 1] - k[j]) * i as f64 / 512.0)))
        .map(|(j, x)| map.deriv(j, x).abs())
        .fold(f64::INFINITY, f64::min)
}

/// Scans `grid` with basis order `order`, comparing against `2 * order`.
pub fn remark5_scan(map: &dyn BranchMap, grid: ScanGrid, order: usize, tol: f64) -> Result<ScanResult> {
    let lambda = min_expansion(map);
    let floor = (1.0 + 1e-6) / lambda;
    if grid.r_min <= floor || grid.r_max <= grid.r_min || grid.n_r == 0 || grid.n_theta == 0 {
        return Err(Error::InvalidArgument(format!(
            "scan annulus ({}, {}) must lie outside |nu| = {floor:.6} (1/lambda) and be non-empty",
            grid.r_min, grid.r_max
        )));
    }
    let (coarse, fine) = rayon::join(|| ScanOperator::new(map, order), || ScanOperator::new(map, 2 * order));
    let (coarse, fine) = (coarse?, fine?);
    let idx: Vec<(usize, usize)> = (0..grid.n_r).flat_map(|i| (0..grid.n_theta).map(move |k| (i, k))).collect();
    let points = idx
        .par_iter()
        .map(|&(i, k)| {
            let nu = grid.point(i, k);
            let a = coarse.test_eigenvalue(nu)?;
            let b = fine.test_eigenvalue(nu)?;
            let distance = (a - 1.0).norm();
            Ok(ScanPoint { nu, distance, drift: (a - b).norm(), flagged: distance < tol })
        })
        .collect::<Result<Vec<_>>>()?;

    let at = |i: usize, k: usize| &points[i * grid.n_theta + k];
    let mut seeds = Vec::new();
    for i in 0..grid.n_r {
        for k in 0..grid.n_theta {
            let d = at(i, k).distance;
            let mut is_min = true;
            for di in [-1i64, 0, 1] {
                for dk in [-1i64, 0, 1] {
                    let ii = i as i64 + di;
                    if (di, dk) == (0, 0) || ii < 0 || ii >= grid.n_r as i64 {
                        continue;
                    }
                    let kk = (k as i64 + dk).rem_euclid(grid.n_theta as i64) as usize;
                    if at(ii as usize, kk).distance < d {
                        is_min = false;
                    }
                }
            }
            if is_min {
                seeds.push(at(i, k).nu);
            }
        }
    }
    let step = 0.25 * (grid.r_max - grid.r_min) / grid.n_r as f64;
    let refined: Vec<Option<Candidate>> = seeds
        .par_iter()
        .map(|&seed| {
            let nu = refine(&coarse, seed, step).ok()?;
            let r = nu.norm();
            if !(r > grid.r_min && r < grid.r_max) {
                return None;
            }
            let a = coarse.test_eigenvalue(nu).ok()?;
            let distance = (a - 1.0).norm();
            if distance >= tol {
                return None;
            }
            let b = fine.test_eigenvalue(nu).ok()?;
            Some(Candidate { nu, distance, drift: (a - b).norm(), seed })
        })
        .collect();
    let mut candidates: Vec<Candidate> = Vec::new();
    for c in refined.into_iter().flatten() {
        if !candidates.iter().any(|d| (d.nu - c.nu).norm() < 1e-8) {
            candidates.push(c);
        }
    }
    candidates.sort_by_key(|c| crate::linalg::order_key(c.nu));
    let radius = 2.0 * step.max(2.0 * std::f64::consts::PI * grid.r_max / grid.n_theta as f64);
    let max_drift_elsewhere = points
        .iter()
        .filter(|p| candidates.iter().all(|c| (c.nu - p.nu).norm() > radius))
        .map(|p| p.drift)
        .fold(0.0, f64::max);
    Ok(ScanResult {
        formulation: coarse.formulation,
        order,
        dim: coarse.dim(),
        lambda,
        grid,
        tol,
        points,
        candidates,
        max_drift_elsewhere,
    })
}

/// Secant iteration on `μ_N(ν) - 1`.
fn refine(op: &ScanOperator, seed: C64, step: f64) -> Result<C64> {
    let mut x0 = seed;
    let mut x1 = seed + C64::new(step, 0.5 * step);
    let mut f0 = op.test_eigenvalue(x0)? - 1.0;
    for _ in 0..SECANT_STEPS {
        let f1 = op.test_eigenvalue(x1)? - 1.0;
        if f1.norm() < 1e-14 {
            return Ok(x1);
        }
        let denom = f1 - f0;
        if denom.norm() == 0.0 {
            break;
        }
        let x2 = x1 - f1 * (x1 - x0) / denom;
        if !(x2.re.is_finite() && x2.im.is_finite()) || (x2 - seed).norm() > 1.0 {
            break;
        }
        if (x2 - x1).norm() < 1e-15 * x1.norm().max(1.0) {
            return Ok(x2);
        }
        (x0, f0, x1) = (x1, f1, x2);
    }
    Ok(x1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map_model::catalog;
    use approx::assert_abs_diff_eq;

    #[test]
    fn piecewise_kernel_of_affine_map_holds_b1() {
        let map = catalog::scan_map::<f64>();
        let op = ScanOperator::new(&map, 4).unwrap();
        assert_eq!(op.formulation, Formulation::Piecewise);
        let b1 = crate::affine_resonances::build_bk(&map, 1, crate::affine_resonances::WeightMode::Srb);
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!(op.kernel[(op.nodes + i, op.nodes + j)], b1[(i, j)], epsilon = 1e-14);
            }
        }
        for i in 0..op.nodes {
            assert!((0..op.dim()).all(|j| op.kernel[(i, j)] == 0.0));
        }
    }

    #[test]
    fn scan_map_resonance_found() {
        let map = catalog::scan_map::<f64>();
        let res = remark5_scan(&map, ScanGrid::annulus(2.0, 12, 48), 6, DEFAULT_SCAN_TOL).unwrap();
        let target = (3.0 + 33f64.sqrt()) / 12.0;
        assert_eq!(res.candidates.len(), 1, "{:?}", res.candidates);
        assert_abs_diff_eq!(res.candidates[0].nu.re, target, epsilon = 1e-10);
        assert!(res.candidates[0].nu.im.abs() < 1e-10);
        assert!(res.max_drift_elsewhere < 1e-3);
    }

    #[test]
    fn doubling_map_has_no_candidates() {
        let map = catalog::doubling_map::<f64>();
        let res = remark5_scan(&map, ScanGrid::annulus(2.0, 8, 32), 6, DEFAULT_SCAN_TOL).unwrap();
        assert_eq!(res.formulation, Formulation::Continuous);
        assert!(res.candidates.is_empty());
        assert!(res.points.iter().all(|p| !p.flagged && p.distance >= 1.0 - 1e-12));
    }

    #[test]
    fn annulus_must_avoid_essential_radius() {
        let map = catalog::doubling_map::<f64>();
        let g = ScanGrid { r_min: 0.5, r_max: 0.9, n_r: 2, n_theta: 4 };
        assert!(matches!(remark5_scan(&map, g, 4, 1e-3), Err(Error::InvalidArgument(_))));
    }
}
