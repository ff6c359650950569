//! Spectral-gap parameters of a smooth full-branch map.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::operators::{OperatorTag, SmoothOperators};
use super::xi::largest_real_zero;
use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, sort_eigenvalues};
use crate::map_model::{BranchMap, ExprNode, SmoothFullBranchMap};
use crate::quadrature::integrate_adaptive;

const QUAD_TOL: f64 = 1e-13;
const MU2_SAMPLES: usize = 400;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapParams {
    pub n_branches: usize,
    /// `min f'`.
    pub lambda: f64,
    /// `max f'`.
    pub lambda_max: f64,
    pub df_l1: f64,
    pub df_sup: f64,
    pub df_prime_l1: f64,
    /// `1/λ + ‖D_f‖_{L¹}`, or `2/f'(1) - 1/f'(0)` when the region hypotheses hold.
    pub tau: f64,
    /// `1/λ + ‖D_f‖_{L¹}` by quadrature, always.
    pub tau_quadrature: f64,
    /// `1/f'(1)`.
    pub mu_star: f64,
    /// `1/f'(1) - 1/f'(0)`.
    pub delta: f64,
    /// `1 - Σ_i 1/f'(p_i)` over the left endpoints of the branches.
    pub gamma: f64,
    /// `μ*²`.
    pub essential_bound: f64,
    /// Second largest modulus in the spectrum of the discretized `L_+`.
    pub mu1: f64,
    /// Largest real zero of `Ξ` in `(μ₁, μ*)`, or `μ₁` when there is none; a numerical estimate only.
    pub mu2: f64,
    pub mu2_estimated: bool,
    /// `D_f >= 0`, `D_f ≢ 0` and `f'` continuous at the knots.
    pub region_hypotheses: bool,
    pub hypothesis_failures: Vec<String>,
}

impl GapParams {
    /// Same as [`GapParams::region_hypotheses`] but without requiring `D_f ≢ 0`.
    pub fn positive_distortion(&self) -> bool {
        self.hypothesis_failures.iter().all(|f| f.starts_with("distortion_nonzero"))
    }
}

pub fn gap_params(map: &SmoothFullBranchMap) -> Result<GapParams> {
    let ops = SmoothOperators::refined(map)?;
    gap_params_with(map, &ops)
}

/// As [`gap_params`], reusing assembled operators for the `μ₂` estimate.
pub fn gap_params_with(map: &SmoothFullBranchMap, ops: &SmoothOperators) -> Result<GapParams> {
    let e = map.exprs();
    let n = map.n_branches();
    let knots = map.knots();
    let ((lambda, _), (lambda_max, _)) = e.extremes(|b, x| b.df.eval(x));
    let ((_, _), (df_sup, _)) = e.extremes(|b, x| b.dist.eval(x).abs());
    let l1 = |pick: fn(&crate::map_model::BranchExprs) -> &ExprNode| -> f64 {
        (0..n)
            .map(|j| integrate_adaptive(|x| pick(map.branch(j)).eval(x).abs(), knots[j], knots[j + 1], QUAD_TOL).0)
            .sum()
    };
    let df_l1 = l1(|b| &b.dist);
    let df_prime_l1 = l1(|b| &b.dist_prime);

    let d0 = map.branch(0).df.eval(0.0);
    let d1 = map.branch(n - 1).df.eval(1.0);
    let mu_star = 1.0 / d1;
    let delta = mu_star - 1.0 / d0;
    let gamma = 1.0 - (0..n).map(|j| 1.0 / map.branch(j).df.eval(knots[j])).sum::<f64>();

    let report = map.region_hypotheses();
    let hypothesis_failures: Vec<String> =
        report.checks.iter().filter(|c| !c.passed).map(|c| format!("{}: {}", c.name, c.detail)).collect();
    let region_hypotheses = hypothesis_failures.is_empty();
    let tau_quadrature = 1.0 / lambda + df_l1;
    let tau = if region_hypotheses { 2.0 / d1 - 1.0 / d0 } else { tau_quadrature };

    let plus = ops.matrix(OperatorTag::Plus);
    let mut spec = eigenvalues(&plus)?;
    sort_eigenvalues(&mut spec);
    let mu1 = spec.get(1).copied().unwrap_or(C64::new(0.0, 0.0)).norm();
    let positive = hypothesis_failures.iter().all(|f| f.starts_with("distortion_nonzero"));
    let mu2 = if positive && delta > 0.0 && mu1 < mu_star {
        let pad = 1e-6 * (mu_star - mu1);
        largest_real_zero(ops, &plus, mu1 + pad, mu_star - pad, MU2_SAMPLES)?.unwrap_or(mu1)
    } else {
        mu1
    };

    Ok(GapParams {
        n_branches: n,
        lambda,
        lambda_max,
        df_l1,
        df_sup,
        df_prime_l1,
        tau,
        tau_quadrature,
        mu_star,
        delta,
        gamma,
        essential_bound: mu_star * mu_star,
        mu1,
        mu2,
        mu2_estimated: true,
        region_hypotheses,
        hypothesis_failures,
    })
}

/// `sup |D_f - α/f' + α∘f|` over the sample grid, for a user-supplied `α`.
pub fn alpha_diagnostic(map: &SmoothFullBranchMap, alpha: &ExprNode) -> Result<f64> {
    let ((_, _), (sup, _)) = map.exprs().extremes(|b, x| (b.dist.eval(x) - alpha.eval(x) / b.df.eval(x) + alpha.eval(b.f.eval(x))).abs());
    if !sup.is_finite() {
        return Err(Error::Numeric("diagnostic is not finite".into()));
    }
    Ok(sup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map_model::catalog;
    use approx::assert_abs_diff_eq;

    #[test]
    fn quadratic_map_parameters() {
        let p = gap_params(&catalog::quadratic_map()).unwrap();
        assert!(p.region_hypotheses, "{:?}", p.hypothesis_failures);
        assert_eq!(p.mu_star, 0.5);
        assert_eq!(p.delta, 0.25);
        assert_eq!(p.tau, 0.75);
        assert_eq!(p.essential_bound, 0.25);
        assert_abs_diff_eq!(p.lambda, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.tau_quadrature, 0.75, epsilon = 1e-11);
        let gamma = 1.0 - 0.25 - 1.0 / (2.0 * 3f64.sqrt()) - 1.0 / (2.0 * 2f64.sqrt());
        assert_abs_diff_eq!(p.gamma, gamma, epsilon = 1e-14);
        assert!(p.gamma > 0.0 && p.gamma < 1.0);
        assert!(p.mu1 < p.mu2 && p.mu2 < p.mu_star);
        // the zero of Ξ is the sub-leading eigenvalue of the collocated L_1
        let s = crate::smooth_spectral::discretize_spectrum(
            &catalog::quadratic_map(),
            crate::smooth_spectral::OperatorTag::L(1),
            crate::smooth_spectral::Basis::Chebyshev { order: 16 },
            96,
        )
        .unwrap();
        assert_abs_diff_eq!(p.mu2, s.report.eigenvalues[1].re, epsilon = 1e-9);
    }

    #[test]
    fn affine_full_branch_parameters() {
        let exprs = ["3*x", "3*x - 1", "3*x - 2"].map(|s| ExprNode::parse(s).unwrap()).to_vec();
        let map = SmoothFullBranchMap::new(vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0], exprs).unwrap();
        let p = gap_params(&map).unwrap();
        assert_abs_diff_eq!(p.tau, 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(p.delta, 0.0);
        assert_eq!(p.df_l1, 0.0);
        assert!(!p.region_hypotheses);
        assert!(p.positive_distortion());
    }

    #[test]
    fn alpha_diagnostic_values() {
        let exprs = ["2*x", "2*x - 1"].map(|s| ExprNode::parse(s).unwrap()).to_vec();
        let map = SmoothFullBranchMap::new(vec![0.0, 0.5, 1.0], exprs).unwrap();
        assert_eq!(alpha_diagnostic(&map, &ExprNode::constant(0.0)).unwrap(), 0.0);
        let q = catalog::quadratic_map();
        assert_abs_diff_eq!(alpha_diagnostic(&q, &ExprNode::constant(0.0)).unwrap(), 0.5, epsilon = 1e-12);
    }
}
