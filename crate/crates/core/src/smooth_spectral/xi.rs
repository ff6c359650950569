//! `Ξ(z) = 1 + ∫ (1 - y) (z - L_+)^{-1} L_1 D_f (y) dy` by its Neumann series.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::operators::{OperatorTag, SmoothOperators};
use super::params::GapParams;
use crate::error::{Error, Result};
use crate::linalg::{ComplexLu, Matrix};

pub const MAX_TERMS: usize = 200_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct XiValue {
    pub z: C64,
    pub xi: C64,
    /// Bound on the discarded tail of the series.
    pub tail_bound: f64,
    pub terms: usize,
}

/// Caches the moments `I_n = ∫ (1 - y) L_+^n L_1 D_f`.
#[derive(Clone, Debug)]
pub struct XiFunction {
    ops: SmoothOperators,
    mu_star: f64,
    delta: f64,
    moments: Vec<f64>,
    state: Vec<f64>,
}

impl XiFunction {
    /// Requires `D_f >= 0` and `f'` continuous at the knots, which make `L_+` positive with
    /// `‖L_+‖_{L¹} = μ*`.
    pub fn new(ops: SmoothOperators, params: &GapParams) -> Result<Self> {
        if !params.positive_distortion() {
            return Err(Error::Unsupported(format!(
                "Xi needs D_f >= 0 and f' continuous at the knots; failed: {}",
                params.hypothesis_failures.join("; ")
            )));
        }
        let one = vec![1.0; ops.len()];
        let state = ops.l1_distortion(&one);
        Ok(Self { ops, mu_star: params.mu_star, delta: params.delta, moments: Vec::new(), state })
    }

    fn extend_to(&mut self, m: usize) {
        while self.moments.len() < m {
            self.moments.push(self.ops.moment(&self.state));
            self.state = self.ops.apply(OperatorTag::Plus, &self.state);
        }
    }

    /// Smallest `M` with `Δ (μ*/|z|)^{M+1} / (|z| - μ*) < tol`.
    pub fn terms_needed(&self, r: f64, tol: f64) -> Result<usize> {
        if r <= self.mu_star + 1e-6 {
            return Err(Error::InvalidArgument(format!("|z| = {r} must exceed mu* + 1e-6 = {}", self.mu_star + 1e-6)));
        }
        if self.delta <= 0.0 {
            return Ok(0);
        }
        let q = self.mu_star / r;
        let lead = self.delta / (r - self.mu_star);
        let m = if lead < tol { 0 } else { ((tol / lead).ln() / q.ln()).ceil() as usize };
        if m > MAX_TERMS {
            return Err(Error::NoConvergence(format!("{m} series terms needed at |z| = {r}")));
        }
        Ok(m)
    }

    fn tail(&self, r: f64, m: usize) -> f64 {
        self.delta * (self.mu_star / r).powi(m as i32 + 1) / (r - self.mu_star)
    }

    fn sum(&self, z: C64, m: usize) -> C64 {
        let w = z.inv();
        let mut p = w;
        let mut s = C64::new(1.0, 0.0);
        for i in self.moments.iter().take(m + 1) {
            s += p * i;
            p *= w;
        }
        s
    }

    pub fn eval(&mut self, z: C64, tol: f64) -> Result<XiValue> {
        let m = self.terms_needed(z.norm(), tol)?;
        self.extend_to(m + 1);
        Ok(XiValue { z, xi: self.sum(z, m), tail_bound: self.tail(z.norm(), m), terms: m + 1 })
    }

    /// Evaluates at every point; fails on the first invalid one.
    pub fn scan(&mut self, zs: &[C64], tol: f64) -> Result<Vec<XiValue>> {
        let ms = zs.iter().map(|z| self.terms_needed(z.norm(), tol)).collect::<Result<Vec<_>>>()?;
        self.extend_to(ms.iter().max().map_or(0, |m| m + 1));
        let this = &*self;
        Ok(zs
            .par_iter()
            .zip(ms)
            .map(|(&z, m)| XiValue { z, xi: this.sum(z, m), tail_bound: this.tail(z.norm(), m), terms: m + 1 })
            .collect())
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn mu_star(&self) -> f64 {
        self.mu_star
    }
}

/// `Ξ(z)` through a direct solve with the discretized `z - L_+`, valid wherever
/// that matrix is invertible, including `|z| <= μ*`.
pub fn xi_resolvent(ops: &SmoothOperators, plus: &Matrix<f64>, z: C64) -> Result<C64> {
    let n = ops.len();
    let a = (0..n * n)
        .map(|k| {
            let (i, j) = (k / n, k % n);
            let v = C64::new(-plus[(i, j)], 0.0);
            if i == j {
                v + z
            } else {
                v
            }
        })
        .collect();
    let lu = ComplexLu::new(n, a)?;
    let rhs: Vec<C64> = ops.l1_distortion(&vec![1.0; n]).into_iter().map(|v| C64::new(v, 0.0)).collect();
    let u = lu.solve(&rhs);
    let re: Vec<f64> = u.iter().map(|c| c.re).collect();
    let im: Vec<f64> = u.iter().map(|c| c.im).collect();
    Ok(C64::new(1.0 + ops.moment(&re), ops.moment(&im)))
}

/// Largest real zero of `Ξ` in `(lo, hi)`, located on a grid of `samples` points
/// from the top down and then bisected.
pub fn largest_real_zero(ops: &SmoothOperators, plus: &Matrix<f64>, lo: f64, hi: f64, samples: usize) -> Result<Option<f64>> {
    let f = |x: f64| xi_resolvent(ops, plus, C64::new(x, 0.0)).map(|v| v.re);
    let width = hi - lo;
    let xs: Vec<f64> = (1..samples).map(|i| hi - width * i as f64 / samples as f64).collect();
    let mut prev: Option<(f64, f64)> = None;
    for &x in &xs {
        let v = f(x)?;
        if let Some((px, pv)) = prev {
            if pv.signum() != v.signum() && pv.is_finite() && v.is_finite() {
                let (mut a, mut b, mut fa) = (x, px, v);
                for _ in 0..200 {
                    let m = 0.5 * (a + b);
                    let fm = f(m)?;
                    if fm.signum() == fa.signum() {
                        a = m;
                        fa = fm;
                    } else {
                        b = m;
                    }
                    if b - a < 1e-14 {
                        break;
                    }
                }
                return Ok(Some(0.5 * (a + b)));
            }
        }
        prev = Some((x, v));
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map_model::{catalog, ExprNode, SmoothFullBranchMap};
    use crate::smooth_spectral::gap_params_with;

    fn xi_for(map: &SmoothFullBranchMap) -> XiFunction {
        let ops = SmoothOperators::refined(map).unwrap();
        let p = gap_params_with(map, &ops).unwrap();
        XiFunction::new(ops, &p).unwrap()
    }

    #[test]
    fn affine_map_gives_one() {
        let exprs = ["2*x", "2*x - 1"].map(|s| ExprNode::parse(s).unwrap()).to_vec();
        let mut xi = xi_for(&SmoothFullBranchMap::new(vec![0.0, 0.5, 1.0], exprs).unwrap());
        for z in [C64::new(0.6, 0.0), C64::new(-0.3, 0.8), C64::new(2.0, -1.0)] {
            let v = xi.eval(z, 1e-12).unwrap();
            assert_eq!(v.xi, C64::new(1.0, 0.0));
        }
    }

    #[test]
    fn real_axis_above_one() {
        let mut xi = xi_for(&catalog::quadratic_map());
        let zs: Vec<C64> = (0..100).map(|i| C64::new(0.55 + 1.45 * (i as f64 + 0.5) / 100.0, 0.0)).collect();
        for v in xi.scan(&zs, 1e-8).unwrap() {
            assert!(v.xi.re > 1.0, "{v:?}");
            assert!(v.xi.im.abs() < 1e-15);
        }
    }

    #[test]
    fn series_matches_direct_solve() {
        let map = catalog::quadratic_map();
        let ops = SmoothOperators::refined(&map).unwrap();
        let plus = ops.matrix(OperatorTag::Plus);
        let mut xi = xi_for(&map);
        for z in [C64::new(0.7, 0.2), C64::new(-0.6, 0.0), C64::new(0.1, -0.9)] {
            let a = xi.eval(z, 1e-13).unwrap().xi;
            let b = xi_resolvent(&ops, &plus, z).unwrap();
            assert!((a - b).norm() < 1e-11, "{a} {b}");
        }
    }

    #[test]
    fn inside_mu_star_rejected() {
        let mut xi = xi_for(&catalog::quadratic_map());
        assert!(matches!(xi.eval(C64::new(0.0, 0.5), 1e-8), Err(Error::InvalidArgument(_))));
    }
}
