//! The exclusion regions `A_0, ..., A_4` and their boundary curves.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::params::GapParams;
use crate::error::{Error, Result};

pub const MU2_MARGIN: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionSet {
    pub params: GapParams,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Membership {
    pub a0: bool,
    pub a1: bool,
    pub a2: bool,
    pub a3: bool,
    pub a4: bool,
}

impl Membership {
    pub fn any(&self) -> bool {
        self.a0 || self.a1 || self.a2 || self.a3 || self.a4
    }

    pub fn names(&self) -> Vec<&'static str> {
        [(self.a0, "A0"), (self.a1, "A1"), (self.a2, "A2"), (self.a3, "A3"), (self.a4, "A4")]
            .into_iter()
            .filter_map(|(b, n)| b.then_some(n))
            .collect()
    }
}

/// One vertex of a boundary polyline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub region: String,
    pub a: f64,
    pub b: f64,
}

impl RegionSet {
    /// Refuses maps outside the hypotheses (`D_f >= 0`, `D_f ≢ 0`, `f'` continuous at knots).
    pub fn new(params: GapParams) -> Result<Self> {
        if !params.region_hypotheses {
            return Err(Error::Unsupported(format!(
                "exclusion regions need D_f >= 0, D_f not identically zero and f' continuous at the knots; failed: {}",
                params.hypothesis_failures.join("; ")
            )));
        }
        Ok(Self { params })
    }

    fn mu(&self) -> f64 {
        self.params.mu_star
    }

    fn delta(&self) -> f64 {
        self.params.delta
    }

    /// `a ∈ (μ₂, 1)` on the real axis; `μ₂` is an estimate.
    /// `μ₂` is a numerical estimate, so points within [`MU2_MARGIN`] of it are not claimed.
    pub fn in_a0(&self, z: C64) -> bool {
        z.im == 0.0 && z.re > self.params.mu2 + MU2_MARGIN && z.re < 1.0
    }

    pub fn a1_bound(&self, a: f64) -> f64 {
        let (mu, d) = (self.mu(), self.delta());
        let s = 1.0 + self.params.gamma / a;
        (a - mu) * d / (2.0 * s) * ((1.0 + 4.0 * s * s * (a - mu).powi(2) / (d * d)).sqrt() - 1.0)
    }

    pub fn in_a1(&self, z: C64) -> bool {
        z.re > self.mu() && z.im * z.im < self.a1_bound(z.re)
    }

    pub fn a2_bound(&self, a: f64) -> f64 {
        let (mu, d) = (self.mu(), self.delta());
        let (x, mm) = (a.abs(), mu * mu);
        (x - mu).powi(2) * (a * a - mm - d * x) / (a * a - mm + d * x)
    }

    pub fn in_a2(&self, z: C64) -> bool {
        z.re < -self.mu() && z.im * z.im < self.a2_bound(z.re)
    }

    /// Right-hand side of `|z - μ*|² > μ*² + μ*(Δ + √(4μ*² + Δ²))/2`.
    pub fn a3_threshold(&self) -> f64 {
        let (mu, d) = (self.mu(), self.delta());
        mu * mu + mu * (d + (4.0 * mu * mu + d * d).sqrt()) / 2.0
    }

    pub fn in_a3(&self, z: C64) -> bool {
        z.re >= 0.0 && (z - self.mu()).norm_sqr() > self.a3_threshold()
    }

    pub fn a4_bound(&self, a: f64) -> f64 {
        let (mu, d) = (self.mu(), self.delta());
        mu * d + mu * mu + 2.0 * a.abs() * mu - a * a
    }

    pub fn in_a4(&self, z: C64) -> bool {
        z.re < 0.0 && z.im * z.im > self.a4_bound(z.re)
    }

    pub fn membership(&self, z: C64) -> Membership {
        Membership { a0: self.in_a0(z), a1: self.in_a1(z), a2: self.in_a2(z), a3: self.in_a3(z), a4: self.in_a4(z) }
    }

    /// `|b|` where the boundary of `A_3` meets the imaginary axis.
    pub fn a3_intercept(&self) -> f64 {
        (self.a3_threshold() - self.mu() * self.mu()).sqrt()
    }

    /// Limit of the `A_4` boundary as `a → 0⁻`.
    pub fn a4_intercept(&self) -> f64 {
        self.a4_bound(0.0).sqrt()
    }

    /// Boundary polylines inside `[-extent, extent]²` with `points` samples per curve,
    /// plus the circles of radius `μ*²`, `τ`, `μ*` and `1`.
    pub fn boundary_polylines(&self, points: usize, extent: f64) -> Vec<BoundaryPoint> {
        let points = points.max(2);
        let mut out = Vec::new();
        let mu = self.mu();
        let push = |out: &mut Vec<BoundaryPoint>, region: &str, a: f64, b: f64| {
            out.push(BoundaryPoint { region: region.into(), a, b });
        };
        push(&mut out, "A0", self.params.mu2, 0.0);
        push(&mut out, "A0", 1.0, 0.0);

        let curve = |out: &mut Vec<BoundaryPoint>, region: &str, lo: f64, hi: f64, bound: &dyn Fn(f64) -> f64| {
            let xs: Vec<f64> = (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect();
            let upper: Vec<(f64, f64)> = xs
                .iter()
                .filter_map(|&a| {
                    let v = bound(a);
                    (v.is_finite() && v >= 0.0).then(|| (a, v.sqrt().min(extent)))
                })
                .collect();
            for &(a, b) in &upper {
                push(out, region, a, b);
            }
            for &(a, b) in upper.iter().rev() {
                push(out, region, a, -b);
            }
        };
        curve(&mut out, "A1", mu, extent, &|a| if a > mu { self.a1_bound(a) } else { 0.0 });
        curve(&mut out, "A2", -extent, -mu, &|a| self.a2_bound(a));
        let r2 = self.a3_threshold();
        let right = (mu + r2.sqrt()).min(extent);
        curve(&mut out, "A3", 0.0, right, &|a| r2 - (a - mu).powi(2));
        // approach a = 0 from the left without reaching it
        let last = -extent / (points as f64 * 1e3);
        curve(&mut out, "A4", -extent, last, &|a| self.a4_bound(a));

        for (name, r) in
            [("essential", self.params.essential_bound), ("tau", self.params.tau), ("mu_star", mu), ("unit", 1.0)]
        {
            for i in 0..=points {
                let t = 2.0 * std::f64::consts::PI * i as f64 / points as f64;
                push(&mut out, name, r * t.cos(), r * t.sin());
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map_model::catalog;
    use crate::smooth_spectral::gap_params;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::sync::OnceLock;

    fn example() -> &'static RegionSet {
        static SET: OnceLock<RegionSet> = OnceLock::new();
        SET.get_or_init(|| RegionSet::new(gap_params(&catalog::quadratic_map()).unwrap()).unwrap())
    }

    #[test]
    fn example_thresholds() {
        let r = example();
        assert_abs_diff_eq!(r.a3_threshold(), (5.0 + 17f64.sqrt()) / 16.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.a3_intercept(), ((1.0 + 17f64.sqrt()) / 16.0).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(r.a3_intercept(), 0.5659, epsilon = 1e-3);
        assert_abs_diff_eq!(r.a4_intercept(), 0.6124, epsilon = 1e-3);
        // the printed A_4 inequality b² > 3/8 + |a| - a²
        for a in [-0.9, -0.3, -0.01] {
            assert_abs_diff_eq!(r.a4_bound(a), 0.375 + a.abs() - a * a, epsilon = 1e-15);
        }
        // and A_2 with (4a² - 1 - |a|)/(4a² - 1 + |a|)
        for a in [-0.9, -0.7] {
            let x: f64 = -a;
            let printed = (x - 0.5).powi(2) * (4.0 * a * a - 1.0 - x) / (4.0 * a * a - 1.0 + x);
            assert_abs_diff_eq!(r.a2_bound(a), printed, epsilon = 1e-15);
        }
    }

    #[test]
    fn example_points() {
        let r = example();
        assert!(r.in_a3(C64::new(0.0, 0.8)));
        assert!(r.in_a0(C64::new(0.9, 0.0)));
        assert!(!r.membership(C64::new(0.3, 0.1)).any());
        assert!(r.in_a1(C64::new(0.9, 0.1)));
        assert!(r.in_a4(C64::new(-0.1, 0.7)));
        assert!(r.in_a2(C64::new(-0.9, 0.1)));
    }

    #[test]
    fn refuses_affine_maps() {
        let exprs = ["2*x", "2*x - 1"].map(|s| crate::map_model::ExprNode::parse(s).unwrap()).to_vec();
        let map = crate::map_model::SmoothFullBranchMap::new(vec![0.0, 0.5, 1.0], exprs).unwrap();
        assert!(matches!(RegionSet::new(gap_params(&map).unwrap()), Err(Error::Unsupported(_))));
    }

    #[test]
    fn polylines_cover_every_region() {
        let pts = example().boundary_polylines(400, 1.1);
        for name in ["A0", "A1", "A2", "A3", "A4", "essential", "tau", "mu_star", "unit"] {
            assert!(pts.iter().any(|p| p.region == name), "{name}");
        }
        let a3_top = pts.iter().filter(|p| p.region == "A3" && p.a == 0.0).map(|p| p.b).fold(0.0, f64::max);
        assert_abs_diff_eq!(a3_top, 0.5659, epsilon = 1e-3);
        let a4_top = pts.iter().filter(|p| p.region == "A4").map(|p| p.b).fold(0.0f64, f64::max);
        assert!(a4_top > 0.6);
    }

    proptest! {
        #[test]
        fn membership_is_conjugation_symmetric(a in -1.2f64..1.2, b in -1.2f64..1.2) {
            let r = example();
            let z = C64::new(a, b);
            prop_assert_eq!(r.membership(z), r.membership(z.conj()));
            let m = r.membership(z);
            prop_assert!(!m.a1 || a > r.mu());
            prop_assert!(!m.a2 || a < -r.mu());
            prop_assert!(!m.a3 || a >= 0.0);
            prop_assert!(!m.a4 || a < 0.0);
            prop_assert!(!m.a0 || b == 0.0);
        }
    }
}
