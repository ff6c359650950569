//! Maps whose branches are given by expressions.

use serde::Serialize;

use super::branch::monotone_solve;
use super::expr::{BinOp, ExprNode};
use super::validation::sample_points;
use super::{BranchMap, ValidationReport};
use crate::error::Result;

const GRID: usize = 1024;

/// Branch expressions with their cached symbolic derivatives.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BranchExprs {
    #[serde(serialize_with = "ser_expr")]
    pub f: ExprNode,
    #[serde(serialize_with = "ser_expr")]
    pub df: ExprNode,
    #[serde(serialize_with = "ser_expr")]
    pub d2f: ExprNode,
    /// `D_f = (1/f')'`.
    #[serde(serialize_with = "ser_expr")]
    pub dist: ExprNode,
    #[serde(serialize_with = "ser_expr")]
    pub dist_prime: ExprNode,
}

fn ser_expr<S: serde::Serializer>(e: &ExprNode, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&e.to_string())
}

impl BranchExprs {
    pub fn new(f: ExprNode) -> Self {
        let df = f.differentiate();
        let d2f = df.differentiate();
        let recip = ExprNode::Bin(BinOp::Div, Box::new(ExprNode::constant(1.0)), Box::new(df.clone()));
        let dist = recip.differentiate();
        let dist_prime = dist.differentiate();
        Self { f, df, d2f, dist, dist_prime }
    }
}

/// Partition plus per-branch expressions; shared core of the smooth and monotone map types.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExprMap {
    pub knots: Vec<f64>,
    pub branches: Vec<BranchExprs>,
}

impl ExprMap {
    /// Builds the map, snapping interior knots onto the exact branch endpoints when
    /// the supplied value is off by less than `1e-8`.
    pub fn new(mut knots: Vec<f64>, exprs: Vec<ExprNode>) -> (Self, ValidationReport) {
        let branches: Vec<BranchExprs> = exprs.into_iter().map(BranchExprs::new).collect();
        let mut report = structural_checks(&knots, branches.len());
        if report.passed() {
            for i in 1..knots.len() - 1 {
                knots[i] = refine_knot(&branches[i - 1], knots[i - 1], knots[i], knots[i + 1]);
            }
        }
        let map = Self { knots, branches };
        if report.passed() {
            report.merge(map.finiteness_check());
        }
        (map, report)
    }

    fn finiteness_check(&self) -> ValidationReport {
        let mut r = ValidationReport::default();
        let mut bad = None;
        'outer: for (j, b) in self.branches.iter().enumerate() {
            for x in sample_points(self.knots[j], self.knots[j + 1], GRID) {
                if !(b.f.eval(x).is_finite() && b.df.eval(x).is_finite()) {
                    bad = Some(x);
                    break 'outer;
                }
            }
        }
        r.push("finite", bad.is_none(), bad, if bad.is_some() { 1.0 } else { 0.0 }, "f and f' finite on the sample grid");
        r
    }

    /// Worst endpoint mismatch against a full-branch image, with its location.
    pub fn full_branch_defect(&self) -> (f64, f64) {
        let mut worst = (0.0f64, 0.0);
        for (j, b) in self.branches.iter().enumerate() {
            let (a, c) = (b.f.eval(self.knots[j]), b.f.eval(self.knots[j + 1]));
            let (lo_pt, lo, hi) = if c >= a { (self.knots[j], a, c) } else { (self.knots[j + 1], c, a) };
            let d0 = lo.abs();
            let d1 = (hi - 1.0).abs();
            if d0 > worst.0 {
                worst = (d0, lo_pt);
            }
            if d1 > worst.0 {
                worst = (d1, if lo_pt == self.knots[j] { self.knots[j + 1] } else { self.knots[j] });
            }
        }
        worst
    }

    /// Extremes of `g` over the sample grid of every branch (interior points and endpoints).
    pub fn extremes(&self, g: impl Fn(&BranchExprs, f64) -> f64) -> ((f64, f64), (f64, f64)) {
        let mut min = (f64::INFINITY, 0.0);
        let mut max = (f64::NEG_INFINITY, 0.0);
        for (j, b) in self.branches.iter().enumerate() {
            let (a, c) = (self.knots[j], self.knots[j + 1]);
            for x in sample_points(a, c, GRID).chain([a, c]) {
                let v = g(b, x);
                if !v.is_finite() {
                    continue;
                }
                if v < min.0 {
                    min = (v, x);
                }
                if v > max.0 {
                    max = (v, x);
                }
            }
        }
        (min, max)
    }

    /// Largest jump of `f'` across interior knots.
    pub fn knot_derivative_jump(&self) -> (f64, f64) {
        let mut worst = (0.0f64, 0.0);
        for i in 1..self.knots.len() - 1 {
            let p = self.knots[i];
            let jump = (self.branches[i - 1].df.eval(p) - self.branches[i].df.eval(p)).abs();
            if jump > worst.0 {
                worst = (jump, p);
            }
        }
        worst
    }
}

fn structural_checks(knots: &[f64], n_branches: usize) -> ValidationReport {
    let mut r = ValidationReport::default();
    let n = knots.len().saturating_sub(1);
    r.push(
        "branch_count",
        n_branches == n && n >= 1,
        None,
        n_branches as f64,
        format!("{n_branches} branches for {n} partition intervals"),
    );
    let ends = knots.first() == Some(&0.0) && knots.last() == Some(&1.0);
    r.push("partition_endpoints", ends, None, 0.0, "partition starts at 0 and ends at 1");
    let gap = knots.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    r.push("partition_sorted", gap > 0.0, None, gap, "partition strictly increasing");
    r
}

fn refine_knot(left: &BranchExprs, a: f64, p: f64, b: f64) -> f64 {
    let target = left.f.eval(p).round();
    if target != 0.0 && target != 1.0 {
        return p;
    }
    let mut x = p;
    for _ in 0..8 {
        let step = (left.f.eval(x) - target) / left.df.eval(x);
        if !step.is_finite() {
            return p;
        }
        x -= step;
        if step.abs() <= 1e-17 {
            break;
        }
    }
    if (x - p).abs() < 1e-8 && x > a && x < b {
        x
    } else {
        p
    }
}

impl BranchMap for ExprMap {
    fn knots(&self) -> &[f64] {
        &self.knots
    }

    fn eval(&self, j: usize, x: f64) -> f64 {
        self.branches[j].f.eval(x)
    }

    fn deriv(&self, j: usize, x: f64) -> f64 {
        self.branches[j].df.eval(x)
    }

    fn distortion(&self, j: usize, x: f64) -> f64 {
        self.branches[j].dist.eval(x)
    }

    fn inverse(&self, j: usize, y: f64) -> Result<f64> {
        let b = &self.branches[j];
        monotone_solve(|x| b.f.eval(x), |x| b.df.eval(x), self.knots[j], self.knots[j + 1], y, j)
    }
}

/// Smooth expanding map with full, orientation-preserving branches.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmoothFullBranchMap {
    pub(crate) inner: ExprMap,
}

impl SmoothFullBranchMap {
    pub fn new(knots: Vec<f64>, exprs: Vec<ExprNode>) -> Result<Self> {
        let (inner, mut report) = ExprMap::new(knots, exprs);
        if report.passed() {
            report.merge(Self::invariant_checks(&inner));
        }
        report.into_result(|| Self { inner })
    }

    fn invariant_checks(m: &ExprMap) -> ValidationReport {
        let mut r = ValidationReport::default();
        let ((dmin, at), (dmax, _)) = m.extremes(|b, x| b.df.eval(x));
        r.push("expansion", dmin > 1.0, Some(at), dmin, format!("f' range [{dmin}, {dmax}], need f' > 1"));
        let (defect, at) = m.full_branch_defect();
        let orientation = m.branches.iter().enumerate().all(|(j, b)| b.f.eval(m.knots[j + 1]) > b.f.eval(m.knots[j]));
        r.push(
            "full_branch",
            defect <= 1e-10 && orientation,
            Some(at),
            defect,
            "f(p_i^+) = 0 and f(p_{i+1}^-) = 1",
        );
        r
    }

    /// Every invariant check, including the hypotheses of the exclusion-region theorem.
    pub fn validate(&self) -> ValidationReport {
        let mut r = structural_checks(&self.inner.knots, self.inner.branches.len());
        r.merge(self.inner.finiteness_check());
        r.merge(Self::invariant_checks(&self.inner));
        r.merge(self.region_hypotheses());
        r
    }

    /// `D_f >= 0`, `D_f` not identically zero, and `f'` continuous at interior knots.
    pub fn region_hypotheses(&self) -> ValidationReport {
        let mut r = ValidationReport::default();
        let ((dmin, at), (dmax, at_max)) = self.inner.extremes(|b, x| b.dist.eval(x));
        r.push("distortion_nonnegative", dmin >= -1e-12, Some(at), dmin, "D_f >= 0 on the sample grid");
        r.push("distortion_nonzero", dmax > 1e-12, Some(at_max), dmax, "D_f not identically zero");
        let (jump, at) = self.inner.knot_derivative_jump();
        r.push("knot_derivative_continuity", jump <= 1e-10, Some(at), jump, "f'(p_i^-) = f'(p_i^+)");
        r
    }

    pub fn exprs(&self) -> &ExprMap {
        &self.inner
    }

    pub fn branch(&self, j: usize) -> &BranchExprs {
        &self.inner.branches[j]
    }
}

impl BranchMap for SmoothFullBranchMap {
    fn knots(&self) -> &[f64] {
        &self.inner.knots
    }
    fn eval(&self, j: usize, x: f64) -> f64 {
        self.inner.eval(j, x)
    }
    fn deriv(&self, j: usize, x: f64) -> f64 {
        self.inner.deriv(j, x)
    }
    fn distortion(&self, j: usize, x: f64) -> f64 {
        self.inner.distortion(j, x)
    }
    fn inverse(&self, j: usize, y: f64) -> Result<f64> {
        self.inner.inverse(j, y)
    }
    fn is_full_branch(&self) -> bool {
        true
    }
}

/// Full-branch map with strictly monotone (possibly non-uniformly expanding) branches.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonotoneFullBranchMap {
    pub(crate) inner: ExprMap,
    /// Sign of `f'` per branch.
    pub signs: Vec<i8>,
    /// `sup |f'|` over the sample grid.
    pub lambda_sup: f64,
}

impl MonotoneFullBranchMap {
    pub fn new(knots: Vec<f64>, exprs: Vec<ExprNode>) -> Result<Self> {
        let (inner, mut report) = ExprMap::new(knots, exprs);
        let mut signs = Vec::new();
        if report.passed() {
            let (checks, s) = Self::invariant_checks(&inner);
            report.merge(checks);
            signs = s;
        }
        let ((_, _), (sup, _)) = inner.extremes(|b, x| b.df.eval(x).abs());
        report.into_result(|| Self { inner, signs, lambda_sup: sup })
    }

    fn invariant_checks(m: &ExprMap) -> (ValidationReport, Vec<i8>) {
        let mut r = ValidationReport::default();
        let mut signs = Vec::new();
        let mut ok = true;
        let mut worst = (f64::INFINITY, None);
        for (j, b) in m.branches.iter().enumerate() {
            let vals: Vec<(f64, f64)> =
                sample_points(m.knots[j], m.knots[j + 1], GRID).map(|x| (x, b.df.eval(x))).collect();
            let s = if vals[0].1 >= 0.0 { 1i8 } else { -1 };
            for &(x, d) in &vals {
                let signed = d * s as f64;
                if signed < worst.0 {
                    worst = (signed, Some(x));
                }
                if !(signed > 0.0) {
                    ok = false;
                }
            }
            signs.push(s);
        }
        r.push("monotone", ok, worst.1, worst.0, "f' has constant nonzero sign on each branch");
        let (defect, at) = m.full_branch_defect();
        r.push("full_branch", defect <= 1e-10, Some(at), defect, "each branch maps onto (0,1)");
        (r, signs)
    }

    pub fn validate(&self) -> ValidationReport {
        let mut r = structural_checks(&self.inner.knots, self.inner.branches.len());
        r.merge(self.inner.finiteness_check());
        r.merge(Self::invariant_checks(&self.inner).0);
        r
    }

    pub fn exprs(&self) -> &ExprMap {
        &self.inner
    }
}

impl BranchMap for MonotoneFullBranchMap {
    fn knots(&self) -> &[f64] {
        &self.inner.knots
    }
    fn eval(&self, j: usize, x: f64) -> f64 {
        self.inner.eval(j, x)
    }
    fn deriv(&self, j: usize, x: f64) -> f64 {
        self.inner.deriv(j, x)
    }
    fn distortion(&self, j: usize, x: f64) -> f64 {
        self.inner.distortion(j, x)
    }
    fn inverse(&self, j: usize, y: f64) -> Result<f64> {
        self.inner.inverse(j, y)
    }
    fn is_full_branch(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map_model::catalog;
    use approx::assert_abs_diff_eq;

    #[test]
    fn quadratic_map_validates() {
        let m = catalog::quadratic_map();
        let r = m.validate();
        assert!(r.passed(), "{}", r.summary());
        let e = r.get("expansion").unwrap();
        assert_abs_diff_eq!(e.measured, 2.0, epsilon = 1e-12);
        assert_eq!(m.branch(0).dist.to_string(), "2/(4 - 2*x)^2");
    }

    #[test]
    fn ten_digit_knots_are_refined() {
        let exprs = ["4*x - x^2", "4*x - x^2 - 1", "4*x - x^2 - 2"].map(|s| ExprNode::parse(s).unwrap()).to_vec();
        let m = SmoothFullBranchMap::new(vec![0.0, 0.2679491924, 0.5857864376, 1.0], exprs).unwrap();
        assert_abs_diff_eq!(m.knots()[1], 2.0 - 3f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(m.knots()[2], 2.0 - 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn quadratic_inverse_matches_formula() {
        let m = catalog::quadratic_map();
        let x = m.inverse(0, 0.5).unwrap();
        assert_abs_diff_eq!(x, 2.0 - 3.5f64.sqrt(), epsilon = 1e-15);
        assert!((m.eval(0, x) - 0.5).abs() <= 1e-13);
    }

    #[test]
    fn non_full_branch_rejected() {
        let err = SmoothFullBranchMap::new(vec![0.0, 1.0], vec![ExprNode::parse("1.5*x").unwrap()]).unwrap_err();
        assert!(matches!(err, crate::Error::Validation(r) if !r.get("full_branch").unwrap().passed));
    }

    #[test]
    fn lsv_map_monotone() {
        let m = catalog::lsv_map(0.5);
        assert!(m.validate().passed());
        assert_eq!(m.signs, vec![1, 1]);
        assert_abs_diff_eq!(m.lambda_sup, 2.5, epsilon = 1e-9);
        let y = m.inverse(0, 1e-6).unwrap();
        assert!((m.eval(0, y) - 1e-6).abs() <= 1e-13);
    }

    #[test]
    fn decreasing_branch_accepted() {
        let m = MonotoneFullBranchMap::new(
            vec![0.0, 0.5, 1.0],
            vec![ExprNode::parse("2*x").unwrap(), ExprNode::parse("2 - 2*x").unwrap()],
        )
        .unwrap();
        assert_eq!(m.signs, vec![1, -1]);
    }
}
