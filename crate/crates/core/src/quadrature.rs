//! Reference quadrature rules and composite panel grids with spectral interpolation.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;

use crate::linalg::Csr;

/// Node family used inside each panel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeFamily {
    GaussLegendre,
    /// Chebyshev points of the first kind with Fejér weights.
    Chebyshev,
}

/// A rule on `[-1, 1]` with barycentric interpolation weights and the
/// indefinite-integration matrix `S[i][m] = ∫_{-1}^{t_i} ℓ_m`.
#[derive(Clone, Debug)]
pub struct Rule {
    pub family: NodeFamily,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    bary: Vec<f64>,
    indefinite: Vec<Vec<f64>>,
}

impl Rule {
    pub fn new(family: NodeFamily, n: usize) -> Self {
        assert!(n >= 1);
        let (nodes, weights) = match family {
            NodeFamily::GaussLegendre => gauss_legendre(n),
            NodeFamily::Chebyshev => fejer(n),
        };
        let bary = barycentric_weights(&nodes);
        let mut rule = Self { family, nodes, weights, bary, indefinite: Vec::new() };
        rule.indefinite = (0..n).map(|i| rule.integral_row(-1.0, rule.nodes[i])).collect();
        rule
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `ℓ_m(t)` for every node m.
    pub fn lagrange_row(&self, t: f64) -> Vec<f64> {
        let mut row = vec![0.0; self.nodes.len()];
        if let Some(k) = self.nodes.iter().position(|&s| s == t) {
            row[k] = 1.0;
            return row;
        }
        let mut denom = 0.0;
        for (m, (&s, &w)) in self.nodes.iter().zip(&self.bary).enumerate() {
            let q = w / (t - s);
            row[m] = q;
            denom += q;
        }
        for v in &mut row {
            *v /= denom;
        }
        row
    }

    /// `∫_a^b ℓ_m` for every node m, with `-1 <= a <= b <= 1`.
    pub fn integral_row(&self, a: f64, b: f64) -> Vec<f64> {
        let (gn, gw) = gauss_legendre(self.nodes.len().max(2));
        let half = 0.5 * (b - a);
        let mut row = vec![0.0; self.nodes.len()];
        for (s, w) in gn.iter().zip(&gw) {
            let t = a + half * (s + 1.0);
            for (r, l) in row.iter_mut().zip(self.lagrange_row(t)) {
                *r += half * w * l;
            }
        }
        row
    }
}

/// Gauss-Legendre nodes (ascending) and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let rule = GaussLegendre::new(NonZeroUsize::new(n).expect("n >= 1"));
    let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Chebyshev points of the first kind (ascending) with Fejér's first-rule weights.
pub fn fejer(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for k in (0..n).rev() {
        let theta = (2 * k + 1) as f64 * PI / (2 * n) as f64;
        let mut s = 0.0;
        for j in 1..=n / 2 {
            s += (2.0 * j as f64 * theta).cos() / (4.0 * (j * j) as f64 - 1.0);
        }
        nodes.push(theta.cos());
        weights.push(2.0 / n as f64 * (1.0 - 2.0 * s));
    }
    (nodes, weights)
}

/// Barycentric weights for arbitrary distinct nodes, scaled to unit maximum.
pub fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut w: Vec<f64> = (0..n)
        .map(|m| {
            // accumulate in log form to stay in range
            let mut sign = 1.0;
            let mut log = 0.0;
            for k in 0..n {
                if k != m {
                    let d = nodes[m] - nodes[k];
                    if d < 0.0 {
                        sign = -sign;
                    }
                    log -= d.abs().ln();
                }
            }
            (sign, log)
        })
        .map(|(s, l)| s * l.exp())
        .collect();
    let max = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for v in &mut w {
        *v /= max;
    }
    w
}

/// Composite Gauss-Legendre integral of `f` over `[a, b]` with `panels` equal panels.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize, panels: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(n);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + h * p as f64;
        let half = 0.5 * h;
        total += nodes.iter().zip(&weights).map(|(t, w)| w * f(lo + half * (t + 1.0))).sum::<f64>() * half;
    }
    total
}

/// Integrates with panel doubling until two successive values agree to `tol`.
pub fn integrate_adaptive(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let mut panels = 1;
    let mut prev = integrate(&f, a, b, 16, panels);
    loop {
        panels *= 2;
        let cur = integrate(&f, a, b, 16, panels);
        let err = (cur - prev).abs();
        if err <= tol * cur.abs().max(1.0) || panels >= 1 << 14 {
            return (cur, err);
        }
        prev = cur;
    }
}

/// Nodes of a composite rule on `[0, 1]` whose panel breaks include given points.
#[derive(Clone, Debug)]
pub struct PanelGrid {
    pub breaks: Vec<f64>,
    pub rule: Rule,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl PanelGrid {
    pub fn from_breaks(breaks: Vec<f64>, rule: Rule) -> Self {
        assert!(breaks.len() >= 2 && breaks.windows(2).all(|w| w[1] > w[0]), "breaks must increase");
        let mut nodes = Vec::with_capacity((breaks.len() - 1) * rule.len());
        let mut weights = Vec::with_capacity(nodes.capacity());
        for w in breaks.windows(2) {
            let half = 0.5 * (w[1] - w[0]);
            for (t, q) in rule.nodes.iter().zip(&rule.weights) {
                nodes.push(w[0] + half * (t + 1.0));
                weights.push(half * q);
            }
        }
        Self { breaks, rule, nodes, weights }
    }

    /// `panels` equal panels inside each knot interval.
    pub fn uniform(knots: &[f64], panels: usize, rule: Rule) -> Self {
        let mut breaks = vec![knots[0]];
        for w in knots.windows(2) {
            for p in 1..=panels {
                breaks.push(if p == panels { w[1] } else { w[0] + (w[1] - w[0]) * p as f64 / panels as f64 });
            }
        }
        Self::from_breaks(breaks, rule)
    }

    /// Like [`uniform`](Self::uniform), plus `levels` geometrically graded panels towards `x = 0`.
    pub fn graded_at_zero(knots: &[f64], panels: usize, levels: usize, rule: Rule) -> Self {
        let base = Self::uniform(knots, panels, rule.clone());
        let first = base.breaks[1];
        let mut breaks: Vec<f64> = (1..=levels).rev().map(|k| first * 0.5f64.powi(k as i32)).collect();
        breaks.insert(0, 0.0);
        breaks.extend_from_slice(&base.breaks[1..]);
        Self::from_breaks(breaks, rule)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn panels(&self) -> usize {
        self.breaks.len() - 1
    }

    pub fn order(&self) -> usize {
        self.rule.len()
    }

    /// Panel containing `x` (clamped to the grid).
    pub fn panel_of(&self, x: f64) -> usize {
        let p = self.breaks.partition_point(|&b| b <= x);
        p.clamp(1, self.panels()) - 1
    }

    fn local(&self, p: usize, x: f64) -> f64 {
        let (a, b) = (self.breaks[p], self.breaks[p + 1]);
        (2.0 * (x - a) / (b - a) - 1.0).clamp(-1.0, 1.0)
    }

    /// Interpolation weights at `x` in the panel `panel`: `(first node index, weights)`.
    pub fn interp_in_panel(&self, panel: usize, x: f64) -> (usize, Vec<f64>) {
        (panel * self.order(), self.rule.lagrange_row(self.local(panel, x)))
    }

    pub fn interp_row(&self, x: f64) -> (usize, Vec<f64>) {
        self.interp_in_panel(self.panel_of(x), x)
    }

    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        let (off, row) = self.interp_row(x);
        row.iter().zip(&values[off..off + row.len()]).map(|(a, b)| a * b).sum()
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&x| f(x)).collect()
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    pub fn l1_norm(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v.abs()).sum()
    }

    /// `∫_{from}^{x_i} g` at every node, where `from` is the start of the
    /// segment (between consecutive `segment_starts`) containing the node.
    pub fn cumulative_from(&self, values: &[f64], segment_starts: &[f64]) -> Vec<f64> {
        self.cumulative_operator(segment_starts).apply(values)
    }

    /// `∫_0^{x_i} g` at every node.
    pub fn cumulative(&self, values: &[f64]) -> Vec<f64> {
        self.cumulative_from(values, &[self.breaks[0]])
    }

    /// Matrix of `g ↦ ∫_{s}^{x_i} g` with `s` the last segment start `<= x_i`.
    pub fn cumulative_operator(&self, segment_starts: &[f64]) -> Csr {
        let n = self.order();
        let mut rows = Vec::with_capacity(self.len());
        for p in 0..self.panels() {
            let a = self.breaks[p];
            let start = segment_starts.iter().copied().filter(|&s| s <= a + 1e-15).fold(self.breaks[0], f64::max);
            let first_panel = self.panel_of(start + 1e-300 * 0.0).min(p);
            let first_panel = if self.breaks[first_panel] < start { first_panel + 1 } else { first_panel };
            let half = 0.5 * (self.breaks[p + 1] - a);
            for i in 0..n {
                let mut row: Vec<(usize, f64)> = Vec::with_capacity((p - first_panel + 1) * n);
                for q in first_panel..p {
                    for m in 0..n {
                        row.push((q * n + m, self.weights[q * n + m]));
                    }
                }
                for m in 0..n {
                    row.push((p * n + m, half * self.rule.indefinite[i][m]));
                }
                rows.push(row);
            }
        }
        Csr::from_rows(self.len(), rows)
    }

    /// Row `r` with `∫_{s}^{y} g = r · g`, `s <= y` a panel break.
    pub fn integral_row(&self, s: f64, y: f64) -> Vec<(usize, f64)> {
        let n = self.order();
        let py = self.panel_of(y);
        let mut row = Vec::new();
        for q in 0..py {
            if self.breaks[q] >= s - 1e-15 {
                for m in 0..n {
                    row.push((q * n + m, self.weights[q * n + m]));
                }
            }
        }
        let a = self.breaks[py];
        let half = 0.5 * (self.breaks[py + 1] - a);
        let t = self.local(py, y);
        for (m, v) in self.rule.integral_row(-1.0, t).into_iter().enumerate() {
            row.push((py * n + m, half * v));
        }
        row
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rules_integrate_polynomials() {
        for family in [NodeFamily::GaussLegendre, NodeFamily::Chebyshev] {
            let r = Rule::new(family, 12);
            let s: f64 = r.nodes.iter().zip(&r.weights).map(|(t, w)| w * t.powi(8)).sum();
            assert_abs_diff_eq!(s, 2.0 / 9.0, epsilon = 1e-14);
            assert!(r.nodes.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn interpolation_is_exact_on_polynomials() {
        let g = PanelGrid::uniform(&[0.0, 0.3, 1.0], 2, Rule::new(NodeFamily::GaussLegendre, 8));
        let v = g.sample(|x| x.powi(5) - x);
        for x in [0.0, 0.1, 0.3, 0.77, 1.0] {
            assert_abs_diff_eq!(g.interpolate(&v, x), x.powi(5) - x, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(g.integrate(&v), 1.0 / 6.0 - 0.5, epsilon = 1e-15);
    }

    #[test]
    fn cumulative_integrals() {
        let g = PanelGrid::uniform(&[0.0, 0.5, 1.0], 3, Rule::new(NodeFamily::Chebyshev, 10));
        let v = g.sample(|x| 3.0 * x * x);
        let c = g.cumulative(&v);
        for (x, ci) in g.nodes.iter().zip(&c) {
            assert_abs_diff_eq!(*ci, x.powi(3), epsilon = 1e-14);
        }
        let seg = g.cumulative_from(&v, &[0.0, 0.5]);
        for (x, ci) in g.nodes.iter().zip(&seg) {
            let start: f64 = if *x >= 0.5 { 0.5 } else { 0.0 };
            assert_abs_diff_eq!(*ci, x.powi(3) - start.powi(3), epsilon = 1e-14);
        }
        let row = g.integral_row(0.5, 0.8);
        let val: f64 = row.iter().map(|(i, w)| w * v[*i]).sum();
        assert_abs_diff_eq!(val, 0.8f64.powi(3) - 0.125, epsilon = 1e-14);
    }

    #[test]
    fn graded_grid_breaks() {
        let g = PanelGrid::graded_at_zero(&[0.0, 0.5, 1.0], 4, 10, Rule::new(NodeFamily::GaussLegendre, 4));
        assert_eq!(g.breaks[0], 0.0);
        assert!(g.breaks.windows(2).all(|w| w[1] > w[0]));
        assert_abs_diff_eq!(g.integrate(&g.sample(|x| x.sqrt())), 2.0 / 3.0, epsilon = 1e-6);
    }

    #[test]
    fn adaptive_integration() {
        let (v, err) = integrate_adaptive(|x| (3.0 * x).sin(), 0.0, 1.0, 1e-13);
        assert_abs_diff_eq!(v, (1.0 - 3f64.cos()) / 3.0, epsilon = 1e-13);
        assert!(err < 1e-12);
    }
}
