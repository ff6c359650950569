//! `L_k`, `L_⋆`, `L_+` and the compact part `𝒦` on a panel grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Csr, Matrix};
use crate::map_model::BranchMap;
use crate::quadrature::{NodeFamily, PanelGrid, Rule};
use crate::transfer::GridTransfer;

pub const GRID_ORDER: usize = 32;
pub const CONSERVATION_TOL: f64 = 1e-11;
const MAX_PANELS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorTag {
    /// `L_k h = Σ h(y) / f'(y)^k`, `k <= 3`.
    L(u8),
    /// `g ↦ L_2 g + L_1(D_f φ(g))`.
    Star,
    /// `g ↦ L_2 g + L_1(D_f ψ(g))`.
    Plus,
    /// `g ↦ L_1(D_f φ(g))`.
    Compact,
}

impl OperatorTag {
    pub fn as_string(self) -> String {
        match self {
            OperatorTag::L(k) => format!("L{k}"),
            OperatorTag::Star => "star".into(),
            OperatorTag::Plus => "plus".into(),
            OperatorTag::Compact => "compact".into(),
        }
    }
}

impl std::str::FromStr for OperatorTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l0" => Ok(OperatorTag::L(0)),
            "l1" => Ok(OperatorTag::L(1)),
            "l2" => Ok(OperatorTag::L(2)),
            "l3" => Ok(OperatorTag::L(3)),
            "star" => Ok(OperatorTag::Star),
            "plus" => Ok(OperatorTag::Plus),
            "compact" | "k" => Ok(OperatorTag::Compact),
            _ => Err(Error::InvalidArgument(format!("unknown operator '{s}' (l0..l3, star, plus, compact)"))),
        }
    }
}

/// Assembled operators for one map on one grid.
#[derive(Clone, Debug)]
pub struct SmoothOperators {
    pub transfer: GridTransfer,
    /// `L_2` with the sign of `f'`, the form that appears in `(L_1 h)'`.
    l2: Csr,
    l1d: Csr,
    /// `g ↦ ∫_0^x g` at the nodes.
    psi: Csr,
    /// Quadrature weights of `∫ (1 - y) g(y) dy`.
    moment: Vec<f64>,
}

impl SmoothOperators {
    /// Operators on `grid` without the conservation self-check.
    pub fn from_grid(map: &dyn BranchMap, grid: PanelGrid) -> Result<Self> {
        let transfer = GridTransfer::new(map, grid)?;
        let l2 = transfer.operator(|p| p.deriv.signum() / (p.deriv * p.deriv));
        let l1d = transfer.l1_distortion();
        let g = &transfer.grid;
        let psi = g.cumulative_operator(&[g.breaks[0]]);
        let moment = g.weights.iter().zip(&g.nodes).map(|(w, x)| w * (1.0 - x)).collect();
        Ok(Self { transfer, l2, l1d, psi, moment })
    }

    /// Gauss-Legendre panels of order 32, checked against `∫ L_1 g = ∫ g`.
    pub fn on_panels(map: &dyn BranchMap, panels: usize) -> Result<Self> {
        let grid = PanelGrid::uniform(map.knots(), panels, Rule::new(NodeFamily::GaussLegendre, GRID_ORDER));
        let ops = Self::from_grid(map, grid)?;
        let defect = ops.transfer.conservation_defect();
        if !(defect < CONSERVATION_TOL) {
            return Err(Error::Numeric(format!(
                "grid too coarse: {panels} panels per branch give a conservation defect of {defect:.3e}"
            )));
        }
        Ok(ops)
    }

    /// Doubles the panels per branch until the self-check passes.
    pub fn refined(map: &dyn BranchMap) -> Result<Self> {
        let mut panels = 1;
        loop {
            match Self::on_panels(map, panels) {
                Ok(ops) => return Ok(ops),
                Err(e) if panels >= MAX_PANELS => return Err(e),
                Err(_) => panels *= 2,
            }
        }
    }

    pub fn grid(&self) -> &PanelGrid {
        &self.transfer.grid
    }

    pub fn len(&self) -> usize {
        self.transfer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transfer.is_empty()
    }

    pub fn psi(&self, g: &[f64]) -> Vec<f64> {
        self.psi.apply(g)
    }

    /// `∫ (1 - y) g(y) dy`.
    pub fn moment(&self, g: &[f64]) -> f64 {
        self.moment.iter().zip(g).map(|(w, v)| w * v).sum()
    }

    /// `φ(g)(x) = ∫_0^x g - ∫_0^1 (1 - y) g(y) dy`.
    pub fn phi(&self, g: &[f64]) -> Vec<f64> {
        let c = self.moment(g);
        self.psi(g).into_iter().map(|v| v - c).collect()
    }

    /// `L_1(D_f g)`.
    pub fn l1_distortion(&self, g: &[f64]) -> Vec<f64> {
        self.l1d.apply(g)
    }

    pub fn apply(&self, op: OperatorTag, g: &[f64]) -> Vec<f64> {
        match op {
            OperatorTag::L(k) => self.transfer.apply(g, |p| p.deriv.abs().powi(-(k as i32))),
            OperatorTag::Plus => add(&self.l2.apply(g), &self.l1d.apply(&self.psi(g))),
            OperatorTag::Star => add(&self.l2.apply(g), &self.l1d.apply(&self.phi(g))),
            OperatorTag::Compact => self.l1d.apply(&self.phi(g)),
        }
    }

    /// Dense matrix of `op` acting on node values.
    pub fn matrix(&self, op: OperatorTag) -> Matrix<f64> {
        match op {
            OperatorTag::L(k) => self.transfer.lk(k as i32).to_dense(),
            OperatorTag::Plus => self.l2.to_dense().add(&self.l1d.mul_dense(&self.psi.to_dense())),
            OperatorTag::Star => self.l2.to_dense().add(&self.compact_matrix()),
            OperatorTag::Compact => self.compact_matrix(),
        }
    }

    /// Matrix of `φ`.
    pub fn phi_matrix(&self) -> Matrix<f64> {
        let mut m = self.psi.to_dense();
        for i in 0..m.rows() {
            for (j, w) in self.moment.iter().enumerate() {
                m[(i, j)] -= w;
            }
        }
        m
    }

    fn compact_matrix(&self) -> Matrix<f64> {
        self.l1d.mul_dense(&self.phi_matrix())
    }
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// `Σ_y h(y) / f'(y)^k` at a single point, straight from the branch inverses.
pub fn transfer_at(map: &dyn BranchMap, k: i32, h: impl Fn(f64) -> f64, x: f64) -> Result<f64> {
    let mut s = 0.0;
    for j in 0..map.n_branches() {
        let (lo, hi) = map.image(j);
        if x < lo || x > hi {
            continue;
        }
        let y = map.inverse(j, x)?;
        s += h(y) * map.deriv(j, y).abs().powi(-k);
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map_model::catalog;
    use approx::assert_abs_diff_eq;

    #[test]
    fn doubling_star_is_l2() {
        let map = catalog::doubling_map::<f64>();
        let ops = SmoothOperators::refined(&map).unwrap();
        let one = vec![1.0; ops.len()];
        for v in ops.apply(OperatorTag::Star, &one) {
            assert_abs_diff_eq!(v, 0.5, epsilon = 1e-14);
        }
        let g = ops.grid().sample(|x| (3.0 * x).cos());
        let a = ops.apply(OperatorTag::Star, &g);
        let b = ops.apply(OperatorTag::L(2), &g);
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-14));
    }

    #[test]
    fn matrices_match_apply() {
        let map = catalog::quadratic_map();
        let ops = SmoothOperators::refined(&map).unwrap();
        let g = ops.grid().sample(|x| 1.0 + x * x - (2.0 * x).sin());
        for op in [OperatorTag::L(0), OperatorTag::L(1), OperatorTag::L(2), OperatorTag::Plus, OperatorTag::Star, OperatorTag::Compact] {
            let a = ops.apply(op, &g);
            let b = ops.matrix(op).mul_vec(&g);
            for (x, y) in a.iter().zip(&b) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn phi_of_derivative_recovers_mean_free_part() {
        let map = catalog::quadratic_map();
        let ops = SmoothOperators::refined(&map).unwrap();
        // h = x^3, mean 1/4
        let g = ops.grid().sample(|x| 3.0 * x * x);
        for (x, v) in ops.grid().nodes.iter().zip(ops.phi(&g)) {
            assert_abs_diff_eq!(v, x.powi(3) - 0.25, epsilon = 1e-13);
        }
    }

    #[test]
    fn coarse_grid_rejected() {
        let map = catalog::quadratic_map();
        let grid = PanelGrid::uniform(map.knots(), 1, Rule::new(NodeFamily::GaussLegendre, 3));
        let ops = SmoothOperators::from_grid(&map, grid).unwrap();
        assert!(ops.transfer.conservation_defect() > CONSERVATION_TOL);
    }
}
