//! Transfer operators sampled on a panel grid.
//!
//! Each node `x` stores its preimages `y = g_j(x)` together with `f'(y)`,
//! `D_f(y)` and the interpolation row at `y`, so any weighted operator
//! `g ↦ Σ_j w(j, y) g(y)` is a sparse matrix over the node values.

use crate::error::{Error, Result};
use crate::linalg::Csr;
use crate::map_model::BranchMap;
use crate::quadrature::PanelGrid;

#[derive(Clone, Debug)]
pub struct Preimage {
    pub branch: usize,
    pub y: f64,
    pub deriv: f64,
    pub distortion: f64,
    /// Index of the first node of the panel holding `y`.
    pub offset: usize,
    pub interp: Vec<f64>,
}

impl Preimage {
    pub fn interpolate(&self, values: &[f64]) -> f64 {
        self.interp.iter().zip(&values[self.offset..]).map(|(a, b)| a * b).sum()
    }
}

#[derive(Clone, Debug)]
pub struct GridTransfer {
    pub grid: PanelGrid,
    pub knots: Vec<f64>,
    pub preimages: Vec<Vec<Preimage>>,
}

impl GridTransfer {
    /// The grid breaks must contain every knot of the map.
    pub fn new(map: &dyn BranchMap, grid: PanelGrid) -> Result<Self> {
        let knots = map.knots().to_vec();
        for &p in &knots {
            if !grid.breaks.iter().any(|&b| (b - p).abs() <= 1e-14) {
                return Err(Error::InvalidArgument(format!("grid breaks miss the knot {p}")));
            }
        }
        let mut preimages = Vec::with_capacity(grid.len());
        for &x in &grid.nodes {
            let mut list = Vec::with_capacity(map.n_branches());
            for j in 0..map.n_branches() {
                let (lo, hi) = map.image(j);
                if x < lo || x > hi {
                    continue;
                }
                let y = map.inverse(j, x)?;
                let panel = panel_in_branch(&grid, y, knots[j], knots[j + 1]);
                let (offset, interp) = grid.interp_in_panel(panel, y);
                list.push(Preimage {
                    branch: j,
                    y,
                    deriv: map.deriv(j, y),
                    distortion: map.distortion(j, y),
                    offset,
                    interp,
                });
            }
            preimages.push(list);
        }
        Ok(Self { grid, knots, preimages })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Sparse matrix of `g ↦ Σ_j w(pre) g(y_j)`.
    pub fn operator(&self, weight: impl Fn(&Preimage) -> f64) -> Csr {
        let rows = self
            .preimages
            .iter()
            .map(|list| {
                list.iter()
                    .flat_map(|p| {
                        let w = weight(p);
                        p.interp.iter().enumerate().map(move |(m, l)| (p.offset + m, w * l))
                    })
                    .collect()
            })
            .collect();
        Csr::from_rows(self.len(), rows)
    }

    /// `L_k` with weight `|f'|^{-k}`.
    pub fn lk(&self, k: i32) -> Csr {
        self.operator(|p| p.deriv.abs().powi(-k))
    }

    /// `g ↦ L_1(D_f · g)`.
    pub fn l1_distortion(&self) -> Csr {
        self.operator(|p| p.distortion / p.deriv.abs())
    }

    /// Applies `Σ_j w(pre) g(y_j)` without assembling.
    pub fn apply(&self, values: &[f64], weight: impl Fn(&Preimage) -> f64) -> Vec<f64> {
        self.preimages.iter().map(|list| list.iter().map(|p| weight(p) * p.interpolate(values)).sum()).collect()
    }

    /// `|∫ L_1 g - ∫ g|` for `g = 1` and `g = x`, relative to `∫ |g|`.
    pub fn conservation_defect(&self) -> f64 {
        let l1 = self.lk(1);
        [|_x: f64| 1.0, |x: f64| x]
            .iter()
            .map(|g| {
                let v = self.grid.sample(g);
                (self.grid.integrate(&l1.apply(&v)) - self.grid.integrate(&v)).abs() / self.grid.l1_norm(&v)
            })
            .fold(0.0, f64::max)
    }
}

/// Panel containing `y` among those inside `[a, b]`.
fn panel_in_branch(grid: &PanelGrid, y: f64, a: f64, b: f64) -> usize {
    let mut p = grid.panel_of(y);
    while p + 1 < grid.panels() && grid.breaks[p] < a - 1e-14 {
        p += 1;
    }
    while p > 0 && grid.breaks[p + 1] > b + 1e-14 {
        p -= 1;
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map_model::catalog;
    use crate::quadrature::{NodeFamily, Rule};
    use approx::assert_abs_diff_eq;

    #[test]
    fn doubling_l2_of_one() {
        let map = catalog::doubling_map::<f64>();
        let grid = PanelGrid::uniform(map.knots(), 2, Rule::new(NodeFamily::GaussLegendre, 8));
        let t = GridTransfer::new(&map, grid).unwrap();
        let v = t.lk(2).apply(&vec![1.0; t.len()]);
        assert!(v.iter().all(|x| (x - 0.5).abs() < 1e-14));
    }

    #[test]
    fn jordan_map_grid_matches_exact_operator() {
        let map = catalog::jordan_map::<f64>();
        let grid = PanelGrid::uniform(map.knots(), 1, Rule::new(NodeFamily::Chebyshev, 6));
        let t = GridTransfer::new(&map, grid).unwrap();
        let h = |y: f64| y * y - 0.3;
        let out = t.lk(1).apply(&t.grid.sample(h));
        for (x, v) in t.grid.nodes.iter().zip(&out) {
            let direct = crate::affine_resonances::transfer_pointwise(
                &map,
                1,
                crate::affine_resonances::WeightMode::Srb,
                h,
                *x,
            );
            assert_abs_diff_eq!(*v, direct, epsilon = 1e-13);
        }
        assert!(t.conservation_defect() < 1e-13);
    }

    #[test]
    fn quadratic_conservation() {
        let map = catalog::quadratic_map();
        let grid = PanelGrid::uniform(map.knots(), 4, Rule::new(NodeFamily::GaussLegendre, 16));
        let t = GridTransfer::new(&map, grid).unwrap();
        assert!(t.conservation_defect() < 1e-11, "{}", t.conservation_defect());
    }
}
