//! Measure of maximal entropy of full-branch monotone maps as the limit
//! `μ(h) = lim ∫ N^{-n} L_0^n h dx`, and the mixing rate it induces.
//!
//! `d/dx L_0 = L_1 d/dx` keeps `N^{-n} L_0^n h` smooth, so the iterates live
//! on a fixed panel grid (graded towards `x = 0` to follow neutral fixed points).

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::correlation::{fit_decay, DecayFit};
use crate::error::{Error, Result};
use crate::linalg::Csr;
use crate::map_model::BranchMap;
use crate::quadrature::{NodeFamily, PanelGrid, Rule};
use crate::transfer::GridTransfer;

pub const MAX_ITER: usize = 80;
pub const STOP_TOL: f64 = 1e-9;
pub const GRID_NODES: usize = 4096;
const ORDER: usize = 16;
const GRADED_LEVELS: usize = 24;
/// Largest number of `n`-cylinders enumerated by [`cylinder_bounds`].
pub const MAX_CYLINDERS: usize = 1 << 20;

/// `L_0` on a panel grid for a full-branch map with `N` branches.
pub struct MmeOperator<'a> {
    map: &'a dyn BranchMap,
    transfer: GridTransfer,
    l0: Csr,
}

impl<'a> MmeOperator<'a> {
    /// About [`GRID_NODES`] Gauss-Legendre nodes.
    pub fn new(map: &'a dyn BranchMap) -> Result<Self> {
        let per_branch = ((GRID_NODES / ORDER).saturating_sub(GRADED_LEVELS) / map.n_branches()).max(1);
        Self::with_grid(map, PanelGrid::graded_at_zero(map.knots(), per_branch, GRADED_LEVELS, Rule::new(NodeFamily::GaussLegendre, ORDER)))
    }

    pub fn with_grid(map: &'a dyn BranchMap, grid: PanelGrid) -> Result<Self> {
        if !map.is_full_branch() {
            return Err(Error::Unsupported("the maximal-entropy iteration needs a full-branch map".into()));
        }
        let transfer = GridTransfer::new(map, grid)?;
        let l0 = transfer.lk(0);
        Ok(Self { map, transfer, l0 })
    }

    pub fn grid(&self) -> &PanelGrid {
        &self.transfer.grid
    }

    pub fn branches(&self) -> f64 {
        self.map.n_branches() as f64
    }

    /// `(L_0 h)(x_i) = Σ_j h(g_j(x_i))` with `h` evaluated exactly at the preimages.
    pub fn l0_apply_fn(&self, h: impl Fn(f64) -> f64) -> Vec<f64> {
        self.transfer.preimages.iter().map(|list| list.iter().map(|p| h(p.y)).sum()).collect()
    }

    /// `L_0` on node values, interpolating inside each branch.
    pub fn l0_apply(&self, h: &[f64]) -> Vec<f64> {
        self.l0.apply(h)
    }

    fn step(&self, h: &[f64]) -> Vec<f64> {
        let n = self.branches();
        self.l0.apply(h).into_iter().map(|v| v / n).collect()
    }

    /// `μ(g)` for node values `g`, iterated until successive integrals differ by
    /// less than `tol · max(∫|g|, tiny)`.
    pub fn pair_values(&self, g: Vec<f64>, tol: f64, n_max: usize) -> Result<f64> {
        let scale = self.grid().l1_norm(&g).max(f64::MIN_POSITIVE);
        let mut h = g;
        let mut prev = self.grid().integrate(&h);
        let mut change = f64::INFINITY;
        for _ in 0..n_max {
            h = self.step(&h);
            let cur = self.grid().integrate(&h);
            change = (cur - prev).abs();
            if change < tol * scale {
                return Ok(cur);
            }
            prev = cur;
        }
        Err(Error::NoConvergence(format!("pairing not settled after {n_max} steps (last change {change:.3e})")))
    }

    /// `μ(φ)` for a function, with the first application of `L_0` exact.
    pub fn measure(&self, phi: impl Fn(f64) -> f64) -> Result<f64> {
        let first: Vec<f64> = self.l0_apply_fn(phi).into_iter().map(|v| v / self.branches()).collect();
        self.pair_values(first, 1e-13, 200)
    }
}

/// Pairings `μ_n(φ) = ∫ N^{-n} L_0^n φ dx` for a list of observables.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MmeApproximation {
    /// Iterations performed.
    pub n: usize,
    pub converged: bool,
    /// `μ_n(φ_i)` for the final `n`.
    pub values: Vec<f64>,
    /// `history[n][i] = ∫ N^{-n} L_0^n φ_i dx`, starting at `n = 0`.
    pub history: Vec<Vec<f64>>,
    /// Final grid functions `N^{-n} L_0^n φ_i` at the grid nodes.
    #[serde(skip)]
    pub iterates: Vec<Vec<f64>>,
}

/// Iterates `N^{-1} L_0` on each observable until every pairing changes by less
/// than [`STOP_TOL`]; a run that exhausts `n_max` is returned with `converged = false`.
pub fn mme_iterate(op: &MmeOperator<'_>, phis: &[&(dyn Fn(f64) -> f64 + Sync)], n_max: usize) -> Result<MmeApproximation> {
    if n_max > MAX_ITER {
        return Err(Error::InvalidArgument(format!("n_max {n_max} exceeds {MAX_ITER}")));
    }
    let grid = op.grid();
    let nb = op.branches();
    let mut history = vec![phis
        .iter()
        .map(|phi| crate::quadrature::integrate_adaptive(|x| phi(x), 0.0, 1.0, 1e-13).0)
        .collect::<Vec<f64>>()];
    let mut iterates: Vec<Vec<f64>> = Vec::new();
    let mut converged = false;
    for n in 1..=n_max {
        iterates = if n == 1 {
            phis.iter().map(|phi| op.l0_apply_fn(phi).into_iter().map(|v| v / nb).collect()).collect()
        } else {
            iterates.iter().map(|h| op.step(h)).collect()
        };
        let row: Vec<f64> = iterates.iter().map(|h| grid.integrate(h)).collect();
        let settled = row.iter().zip(&history[n - 1]).all(|(a, b)| (a - b).abs() < STOP_TOL);
        history.push(row);
        if settled && n > 1 {
            converged = true;
            break;
        }
    }
    let n = history.len() - 1;
    Ok(MmeApproximation { n, converged, values: history[n].clone(), history, iterates })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MixingCheck {
    pub mu_h: f64,
    pub mu_phi: f64,
    /// `∫ h · φ∘f^n dμ - μ(h) μ(φ)` for `n = 0..=n_max`.
    pub correlations: Vec<f64>,
    pub fit: Option<DecayFit>,
    /// Fitted ratio, `None` when the correlations vanish identically.
    pub rate: Option<f64>,
    /// `1/N + 0.05`.
    pub nu: f64,
    pub passed: bool,
}

/// Correlations `μ(φ · N^{-n} L_0^n (h - μ(h)))` and their fitted decay ratio.
pub fn mixing_rate_check(
    op: &MmeOperator<'_>,
    h: impl Fn(f64) -> f64,
    phi: impl Fn(f64) -> f64,
    n_max: usize,
) -> Result<MixingCheck> {
    if n_max > MAX_ITER {
        return Err(Error::InvalidArgument(format!("n_max {n_max} exceeds {MAX_ITER}")));
    }
    let nb = op.branches();
    let mu_h = op.measure(&h)?;
    let mu_phi = op.measure(&phi)?;
    let phi_nodes = op.grid().sample(&phi);
    let mut u = op.grid().sample(|x| h(x) - mu_h);
    let mut correlations = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        if n == 1 {
            u = op.l0_apply_fn(|x| h(x) - mu_h).into_iter().map(|v| v / nb).collect();
        } else if n > 1 {
            u = op.step(&u);
        }
        let c = if n == 0 {
            op.measure(|x| phi(x) * (h(x) - mu_h))?
        } else {
            let g: Vec<f64> = u.iter().zip(&phi_nodes).map(|(a, b)| a * b).collect();
            if op.grid().l1_norm(&g) == 0.0 {
                0.0
            } else {
                op.pair_values(g, 1e-12, 200)?
            }
        };
        correlations.push(c);
    }
    let scale = correlations.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let nu = 1.0 / nb + 0.05;
    let (fit, rate) = if scale <= 1e-14 {
        (None, None)
    } else {
        let fit = fit_decay(&correlations)?;
        let rho = fit.rho;
        (Some(fit), Some(rho))
    };
    let passed = rate.is_none_or(|r| r <= nu);
    Ok(MixingCheck { mu_h, mu_phi, correlations, fit, rate, nu, passed })
}

/// An `n`-cylinder `g_{w_1} ∘ ... ∘ g_{w_n}((0, 1))`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Cylinder {
    pub word: Vec<u8>,
    pub lo: f64,
    pub hi: f64,
}

impl Cylinder {
    fn inverse(&self, map: &dyn BranchMap, x: f64) -> Result<f64> {
        self.word.iter().rev().try_fold(x, |y, &j| map.inverse(j as usize, y))
    }
}

/// All `n`-cylinders sorted left to right.
pub fn cylinders(map: &dyn BranchMap, n: usize) -> Result<Vec<Cylinder>> {
    let nb = map.n_branches();
    if nb.checked_pow(n as u32).is_none_or(|c| c > MAX_CYLINDERS) {
        return Err(Error::InvalidArgument(format!("{nb}^{n} cylinders exceed {MAX_CYLINDERS}")));
    }
    let mut level = vec![Cylinder { word: Vec::new(), lo: 0.0, hi: 1.0 }];
    for _ in 0..n {
        let mut next = Vec::with_capacity(level.len() * nb);
        for j in 0..nb {
            for c in &level {
                let (a, b) = (map.inverse(j, c.lo)?, map.inverse(j, c.hi)?);
                let mut word = Vec::with_capacity(c.word.len() + 1);
                word.push(j as u8);
                word.extend_from_slice(&c.word);
                next.push(Cylinder { word, lo: a.min(b), hi: a.max(b) });
            }
        }
        level = next;
    }
    level.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    Ok(level)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CylinderSample {
    pub cylinder: Cylinder,
    /// `μ(h) >= μ(p)` for the bump `h` equal to 1 on `p` and supported on `p⁻ ∪ p ∪ p⁺`.
    pub upper: f64,
    /// `3 N^{-n}`.
    pub bound: f64,
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Upper bounds on `μ(p)` for `count` random `n`-cylinders.
///
/// With `h` the bump of `p`, only the words of `p⁻, p, p⁺` contribute to
/// `L_0^n h`, and `μ(h) = N^{-n} μ(L_0^n h)`.
pub fn cylinder_bounds(op: &MmeOperator<'_>, n: usize, count: usize, seed: u64) -> Result<Vec<CylinderSample>> {
    let map = op.map;
    let all = cylinders(map, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = sample(&mut rng, all.len(), count.min(all.len()));
    let scale = op.branches().powi(n as i32).recip();
    let mut out = Vec::with_capacity(picks.len());
    for i in picks {
        let p = &all[i];
        let mut parts: Vec<(&Cylinder, Box<dyn Fn(f64) -> f64>)> = Vec::with_capacity(3);
        parts.push((p, Box::new(|_| 1.0)));
        if i > 0 {
            let c = &all[i - 1];
            let (a, b) = (c.lo, c.hi);
            parts.push((c, Box::new(move |y| smoothstep((y - a) / (b - a)))));
        }
        if i + 1 < all.len() {
            let c = &all[i + 1];
            let (a, b) = (c.lo, c.hi);
            parts.push((c, Box::new(move |y| smoothstep((b - y) / (b - a)))));
        }
        let mut u = vec![0.0; op.grid().len()];
        for (c, bump) in &parts {
            for (ui, &x) in u.iter_mut().zip(&op.grid().nodes) {
                *ui += bump(c.inverse(map, x)?);
            }
        }
        let upper = scale * op.pair_values(u, 1e-13, 200)?;
        out.push(CylinderSample { cylinder: p.clone(), upper, bound: 3.0 * scale });
    }
    Ok(out)
}
