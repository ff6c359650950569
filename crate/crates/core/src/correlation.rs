//! Correlation sequences `C(n) = ∫ φ · ψ∘f^n dμ` and their decay.
//!
//! Affine Markov maps with polynomial observables are handled exactly through
//! powers of `T_{k,r}`; everything else goes through quadrature, either over
//! the cylinders of `f^n` or with a transfer operator sampled on a panel grid.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::affine_resonances::{build_bk, build_tkr, resonance_set, WeightMode};
use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, perron_left, perron_right, ComplexLu, Csr, Matrix};
use crate::map_model::{BranchMap, ExprNode, MapSpec, MarkovAffineMap};
use crate::quadrature::{self, NodeFamily, PanelGrid, Rule};
use crate::scalar::{binomial, Scalar};
use crate::transfer::GridTransfer;
use crate::AffineMap;

pub const MAX_N: usize = 60;
pub const MAX_EXACT_DEGREE: usize = 8;

// ---------------------------------------------------------------------------
// piecewise polynomials in the basis x^l 1_{I_j}, index l * N + j

/// The global polynomial `poly` written on each of the `n` intervals.
pub fn poly_on_intervals<T: Scalar>(poly: &[T], n: usize) -> Vec<T> {
    poly.iter().flat_map(|c| std::iter::repeat(c.clone()).take(n)).collect()
}

pub fn pw_mul<T: Scalar>(a: &[T], b: &[T], n: usize) -> Vec<T> {
    let (ra, rb) = (a.len() / n, b.len() / n);
    if ra == 0 || rb == 0 {
        return Vec::new();
    }
    let mut out = vec![T::zero(); (ra + rb - 1) * n];
    for la in 0..ra {
        for lb in 0..rb {
            for j in 0..n {
                let v = a[la * n + j].clone() * b[lb * n + j].clone();
                if !v.is_zero() {
                    out[(la + lb) * n + j] = out[(la + lb) * n + j].clone() + v;
                }
            }
        }
    }
    out
}

/// Multiplies by the piecewise constant `h`.
pub fn pw_scale<T: Scalar>(a: &[T], h: &[T]) -> Vec<T> {
    let n = h.len();
    a.iter().enumerate().map(|(i, c)| c.clone() * h[i % n].clone()).collect()
}

/// `φ∘f` on each interval: `φ(λ_j x + o_j)` expanded in powers of `x`.
pub fn pw_compose<T: Scalar>(map: &MarkovAffineMap<T>, poly: &[T]) -> Vec<T> {
    let n = map.n();
    let r = poly.len();
    let mut out = vec![T::zero(); r * n];
    for j in 0..n {
        let (s, o) = (&map.slopes()[j], &map.offsets()[j]);
        for (l, c) in poly.iter().enumerate() {
            for m in 0..=l {
                let t = c.clone() * binomial::<T>(l, m) * s.powi_exact(m as u32) * o.powi_exact((l - m) as u32);
                out[m * n + j] = out[m * n + j].clone() + t;
            }
        }
    }
    out
}

fn degree_of(poly: &[f64]) -> usize {
    poly.len().saturating_sub(1)
}

// ---------------------------------------------------------------------------
// invariant density and conformal measure

/// Leading eigenpair of `L_k` for an affine Markov map.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinePair<T> {
    pub mode: WeightMode,
    pub k: usize,
    pub gamma: T,
    /// One value per interval, scaled so that `ν(h) = 1`.
    pub density: Vec<T>,
    /// `ν(x^l 1_{I_j})` at `l * N + j` for `l <= degree`, scaled so that `ν(1) = 1`.
    pub conformal: Vec<T>,
    pub degree: usize,
}

impl<T: Scalar> AffinePair<T> {
    /// Extends the left eigenvector of `B_k` to the left eigenvector of `T_{k,degree}`
    /// for the same eigenvalue, solving one `N x N` system per degree.
    pub fn from_eigenvectors(
        map: &MarkovAffineMap<T>,
        mode: WeightMode,
        gamma: T,
        right: Vec<T>,
        left: Vec<T>,
        degree: usize,
    ) -> Result<Self> {
        let k = mode.natural_k();
        let n = map.n();
        let t = build_tkr(map, k, degree, mode);
        let mut ell = left;
        for l in 1..=degree {
            let rhs: Vec<T> = (0..n)
                .map(|j| {
                    let mut acc = T::zero();
                    for m in 0..l {
                        for i in 0..n {
                            let e = &t.matrix[(m * n + i, l * n + j)];
                            if !e.is_zero() {
                                acc = acc + ell[m * n + i].clone() * e.clone();
                            }
                        }
                    }
                    acc
                })
                .collect();
            let shifted = Matrix::identity(n).scale(&gamma).sub(&t.block(l, l)).transpose();
            let block = shifted
                .solve(&rhs, 1e-13)
                .ok_or_else(|| Error::Numeric(format!("γ is an eigenvalue of B_{}", k + l)))?;
            ell.extend(block);
        }
        let total = ell[..n].iter().fold(T::zero(), |a, b| a + b.clone());
        if total.is_zero() {
            return Err(Error::Numeric("conformal measure has zero mass".into()));
        }
        let ell: Vec<T> = ell.into_iter().map(|v| v / total.clone()).collect();
        let nu_h = ell[..n].iter().zip(&right).fold(T::zero(), |a, (l, h)| a + l.clone() * h.clone());
        if nu_h.is_zero() {
            return Err(Error::Numeric("density and conformal measure are orthogonal".into()));
        }
        let density = right.into_iter().map(|h| h / nu_h.clone()).collect();
        Ok(Self { mode, k, gamma, density, conformal: ell, degree })
    }

    /// SRB pair from exact kernels of `B_1 - I` and its transpose.
    pub fn srb_exact(map: &MarkovAffineMap<T>, degree: usize) -> Result<Self> {
        let b = build_bk(map, 1, WeightMode::Srb);
        let shifted = b.shift(&T::one());
        let not_simple = || Error::NotTransitive("eigenvalue 1 of B_1 is not simple".into());
        let right = shifted.kernel_vector(1e-12).ok_or_else(not_simple)?;
        let left = shifted.transpose().kernel_vector(1e-12).ok_or_else(not_simple)?;
        Self::from_eigenvectors(map, WeightMode::Srb, T::one(), right, left, degree)
    }

    pub fn n(&self) -> usize {
        self.density.len()
    }

    /// `ν(g)` for a piecewise polynomial of degree at most `self.degree`.
    pub fn integrate(&self, g: &[T]) -> T {
        assert!(g.len() <= self.conformal.len(), "degree exceeds the conformal moments");
        g.iter().zip(&self.conformal).fold(T::zero(), |a, (x, w)| a + x.clone() * w.clone())
    }

    /// `μ(g) = ν(g h)`.
    pub fn mean(&self, g: &[T]) -> T {
        self.integrate(&pw_scale(g, &self.density))
    }
}

impl AffinePair<f64> {
    /// Perron pair of `B_k`; fails for non-transitive maps.
    pub fn perron(map: &AffineMap, mode: WeightMode, degree: usize) -> Result<Self> {
        let b = build_bk(map, mode.natural_k(), mode);
        let right = perron_right(&b, 1e-15, 200_000)?;
        let left = perron_left(&b, 1e-15, 200_000)?;
        Self::from_eigenvectors(map, mode, right.rho, right.vector, left.vector, degree)
    }
}

/// Leading eigenpair of a grid-sampled transfer operator.
#[derive(Clone, Debug)]
pub struct GridPair {
    pub mode: WeightMode,
    pub gamma: f64,
    pub transfer: GridTransfer,
    pub operator: Csr,
    /// Density at the nodes, `∑ w_i h_i = 1`.
    pub density: Vec<f64>,
    /// Quadrature weights of the conformal measure.
    pub conformal: Vec<f64>,
    pub iterations: usize,
}

const MAX_POWER_ITER: usize = 10_000;

impl GridPair {
    /// SRB density by power iteration of `L_1`; the conformal measure is Lebesgue.
    pub fn srb(map: &dyn BranchMap, grid: PanelGrid) -> Result<Self> {
        let transfer = GridTransfer::new(map, grid)?;
        let operator = transfer.lk(1);
        let weights = transfer.grid.weights.clone();
        let mut h = vec![1.0; transfer.len()];
        for it in 1..=MAX_POWER_ITER {
            let mut next = operator.apply(&h);
            let mass = transfer.grid.integrate(&next);
            next.iter_mut().for_each(|v| *v /= mass);
            let diff: f64 = transfer.grid.l1_norm(&next.iter().zip(&h).map(|(a, b)| a - b).collect::<Vec<_>>());
            h = next;
            if diff < 1e-14 {
                return Ok(Self {
                    mode: WeightMode::Srb,
                    gamma: 1.0,
                    transfer,
                    operator,
                    density: h,
                    conformal: weights,
                    iterations: it,
                });
            }
        }
        Err(Error::NoConvergence(format!("SRB power iteration after {MAX_POWER_ITER} steps")))
    }

    /// Measure of maximal entropy of a full-branch map: `L_0 1 = N`, so the density
    /// is `1` and the measure is `lim ∫ N^{-n} L_0^n(·)`, obtained by iterating the
    /// dual weights.
    pub fn mme(map: &dyn BranchMap, grid: PanelGrid) -> Result<Self> {
        if !map.is_full_branch() {
            return Err(Error::Unsupported("grid MME needs a full-branch map".into()));
        }
        let transfer = GridTransfer::new(map, grid)?;
        let operator = transfer.lk(0);
        let nb = map.n_branches() as f64;
        let (conformal, iterations) = dual_limit(&operator, &transfer.grid.weights, nb, 1e-15)?;
        Ok(Self {
            mode: WeightMode::Mme,
            gamma: nb,
            density: vec![1.0; transfer.len()],
            transfer,
            operator,
            conformal,
            iterations,
        })
    }

    pub fn mean(&self, values: &[f64]) -> f64 {
        self.conformal.iter().zip(values).zip(&self.density).map(|((w, v), h)| w * v * h).sum()
    }

    /// Raw and centred sequences for node samples of `φ` and `ψ`.
    pub fn correlation(&self, phi: &[f64], psi: &[f64], n_max: usize) -> (Vec<f64>, Vec<f64>, f64, f64) {
        let (mp, ms) = (self.mean(phi), self.mean(psi));
        let mut g: Vec<f64> = phi.iter().zip(&self.density).map(|(p, h)| (p - mp) * h).collect();
        let mut centered = Vec::with_capacity(n_max + 1);
        for n in 0..=n_max {
            centered.push(self.conformal.iter().zip(psi).zip(&g).map(|((w, s), v)| w * s * v).sum());
            if n < n_max {
                g = self.operator.apply(&g);
                g.iter_mut().for_each(|v| *v /= self.gamma);
            }
        }
        let raw = centered.iter().map(|c| c + mp * ms).collect();
        (raw, centered, mp, ms)
    }
}

/// Iterates `w ↦ Mᵀ w / scale` from `w0` until the `ℓ¹` change is below `tol`.
pub(crate) fn dual_limit(m: &Csr, w0: &[f64], scale: f64, tol: f64) -> Result<(Vec<f64>, usize)> {
    let mut w = w0.to_vec();
    for it in 1..=MAX_POWER_ITER {
        let next: Vec<f64> = m.apply_transpose(&w).into_iter().map(|v| v / scale).collect();
        let diff: f64 = next.iter().zip(&w).map(|(a, b)| (a - b).abs()).sum();
        w = next;
        if diff < tol {
            return Ok((w, it));
        }
    }
    Err(Error::NoConvergence(format!("dual iteration after {MAX_POWER_ITER} steps")))
}

/// Density/measure pair for any supported map.
#[derive(Clone, Debug)]
pub enum InvariantDensityPair {
    Affine(AffinePair<f64>),
    Grid(Box<GridPair>),
}

impl InvariantDensityPair {
    pub fn gamma(&self) -> f64 {
        match self {
            Self::Affine(p) => p.gamma,
            Self::Grid(p) => p.gamma,
        }
    }

    pub fn mode(&self) -> WeightMode {
        match self {
            Self::Affine(p) => p.mode,
            Self::Grid(p) => p.mode,
        }
    }

    /// `μ(φ)`; affine maps need polynomial observables unless the measure is SRB.
    pub fn mean(&self, map: &MapSpec, phi: &ExprNode) -> Result<f64> {
        match self {
            Self::Grid(p) => Ok(p.mean(&p.transfer.grid.sample(|x| phi.eval(x)))),
            Self::Affine(p) => {
                if let Some(poly) = phi.to_polynomial().filter(|c| degree_of(c) <= p.degree) {
                    return Ok(p.mean(&poly_on_intervals(&poly, p.n())));
                }
                if p.mode != WeightMode::Srb {
                    return Err(Error::Unsupported("MME means of non-polynomial observables on affine maps".into()));
                }
                let knots = map.as_branch_map().knots();
                Ok((0..p.n())
                    .map(|j| p.density[j] * quadrature::integrate_adaptive(|x| phi.eval(x), knots[j], knots[j + 1], 1e-13).0)
                    .sum())
            }
        }
    }
}

fn grid_rule() -> Rule {
    Rule::new(NodeFamily::GaussLegendre, 24)
}

fn default_grid(map: &MapSpec, panels: usize) -> PanelGrid {
    let knots = map.as_branch_map().knots();
    match map {
        MapSpec::MonotoneFullBranch(_) => PanelGrid::graded_at_zero(knots, panels, 24, grid_rule()),
        _ => PanelGrid::uniform(knots, panels, grid_rule()),
    }
}

fn grid_pair(map: &MapSpec, mode: WeightMode, panels: usize) -> Result<GridPair> {
    let grid = default_grid(map, panels);
    match mode {
        WeightMode::Srb => GridPair::srb(map.as_branch_map(), grid),
        WeightMode::Mme => GridPair::mme(map.as_branch_map(), grid),
    }
}

/// Invariant density and conformal measure of `map` for the given mode.
pub fn invariant_density(map: &MapSpec, mode: WeightMode) -> Result<InvariantDensityPair> {
    match map {
        MapSpec::AffineMarkov(m) => Ok(InvariantDensityPair::Affine(AffinePair::perron(m, mode, MAX_EXACT_DEGREE)?)),
        _ => Ok(InvariantDensityPair::Grid(Box::new(grid_pair(map, mode, 8)?))),
    }
}

// ---------------------------------------------------------------------------
// correlation traces

/// Exact sequences for polynomial observables.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactTrace<T> {
    pub raw: Vec<T>,
    pub centered: Vec<T>,
    pub mean_phi: T,
    pub mean_psi: T,
}

/// `C(n) = γ^{-n} ν(ψ · T^n((φ - μφ) h)) + μφ μψ` with `φ, ψ` given by ascending coefficients.
pub fn exact_correlation<T: Scalar>(
    map: &MarkovAffineMap<T>,
    pair: &AffinePair<T>,
    phi: &[T],
    psi: &[T],
    n_max: usize,
) -> Result<ExactTrace<T>> {
    let n = map.n();
    exact_correlation_pw(map, pair, &poly_on_intervals(phi, n), &poly_on_intervals(psi, n), n_max)
}

/// As [`exact_correlation`] for piecewise polynomials in the basis `x^l 1_{I_j}`.
pub fn exact_correlation_pw<T: Scalar>(
    map: &MarkovAffineMap<T>,
    pair: &AffinePair<T>,
    phi_pw: &[T],
    psi_pw: &[T],
    n_max: usize,
) -> Result<ExactTrace<T>> {
    let n = map.n();
    let (r, s) = ((phi_pw.len() / n).max(1) - 1, (psi_pw.len() / n).max(1) - 1);
    if r + s > pair.degree {
        return Err(Error::InvalidArgument(format!(
            "observable degrees {r} + {s} exceed the conformal moments ({})",
            pair.degree
        )));
    }
    let mean_phi = pair.mean(phi_pw);
    let mean_psi = pair.mean(psi_pw);
    let mut shifted = phi_pw.to_vec();
    for v in shifted.iter_mut().take(n) {
        *v = v.clone() - mean_phi.clone();
    }
    let mut g = pw_scale(&shifted, &pair.density);
    let t = build_tkr(map, pair.k, r, pair.mode);
    let mut centered = Vec::with_capacity(n_max + 1);
    for step in 0..=n_max {
        centered.push(pair.integrate(&pw_mul(psi_pw, &g, n)));
        if step < n_max {
            g = t.apply(&g).into_iter().map(|v| v / pair.gamma.clone()).collect();
        }
    }
    let offset = mean_phi.clone() * mean_psi.clone();
    let raw = centered.iter().map(|c| c.clone() + offset.clone()).collect();
    Ok(ExactTrace { raw, centered, mean_phi, mean_psi })
}

/// `∫ φ h ψ∘f^n dx` for `n <= n_max`, integrating over every cylinder of `f^n`
/// with Gauss–Legendre. Fails with [`Error::Unsupported`] once a level needs
/// more than `budget` cylinders.
pub fn cylinder_correlation(
    map: &AffineMap,
    density: &[f64],
    phi: &dyn Fn(f64) -> f64,
    psi: &dyn Fn(f64) -> f64,
    n_max: usize,
    budget: usize,
    tol: f64,
) -> Result<Vec<f64>> {
    #[derive(Clone, Copy)]
    struct Cyl {
        a: f64,
        b: f64,
        s: f64,
        o: f64,
        last: usize,
        first: usize,
    }
    let n = map.n();
    let p = map.partition();
    let adj = map.adjacency();
    let lo = Rule::new(NodeFamily::GaussLegendre, 16);
    let hi = Rule::new(NodeFamily::GaussLegendre, 24);
    let integrate = |rule: &Rule, c: &Cyl| -> f64 {
        let half = 0.5 * (c.b - c.a);
        rule.nodes
            .iter()
            .zip(&rule.weights)
            .map(|(t, w)| {
                let x = c.a + half * (t + 1.0);
                w * half * phi(x) * psi(c.s * x + c.o)
            })
            .sum::<f64>()
            * density[c.first]
    };
    let mut level: Vec<Cyl> =
        (0..n).map(|i| Cyl { a: p[i], b: p[i + 1], s: 1.0, o: 0.0, last: i, first: i }).collect();
    let mut out = Vec::with_capacity(n_max + 1);
    for step in 0..=n_max {
        let mut total = 0.0;
        for c in &level {
            let (v1, v2) = (integrate(&lo, c), integrate(&hi, c));
            if (v1 - v2).abs() > tol * (c.b - c.a) {
                let refined =
                    quadrature::integrate(|x| phi(x) * psi(c.s * x + c.o), c.a, c.b, 32, 8) * density[c.first];
                if (refined - v2).abs() > 1e3 * tol * (c.b - c.a).max(tol) {
                    let check =
                        quadrature::integrate(|x| phi(x) * psi(c.s * x + c.o), c.a, c.b, 32, 16) * density[c.first];
                    if (check - refined).abs() > tol * (c.b - c.a) {
                        return Err(Error::NoConvergence(format!("cylinder quadrature at n = {step}")));
                    }
                }
                total += refined;
            } else {
                total += v2;
            }
        }
        out.push(total);
        if step == n_max {
            break;
        }
        let count: usize = level.iter().map(|c| adj[c.last].iter().filter(|&&x| x).count()).sum();
        if count > budget {
            return Err(Error::Unsupported(format!("{count} cylinders at n = {} exceed the budget", step + 1)));
        }
        let mut next = Vec::with_capacity(count);
        for c in &level {
            let (lam, off) = (map.slopes()[c.last], map.offsets()[c.last]);
            for t in (0..n).filter(|&t| adj[c.last][t]) {
                // points of I_last mapped into I_t, pulled back through F = f^step
                let (y0, y1) = (map.g(c.last, &p[t]), map.g(c.last, &p[t + 1]));
                let (x0, x1) = ((y0 - c.o) / c.s, (y1 - c.o) / c.s);
                next.push(Cyl {
                    a: x0.min(x1),
                    b: x0.max(x1),
                    s: lam * c.s,
                    o: lam * c.o + off,
                    last: t,
                    first: c.first,
                });
            }
        }
        level = next;
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalPath {
    Exact,
    Cylinder,
    Grid,
    Fourier,
}

/// Which evaluation path `correlation_sequence` should use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathChoice {
    Auto,
    Exact,
    Quadrature,
}

#[derive(Clone, Debug)]
pub struct CorrelationOptions {
    pub n_max: usize,
    pub path: PathChoice,
    pub tol: f64,
    pub cylinder_budget: usize,
}

impl Default for CorrelationOptions {
    fn default() -> Self {
        Self { n_max: 30, path: PathChoice::Auto, tol: 1e-10, cylinder_budget: 1 << 20 }
    }
}

/// Result of [`fit_decay`]: `|C(n)| ≈ amplitude · ρ^n · n^order`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub rho: f64,
    pub order: usize,
    pub amplitude: f64,
    /// RMS residual of `ln |C(n)|`.
    pub residual: f64,
    /// First and last index used.
    pub window: (usize, usize),
    pub points: usize,
    pub method: FitMethod,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    /// Least squares on `ln |C(n)|`.
    LogLinear,
    /// Linear prediction on the signed sequence, used when several modes of
    /// close modulus make the log-linear residual large.
    LinearPrediction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictedResonance {
    pub re: f64,
    pub im: f64,
    /// `|ξ| / γ`: the decay ratio this resonance predicts.
    pub ratio: f64,
    /// Largest Jordan block, 1 when unknown.
    pub jordan: usize,
    /// `K` in the envelope `K ρ^n max(n,1)^{m-1}`, the smallest one covering the fitted window.
    pub envelope: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTrace {
    pub phi: String,
    pub psi: String,
    pub measure: String,
    pub path: EvalPath,
    pub gamma: f64,
    pub mean_phi: C64,
    pub mean_psi: C64,
    /// `∫ φ ψ∘f^n dμ`.
    pub raw: Vec<C64>,
    /// `∫ φ ψ∘f^n dμ - μ(φ) μ(ψ)`.
    pub centered: Vec<C64>,
    pub fit: Option<DecayFit>,
    pub fit_error: Option<String>,
    pub predicted: Option<PredictedResonance>,
}

impl CorrelationTrace {
    fn new(phi: String, psi: String, measure: &str, path: EvalPath, gamma: f64) -> Self {
        Self {
            phi,
            psi,
            measure: measure.into(),
            path,
            gamma,
            mean_phi: C64::new(0.0, 0.0),
            mean_psi: C64::new(0.0, 0.0),
            raw: Vec::new(),
            centered: Vec::new(),
            fit: None,
            fit_error: None,
            predicted: None,
        }
    }

    fn set_real(&mut self, raw: Vec<f64>, centered: Vec<f64>, mp: f64, ms: f64) {
        self.raw = raw.into_iter().map(|v| C64::new(v, 0.0)).collect();
        self.centered = centered.into_iter().map(|v| C64::new(v, 0.0)).collect();
        self.mean_phi = C64::new(mp, 0.0);
        self.mean_psi = C64::new(ms, 0.0);
    }

    pub fn abs_centered(&self) -> Vec<f64> {
        self.centered.iter().map(|c| c.norm()).collect()
    }

    /// Runs [`fit_decay`] on the centred sequence, storing the fit or the reason it failed.
    pub fn refit(&mut self) {
        let seq: Vec<f64> = if self.centered.iter().all(|c| c.im == 0.0) {
            self.centered.iter().map(|c| c.re).collect()
        } else {
            self.abs_centered()
        };
        match fit_decay(&seq) {
            Ok(f) => {
                self.fit = Some(f);
                self.fit_error = None;
            }
            Err(e) => {
                self.fit = None;
                self.fit_error = Some(e.to_string());
            }
        }
        self.update_envelope();
    }

    fn update_envelope(&mut self) {
        let abs = self.abs_centered();
        let window = self.fit.as_ref().map(|f| f.window).unwrap_or((0, abs.len().saturating_sub(1)));
        if let Some(p) = self.predicted.as_mut() {
            p.envelope = (window.0..=window.1.min(abs.len().saturating_sub(1)))
                .map(|n| abs[n] / envelope_shape(p.ratio, p.jordan, n))
                .filter(|v| v.is_finite())
                .fold(0.0, f64::max);
        }
    }

    /// `K ρ^n max(n,1)^{m-1}` from the predicted resonance.
    pub fn predicted_bound(&self, n: usize) -> Option<f64> {
        self.predicted.as_ref().map(|p| p.envelope * envelope_shape(p.ratio, p.jordan, n))
    }

    /// Ratio of the largest rescaled value `|C(n)| / (ρ^n n^{m-1})` on the second
    /// half of the fitted window to the largest on the first half. Values near or
    /// below 1 mean the rescaled trace stays bounded.
    pub fn rescaled_growth(&self) -> Option<f64> {
        let p = self.predicted.as_ref()?;
        let (a, b) = self.fit.as_ref()?.window;
        let abs = self.abs_centered();
        let scaled: Vec<f64> = (a..=b).map(|n| abs[n] / envelope_shape(p.ratio, p.jordan, n)).collect();
        let mid = scaled.len() / 2;
        let first = scaled[..mid.max(1)].iter().copied().fold(0.0, f64::max);
        let second = scaled[mid..].iter().copied().fold(0.0, f64::max);
        Some(second / first)
    }
}

fn envelope_shape(rho: f64, jordan: usize, n: usize) -> f64 {
    rho.powi(n as i32) * (n.max(1) as f64).powi(jordan.max(1) as i32 - 1)
}

/// Correlation sequence with decay fit and predicted resonance.
pub fn correlation_sequence(
    map: &MapSpec,
    phi: &ExprNode,
    psi: &ExprNode,
    mode: WeightMode,
    opts: &CorrelationOptions,
) -> Result<CorrelationTrace> {
    if opts.n_max > MAX_N {
        return Err(Error::InvalidArgument(format!("n_max = {} exceeds {MAX_N}", opts.n_max)));
    }
    let polys = (phi.to_polynomial(), psi.to_polynomial());
    let mut trace = match map {
        MapSpec::AffineMarkov(m) => {
            let exact_ok = matches!(&polys, (Some(a), Some(b)) if degree_of(a) + degree_of(b) <= MAX_EXACT_DEGREE);
            let use_exact = match opts.path {
                PathChoice::Exact if !exact_ok => {
                    return Err(Error::Unsupported("exact path needs polynomial observables of total degree <= 8".into()))
                }
                PathChoice::Exact => true,
                PathChoice::Auto => exact_ok,
                PathChoice::Quadrature if mode == WeightMode::Mme && exact_ok => true,
                PathChoice::Quadrature if mode == WeightMode::Mme => {
                    return Err(Error::Unsupported("MME quadrature on affine maps".into()))
                }
                PathChoice::Quadrature => false,
            };
            if use_exact {
                affine_exact_trace(m, phi, psi, mode, polys.0.as_ref().unwrap(), polys.1.as_ref().unwrap(), opts.n_max)?
            } else if mode == WeightMode::Mme {
                return Err(Error::Unsupported("MME correlations of non-polynomial observables on affine maps".into()));
            } else {
                affine_quadrature_trace(m, phi, psi, opts)?
            }
        }
        _ => {
            if opts.path == PathChoice::Exact {
                return Err(Error::Unsupported("exact path needs an affine Markov map".into()));
            }
            grid_trace(map, phi, psi, mode, opts)?
        }
    };
    trace.predicted = predict(map, mode, polys.0.as_deref())?;
    trace.refit();
    Ok(trace)
}

fn affine_exact_trace(
    map: &AffineMap,
    phi: &ExprNode,
    psi: &ExprNode,
    mode: WeightMode,
    pp: &[f64],
    ps: &[f64],
    n_max: usize,
) -> Result<CorrelationTrace> {
    let pair = AffinePair::perron(map, mode, degree_of(pp) + degree_of(ps))?;
    let ex = exact_correlation(map, &pair, pp, ps, n_max)?;
    let mut t = CorrelationTrace::new(phi.to_string(), psi.to_string(), mode.as_str(), EvalPath::Exact, pair.gamma);
    t.set_real(ex.raw, ex.centered, ex.mean_phi, ex.mean_psi);
    Ok(t)
}

fn affine_quadrature_trace(
    map: &AffineMap,
    phi: &ExprNode,
    psi: &ExprNode,
    opts: &CorrelationOptions,
) -> Result<CorrelationTrace> {
    let pair = AffinePair::perron(map, WeightMode::Srb, 0)?;
    let f = |x: f64| phi.eval(x);
    let g = |x: f64| psi.eval(x);
    let mp: f64 = (0..map.n())
        .map(|j| pair.density[j] * quadrature::integrate_adaptive(f, map.partition()[j], map.partition()[j + 1], 1e-14).0)
        .sum();
    let ms: f64 = (0..map.n())
        .map(|j| pair.density[j] * quadrature::integrate_adaptive(g, map.partition()[j], map.partition()[j + 1], 1e-14).0)
        .sum();
    let centered_phi = |x: f64| phi.eval(x) - mp;
    match cylinder_correlation(map, &pair.density, &centered_phi, &g, opts.n_max, opts.cylinder_budget, opts.tol) {
        Ok(centered) => {
            let mut t = CorrelationTrace::new(phi.to_string(), psi.to_string(), "srb", EvalPath::Cylinder, 1.0);
            let raw = centered.iter().map(|c| c + mp * ms).collect();
            t.set_real(raw, centered, mp, ms);
            Ok(t)
        }
        Err(Error::Unsupported(_)) => {
            grid_trace(&MapSpec::AffineMarkov(map.clone()), phi, psi, WeightMode::Srb, opts)
        }
        Err(e) => Err(e),
    }
}

/// Grid path with panel doubling until successive traces agree to `opts.tol`.
fn grid_trace(
    map: &MapSpec,
    phi: &ExprNode,
    psi: &ExprNode,
    mode: WeightMode,
    opts: &CorrelationOptions,
) -> Result<CorrelationTrace> {
    let run = |panels: usize| -> Result<(Vec<f64>, Vec<f64>, f64, f64, f64)> {
        let pair = grid_pair(map, mode, panels)?;
        let ph = pair.transfer.grid.sample(|x| phi.eval(x));
        let ps = pair.transfer.grid.sample(|x| psi.eval(x));
        let (raw, cen, mp, ms) = pair.correlation(&ph, &ps, opts.n_max);
        Ok((raw, cen, mp, ms, pair.gamma))
    };
    let mut panels = 2;
    let mut prev = run(panels)?;
    loop {
        panels *= 2;
        let cur = run(panels)?;
        let scale = cur.0[0].abs().max(cur.1[0].abs()).max(1.0);
        let diff = cur.0.iter().zip(&prev.0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if diff <= opts.tol * scale {
            let mut t = CorrelationTrace::new(phi.to_string(), psi.to_string(), mode.as_str(), EvalPath::Grid, cur.4);
            t.set_real(cur.0, cur.1, cur.2, cur.3);
            return Ok(t);
        }
        if panels >= 64 {
            return Err(Error::NoConvergence(format!(
                "grid correlation changed by {diff:e} between {} and {panels} panels per branch",
                panels / 2
            )));
        }
        prev = cur;
    }
}

/// Largest eigenvalue strictly inside `|z| < γ` for the map's transfer operator.
fn predict(map: &MapSpec, mode: WeightMode, phi_poly: Option<&[f64]>) -> Result<Option<PredictedResonance>> {
    let k = mode.natural_k();
    match map {
        MapSpec::AffineMarkov(m) => {
            let (r, trusted_only) = match phi_poly {
                Some(p) if degree_of(p) <= MAX_EXACT_DEGREE => (degree_of(p).max(1), false),
                _ => (4, true),
            };
            let rep = match resonance_set(m, mode, k, r) {
                Ok(rep) => rep,
                Err(_) => return Ok(None),
            };
            let gamma = rep.eigenvalues.iter().map(|e| e.modulus()).fold(0.0, f64::max);
            Ok(rep
                .eigenvalues
                .iter()
                .filter(|e| e.modulus() < gamma * (1.0 - 1e-9) && (e.trusted || !trusted_only))
                .max_by(|a, b| a.modulus().total_cmp(&b.modulus()))
                .map(|e| PredictedResonance {
                    re: e.re,
                    im: e.im,
                    ratio: e.modulus() / gamma,
                    jordan: e.max_jordan().unwrap_or(1),
                    envelope: 0.0,
                }))
        }
        _ => {
            let pair = grid_pair_coarse(map, mode)?;
            let mut ev = eigenvalues(&pair.operator.to_dense())?;
            ev.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
            let gamma = ev[0].norm();
            Ok(ev.iter().find(|z| z.norm() < gamma * (1.0 - 1e-6)).map(|z| PredictedResonance {
                re: z.re,
                im: z.im,
                ratio: z.norm() / gamma,
                jordan: 1,
                envelope: 0.0,
            }))
        }
    }
}

fn grid_pair_coarse(map: &MapSpec, mode: WeightMode) -> Result<GridPair> {
    let grid = PanelGrid::uniform(map.as_branch_map().knots(), 2, Rule::new(NodeFamily::Chebyshev, 24));
    match mode {
        WeightMode::Srb => GridPair::srb(map.as_branch_map(), grid),
        WeightMode::Mme => GridPair::mme(map.as_branch_map(), grid),
    }
}

// ---------------------------------------------------------------------------
// decay fit

const FIT_MIN_POINTS: usize = 8;
/// Log-linear residual above which linear prediction is tried.
const MIXED_MODE_RESIDUAL: f64 = 0.1;

/// Fits `|C(n)| ≈ c ρ^n n^k` on the part of the sequence above the noise floor
/// `1e3 ε |C(0)|`, with `k ∈ {0, 1, 2}`.
///
/// Signed input lets the linear-prediction fallback separate modes whose
/// moduli are too close for the log-linear fit to resolve within the window.
pub fn fit_decay(seq: &[f64]) -> Result<DecayFit> {
    let fit = fit_log_linear(seq)?;
    if fit.residual <= MIXED_MODE_RESIDUAL {
        return Ok(fit);
    }
    Ok(linear_prediction(seq, &fit).unwrap_or(fit))
}

fn fit_log_linear(seq: &[f64]) -> Result<DecayFit> {
    let abs: Vec<f64> = seq.iter().map(|v| v.abs()).collect();
    let reference = if abs.first().copied().unwrap_or(0.0) > 0.0 {
        abs[0]
    } else {
        abs.iter().copied().fold(0.0, f64::max)
    };
    let floor = 1e3 * f64::EPSILON * reference;
    if reference == 0.0 || !reference.is_finite() {
        return Err(Error::NoConvergence("all points below the noise floor".into()));
    }
    let mut end = abs.len();
    let mut run = 0;
    for (n, v) in abs.iter().enumerate() {
        if *v <= floor {
            run += 1;
            if run == 3 {
                end = n + 1 - 3;
                break;
            }
        } else {
            run = 0;
        }
    }
    let mut pts: Vec<usize> = (0..end).filter(|&n| abs[n] > floor).collect();
    if pts.len() < FIT_MIN_POINTS {
        return Err(Error::NoConvergence(format!(
            "only {} points above the noise floor, need {FIT_MIN_POINTS}",
            pts.len()
        )));
    }
    let skip = pts.len() / 3;
    if pts.len() - skip >= FIT_MIN_POINTS {
        pts.drain(..skip);
    }
    let logs = |n: usize| abs[n].ln();
    let lnn = |n: usize| (n.max(1) as f64).ln();

    let free = least_squares(&pts, |n| vec![1.0, n as f64, lnn(n)], logs)?;
    let order = free[2].round().clamp(0.0, 2.0) as usize;
    let fit_fixed = |pts: &[usize]| -> Result<(f64, f64)> {
        let c = least_squares(pts, |n| vec![1.0, n as f64], |n| logs(n) - order as f64 * lnn(n))?;
        Ok((c[0], c[1]))
    };
    let mut used = pts.clone();
    let (mut a, mut b) = fit_fixed(&used)?;
    for _ in 0..3 {
        let kept: Vec<usize> = used
            .iter()
            .copied()
            .filter(|&n| logs(n) - (a + b * n as f64 + order as f64 * lnn(n)) >= -1.0)
            .collect();
        if kept.len() == used.len() || kept.len() < FIT_MIN_POINTS {
            break;
        }
        used = kept;
        (a, b) = fit_fixed(&used)?;
    }
    let residual = (used
        .iter()
        .map(|&n| (logs(n) - a - b * n as f64 - order as f64 * lnn(n)).powi(2))
        .sum::<f64>()
        / used.len() as f64)
        .sqrt();
    Ok(DecayFit {
        rho: b.exp(),
        order,
        amplitude: a.exp(),
        residual,
        window: (used[0], *used.last().unwrap()),
        points: used.len(),
        method: FitMethod::LogLinear,
    })
}

/// Prony-type fit `C(n) = Σ_{i<=p} c_i z_i^n` with the smallest `p <= 10` that
/// reproduces the sequence to `1e-6`; `ρ = max |z_i|`, and `k` counts repeated roots.
fn linear_prediction(seq: &[f64], base: &DecayFit) -> Option<DecayFit> {
    let reference = seq.first().map(|v| v.abs()).filter(|v| *v > 0.0)?;
    let precise = 1e6 * f64::EPSILON * reference;
    let end = seq.iter().position(|v| !v.is_finite() || v.abs() <= precise).unwrap_or(seq.len());
    let data = &seq[..end];
    for p in 1..=10usize {
        if data.len() < 2 * p + 4 {
            return None;
        }
        let rows: Vec<usize> = (0..data.len() - p).collect();
        let coeffs = least_squares(&rows, |n| (0..p).map(|i| data[n + p - 1 - i]).collect(), |n| data[n + p]).ok()?;
        let (mut res, mut norm) = (0.0, 0.0);
        for &n in &rows {
            let pred: f64 = (0..p).map(|i| coeffs[i] * data[n + p - 1 - i]).sum();
            res += (data[n + p] - pred).powi(2);
            norm += data[n + p].powi(2);
        }
        if res.sqrt() > 1e-6 * norm.sqrt() {
            continue;
        }
        let companion = Matrix::from_fn(p, p, |i, j| if i == 0 { coeffs[j] } else if i == j + 1 { 1.0 } else { 0.0 });
        let roots = eigenvalues(&companion).ok()?;
        let lead = roots.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm()))?;
        let rho = lead.norm();
        if !(rho > 0.0 && rho < 1.0 + 1e-9) {
            return None;
        }
        let repeated = roots.iter().filter(|z| (**z - lead).norm() <= 0.02 * rho).count();
        return Some(DecayFit {
            rho,
            order: (repeated - 1).min(2),
            amplitude: base.amplitude,
            residual: res.sqrt() / norm.sqrt(),
            window: (0, end - 1),
            points: end,
            method: FitMethod::LinearPrediction,
        });
    }
    None
}

fn least_squares(pts: &[usize], row: impl Fn(usize) -> Vec<f64>, rhs: impl Fn(usize) -> f64) -> Result<Vec<f64>> {
    use faer::linalg::solvers::SolveLstsq;
    let rows: Vec<Vec<f64>> = pts.iter().map(|&n| row(n)).collect();
    let m = rows[0].len();
    if rows.len() < m {
        return Err(Error::Numeric("underdetermined least-squares fit".into()));
    }
    let a = faer::Mat::from_fn(rows.len(), m, |i, j| rows[i][j]);
    let b = faer::Mat::from_fn(rows.len(), 1, |i, _| rhs(pts[i]));
    let x = a.col_piv_qr().solve_lstsq(&b);
    let out: Vec<f64> = (0..m).map(|i| x[(i, 0)]).collect();
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(Error::Numeric("degenerate least-squares fit".into()))
    }
}

// ---------------------------------------------------------------------------
// spectral projection onto the sub-leading resonances

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionCheck {
    /// Largest sub-leading eigenvalue of `T_{k,r}`.
    pub re: f64,
    pub im: f64,
    pub ratio: f64,
    /// `max_j |ν(ψ · (T/γ)^j P g)|` over the shell of eigenvalues of that modulus.
    pub coefficient: f64,
    pub scale: f64,
    pub nonzero: bool,
}

/// Projects `g = (φ - μφ) h` onto the eigenvalues of `T_{k,r}` whose modulus equals
/// the largest sub-leading one, by trapezoidal contour integrals of the resolvent
/// on two circles, and reports whether `ψ` sees the projection.
pub fn subleading_projection(
    map: &AffineMap,
    pair: &AffinePair<f64>,
    phi: &[f64],
    psi: &[f64],
) -> Result<ProjectionCheck> {
    let n = map.n();
    let r = degree_of(phi);
    let t = build_tkr(map, pair.k, r, pair.mode);
    let dim = t.dim();
    let ev = eigenvalues(&t.matrix)?;
    let gamma = pair.gamma;
    let mut moduli: Vec<f64> = ev.iter().map(|z| z.norm()).filter(|&m| m < gamma * (1.0 - 1e-9)).collect();
    moduli.sort_by(|a, b| b.total_cmp(a));
    let top = *moduli.first().ok_or_else(|| Error::Numeric("no sub-leading eigenvalue".into()))?;
    let below = moduli.iter().copied().find(|&m| m < top * (1.0 - 1e-6)).unwrap_or(0.5 * top);
    let (r_out, r_in) = (0.5 * (top + gamma), 0.5 * (top + below));
    let lead = ev
        .iter()
        .filter(|z| (z.norm() - top).abs() <= 1e-6 * top)
        .max_by(|a, b| a.im.total_cmp(&b.im))
        .copied()
        .unwrap();
    let shell = ev.iter().filter(|z| (z.norm() - top).abs() <= 1e-6 * top.max(1e-12)).count();

    let phi_pw = poly_on_intervals(phi, n);
    let mut shifted = phi_pw;
    let mp = pair.mean(&shifted);
    for v in shifted.iter_mut().take(n) {
        *v -= mp;
    }
    let g = pw_scale(&shifted, &pair.density);
    let gc: Vec<C64> = g.iter().map(|&v| C64::new(v, 0.0)).collect();

    let m_pts = 256;
    let mut proj = vec![C64::new(0.0, 0.0); dim];
    for (radius, sign) in [(r_out, 1.0), (r_in, -1.0)] {
        for q in 0..m_pts {
            let theta = 2.0 * std::f64::consts::PI * (q as f64 + 0.5) / m_pts as f64;
            let z = C64::from_polar(radius, theta);
            let a: Vec<C64> = (0..dim * dim)
                .map(|idx| {
                    let (i, j) = (idx / dim, idx % dim);
                    let d = if i == j { z } else { C64::new(0.0, 0.0) };
                    d - t.matrix[(i, j)]
                })
                .collect();
            let x = ComplexLu::new(dim, a)?.solve(&gc);
            for (p, v) in proj.iter_mut().zip(x) {
                *p += v * z * sign / m_pts as f64;
            }
        }
    }

    let psi_pw = poly_on_intervals(psi, n);
    let pair_with = |v: &[C64]| -> C64 {
        let re: Vec<f64> = v.iter().map(|c| c.re).collect();
        let im: Vec<f64> = v.iter().map(|c| c.im).collect();
        C64::new(pair.integrate(&pw_mul(&psi_pw, &re, n)), pair.integrate(&pw_mul(&psi_pw, &im, n)))
    };
    let mut coefficient = 0.0f64;
    let mut v = proj;
    for _ in 0..shell.max(1) {
        coefficient = coefficient.max(pair_with(&v).norm());
        let re: Vec<f64> = v.iter().map(|c| c.re).collect();
        let im: Vec<f64> = v.iter().map(|c| c.im).collect();
        let (tr, ti) = (t.apply(&re), t.apply(&im));
        v = tr.iter().zip(&ti).map(|(a, b)| C64::new(*a, *b) / gamma).collect();
    }
    let gnorm = g.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let pnorm = psi.iter().map(|v| v.abs()).sum::<f64>();
    let nu_norm = pair.conformal.iter().map(|v| v.abs()).sum::<f64>();
    let scale = gnorm * pnorm * nu_norm;
    Ok(ProjectionCheck {
        re: lead.re,
        im: lead.im,
        ratio: top / gamma,
        coefficient,
        scale,
        nonzero: coefficient > 1e-8 * scale,
    })
}

// ---------------------------------------------------------------------------
// toral automorphisms

/// `x ↦ A x mod 1` on the 2-torus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusAutomorphism {
    pub a: [[i64; 2]; 2],
}

/// Finite Fourier series `Σ c_k e^{2πi k·x}`.
pub type TrigPoly = BTreeMap<(i64, i64), C64>;

impl TorusAutomorphism {
    pub fn new(a: [[i64; 2]; 2]) -> Result<Self> {
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        if det.abs() != 1 {
            return Err(Error::InvalidArgument(format!("determinant {det} is not ±1")));
        }
        Ok(Self { a })
    }

    pub fn cat() -> Self {
        Self { a: [[2, 1], [1, 1]] }
    }

    pub fn trace(&self) -> i64 {
        self.a[0][0] + self.a[1][1]
    }

    pub fn det(&self) -> i64 {
        self.a[0][0] * self.a[1][1] - self.a[0][1] * self.a[1][0]
    }

    pub fn is_hyperbolic(&self) -> bool {
        // eigenvalues off the unit circle: |tr| > 2 for det 1, tr != 0 for det -1
        if self.det() == 1 {
            self.trace().abs() > 2
        } else {
            self.trace() != 0
        }
    }

    /// `Aᵀ k`.
    fn dual(&self, k: (i128, i128)) -> Option<(i128, i128)> {
        let a = self.a;
        let x = (a[0][0] as i128).checked_mul(k.0)?.checked_add((a[1][0] as i128).checked_mul(k.1)?)?;
        let y = (a[0][1] as i128).checked_mul(k.0)?.checked_add((a[1][1] as i128).checked_mul(k.1)?)?;
        Some((x, y))
    }

    /// Expanding eigenvalue of `Aᵀ` and a left eigenvector `w` with `w·(Aᵀ k) = λ_u w·k`.
    fn unstable(&self) -> (f64, [f64; 2]) {
        let t = self.trace() as f64;
        let d = self.det() as f64;
        let disc = (t * t - 4.0 * d).sqrt();
        let lu = if t >= 0.0 { 0.5 * (t + disc) } else { 0.5 * (t - disc) };
        // left eigenvector of Aᵀ = right eigenvector of A
        let a = self.a;
        let w = if a[0][1] != 0 {
            [a[0][1] as f64, lu - a[0][0] as f64]
        } else {
            [lu - a[1][1] as f64, a[1][0] as f64]
        };
        (lu, w)
    }
}

/// `C(n) = ∫ φ · ψ∘A^n = Σ_m ψ̂_m φ̂_{-(Aᵀ)^n m}`, exact over the finite supports,
/// plus `n0`: correlations of the mean-zero parts vanish for every `n >= n0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusTrace {
    pub trace: CorrelationTrace,
    pub n0: usize,
}

pub fn torus_correlation(t: &TorusAutomorphism, phi: &TrigPoly, psi: &TrigPoly, n_max: usize) -> Result<TorusTrace> {
    if !t.is_hyperbolic() {
        return Err(Error::InvalidArgument(format!("matrix {:?} is not hyperbolic", t.a)));
    }
    let support_radius = phi.keys().map(|k| k.0.abs().max(k.1.abs())).max().unwrap_or(0) as f64;
    let orbit_from = |m: (i64, i64), steps: usize| -> Vec<Option<(i128, i128)>> {
        let mut out = Vec::with_capacity(steps + 1);
        let mut cur = Some((m.0 as i128, m.1 as i128));
        for _ in 0..=steps {
            out.push(cur);
            cur = cur.and_then(|c| t.dual(c));
        }
        out
    };
    // beyond n_safe every nonzero frequency of ψ has left the box |k|_∞ <= radius
    let (lu, w) = t.unstable();
    let wnorm = w[0].abs() + w[1].abs();
    let min_proj = psi
        .keys()
        .filter(|k| **k != (0, 0))
        .map(|k| (w[0] * k.0 as f64 + w[1] * k.1 as f64).abs() / wnorm)
        .fold(f64::INFINITY, f64::min);
    let n_safe = if min_proj.is_finite() && min_proj > 0.0 {
        ((support_radius + 1.0) / min_proj).ln().max(0.0) / lu.abs().ln()
    } else {
        0.0
    }
    .ceil() as usize
        + 1;
    let horizon = n_safe.max(n_max);
    let coeff = |p: &TrigPoly, k: Option<(i128, i128)>| -> C64 {
        k.and_then(|(a, b)| Some((i64::try_from(-a).ok()?, i64::try_from(-b).ok()?)))
            .and_then(|key| p.get(&key).copied())
            .unwrap_or(C64::new(0.0, 0.0))
    };
    let mut raw = vec![C64::new(0.0, 0.0); horizon + 1];
    let mut centered = vec![C64::new(0.0, 0.0); horizon + 1];
    for (m, c) in psi {
        for (n, k) in orbit_from(*m, horizon).into_iter().enumerate() {
            let term = *c * coeff(phi, k);
            raw[n] += term;
            if *m != (0, 0) {
                centered[n] += term;
            }
        }
    }
    let n0 = centered.iter().rposition(|c| c.norm() != 0.0).map(|i| i + 1).unwrap_or(0);
    raw.truncate(n_max + 1);
    centered.truncate(n_max + 1);
    let describe = |p: &TrigPoly| {
        p.iter().map(|(k, c)| format!("({},{}):{}{:+}i", k.0, k.1, c.re, c.im)).collect::<Vec<_>>().join(" ")
    };
    let mut trace = CorrelationTrace::new(describe(phi), describe(psi), "lebesgue", EvalPath::Fourier, 1.0);
    trace.mean_phi = phi.get(&(0, 0)).copied().unwrap_or_default();
    trace.mean_psi = psi.get(&(0, 0)).copied().unwrap_or_default();
    trace.raw = raw;
    trace.centered = centered;
    trace.refit();
    Ok(TorusTrace { trace, n0 })
}

/// `cos(2π k·x)` as a trigonometric polynomial.
pub fn cosine_mode(k: (i64, i64)) -> TrigPoly {
    let mut p = TrigPoly::new();
    p.insert(k, C64::new(0.5, 0.0));
    *p.entry((-k.0, -k.1)).or_default() += C64::new(0.5, 0.0);
    p
}
