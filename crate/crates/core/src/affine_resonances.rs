//! Exact resonances of piecewise-affine Markov maps.
//!
//! On piecewise polynomials of degree `<= r` the transfer operator
//! `L_k h(x) = Σ_j w(λ_j, k) h(g_j(x))` is a finite matrix `T_{k,r}` whose
//! diagonal blocks are the `N x N` matrices `B_{k+l}`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    perron_right, spectrum_with_multiplicity, EigenEntry, Matrix, SpectrumOptions, SpectrumReport,
};
use crate::map_model::MarkovAffineMap;
use crate::scalar::{binomial, Scalar};

/// Which weight the transfer operator carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    /// `λ^{-k}`: measure of maximal entropy at `k = 0`.
    Mme,
    /// `λ^{-(k-1)} |λ|^{-1}`: the SRB measure at `k = 1`.
    Srb,
}

impl WeightMode {
    pub fn as_str(self) -> &'static str {
        match self {
            WeightMode::Mme => "mme",
            WeightMode::Srb => "srb",
        }
    }

    /// The `k` whose leading eigenvector gives the invariant density.
    pub fn natural_k(self) -> usize {
        match self {
            WeightMode::Mme => 0,
            WeightMode::Srb => 1,
        }
    }

    pub fn weight<T: Scalar>(self, slope: &T, k: usize) -> T {
        let inv = T::one() / slope.clone();
        let w = inv.powi_exact(k as u32);
        match self {
            WeightMode::Mme => w,
            WeightMode::Srb if slope.is_negative() => -w,
            WeightMode::Srb => w,
        }
    }
}

impl std::str::FromStr for WeightMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mme" => Ok(WeightMode::Mme),
            "srb" => Ok(WeightMode::Srb),
            other => Err(Error::InvalidArgument(format!("unknown mode {other:?}, expected mme or srb"))),
        }
    }
}

/// `B_k[i][j] = w(λ_j, k) A[j][i]`.
pub fn build_bk<T: Scalar>(map: &MarkovAffineMap<T>, k: usize, mode: WeightMode) -> Matrix<T> {
    let a = map.adjacency();
    let w: Vec<T> = map.slopes().iter().map(|s| mode.weight(s, k)).collect();
    Matrix::from_fn(map.n(), map.n(), |i, j| if a[j][i] { w[j].clone() } else { T::zero() })
}

/// Matrix of `L_k` on `Poly_r` in the basis `x^l 1_{I_j}`, index `l * N + j`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockOperator<T> {
    pub k: usize,
    pub r: usize,
    pub n: usize,
    pub mode: WeightMode,
    /// Ascending degree order; block `(m, l)` vanishes for `l < m`.
    pub matrix: Matrix<T>,
}

impl<T: Scalar> BlockOperator<T> {
    pub fn dim(&self) -> usize {
        self.n * (self.r + 1)
    }

    /// Block mapping degree `l` coefficients to degree `m` coefficients.
    pub fn block(&self, m: usize, l: usize) -> Matrix<T> {
        let n = self.n;
        Matrix::from_fn(n, n, |i, j| self.matrix[(m * n + i, l * n + j)].clone())
    }

    /// Same operator with degrees listed from `r` down to `0`, which makes it
    /// lower block triangular.
    pub fn descending(&self) -> Matrix<T> {
        let (n, r) = (self.n, self.r);
        let perm = |idx: usize| (r - idx / n) * n + idx % n;
        Matrix::from_fn(self.dim(), self.dim(), |a, b| self.matrix[(perm(a), perm(b))].clone())
    }

    pub fn apply(&self, coeffs: &[T]) -> Vec<T> {
        self.matrix.mul_vec(coeffs)
    }
}

/// Builds `T_{k,r}`, including the sub-diagonal blocks from the binomial expansion
/// of `g_j(x)^l = (x/λ_j + c_j)^l` with `c_j = p_j - q_j/λ_j`.
pub fn build_tkr<T: Scalar>(map: &MarkovAffineMap<T>, k: usize, r: usize, mode: WeightMode) -> BlockOperator<T> {
    let n = map.n();
    let bk = build_bk(map, k, mode);
    let inv: Vec<T> = map.slopes().iter().map(|s| T::one() / s.clone()).collect();
    let c: Vec<T> = (0..n).map(|j| map.partition()[j].clone() - map.q(j) * inv[j].clone()).collect();
    let dim = n * (r + 1);
    let mut m = Matrix::zeros(dim, dim);
    for l in 0..=r {
        for mm in 0..=l {
            let binom: T = binomial(l, mm);
            for j in 0..n {
                let coef = binom.clone()
                    * inv[j].powi_exact(mm as u32)
                    * c[j].powi_exact((l - mm) as u32);
                if coef.is_zero() {
                    continue;
                }
                for i in 0..n {
                    if !bk[(i, j)].is_zero() {
                        m[(mm * n + i, l * n + j)] = bk[(i, j)].clone() * coef.clone();
                    }
                }
            }
        }
    }
    BlockOperator { k, r, n, mode, matrix: m }
}

/// Value at `x` of the piecewise polynomial with coefficients `coeffs[l * N + j]`.
pub fn eval_piecewise<T: Scalar>(map: &MarkovAffineMap<T>, coeffs: &[T], x: &T) -> T {
    let n = map.n();
    let p = map.partition();
    let j = (1..n).take_while(|&i| *x >= p[i]).count();
    let r = coeffs.len() / n;
    let mut acc = T::zero();
    for l in (0..r).rev() {
        acc = acc * x.clone() + coeffs[l * n + j].clone();
    }
    acc
}

/// `L_k h(x)` evaluated directly from the branch inverses.
pub fn transfer_pointwise(map: &MarkovAffineMap<f64>, k: usize, mode: WeightMode, h: impl Fn(f64) -> f64, x: f64) -> f64 {
    let p = map.partition();
    let n = map.n();
    let i = (1..n).take_while(|&i| x >= p[i]).count();
    (0..n)
        .filter(|&j| map.adjacency()[j][i])
        .map(|j| mode.weight(&map.slopes()[j], k) * h(map.g(j, &x)))
        .sum()
}

/// `λ^{-(k+r-1)}` with `λ = min |λ_j|`, the radius below which `σ(T_{k,r})` says nothing.
pub fn essential_bound(map: &MarkovAffineMap<f64>, k: usize, r: usize) -> f64 {
    map.lambda_min().powi(-((k + r) as i32 - 1))
}

/// Eigenvalues of `L_k` restricted to `Poly_r`, assembled from `σ(B_k), ..., σ(B_{k+r})`
/// and checked against `σ(T_{k,r})`. Jordan structure is that of `T_{k,r}`.
pub fn resonance_set(map: &MarkovAffineMap<f64>, mode: WeightMode, k: usize, r: usize) -> Result<SpectrumReport> {
    resonance_set_with(map, mode, k, r, &SpectrumOptions::default())
}

pub fn resonance_set_with(
    map: &MarkovAffineMap<f64>,
    mode: WeightMode,
    k: usize,
    r: usize,
    opts: &SpectrumOptions,
) -> Result<SpectrumReport> {
    let bound = essential_bound(map, k, r);
    let mut merged: Vec<EigenEntry> = Vec::new();
    for l in 0..=r {
        let b = build_bk(map, k + l, mode);
        let rep = spectrum_with_multiplicity(&b, bound, opts)?;
        for e in rep.eigenvalues {
            let z = e.value();
            let tol = opts.cluster_tol * z.norm().max(1e-3 * b.norm_inf().max(1.0)) * 10.0;
            match merged.iter_mut().find(|m| (m.value() - z).norm() <= tol) {
                Some(m) => {
                    let total = (m.alg + e.alg) as f64;
                    m.re = (m.re * m.alg as f64 + e.re * e.alg as f64) / total;
                    m.im = (m.im * m.alg as f64 + e.im * e.alg as f64) / total;
                    m.alg += e.alg;
                    m.jordan = None;
                    m.geo = None;
                }
                None => merged.push(e),
            }
        }
    }

    let t = build_tkr(map, k, r, mode);
    let full = spectrum_with_multiplicity(&t.matrix, bound, opts)?;
    let mismatch = compare_spectra(&merged, &full.eigenvalues, 1e-8);
    if let Some((z, msg)) = mismatch {
        return Err(Error::Numeric(format!("σ(T_{{{k},{r}}}) disagrees with the union of σ(B_l) near {z}: {msg}")));
    }
    for e in &mut merged {
        if let Some(t) = full.find(e.value(), 1e-6 * e.modulus().max(1.0)) {
            if t.alg == e.alg {
                e.jordan = t.jordan.clone();
                e.geo = t.geo;
            }
        }
        e.trusted = e.modulus() > bound;
        if !e.trusted && !opts.analyze_untrusted {
            e.jordan = None;
            e.geo = None;
        }
    }
    merged.sort_by_key(|e| crate::linalg::order_key(e.value()));
    Ok(SpectrumReport {
        eigenvalues: merged,
        essential_bound: bound,
        grouping_tol: opts.cluster_tol,
        dim: t.dim(),
        mode: Some(mode.as_str().into()),
        k: Some(k),
        r: Some(r),
    })
}

/// First trusted eigenvalue whose multiplicity differs between the two lists.
///
/// Eigenvalues inside the essential bound are compared only by total count, since
/// a highly defective zero eigenvalue is resolved to `O(eps^{1/m})` at best.
pub fn compare_spectra(a: &[EigenEntry], b: &[EigenEntry], tol: f64) -> Option<(C64, String)> {
    let total = |s: &[EigenEntry]| s.iter().map(|e| e.alg).sum::<usize>();
    if total(a) != total(b) {
        return Some((C64::new(0.0, 0.0), format!("dimensions {} and {}", total(a), total(b))));
    }
    let near = |s: &[EigenEntry], z: C64| {
        s.iter().filter(|e| (e.value() - z).norm() <= tol * z.norm().max(1.0)).map(|e| e.alg).sum::<usize>()
    };
    for e in a.iter().chain(b).filter(|e| e.trusted) {
        let (na, nb) = (near(a, e.value()), near(b, e.value()));
        if na != nb {
            return Some((e.value(), format!("multiplicity {na} vs {nb}")));
        }
    }
    None
}

/// `ξ_l = Σ_j w(λ_j, k + l)` for full-branch maps, where `B_{k+l}` has rank one.
pub fn full_branch_closed_form<T: Scalar>(map: &MarkovAffineMap<T>, mode: WeightMode, k: usize, r: usize) -> Result<Vec<T>> {
    if !map.is_full_branch_exact() {
        return Err(Error::Unsupported("closed form needs a full-branch map".into()));
    }
    Ok((0..=r)
        .map(|l| map.slopes().iter().fold(T::zero(), |acc, s| acc + mode.weight(s, k + l)))
        .collect())
}

/// `T_{k,r}` has the same characteristic polynomial as `diag(B_k, ..., B_{k+r})`.
/// Over an exact field this is checked with equality.
pub fn charpoly_identity<T: Scalar>(map: &MarkovAffineMap<T>, k: usize, r: usize, mode: WeightMode) -> (Vec<T>, Vec<T>) {
    let t = build_tkr(map, k, r, mode).matrix.charpoly();
    let prod = (0..=r).fold(vec![T::one()], |acc, l| crate::linalg::poly_mul(&acc, &build_bk(map, k + l, mode).charpoly()));
    (t, prod)
}

/// Topological entropy with its two independent spectral-radius estimates.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EntropyReport {
    pub h_top: f64,
    pub rho_power: f64,
    pub rho_eigen: f64,
    /// Collatz-Wielandt bracket from the power iteration.
    pub bounds: (f64, f64),
}

/// `ln ρ(B_0)`; the power iteration must agree with the eigensolver to `1e-10`.
pub fn topological_entropy(map: &MarkovAffineMap<f64>) -> Result<EntropyReport> {
    let b0 = build_bk(map, 0, WeightMode::Mme);
    let pp = perron_right(&b0, 1e-14, 100_000)?;
    let rho_eigen = crate::linalg::eigenvalues(&b0)?.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if (pp.rho - rho_eigen).abs() > 1e-10 * rho_eigen.max(1.0) {
        return Err(Error::NoConvergence(format!(
            "power iteration ρ = {} disagrees with eigensolver ρ = {rho_eigen}",
            pp.rho
        )));
    }
    Ok(EntropyReport { h_top: pp.rho.ln(), rho_power: pp.rho, rho_eigen, bounds: pp.bounds })
}

/// `#f^{-n}(x)` for `x` inside `I_i`, by counting admissible words: `(1ᵀ A^n)_i`.
pub fn preimage_count<T: Scalar>(map: &MarkovAffineMap<T>, i: usize, n: u32) -> u128 {
    let a = map.adjacency();
    let mut v = vec![1u128; map.n()];
    for _ in 0..n {
        v = (0..map.n()).map(|t| (0..map.n()).filter(|&s| a[s][t]).map(|s| v[s]).sum()).collect();
    }
    v[i]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigenvalues, sort_eigenvalues};
    use crate::map_model::catalog;
    use crate::scalar::{rat, Rational};
    use approx::assert_abs_diff_eq;
    use num_traits::{One, Zero};
    use proptest::prelude::*;

    fn r(p: i64, q: i64) -> Rational {
        rat(p, q)
    }

    #[test]
    fn jordan_b1_matches_display() {
        let b = build_bk(&catalog::jordan_map::<Rational>(), 1, WeightMode::Mme);
        let want = [
            [r(0, 1), r(1, 3), r(1, 2), r(1, 3)],
            [r(1, 3), r(1, 3), r(1, 2), r(1, 3)],
            [r(1, 3), r(1, 3), r(0, 1), r(1, 3)],
            [r(1, 3), r(0, 1), r(0, 1), r(0, 1)],
        ];
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(b[(i, j)], want[i][j]);
            }
        }
        let b0 = build_bk(&catalog::jordan_map::<Rational>(), 0, WeightMode::Mme);
        assert_eq!(b0, catalog::jordan_map::<Rational>().adjacency_matrix().transpose());
    }

    #[test]
    fn jordan_printed_vectors_exact() {
        let b = build_bk(&catalog::jordan_map::<Rational>(), 1, WeightMode::Srb);
        let v = |xs: [i64; 4]| xs.iter().map(|&x| r(x, 1)).collect::<Vec<_>>();
        let (a1, a2, a3, a4) = (v([-1, 0, 0, 1]), v([3, 3, -6, 0]), v([0, -1, 0, 1]), v([9, 12, 8, 3]));
        let third = r(1, 3);
        let scaled = |a: &[Rational], s: &Rational| a.iter().map(|x| x * s).collect::<Vec<_>>();
        assert_eq!(b.mul_vec(&a1), scaled(&a1, &-third.clone()));
        let shifted = b.shift(&-third.clone());
        assert_eq!(shifted.mul_vec(&a2), a1);
        assert!(b.mul_vec(&a3).iter().all(Zero::is_zero));
        assert_eq!(b.mul_vec(&a4), a4);
        // exact Jordan structure at -1/3
        let nul = b.nullity_sequence(&-third, 0.0);
        assert_eq!(crate::linalg::jordan_sizes_from_nullities(&nul), vec![2]);
    }

    #[test]
    fn jordan_spectrum_float() {
        let map = catalog::jordan_map::<f64>();
        let b = build_bk(&map, 1, WeightMode::Srb);
        let rep = spectrum_with_multiplicity(&b, 0.0, &SpectrumOptions { analyze_untrusted: true, ..Default::default() }).unwrap();
        let e = rep.find(C64::new(-1.0 / 3.0, 0.0), 1e-6).unwrap();
        assert_eq!((e.alg, e.geo, e.jordan.clone()), (2, Some(1), Some(vec![2])));
        assert_abs_diff_eq!(e.re, -1.0 / 3.0, epsilon = 1e-7);
        assert_eq!(rep.find(C64::new(1.0, 0.0), 1e-10).unwrap().alg, 1);
        assert_eq!(rep.find(C64::new(0.0, 0.0), 1e-6).unwrap().alg, 1);
    }

    #[test]
    fn doubling_blocks() {
        let t = build_tkr(&catalog::doubling_map::<Rational>(), 1, 1, WeightMode::Srb);
        assert_eq!(t.dim(), 4);
        assert!(t.block(0, 0).row(0).iter().all(|x| *x == r(1, 2)));
        assert!(t.block(1, 1).row(1).iter().all(|x| *x == r(1, 4)));
        assert!(t.block(1, 0).row(0).iter().all(Zero::is_zero));
    }

    #[test]
    fn triangular_layouts() {
        let map = catalog::jordan_map::<Rational>();
        let t = build_tkr(&map, 1, 2, WeightMode::Srb);
        assert_eq!(t.dim(), 12);
        for m in 0..=2 {
            assert_eq!(t.block(m, m), build_bk(&map, 1 + m, WeightMode::Srb));
            for l in 0..m {
                assert!(t.block(m, l).row(0).iter().chain(t.block(m, l).row(3)).all(Zero::is_zero));
            }
        }
        let d = t.descending();
        for a in 0..12 {
            for b in 0..12 {
                if b / 4 > a / 4 {
                    assert!(d[(a, b)].is_zero());
                }
            }
        }
        for (blk, l) in [(0, 2), (1, 1), (2, 0)] {
            let diag = Matrix::from_fn(4, 4, |i, j| d[(blk * 4 + i, blk * 4 + j)].clone());
            assert_eq!(diag, build_bk(&map, 1 + l, WeightMode::Srb));
        }
    }

    #[test]
    fn tkr_matches_pointwise_transfer() {
        let map = catalog::jordan_map::<f64>();
        for mode in [WeightMode::Mme, WeightMode::Srb] {
            let t = build_tkr(&map, 1, 3, mode);
            // h(x) = x on I_1, zero elsewhere
            let mut coeffs = vec![0.0; t.dim()];
            coeffs[4] = 1.0;
            let out = t.apply(&coeffs);
            let h = |y: f64| if y < 0.25 { y } else { 0.0 };
            for s in 0..2048 {
                let x = (s as f64 + 0.5) / 2048.0;
                let direct = transfer_pointwise(&map, 1, mode, h, x);
                assert_abs_diff_eq!(eval_piecewise(&map, &out, &x), direct, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn charpoly_identity_exact() {
        for map in [catalog::jordan_map::<Rational>(), catalog::scan_map(), catalog::tent_map(), catalog::doubling_map()] {
            for mode in [WeightMode::Mme, WeightMode::Srb] {
                let (t, prod) = charpoly_identity(&map, 1, 2, mode);
                assert_eq!(t, prod);
            }
        }
    }

    #[test]
    fn doubling_resonances() {
        let map = catalog::doubling_map::<f64>();
        let rep = resonance_set(&map, WeightMode::Srb, 1, 4).unwrap();
        let nonzero: Vec<f64> = rep.eigenvalues.iter().filter(|e| e.modulus() > 1e-9).map(|e| e.re).collect();
        assert_eq!(nonzero.len(), 5);
        for (l, v) in nonzero.iter().enumerate() {
            assert_abs_diff_eq!(*v, 0.5f64.powi(l as i32), epsilon = 1e-12);
        }
        let closed = full_branch_closed_form(&catalog::doubling_map::<Rational>(), WeightMode::Srb, 1, 4).unwrap();
        assert_eq!(closed, (0..5).map(|l| r(1, 1 << l)).collect::<Vec<_>>());
        assert_eq!(rep.total_multiplicity(), 10);
        let mme = resonance_set(&map, WeightMode::Mme, 0, 3).unwrap();
        let vals: Vec<f64> = mme.eigenvalues.iter().filter(|e| e.modulus() > 1e-9).map(|e| e.re).collect();
        for (v, want) in vals.iter().zip([2.0, 1.0, 0.5, 0.25]) {
            assert_abs_diff_eq!(*v, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn jordan_resonances_reported_from_tkr() {
        let map = catalog::jordan_map::<f64>();
        let rep = resonance_set(&map, WeightMode::Srb, 1, 3).unwrap();
        let e = rep.find(C64::new(-1.0 / 3.0, 0.0), 1e-6).unwrap();
        assert_eq!(e.jordan, Some(vec![2]));
        assert!(e.trusted);
        assert_abs_diff_eq!(rep.eigenvalues[0].re, 1.0, epsilon = 1e-12);
        assert_eq!(rep.total_multiplicity(), 16);
        // union of B_l spectra, computed independently
        let mut union: Vec<C64> = (1..=4).flat_map(|k| eigenvalues(&build_bk(&map, k, WeightMode::Srb)).unwrap()).collect();
        sort_eigenvalues(&mut union);
        let mut from_t = eigenvalues(&build_tkr(&map, 1, 3, WeightMode::Srb).matrix).unwrap();
        sort_eigenvalues(&mut from_t);
        for z in union.iter().filter(|z| z.norm() > rep.essential_bound) {
            assert!(from_t.iter().any(|w| (w - z).norm() < 1e-7));
        }
    }

    #[test]
    fn entropy_and_path_counting() {
        let d = topological_entropy(&catalog::doubling_map::<f64>()).unwrap();
        assert_abs_diff_eq!(d.h_top, 2f64.ln(), epsilon = 1e-12);
        let f = topological_entropy(&catalog::full_branch_affine::<f64>(5)).unwrap();
        assert_abs_diff_eq!(f.h_top, 5f64.ln(), epsilon = 1e-12);

        let map = catalog::jordan_map::<f64>();
        let ent = topological_entropy(&map).unwrap();
        // direct enumeration of f^{-n}(x) by walking inverse branches
        let x0 = 0.3141;
        let mut pts = vec![x0];
        for n in 1..=12u32 {
            pts = pts.iter().flat_map(|&y| map_preimages(&map, y)).collect();
            let i = (1..4).take_while(|&i| x0 >= map.partition()[i]).count();
            assert_eq!(pts.len() as u128, preimage_count(&map, i, n));
        }
        let growth = (preimage_count(&map, 1, 12) as f64 / preimage_count(&map, 1, 11) as f64).ln();
        assert_abs_diff_eq!(growth, ent.h_top, epsilon = 1e-3);
    }

    fn map_preimages(map: &MarkovAffineMap<f64>, y: f64) -> Vec<f64> {
        (0..map.n())
            .filter_map(|j| {
                let x = map.g(j, &y);
                (x >= map.partition()[j] && x < map.partition()[j + 1]).then_some(x)
            })
            .collect()
    }

    #[test]
    fn srb_column_stochastic() {
        for map in [catalog::jordan_map::<Rational>(), catalog::scan_map(), catalog::tent_map()] {
            let b = build_bk(&map, 1, WeightMode::Srb);
            // D^{-1} B D with D = diag(1/|I_i|)
            for j in 0..map.n() {
                let s = (0..map.n()).fold(Rational::zero(), |acc, i| acc + map.width(i) * b[(i, j)].clone() / map.width(j));
                assert!(s.is_one(), "column {j}");
            }
        }
    }

    /// Coefficients of the derivative of a piecewise polynomial.
    fn differentiate<T: Scalar>(coeffs: &[T], n: usize) -> Vec<T> {
        let r = coeffs.len() / n - 1;
        (0..r * n).map(|idx| coeffs[idx + n].clone() * T::from_usize_lossless(idx / n + 1)).collect()
    }

    #[test]
    fn commutation_exact() {
        let map = catalog::jordan_map::<Rational>();
        let (k, rr) = (1, 3);
        let coeffs: Vec<Rational> = (0..map.n() * (rr + 1)).map(|i| r(i as i64 % 5 - 2, 1 + i as i64 % 3)).collect();
        let mut lhs = build_tkr(&map, k, rr, WeightMode::Srb).apply(&coeffs);
        let mut rhs = coeffs.clone();
        for l in 1..=rr {
            lhs = differentiate(&lhs, map.n());
            rhs = differentiate(&rhs, map.n());
            assert_eq!(lhs, build_tkr(&map, k + l, rr - l, WeightMode::Srb).apply(&rhs));
        }
    }

    /// Ascending polynomial helpers over the rationals.
    fn poly_integral(p: &[Rational], a: &Rational, b: &Rational) -> Rational {
        p.iter().enumerate().fold(Rational::zero(), |acc, (i, c)| {
            let e = (i + 1) as u32;
            acc + c * (b.powi_exact(e) - a.powi_exact(e)) / Rational::from_usize_lossless(i + 1)
        })
    }

    fn compose_affine(p: &[Rational], s: &Rational, o: &Rational) -> Vec<Rational> {
        // p(s x + o)
        let mut out = vec![Rational::zero()];
        for c in p.iter().rev() {
            out = crate::linalg::poly_mul(&out, &[o.clone(), s.clone()]);
            out[0] += c;
        }
        out
    }

    fn piece(coeffs: &[Rational], n: usize, j: usize) -> Vec<Rational> {
        (0..coeffs.len() / n).map(|l| coeffs[l * n + j].clone()).collect()
    }

    #[test]
    fn duality_exact() {
        for map in [catalog::jordan_map::<Rational>(), catalog::tent_map()] {
            let n = map.n();
            let phi: Vec<Rational> = (0..3 * n).map(|i| r((i * 7 % 5) as i64 - 2, 3)).collect();
            let h: Vec<Rational> = (0..3 * n).map(|i| r((i * 3 % 4) as i64 - 1, 2)).collect();
            let lh = build_tkr(&map, 1, 2, WeightMode::Srb).apply(&h);
            let p = map.partition();
            let lhs = (0..n).fold(Rational::zero(), |acc, i| {
                acc + poly_integral(&crate::linalg::poly_mul(&piece(&phi, n, i), &piece(&lh, n, i)), &p[i], &p[i + 1])
            });
            let mut rhs = Rational::zero();
            for j in 0..n {
                for i in (0..n).filter(|&i| map.adjacency()[j][i]) {
                    let (a, b) = (map.g(j, &p[i]), map.g(j, &p[i + 1]));
                    let (a, b) = if a <= b { (a, b) } else { (b, a) };
                    let comp = compose_affine(&piece(&phi, n, i), &map.slopes()[j], &map.offsets()[j]);
                    rhs += poly_integral(&crate::linalg::poly_mul(&comp, &piece(&h, n, j)), &a, &b);
                }
            }
            assert_eq!(lhs, rhs);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn random_maps_domination_and_multiplicity(seed in any::<u64>()) {
            let exact = catalog::random_markov_map(seed, 5);
            let map = MarkovAffineMap::from_exact(&exact);
            let lmin = map.lambda_min();
            let rho = |k| eigenvalues(&build_bk(&map, k, WeightMode::Srb)).unwrap().iter().map(|z| z.norm()).fold(0.0, f64::max);
            for k in 0..4 {
                prop_assert!(rho(k + 1) <= rho(k) / lmin + 1e-12);
            }
            let b1 = build_bk(&map, 1, WeightMode::Srb);
            let pp = perron_right(&b1, 1e-14, 100_000).unwrap();
            prop_assert!((pp.rho - 1.0).abs() < 1e-10);
            let rep = resonance_set(&map, WeightMode::Srb, 1, 2);
            prop_assert!(rep.is_ok(), "{:?}", rep.err());
            let (t, prod) = charpoly_identity(&exact, 0, 2, WeightMode::Mme);
            prop_assert_eq!(t, prod);
        }
    }
}
