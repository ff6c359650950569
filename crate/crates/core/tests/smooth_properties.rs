use std::f64::consts::PI;
use std::sync::OnceLock;

use approx::assert_abs_diff_eq;
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use reslab::linalg::eigen_decomposition;
use reslab::map_model::{catalog, BranchMap, ExprNode, SmoothFullBranchMap};
use reslab::quadrature;
use reslab::smooth_spectral::*;

const EPS: f64 = 0.05;

fn quadratic_ops() -> &'static SmoothOperators {
    static OPS: OnceLock<SmoothOperators> = OnceLock::new();
    OPS.get_or_init(|| SmoothOperators::refined(&catalog::quadratic_map()).unwrap())
}

fn perturbed() -> SmoothFullBranchMap {
    let f = format!("2*x + {EPS}*sin({}*x)", 2.0 * PI);
    let exprs = vec![ExprNode::parse(&f).unwrap(), ExprNode::parse(&format!("{f} - 1")).unwrap()];
    SmoothFullBranchMap::new(vec![0.0, 0.5, 1.0], exprs).unwrap()
}

fn poly(c: &[f64]) -> impl Fn(f64) -> f64 + '_ {
    move |x| c.iter().rev().fold(0.0, |acc, a| acc * x + a)
}

#[test]
fn perturbed_map_tau_matches_quadrature() {
    let p = gap_params(&perturbed()).unwrap();
    assert!(!p.region_hypotheses);
    let lambda = 2.0 - 2.0 * PI * EPS;
    let d = |x: f64| 4.0 * PI * PI * EPS * (2.0 * PI * x).sin() / (2.0 + 2.0 * PI * EPS * (2.0 * PI * x).cos()).powi(2);
    let l1 = quadrature::integrate(|x| d(x).abs(), 0.0, 0.5, 20, 32) + quadrature::integrate(|x| d(x).abs(), 0.5, 1.0, 20, 32);
    assert_abs_diff_eq!(l1, 2.0 * (1.0 / lambda - 1.0 / (2.0 + 2.0 * PI * EPS)), epsilon = 1e-13);
    assert_abs_diff_eq!(p.lambda, lambda, epsilon = 1e-9);
    assert_abs_diff_eq!(p.df_l1, l1, epsilon = 1e-9);
    assert_abs_diff_eq!(p.tau, 1.0 / lambda + l1, epsilon = 1e-9);
}

#[test]
fn l_plus_leading_pair() {
    let ops = quadratic_ops();
    let (vals, vecs) = eigen_decomposition(&ops.matrix(OperatorTag::Plus)).unwrap();
    let k = (0..vals.len()).max_by(|&a, &b| vals[a].norm().total_cmp(&vals[b].norm())).unwrap();
    assert_abs_diff_eq!(vals[k].re, 0.5, epsilon = 1e-6);
    assert!(vals[k].im.abs() < 1e-12);
    let v = &vecs[k];
    let s = v.iter().map(|z| z.re).sum::<f64>().signum();
    assert!(v.iter().all(|z| z.re * s > 0.0 && z.im.abs() < 1e-10));
}

#[test]
fn xi_deviation_bounded_by_series_estimate() {
    let map = catalog::quadratic_map();
    let ops = SmoothOperators::refined(&map).unwrap();
    let p = gap_params_with(&map, &ops).unwrap();
    let mut xi = XiFunction::new(ops, &p).unwrap();
    let mut rng = 0x2545F4914F6CDD1Du64;
    let mut next = || {
        rng ^= rng << 13;
        rng ^= rng >> 7;
        rng ^= rng << 17;
        (rng >> 11) as f64 / (1u64 << 53) as f64
    };
    let zs: Vec<C64> = (0..200).map(|_| C64::from_polar(0.51 + 1.5 * next(), 2.0 * PI * next())).collect();
    for v in xi.scan(&zs, 1e-10).unwrap() {
        let bound = p.delta / (v.z.norm() - p.mu_star);
        assert!((v.xi - 1.0).norm() <= bound + 1e-10, "{v:?} {bound}");
        if v.z.norm() >= p.mu_star + 2.0 * p.delta {
            assert!((v.xi - 1.0).norm() <= 0.5 + 1e-12);
        }
    }
}

#[test]
fn ulam_doubling_map() {
    let map = catalog::doubling_map::<f64>();
    let s = discretize_spectrum(&map, OperatorTag::L(1), Basis::Ulam, 500).unwrap();
    let e = &s.report.eigenvalues;
    assert_abs_diff_eq!(e[0].re, 1.0, epsilon = 1e-3);
    assert_abs_diff_eq!(e[1].modulus(), 0.5, epsilon = 1e-3);
    // on dyadic cells the Ulam matrix of x -> 2x is nilpotent on mean-zero vectors
    let s = discretize_spectrum(&map, OperatorTag::L(1), Basis::Ulam, 512).unwrap();
    let e = &s.report.eigenvalues;
    assert_abs_diff_eq!(e[0].re, 1.0, epsilon = 1e-12);
    assert!(e[1].modulus() < 0.05);
}

#[test]
fn collocated_l1_avoids_regions() {
    let map = catalog::quadratic_map();
    let regions = exclusion_regions(&map).unwrap();
    let s = discretize_spectrum(&map, OperatorTag::L(1), Basis::Chebyshev { order: 16 }, 192).unwrap();
    let conv: Vec<(C64, usize)> = s.converged().collect();
    let ones: Vec<_> = conv.iter().filter(|(z, _)| (z - 1.0).norm() < 1e-8).collect();
    assert_eq!(ones.len(), 1);
    assert_eq!(ones[0].1, 1);
    for (z, _) in conv.iter().filter(|(z, _)| (z - 1.0).norm() >= 1e-8) {
        assert!(z.norm() <= 0.75 + 1e-6, "{z}");
        assert!(!regions.membership(*z).any(), "{z} in {:?}", regions.membership(*z).names());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn conservation_and_conformality(c in prop::collection::vec(-1.0f64..1.0, 1..6)) {
        let ops = quadratic_ops();
        let g = ops.grid().sample(poly(&c));
        let int = ops.grid().integrate(&g);
        let l1 = ops.apply(OperatorTag::L(1), &g);
        prop_assert!((ops.grid().integrate(&l1) - int).abs() < 1e-11);
        let lp = ops.apply(OperatorTag::Plus, &g);
        prop_assert!((ops.grid().integrate(&lp) - 0.5 * int).abs() < 1e-9);
    }

    #[test]
    fn norm_estimates(c in prop::collection::vec(-1.0f64..1.0, 1..6), shift in -0.5f64..0.5) {
        let ops = quadratic_ops();
        let g = ops.grid().sample(|x| poly(&c)(x) + (7.0 * (x + shift)).sin());
        let norm = ops.grid().l1_norm(&g);
        let l2 = ops.apply(OperatorTag::L(2), &g);
        prop_assert!(ops.grid().l1_norm(&l2) <= 0.5 * norm * (1.0 + 1e-12));
        let phi = ops.phi(&g);
        prop_assert!(phi.iter().all(|v| v.abs() <= norm * (1.0 + 1e-12)));
    }

    #[test]
    fn l_plus_is_positive(c in prop::collection::vec(-1.0f64..1.0, 1..5)) {
        let ops = quadratic_ops();
        let g = ops.grid().sample(|x| poly(&c)(x).powi(2));
        prop_assert!(ops.apply(OperatorTag::Plus, &g).iter().all(|v| *v >= -1e-12));
    }

    #[test]
    fn derivative_commutator(k in 0i32..3, x in 0.05f64..0.95, a in -2.0f64..2.0, b in 0.5f64..4.0) {
        for map in [catalog::quadratic_map(), perturbed()] {
            let h = |y: f64| (b * y).sin() + a * y * y;
            let dh = |y: f64| b * (b * y).cos() + 2.0 * a * y;
            let step = 1e-5;
            let fd = (transfer_at(&map, k, h, x + step).unwrap() - transfer_at(&map, k, h, x - step).unwrap()) / (2.0 * step);
            let hd = |y: f64| {
                let j = map.branch_of(y);
                h(y) * map.distortion(j, y)
            };
            let rhs = transfer_at(&map, k + 1, dh, x).unwrap() + k as f64 * transfer_at(&map, k, hd, x).unwrap();
            prop_assert!((fd - rhs).abs() <= 1e-5 * rhs.abs().max(1.0), "{fd} {rhs}");
        }
    }
}
