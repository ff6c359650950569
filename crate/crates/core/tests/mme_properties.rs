use std::sync::OnceLock;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use reslab::map_model::{catalog, BranchMap, MonotoneFullBranchMap};
use reslab::monotone_mme::*;
use reslab::quadrature::integrate_adaptive;

fn lsv() -> &'static MonotoneFullBranchMap {
    static MAP: OnceLock<MonotoneFullBranchMap> = OnceLock::new();
    MAP.get_or_init(|| catalog::lsv_map(0.5))
}

fn lsv_op() -> &'static MmeOperator<'static> {
    static OP: OnceLock<MmeOperator<'static>> = OnceLock::new();
    OP.get_or_init(|| MmeOperator::new(lsv()).unwrap())
}

fn l1_at(map: &dyn BranchMap, h: impl Fn(f64) -> f64, x: f64) -> f64 {
    map.preimages(x).into_iter().map(|(j, y)| h(y) / map.deriv(j, y)).sum()
}

#[test]
fn lsv_integral_bookkeeping() {
    let op = lsv_op();
    let map = lsv();
    let h = |x: f64| 1.0 + x * (3.0 * x).cos();
    let lhs = op.grid().integrate(&op.l0_apply_fn(h));
    let rhs = integrate_adaptive(|x| map.deriv(map.branch_of(x), x).abs() * h(x), 0.0, 0.5, 1e-13).0
        + integrate_adaptive(|x| map.deriv(1, x).abs() * h(x), 0.5, 1.0, 1e-13).0;
    assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-8);
}

#[test]
fn lsv_mme_normalized_and_invariant() {
    let op = lsv_op();
    let map = lsv();
    let phis: [&(dyn Fn(f64) -> f64 + Sync); 6] = [
        &|_| 1.0,
        &|x| x,
        &|x| x * x - 0.3,
        &|x| (5.0 * x).sin(),
        &|x| (-2.0 * x).exp(),
        &|x| (x - 0.5).abs(),
    ];
    let m = mme_iterate(op, &phis, 80).unwrap();
    assert!(m.converged, "{:?}", m.history.last());
    assert_abs_diff_eq!(m.values[0], 1.0, epsilon = 1e-9);
    for phi in &phis[1..] {
        let direct = op.measure(phi).unwrap();
        let pulled = op.measure(|x| phi(map.apply(x))).unwrap();
        assert_abs_diff_eq!(direct, pulled, epsilon = 1e-7);
    }
    // the MME of a non-affine map is not Lebesgue
    assert!((m.values[1] - 0.5).abs() > 1e-3);
}

#[test]
fn lsv_pairings_bounded() {
    let op = lsv_op();
    let phis: [&(dyn Fn(f64) -> f64 + Sync); 3] = [&|x| (9.0 * x).cos(), &|x| 1.0 - 2.0 * x, &|x| x.sqrt()];
    let m = mme_iterate(op, &phis, 40).unwrap();
    for row in &m.history {
        for v in row {
            assert!(v.abs() <= 1.0 + 1e-12);
        }
        assert!(row[2] >= -1e-10);
    }
}

#[test]
fn lsv_cylinder_bound() {
    let op = lsv_op();
    for n in [4, 8, 12] {
        for s in cylinder_bounds(op, n, 20, n as u64).unwrap() {
            assert!(s.upper <= s.bound, "{s:?}");
            assert!(s.upper > 0.0);
        }
    }
}

#[test]
fn lsv_mixing_rate() {
    let op = lsv_op();
    let c = mixing_rate_check(op, |x| x * x, |x| x - 0.25, 24).unwrap();
    let rate = c.rate.unwrap();
    assert!(c.passed, "rate {rate}");
    assert!(rate <= 0.55 && rate > 0.3, "rate {rate}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn l0_positive(c in prop::collection::vec(-1.0f64..1.0, 1..5)) {
        let op = lsv_op();
        let h = |x: f64| c.iter().rev().fold(0.0, |a, b| a * x + b).powi(2);
        prop_assert!(op.l0_apply(&op.grid().sample(h)).iter().all(|v| *v >= -1e-12));
    }

    #[test]
    fn derivative_transport(x in 0.02f64..0.98, a in -2.0f64..2.0, b in 0.5f64..5.0) {
        let map = lsv();
        let h = |y: f64| (b * y).sin() + a * y * y;
        let dh = |y: f64| b * (b * y).cos() + 2.0 * a * y;
        let l0 = |x: f64| map.preimages(x).into_iter().map(|(_, y)| h(y)).sum::<f64>();
        let step = 1e-5;
        let fd = (l0(x + step) - l0(x - step)) / (2.0 * step);
        let rhs = l1_at(map, dh, x);
        prop_assert!((fd - rhs).abs() <= 1e-5 * rhs.abs().max(1.0), "{} {}", fd, rhs);
    }
}
