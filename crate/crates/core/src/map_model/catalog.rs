//! Reference maps used throughout the tests and the command line examples.

use super::{ExprNode, MarkovAffineMap, MonotoneFullBranchMap, SmoothFullBranchMap};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::{rat, Rational, Scalar};

fn lit<T: Scalar>(s: &str) -> T {
    T::parse_literal(s).expect("catalog literal")
}

fn affine<T: Scalar>(partition: &[&str], slopes: &[&str], offsets: &[&str]) -> MarkovAffineMap<T> {
    MarkovAffineMap::new(
        partition.iter().map(|s| lit(s)).collect(),
        slopes.iter().map(|s| lit(s)).collect(),
        offsets.iter().map(|s| lit(s)).collect(),
    )
    .expect("catalog map is valid")
}

/// Four-interval orientation-preserving map with a Jordan block at -1/3 in `B_1`.
pub fn jordan_map<T: Scalar>() -> MarkovAffineMap<T> {
    affine(&["0", "1/4", "1/2", "3/4", "1"], &["3", "3", "2", "3"], &["1/4", "-3/4", "-1", "-9/4"])
}

/// `x -> 2x mod 1`.
pub fn doubling_map<T: Scalar>() -> MarkovAffineMap<T> {
    affine(&["0", "1/2", "1"], &["2", "2"], &["0", "-1"])
}

/// `x -> N x mod 1`.
pub fn full_branch_affine<T: Scalar>(n: usize) -> MarkovAffineMap<T> {
    let nn = T::from_usize_lossless(n);
    let partition = (0..=n).map(|i| T::from_usize_lossless(i) / nn.clone()).collect();
    let slopes = vec![nn.clone(); n];
    let offsets = (0..n).map(|i| -T::from_usize_lossless(i)).collect();
    MarkovAffineMap::new(partition, slopes, offsets).expect("valid")
}

/// Doubling map with the second branch reversed: `2x` then `2 - 2x`.
pub fn tent_map<T: Scalar>() -> MarkovAffineMap<T> {
    affine(&["0", "1/2", "1"], &["2", "-2"], &["0", "2"])
}

/// Non-full-branch Markov map on quarters with slopes 2, 3, 3, 2; `B_1` has the
/// eigenvalue `(3 + sqrt 33)/12` inside `(1/2, 1)`.
pub fn scan_map<T: Scalar>() -> MarkovAffineMap<T> {
    affine(&["0", "1/4", "1/2", "3/4", "1"], &["2", "3", "3", "2"], &["0", "-3/4", "-5/4", "-1"])
}

/// `4x - x^2 mod 1` on its three full branches.
pub fn quadratic_map() -> SmoothFullBranchMap {
    let p2 = 2.0 - 3f64.sqrt();
    let p3 = 2.0 - 2f64.sqrt();
    SmoothFullBranchMap::new(
        vec![0.0, p2, p3, 1.0],
        ["4*x - x^2", "4*x - x^2 - 1", "4*x - x^2 - 2"].iter().map(|s| ExprNode::parse(s).unwrap()).collect(),
    )
    .expect("valid")
}

/// `x(1 + 2^α x^α)` on `[0, 1/2)`, `2x - 1` on `[1/2, 1]`.
pub fn lsv_map(alpha: f64) -> MonotoneFullBranchMap {
    let left = format!("x*(1 + 2^{alpha:?}*x^{alpha:?})");
    MonotoneFullBranchMap::new(
        vec![0.0, 0.5, 1.0],
        vec![ExprNode::parse(&left).unwrap(), ExprNode::parse("2*x - 1").unwrap()],
    )
    .expect("valid")
}

/// Random primitive Markov map with `2..=max_n` intervals on a rational grid and
/// slopes in `[2, 6]`, reproducible from `seed`.
pub fn random_markov_map(seed: u64, max_n: usize) -> MarkovAffineMap<Rational> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let n = rng.random_range(2..=max_n.max(2));
        let denom: i64 = rng.random_range(2 * n as i64..=24);
        let mut cuts: Vec<i64> = (1..denom).collect();
        cuts.shuffle(&mut rng);
        let mut cuts: Vec<i64> = cuts[..n - 1].to_vec();
        cuts.sort_unstable();
        let mut pts = vec![0];
        pts.extend(cuts);
        pts.push(denom);
        let mut slopes = Vec::with_capacity(n);
        let mut offsets = Vec::with_capacity(n);
        let mut ok = true;
        for j in 0..n {
            let width = pts[j + 1] - pts[j];
            let choices: Vec<(usize, usize)> = (0..n)
                .flat_map(|a| (a + 1..=n).map(move |b| (a, b)))
                .filter(|&(a, b)| {
                    let len = pts[b] - pts[a];
                    len >= 2 * width && len <= 6 * width
                })
                .collect();
            if choices.is_empty() {
                ok = false;
                break;
            }
            let (a, b) = choices[rng.random_range(0..choices.len())];
            let slope = rat(pts[b] - pts[a], width);
            let offset = rat(pts[a], denom) - slope.clone() * rat(pts[j], denom);
            slopes.push(slope);
            offsets.push(offset);
        }
        if !ok {
            continue;
        }
        let partition = pts.iter().map(|&p| rat(p, denom)).collect();
        if let Ok(map) = MarkovAffineMap::new(partition, slopes, offsets) {
            if is_primitive(map.adjacency()) {
                return map;
            }
        }
    }
}

/// Some power of the 0/1 matrix is strictly positive.
fn is_primitive(a: &[Vec<bool>]) -> bool {
    let n = a.len();
    let mut p: Vec<Vec<bool>> = a.to_vec();
    // Wielandt bound on the exponent
    for _ in 0..(n - 1) * (n - 1) + 1 {
        if p.iter().all(|row| row.iter().all(|&x| x)) {
            return true;
        }
        p = (0..n).map(|i| (0..n).map(|j| (0..n).any(|k| p[i][k] && a[k][j])).collect()).collect();
    }
    p.iter().all(|row| row.iter().all(|&x| x))
}

/// JSON text of the catalog maps, as accepted by [`super::parse_map_spec`].
pub mod json {
    pub const JORDAN: &str = r#"{"type":"affine_markov","partition":[0,0.25,0.5,0.75,1],"branches":[{"slope":3,"offset":0.25},{"slope":3,"offset":-0.75},{"slope":2,"offset":-1},{"slope":3,"offset":-2.25}]}"#;
    pub const DOUBLING: &str =
        r#"{"type":"affine_markov","partition":[0,0.5,1],"branches":[{"slope":2,"offset":0},{"slope":2,"offset":-1}]}"#;
    pub const QUADRATIC: &str = r#"{"type":"smooth_full_branch","partition":[0,0.2679491924,0.5857864376,1],"branches":[{"expr":"4*x - x^2"},{"expr":"4*x - x^2 - 1"},{"expr":"4*x - x^2 - 2"}]}"#;
    pub const LSV: &str = r#"{"type":"monotone_full_branch","partition":[0,0.5,1],"branches":[{"expr":"x*(1 + 2^0.5*x^0.5)"},{"expr":"2*x - 1"}]}"#;
    pub const SCAN: &str = r#"{"type":"affine_markov","partition":[0,0.25,0.5,0.75,1],"branches":[{"slope":2,"offset":0},{"slope":3,"offset":-0.75},{"slope":3,"offset":-1.25},{"slope":2,"offset":-1}]}"#;
}
