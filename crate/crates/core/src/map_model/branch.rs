use crate::error::{Error, Result};

/// Floating-point view of a piecewise map with monotone branches on a partition of [0, 1].
pub trait BranchMap: Send + Sync {
    /// Partition points `p_1 = 0 < ... < p_{N+1} = 1`.
    fn knots(&self) -> &[f64];

    fn n_branches(&self) -> usize {
        self.knots().len() - 1
    }

    fn eval(&self, j: usize, x: f64) -> f64;

    fn deriv(&self, j: usize, x: f64) -> f64;

    /// Distortion `(1/f')'` on branch `j`.
    fn distortion(&self, j: usize, x: f64) -> f64;

    /// Inverse of branch `j` at a point of the closure of its image.
    fn inverse(&self, j: usize, y: f64) -> Result<f64>;

    /// Image of branch `j` as an interval `(lo, hi)`.
    fn image(&self, j: usize) -> (f64, f64) {
        let k = self.knots();
        let (a, b) = (self.eval(j, k[j]), self.eval(j, k[j + 1]));
        (a.min(b), a.max(b))
    }

    /// Branch containing `x`, half-open convention `[p_i, p_{i+1})`.
    fn branch_of(&self, x: f64) -> usize {
        let k = self.knots();
        let n = k.len() - 1;
        match k[1..n].iter().position(|&p| x < p) {
            Some(i) => i,
            None => n - 1,
        }
    }

    fn apply(&self, x: f64) -> f64 {
        self.eval(self.branch_of(x), x)
    }

    fn is_full_branch(&self) -> bool {
        (0..self.n_branches()).all(|j| {
            let (lo, hi) = self.image(j);
            lo.abs() <= 1e-10 && (hi - 1.0).abs() <= 1e-10
        })
    }

    /// All preimages `(branch, y)` of `x`.
    fn preimages(&self, x: f64) -> Vec<(usize, f64)> {
        let mut out = Vec::with_capacity(self.n_branches());
        for j in 0..self.n_branches() {
            let (lo, hi) = self.image(j);
            if x >= lo - 1e-12 && x <= hi + 1e-12 {
                if let Ok(y) = self.inverse(j, x.clamp(lo, hi)) {
                    out.push((j, y));
                }
            }
        }
        out
    }
}

/// Safeguarded Newton for a monotone `f` on `[a, b]` solving `f(x) = y`.
pub(crate) fn monotone_solve(
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    y: f64,
    branch: usize,
) -> Result<f64> {
    let (fa, fb) = (f(a), f(b));
    let increasing = fb >= fa;
    let (lo_val, hi_val) = if increasing { (fa, fb) } else { (fb, fa) };
    let slack = 1e-10 * (1.0 + y.abs());
    if y < lo_val - slack || y > hi_val + slack || !y.is_finite() {
        return Err(Error::OutsideImage { branch, y });
    }
    if y <= lo_val {
        return Ok(if increasing { a } else { b });
    }
    if y >= hi_val {
        return Ok(if increasing { b } else { a });
    }
    let (mut lo, mut hi) = (a, b);
    // secant start
    let mut x = a + (b - a) * (y - fa) / (fb - fa);
    if !(x > a && x < b) {
        x = 0.5 * (a + b);
    }
    for _ in 0..200 {
        let r = f(x) - y;
        if r == 0.0 {
            return Ok(x);
        }
        if (r < 0.0) == increasing {
            lo = x;
        } else {
            hi = x;
        }
        let d = df(x);
        let mut next = x - r / d;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(1e-300) || hi - lo <= 2.0 * f64::EPSILON * hi.abs() {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}
