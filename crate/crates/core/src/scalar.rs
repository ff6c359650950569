//! Scalar abstraction shared by the exact and floating-point code paths.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

/// Field elements the affine machinery can run on.
///
/// Floating types compare with a tolerance, exact types with equality.
pub trait Scalar:
    Clone + Debug + PartialOrd + Num + Signed + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// True when arithmetic is exact.
    const EXACT: bool;

    /// Comparison slack: `eps` for floats, zero for exact types.
    fn tol(eps: f64) -> Self {
        if Self::EXACT {
            Self::zero()
        } else {
            Self::from_f64(eps).expect("tolerance representable")
        }
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn from_usize_lossless(n: usize) -> Self {
        Self::from_usize(n).expect("integer representable")
    }

    /// `self^n` by repeated squaring.
    fn powi_exact(&self, n: u32) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base.clone();
            }
            base = base.clone() * base;
            e >>= 1;
        }
        acc
    }

    fn approx_eq(&self, other: &Self, eps: f64) -> bool {
        let d = (self.clone() - other.clone()).abs();
        d <= Self::tol(eps)
    }

    /// Parses a decimal or `p/q` literal.
    fn parse_literal(text: &str) -> Option<Self> {
        let t = text.trim();
        if let Some((p, q)) = t.split_once('/') {
            let p = Self::parse_literal(p)?;
            let q = Self::parse_literal(q)?;
            if q.is_zero() {
                return None;
            }
            return Some(p / q);
        }
        let v: f64 = t.parse().ok()?;
        if Self::EXACT {
            decimal_to_exact::<Self>(t).or_else(|| Self::from_f64(v))
        } else {
            Self::from_f64(v)
        }
    }
}

/// Exact value of a plain decimal literal such as `-0.75` or `1e-3`.
fn decimal_to_exact<T: Scalar>(t: &str) -> Option<T> {
    let (mantissa, exp) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], t[i + 1..].parse::<i32>().ok()?),
        None => (t, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    let all: String = format!("{int_part}{frac_part}");
    if !all.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let ten = T::from_u32(10)?;
    let mut value = T::zero();
    for c in all.chars() {
        value = value * ten.clone() + T::from_u32(c.to_digit(10)?)?;
    }
    let scale = exp - frac_part.len() as i32;
    if scale >= 0 {
        value = value * ten.powi_exact(scale as u32);
    } else {
        value = value / ten.powi_exact((-scale) as u32);
    }
    Some(if neg { -value } else { value })
}

impl Scalar for f64 {
    const EXACT: bool = false;
}

impl Scalar for f32 {
    const EXACT: bool = false;
}

impl Scalar for BigRational {
    const EXACT: bool = true;
}

/// Exact rational scalar.
pub type Rational = BigRational;

/// Shorthand for building a rational `p/q`.
pub fn rat(p: i64, q: i64) -> Rational {
    Rational::new(BigInt::from(p), BigInt::from(q))
}

pub fn binomial<T: Scalar>(n: usize, k: usize) -> T {
    if k > n {
        return T::zero();
    }
    let mut acc = T::one();
    for i in 0..k {
        acc = acc * T::from_usize_lossless(n - i) / T::from_usize_lossless(i + 1);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;

    #[test]
    fn exact_literals() {
        assert_eq!(Rational::parse_literal("-0.75"), Some(rat(-3, 4)));
        assert_eq!(Rational::parse_literal("1/3"), Some(rat(1, 3)));
        assert_eq!(Rational::parse_literal("2.5e-1"), Some(rat(1, 4)));
        assert_eq!(Rational::parse_literal("1/0"), None);
        assert_eq!(f64::parse_literal("1/4"), Some(0.25));
    }

    #[test]
    fn tolerance_by_kind() {
        assert!(Rational::tol(1e-10).is_zero());
        assert_eq!(f64::tol(1e-10), 1e-10);
        assert!(rat(1, 3).approx_eq(&rat(2, 6), 1e-3));
        assert!(!rat(1, 3).approx_eq(&rat(1, 3000), 1e-3));
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial::<Rational>(5, 2), rat(10, 1));
        assert_eq!(binomial::<f64>(6, 3), 20.0);
        assert_eq!(binomial::<f64>(2, 3), 0.0);
    }
}
