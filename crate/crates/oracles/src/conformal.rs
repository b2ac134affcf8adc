//! Calibration rank in exact rational arithmetic.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};

fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

/// `⌈(m/2 + 1)(1 - α)⌉` with `α` taken at its exact binary value, or `None`
/// when `α < 2/(m+2)`.
pub fn rank(m: usize, alpha: f64) -> Option<usize> {
    let a = exact(alpha);
    let min = BigRational::new(BigInt::from(2), BigInt::from(m + 2));
    if a < min {
        return None;
    }
    let h = BigRational::from_integer(BigInt::from(m / 2 + 1));
    let k = (h * (BigRational::one() - a)).ceil();
    k.to_integer().to_usize()
}

/// `k`-th smallest (1-based) by full sort.
pub fn order_statistic(xs: &[f64], k: usize) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v[k - 1]
}
