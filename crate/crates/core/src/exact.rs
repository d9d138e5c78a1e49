//! Exactly rounded arithmetic means.
//!
//! The mean is computed from the exact rational sum, then rounded once to the
//! nearest `f64`. The result does not depend on summation order, and the mean
//! of `k` copies of `x` is exactly `x`.

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{ToPrimitive, Zero};

/// Splits a finite `f64` into `(negative, mantissa, exponent)` with
/// `|x| = mantissa * 2^exponent`.
fn decompose(x: f64) -> (bool, u64, i64) {
    let bits = x.to_bits();
    let negative = bits >> 63 == 1;
    let biased = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    if biased == 0 {
        (negative, frac, -1074)
    } else {
        (negative, frac | (1u64 << 52), biased - 1075)
    }
}

fn ldexp(mut x: f64, mut exp: i64) -> f64 {
    while exp > 1000 {
        x *= 2f64.powi(1000);
        exp -= 1000;
    }
    while exp < -1000 {
        x *= 2f64.powi(-1000);
        exp += 1000;
    }
    x * 2f64.powi(exp as i32)
}

/// `num / den * 2^exp2`, rounded to nearest with ties to even.
fn ratio_to_f64(num: &BigUint, den: &BigUint, exp2: i64) -> f64 {
    if num.is_zero() {
        return 0.0;
    }
    let shift = 55 - (num.bits() as i64 - den.bits() as i64);
    let (n, d) = if shift >= 0 {
        (num << shift as u64, den.clone())
    } else {
        (num.clone(), den << (-shift) as u64)
    };
    let q = &n / &d;
    let r = &n - &q * &d;
    let extra = q.bits() as i64 - 54;
    let low_mask = (BigUint::from(1u8) << extra as u64) - 1u8;
    let sticky = !r.is_zero() || !(&q & &low_mask).is_zero();
    let q = (q >> extra as u64).to_u64().expect("54-bit quotient");
    let guard = q & 1;
    let mut mant = q >> 1;
    if guard == 1 && (sticky || mant & 1 == 1) {
        mant += 1;
    }
    ldexp(mant as f64, extra - shift + exp2 + 1)
}

/// Exactly rounded mean. Returns `None` for an empty slice and NaN when any
/// value is non-finite.
pub fn exact_mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Some(f64::NAN);
    }
    let parts: Vec<_> = values.iter().map(|&v| decompose(v)).filter(|p| p.1 != 0).collect();
    let Some(e_min) = parts.iter().map(|p| p.2).min() else {
        return Some(0.0);
    };
    let mut sum = BigInt::zero();
    for &(negative, mant, exp) in &parts {
        let term = BigInt::from(mant) << (exp - e_min) as u64;
        if negative {
            sum -= term;
        } else {
            sum += term;
        }
    }
    let (sign, magnitude) = sum.into_parts();
    let value = ratio_to_f64(&magnitude, &BigUint::from(values.len()), e_min);
    Some(if sign == Sign::Minus { -value } else { value })
}
