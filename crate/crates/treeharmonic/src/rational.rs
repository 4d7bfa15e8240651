//! Exact rational arithmetic for m-adic endpoints.
//!
//! Cell endpoints k/m^n must compare exactly (two adjacent cells share an
//! endpoint, and cover computations classify points as inside/outside/on a
//! boundary). All such comparisons go through `Frac` = `Ratio<i128>`; values
//! are rounded to `f64` only at the public API boundary.

use crate::error::{Error, Result};
use num::rational::Ratio;
use num::{One, Signed, Zero};

/// Exact rational with 128-bit numerator/denominator. The tree depth cap
/// (indices below 2^40) keeps every m-adic quantity far inside this range.
pub type Frac = Ratio<i128>;

/// Exact conversion of a finite `f64` (every finite double is p/2^k).
///
/// Doubles are representable down to about 1e-38 before the denominator 2^k
/// overflows i128; below that the value is approximated by a continued-
/// fraction convergent, which cannot change any m-adic cell classification at
/// the supported depths (cells are never smaller than about 1e-12).
pub fn frac_from_f64(x: f64) -> Result<Frac> {
    if !x.is_finite() {
        return Err(Error::domain(format!("cannot convert {x} to a rational")));
    }
    if x == 0.0 {
        return Ok(Frac::zero());
    }
    let bits = x.to_bits();
    let sign: i128 = if bits >> 63 == 1 { -1 } else { 1 };
    let exponent = ((bits >> 52) & 0x7ff) as i64;
    let mantissa = bits & ((1u64 << 52) - 1);
    let (mant, exp) = if exponent == 0 {
        (mantissa as i128, -1074i64) // subnormal
    } else {
        ((mantissa | (1 << 52)) as i128, exponent - 1075)
    };
    if exp >= 0 {
        let scale = 1i128
            .checked_shl(exp as u32)
            .filter(|_| exp < 74)
            .ok_or_else(|| Error::capacity(format!("{x} is too large for exact conversion")))?;
        return Ok(Frac::from_integer(sign * mant * scale));
    }
    // Reduce the mantissa's trailing zeros first; fall back to approximation.
    let tz = mant.trailing_zeros().min((-exp) as u32);
    let (mant, shift) = (mant >> tz, -exp - tz as i64);
    if shift < 127 {
        return Ok(Frac::new(sign * mant, 1i128 << shift));
    }
    Frac::approximate_float(x)
        .ok_or_else(|| Error::domain(format!("cannot approximate {x} as a rational")))
}

/// Smallest-denominator rational close to `x` (for recovering an intended
/// α = p/q from a CLI-entered decimal). Returns None if nothing within `tol`.
pub fn recover_simple_fraction(x: f64, max_den: i128, tol: f64) -> Option<Frac> {
    let mut best: Option<Frac> = None;
    // Stern-Brocot style continued-fraction expansion of x.
    let (mut h0, mut h1, mut k0, mut k1) = (1i128, x.floor() as i128, 0i128, 1i128);
    let mut frac = x - x.floor();
    for _ in 0..64 {
        let cand = Frac::new(h1, k1);
        if (frac_to_f64(&cand) - x).abs() <= tol {
            best = Some(cand);
            break;
        }
        if frac.abs() < 1e-15 {
            break;
        }
        let a = (1.0 / frac).floor();
        frac = 1.0 / frac - a;
        let a = a as i128;
        let (h2, k2) = (a.checked_mul(h1)?.checked_add(h0)?, a.checked_mul(k1)?.checked_add(k0)?);
        if k2 > max_den {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
    }
    best
}

/// Parse "a/b", an integer, or a decimal into an exact rational.
pub fn parse_frac(s: &str) -> Result<Frac> {
    let s = s.trim();
    if let Some((num, den)) = s.split_once('/') {
        let n: i128 = num
            .trim()
            .parse()
            .map_err(|_| Error::input(format!("bad rational numerator in {s:?}")))?;
        let d: i128 = den
            .trim()
            .parse()
            .map_err(|_| Error::input(format!("bad rational denominator in {s:?}")))?;
        if d == 0 {
            return Err(Error::input(format!("zero denominator in {s:?}")));
        }
        return Ok(Frac::new(n, d));
    }
    if let Ok(n) = s.parse::<i128>() {
        return Ok(Frac::from_integer(n));
    }
    let x: f64 = s
        .parse()
        .map_err(|_| Error::input(format!("cannot parse {s:?} as a rational or decimal")))?;
    // Prefer the humanly-intended small fraction (0.1 -> 1/10) over the exact
    // binary expansion of the double.
    if let Some(f) = recover_simple_fraction(x, 1_000_000, 1e-12) {
        return Ok(f);
    }
    frac_from_f64(x)
}

/// Round to f64. Exact when numerator and denominator are exactly
/// representable (always the case for m-adic endpoints under the depth cap).
pub fn frac_to_f64(f: &Frac) -> f64 {
    *f.numer() as f64 / *f.denom() as f64
}

/// Floor of a nonnegative rational as u64.
pub fn frac_floor_u64(f: &Frac) -> Result<u64> {
    if f.is_negative() {
        return Err(Error::domain("floor of negative rational requested as u64".to_string()));
    }
    u64::try_from(f.floor().to_integer()).map_err(|_| Error::capacity("rational floor exceeds u64"))
}

/// Ceiling of a nonnegative rational as u64.
pub fn frac_ceil_u64(f: &Frac) -> Result<u64> {
    if f.is_negative() && !f.is_zero() {
        return Err(Error::domain("ceil of negative rational requested as u64".to_string()));
    }
    u64::try_from(f.ceil().to_integer()).map_err(|_| Error::capacity("rational ceil exceeds u64"))
}

pub fn frac_one() -> Frac {
    Frac::one()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_f64_round_trip() {
        for &x in &[0.0, 1.0, 0.5, -0.25, 1.0 / 3.0, 0.1, 11.0 / 27.0, 1e-20] {
            let f = frac_from_f64(x).unwrap();
            assert_eq!(frac_to_f64(&f), x, "round trip failed for {x}");
        }
    }

    #[test]
    fn exact_conversion_is_exact_not_nearby() {
        // 0.1 as a double is NOT 1/10; the exact conversion must reflect that.
        let f = frac_from_f64(0.1).unwrap();
        assert_ne!(f, Frac::new(1, 10));
        assert_eq!(frac_to_f64(&f), 0.1);
    }

    #[test]
    fn recover_intended_decimal() {
        assert_eq!(recover_simple_fraction(0.1, 1000, 1e-12), Some(Frac::new(1, 10)));
        assert_eq!(recover_simple_fraction(0.5, 1000, 1e-12), Some(Frac::new(1, 2)));
        assert_eq!(recover_simple_fraction(2.0 / 3.0, 1000, 1e-9), Some(Frac::new(2, 3)));
    }

    #[test]
    fn parse_forms() {
        assert_eq!(parse_frac("1/3").unwrap(), Frac::new(1, 3));
        assert_eq!(parse_frac(" 2 / 9 ").unwrap(), Frac::new(2, 9));
        assert_eq!(parse_frac("1").unwrap(), Frac::from_integer(1));
        assert_eq!(parse_frac("0.2").unwrap(), Frac::new(1, 5));
        assert!(parse_frac("1/0").is_err());
        assert!(parse_frac("abc").is_err());
    }
}
