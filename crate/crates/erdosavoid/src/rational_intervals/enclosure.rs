//! Rigorous rational enclosures of square roots, integer roots and natural
//! logarithms.
//!
//! Every routine returns a closed interval guaranteed to contain the true
//! real value. Series are truncated with an explicit remainder bound and
//! partial sums are rounded outward to dyadic rationals so denominators stay
//! at `2^bits`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::{int, pow2, Interval, Rational};
use crate::error::{Error, Result};

fn dyadic_floor(x: &Rational, bits: u32) -> Rational {
    let scale = BigInt::one() << bits;
    let scaled = (x * BigRational::from_integer(scale.clone())).floor().to_integer();
    BigRational::new(scaled, scale)
}

fn dyadic_ceil(x: &Rational, bits: u32) -> Rational {
    let scale = BigInt::one() << bits;
    let scaled = (x * BigRational::from_integer(scale.clone())).ceil().to_integer();
    BigRational::new(scaled, scale)
}

/// Enclosure of `sqrt(x)` of width `2^-bits`.
pub fn sqrt_enclosure(x: &Rational, bits: u32) -> Result<Interval> {
    if x.is_negative() {
        return Err(Error::InvalidParameter("square root of a negative".into()));
    }
    root_enclosure(x, 2, bits)
}

/// Enclosure of `x^(1/q)` for `x >= 0`, width `2^-bits`.
pub fn root_enclosure(x: &Rational, q: u32, bits: u32) -> Result<Interval> {
    if x.is_negative() || q == 0 {
        return Err(Error::InvalidParameter("root of a negative or q = 0".into()));
    }
    // floor(x * 2^(q bits)) then the integer q-th root
    let scaled = (x * BigRational::from_integer(BigInt::one() << (q as u64 * bits as u64)))
        .floor()
        .to_integer();
    let r = scaled.nth_root(q);
    let scale = BigInt::one() << bits;
    let lo = BigRational::new(r.clone(), scale.clone());
    let hi = BigRational::new(r + 1, scale);
    Interval::new(lo, hi)
}

/// Enclosure of `atanh(z) = sum z^(2i+1)/(2i+1)` for `0 <= z <= 1/2`.
fn atanh_enclosure(z: &Rational, bits: u32) -> Interval {
    debug_assert!(!z.is_negative() && *z <= super::rat(1, 2));
    let work = bits + 16;
    let z2 = z * z;
    let mut lo = Rational::zero();
    let mut hi = Rational::zero();
    // lower and upper dyadic bounds on z^(2k+1)
    let mut p_lo = z.clone();
    let mut p_hi = z.clone();
    let mut k: u64 = 0;
    let target = pow2(-(bits as i64) - 4);
    loop {
        let d = int(2 * k as i64 + 1);
        lo += dyadic_floor(&(&p_lo / &d), work);
        hi += dyadic_ceil(&(&p_hi / &d), work);
        p_lo = dyadic_floor(&(&p_lo * &z2), work + 8);
        p_hi = dyadic_ceil(&(&p_hi * &z2), work + 8);
        k += 1;
        // tail after k terms: <= z^(2k+1) / ((2k+1)(1 - z^2))
        let tail = &p_hi / (int(2 * k as i64 + 1) * (int(1) - &z2));
        if tail < target || p_hi.is_zero() {
            hi += dyadic_ceil(&tail, work);
            break;
        }
    }
    Interval::new(lo, hi).expect("atanh bounds ordered")
}

/// Enclosure of ln 2 via `2 atanh(1/3)`.
pub fn ln2_enclosure(bits: u32) -> Interval {
    atanh_enclosure(&super::rat(1, 3), bits + 2).scale(&int(2))
}

/// Enclosure of `ln x` for rational `x > 0`, width about `2^-bits`.
pub fn ln_enclosure(x: &Rational, bits: u32) -> Result<Interval> {
    if !x.is_positive() {
        return Err(Error::InvalidParameter(
            "logarithm of a non-positive number".into(),
        ));
    }
    if x.is_one() {
        return Ok(Interval::point(Rational::zero()));
    }
    // x = 2^k r with r in [1, 2)
    let mut k = x.numer().bits() as i64 - x.denom().bits() as i64;
    let mut r = x * pow2(-k);
    while r >= int(2) {
        r /= int(2);
        k += 1;
    }
    while r < int(1) {
        r *= int(2);
        k -= 1;
    }
    let extra = 64 - (k.unsigned_abs().max(1)).leading_zeros();
    let z = (&r - int(1)) / (&r + int(1));
    let ln_r = atanh_enclosure(&z, bits + 2).scale(&int(2));
    let ln2 = ln2_enclosure(bits + extra + 2);
    Ok(ln2.scale(&int(k)).add(&ln_r))
}

/// Enclosure of `ln` over a positive interval (ln is increasing).
pub fn ln_interval(x: &Interval, bits: u32) -> Result<Interval> {
    let lo = ln_enclosure(x.lo(), bits)?;
    let hi = ln_enclosure(x.hi(), bits)?;
    Interval::new(lo.lo().clone(), hi.hi().clone())
}

#[cfg(test)]
mod tests {
    use super::super::rat;
    use super::*;

    fn width(iv: &Interval) -> f64 {
        super::super::to_f64(&iv.len())
    }

    #[test]
    fn sqrt_two_contains_float_value() {
        let e = sqrt_enclosure(&int(2), 80).unwrap();
        let f = std::f64::consts::SQRT_2;
        assert!(super::super::to_f64(e.lo()) <= f && f <= super::super::to_f64(e.hi()));
        assert!(width(&e) <= 1e-20);
        // squares bracket 2
        assert!(e.lo() * e.lo() <= int(2) && e.hi() * e.hi() >= int(2));
    }

    #[test]
    fn cube_root_brackets() {
        let e = root_enclosure(&rat(10, 1), 3, 40).unwrap();
        assert!(e.lo().pow(3) <= int(10) && e.hi().pow(3) >= int(10));
    }

    #[test]
    fn ln_of_known_values() {
        for (x, f) in [
            (rat(2, 1), std::f64::consts::LN_2),
            (rat(3, 2), 1.5f64.ln()),
            (rat(1, 7), (1.0f64 / 7.0).ln()),
            (rat(1000, 1), 1000f64.ln()),
            (rat(3, 1), 3f64.ln()),
        ] {
            let e = ln_enclosure(&x, 60).unwrap();
            let (lo, hi) = (super::super::to_f64(e.lo()), super::super::to_f64(e.hi()));
            assert!(lo <= f + 1e-15 && f - 1e-15 <= hi, "{x}: [{lo}, {hi}] vs {f}");
            assert!(width(&e) < 1e-15, "{x}: width {}", width(&e));
        }
        assert_eq!(ln_enclosure(&int(1), 10).unwrap(), Interval::point(int(0)));
        assert!(ln_enclosure(&int(0), 10).is_err());
    }

    #[test]
    fn ln_is_additive_within_enclosures() {
        let a = ln_enclosure(&rat(5, 3), 50).unwrap();
        let b = ln_enclosure(&rat(7, 2), 50).unwrap();
        let ab = ln_enclosure(&(rat(5, 3) * rat(7, 2)), 50).unwrap();
        assert!(a.add(&b).intersects(&ab));
    }
}
