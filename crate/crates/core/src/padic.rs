//! Exact p-adic rationals, balls and the additive character.
//!
//! Every value is a rational of the form `a / p^m`; all arithmetic is exact,
//! so zero tests need no tolerance.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

/// Deterministic primality check by trial division; fine for runtime primes.
pub fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    if p % 2 == 0 {
        return p == 2;
    }
    let mut d = 3u64;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

pub fn check_prime(p: u64) -> Result<()> {
    if is_prime(p) {
        Ok(())
    } else {
        Err(Error::NotPrime(p))
    }
}

pub(crate) fn big_pow(p: u64, e: u32) -> BigInt {
    BigInt::from(p).pow(e)
}

/// An exact element of Q_p: value `num / p^scale`, optionally known only
/// modulo `p^prec`.
#[derive(Debug, Clone)]
pub struct PAdicScaled {
    p: u64,
    num: BigInt,
    scale: u32,
    prec: Option<i64>,
}

impl PAdicScaled {
    pub fn new(p: u64, num: impl Into<BigInt>, scale: u32) -> Result<Self> {
        check_prime(p)?;
        let mut x = PAdicScaled {
            p,
            num: num.into(),
            scale,
            prec: None,
        };
        x.reduce();
        Ok(x)
    }

    pub fn with_precision(mut self, prec: i64) -> Result<Self> {
        if prec <= -(self.scale as i64) {
            return Err(Error::Precondition(format!(
                "precision {prec} carries no digit at scale {}",
                self.scale
            )));
        }
        self.prec = Some(prec);
        Ok(self)
    }

    pub fn integer(p: u64, n: impl Into<BigInt>) -> Result<Self> {
        Self::new(p, n, 0)
    }

    pub fn zero(p: u64) -> Self {
        PAdicScaled {
            p,
            num: BigInt::zero(),
            scale: 0,
            prec: None,
        }
    }

    /// Exact rational with a p-power denominator. Errors when the denominator
    /// has a factor coprime to p.
    pub fn from_rational(p: u64, r: &BigRational) -> Result<Self> {
        check_prime(p)?;
        let mut den = r.denom().clone();
        let big_p = BigInt::from(p);
        let mut scale = 0u32;
        while (&den % &big_p).is_zero() {
            den /= &big_p;
            scale += 1;
        }
        if den.magnitude() != &1u32.into() {
            return Err(Error::NotRepresentable(r.to_string(), p));
        }
        // den is +-1 at this point.
        let num = r.numer() * den;
        Self::new(p, num, scale)
    }

    fn reduce(&mut self) {
        if self.num.is_zero() {
            self.scale = 0;
            return;
        }
        let big_p = BigInt::from(self.p);
        while self.scale > 0 && (&self.num % &big_p).is_zero() {
            self.num /= &big_p;
            self.scale -= 1;
        }
    }

    pub fn prime(&self) -> u64 {
        self.p
    }

    pub fn precision(&self) -> Option<i64> {
        self.prec
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// v_p(x); `None` encodes +infinity (x = 0).
    pub fn valuation(&self) -> Option<i64> {
        if self.num.is_zero() {
            return None;
        }
        let big_p = BigInt::from(self.p);
        let mut v: i64 = -(self.scale as i64);
        let mut n = self.num.clone();
        while (&n % &big_p).is_zero() {
            n /= &big_p;
            v += 1;
        }
        Some(v)
    }

    /// |x|_p as the exponent e with |x|_p = p^e; `None` for x = 0 (|0|_p = 0).
    pub fn abs_exp(&self) -> Option<i64> {
        self.valuation().map(|v| -v)
    }

    pub fn to_rational(&self) -> BigRational {
        BigRational::new(self.num.clone(), big_pow(self.p, self.scale))
    }

    /// The fractional part {x}: the unique rational in [0,1) with p-power
    /// denominator such that x - {x} is a p-adic integer.
    pub fn frac_part(&self) -> BigRational {
        let modulus = big_pow(self.p, self.scale);
        let mut r = &self.num % &modulus;
        if r.is_negative() {
            r += &modulus;
        }
        BigRational::new(r, modulus)
    }

    fn prec_after_add(&self, other: &Self) -> Option<i64> {
        match (self.prec, other.prec) {
            (None, None) => None,
            (Some(a), None) => Some(a),
            (None, Some(b)) => Some(b),
            (Some(a), Some(b)) => Some(a.min(b)),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_prime(other)?;
        let m = self.scale.max(other.scale);
        let num = &self.num * big_pow(self.p, m - self.scale)
            + &other.num * big_pow(self.p, m - other.scale);
        let mut x = PAdicScaled {
            p: self.p,
            num,
            scale: m,
            prec: self.prec_after_add(other),
        };
        x.reduce();
        Ok(x)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        PAdicScaled {
            p: self.p,
            num: -&self.num,
            scale: self.scale,
            prec: self.prec,
        }
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_same_prime(other)?;
        let prec = match (self.prec, other.prec) {
            (None, None) => None,
            _ => {
                let va = self.valuation().unwrap_or(i64::MAX / 4);
                let vb = other.valuation().unwrap_or(i64::MAX / 4);
                let pa = self.prec.map(|n| n + vb);
                let pb = other.prec.map(|n| n + va);
                match (pa, pb) {
                    (Some(a), Some(b)) => Some(a.min(b)),
                    (a, b) => a.or(b),
                }
            }
        };
        let mut x = PAdicScaled {
            p: self.p,
            num: &self.num * &other.num,
            scale: self.scale + other.scale,
            prec,
        };
        x.reduce();
        Ok(x)
    }

    pub fn scale_by_p_pow(&self, k: i64) -> Self {
        let mut x = if k >= 0 {
            PAdicScaled {
                p: self.p,
                num: &self.num * big_pow(self.p, k as u32),
                scale: self.scale,
                prec: self.prec.map(|n| n + k),
            }
        } else {
            PAdicScaled {
                p: self.p,
                num: self.num.clone(),
                scale: self.scale + (-k) as u32,
                prec: self.prec.map(|n| n + k),
            }
        };
        x.reduce();
        x
    }

    fn check_same_prime(&self, other: &Self) -> Result<()> {
        if self.p != other.p {
            return Err(Error::PrimeMismatch(self.p, other.p));
        }
        Ok(())
    }

    /// Approximate real value; test oracles only.
    pub fn to_f64(&self) -> f64 {
        let r = self.to_rational();
        let num = r.numer().to_string().parse::<f64>().unwrap_or(f64::NAN);
        let den = r.denom().to_string().parse::<f64>().unwrap_or(f64::NAN);
        num / den
    }
}

impl PartialEq for PAdicScaled {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.scale == other.scale && self.num == other.num
    }
}
impl Eq for PAdicScaled {}

impl std::hash::Hash for PAdicScaled {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.p.hash(state);
        self.scale.hash(state);
        self.num.hash(state);
    }
}

impl PartialOrd for PAdicScaled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Order by rational value; used only to keep set output deterministic.
impl Ord for PAdicScaled {
    fn cmp(&self, other: &Self) -> Ordering {
        self.to_rational().cmp(&other.to_rational())
    }
}

impl fmt::Display for PAdicScaled {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.scale == 0 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}^{}", self.num, self.p, self.scale)
        }
    }
}

/// Parses "a", "a/p^m" or "a/q" with q a power of p.
pub fn parse_padic(p: u64, s: &str) -> Result<PAdicScaled> {
    let s = s.trim();
    let (num_str, den_str) = match s.split_once('/') {
        None => (s, None),
        Some((n, d)) => (n, Some(d)),
    };
    let num = BigInt::from_str(num_str)
        .map_err(|e| Error::Parse(format!("bad numerator {num_str:?}: {e}")))?;
    let scale = match den_str {
        None => 0,
        Some(d) => {
            if let Some((base, exp)) = d.split_once('^') {
                let base: u64 = base
                    .trim()
                    .parse()
                    .map_err(|e| Error::Parse(format!("bad base {base:?}: {e}")))?;
                if base != p {
                    return Err(Error::Parse(format!("denominator base {base} is not {p}")));
                }
                exp.trim()
                    .parse::<u32>()
                    .map_err(|e| Error::Parse(format!("bad exponent {exp:?}: {e}")))?
            } else {
                let mut q = BigInt::from_str(d.trim())
                    .map_err(|e| Error::Parse(format!("bad denominator {d:?}: {e}")))?;
                let big_p = BigInt::from(p);
                let mut m = 0u32;
                while q > BigInt::one() && (&q % &big_p).is_zero() {
                    q /= &big_p;
                    m += 1;
                }
                if q != BigInt::one() {
                    return Err(Error::Parse(format!(
                        "denominator {d} is not a power of {p}"
                    )));
                }
                m
            }
        }
    };
    PAdicScaled::new(p, num, scale)
}

/// The closed ball B(center, p^radius_exp).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ball {
    pub center: PAdicScaled,
    pub radius_exp: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BallRelation {
    Equal,
    FirstInsideSecond,
    SecondInsideFirst,
    Disjoint,
}

impl Ball {
    pub fn new(center: PAdicScaled, radius_exp: i64) -> Self {
        Ball { center, radius_exp }
    }

    pub fn prime(&self) -> u64 {
        self.center.prime()
    }

    pub fn contains(&self, x: &PAdicScaled) -> Result<bool> {
        let d = x.sub(&self.center)?;
        Ok(match d.abs_exp() {
            None => true,
            Some(e) => e <= self.radius_exp,
        })
    }

    /// Ultrametric dichotomy: equal, nested or disjoint; partial overlap
    /// cannot occur.
    pub fn relation(&self, other: &Ball) -> Result<BallRelation> {
        if self.prime() != other.prime() {
            return Err(Error::PrimeMismatch(self.prime(), other.prime()));
        }
        let d = self.center.sub(&other.center)?;
        let dist = d.abs_exp();
        let within = |r: i64| match dist {
            None => true,
            Some(e) => e <= r,
        };
        Ok(match self.radius_exp.cmp(&other.radius_exp) {
            Ordering::Equal => {
                if within(self.radius_exp) {
                    BallRelation::Equal
                } else {
                    BallRelation::Disjoint
                }
            }
            Ordering::Less => {
                if within(other.radius_exp) {
                    BallRelation::FirstInsideSecond
                } else {
                    BallRelation::Disjoint
                }
            }
            Ordering::Greater => {
                if within(self.radius_exp) {
                    BallRelation::SecondInsideFirst
                } else {
                    BallRelation::Disjoint
                }
            }
        })
    }

    /// Haar measure p^radius_exp as a rational.
    pub fn haar_measure(&self) -> BigRational {
        let e = self.radius_exp;
        if e >= 0 {
            BigRational::from_integer(big_pow(self.prime(), e as u32))
        } else {
            BigRational::new(BigInt::one(), big_pow(self.prime(), (-e) as u32))
        }
    }
}

/// e^{2 pi i k / p^n}, canonical: k reduced mod p^n and the level minimal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RootOfUnity {
    p: u64,
    level: u32,
    exp: u64,
}

impl RootOfUnity {
    pub fn new(p: u64, level: u32, exp: i64) -> Result<Self> {
        check_prime(p)?;
        let modulus = (p as i128).pow(level);
        let mut k = (exp as i128).rem_euclid(modulus) as u64;
        let mut n = level;
        while n > 0 && k % p == 0 {
            k /= p;
            n -= 1;
        }
        if k == 0 {
            n = 0;
        }
        Ok(RootOfUnity { p, level: n, exp: k })
    }

    pub fn one(p: u64) -> Self {
        RootOfUnity { p, level: 0, exp: 0 }
    }

    pub fn prime(&self) -> u64 {
        self.p
    }
    pub fn level(&self) -> u32 {
        self.level
    }
    pub fn exponent(&self) -> u64 {
        self.exp
    }
    pub fn is_one(&self) -> bool {
        self.level == 0 && self.exp == 0
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.p != other.p {
            return Err(Error::PrimeMismatch(self.p, other.p));
        }
        let n = self.level.max(other.level);
        let a = self.exp as i64 * (self.p as i64).pow(n - self.level);
        let b = other.exp as i64 * (other.p as i64).pow(n - other.level);
        RootOfUnity::new(self.p, n, a + b)
    }

    pub fn conj(&self) -> Self {
        RootOfUnity::new(self.p, self.level, -(self.exp as i64)).unwrap()
    }

    pub fn to_complex(&self) -> (f64, f64) {
        let angle =
            2.0 * std::f64::consts::PI * self.exp as f64 / (self.p as f64).powi(self.level as i32);
        (angle.cos(), angle.sin())
    }
}

impl fmt::Display for RootOfUnity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_one() {
            write!(f, "1")
        } else {
            write!(f, "e(2pi i {}/{}^{})", self.exp, self.p, self.level)
        }
    }
}

/// chi(xi * x) = e^{2 pi i {xi x}} as an exact root of unity.
pub fn character(xi: &PAdicScaled, x: &PAdicScaled) -> Result<RootOfUnity> {
    let t = xi.mul(x)?;
    root_of_unity_from_frac(t.prime(), &t.frac_part())
}

/// Converts a rational in [0,1) with p-power denominator to a root of unity.
pub fn root_of_unity_from_frac(p: u64, frac: &BigRational) -> Result<RootOfUnity> {
    if frac.is_zero() {
        return Ok(RootOfUnity::one(p));
    }
    let big_p = BigInt::from(p);
    let mut den = frac.denom().clone();
    let mut level = 0u32;
    while den > BigInt::one() {
        if !(&den % &big_p).is_zero() {
            return Err(Error::NotRepresentable(frac.to_string(), p));
        }
        den /= &big_p;
        level += 1;
    }
    let k: i64 = frac
        .numer()
        .try_into()
        .map_err(|_| Error::NotRepresentable(frac.to_string(), p))?;
    RootOfUnity::new(p, level, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(p: u64, num: i64, scale: u32) -> PAdicScaled {
        PAdicScaled::new(p, num, scale).unwrap()
    }

    #[test]
    fn valuation_examples() {
        assert_eq!(x(3, 9, 0).valuation(), Some(2));
        assert_eq!(x(3, 0, 0).valuation(), None);
        assert_eq!(x(3, 5, 3).valuation(), Some(-3)); // 5/27
    }

    #[test]
    fn composite_p_rejected() {
        assert_eq!(
            PAdicScaled::new(6, 1, 0).unwrap_err(),
            Error::NotPrime(6)
        );
        assert!(PAdicScaled::new(2, 1, 0).is_ok());
    }

    #[test]
    fn frac_part_examples() {
        assert_eq!(x(3, 1, 1).frac_part(), BigRational::new(1.into(), 3.into()));
        assert_eq!(x(3, 7, 0).frac_part(), BigRational::zero());
        // -1/9 = 8/9 - 1
        assert_eq!(
            x(3, -1, 2).frac_part(),
            BigRational::new(8.into(), 9.into())
        );
    }

    #[test]
    fn frac_part_digit_oracle() {
        // Digit-expansion oracle: {x} accumulates the negative-power digits
        // of the Hensel expansion.
        for (num, scale) in [(-1i64, 2u32), (5, 3), (-7, 1), (22, 4)] {
            let p = 3u64;
            let v = x(p, num, scale);
            let frac = v.frac_part();
            // digits of num mod p^scale, least significant first
            let modulus = (p as i64).pow(scale);
            let mut r = num.rem_euclid(modulus);
            let mut acc = BigRational::zero();
            for i in 1..=scale {
                let d = r % p as i64;
                r /= p as i64;
                // digit i (least significant first) sits at p^{-(scale + 1 - i)}
                acc += BigRational::new(d.into(), BigInt::from(p).pow(scale + 1 - i));
            }
            assert_eq!(frac, acc);
            // x - {x} has non-negative valuation
            let diff = v.to_rational() - &frac;
            let back = PAdicScaled::from_rational(p, &diff).unwrap();
            assert!(back.valuation().map_or(true, |v| v >= 0));
        }
    }

    #[test]
    fn character_examples() {
        let one = |p| x(p, 1, 0);
        let c = character(&one(3), &x(3, 1, 1)).unwrap();
        assert_eq!((c.level(), c.exponent()), (1, 1));
        let c = character(&one(3), &x(3, 5, 0)).unwrap();
        assert!(c.is_one());
        // xi = 1/9, x = 2 -> e^{4 pi i / 9} = e^{2 pi i * 2 / 9}
        let c = character(&x(3, 1, 2), &x(3, 2, 0)).unwrap();
        assert_eq!((c.level(), c.exponent()), (2, 2));
        let (re, im) = c.to_complex();
        let angle = 4.0 * std::f64::consts::PI / 9.0;
        assert!((re - angle.cos()).abs() < 1e-12);
        assert!((im - angle.sin()).abs() < 1e-12);
    }

    #[test]
    fn character_invariant_under_unit_translation() {
        // character(xi, x+u) = character(xi, x) when |xi u|_p <= 1
        let xi = x(3, 2, 2);
        let v = x(3, 5, 1);
        let u = x(3, 9, 0); // |xi*u|_p = 1
        let shifted = v.add(&u).unwrap();
        assert_eq!(
            character(&xi, &v).unwrap(),
            character(&xi, &shifted).unwrap()
        );
    }

    #[test]
    fn ball_relation_examples() {
        let b = |c: i64, s: u32, r: i64| Ball::new(x(3, c, s), r);
        assert_eq!(
            b(0, 0, 0).relation(&b(1, 0, 0)).unwrap(),
            BallRelation::Equal
        );
        assert_eq!(
            b(0, 0, -1).relation(&b(0, 0, 0)).unwrap(),
            BallRelation::FirstInsideSecond
        );
        assert_eq!(
            b(0, 0, -1).relation(&b(1, 0, -1)).unwrap(),
            BallRelation::Disjoint
        );
    }

    #[test]
    fn parse_roundtrip() {
        let v = x(3, -5, 2);
        assert_eq!(parse_padic(3, &v.to_string()).unwrap(), v);
        assert_eq!(parse_padic(3, "7").unwrap(), x(3, 7, 0));
        assert_eq!(parse_padic(3, "2/9").unwrap(), x(3, 2, 2));
        assert!(parse_padic(3, "1/2").is_err());
    }

    #[test]
    fn precision_invariant() {
        assert!(x(3, 1, 2).with_precision(-2).is_err());
        assert!(x(3, 1, 2).with_precision(-1).is_ok());
    }
}
