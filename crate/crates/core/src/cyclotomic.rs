//! Exact arithmetic in Z[w] for w a primitive p^n-th root of unity, with a
//! zero test based on the progression structure of vanishing sums, and the
//! p^n-cycle decomposition of vanishing character sums.
//!
//! Representations are not canonical; equality always goes through `is_zero`
//! of a difference.

use num_rational::BigRational;

use crate::error::{Error, Result};
use crate::measures::DiscreteSetQp;
use crate::padic::{check_prime, RootOfUnity};

/// Element of Z[w_{p^n}] as a coefficient vector of length p^n; index j
/// carries the coefficient of w^j.
#[derive(Debug, Clone)]
pub struct CycInt {
    p: u64,
    level: u32,
    coeffs: Vec<i64>,
}

fn pow_usize(p: u64, n: u32) -> usize {
    (p as usize).pow(n)
}

impl CycInt {
    pub fn new(p: u64, level: u32, coeffs: Vec<i64>) -> Result<Self> {
        check_prime(p)?;
        let want = pow_usize(p, level);
        if coeffs.len() != want {
            return Err(Error::DimensionMismatch(coeffs.len(), want));
        }
        Ok(CycInt { p, level, coeffs })
    }

    pub fn zero(p: u64, level: u32) -> Self {
        CycInt {
            p,
            level,
            coeffs: vec![0; pow_usize(p, level)],
        }
    }

    pub fn from_integer(p: u64, value: i64) -> Self {
        CycInt {
            p,
            level: 0,
            coeffs: vec![value],
        }
    }

    /// w^exp at the given level (exp taken mod p^level).
    pub fn root(p: u64, level: u32, exp: i64) -> Self {
        let m = pow_usize(p, level);
        let mut coeffs = vec![0; m];
        coeffs[(exp.rem_euclid(m as i64)) as usize] = 1;
        CycInt { p, level, coeffs }
    }

    pub fn from_root_of_unity(r: &RootOfUnity) -> Self {
        Self::root(r.prime(), r.level(), r.exponent() as i64)
    }

    pub fn prime(&self) -> u64 {
        self.p
    }
    pub fn level(&self) -> u32 {
        self.level
    }
    pub fn coeffs(&self) -> &[i64] {
        &self.coeffs
    }

    /// Embeds into Z[w_{p^n2}] via exponent j -> j * p^(n2 - n).
    pub fn raise_level(&self, n2: u32) -> Result<Self> {
        if n2 < self.level {
            return Err(Error::LevelTooLow {
                found: self.level,
                target: n2,
            });
        }
        if n2 == self.level {
            return Ok(self.clone());
        }
        let stride = pow_usize(self.p, n2 - self.level);
        let mut coeffs = vec![0; pow_usize(self.p, n2)];
        for (j, &c) in self.coeffs.iter().enumerate() {
            coeffs[j * stride] = c;
        }
        Ok(CycInt {
            p: self.p,
            level: n2,
            coeffs,
        })
    }

    fn common_level(&self, other: &Self) -> Result<(Self, Self)> {
        if self.p != other.p {
            return Err(Error::PrimeMismatch(self.p, other.p));
        }
        let n = self.level.max(other.level);
        Ok((self.raise_level(n)?, other.raise_level(n)?))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let (mut a, b) = self.common_level(other)?;
        for (x, y) in a.coeffs.iter_mut().zip(&b.coeffs) {
            *x += y;
        }
        Ok(a)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let (mut a, b) = self.common_level(other)?;
        for (x, y) in a.coeffs.iter_mut().zip(&b.coeffs) {
            *x -= y;
        }
        Ok(a)
    }

    pub fn neg(&self) -> Self {
        let mut z = self.clone();
        for c in &mut z.coeffs {
            *c = -*c;
        }
        z
    }

    pub fn scale(&self, k: i64) -> Self {
        let mut z = self.clone();
        for c in &mut z.coeffs {
            *c *= k;
        }
        z
    }

    /// Ring product; exponents convolve mod p^n.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        let (a, b) = self.common_level(other)?;
        let m = a.coeffs.len();
        let mut coeffs = vec![0i64; m];
        for (i, &x) in a.coeffs.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in b.coeffs.iter().enumerate() {
                if y != 0 {
                    coeffs[(i + j) % m] += x * y;
                }
            }
        }
        Ok(CycInt {
            p: a.p,
            level: a.level,
            coeffs,
        })
    }

    /// Complex conjugation w -> w^{-1}.
    pub fn conj(&self) -> Self {
        let m = self.coeffs.len();
        let mut coeffs = vec![0i64; m];
        for (j, &c) in self.coeffs.iter().enumerate() {
            coeffs[(m - j) % m] = c;
        }
        CycInt {
            p: self.p,
            level: self.level,
            coeffs,
        }
    }

    /// |z|^2 = z * conj(z); a non-negative real algebraic number.
    pub fn norm_sq(&self) -> Self {
        self.mul(&self.conj()).expect("same prime and level")
    }

    /// True iff the represented algebraic number is zero. A sum of p^n-th
    /// roots vanishes exactly when the coefficients are constant on each
    /// class {i, i + p^{n-1}, ..., i + (p-1) p^{n-1}}.
    pub fn is_zero(&self) -> bool {
        is_zero_slice(self.p, self.level, &self.coeffs)
    }

    /// Numerical value; test oracles only.
    pub fn to_complex(&self) -> (f64, f64) {
        let m = self.coeffs.len() as f64;
        let (mut re, mut im) = (0.0, 0.0);
        for (j, &c) in self.coeffs.iter().enumerate() {
            if c != 0 {
                let angle = 2.0 * std::f64::consts::PI * j as f64 / m;
                re += c as f64 * angle.cos();
                im += c as f64 * angle.sin();
            }
        }
        (re, im)
    }
}

/// The vanishing criterion on a raw coefficient slice of length p^level.
/// Shared with the hot scan paths, which avoid constructing `CycInt`s.
pub fn is_zero_slice(p: u64, level: u32, coeffs: &[i64]) -> bool {
    if level == 0 {
        return coeffs[0] == 0;
    }
    let block = pow_usize(p, level - 1);
    for i in 0..block {
        let first = coeffs[i];
        for j in 1..p as usize {
            if coeffs[i + j * block] != first {
                return false;
            }
        }
    }
    true
}

/// Exact cyclotomic rational: `num / den` with a positive integer denominator.
/// Houses averaged character sums such as values of the Fourier transform of
/// a probability measure.
#[derive(Debug, Clone)]
pub struct CycRat {
    pub num: CycInt,
    pub den: i64,
}

impl CycRat {
    pub fn new(num: CycInt, den: i64) -> Result<Self> {
        if den <= 0 {
            return Err(Error::Precondition("denominator must be positive".into()));
        }
        Ok(CycRat { num, den })
    }

    pub fn from_integer(p: u64, v: i64) -> Self {
        CycRat {
            num: CycInt::from_integer(p, v),
            den: 1,
        }
    }

    pub fn from_rational(p: u64, r: &BigRational) -> Result<Self> {
        let num: i64 = r
            .numer()
            .try_into()
            .map_err(|_| Error::Parse(format!("numerator of {r} too large")))?;
        let den: i64 = r
            .denom()
            .try_into()
            .map_err(|_| Error::Parse(format!("denominator of {r} too large")))?;
        CycRat::new(CycInt::from_integer(p, num), den)
    }

    pub fn zero(p: u64) -> Self {
        CycRat {
            num: CycInt::zero(p, 0),
            den: 1,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let g = num_integer::gcd(self.den, other.den);
        let den = self.den / g * other.den;
        let num = self
            .num
            .scale(other.den / g)
            .add(&other.num.scale(self.den / g))?;
        CycRat::new(num, den)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let mut o = other.clone();
        o.num = o.num.neg();
        self.add(&o)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        CycRat::new(self.num.mul(&other.num)?, self.den * other.den)
    }

    pub fn conj(&self) -> Self {
        CycRat {
            num: self.num.conj(),
            den: self.den,
        }
    }

    pub fn norm_sq(&self) -> Self {
        CycRat {
            num: self.num.norm_sq(),
            den: self.den * self.den,
        }
    }

    /// Exact equality to the integer v: is_zero(num - den*v).
    pub fn equals_integer(&self, v: i64) -> bool {
        self.num
            .sub(&CycInt::from_integer(self.num.prime(), self.den * v))
            .map(|d| d.is_zero())
            .unwrap_or(false)
    }

    pub fn to_complex(&self) -> (f64, f64) {
        let (re, im) = self.num.to_complex();
        (re / self.den as f64, im / self.den as f64)
    }
}

/// One class {r, r + p^{n-1}, ..., r + (p-1) p^{n-1}} of exponents mod p^n.
pub type PCycle = Vec<u64>;

/// Decomposes a multiset of exponents mod p^n into p-cycles iff the
/// associated sum of roots of unity vanishes. `counts[b]` is the
/// multiplicity of exponent b. Cycles are extracted in increasing order of
/// the residue class r, so output is deterministic.
pub fn vanishing_decompose(counts: &[u64], p: u64, n: u32) -> Result<Option<Vec<PCycle>>> {
    check_prime(p)?;
    let m = pow_usize(p, n);
    if counts.len() != m {
        return Err(Error::DimensionMismatch(counts.len(), m));
    }
    if n == 0 {
        // w = 1: the sum vanishes only for the empty multiset.
        return Ok(if counts[0] == 0 { Some(vec![]) } else { None });
    }
    let block = pow_usize(p, n - 1);
    let mut cycles = Vec::new();
    for r in 0..block {
        let c = counts[r];
        for j in 1..p as usize {
            if counts[r + j * block] != c {
                return Ok(None);
            }
        }
        for _ in 0..c {
            cycles.push((0..p as usize).map(|j| (r + j * block) as u64).collect());
        }
    }
    Ok(Some(cycles))
}

/// True iff C = {s + j p^n + z_j : 0 <= j < p} with |z_j|_p <= p^{-n-1},
/// i.e. C is a p^n-cycle in Q_p.
pub fn is_pn_cycle(set: &DiscreteSetQp, n: i64) -> Result<bool> {
    let p = set.prime();
    let elements = set.elements();
    if elements.len() != p as usize {
        return Ok(false);
    }
    let base = &elements[0];
    let mut seen = vec![false; p as usize];
    for c in elements {
        let d = c.sub(base)?;
        // need |d|_p <= p^{-n}, i.e. d * p^{-n} is a p-adic integer
        let scaled = d.scale_by_p_pow(-n);
        match scaled.valuation() {
            None => {
                // c == base, digit 0
                if seen[0] {
                    return Ok(false);
                }
                seen[0] = true;
            }
            Some(v) if v < 0 => return Ok(false),
            Some(_) => {
                // digit of d at p^n: (d p^{-n}) mod p
                let frac = scaled.scale_by_p_pow(-1).frac_part();
                let digit = (frac * BigRational::from_integer(p.into()))
                    .to_integer()
                    .try_into()
                    .unwrap_or(usize::MAX);
                if digit >= p as usize || seen[digit] {
                    return Ok(false);
                }
                seen[digit] = true;
            }
        }
    }
    Ok(seen.iter().all(|&s| s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::PAdicScaled;

    fn z(p: u64, n: u32, c: &[i64]) -> CycInt {
        CycInt::new(p, n, c.to_vec()).unwrap()
    }

    fn assert_close(z: &CycInt, want: (f64, f64)) {
        let (re, im) = z.to_complex();
        assert!(
            (re - want.0).abs() < 1e-12 && (im - want.1).abs() < 1e-12,
            "got ({re}, {im}), want {want:?}"
        );
    }

    #[test]
    fn arith_examples() {
        let a = z(3, 1, &[1, 0, 0]);
        let b = z(3, 1, &[0, 1, 1]);
        assert_eq!(a.add(&b).unwrap().coeffs(), &[1, 1, 1]);

        let w = CycInt::root(3, 1, 1);
        let w2 = CycInt::root(3, 1, 2);
        assert_eq!(w.mul(&w2).unwrap().coeffs(), &[1, 0, 0]);

        // (1 + w)(1 + w^3) at p=2, n=2, w = i: exponents wrap mod 4
        let a = z(2, 2, &[1, 1, 0, 0]);
        let b = z(2, 2, &[1, 0, 0, 1]);
        let prod = a.mul(&b).unwrap();
        assert_eq!(prod.coeffs(), &[2, 1, 0, 1]);
        let i = (0.0, 1.0);
        // 1 + i + i^3 + i^4 = 2 + i - i = ... evaluate directly
        let want = (2.0 + i.0 * 0.0, 1.0 - 1.0); // 2 + i + (-i) = 2
        assert_close(&prod, (want.0, want.1));
    }

    #[test]
    fn is_zero_examples() {
        assert!(z(3, 1, &[1, 1, 1]).is_zero());
        assert!(z(2, 2, &[1, 0, 1, 0]).is_zero());
        assert!(!z(3, 1, &[2, 1, 1]).is_zero());
    }

    #[test]
    fn conj_and_norm() {
        assert_eq!(z(3, 1, &[0, 1, 0]).conj().coeffs(), &[0, 0, 1]);
        assert!(z(3, 1, &[1, 1, 1]).norm_sq().is_zero());
        // |1 + w|^2 = 1 at p=3
        let n = z(3, 1, &[1, 1, 0]).norm_sq();
        let diff = n.sub(&CycInt::from_integer(3, 1)).unwrap();
        assert!(diff.is_zero());
        assert_close(&n.raise_level(1).unwrap(), (1.0, 0.0));
    }

    #[test]
    fn raise_level_preserves_value_and_zero() {
        let a = z(3, 1, &[1, 1, 0]);
        let r = a.raise_level(2).unwrap();
        assert_eq!(r.coeffs()[0], 1);
        assert_eq!(r.coeffs()[3], 1);
        let (x0, y0) = a.to_complex();
        let (x1, y1) = r.to_complex();
        assert!((x0 - x1).abs() < 1e-12 && (y0 - y1).abs() < 1e-12);

        assert!(z(3, 1, &[1, 1, 1]).raise_level(2).unwrap().is_zero());
        let five = CycInt::from_integer(3, 5).raise_level(1).unwrap();
        assert_eq!(five.coeffs(), &[5, 0, 0]);
        assert!(z(3, 1, &[1, 1, 0]).raise_level(0).is_err());
    }

    #[test]
    fn vanishing_decompose_examples() {
        // {0,1,2} at p=3, n=1: one cycle
        let mut counts = vec![0u64; 3];
        counts[0] = 1;
        counts[1] = 1;
        counts[2] = 1;
        let cycles = vanishing_decompose(&counts, 3, 1).unwrap().unwrap();
        assert_eq!(cycles, vec![vec![0, 1, 2]]);

        // {0,3,6} at p=3, n=2: one cycle with r=0
        let mut counts = vec![0u64; 9];
        counts[0] = 1;
        counts[3] = 1;
        counts[6] = 1;
        let cycles = vanishing_decompose(&counts, 3, 2).unwrap().unwrap();
        assert_eq!(cycles, vec![vec![0, 3, 6]]);

        // {0,1} at p=2, n=3: no decomposition
        let mut counts = vec![0u64; 8];
        counts[0] = 1;
        counts[1] = 1;
        assert!(vanishing_decompose(&counts, 2, 3).unwrap().is_none());
    }

    #[test]
    fn pn_cycle_examples() {
        let set = |els: &[(i64, u32)]| {
            DiscreteSetQp::new(
                3,
                els.iter()
                    .map(|&(a, m)| PAdicScaled::new(3, a, m).unwrap())
                    .collect(),
            )
            .unwrap()
        };
        assert!(is_pn_cycle(&set(&[(0, 0), (1, 0), (2, 0)]), 0).unwrap());
        assert!(is_pn_cycle(&set(&[(0, 0), (3, 0), (6, 0)]), 1).unwrap());
        assert!(!is_pn_cycle(&set(&[(0, 0), (3, 0), (7, 0)]), 1).unwrap());
        // perturbations within B(0, p^{-n-1}) are allowed
        assert!(is_pn_cycle(&set(&[(0, 0), (3 + 9, 0), (6, 0)]), 1).unwrap());
    }
}
