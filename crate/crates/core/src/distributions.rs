//! Exact test functions: finite combinations of ball indicators with
//! cyclotomic-rational coefficients, closed under Fourier transform,
//! convolution, multiplication and pairing. Canonical form keeps the balls
//! pairwise disjoint via the ultrametric nested-or-disjoint dichotomy.

use std::collections::VecDeque;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;

use crate::cyclotomic::{CycInt, CycRat};
use crate::error::{Error, Result};
use crate::measures::{BallMeasure, DiscreteSetQp};
use crate::padic::{character, check_prime, Ball, BallRelation, PAdicScaled};

/// Guard on the refinement factor of a single Fourier term.
const REFINE_GUARD: i64 = 1 << 16;

fn p_pow_rational(p: u64, e: i64) -> BigRational {
    let pw = BigInt::from(p).pow(e.unsigned_abs() as u32);
    if e >= 0 {
        BigRational::from_integer(pw)
    } else {
        BigRational::new(BigInt::one(), pw)
    }
}

fn cycrat_scale(w: &CycRat, r: &BigRational, p: u64) -> Result<CycRat> {
    w.mul(&CycRat::from_rational(p, r)?)
}

/// Reduces the center modulo the ball's own radius so that equal balls get
/// identical representations.
fn canonical_ball(b: &Ball) -> Result<Ball> {
    let r = b.radius_exp;
    let reduced = b.center.scale_by_p_pow(r).frac_part();
    let center = PAdicScaled::from_rational(b.prime(), &reduced)?.scale_by_p_pow(-r);
    Ok(Ball::new(center, r))
}

fn split_ball(b: &Ball) -> Result<Vec<Ball>> {
    let p = b.prime();
    (0..p)
        .map(|j| {
            let off = PAdicScaled::integer(p, j)?.scale_by_p_pow(-b.radius_exp);
            Ok(Ball::new(b.center.add(&off)?, b.radius_exp - 1))
        })
        .collect()
}

/// A locally constant, compactly supported function with exact values.
#[derive(Debug, Clone)]
pub struct TestFunction {
    p: u64,
    terms: Vec<(Ball, CycRat)>,
}

impl TestFunction {
    /// Canonicalizes an arbitrary term list: overlapping balls are split
    /// down to a disjoint family, coefficients on equal balls are added,
    /// zero terms are dropped.
    pub fn new(p: u64, terms: Vec<(Ball, CycRat)>) -> Result<Self> {
        check_prime(p)?;
        let mut canon: Vec<(Ball, CycRat)> = Vec::new();
        let mut queue: VecDeque<(Ball, CycRat)> = VecDeque::new();
        for (b, w) in terms {
            if b.prime() != p {
                return Err(Error::PrimeMismatch(p, b.prime()));
            }
            queue.push_back((canonical_ball(&b)?, w));
        }
        'outer: while let Some((b, w)) = queue.pop_front() {
            if w.is_zero() {
                continue;
            }
            for i in 0..canon.len() {
                match canon[i].0.relation(&b)? {
                    BallRelation::Disjoint => {}
                    BallRelation::Equal => {
                        canon[i].1 = canon[i].1.add(&w)?;
                        if canon[i].1.is_zero() {
                            canon.remove(i);
                        }
                        continue 'outer;
                    }
                    BallRelation::SecondInsideFirst => {
                        // b sits inside an existing coarser ball: split that
                        // ball and requeue everything involved
                        let (big, wi) = canon.remove(i);
                        for child in split_ball(&big)? {
                            queue.push_back((canonical_ball(&child)?, wi.clone()));
                        }
                        queue.push_back((b, w));
                        continue 'outer;
                    }
                    BallRelation::FirstInsideSecond => {
                        for child in split_ball(&b)? {
                            queue.push_back((canonical_ball(&child)?, w.clone()));
                        }
                        continue 'outer;
                    }
                }
            }
            canon.push((b, w));
        }
        canon.sort_by(|(a, _), (b, _)| {
            a.radius_exp
                .cmp(&b.radius_exp)
                .then_with(|| a.center.cmp(&b.center))
        });
        Ok(TestFunction { p, terms: canon })
    }

    pub fn indicator(ball: Ball) -> Result<Self> {
        let p = ball.prime();
        TestFunction::new(p, vec![(ball, CycRat::from_integer(p, 1))])
    }

    /// The cutoff Delta_k = 1 on B(0, p^k).
    pub fn delta(p: u64, k: i64) -> Result<Self> {
        Self::indicator(Ball::new(PAdicScaled::zero(p), k))
    }

    /// theta_k = p^k on B(0, p^{-k}), the Fourier transform of Delta_k.
    pub fn theta(p: u64, k: i64) -> Result<Self> {
        let w = CycRat::from_rational(p, &p_pow_rational(p, k))?;
        TestFunction::new(p, vec![(Ball::new(PAdicScaled::zero(p), -k), w)])
    }

    pub fn prime(&self) -> u64 {
        self.p
    }

    pub fn terms(&self) -> &[(Ball, CycRat)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn evaluate(&self, x: &PAdicScaled) -> Result<CycRat> {
        let mut acc = CycRat::zero(self.p);
        for (b, w) in &self.terms {
            if b.contains(x)? {
                acc = acc.add(w)?;
            }
        }
        Ok(acc)
    }

    /// Parameter of constancy: the function is constant on every ball of
    /// radius p^(this value). None for the zero function.
    pub fn constancy_exp(&self) -> Option<i64> {
        self.terms.iter().map(|(b, _)| b.radius_exp).min()
    }

    /// Parameter of compactness: minimal n with support inside B(0, p^n).
    pub fn compactness_exp(&self) -> Option<i64> {
        self.terms
            .iter()
            .map(|(b, _)| b.radius_exp.max(b.center.abs_exp().unwrap_or(i64::MIN)))
            .max()
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.p != other.p {
            return Err(Error::PrimeMismatch(self.p, other.p));
        }
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        TestFunction::new(self.p, terms)
    }

    pub fn neg(&self) -> Result<Self> {
        let minus = CycRat::from_integer(self.p, -1);
        let terms = self
            .terms
            .iter()
            .map(|(b, w)| Ok((b.clone(), w.mul(&minus)?)))
            .collect::<Result<Vec<_>>>()?;
        TestFunction::new(self.p, terms)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg()?)
    }

    /// phi(-x).
    pub fn reflect(&self) -> Result<Self> {
        let terms = self
            .terms
            .iter()
            .map(|(b, w)| Ok((Ball::new(b.center.neg(), b.radius_exp), w.clone())))
            .collect::<Result<Vec<_>>>()?;
        TestFunction::new(self.p, terms)
    }

    /// Exact equality as functions, independent of the decomposition.
    pub fn equals(&self, other: &Self) -> Result<bool> {
        Ok(self.sub(other)?.is_zero())
    }

    /// Integral against Haar measure.
    pub fn integral(&self) -> Result<CycRat> {
        let mut acc = CycRat::zero(self.p);
        for (b, w) in &self.terms {
            acc = acc.add(&cycrat_scale(w, &b.haar_measure(), self.p)?)?;
        }
        Ok(acc)
    }
}

/// Term-wise exact transform: the indicator of B(c, p^k) maps to the
/// character multiple chi(-c xi) p^k on B(0, p^{-k}), realized as cells of
/// radius p^{-max(k, scale of c)} since the character factor is only
/// locally constant at that resolution.
pub fn fourier_test(phi: &TestFunction) -> Result<TestFunction> {
    let p = phi.p;
    let mut out: Vec<(Ball, CycRat)> = Vec::new();
    for (b, w) in &phi.terms {
        let k = b.radius_exp;
        let s_c = b.center.abs_exp().unwrap_or(i64::MIN);
        let t = k.max(s_c);
        let pieces = (t - k).max(0) as u32;
        let count = (p as i64)
            .checked_pow(pieces)
            .filter(|&c| c <= REFINE_GUARD)
            .ok_or(Error::ScaleGuard {
                size: u64::MAX,
                guard: REFINE_GUARD as u64,
            })?;
        let factor = cycrat_scale(w, &p_pow_rational(p, k), p)?;
        for j in 0..count {
            let xi0 = PAdicScaled::integer(p, j as u64)?.scale_by_p_pow(k);
            let root = character(&b.center, &xi0)?.conj();
            let coeff = factor.mul(&CycRat::new(CycInt::from_root_of_unity(&root), 1)?)?;
            out.push((Ball::new(xi0, -t), coeff));
        }
    }
    TestFunction::new(p, out)
}

/// Exact convolution: indicators of balls convolve to the smaller Haar
/// mass times the indicator of the sum ball.
pub fn convolve_test(phi: &TestFunction, psi: &TestFunction) -> Result<TestFunction> {
    if phi.p != psi.p {
        return Err(Error::PrimeMismatch(phi.p, psi.p));
    }
    let p = phi.p;
    let mut out = Vec::new();
    for (b1, w1) in &phi.terms {
        for (b2, w2) in &psi.terms {
            let rmin = b1.radius_exp.min(b2.radius_exp);
            let rmax = b1.radius_exp.max(b2.radius_exp);
            let center = b1.center.add(&b2.center)?;
            let coeff = cycrat_scale(&w1.mul(w2)?, &p_pow_rational(p, rmin), p)?;
            out.push((Ball::new(center, rmax), coeff));
        }
    }
    TestFunction::new(p, out)
}

/// Pointwise product: term pairs contribute on the intersection of their
/// balls, which is the smaller ball or empty.
pub fn multiply_test(phi: &TestFunction, psi: &TestFunction) -> Result<TestFunction> {
    if phi.p != psi.p {
        return Err(Error::PrimeMismatch(phi.p, psi.p));
    }
    let mut out = Vec::new();
    for (b1, w1) in &phi.terms {
        for (b2, w2) in &psi.terms {
            let ball = match b1.relation(b2)? {
                BallRelation::Disjoint => continue,
                BallRelation::Equal | BallRelation::FirstInsideSecond => b1.clone(),
                BallRelation::SecondInsideFirst => b2.clone(),
            };
            out.push((ball, w1.mul(w2)?));
        }
    }
    TestFunction::new(phi.p, out)
}

/// Delta_k (mu * theta_k) for the atomic view of the measure: each cell
/// atom spreads to a ball of radius p^{-k}, clipped to B(0, p^k).
pub fn regularize_measure(mu: &BallMeasure, k: i64) -> Result<TestFunction> {
    if k < 1 {
        return Err(Error::Precondition("regularization needs k >= 1".into()));
    }
    let p = mu.prime();
    let factor = p_pow_rational(p, k);
    let mut terms = Vec::new();
    for (&c, mass) in mu.masses() {
        let w = CycRat::from_rational(p, &(mass * &factor))?;
        terms.push((Ball::new(mu.cell_center(c)?, -k), w));
    }
    let spread = TestFunction::new(p, terms)?;
    multiply_test(&TestFunction::delta(p, k)?, &spread)
}

/// Delta_k (delta_E * theta_k): every point becomes a p^k spike on a ball
/// of radius p^{-k}, clipped to B(0, p^k).
pub fn regularize_discrete(e: &DiscreteSetQp, k: i64) -> Result<TestFunction> {
    if k < 1 {
        return Err(Error::Precondition("regularization needs k >= 1".into()));
    }
    let p = e.prime();
    let w = CycRat::from_rational(p, &p_pow_rational(p, k))?;
    let terms = e
        .elements()
        .iter()
        .map(|lam| (Ball::new(lam.clone(), -k), w.clone()))
        .collect();
    let spread = TestFunction::new(p, terms)?;
    multiply_test(&TestFunction::delta(p, k)?, &spread)
}

/// Integral pairing of two test functions.
pub fn pair_test(f: &TestFunction, phi: &TestFunction) -> Result<CycRat> {
    multiply_test(f, phi)?.integral()
}

/// Pairing of delta_E with a test function: the sum of point values.
pub fn pair_discrete(e: &DiscreteSetQp, phi: &TestFunction) -> Result<CycRat> {
    if e.prime() != phi.p {
        return Err(Error::PrimeMismatch(e.prime(), phi.p));
    }
    let mut acc = CycRat::zero(phi.p);
    for lam in e.elements() {
        acc = acc.add(&phi.evaluate(lam)?)?;
    }
    Ok(acc)
}

/// Pairing of a ball measure with a test function via its cell atoms.
pub fn pair_measure(mu: &BallMeasure, phi: &TestFunction) -> Result<CycRat> {
    if mu.prime() != phi.p {
        return Err(Error::PrimeMismatch(mu.prime(), phi.p));
    }
    let mut acc = CycRat::zero(phi.p);
    for (&c, mass) in mu.masses() {
        let v = phi.evaluate(&mu.cell_center(c)?)?;
        acc = acc.add(&v.mul(&CycRat::from_rational(phi.p, mass)?)?)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::nu_truncation;
    use crate::padic::parse_padic;

    fn unit_ball(p: u64) -> TestFunction {
        TestFunction::indicator(Ball::new(PAdicScaled::zero(p), 0)).unwrap()
    }

    fn assert_value(phi: &TestFunction, x: &str, want: (f64, f64)) {
        let x = parse_padic(phi.prime(), x).unwrap();
        let (re, im) = phi.evaluate(&x).unwrap().to_complex();
        assert!(
            (re - want.0).abs() < 1e-12 && (im - want.1).abs() < 1e-12,
            "value at {x}: got ({re}, {im}), want {want:?}"
        );
    }

    #[test]
    fn canonicalization_merges_and_splits() {
        // 1_{B(0,1)} + 1_{B(1,1/2)} at p=2: the small ball is carved out
        let p = 2;
        let f = TestFunction::new(
            p,
            vec![
                (Ball::new(PAdicScaled::zero(p), 0), CycRat::from_integer(p, 1)),
                (
                    Ball::new(PAdicScaled::integer(p, 1u64).unwrap(), -1),
                    CycRat::from_integer(p, 1),
                ),
            ],
        )
        .unwrap();
        assert_value(&f, "0", (1.0, 0.0));
        assert_value(&f, "1", (2.0, 0.0));
        assert_value(&f, "1/2", (0.0, 0.0));
        // disjointness of the canonical decomposition
        for (i, (a, _)) in f.terms().iter().enumerate() {
            for (b, _) in &f.terms()[i + 1..] {
                assert_eq!(a.relation(b).unwrap(), BallRelation::Disjoint);
            }
        }
    }

    #[test]
    fn fourier_fixed_points() {
        let p = 3;
        let zp = unit_ball(p);
        assert!(fourier_test(&zp).unwrap().equals(&zp).unwrap());

        // Delta_1 -> theta_1
        let d1 = TestFunction::delta(p, 1).unwrap();
        let t1 = TestFunction::theta(p, 1).unwrap();
        assert!(fourier_test(&d1).unwrap().equals(&t1).unwrap());
    }

    #[test]
    fn fourier_shifted_ball() {
        // 1_{B(1, 1/2)} at p=2: hat has value (1/2) e^{-2 pi i xi} on cells
        let p = 2;
        let f = TestFunction::indicator(Ball::new(
            PAdicScaled::integer(p, 1u64).unwrap(),
            -1,
        ))
        .unwrap();
        let fh = fourier_test(&f).unwrap();
        assert_value(&fh, "0", (0.5, 0.0));
        assert_value(&fh, "1/2", (-0.5, 0.0));
        assert_value(&fh, "2", (0.5, 0.0));
        // support is B(0, 2)
        assert_eq!(fh.compactness_exp(), Some(1));
        // Prop 2.2 duality: constancy of the transform vs compactness
        assert!(fh.constancy_exp().unwrap() >= -f.compactness_exp().unwrap());
    }

    #[test]
    fn fourier_involution() {
        let p = 2;
        let f = TestFunction::new(
            p,
            vec![
                (Ball::new(parse_padic(p, "1/2").unwrap(), -2), CycRat::from_integer(p, 3)),
                (Ball::new(PAdicScaled::zero(p), 1), CycRat::from_integer(p, -1)),
            ],
        )
        .unwrap();
        let f2 = fourier_test(&fourier_test(&f).unwrap()).unwrap();
        assert!(f2.equals(&f.reflect().unwrap()).unwrap());
        let f4 = fourier_test(&fourier_test(&f2).unwrap()).unwrap();
        assert!(f4.equals(&f).unwrap());
    }

    #[test]
    fn convolution_examples() {
        let p = 3;
        let zp = unit_ball(p);
        assert!(convolve_test(&zp, &zp).unwrap().equals(&zp).unwrap());
    }

    #[test]
    fn multiplication_examples() {
        let p = 2;
        let zp = unit_ball(p);
        let small = TestFunction::indicator(Ball::new(
            PAdicScaled::integer(p, 1u64).unwrap(),
            -1,
        ))
        .unwrap();
        assert!(multiply_test(&zp, &small).unwrap().equals(&small).unwrap());
    }

    #[test]
    fn exchange_law() {
        let p = 2;
        let f = TestFunction::indicator(Ball::new(parse_padic(p, "1").unwrap(), -1)).unwrap();
        let g = TestFunction::new(
            p,
            vec![
                (Ball::new(PAdicScaled::zero(p), 0), CycRat::from_integer(p, 2)),
                (Ball::new(parse_padic(p, "1/2").unwrap(), -1), CycRat::from_integer(p, 1)),
            ],
        )
        .unwrap();
        let lhs = fourier_test(&convolve_test(&f, &g).unwrap()).unwrap();
        let rhs = multiply_test(&fourier_test(&f).unwrap(), &fourier_test(&g).unwrap()).unwrap();
        assert!(lhs.equals(&rhs).unwrap());
    }

    #[test]
    fn regularize_examples() {
        // delta_0 at k=2 becomes p^2 on B(0, p^{-2})
        let p = 3;
        let e = DiscreteSetQp::new(p, vec![PAdicScaled::zero(p)]).unwrap();
        let r = regularize_discrete(&e, 2).unwrap();
        let expected = TestFunction::theta(p, 2).unwrap();
        assert!(r.equals(&expected).unwrap());

        // Haar truncation at k = gamma flattens back to the unit ball
        let haar = nu_truncation(2, &(0..2).collect(), None, 2).unwrap();
        let r = regularize_measure(&haar, 2).unwrap();
        assert!(r.equals(&unit_ball(2)).unwrap());
    }

    #[test]
    fn regularization_stabilizes() {
        let p = 2;
        let e = DiscreteSetQp::new(
            p,
            vec![PAdicScaled::zero(p), parse_padic(p, "1/2").unwrap()],
        )
        .unwrap();
        let phi = unit_ball(p);
        for k in 1..=3 {
            let r = regularize_discrete(&e, k).unwrap();
            assert!(pair_test(&r, &phi).unwrap().equals_integer(1), "k = {k}");
        }
    }

    #[test]
    fn pairing_examples() {
        let p = 2;
        let zp = unit_ball(p);
        let e0 = DiscreteSetQp::new(p, vec![PAdicScaled::zero(p)]).unwrap();
        assert!(pair_discrete(&e0, &zp).unwrap().equals_integer(1));

        let small = TestFunction::indicator(Ball::new(PAdicScaled::zero(p), -1)).unwrap();
        let v = pair_test(&zp, &small).unwrap();
        let (re, im) = v.to_complex();
        assert!((re - 0.5).abs() < 1e-12 && im.abs() < 1e-12);

        let e = DiscreteSetQp::new(
            p,
            vec![PAdicScaled::zero(p), parse_padic(p, "1/2").unwrap()],
        )
        .unwrap();
        let b01 = TestFunction::indicator(Ball::new(PAdicScaled::zero(p), 0)).unwrap();
        assert!(pair_discrete(&e, &b01).unwrap().equals_integer(1));
    }
}
