//! Finite-scale dimension and density estimators: Shannon entropy of cell
//! partitions, entropy/local dimension sections, Beurling counts, and ball
//! densities. Every limit is reported as a finite section; liminf/limsup
//! over the supplied range are proxies, never claimed limits.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{ratio_string, BallMeasure, DiscreteSetQp};
use crate::padic::PAdicScaled;

fn ser_ratio<S: serde::Serializer>(r: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&ratio_string(r))
}

fn ser_opt_ratio<S: serde::Serializer>(
    r: &Option<BigRational>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match r {
        Some(r) => s.serialize_some(&ratio_string(r)),
        None => s.serialize_none(),
    }
}

fn ser_values<S: serde::Serializer>(
    v: &[(i64, BigRational)],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|(k, r)| (*k, ratio_string(r))))
}

/// Exact when the inputs are powers of p, else a float with ~1e-12 quality.
/// Verdict-bearing checks must only consume the Exact variant.
#[derive(Debug, Clone, PartialEq)]
pub enum LogValue {
    Exact(BigRational),
    Approx(f64),
}

impl LogValue {
    pub fn to_f64(&self) -> f64 {
        match self {
            LogValue::Exact(r) => r.to_f64().unwrap_or(f64::NAN),
            LogValue::Approx(x) => *x,
        }
    }

    pub fn exact(&self) -> Option<&BigRational> {
        match self {
            LogValue::Exact(r) => Some(r),
            LogValue::Approx(_) => None,
        }
    }
}

/// log_p of a positive rational, exact iff it is a power of p.
fn p_power_exponent(r: &BigRational, p: u64) -> Option<i64> {
    fn exp_of(mut x: BigInt, p: &BigInt) -> Option<i64> {
        let mut e = 0i64;
        while x > BigInt::one() {
            if (&x % p) != BigInt::zero() {
                return None;
            }
            x /= p;
            e += 1;
        }
        Some(e)
    }
    if !r.is_positive() {
        return None;
    }
    let p = BigInt::from(p);
    Some(exp_of(r.numer().clone(), &p)? - exp_of(r.denom().clone(), &p)?)
}

fn log_p(r: &BigRational, p: u64) -> LogValue {
    match p_power_exponent(r, p) {
        Some(e) => LogValue::Exact(BigRational::from_integer(BigInt::from(e))),
        None => LogValue::Approx(r.to_f64().map(|x| x.ln() / (p as f64).ln()).unwrap_or(f64::NAN)),
    }
}

/// Base-p Shannon entropy of mu with respect to the depth-n cell partition.
pub fn shannon_entropy(mu: &BallMeasure, n: u32) -> Result<LogValue> {
    if n > mu.depth() {
        return Err(Error::ResolutionTooFine {
            requested: n as i64,
            depth: mu.depth() as i64,
        });
    }
    if n == 0 {
        return Ok(LogValue::Exact(BigRational::zero()));
    }
    let coarse = mu.restrict(n)?;
    let p = mu.prime();
    let exact: Option<BigRational> = coarse
        .masses()
        .values()
        .map(|m| p_power_exponent(m, p).map(|e| m * BigRational::from_integer(BigInt::from(-e))))
        .try_fold(BigRational::zero(), |acc, t| t.map(|t| acc + t));
    Ok(match exact {
        Some(h) => LogValue::Exact(h),
        None => {
            let lp = (p as f64).ln();
            LogValue::Approx(
                coarse
                    .masses()
                    .values()
                    .map(|m| {
                        let x = m.to_f64().unwrap_or(f64::NAN);
                        -x * x.ln() / lp
                    })
                    .sum(),
            )
        }
    })
}

/// A finite section of a dimension formula with range-wise min/max standing
/// in for liminf/limsup.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionEstimate {
    #[serde(serialize_with = "ser_values")]
    pub values: Vec<(i64, BigRational)>,
    #[serde(serialize_with = "ser_ratio")]
    pub liminf_estimate: BigRational,
    #[serde(serialize_with = "ser_ratio")]
    pub limsup_estimate: BigRational,
}

impl DimensionEstimate {
    pub fn from_values(values: Vec<(i64, BigRational)>) -> Result<Self> {
        let min = values.iter().map(|(_, v)| v).min().ok_or(Error::EmptySet)?;
        let max = values.iter().map(|(_, v)| v).max().ok_or(Error::EmptySet)?;
        let (liminf_estimate, limsup_estimate) = (min.clone(), max.clone());
        Ok(DimensionEstimate {
            values,
            liminf_estimate,
            limsup_estimate,
        })
    }
}

/// The entropy-dimension sections #(I intersect [0, k)) / k.
pub fn entropy_dimension_estimates(
    branching: &BTreeSet<u32>,
    ks: &[u32],
) -> Result<DimensionEstimate> {
    if ks.iter().any(|&k| k == 0) {
        return Err(Error::Precondition("k must be at least 1".into()));
    }
    let values = ks
        .iter()
        .map(|&k| {
            let count = branching.iter().filter(|&&i| i < k).count();
            (
                k as i64,
                BigRational::new(BigInt::from(count), BigInt::from(k)),
            )
        })
        .collect();
    DimensionEstimate::from_values(values)
}

/// log_p mu(B(x, p^{-k})) / k at the depth-k cell containing x; exact for
/// p-power masses. Points carrying no mass are rejected.
pub fn local_dimension_estimate(mu: &BallMeasure, x: &PAdicScaled, k: u32) -> Result<LogValue> {
    if x.prime() != mu.prime() {
        return Err(Error::PrimeMismatch(mu.prime(), x.prime()));
    }
    if k == 0 || k > mu.depth() {
        return Err(Error::ResolutionTooFine {
            requested: k as i64,
            depth: mu.depth() as i64,
        });
    }
    let y = x.scale_by_p_pow(mu.scale());
    if matches!(y.valuation(), Some(v) if v < 0) {
        return Err(Error::OutsideSupport);
    }
    let modulus = BigInt::from(mu.prime()).pow(k);
    let residue: u64 = (y.scale_by_p_pow(-(k as i64)).frac_part()
        * BigRational::from_integer(modulus))
    .to_integer()
    .to_u64()
    .expect("residue fits");
    let mass = mu.restrict(k)?.mass(residue);
    if mass.is_zero() {
        return Err(Error::OutsideSupport);
    }
    Ok(match p_power_exponent(&mass, mu.prime()) {
        Some(e) => LogValue::Exact(BigRational::new(BigInt::from(-e), BigInt::from(k))),
        None => LogValue::Approx(
            -mass.to_f64().unwrap_or(f64::NAN).ln() / ((mu.prime() as f64).ln() * k as f64),
        ),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BeurlingEntry {
    pub k: i64,
    /// max over radius-p^k ball classes of the point count
    pub sup_count: u64,
    /// min over classes meeting Lambda (the lower density's counterpart)
    pub inf_count: u64,
    /// sup_count / p^{kr}, defined when kr is an integer
    #[serde(serialize_with = "ser_opt_ratio")]
    pub sup_ratio: Option<BigRational>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BeurlingEstimates {
    #[serde(serialize_with = "ser_ratio")]
    pub r: BigRational,
    pub entries: Vec<BeurlingEntry>,
    /// growth exponents log_p(sup_count) / k
    pub growth: DimensionEstimate,
}

/// Beurling counting at radii p^k: ball classes are exact (ultrametric), so
/// the sup over centers is a finite max, not a sample.
pub fn beurling_estimates(
    lambda: &DiscreteSetQp,
    r: &BigRational,
    ks: &[i64],
) -> Result<BeurlingEstimates> {
    if !r.is_positive() {
        return Err(Error::Precondition("exponent r must be positive".into()));
    }
    let p = lambda.prime();
    let mut entries = Vec::new();
    let mut growth = Vec::new();
    for &k in ks {
        let mut classes: BTreeMap<BigRational, u64> = BTreeMap::new();
        for lam in lambda.elements() {
            *classes.entry(lam.scale_by_p_pow(k).frac_part()).or_insert(0) += 1;
        }
        let sup_count = *classes.values().max().expect("nonempty set");
        let inf_count = *classes.values().min().expect("nonempty set");
        let kr = r * BigRational::from_integer(BigInt::from(k));
        let sup_ratio = kr.is_integer().then(|| {
            p_power_ratio(sup_count, p, kr.to_integer().to_i64().expect("small exponent"))
        });
        growth.push((
            k,
            match log_p(&BigRational::from_integer(BigInt::from(sup_count)), p) {
                LogValue::Exact(e) => e / BigRational::from_integer(BigInt::from(k)),
                LogValue::Approx(x) => BigRational::from_f64(x / k as f64)
                    .unwrap_or_else(BigRational::zero),
            },
        ));
        entries.push(BeurlingEntry {
            k,
            sup_count,
            inf_count,
            sup_ratio,
        });
    }
    Ok(BeurlingEstimates {
        r: r.clone(),
        entries,
        growth: DimensionEstimate::from_values(growth)?,
    })
}

/// count / p^e as an exact rational, for e of either sign.
fn p_power_ratio(count: u64, p: u64, e: i64) -> BigRational {
    let pw = BigInt::from(p).pow(e.unsigned_abs() as u32);
    if e >= 0 {
        BigRational::new(BigInt::from(count), pw)
    } else {
        BigRational::from_integer(BigInt::from(count) * pw)
    }
}

/// #(E intersect B(center, p^k)) / p^k for each k, exact.
pub fn density_estimates(
    e: &DiscreteSetQp,
    center: &PAdicScaled,
    ks: &[i64],
) -> Result<Vec<(i64, BigRational)>> {
    if center.prime() != e.prime() {
        return Err(Error::PrimeMismatch(e.prime(), center.prime()));
    }
    ks.iter()
        .map(|&k| {
            let mut count = 0u64;
            for lam in e.elements() {
                let d = lam.sub(center)?;
                // |d| <= p^k iff v(d) >= -k
                if d.valuation().map_or(true, |v| v >= -k) {
                    count += 1;
                }
            }
            Ok((k, p_power_ratio(count, e.prime(), k)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{nu_truncation, spectrum_truncation};
    use crate::padic::parse_padic;

    fn evens() -> BTreeSet<u32> {
        (0..32).step_by(2).collect()
    }

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn shannon_entropy_examples() {
        let mu = nu_truncation(2, &evens(), None, 4).unwrap();
        assert_eq!(shannon_entropy(&mu, 4).unwrap(), LogValue::Exact(rat(2, 1)));

        let haar = nu_truncation(3, &(0..3).collect(), None, 3).unwrap();
        for n in 0..=3 {
            assert_eq!(
                shannon_entropy(&haar, n).unwrap(),
                LogValue::Exact(rat(n as i64, 1))
            );
        }

        let atom = nu_truncation(2, &BTreeSet::new(), None, 2).unwrap();
        assert_eq!(shannon_entropy(&atom, 2).unwrap(), LogValue::Exact(rat(0, 1)));

        assert!(shannon_entropy(&atom, 3).is_err());
    }

    #[test]
    fn shannon_entropy_non_p_power() {
        let mut masses = BTreeMap::new();
        masses.insert(0u64, rat(1, 3));
        masses.insert(1u64, rat(2, 3));
        let mu = BallMeasure::new(2, 1, 0, masses).unwrap();
        match shannon_entropy(&mu, 1).unwrap() {
            LogValue::Approx(h) => {
                let want = -(1.0f64 / 3.0) * (1.0f64 / 3.0).log2() - (2.0 / 3.0) * (2.0f64 / 3.0).log2();
                assert!((h - want).abs() < 1e-12);
            }
            LogValue::Exact(_) => panic!("expected a float"),
        }
    }

    #[test]
    fn entropy_dimension_examples() {
        let est = entropy_dimension_estimates(&evens(), &[4]).unwrap();
        assert_eq!(est.values[0].1, rat(1, 2));

        let all: BTreeSet<u32> = (0..64).collect();
        let est = entropy_dimension_estimates(&all, &[1, 2, 3, 7]).unwrap();
        assert!(est.values.iter().all(|(_, v)| *v == rat(1, 1)));
        assert_eq!(est.liminf_estimate, rat(1, 1));

        let est = entropy_dimension_estimates(&BTreeSet::new(), &[1, 5]).unwrap();
        assert!(est.values.iter().all(|(_, v)| v.is_zero()));
    }

    #[test]
    fn local_dimension_examples() {
        let mu = nu_truncation(2, &evens(), None, 4).unwrap();
        let zero = PAdicScaled::zero(2);
        assert_eq!(
            local_dimension_estimate(&mu, &zero, 4).unwrap(),
            LogValue::Exact(rat(1, 2))
        );
        // all support points share the finite-scale local dimension
        for c in mu.support() {
            let x = PAdicScaled::integer(2, c).unwrap();
            assert_eq!(
                local_dimension_estimate(&mu, &x, 4).unwrap(),
                LogValue::Exact(rat(1, 2))
            );
        }
        // 2 is not a leaf residue of the evens tree at depth 4
        let outside = PAdicScaled::integer(2, 2u64).unwrap();
        assert!(matches!(
            local_dimension_estimate(&mu, &outside, 4),
            Err(Error::OutsideSupport)
        ));

        let haar = nu_truncation(3, &(0..3).collect(), None, 3).unwrap();
        let x = parse_padic(3, "5").unwrap();
        assert_eq!(
            local_dimension_estimate(&haar, &x, 3).unwrap(),
            LogValue::Exact(rat(1, 1))
        );

        let atom = nu_truncation(2, &BTreeSet::new(), None, 3).unwrap();
        assert_eq!(
            local_dimension_estimate(&atom, &zero, 3).unwrap(),
            LogValue::Exact(rat(0, 1))
        );
    }

    #[test]
    fn entropy_matches_local_dimension() {
        // term-by-term equality of the two dimension formulas on a nu tower
        let i: BTreeSet<u32> = [0u32, 2, 3].into_iter().collect();
        for k in 1..=4u32 {
            let mu = nu_truncation(3, &i, None, k).unwrap();
            let h = shannon_entropy(&mu, k).unwrap().exact().unwrap().clone();
            let est = entropy_dimension_estimates(&i, &[k]).unwrap();
            assert_eq!(h / BigRational::from_integer(BigInt::from(k)), est.values[0].1);
        }
    }

    #[test]
    fn beurling_examples() {
        // tower sections for I = evens at p = 2
        for k in 1..=6i64 {
            let lam = spectrum_truncation(2, &evens(), k as u32).unwrap();
            let est = beurlng_at(&lam, k);
            let expected = rat((k as i64 + 1) / 2, k);
            assert_eq!(est, expected, "k = {k}");
        }

        let full = spectrum_truncation(3, &(0..4).collect(), 4).unwrap();
        assert_eq!(beurlng_at(&full, 4), rat(1, 1));

        let single = DiscreteSetQp::new(2, vec![PAdicScaled::zero(2)]).unwrap();
        assert_eq!(beurlng_at(&single, 4), rat(0, 1));
    }

    fn beurlng_at(lam: &DiscreteSetQp, k: i64) -> BigRational {
        beurling_estimates(lam, &rat(1, 2), &[k])
            .unwrap()
            .growth
            .values[0]
            .1
            .clone()
    }

    #[test]
    fn density_examples() {
        let zero = PAdicScaled::zero(2);
        // Haar tower: density 1 at every depth
        for k in 1..=4i64 {
            let lam = spectrum_truncation(2, &(0..8).collect(), k as u32).unwrap();
            let d = density_estimates(&lam, &zero, &[k]).unwrap();
            assert_eq!(d[0].1, rat(1, 1));
        }
        // evens tower: 2^{ceil(k/2) - k}, non-increasing toward 0
        let mut prev = rat(2, 1);
        for k in 1..=8i64 {
            let lam = spectrum_truncation(2, &evens(), k as u32).unwrap();
            let d = density_estimates(&lam, &zero, &[k]).unwrap()[0].1.clone();
            let e = (k + 1) / 2;
            assert_eq!(d, rat(1, 1i64 << (k - e) as u32));
            assert!(d <= prev);
            prev = d;
        }
        // singleton
        let single = DiscreteSetQp::new(3, vec![PAdicScaled::zero(3)]).unwrap();
        let d = density_estimates(&single, &zero_3(), &[2]).unwrap();
        assert_eq!(d[0].1, rat(1, 9));
    }

    fn zero_3() -> PAdicScaled {
        PAdicScaled::zero(3)
    }

    #[test]
    fn density_center_independence_at_covering_radius() {
        let lam = spectrum_truncation(2, &evens(), 4).unwrap();
        let a = density_estimates(&lam, &PAdicScaled::zero(2), &[4]).unwrap();
        let b = density_estimates(&lam, &parse_padic(2, "3").unwrap(), &[4]).unwrap();
        assert_eq!(a, b);
    }
}
