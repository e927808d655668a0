//! Finite-level ball measures on Q_p, their Fourier transforms, zero-sphere
//! classification, and the structure-recovery pipeline.
//!
//! A `BallMeasure` at depth g and scale s puts rational mass on the cells
//! c * p^{-s} + B(0, p^{-g+s}), c in Z/p^g. Sphere indices follow the
//! convention tag n <=> S(0, p^{-n}): points of absolute value p^{-n}.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::cyclotomic::{is_zero_slice, CycInt, CycRat};
use crate::error::{Error, Result};
use crate::padic::{character, check_prime, parse_padic, PAdicScaled};
use crate::trees::{self, HomoTree};

/// Cap on representatives examined per sphere; windows needing more are
/// rejected rather than silently truncated.
const SPHERE_REP_GUARD: u64 = 1 << 20;

fn pow_checked(p: u64, e: u32) -> Result<u64> {
    p.checked_pow(e).ok_or(Error::ScaleGuard {
        size: u64::MAX,
        guard: SPHERE_REP_GUARD,
    })
}

fn parse_ratio(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let (n, d) = match s.split_once('/') {
        None => (s, "1"),
        Some((n, d)) => (n, d),
    };
    let num: BigInt = n
        .trim()
        .parse()
        .map_err(|e| Error::Parse(format!("bad numerator {n:?}: {e}")))?;
    let den: BigInt = d
        .trim()
        .parse()
        .map_err(|e| Error::Parse(format!("bad denominator {d:?}: {e}")))?;
    if den.is_zero() {
        return Err(Error::Parse(format!("zero denominator in {s:?}")));
    }
    Ok(BigRational::new(num, den))
}

pub(crate) fn ratio_string(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// A finite subset of Q_p with exact elements, kept sorted by rational value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscreteSetQp {
    p: u64,
    elements: Vec<PAdicScaled>,
}

impl DiscreteSetQp {
    pub fn new(p: u64, mut elements: Vec<PAdicScaled>) -> Result<Self> {
        check_prime(p)?;
        if elements.is_empty() {
            return Err(Error::EmptySet);
        }
        for x in &elements {
            if x.prime() != p {
                return Err(Error::PrimeMismatch(p, x.prime()));
            }
        }
        elements.sort();
        for w in elements.windows(2) {
            if w[0] == w[1] {
                return Err(Error::Precondition(format!("duplicate element {}", w[0])));
            }
        }
        Ok(DiscreteSetQp { p, elements })
    }

    pub fn prime(&self) -> u64 {
        self.p
    }

    pub fn elements(&self) -> &[PAdicScaled] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, x: &PAdicScaled) -> bool {
        self.elements.iter().any(|e| e == x)
    }

    /// Smallest m >= 0 with p^m E inside Z_p.
    pub fn scale_exp(&self) -> u32 {
        self.elements
            .iter()
            .filter_map(|x| x.valuation())
            .map(|v| -v)
            .max()
            .unwrap_or(0)
            .max(0) as u32
    }

    /// max v_p(x - y) over distinct pairs; None for a singleton.
    pub fn pair_valuation_max(&self) -> Result<Option<i64>> {
        let mut best: Option<i64> = None;
        for (i, x) in self.elements.iter().enumerate() {
            for y in &self.elements[i + 1..] {
                let v = x.sub(y)?.valuation().expect("elements distinct");
                best = Some(best.map_or(v, |b| b.max(v)));
            }
        }
        Ok(best)
    }
}

#[derive(Serialize, Deserialize)]
struct SetJson {
    p: u64,
    elements: Vec<String>,
}

impl Serialize for DiscreteSetQp {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SetJson {
            p: self.p,
            elements: self.elements.iter().map(|x| x.to_string()).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DiscreteSetQp {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = SetJson::deserialize(d)?;
        let elements = j
            .elements
            .iter()
            .map(|s| parse_padic(j.p, s))
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        DiscreteSetQp::new(j.p, elements).map_err(D::Error::custom)
    }
}

/// A measure supported on the depth-g cells of a scaled unit ball.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BallMeasure {
    p: u64,
    gamma: u32,
    scale: i64,
    masses: BTreeMap<u64, BigRational>,
    normalized: bool,
}

impl BallMeasure {
    pub fn new(p: u64, gamma: u32, scale: i64, masses: BTreeMap<u64, BigRational>) -> Result<Self> {
        let m = Self::new_unnormalized(p, gamma, scale, masses)?;
        let total = m
            .masses
            .values()
            .fold(BigRational::zero(), |acc, v| acc + v);
        if !total.is_one() {
            return Err(Error::Precondition(format!(
                "masses sum to {total}, expected 1"
            )));
        }
        Ok(m)
    }

    /// Same shape without the probability constraint; flagged accordingly.
    pub fn new_unnormalized(
        p: u64,
        gamma: u32,
        scale: i64,
        masses: BTreeMap<u64, BigRational>,
    ) -> Result<Self> {
        check_prime(p)?;
        if gamma == 0 {
            return Err(Error::Precondition("depth must be at least 1".into()));
        }
        let modulus = pow_checked(p, gamma)?;
        let mut kept = BTreeMap::new();
        for (c, mass) in masses {
            if c >= modulus {
                return Err(Error::ResidueOutOfRange {
                    residue: c,
                    modulus,
                });
            }
            if mass.is_negative() {
                return Err(Error::Precondition(format!("negative mass at cell {c}")));
            }
            if !mass.is_zero() {
                kept.insert(c, mass);
            }
        }
        if kept.is_empty() {
            return Err(Error::EmptySet);
        }
        let total = kept
            .values()
            .fold(BigRational::zero(), |acc, v| acc + v);
        Ok(BallMeasure {
            p,
            gamma,
            scale,
            masses: kept,
            normalized: total.is_one(),
        })
    }

    pub fn prime(&self) -> u64 {
        self.p
    }

    pub fn depth(&self) -> u32 {
        self.gamma
    }

    pub fn scale(&self) -> i64 {
        self.scale
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn masses(&self) -> &BTreeMap<u64, BigRational> {
        &self.masses
    }

    pub fn mass(&self, cell: u64) -> BigRational {
        self.masses.get(&cell).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn support(&self) -> BTreeSet<u64> {
        self.masses.keys().copied().collect()
    }

    /// Representative point of a cell: c * p^{-scale}.
    pub fn cell_center(&self, cell: u64) -> Result<PAdicScaled> {
        Ok(PAdicScaled::integer(self.p, cell)?.scale_by_p_pow(-self.scale))
    }

    pub fn cell_radius_exp(&self) -> i64 {
        self.scale - self.gamma as i64
    }

    /// fourier_measure is the exact transform of the truncation for all xi
    /// with |xi|_p <= p^bound; beyond that it is the atomic approximation.
    pub fn fourier_exactness_bound(&self) -> i64 {
        self.gamma as i64 - self.scale
    }

    /// Coarsens to depth g2 <= g by summing cell masses.
    pub fn restrict(&self, gamma2: u32) -> Result<BallMeasure> {
        if gamma2 == 0 || gamma2 > self.gamma {
            return Err(Error::ResolutionTooFine {
                requested: gamma2 as i64,
                depth: self.gamma as i64,
            });
        }
        let m2 = pow_checked(self.p, gamma2)?;
        let mut masses: BTreeMap<u64, BigRational> = BTreeMap::new();
        for (c, mass) in &self.masses {
            *masses.entry(c % m2).or_insert_with(BigRational::zero) += mass;
        }
        BallMeasure::new_unnormalized(self.p, gamma2, self.scale, masses)
    }
}

#[derive(Serialize, Deserialize)]
struct MeasureJson {
    p: u64,
    gamma: u32,
    scale: i64,
    masses: BTreeMap<String, String>,
}

impl Serialize for BallMeasure {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MeasureJson {
            p: self.p,
            gamma: self.gamma,
            scale: self.scale,
            masses: self
                .masses
                .iter()
                .map(|(c, m)| (c.to_string(), ratio_string(m)))
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for BallMeasure {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = MeasureJson::deserialize(d)?;
        let mut masses = BTreeMap::new();
        for (c, m) in &j.masses {
            let cell: u64 = c
                .trim()
                .parse()
                .map_err(|e| D::Error::custom(format!("bad cell {c:?}: {e}")))?;
            masses.insert(cell, parse_ratio(m).map_err(D::Error::custom)?);
        }
        BallMeasure::new_unnormalized(j.p, j.gamma, j.scale, masses).map_err(D::Error::custom)
    }
}

/// The depth-g truncation of the tree measure: uniform mass on the leaf
/// cells of the (I, J, choice) tree. `branching` is taken mod the window
/// {0..g-1}; None means the all-zero choice.
pub fn nu_truncation(
    p: u64,
    branching: &BTreeSet<u32>,
    choice: Option<&BTreeMap<Vec<u8>, u8>>,
    gamma: u32,
) -> Result<BallMeasure> {
    let tree = truncation_tree(p, branching, choice, gamma)?;
    nu_from_tree(&tree)
}

/// Builds the depth-g tree with branching levels I intersect {0..g-1}.
pub fn truncation_tree(
    p: u64,
    branching: &BTreeSet<u32>,
    choice: Option<&BTreeMap<Vec<u8>, u8>>,
    gamma: u32,
) -> Result<HomoTree> {
    let i_gamma: BTreeSet<u32> = branching.iter().copied().filter(|&i| i < gamma).collect();
    match choice {
        None => HomoTree::with_zero_choice(p, gamma, i_gamma),
        Some(c) => HomoTree::new(p, gamma, i_gamma, c.clone()),
    }
}

pub fn nu_from_tree(tree: &HomoTree) -> Result<BallMeasure> {
    let leaves = tree.leaves();
    let mass = BigRational::new(BigInt::one(), BigInt::from(leaves.len()));
    let masses = leaves.into_iter().map(|c| (c, mass.clone())).collect();
    BallMeasure::new(tree.prime(), tree.depth(), 0, masses)
}

/// The depth-g spectrum: p^{-g} times the dual-tree leaves. Contains 0 and
/// has p^{#I_g} elements; orthogonal for nu_truncation by duality.
pub fn spectrum_truncation(p: u64, branching: &BTreeSet<u32>, gamma: u32) -> Result<DiscreteSetQp> {
    let tree = truncation_tree(p, branching, None, gamma)?;
    spectrum_from_tree(&tree)
}

pub fn spectrum_from_tree(tree: &HomoTree) -> Result<DiscreteSetQp> {
    let p = tree.prime();
    let gamma = tree.depth();
    let elements = tree
        .dual()
        .leaves()
        .into_iter()
        .map(|d| PAdicScaled::new(p, d, gamma))
        .collect::<Result<Vec<_>>>()?;
    DiscreteSetQp::new(p, elements)
}

/// Clears denominators: returns (D, [(cell, mass * D)]) with D the lcm of
/// the mass denominators.
fn integer_weights(mu: &BallMeasure) -> Result<(i64, Vec<(u64, i64)>)> {
    let mut lcm = BigInt::one();
    for mass in mu.masses.values() {
        lcm = lcm.lcm(mass.denom());
    }
    let d: i64 = (&lcm)
        .try_into()
        .map_err(|_| Error::Precondition("mass denominators exceed i64".into()))?;
    let weights = mu
        .masses
        .iter()
        .map(|(&c, mass)| {
            let w = (mass * BigRational::from_integer(lcm.clone())).to_integer();
            (&w)
                .try_into()
                .map(|w| (c, w))
                .map_err(|_| Error::Precondition("mass numerators exceed i64".into()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((d, weights))
}

/// mu-hat(xi) = sum_c mass(c) conj(chi(xi c)), exact over Q(omega).
pub fn fourier_measure(mu: &BallMeasure, xi: &PAdicScaled) -> Result<CycRat> {
    if xi.prime() != mu.p {
        return Err(Error::PrimeMismatch(mu.p, xi.prime()));
    }
    let (d, weights) = integer_weights(mu)?;
    let mut terms = Vec::with_capacity(weights.len());
    let mut level = 0u32;
    for (c, w) in &weights {
        let root = character(xi, &mu.cell_center(*c)?)?.conj();
        level = level.max(root.level());
        terms.push((*w, root));
    }
    let m = pow_checked(mu.p, level)? as usize;
    let mut coeffs = vec![0i64; m];
    for (w, root) in terms {
        let idx = root.exponent() as usize * m / pow_checked(mu.p, root.level())? as usize;
        coeffs[idx] += w;
    }
    CycRat::new(CycInt::new(mu.p, level, coeffs)?, d)
}

/// delta_E-hat(xi) = sum_lambda conj(chi(xi lambda)).
pub fn fourier_discrete(e: &DiscreteSetQp, xi: &PAdicScaled) -> Result<CycInt> {
    if xi.prime() != e.p {
        return Err(Error::PrimeMismatch(e.p, xi.prime()));
    }
    let roots = e
        .elements
        .iter()
        .map(|lam| character(xi, lam).map(|r| r.conj()))
        .collect::<Result<Vec<_>>>()?;
    let level = roots.iter().map(|r| r.level()).max().unwrap_or(0);
    let m = pow_checked(e.p, level)? as usize;
    let mut coeffs = vec![0i64; m];
    for root in roots {
        let idx = root.exponent() as usize * m / pow_checked(e.p, root.level())? as usize;
        coeffs[idx] += 1;
    }
    CycInt::new(e.p, level, coeffs)
}

/// mu * mu_-: mass at c is sum over a - b = c of mass(a) mass(b).
pub fn autocorrelation(mu: &BallMeasure) -> Result<BallMeasure> {
    let m = pow_checked(mu.p, mu.gamma)?;
    let mut masses: BTreeMap<u64, BigRational> = BTreeMap::new();
    for (&a, wa) in &mu.masses {
        for (&b, wb) in &mu.masses {
            let c = (a + m - b) % m;
            *masses.entry(c).or_insert_with(BigRational::zero) += wa * wb;
        }
    }
    BallMeasure::new_unnormalized(mu.p, mu.gamma, mu.scale, masses)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SphereKind {
    /// Zero set of the discrete Fourier transform; tag true means I, false J.
    DiscreteFourier,
    /// Zero set of the autocorrelation; tag true means K.
    Autocorrelation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SphereClassification {
    pub kind: SphereKind,
    pub window: (i64, i64),
    /// n -> whether S(0, p^{-n}) lies in the relevant zero set.
    pub tags: BTreeMap<i64, bool>,
}

impl SphereClassification {
    pub fn tag(&self, n: i64) -> Option<bool> {
        self.tags.get(&n).copied()
    }

    pub fn tagged(&self) -> BTreeSet<i64> {
        self.tags
            .iter()
            .filter_map(|(&n, &t)| t.then_some(n))
            .collect()
    }
}

/// Tags n iff delta_E-hat vanishes on all of S(0, p^{-n}), checking every
/// representative at the constancy granularity. A sphere on which the
/// values mix zero and nonzero is reported as an error, not a tag: the
/// all-or-nothing dichotomy is verified, not assumed.
///
/// Default window [-(n_E + 1), s_E]: tags are impossible on either side.
pub fn zero_spheres_discrete(
    e: &DiscreteSetQp,
    window: Option<(i64, i64)>,
) -> Result<SphereClassification> {
    let p = e.p;
    let s_e = e.scale_exp() as i64;
    let n_e = e.pair_valuation_max()?.unwrap_or(0);
    let (lo, hi) = window.unwrap_or((-(n_e + 1), s_e));
    if lo > hi {
        return Err(Error::WindowOutOfRange {
            lo,
            hi,
            feas_lo: -(n_e + 1),
            feas_hi: s_e,
        });
    }
    // representatives of the lowest sphere: units mod p^(s_E - lo)
    let e_max = (s_e - lo).max(1);
    if e_max as u64 >= 64 || pow_checked(p, e_max as u32)? > SPHERE_REP_GUARD {
        return Err(Error::ScaleGuard {
            size: pow_checked(p, e_max.min(63) as u32).unwrap_or(u64::MAX),
            guard: SPHERE_REP_GUARD,
        });
    }
    let mut tags = BTreeMap::new();
    for n in lo..=hi {
        let lev = (s_e - n).max(1) as u32;
        let m = pow_checked(p, lev)?;
        // exponent numerators: {p^n lambda} lifted to level lev
        let big_m = BigRational::from_integer(BigInt::from(m));
        let residues: Vec<u64> = e
            .elements
            .iter()
            .map(|lam| {
                let fr = lam.scale_by_p_pow(n).frac_part();
                (fr * &big_m)
                    .to_integer()
                    .to_u64()
                    .ok_or_else(|| Error::Precondition("residue lift out of range".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut verdict: Option<bool> = None;
        let mut counts = vec![0i64; m as usize];
        for a in 1..m {
            if a % p == 0 {
                continue;
            }
            counts.iter_mut().for_each(|c| *c = 0);
            for &r in &residues {
                let idx = (m - (a as u128 * r as u128 % m as u128) as u64) % m;
                counts[idx as usize] += 1;
            }
            let zero = is_zero_slice(p, lev, &counts);
            match verdict {
                None => verdict = Some(zero),
                Some(v) if v != zero => return Err(Error::MixedSphere { n }),
                Some(_) => {}
            }
        }
        tags.insert(n, verdict.unwrap_or(false));
    }
    Ok(SphereClassification {
        kind: SphereKind::DiscreteFourier,
        window: (lo, hi),
        tags,
    })
}

/// Tags n iff the autocorrelation of mu puts zero mass on S(0, p^{-n}).
/// Spheres strictly outside the supporting ball are trivially tagged;
/// spheres finer than the cell resolution are rejected.
///
/// Default window [-s, g - 1 - s]: every cell-resolvable sphere.
pub fn zero_spheres_autocorr(
    mu: &BallMeasure,
    window: Option<(i64, i64)>,
) -> Result<SphereClassification> {
    let ac = autocorrelation(mu)?;
    let s = mu.scale;
    let gamma = mu.gamma as i64;
    let (lo, hi) = window.unwrap_or((-s, gamma - 1 - s));
    if lo > hi || hi + s >= gamma {
        return Err(Error::WindowOutOfRange {
            lo,
            hi,
            feas_lo: i64::MIN,
            feas_hi: gamma - 1 - s,
        });
    }
    let modulus = pow_checked(mu.p, mu.gamma)?;
    let mut tags = BTreeMap::new();
    for n in lo..=hi {
        let level = n + s;
        let tag = if level < 0 {
            true // the sphere lies outside the ball carrying the measure
        } else {
            let step = pow_checked(mu.p, level as u32)?;
            (step..modulus)
                .step_by(step as usize)
                .filter(|c| (c / step) % mu.p != 0)
                .all(|c| ac.mass(c).is_zero())
        };
        tags.insert(n, tag);
    }
    Ok(SphereClassification {
        kind: SphereKind::Autocorrelation,
        window: (lo, hi),
        tags,
    })
}

/// Character sum of mu at frequency d, reduced to an integer count vector;
/// zero iff the sum vanishes in Q(omega). `scale` is the measure scale s,
/// so each cell contributes at the point c p^{-s}.
fn weighted_sum_vanishes(weights: &[(u64, i64)], d: &PAdicScaled, p: u64, scale: i64) -> Result<bool> {
    let lev = match d.abs_exp() {
        None => 0,
        Some(e) => (e + scale).max(0),
    };
    if lev == 0 {
        // all characters are 1: the sum is the total weight, nonzero
        return Ok(false);
    }
    let lev = lev as u32;
    let m = pow_checked(p, lev)?;
    let n_d = lift_numerator(d, lev, scale)?;
    let mut counts = vec![0i64; m as usize];
    for &(c, w) in weights {
        let idx = (n_d as u128 * c as u128 % m as u128) as usize;
        counts[idx] += w;
    }
    Ok(is_zero_slice(p, lev, &counts))
}

/// True iff #Lambda = #supp(mu) and the characters indexed by Lambda are
/// pairwise orthogonal in L^2(mu): Lambda is a spectrum of the truncation.
pub fn check_orthobasis(mu: &BallMeasure, lambda: &DiscreteSetQp) -> Result<bool> {
    if mu.p != lambda.p {
        return Err(Error::PrimeMismatch(mu.p, lambda.p));
    }
    if lambda.len() != mu.masses.len() {
        return Ok(false);
    }
    let (_, weights) = integer_weights(mu)?;
    let els = lambda.elements();
    for (i, x) in els.iter().enumerate() {
        for y in &els[i + 1..] {
            let d = x.sub(y)?;
            if !weighted_sum_vanishes(&weights, &d, mu.p, mu.scale)? {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Index of the first xi violating sum_lambda |mu-hat(xi - lambda)|^2 = 1,
/// or None if the identity holds on the whole list. Exact.
pub fn functional_equation_witness(
    mu: &BallMeasure,
    lambda: &DiscreteSetQp,
    xi_list: &[PAdicScaled],
) -> Result<Option<usize>> {
    if mu.p != lambda.p {
        return Err(Error::PrimeMismatch(mu.p, lambda.p));
    }
    let p = mu.p;
    let (d_total, weights) = integer_weights(mu)?;
    let d_sq = (d_total as i128) * (d_total as i128);
    // difference weights of the support, cached per working level
    let mut diff_cache: BTreeMap<u32, Vec<i128>> = BTreeMap::new();
    for (xi_idx, xi) in xi_list.iter().enumerate() {
        if xi.prime() != p {
            return Err(Error::PrimeMismatch(p, xi.prime()));
        }
        let etas = lambda
            .elements
            .iter()
            .map(|lam| xi.sub(lam))
            .collect::<Result<Vec<_>>>()?;
        let lev = etas
            .iter()
            .filter_map(|eta| eta.abs_exp())
            .map(|e| e + mu.scale)
            .max()
            .unwrap_or(0)
            .max(0) as u32;
        let m = pow_checked(p, lev)?;
        if m > SPHERE_REP_GUARD {
            return Err(Error::ScaleGuard {
                size: m,
                guard: SPHERE_REP_GUARD,
            });
        }
        let g = diff_cache.entry(lev).or_insert_with(|| {
            let mut g = vec![0i128; m as usize];
            for &(c1, w1) in &weights {
                for &(c2, w2) in &weights {
                    let d = (c1 as i128 - c2 as i128).rem_euclid(m as i128) as usize;
                    g[d] += (w1 as i128) * (w2 as i128);
                }
            }
            g
        });
        // accumulate sum_lambda |mu-hat(xi - lambda)|^2 * D^2 as an exponent
        // count vector at level lev
        let mut acc = vec![0i128; m as usize];
        for eta in &etas {
            let m_eta = match eta.abs_exp() {
                None => 0,
                Some(e) => (e + mu.scale).max(0) as u32,
            };
            if m_eta == 0 {
                acc[0] += d_sq;
                continue;
            }
            let mm = pow_checked(p, m_eta)?;
            let step = (m / mm) as usize;
            let n_eta = lift_numerator(eta, m_eta, mu.scale)?;
            for (d, &gd) in g.iter().enumerate() {
                if gd != 0 {
                    let idx = (n_eta as u128 * (d as u128 % mm as u128) % mm as u128) as usize;
                    acc[idx * step] += gd;
                }
            }
        }
        acc[0] -= d_sq;
        let counts: Vec<i64> = acc
            .iter()
            .map(|&v| v.try_into().map_err(|_| Error::Precondition("overflow".into())))
            .collect::<Result<Vec<_>>>()?;
        if !is_zero_slice(p, lev, &counts) {
            return Ok(Some(xi_idx));
        }
    }
    Ok(None)
}

/// Numerator of {eta * p^{-scale}} lifted to level lev: the integer N with
/// {eta p^{-scale}} = N / p^lev. Requires lev at least the true level.
fn lift_numerator(eta: &PAdicScaled, lev: u32, scale: i64) -> Result<u64> {
    let m = pow_checked(eta.prime(), lev)?;
    let fr = eta.scale_by_p_pow(-scale).frac_part();
    (fr * BigRational::from_integer(BigInt::from(m)))
        .to_integer()
        .to_u64()
        .ok_or_else(|| Error::Precondition("frequency lift out of range".into()))
}

/// True iff |mu-hat|^2 * delta_Lambda = 1 at every xi in the list.
pub fn check_functional_equation(
    mu: &BallMeasure,
    lambda: &DiscreteSetQp,
    xi_list: &[PAdicScaled],
) -> Result<bool> {
    Ok(functional_equation_witness(mu, lambda, xi_list)?.is_none())
}

/// Lemma-8.3-style balance: with S(0, p^{-n}) in the Fourier zero set of
/// Lambda, the p sibling balls of radius p^n inside each ball of radius
/// p^{n+1} meeting Lambda contain equally many points.
pub fn count_balance_check(lambda: &DiscreteSetQp, n: i64) -> Result<bool> {
    let cls = zero_spheres_discrete(lambda, Some((n, n)))?;
    if cls.tag(n) != Some(true) {
        return Err(Error::Precondition(format!(
            "sphere S(0, p^{{-{n}}}) is not in the Fourier zero set"
        )));
    }
    let p = lambda.p;
    let mut groups: BTreeMap<BigRational, BTreeMap<BigRational, u64>> = BTreeMap::new();
    for lam in &lambda.elements {
        let parent = lam.scale_by_p_pow(n + 1).frac_part();
        let child = lam.scale_by_p_pow(n).frac_part();
        *groups
            .entry(parent)
            .or_default()
            .entry(child)
            .or_insert(0) += 1;
    }
    for children in groups.values() {
        if children.len() != p as usize {
            return Ok(false);
        }
        let mut it = children.values();
        let first = *it.next().expect("nonempty group");
        if it.any(|&c| c != first) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub window: (i64, i64),
    pub i_tags: BTreeSet<i64>,
    pub k_tags: BTreeSet<i64>,
    pub constant_masses: bool,
    pub homogeneous_support: bool,
    pub spectrum_matches_dual: bool,
    pub tags_partition_window: bool,
    pub witness: Option<String>,
}

impl PipelineReport {
    pub fn all_pass(&self) -> bool {
        self.constant_masses
            && self.homogeneous_support
            && self.spectrum_matches_dual
            && self.tags_partition_window
    }
}

/// Runs the four structure checks on an orthogonal pair (mu, Lambda):
/// (i) masses constant on the support, (ii) support homogeneous with
/// single-child levels given by the K-tags, (iii) Lambda equal to the
/// dual-tree spectrum, (iv) I and K tags partitioning the window.
pub fn recover_structure_pipeline(
    mu: &BallMeasure,
    lambda: &DiscreteSetQp,
    window: Option<(i64, i64)>,
) -> Result<PipelineReport> {
    if !check_orthobasis(mu, lambda)? {
        return Err(Error::Precondition(
            "orthobasis check failed: Lambda is not a spectrum of mu".into(),
        ));
    }
    if !lambda.contains(&PAdicScaled::zero(mu.p)) {
        return Err(Error::Precondition("Lambda must contain 0".into()));
    }
    let s = mu.scale;
    let gamma = mu.gamma;
    let (lo, hi) = window.unwrap_or((-s, gamma as i64 - 1 - s));
    let i_cls = zero_spheres_discrete(lambda, Some((lo, hi)))?;
    let k_cls = zero_spheres_autocorr(mu, Some((lo, hi)))?;
    let mut witness: Option<String> = None;
    let note = |w: String, slot: &mut Option<String>| {
        if slot.is_none() {
            *slot = Some(w);
        }
    };

    let mut masses = mu.masses.values();
    let first = masses.next().expect("nonempty support").clone();
    let constant_masses = masses.all(|m| *m == first);
    if !constant_masses {
        note("masses on the support are not constant".into(), &mut witness);
    }

    let tree = trees::recover_structure(&mu.support(), mu.p, gamma)?;
    let homogeneous_support = match &tree {
        None => {
            note("support is not p-homogeneous".into(), &mut witness);
            false
        }
        Some(t) => {
            let singles = t.single_levels();
            let mut ok = true;
            for n in lo..=hi {
                let level = n + s;
                if !(0..gamma as i64).contains(&level) {
                    continue;
                }
                if k_cls.tag(n) != Some(singles.contains(&(level as u32))) {
                    note(format!("K-tag at sphere {n} disagrees with tree level {level}"), &mut witness);
                    ok = false;
                    break;
                }
            }
            ok
        }
    };

    let spectrum_matches_dual = match &tree {
        None => false,
        Some(t) => {
            let expected = t
                .dual()
                .leaves()
                .into_iter()
                .map(|d| Ok(PAdicScaled::integer(mu.p, d)?.scale_by_p_pow(s - gamma as i64)))
                .collect::<Result<Vec<_>>>()?;
            let expected = DiscreteSetQp::new(mu.p, expected)?;
            let eq = expected == *lambda;
            if !eq {
                note("Lambda differs from the dual-tree spectrum".into(), &mut witness);
            }
            eq
        }
    };

    let mut tags_partition_window = true;
    for n in lo..=hi {
        let i = i_cls.tag(n) == Some(true);
        let k = k_cls.tag(n) == Some(true);
        if i == k {
            note(format!("sphere {n} is tagged {}", if i { "both I and K" } else { "neither I nor K" }), &mut witness);
            tags_partition_window = false;
            break;
        }
    }

    Ok(PipelineReport {
        window: (lo, hi),
        i_tags: i_cls.tagged(),
        k_tags: k_cls.tagged(),
        constant_masses,
        homogeneous_support,
        spectrum_matches_dual,
        tags_partition_window,
        witness,
    })
}
