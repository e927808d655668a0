//! Finite p-homogeneous trees: construction, recognition, extension,
//! dualization and DOT rendering.
//!
//! A depth-g tree over Z/p^g Z branches fully at the levels in I and has a
//! single (prefix-dependent) child at the levels in J. Digits are indexed
//! least-significant first: level i carries the coefficient of p^i.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::measures::DiscreteSetQp;
use crate::padic::check_prime;

/// A (p, gamma, I, J, choice) description of a p-homogeneous tree.
/// `choice` maps a prefix (digits t_0..t_{j-1} at a J-level j) to the single
/// digit taken there.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HomoTree {
    p: u64,
    gamma: u32,
    branching: BTreeSet<u32>,
    choice: BTreeMap<Vec<u8>, u8>,
}

impl HomoTree {
    /// Validates that `choice` is total on reachable J-prefixes and that all
    /// digits are in range.
    pub fn new(
        p: u64,
        gamma: u32,
        branching: BTreeSet<u32>,
        choice: BTreeMap<Vec<u8>, u8>,
    ) -> Result<Self> {
        check_prime(p)?;
        if gamma == 0 {
            return Err(Error::Precondition("depth must be at least 1".into()));
        }
        if let Some(&lvl) = branching.iter().find(|&&i| i >= gamma) {
            return Err(Error::Precondition(format!(
                "branching level {lvl} out of range 0..{gamma}"
            )));
        }
        for (_, &d) in &choice {
            if d as u64 >= p {
                return Err(Error::InvalidDigit { digit: d, p });
            }
        }
        let t = HomoTree {
            p,
            gamma,
            branching,
            choice,
        };
        // walk reachable prefixes to confirm totality
        t.walk_leaves(&mut |_| {})?;
        Ok(t)
    }

    /// All-zero choice map on every J-level.
    pub fn with_zero_choice(p: u64, gamma: u32, branching: BTreeSet<u32>) -> Result<Self> {
        check_prime(p)?;
        let mut choice = BTreeMap::new();
        // collect reachable prefixes level by level
        let mut prefixes: Vec<Vec<u8>> = vec![vec![]];
        for level in 0..gamma {
            let mut next = Vec::new();
            for pre in &prefixes {
                if branching.contains(&level) {
                    for d in 0..p as u8 {
                        let mut e = pre.clone();
                        e.push(d);
                        next.push(e);
                    }
                } else {
                    choice.insert(pre.clone(), 0u8);
                    let mut e = pre.clone();
                    e.push(0);
                    next.push(e);
                }
            }
            prefixes = next;
        }
        HomoTree::new(p, gamma, branching, choice)
    }

    pub fn prime(&self) -> u64 {
        self.p
    }
    pub fn depth(&self) -> u32 {
        self.gamma
    }

    /// Levels with full branching (the set I).
    pub fn branching_levels(&self) -> &BTreeSet<u32> {
        &self.branching
    }

    /// Levels with a single child (the set J).
    pub fn single_levels(&self) -> BTreeSet<u32> {
        (0..self.gamma)
            .filter(|i| !self.branching.contains(i))
            .collect()
    }

    pub fn choice(&self) -> &BTreeMap<Vec<u8>, u8> {
        &self.choice
    }

    fn walk_leaves(&self, f: &mut impl FnMut(&[u8])) -> Result<()> {
        let mut stack: Vec<Vec<u8>> = vec![vec![]];
        while let Some(pre) = stack.pop() {
            let level = pre.len() as u32;
            if level == self.gamma {
                f(&pre);
                continue;
            }
            if self.branching.contains(&level) {
                for d in 0..self.p as u8 {
                    let mut e = pre.clone();
                    e.push(d);
                    stack.push(e);
                }
            } else {
                let &d = self
                    .choice
                    .get(&pre)
                    .ok_or_else(|| Error::MissingChoice(pre.clone()))?;
                let mut e = pre;
                e.push(d);
                stack.push(e);
            }
        }
        Ok(())
    }

    /// The p^{#I} boundary points sum t_i p^i, as residues mod p^gamma.
    pub fn leaves(&self) -> BTreeSet<u64> {
        let mut out = BTreeSet::new();
        self.walk_leaves(&mut |digits| {
            let mut v = 0u64;
            for (i, &d) in digits.iter().enumerate() {
                v += d as u64 * (self.p).pow(i as u32);
            }
            out.insert(v);
        })
        .expect("choice totality checked at construction");
        out
    }

    /// The dual tree: branching levels I' = { gamma-1-i : i in I }, all-zero
    /// choice. Pairing leaves(self) with leaves(dual) under e^{2 pi i cd/p^g}
    /// yields a complex Hadamard matrix.
    pub fn dual(&self) -> HomoTree {
        let branching = self
            .branching
            .iter()
            .map(|&i| self.gamma - 1 - i)
            .collect();
        HomoTree::with_zero_choice(self.p, self.gamma, branching)
            .expect("dual levels are in range")
    }
}

fn digits_of(mut c: u64, p: u64, gamma: u32) -> Vec<u8> {
    (0..gamma)
        .map(|_| {
            let d = (c % p) as u8;
            c /= p;
            d
        })
        .collect()
}

/// Recognizes whether a set of residues mod p^gamma is p-homogeneous, and if
/// so recovers the tree description. A level goes into I when every node at
/// that depth has exactly p children, into J when every node has exactly one;
/// mixed branching means the set is not homogeneous.
pub fn recover_structure(set: &BTreeSet<u64>, p: u64, gamma: u32) -> Result<Option<HomoTree>> {
    check_prime(p)?;
    if gamma == 0 {
        return Err(Error::Precondition("depth must be at least 1".into()));
    }
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let modulus = (p as u64).checked_pow(gamma).ok_or(Error::ScaleGuard {
        size: u64::MAX,
        guard: u64::MAX,
    })?;
    for &c in set {
        if c >= modulus {
            return Err(Error::ResidueOutOfRange {
                residue: c,
                modulus,
            });
        }
    }
    let digit_vecs: Vec<Vec<u8>> = set.iter().map(|&c| digits_of(c, p, gamma)).collect();
    let mut branching = BTreeSet::new();
    let mut choice = BTreeMap::new();
    for level in 0..gamma as usize {
        // children per depth-`level` prefix
        let mut children: BTreeMap<&[u8], BTreeSet<u8>> = BTreeMap::new();
        for dv in &digit_vecs {
            children.entry(&dv[..level]).or_default().insert(dv[level]);
        }
        let counts: BTreeSet<usize> = children.values().map(|s| s.len()).collect();
        if counts == BTreeSet::from([p as usize]) {
            branching.insert(level as u32);
        } else if counts == BTreeSet::from([1]) {
            for (pre, ds) in children {
                choice.insert(pre.to_vec(), *ds.iter().next().unwrap());
            }
        } else {
            return Ok(None);
        }
    }
    let tree = HomoTree::new(p, gamma, branching, choice)?;
    debug_assert_eq!(&tree.leaves(), set);
    Ok(Some(tree))
}

/// The (n, gamma, I, J) quadruple describing a finite subset of Q_p whose
/// image under scaling by p^n and reduction mod p^gamma is p-homogeneous.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QpTreeStructure {
    pub scale: i64,
    pub depth: u32,
    pub branching: BTreeSet<u32>,
    pub tree: HomoTree,
}

impl QpTreeStructure {
    pub fn single_levels(&self) -> BTreeSet<u32> {
        (0..self.depth)
            .filter(|i| !self.branching.contains(i))
            .collect()
    }
}

/// Computes the minimal scale n with p^n C inside Z_p and the minimal depth
/// gamma separating all points, then reduces and recognizes.
pub fn qp_structure(set: &DiscreteSetQp) -> Result<Option<QpTreeStructure>> {
    let p = set.prime();
    let elements = set.elements();
    if elements.len() < 2 {
        return Err(Error::Precondition(
            "need at least two points to derive a structure".into(),
        ));
    }
    // minimal n with p^n x in Z_p for all x: n = -min v_p(x)
    let min_val = elements
        .iter()
        .filter_map(|x| x.valuation())
        .min()
        .ok_or(Error::EmptySet)?;
    let n = -min_val;
    // minimal depth separating all scaled points: v_p(p^n(x-y)) < gamma
    let mut max_diff_val = i64::MIN;
    for (i, x) in elements.iter().enumerate() {
        for y in &elements[i + 1..] {
            let v = x.sub(y)?.valuation().expect("distinct elements");
            max_diff_val = max_diff_val.max(v + n);
        }
    }
    let gamma = (max_diff_val + 1).max(1) as u32;
    let modulus = (p).pow(gamma);
    let mut residues = BTreeSet::new();
    for x in elements {
        let scaled = x.scale_by_p_pow(n);
        // residue mod p^gamma of a p-adic integer
        let frac = scaled.scale_by_p_pow(-(gamma as i64)).frac_part();
        let r = (frac * num_rational::BigRational::from_integer(num_bigint::BigInt::from(modulus)))
            .to_integer();
        let r: u64 = r.try_into().expect("residue in range");
        residues.insert(r);
    }
    if residues.len() != elements.len() {
        return Ok(None); // collision: depth insufficient only if points coincide mod p^gamma
    }
    Ok(recover_structure(&residues, p, gamma)?.map(|tree| QpTreeStructure {
        scale: n,
        depth: gamma,
        branching: tree.branching_levels().clone(),
        tree,
    }))
}

/// The paper's extension: an (n, g, I, J)-structure is also an
/// (n+k, g+k, I+k, (J+k) u {0..k-1})-structure for the same set.
pub fn extend_structure(s: &QpTreeStructure, k: u32) -> QpTreeStructure {
    if k == 0 {
        return s.clone();
    }
    let branching: BTreeSet<u32> = s.branching.iter().map(|&i| i + k).collect();
    // realized set gains k leading J-levels whose digits are all zero after
    // the extra scaling by p^k
    let mut choice: BTreeMap<Vec<u8>, u8> = BTreeMap::new();
    let mut zero_prefix = Vec::new();
    for _ in 0..k {
        choice.insert(zero_prefix.clone(), 0);
        zero_prefix.push(0);
    }
    for (pre, &d) in s.tree.choice() {
        let mut key = zero_prefix.clone();
        key.extend_from_slice(pre);
        choice.insert(key, d);
    }
    let tree = HomoTree::new(s.tree.prime(), s.depth + k, branching.clone(), choice)
        .expect("extension preserves validity");
    QpTreeStructure {
        scale: s.scale + k as i64,
        depth: s.depth + k,
        branching,
        tree,
    }
}

/// DOT digraph of the prefix tree of a residue set. Node names are the
/// prefix digit strings (root is "r"); leaves carry the residue labels.
pub fn to_dot(set: &BTreeSet<u64>, p: u64, gamma: u32) -> Result<String> {
    check_prime(p)?;
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let modulus = (p).pow(gamma);
    for &c in set {
        if c >= modulus {
            return Err(Error::ResidueOutOfRange {
                residue: c,
                modulus,
            });
        }
    }
    let name = |digits: &[u8]| {
        if digits.is_empty() {
            "r".to_string()
        } else {
            let s: String = digits.iter().map(|d| d.to_string()).collect();
            format!("n{s}")
        }
    };
    let mut out = String::from("digraph tree {\n  rankdir=TB;\n  r [label=\"\", shape=point];\n");
    let mut edges = BTreeSet::new();
    let mut nodes = BTreeMap::new();
    for &c in set {
        let digits = digits_of(c, p, gamma);
        for i in 0..gamma as usize {
            let parent = name(&digits[..i]);
            let child = name(&digits[..=i]);
            let label = if i + 1 == gamma as usize {
                format!("{c}")
            } else {
                format!("{}", digits[i])
            };
            nodes.insert(child.clone(), label);
            edges.insert((parent, child));
        }
    }
    for (node, label) in &nodes {
        out.push_str(&format!("  {node} [label=\"{label}\"];\n"));
    }
    for (a, b) in &edges {
        out.push_str(&format!("  {a} -> {b};\n"));
    }
    out.push_str("}\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::PAdicScaled;

    fn figure3_c() -> BTreeSet<u64> {
        [0u64, 4, 8, 9, 13, 17, 18, 22, 26].into_iter().collect()
    }

    #[test]
    fn leaves_examples() {
        let t = HomoTree::with_zero_choice(3, 1, BTreeSet::from([0])).unwrap();
        assert_eq!(t.leaves(), BTreeSet::from([0, 1, 2]));

        // Figure 3's C = {0,4,8,9,13,17,18,22,26}: I = {0,2}, J = {1},
        // choice at level 1 is t_1 = t_0 (prefix [d] -> d).
        let choice: BTreeMap<Vec<u8>, u8> = (0..3u8).map(|d| (vec![d], d)).collect();
        let t = HomoTree::new(3, 3, BTreeSet::from([0, 2]), choice).unwrap();
        assert_eq!(t.leaves(), figure3_c());

        let t = HomoTree::with_zero_choice(3, 3, BTreeSet::from([1])).unwrap();
        assert_eq!(t.leaves(), BTreeSet::from([0, 3, 6]));
    }

    #[test]
    fn leaf_count_is_p_pow_i() {
        let t = HomoTree::with_zero_choice(2, 4, BTreeSet::from([1, 3])).unwrap();
        assert_eq!(t.leaves().len(), 4);
    }

    #[test]
    fn recover_examples() {
        let t = recover_structure(&figure3_c(), 3, 3).unwrap().unwrap();
        assert_eq!(t.branching_levels(), &BTreeSet::from([0, 2]));
        assert_eq!(t.single_levels(), BTreeSet::from([1]));

        assert!(recover_structure(&BTreeSet::from([0, 1]), 3, 2)
            .unwrap()
            .is_none());

        let t = recover_structure(&BTreeSet::from([0]), 2, 2).unwrap().unwrap();
        assert_eq!(t.branching_levels(), &BTreeSet::new());
        assert_eq!(t.single_levels(), BTreeSet::from([0, 1]));
    }

    #[test]
    fn qp_structure_examples() {
        let set = DiscreteSetQp::new(
            3,
            vec![
                PAdicScaled::zero(3),
                PAdicScaled::new(3, 1, 1).unwrap(),
                PAdicScaled::new(3, 2, 1).unwrap(),
            ],
        )
        .unwrap();
        let s = qp_structure(&set).unwrap().unwrap();
        assert_eq!((s.scale, s.depth), (1, 1));
        assert_eq!(s.branching, BTreeSet::from([0]));

        // {0, 9} with p=3: scaled set {0,1} has 2 of 3 children at level 0
        let set = DiscreteSetQp::new(
            3,
            vec![PAdicScaled::zero(3), PAdicScaled::integer(3, 9).unwrap()],
        )
        .unwrap();
        assert!(qp_structure(&set).unwrap().is_none());
    }

    #[test]
    fn extend_examples() {
        let tree = HomoTree::with_zero_choice(3, 1, BTreeSet::from([0])).unwrap();
        let s = QpTreeStructure {
            scale: 0,
            depth: 1,
            branching: BTreeSet::from([0]),
            tree,
        };
        let e = extend_structure(&s, 1);
        assert_eq!((e.scale, e.depth), (1, 2));
        assert_eq!(e.branching, BTreeSet::from([1]));
        assert_eq!(e.single_levels(), BTreeSet::from([0]));
        assert_eq!(extend_structure(&s, 0), s);
    }

    #[test]
    fn dual_examples() {
        let t = HomoTree::with_zero_choice(3, 2, BTreeSet::from([1])).unwrap();
        assert_eq!(t.leaves(), BTreeSet::from([0, 3, 6]));
        let d = t.dual();
        assert_eq!(d.branching_levels(), &BTreeSet::from([0]));
        assert_eq!(d.leaves(), BTreeSet::from([0, 1, 2]));
        // involution on the branching data
        assert_eq!(d.dual().branching_levels(), t.branching_levels());

        let t = HomoTree::with_zero_choice(2, 2, BTreeSet::from([0])).unwrap();
        assert_eq!(t.dual().leaves(), BTreeSet::from([0, 2]));

        let t = HomoTree::with_zero_choice(3, 1, BTreeSet::from([0])).unwrap();
        assert_eq!(t.dual().branching_levels(), &BTreeSet::from([0]));
    }

    #[test]
    fn dot_output() {
        let dot = to_dot(&BTreeSet::from([0]), 2, 1).unwrap();
        assert!(dot.contains("r -> n0"));
        assert!(to_dot(&BTreeSet::new(), 2, 1).is_err());
        let dot = to_dot(&figure3_c(), 3, 3).unwrap();
        // full/single/full branching: 3 + 3 + 9 edges
        assert_eq!(dot.matches("->").count(), 3 + 3 + 9);
    }
}
