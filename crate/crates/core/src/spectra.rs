//! Spectral-pair verification over Z/p^g Z via complex Hadamard matrices,
//! and spectrum synthesis/search for finite residue sets.
//!
//! Orthogonality of two rows is decided exactly: the inner product is a sum
//! of p^g-th roots of unity and vanishes iff its exponent-count vector is
//! constant on the progression classes of the top level.

use std::collections::BTreeSet;

use crate::cyclotomic::is_zero_slice;
use crate::error::{Error, Result};
use crate::padic::{check_prime, RootOfUnity};
use crate::trees;

/// Default refusal threshold for exhaustive search; override explicitly.
pub const DEFAULT_SCALE_GUARD: u64 = 81;

/// The matrix (chi(cd))_{c in C, d in D} with pairing e^{2 pi i cd / p^g}.
#[derive(Debug, Clone)]
pub struct CharacterMatrix {
    pub rows: Vec<u64>,
    pub cols: Vec<u64>,
    pub entries: Vec<Vec<RootOfUnity>>,
    pub p: u64,
    pub gamma: u32,
}

pub fn character_matrix(
    row_set: &BTreeSet<u64>,
    col_set: &BTreeSet<u64>,
    p: u64,
    gamma: u32,
) -> Result<CharacterMatrix> {
    check_prime(p)?;
    let modulus = p.pow(gamma) as i64;
    let rows: Vec<u64> = row_set.iter().copied().collect();
    let cols: Vec<u64> = col_set.iter().copied().collect();
    let entries = rows
        .iter()
        .map(|&c| {
            cols.iter()
                .map(|&d| RootOfUnity::new(p, gamma, ((c as i64) * (d as i64)) % modulus))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CharacterMatrix {
        rows,
        cols,
        entries,
        p,
        gamma,
    })
}

/// Exact test that sum_{d in D} w^{t d} = 0 in Z[w_{p^g}].
fn difference_vanishes(diffs_target: &[u64], t: u64, p: u64, gamma: u32) -> bool {
    let m = p.pow(gamma);
    let mut counts = vec![0i64; m as usize];
    for &d in diffs_target {
        counts[((t % m) * (d % m) % m) as usize] += 1;
    }
    is_zero_slice(p, gamma, &counts)
}

/// True iff (chi(cd)) is a complex Hadamard matrix: all off-diagonal row
/// inner products vanish exactly and #C = #D.
pub fn is_hadamard(c_set: &BTreeSet<u64>, d_set: &BTreeSet<u64>, p: u64, gamma: u32) -> Result<bool> {
    check_prime(p)?;
    if c_set.len() != d_set.len() {
        return Err(Error::DimensionMismatch(c_set.len(), d_set.len()));
    }
    let m = p.pow(gamma);
    let d_vec: Vec<u64> = d_set.iter().copied().collect();
    let c_vec: Vec<u64> = c_set.iter().copied().collect();
    for (i, &c1) in c_vec.iter().enumerate() {
        for &c2 in &c_vec[i + 1..] {
            let t = (c2 + m - c1 % m) % m;
            if !difference_vanishes(&d_vec, t, p, gamma) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// For a p-homogeneous C, the dual-tree leaf set is a spectrum: the pair
/// (C, D) is Hadamard under e^{2 pi i cd / p^g}.
pub fn spectrum_for_homogeneous(c_set: &BTreeSet<u64>, p: u64, gamma: u32) -> Result<BTreeSet<u64>> {
    let tree = trees::recover_structure(c_set, p, gamma)?
        .ok_or_else(|| Error::Precondition("set is not p-homogeneous".into()))?;
    Ok(tree.dual().leaves())
}

/// Backtracking search for an orthogonal character family of size #C.
/// Deterministic: returns the lexicographically smallest D containing 0, or
/// None. Guarded by `scale_guard` on p^g.
pub fn spectrum_search(
    c_set: &BTreeSet<u64>,
    p: u64,
    gamma: u32,
    scale_guard: u64,
) -> Result<Option<BTreeSet<u64>>> {
    check_prime(p)?;
    let m = p.pow(gamma);
    if m > scale_guard {
        return Err(Error::ScaleGuard {
            size: m,
            guard: scale_guard,
        });
    }
    if c_set.len() > m as usize {
        return Err(Error::Precondition(format!(
            "#C = {} exceeds the group order {m}",
            c_set.len()
        )));
    }
    let c_vec: Vec<u64> = c_set.iter().copied().collect();
    // orthogonality of d, d' depends only on t = d - d' mod p^g
    let vanish: Vec<bool> = (0..m)
        .map(|t| t != 0 && difference_vanishes(&c_vec, t, p, gamma))
        .collect();
    Ok(search_clique(&vanish, m, c_set.len()))
}

/// Finds the lexicographically smallest size-k subset of Z/m containing 0
/// whose pairwise differences all lie in the symmetric set `vanish`.
pub(crate) fn search_clique(vanish: &[bool], m: u64, k: usize) -> Option<BTreeSet<u64>> {
    if k == 0 {
        return None;
    }
    let mut chosen: Vec<u64> = vec![0];
    if k == 1 {
        return Some(chosen.into_iter().collect());
    }
    // DFS taking the smallest admissible next element first: the first
    // complete solution is the lexicographic minimum.
    fn dfs(vanish: &[bool], m: u64, k: usize, chosen: &mut Vec<u64>, next: u64) -> bool {
        if chosen.len() == k {
            return true;
        }
        for d in next..m {
            if chosen
                .iter()
                .all(|&e| vanish[((d + m - e) % m) as usize])
            {
                chosen.push(d);
                if dfs(vanish, m, k, chosen, d + 1) {
                    return true;
                }
                chosen.pop();
            }
        }
        false
    }
    if dfs(vanish, m, k, &mut chosen, 1) {
        Some(chosen.into_iter().collect())
    } else {
        None
    }
}
