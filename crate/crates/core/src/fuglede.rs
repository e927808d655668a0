//! Finite Fuglede laboratory for Z/p^g Z: tiling complements, spectra, and
//! p-homogeneity, decided by three independent procedures so that the known
//! equivalence acts as a cross-check of the whole character machinery.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cyclotomic::is_zero_slice;
use crate::error::{Error, Result};
use crate::padic::check_prime;
use crate::spectra;

/// Largest group handled by the bitmask representation.
const MASK_GUARD: u64 = 128;

fn group_order(p: u64, gamma: u32) -> Result<u64> {
    check_prime(p)?;
    let m = p
        .checked_pow(gamma)
        .filter(|&m| m <= MASK_GUARD)
        .ok_or(Error::ScaleGuard {
            size: p.saturating_pow(gamma),
            guard: MASK_GUARD,
        })?;
    Ok(m)
}

fn mask_of(c: &BTreeSet<u64>, m: u64) -> Result<u128> {
    let mut mask = 0u128;
    for &x in c {
        if x >= m {
            return Err(Error::ResidueOutOfRange {
                residue: x,
                modulus: m,
            });
        }
        mask |= 1u128 << x;
    }
    if mask == 0 {
        return Err(Error::EmptySet);
    }
    Ok(mask)
}

fn mask_elements(mask: u128) -> Vec<u64> {
    (0..128).filter(|&i| mask >> i & 1 == 1).collect()
}

fn rotate(mask: u128, t: u64, m: u64) -> u128 {
    let full = if m == 128 { u128::MAX } else { (1u128 << m) - 1 };
    if t == 0 {
        return mask & full;
    }
    ((mask << t) | (mask >> (m - t))) & full
}

/// Lexicographically smallest T with C + T = Z/p^g Z (every element reached
/// exactly once), or None. Sizes not dividing the group order are rejected
/// at once since #C * #T = p^g is forced.
pub fn is_tile(c: &BTreeSet<u64>, p: u64, gamma: u32) -> Result<Option<BTreeSet<u64>>> {
    let m = group_order(p, gamma)?;
    let mask = mask_of(c, m)?;
    Ok(tile_mask(mask, m).map(|t| mask_elements(t).into_iter().collect()))
}

fn tile_mask(cmask: u128, m: u64) -> Option<u128> {
    let k = cmask.count_ones() as u64;
    if m % k != 0 {
        return None;
    }
    let shifts: Vec<u128> = (0..m).map(|t| rotate(cmask, t, m)).collect();
    let full = if m == 128 { u128::MAX } else { (1u128 << m) - 1 };
    // DFS always covering the lowest uncovered element; taking the smallest
    // admissible shift first makes the first solution the lex minimum.
    fn dfs(shifts: &[u128], full: u128, covered: u128, chosen: u128) -> Option<u128> {
        if covered == full {
            return Some(chosen);
        }
        let e = covered.trailing_ones();
        for (t, &s) in shifts.iter().enumerate() {
            if s >> e & 1 == 1 && s & covered == 0 {
                if let Some(sol) = dfs(shifts, full, covered | s, chosen | (1u128 << t)) {
                    return Some(sol);
                }
            }
        }
        None
    }
    dfs(&shifts, full, 0, 0)
}

/// Some(D) iff the characters indexed by D form an orthogonal family of
/// size #C in L^2 of the counting measure on C.
pub fn is_spectral_set(
    c: &BTreeSet<u64>,
    p: u64,
    gamma: u32,
    scale_guard: u64,
) -> Result<Option<BTreeSet<u64>>> {
    spectra::spectrum_search(c, p, gamma, scale_guard)
}

/// Same decision via bitmask, reusing scratch buffers across scan calls.
fn spectral_mask(mask: u128, p: u64, gamma: u32, m: u64, counts: &mut [i64], vanish: &mut [bool]) -> bool {
    let cs = mask_elements(mask);
    vanish[0] = false;
    for t in 1..m {
        counts.iter_mut().for_each(|x| *x = 0);
        for &c in &cs {
            counts[(t * c % m) as usize] += 1;
        }
        vanish[t as usize] = is_zero_slice(p, gamma, counts);
    }
    spectra::search_clique(vanish, m, cs.len()).is_some()
}

/// p-homogeneity of the residue set, level by level: at every depth all
/// prefixes must branch fully or all must have a single child.
fn homogeneous_mask(mask: u128, p: u64, gamma: u32) -> bool {
    let mut groups: Vec<Vec<u64>> = vec![mask_elements(mask)];
    let mut pw = 1u64;
    for _ in 0..gamma {
        let mut next: Vec<Vec<u64>> = Vec::with_capacity(groups.len() * p as usize);
        let mut level_branching: Option<bool> = None;
        for g in &groups {
            let mut children: Vec<Vec<u64>> = vec![Vec::new(); p as usize];
            for &c in g {
                children[((c / pw) % p) as usize].push(c);
            }
            let nonempty = children.iter().filter(|ch| !ch.is_empty()).count();
            let branching = match nonempty {
                1 => false,
                n if n == p as usize => true,
                _ => return false,
            };
            match level_branching {
                None => level_branching = Some(branching),
                Some(b) if b != branching => return false,
                Some(_) => {}
            }
            next.extend(children.into_iter().filter(|ch| !ch.is_empty()));
        }
        groups = next;
        pw *= p;
    }
    true
}

#[derive(Debug, Clone, Serialize)]
pub enum SubsetSource {
    /// All nonempty subsets; group order capped at 16.
    Exhaustive,
    /// All subsets of size a power of p; order capped at 27.
    PPowerSizes,
    /// Uniformly random nonempty subsets, reproducible from the seed.
    Random { count: u64, seed: u64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanCase {
    pub mask_hex: String,
    pub elements: Vec<u64>,
    pub tile: bool,
    pub spectral: bool,
    pub homogeneous: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanReport {
    pub p: u64,
    pub gamma: u32,
    pub source: SubsetSource,
    pub total: u64,
    pub tiles: u64,
    pub spectral: u64,
    pub homogeneous: u64,
    pub all_agree: bool,
    /// subsets where the three predicates disagree (a bug, not a discovery)
    pub counterexamples: Vec<ScanCase>,
}

/// Runs the three predicates over a family of subsets of Z/p^g Z and
/// reports whether tile, spectral and homogeneous always coincide.
pub fn equivalence_scan(p: u64, gamma: u32, source: SubsetSource) -> Result<ScanReport> {
    let m = group_order(p, gamma)?;
    match source {
        SubsetSource::Exhaustive if m > 16 => {
            return Err(Error::ScaleGuard { size: m, guard: 16 })
        }
        SubsetSource::PPowerSizes if m > 27 => {
            return Err(Error::ScaleGuard { size: m, guard: 27 })
        }
        _ => {}
    }
    let mut report = ScanReport {
        p,
        gamma,
        source: source.clone(),
        total: 0,
        tiles: 0,
        spectral: 0,
        homogeneous: 0,
        all_agree: true,
        counterexamples: Vec::new(),
    };
    let mut counts = vec![0i64; m as usize];
    let mut vanish = vec![false; m as usize];
    let mut visit = |mask: u128, report: &mut ScanReport| {
        let tile = tile_mask(mask, m).is_some();
        let spec = spectral_mask(mask, p, gamma, m, &mut counts, &mut vanish);
        let homo = homogeneous_mask(mask, p, gamma);
        report.total += 1;
        report.tiles += tile as u64;
        report.spectral += spec as u64;
        report.homogeneous += homo as u64;
        if tile != spec || spec != homo {
            report.all_agree = false;
            if report.counterexamples.len() < 32 {
                report.counterexamples.push(ScanCase {
                    mask_hex: format!("{mask:x}"),
                    elements: mask_elements(mask),
                    tile,
                    spectral: spec,
                    homogeneous: homo,
                });
            }
        }
    };
    match source {
        SubsetSource::Exhaustive => {
            for mask in 1..(1u128 << m) {
                visit(mask, &mut report);
            }
        }
        SubsetSource::PPowerSizes => {
            let mut size = 1u64;
            while size <= m {
                for mask in subsets_of_size(m, size as u32) {
                    visit(mask, &mut report);
                }
                size *= p;
            }
        }
        SubsetSource::Random { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let full = if m == 128 { u128::MAX } else { (1u128 << m) - 1 };
            let mut done = 0;
            while done < count {
                let mask = ((rng.gen::<u64>() as u128) << 64 | rng.gen::<u64>() as u128) & full;
                if mask == 0 {
                    continue;
                }
                visit(mask, &mut report);
                done += 1;
            }
        }
    }
    Ok(report)
}

/// All size-k bitmasks over m bits, ascending (Gosper's hack).
fn subsets_of_size(m: u64, k: u32) -> impl Iterator<Item = u128> {
    let limit = 1u128 << m;
    let mut cur = if k == 0 { 0 } else { (1u128 << k) - 1 };
    let mut done = k == 0;
    std::iter::from_fn(move || {
        if done || cur >= limit {
            return None;
        }
        let out = cur;
        // Gosper: next larger integer with the same popcount
        let c = cur & cur.wrapping_neg();
        let r = cur + c;
        cur = if c == 0 {
            limit
        } else {
            (((r ^ cur) >> 2) / c) | r
        };
        if out >= limit {
            done = true;
            return None;
        }
        Some(out)
    })
}
