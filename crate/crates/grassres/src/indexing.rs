//! Combinatorics of Plücker indices: enumeration, sign normalization,
//! ranks, the block order, and the split into basic and primary indices.
//!
//! A Plücker index is a strictly increasing `d`-tuple with entries in
//! `1..=n`. Everything downstream (relations, the binomial model, the
//! blowup atlas) is indexed by this combinatorics, so the conventions are
//! centralized here: unsorted tuples only enter through [`normalize`],
//! which returns the sorted index together with the sign of the sorting
//! permutation, or the formal zero when an entry repeats.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;
use thiserror::Error;

/// A strictly increasing `d`-tuple of integers in `[1, n]`.
///
/// The tuple is stored sorted; callers with unsorted data must go through
/// [`normalize`] so that sign bookkeeping stays in one place.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PluckerIndex(pub Vec<u8>);

impl PluckerIndex {
    /// Builds an index from entries that are already strictly increasing.
    ///
    /// # Panics
    /// Panics if the entries are not strictly increasing or contain 0.
    pub fn new(entries: &[u8]) -> Self {
        assert!(
            entries.windows(2).all(|w| w[0] < w[1]) && entries.iter().all(|&e| e >= 1),
            "PluckerIndex entries must be strictly increasing and >= 1, got {entries:?}"
        );
        PluckerIndex(entries.to_vec())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, e: u8) -> bool {
        self.0.contains(&e)
    }

    /// Set difference `self \ other`, preserving increasing order.
    pub fn minus(&self, other: &PluckerIndex) -> Vec<u8> {
        self.0.iter().copied().filter(|e| !other.contains(*e)).collect()
    }

    /// Set intersection `self ∩ other`, in increasing order.
    pub fn meet(&self, other: &PluckerIndex) -> Vec<u8> {
        self.0.iter().copied().filter(|e| other.contains(*e)).collect()
    }
}

impl fmt::Debug for PluckerIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self)
    }
}

impl fmt::Display for PluckerIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Entries are single digits for all desk-scale (d, n); print them
        // juxtaposed when possible, comma-separated otherwise.
        if self.0.iter().all(|&e| e <= 9) {
            for e in &self.0 {
                write!(f, "{e}")?;
            }
            Ok(())
        } else {
            let parts: Vec<String> = self.0.iter().map(|e| e.to_string()).collect();
            write!(f, "{}", parts.join(","))
        }
    }
}

/// The result of sign-normalizing a raw tuple: either a signed sorted
/// index, or the formal zero (repeated entries).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SignedIndex {
    Zero,
    Signed { index: PluckerIndex, sign: i8 },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IndexError {
    #[error("invalid parameters: require 1 <= d < n, got d={d}, n={n}")]
    InvalidParameters { d: usize, n: usize },
    #[error("entry {entry} out of range [1, {n}]")]
    InvalidEntry { entry: u8, n: u8 },
}

/// Enumerates all `C(n, d)` Plücker indices for `(d, n)` in lexicographic
/// order.
pub fn enumerate_indices(d: usize, n: usize) -> Result<Vec<PluckerIndex>, IndexError> {
    if d < 1 || d >= n || n > u8::MAX as usize {
        return Err(IndexError::InvalidParameters { d, n });
    }
    let mut out = Vec::new();
    let mut cur: Vec<u8> = (1..=d as u8).collect();
    loop {
        out.push(PluckerIndex(cur.clone()));
        // Advance to the next lexicographic d-subset of [1, n].
        let mut i = d;
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            if cur[i] < (n - (d - 1 - i)) as u8 {
                cur[i] += 1;
                for j in i + 1..d {
                    cur[j] = cur[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Sorts a raw tuple and reports the sign of the sorting permutation, or
/// the formal zero when an entry repeats.
pub fn normalize(raw: &[u8], n: u8) -> Result<SignedIndex, IndexError> {
    for &e in raw {
        if e < 1 || e > n {
            return Err(IndexError::InvalidEntry { entry: e, n });
        }
    }
    let mut v = raw.to_vec();
    // Count inversions with a quadratic pass; tuples are tiny.
    let mut inversions = 0usize;
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            match v[i].cmp(&v[j]) {
                Ordering::Equal => return Ok(SignedIndex::Zero),
                Ordering::Greater => inversions += 1,
                Ordering::Less => {}
            }
        }
    }
    v.sort_unstable();
    Ok(SignedIndex::Signed {
        index: PluckerIndex(v),
        sign: if inversions % 2 == 0 { 1 } else { -1 },
    })
}

/// The rank of `u` relative to the chart index `m`: `|u \ m| - 2`.
///
/// Primary indices have rank >= 0; basic indices (and `m` itself) have
/// rank -1 (or -2 for `u = m`).
pub fn m_rank(u: &PluckerIndex, m: &PluckerIndex) -> i32 {
    u.minus(m).len() as i32 - 2
}

/// The indices `u` with `|u \ m| >= 2`, i.e. those whose Plücker variable
/// is the leading variable of a primary relation on the chart of `m`.
/// Sorted by [`order_wp`]; the cardinality is `C(n,d) - 1 - d(n-d)`.
pub fn primary_index_set(d: usize, n: usize, m: &PluckerIndex) -> Result<Vec<PluckerIndex>, IndexError> {
    let all = enumerate_indices(d, n)?;
    let mut prim: Vec<PluckerIndex> = all.into_iter().filter(|u| m_rank(u, m) >= 0).collect();
    prim.sort_by(|a, b| order_wp(a, b, m));
    Ok(prim)
}

/// The total block order on `I_{d,n} \ {m}`: first by rank, then by
/// `u \ m` lexicographically, then by `m ∩ u` lexicographically.
pub fn order_wp(u: &PluckerIndex, v: &PluckerIndex, m: &PluckerIndex) -> Ordering {
    m_rank(u, m)
        .cmp(&m_rank(v, m))
        .then_with(|| u.minus(m).cmp(&v.minus(m)))
        .then_with(|| u.meet(m).cmp(&v.meet(m)))
}

/// The basic indices on the chart of `m`: `I_{d,n} \ {m}` minus the
/// primary indices. Their Plücker variables are free coordinates of the
/// Grassmannian chart; the cardinality is `d(n-d)`.
pub fn basic_variables(d: usize, n: usize, m: &PluckerIndex) -> Result<Vec<PluckerIndex>, IndexError> {
    let all = enumerate_indices(d, n)?;
    Ok(all
        .into_iter()
        .filter(|u| u != m && m_rank(u, m) < 0)
        .collect())
}

/// `C(n,d) - 1 - d(n-d)`, the number of primary relations on any chart.
pub fn upsilon(d: usize, n: usize) -> usize {
    let binom = {
        let mut b = 1usize;
        for i in 0..d {
            b = b * (n - i) / (i + 1);
        }
        b
    };
    binom - 1 - d * (n - d)
}
