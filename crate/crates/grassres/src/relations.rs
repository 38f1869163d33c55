//! Plücker relations for a fixed affine chart: the general quadratic
//! relations, the primary family of the chart, their de-homogenizations
//! and linearizations, and the expression of every leading variable as a
//! polynomial in the chart's basic (free) variables.
//!
//! For a chart index `m`, each primary index `u` (i.e. `|u \ m| >= 2`)
//! carries exactly one primary relation whose leading term is `p_m p_u`.
//! Writing `u0 = min(u \ m)` and `u^r = u \ u0`, the relation is
//!
//! ```text
//! F_{m,u} = p_m p_{u^r u0} + Σ_{i=1..d} (-1)^i p_{u^r m_i} p_{u0 (m \ m_i)}
//! ```
//!
//! with repeated-index factors dropped and every factor sign-normalized.
//! The whole relation is then rescaled by ±1 so the leading coefficient is
//! +1. Non-leading terms are stored for `i = d` down to `1`, each pair
//! ordered with the basic factor `p_{u0 (m \ m_i)}` second; this fixes a
//! deterministic enumeration of the non-leading pairs used everywhere
//! downstream.

use crate::indexing::{
    m_rank, normalize, primary_index_set, IndexError, PluckerIndex, SignedIndex,
};
use crate::polyengine::{Monomial, Polynomial, Variable};
use num_bigint::BigInt;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RelationError {
    #[error("index {u} is not primary for the chart of {m}")]
    NotPrimary { m: PluckerIndex, u: PluckerIndex },
    #[error("index tuples ({h}, {k}) do not define a relation: need |k| = |h| + 2")]
    BadPair { h: PluckerIndex, k: PluckerIndex },
    #[error(transparent)]
    Index(#[from] IndexError),
}

/// A primary relation of the chart of `m`, stored as a signed term list.
///
/// `terms[leading_position]` is `(+1, (m, u))`; the remaining terms are
/// quadratic in non-`m` indices, each pair holding a basic index in the
/// second slot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrimaryRelation {
    pub m: PluckerIndex,
    /// The leading index: the relation solves for `x_u` on the chart.
    pub u: PluckerIndex,
    pub terms: Vec<(i8, (PluckerIndex, PluckerIndex))>,
    pub leading_position: usize,
    /// Number of terms minus one.
    pub t_f: usize,
    /// `t_f - 2`, equivalently `|u \ m| - 2`.
    pub rank: i32,
}

impl PrimaryRelation {
    /// The non-leading terms, in storage order.
    pub fn non_leading(&self) -> impl Iterator<Item = &(i8, (PluckerIndex, PluckerIndex))> {
        self.terms
            .iter()
            .enumerate()
            .filter(move |(i, _)| *i != self.leading_position)
            .map(|(_, t)| t)
    }

    /// The homogeneous polynomial `Σ sgn(s) p_{u_s} p_{v_s}` (the leading
    /// term is `p_m p_u`).
    pub fn polynomial(&self) -> Polynomial {
        let mut out = Polynomial::zero();
        for (sign, (a, b)) in &self.terms {
            let mono = Monomial::from_vars([Variable::Pi(a.clone()), Variable::Pi(b.clone())]);
            out = out.add(&Polynomial::monomial(mono, BigInt::from(*sign)));
        }
        out
    }

    /// The de-homogenization on the chart (`p_m = 1`): the leading term
    /// becomes the lone linear variable `x_u`.
    pub fn dehomogenized(&self) -> Polynomial {
        let mut out = Polynomial::zero();
        for (sign, (a, b)) in &self.terms {
            let vars = [a, b]
                .into_iter()
                .filter(|w| **w != self.m)
                .map(|w| Variable::Pi(w.clone()));
            out = out.add(&Polynomial::monomial(
                Monomial::from_vars(vars),
                BigInt::from(*sign),
            ));
        }
        out
    }
}

/// The linearization of a primary relation: one pair variable `x_{(u_s,
/// v_s)}` per term, with the parent's signs. Its leading variable is
/// `x_{(m, u)}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearizedRelation {
    pub terms: Vec<(i8, (PluckerIndex, PluckerIndex))>,
    pub leading: (PluckerIndex, PluckerIndex),
    pub leading_position: usize,
}

impl LinearizedRelation {
    pub fn polynomial(&self) -> Polynomial {
        let mut out = Polynomial::zero();
        for (sign, (a, b)) in &self.terms {
            out = out.add(&Polynomial::monomial(
                Monomial::var(Variable::rho(a.clone(), b.clone())),
                BigInt::from(*sign),
            ));
        }
        out
    }
}

/// Normalizes a raw entry list into a signed sorted index, or `None` for
/// the formal zero.
fn signed_index(raw: &[u8], n: u8) -> Result<Option<(PluckerIndex, i8)>, IndexError> {
    match normalize(raw, n)? {
        SignedIndex::Zero => Ok(None),
        SignedIndex::Signed { index, sign } => Ok(Some((index, sign))),
    }
}

/// The general quadratic relation attached to a `(d-1)`-index `h` and a
/// `(d+1)`-index `k`:
///
/// ```text
/// Σ_{λ=1..d+1} (-1)^{λ-1} p_{h k_λ} p_{k \ k_λ}
/// ```
///
/// with repeated-index terms dropped. The result may be the zero
/// polynomial (e.g. when `h ⊂ k` with `d - 1` overlaps).
pub fn general_relation(
    h: &PluckerIndex,
    k: &PluckerIndex,
    n: u8,
) -> Result<Polynomial, RelationError> {
    if k.len() != h.len() + 2 {
        return Err(RelationError::BadPair { h: h.clone(), k: k.clone() });
    }
    let mut out = Polynomial::zero();
    for (lambda, &kl) in k.0.iter().enumerate() {
        let mut first_raw = h.0.clone();
        first_raw.push(kl);
        let second_raw: Vec<u8> = k.0.iter().copied().filter(|&e| e != kl).collect();
        let (Some((a, sa)), Some((b, sb))) =
            (signed_index(&first_raw, n)?, signed_index(&second_raw, n)?)
        else {
            continue;
        };
        let sign = if lambda % 2 == 0 { 1 } else { -1 } * i32::from(sa) * i32::from(sb);
        out = out.add(&Polynomial::monomial(
            Monomial::from_vars([Variable::Pi(a), Variable::Pi(b)]),
            BigInt::from(sign),
        ));
    }
    Ok(out)
}

/// Builds the primary relation of the chart of `m` with leading index `u`.
///
/// Errors with `NotPrimary` unless `|u \ m| >= 2`.
pub fn primary_relation(
    m: &PluckerIndex,
    u: &PluckerIndex,
    n: u8,
) -> Result<PrimaryRelation, RelationError> {
    if m.len() != u.len() || m_rank(u, m) < 0 {
        return Err(RelationError::NotPrimary { m: m.clone(), u: u.clone() });
    }
    let u_minus_m = u.minus(m);
    let u0 = u_minus_m[0];
    let ur: Vec<u8> = u.0.iter().copied().filter(|&e| e != u0).collect();

    // Sign of presenting the leading term as p_m p_u rather than
    // p_m p_{u^r u0}; it rescales the whole relation so the leading
    // coefficient is +1.
    let mut leading_raw = ur.clone();
    leading_raw.push(u0);
    let (lead_idx, lead_sign) =
        signed_index(&leading_raw, n)?.expect("u has distinct entries");
    debug_assert_eq!(&lead_idx, u);

    let mut terms = vec![(1i8, (m.clone(), u.clone()))];
    for (i, &mi) in m.0.iter().enumerate().rev() {
        let mut first_raw = ur.clone();
        first_raw.push(mi);
        let mut second_raw = vec![u0];
        second_raw.extend(m.0.iter().copied().filter(|&e| e != mi));
        let (Some((a, sa)), Some((b, sb))) =
            (signed_index(&first_raw, n)?, signed_index(&second_raw, n)?)
        else {
            continue; // m_i already occurs in u^r
        };
        let parity: i8 = if (i + 1) % 2 == 0 { 1 } else { -1 };
        terms.push((parity * sa * sb * lead_sign, (a, b)));
    }

    let t_f = terms.len() - 1;
    Ok(PrimaryRelation {
        m: m.clone(),
        u: u.clone(),
        terms,
        leading_position: 0,
        t_f,
        rank: t_f as i32 - 2,
    })
}

/// The full primary family of the chart of `m`, sorted by the block order
/// on leading indices. Its length is `C(n,d) - 1 - d(n-d)`.
pub fn primary_family(d: usize, n: usize, m: &PluckerIndex) -> Result<Vec<PrimaryRelation>, RelationError> {
    primary_index_set(d, n, m)?
        .iter()
        .map(|u| primary_relation(m, u, n as u8))
        .collect()
}

/// Replaces each quadratic term of `f` by the corresponding pair variable,
/// keeping signs and order.
pub fn linearize(f: &PrimaryRelation) -> LinearizedRelation {
    LinearizedRelation {
        terms: f.terms.clone(),
        leading: (f.m.clone(), f.u.clone()),
        leading_position: f.leading_position,
    }
}

/// Expresses `x_u` as a polynomial in the chart's basic variables, valid
/// on the Grassmannian chart of `m`. Basic indices map to themselves; a
/// primary index is solved from its relation, recursing on the rank-
/// reduced first factors of the non-leading terms.
pub fn express_in_basic(
    m: &PluckerIndex,
    u: &PluckerIndex,
    n: u8,
) -> Result<Polynomial, RelationError> {
    let mut cache = BTreeMap::new();
    express_cached(m, u, n, &mut cache)
}

fn express_cached(
    m: &PluckerIndex,
    u: &PluckerIndex,
    n: u8,
    cache: &mut BTreeMap<PluckerIndex, Polynomial>,
) -> Result<Polynomial, RelationError> {
    if m_rank(u, m) < 0 {
        return Ok(Polynomial::var(Variable::Pi(u.clone())));
    }
    if let Some(p) = cache.get(u) {
        return Ok(p.clone());
    }
    let f = primary_relation(m, u, n)?;
    // x_u = -Σ_{s != s_F} sgn(s) x_{u_s} x_{v_s}, with each first factor
    // recursively expressed (second factors are basic by construction).
    let mut out = Polynomial::zero();
    for (sign, (a, b)) in f.non_leading() {
        let first = express_cached(m, a, n, cache)?;
        let second = Polynomial::var(Variable::Pi(b.clone()));
        out = out.sub(&first.mul(&second).scale(&BigInt::from(*sign)));
    }
    cache.insert(u.clone(), out.clone());
    Ok(out)
}
