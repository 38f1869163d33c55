//! The binomial model of the graph closure living over the Grassmannian
//! chart: the substitution homomorphism φ (pair variables to products of
//! Plücker variables), main and residual binomials, quotient-type kernel
//! binomials found by exhaustive search, and the dehomogenized defining
//! system on a standard chart.
//!
//! Every block `k` carries the primary relation `F_k`, one projective
//! factor whose coordinates are the pair variables `x_{(u_s, v_s)}` for
//! `s ∈ S_{F_k}`, and the linear relation `L_{F_k}`. The model is cut out
//! by binomials that φ annihilates together with the `L_{F_k}`.

use crate::indexing::{order_wp, PluckerIndex};
use crate::polyengine::{Monomial, Polynomial, Variable};
use crate::relations::{linearize, primary_family, PrimaryRelation, RelationError};
use num_bigint::BigInt;
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Relation(#[from] RelationError),
    #[error("φ is undefined on exceptional variable {0}")]
    ExceptionalVariable(String),
    #[error("pair ({0}, {1}) is not a coordinate of block {2}")]
    InvalidChart(PluckerIndex, PluckerIndex, usize),
    #[error("ϱ-degree bound {0} exceeds the supported search range")]
    DegreeBound(usize),
}

/// The kind of a model binomial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum BinomialKind {
    /// `x_{(u_s,v_s)} x_{u_F} − x_{(m,u_F)} x_{u_s} x_{v_s}`.
    Main,
    /// `x_{(u_s,v_s)} x_{u_t} x_{v_t} − x_{(u_t,v_t)} x_{u_s} x_{v_s}`.
    Residual,
    /// Pure pair-variable kernel binomials.
    Quotient,
}

/// A difference of two monomials with φ(plus) = φ(minus) on the chart.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Binomial {
    pub kind: BinomialKind,
    /// 1-based block index; `None` for quotient-type binomials, which can
    /// span several blocks.
    pub block: Option<usize>,
    /// `(k, τ)` for main binomials, τ being the position in the block's
    /// τ-order.
    pub main_index: Option<(usize, usize)>,
    pub plus: Monomial,
    pub minus: Monomial,
}

impl Binomial {
    pub fn polynomial(&self) -> Polynomial {
        Polynomial::monomial(self.plus.clone(), BigInt::from(1))
            .add(&Polynomial::monomial(self.minus.clone(), BigInt::from(-1)))
    }

    /// Sets the given variables to 1 in both terms (chart dehomogenization).
    pub fn dehomogenize(&self, units: &BTreeSet<Variable>) -> Binomial {
        let strip = |mon: &Monomial| {
            Monomial(
                mon.0
                    .iter()
                    .filter(|(v, _)| !units.contains(v))
                    .map(|(v, e)| (v.clone(), *e))
                    .collect(),
            )
        };
        Binomial {
            kind: self.kind,
            block: self.block,
            main_index: self.main_index,
            plus: strip(&self.plus),
            minus: strip(&self.minus),
        }
    }
}

/// Replaces every pair variable `x_{(u,v)}` by `x_u · x_v`, keeping
/// Plücker variables fixed. Errors on blowup-stage variables, where no
/// substitution is defined.
pub fn phi(mon: &Monomial) -> Result<Monomial, ModelError> {
    let mut out = Monomial::one();
    for (v, e) in &mon.0 {
        match v {
            Variable::Pi(_) => {
                *out.0.entry(v.clone()).or_insert(0) += e;
            }
            Variable::Rho(u, w) => {
                *out.0.entry(Variable::Pi(u.clone())).or_insert(0) += e;
                *out.0.entry(Variable::Pi(w.clone())).or_insert(0) += e;
            }
            other => return Err(ModelError::ExceptionalVariable(other.to_string())),
        }
    }
    Ok(out)
}

/// φ followed by setting `x_m = 1`: the form in which the model's
/// binomials are genuine kernel elements.
pub fn phi_on_chart(m: &PluckerIndex, mon: &Monomial) -> Result<Monomial, ModelError> {
    let mut out = phi(mon)?;
    out.0.remove(&Variable::Pi(m.clone()));
    Ok(out)
}

/// Compares two non-leading indices of `S_F` in the τ-order: for a rank-0
/// relation, pairs are each sorted by the block order and compared
/// lexicographically; for higher rank, the rank-reduced first factors are
/// compared directly.
fn tau_cmp(
    f: &PrimaryRelation,
    a: &(PluckerIndex, PluckerIndex),
    b: &(PluckerIndex, PluckerIndex),
) -> Ordering {
    if f.rank > 0 {
        order_wp(&a.0, &b.0, &f.m)
    } else {
        let sorted = |p: &(PluckerIndex, PluckerIndex)| {
            if order_wp(&p.0, &p.1, &f.m) == Ordering::Greater {
                (p.1.clone(), p.0.clone())
            } else {
                (p.0.clone(), p.1.clone())
            }
        };
        let (a0, a1) = sorted(a);
        let (b0, b1) = sorted(b);
        order_wp(&a0, &b0, &f.m).then_with(|| order_wp(&a1, &b1, &f.m))
    }
}

/// The non-leading pairs of `F` in the τ-order, signs attached.
pub fn ordered_non_leading(f: &PrimaryRelation) -> Vec<(i8, (PluckerIndex, PluckerIndex))> {
    let mut terms: Vec<_> = f.non_leading().cloned().collect();
    terms.sort_by(|(_, a), (_, b)| tau_cmp(f, a, b));
    terms
}

/// The main binomials of block `k` (1-based), in the τ-order.
pub fn main_binomials(f: &PrimaryRelation, k: usize) -> Vec<Binomial> {
    let lead_rho = Variable::rho(f.m.clone(), f.u.clone());
    ordered_non_leading(f)
        .iter()
        .enumerate()
        .map(|(i, (_, (a, b)))| Binomial {
            kind: BinomialKind::Main,
            block: Some(k),
            main_index: Some((k, i + 1)),
            plus: Monomial::from_vars([
                Variable::rho(a.clone(), b.clone()),
                Variable::Pi(f.u.clone()),
            ]),
            minus: Monomial::from_vars([
                lead_rho.clone(),
                Variable::Pi(a.clone()),
                Variable::Pi(b.clone()),
            ]),
        })
        .collect()
}

/// The residual binomials of block `k`: one per unordered pair of
/// non-leading indices, oriented by the τ-order.
pub fn residual_binomials(f: &PrimaryRelation, k: usize) -> Vec<Binomial> {
    let terms = ordered_non_leading(f);
    let mut out = Vec::new();
    for i in 0..terms.len() {
        for j in i + 1..terms.len() {
            let (_, (us, vs)) = &terms[i];
            let (_, (ut, vt)) = &terms[j];
            out.push(Binomial {
                kind: BinomialKind::Residual,
                block: Some(k),
                main_index: None,
                plus: Monomial::from_vars([
                    Variable::rho(us.clone(), vs.clone()),
                    Variable::Pi(ut.clone()),
                    Variable::Pi(vt.clone()),
                ]),
                minus: Monomial::from_vars([
                    Variable::rho(ut.clone(), vt.clone()),
                    Variable::Pi(us.clone()),
                    Variable::Pi(vs.clone()),
                ]),
            });
        }
    }
    out
}

/// All pair variables of a block, leading pair first, the rest in the
/// τ-order.
pub fn block_pairs(f: &PrimaryRelation) -> Vec<(PluckerIndex, PluckerIndex)> {
    let mut out = vec![(f.m.clone(), f.u.clone())];
    out.extend(ordered_non_leading(f).into_iter().map(|(_, p)| p));
    out
}

/// Exhaustively searches for quotient-type binomials: differences of two
/// coprime square-free pair-variable monomials — at most one variable per
/// block, the same blocks on both sides — with equal φ-images on the
/// chart, up to the given ϱ-degree. The φ-image is additionally required
/// to be square-free.
pub fn kernel_binomials(
    d: usize,
    n: usize,
    m: &PluckerIndex,
    max_rho_degree: usize,
) -> Result<Vec<Binomial>, ModelError> {
    if max_rho_degree > 6 {
        return Err(ModelError::DegreeBound(max_rho_degree));
    }
    let family = primary_family(d, n, m)?;
    let block_vars: Vec<Vec<Variable>> = family
        .iter()
        .map(|f| {
            block_pairs(f)
                .into_iter()
                .map(|(a, b)| Variable::rho(a, b))
                .collect()
        })
        .collect();

    // Bucket candidate monomials by (blocks used, φ-image on the chart).
    let mut buckets: BTreeMap<(Vec<usize>, Monomial), Vec<Monomial>> = BTreeMap::new();
    let mut stack: Vec<(usize, Monomial, Vec<usize>)> =
        vec![(0, Monomial::one(), Vec::new())];
    while let Some((next_block, mon, blocks)) = stack.pop() {
        if blocks.len() >= 2 {
            let image = phi_on_chart(m, &mon)?;
            if image.is_squarefree() {
                buckets
                    .entry((blocks.clone(), image))
                    .or_default()
                    .push(mon.clone());
            }
        }
        if blocks.len() == max_rho_degree {
            continue;
        }
        for k in next_block..block_vars.len() {
            for v in &block_vars[k] {
                let mut ext_blocks = blocks.clone();
                ext_blocks.push(k);
                stack.push((k + 1, mon.mul(&Monomial::var(v.clone())), ext_blocks));
            }
        }
    }

    let mut found = BTreeSet::new();
    for mons in buckets.into_values() {
        for i in 0..mons.len() {
            for j in i + 1..mons.len() {
                if mons[i] != mons[j] && mons[i].gcd(&mons[j]) == Monomial::one() {
                    let (plus, minus) = if mons[i] < mons[j] {
                        (mons[i].clone(), mons[j].clone())
                    } else {
                        (mons[j].clone(), mons[i].clone())
                    };
                    found.insert(Binomial {
                        kind: BinomialKind::Quotient,
                        block: None,
                        main_index: None,
                        plus,
                        minus,
                    });
                }
            }
        }
    }
    Ok(found.into_iter().collect())
}

/// The dehomogenized defining system of the model on a standard chart.
#[derive(Clone, Debug)]
pub struct DefiningSystem {
    pub m: PluckerIndex,
    pub family: Vec<PrimaryRelation>,
    /// The pair set to 1 in each block (the chart's basepoint selection).
    pub basepoint: Vec<(PluckerIndex, PluckerIndex)>,
    pub main: Vec<Binomial>,
    pub residual: Vec<Binomial>,
    pub quotient: Vec<Binomial>,
    /// The dehomogenized linear relations, one per block.
    pub linear: Vec<Polynomial>,
}

/// Builds the defining system on the standard chart determined by the
/// basepoint selection (one pair per block; defaults to the minimal
/// non-leading pair).
pub fn defining_system(
    d: usize,
    n: usize,
    m: &PluckerIndex,
    basepoint: Option<Vec<(PluckerIndex, PluckerIndex)>>,
    max_rho_degree: usize,
) -> Result<DefiningSystem, ModelError> {
    let family = primary_family(d, n, m)?;
    let basepoint = match basepoint {
        Some(sel) => {
            for (k, (f, pair)) in family.iter().zip(&sel).enumerate() {
                let canonical = Variable::rho(pair.0.clone(), pair.1.clone());
                let ok = block_pairs(f)
                    .iter()
                    .any(|(a, b)| Variable::rho(a.clone(), b.clone()) == canonical);
                if !ok {
                    return Err(ModelError::InvalidChart(pair.0.clone(), pair.1.clone(), k + 1));
                }
            }
            if sel.len() != family.len() {
                return Err(ModelError::InvalidChart(m.clone(), m.clone(), sel.len()));
            }
            sel
        }
        None => family
            .iter()
            .map(|f| {
                let (a, b) = ordered_non_leading(f)[0].1.clone();
                if a <= b { (a, b) } else { (b, a) }
            })
            .collect(),
    };

    let units: BTreeSet<Variable> = basepoint
        .iter()
        .map(|(a, b)| Variable::rho(a.clone(), b.clone()))
        .collect();

    let mut main = Vec::new();
    let mut residual = Vec::new();
    let mut linear = Vec::new();
    for (k, f) in family.iter().enumerate() {
        main.extend(main_binomials(f, k + 1).iter().map(|b| b.dehomogenize(&units)));
        residual.extend(residual_binomials(f, k + 1).iter().map(|b| b.dehomogenize(&units)));
        let mut l = Polynomial::zero();
        for (sign, (a, b)) in &linearize(f).terms {
            let v = Variable::rho(a.clone(), b.clone());
            let mon = if units.contains(&v) { Monomial::one() } else { Monomial::var(v) };
            l = l.add(&Polynomial::monomial(mon, BigInt::from(*sign)));
        }
        linear.push(l);
    }
    let quotient = kernel_binomials(d, n, m, max_rho_degree)?
        .iter()
        .map(|b| b.dehomogenize(&units))
        .collect();

    Ok(DefiningSystem {
        m: m.clone(),
        family,
        basepoint,
        main,
        residual,
        quotient,
        linear,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::indexing::{basic_variables, primary_index_set};
    use crate::polyengine::{inv_mod, parse_polynomial};
    use crate::relations::express_in_basic;
    use proptest::prelude::*;

    fn idx(s: &[u8]) -> PluckerIndex {
        PluckerIndex::new(s)
    }

    fn parsed(s: &str) -> Polynomial {
        parse_polynomial(s).expect("fixture parses")
    }

    fn rel(m: &[u8], u: &[u8], n: u8) -> PrimaryRelation {
        crate::relations::primary_relation(&idx(m), &idx(u), n).unwrap()
    }

    #[test]
    fn phi_basics() {
        let mon = Monomial::var(Variable::rho(idx(&[1, 2]), idx(&[3, 4])));
        assert_eq!(phi(&mon).unwrap(), Monomial::from_vars([
            Variable::Pi(idx(&[1, 2])),
            Variable::Pi(idx(&[3, 4])),
        ]));
        let fixed = Monomial::var(Variable::Pi(idx(&[1, 2])));
        assert_eq!(phi(&fixed).unwrap(), fixed);
        assert!(phi(&Monomial::var(Variable::Eps(idx(&[1, 2])))).is_err());
        // On the chart of (12), the leading pair maps to the leading
        // variable alone.
        let lead = Monomial::var(Variable::rho(idx(&[1, 2]), idx(&[3, 4])));
        assert_eq!(
            phi_on_chart(&idx(&[1, 2]), &lead).unwrap(),
            Monomial::var(Variable::Pi(idx(&[3, 4])))
        );
    }

    #[test]
    fn main_binomial_golden_forms() {
        // Block of (145) on the chart of (123).
        let bs = main_binomials(&rel(&[1, 2, 3], &[1, 4, 5], 6), 1);
        assert_eq!(bs.len(), 2);
        assert_eq!(
            bs[0].polynomial(),
            parsed("x[(124,135)]*x[145] - x[(123,145)]*x[124]*x[135]")
        );
        assert_eq!(
            bs[1].polynomial(),
            parsed("x[(125,134)]*x[145] - x[(123,145)]*x[125]*x[134]")
        );
        assert_eq!(bs[0].main_index, Some((1, 1)));

        // The (345) block, second binomial: minus-term factors must match
        // the pair (134 with 235, then 234 with 135).
        let bs = main_binomials(&rel(&[1, 2, 3], &[3, 4, 5], 6), 3);
        assert_eq!(
            bs[0].polynomial(),
            parsed("x[(134,235)]*x[345] - x[(123,345)]*x[134]*x[235]")
        );
        assert_eq!(
            bs[1].polynomial(),
            parsed("x[(135,234)]*x[345] - x[(123,345)]*x[135]*x[234]")
        );

        // The rank-1 block (456): τ orders the rank-0 factors 156 < 256 < 356.
        let bs = main_binomials(&rel(&[1, 2, 3], &[4, 5, 6], 6), 10);
        assert_eq!(bs.len(), 3);
        assert_eq!(
            bs[0].polynomial(),
            parsed("x[(156,234)]*x[456] - x[(123,456)]*x[156]*x[234]")
        );
        assert_eq!(
            bs[2].polynomial(),
            parsed("x[(124,356)]*x[456] - x[(123,456)]*x[124]*x[356]")
        );

        // Gr(2,4).
        let bs = main_binomials(&rel(&[1, 2], &[3, 4], 4), 1);
        assert_eq!(
            bs[0].polynomial(),
            parsed("x[(13,24)]*x[34] - x[(12,34)]*x[13]*x[24]")
        );
        assert_eq!(
            bs[1].polynomial(),
            parsed("x[(14,23)]*x[34] - x[(12,34)]*x[14]*x[23]")
        );
    }

    #[test]
    fn residual_golden_and_counts() {
        let bs = residual_binomials(&rel(&[1, 2], &[3, 4], 4), 1);
        assert_eq!(bs.len(), 1);
        assert_eq!(
            bs[0].polynomial(),
            parsed("x[(13,24)]*x[14]*x[23] - x[(14,23)]*x[13]*x[24]")
        );
        let f = rel(&[1, 2, 3], &[4, 5, 6], 6);
        assert_eq!(residual_binomials(&f, 1).len(), 3); // C(t_F, 2) with t_F = 3
    }

    #[test]
    fn phi_annihilates_all_binomials() {
        for (d, n, m) in [(2usize, 4usize, idx(&[1, 2])), (2, 5, idx(&[4, 5])), (3, 6, idx(&[1, 2, 3]))] {
            let family = primary_family(d, n, &m).unwrap();
            for (k, f) in family.iter().enumerate() {
                for b in main_binomials(f, k + 1)
                    .iter()
                    .chain(residual_binomials(f, k + 1).iter())
                {
                    assert_eq!(
                        phi_on_chart(&m, &b.plus).unwrap(),
                        phi_on_chart(&m, &b.minus).unwrap(),
                        "φ must annihilate {:?}",
                        b
                    );
                }
            }
        }
    }

    #[test]
    fn kernel_search_finds_the_degree_three_cycle() {
        // On Gr(3,6), chart of (123), with (a,b,c) = (4,5,6).
        let found = kernel_binomials(3, 6, &idx(&[1, 2, 3]), 3).unwrap();
        let want_plus = parsed("x[(124,135)]*x[(134,126)]*x[(125,136)]");
        let want_minus = parsed("x[(134,125)]*x[(124,136)]*x[(135,126)]");
        let target = want_plus.sub(&want_minus);
        assert!(
            found.iter().any(|b| {
                let p = b.polynomial();
                p == target || p == target.neg()
            }),
            "expected the three-block cycle binomial among {} results",
            found.len()
        );
        for b in &found {
            assert_eq!(
                phi_on_chart(&idx(&[1, 2, 3]), &b.plus).unwrap(),
                phi_on_chart(&idx(&[1, 2, 3]), &b.minus).unwrap()
            );
            assert!(b.plus.is_squarefree() && b.minus.is_squarefree());
        }

        // A single block admits no quotient-type binomials.
        assert!(kernel_binomials(2, 4, &idx(&[1, 2]), 2).unwrap().is_empty());
        assert!(kernel_binomials(2, 4, &idx(&[1, 2]), 3).unwrap().is_empty());
        assert!(kernel_binomials(2, 4, &idx(&[1, 2]), 7).is_err());
    }

    #[test]
    fn defining_system_counts_and_charts() {
        // Default basepoint: minimal non-leading pair (13,24).
        let sys = defining_system(2, 4, &idx(&[1, 2]), None, 3).unwrap();
        assert_eq!(sys.basepoint, vec![(idx(&[1, 3]), idx(&[2, 4]))]);
        assert_eq!((sys.main.len(), sys.residual.len(), sys.quotient.len(), sys.linear.len()), (2, 1, 0, 1));
        assert_eq!(sys.linear[0], parsed("x[(12,34)] - 1 + x[(14,23)]"));

        // Chart over the leading pair: the first main binomial loses its
        // pair variable on the minus side.
        let sys = defining_system(
            2,
            4,
            &idx(&[1, 2]),
            Some(vec![(idx(&[1, 2]), idx(&[3, 4]))]),
            3,
        )
        .unwrap();
        assert_eq!((sys.main.len(), sys.residual.len(), sys.linear.len()), (2, 1, 1));
        assert_eq!(
            sys.main[0].polynomial(),
            parsed("x[(13,24)]*x[34] - x[13]*x[24]")
        );
        assert_eq!(sys.linear[0], parsed("1 - x[(13,24)] + x[(14,23)]"));

        // A pair from the wrong block is rejected.
        assert!(defining_system(
            2,
            5,
            &idx(&[4, 5]),
            Some(vec![
                (idx(&[1, 4]), idx(&[2, 5])),
                (idx(&[1, 4]), idx(&[2, 5])),
                (idx(&[2, 4]), idx(&[3, 5])),
            ]),
            3,
        )
        .is_err());
    }

    #[test]
    fn relations_vanish_on_the_graph() {
        // Numeric oracle: parametrize the chart by its basic variables at
        // random F_7 points, set each pair variable to the ratio of
        // φ-values against the basepoint pair, and evaluate everything.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x6ea9);
        let p = 7u64;
        for (d, n, m) in [(2usize, 5usize, idx(&[4, 5])), (3, 6, idx(&[1, 2, 3]))] {
            let sys = defining_system(d, n, &m, None, 3).unwrap();
            let basics = basic_variables(d, n, &m).unwrap();
            let primaries = primary_index_set(d, n, &m).unwrap();
            let exprs: BTreeMap<PluckerIndex, Polynomial> = primaries
                .iter()
                .map(|u| (u.clone(), express_in_basic(&m, u, n as u8).unwrap()))
                .collect();
            let mut samples = 0;
            'outer: while samples < 100 {
                let mut point: BTreeMap<Variable, u64> = basics
                    .iter()
                    .map(|u| (Variable::Pi(u.clone()), rng.gen_range(0..p)))
                    .collect();
                for u in &primaries {
                    let val = exprs[u].evaluate_mod_p(&point, p);
                    point.insert(Variable::Pi(u.clone()), val);
                }
                // Pair variables: φ-value divided by the basepoint's
                // φ-value within the block; skip points where a basepoint
                // value vanishes.
                for (f, base) in sys.family.iter().zip(&sys.basepoint) {
                    let value = |a: &PluckerIndex, b: &PluckerIndex, pt: &BTreeMap<Variable, u64>| {
                        phi_on_chart(&m, &Monomial::var(Variable::rho(a.clone(), b.clone())))
                            .unwrap()
                            .0
                            .iter()
                            .fold(1u64, |acc, (v, e)| {
                                acc * crate::polyengine::pow_mod(pt[v], *e as u64, p) % p
                            })
                    };
                    let denom = value(&base.0, &base.1, &point);
                    if denom == 0 {
                        continue 'outer;
                    }
                    let denom_inv = inv_mod(denom, p);
                    for (a, b) in block_pairs(f) {
                        let val = value(&a, &b, &point) * denom_inv % p;
                        point.insert(Variable::rho(a, b), val);
                    }
                }
                samples += 1;
                for poly in sys
                    .main
                    .iter()
                    .chain(&sys.residual)
                    .chain(&sys.quotient)
                    .map(|b| b.polynomial())
                    .chain(sys.linear.iter().cloned())
                {
                    assert_eq!(poly.evaluate_mod_p(&point, p), 0, "graph point must satisfy {poly}");
                }
            }
        }
    }

    #[test]
    fn linear_times_term_reduces_to_relation() {
        // For each block and each non-leading s:
        //   x_{u_s} x_{v_s} L_F − x_{(u_s,v_s)} F̄
        // is an explicit signed sum of the block's main and residual
        // binomials.
        for (d, n, m) in [(2usize, 5usize, idx(&[4, 5])), (3, 6, idx(&[1, 2, 3]))] {
            for (k, f) in primary_family(d, n, &m).unwrap().iter().enumerate() {
                let mains = main_binomials(f, k + 1);
                let residuals = residual_binomials(f, k + 1);
                let lf = linearize(f).polynomial();
                let fbar = f.dehomogenized();
                let terms = ordered_non_leading(f);
                for (tau, (sign_s, (us, vs))) in terms.iter().enumerate() {
                    let lhs = Polynomial::monomial(
                        Monomial::from_vars([Variable::Pi(us.clone()), Variable::Pi(vs.clone())]),
                        BigInt::from(1),
                    )
                    .mul(&lf)
                    .sub(
                        &Polynomial::var(Variable::rho(us.clone(), vs.clone())).mul(&fbar),
                    );
                    // Assemble the matching combination: the main binomial
                    // of s (leading term of L against leading variable) and
                    // the residuals against every other t.
                    let mut rhs = mains[tau].polynomial().neg();
                    let _ = sign_s;
                    for (tau_t, (sign_t, (ut, vt))) in terms.iter().enumerate() {
                        if tau_t == tau {
                            continue;
                        }
                        // B_{(s,t)} oriented with s first.
                        let b_st = Polynomial::monomial(
                            Monomial::from_vars([
                                Variable::rho(us.clone(), vs.clone()),
                                Variable::Pi(ut.clone()),
                                Variable::Pi(vt.clone()),
                            ]),
                            BigInt::from(1),
                        )
                        .sub(&Polynomial::monomial(
                            Monomial::from_vars([
                                Variable::rho(ut.clone(), vt.clone()),
                                Variable::Pi(us.clone()),
                                Variable::Pi(vs.clone()),
                            ]),
                            BigInt::from(1),
                        ));
                        // Each B_{(s,t)} is ± a generated residual binomial.
                        assert!(
                            residuals.iter().any(|r| {
                                let rp = r.polynomial();
                                rp == b_st || rp == b_st.neg()
                            }),
                            "orientation of residual ({us},{vs}) vs ({ut},{vt})"
                        );
                        rhs = rhs.sub(&b_st.scale(&BigInt::from(*sign_t)));
                    }
                    assert_eq!(lhs, rhs, "block {} s = ({us},{vs})", k + 1);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn binomial_counts_match_block_sizes(case in 0usize..3) {
            let (d, n, m) = [
                (2usize, 4usize, idx(&[1, 2])),
                (2, 5, idx(&[4, 5])),
                (3, 6, idx(&[1, 2, 3])),
            ][case].clone();
            for (k, f) in primary_family(d, n, &m).unwrap().iter().enumerate() {
                prop_assert_eq!(main_binomials(f, k + 1).len(), f.t_f);
                prop_assert_eq!(
                    residual_binomials(f, k + 1).len(),
                    f.t_f * (f.t_f - 1) / 2
                );
                prop_assert_eq!(block_pairs(f).len(), f.t_f + 1);
            }
        }
    }
}
