//! Helpers shared by the integration test targets: monomial pullbacks,
//! the symbolic residual-elimination replay, and the main-binomial
//! termination check.
#![allow(dead_code)]

use grassres::blowup::{blow_up, root_chart, Atlas, Chart, Divisor, Stage};
use grassres::indexing::PluckerIndex;
use grassres::model::{
    defining_system, main_binomials, ordered_non_leading, residual_binomials, Binomial,
};
use grassres::polyengine::{Monomial, Polynomial, Variable};
use num_bigint::BigInt;
use num_traits::One;
use std::collections::BTreeSet;

pub fn idx(s: &[u8]) -> PluckerIndex {
    PluckerIndex::new(s)
}

/// Pulls a root-chart monomial back to the chart through its composed
/// substitution, which is monomial by construction.
pub fn pull(chart: &Chart, mon: &Monomial) -> Monomial {
    let mut out = Monomial::one();
    for (v, e) in &mon.0 {
        let p = chart.subst.get(v).expect("root coordinate has an image");
        assert_eq!(p.term_count(), 1, "pullback of {v} is not a monomial");
        let (image, coeff) = p.0.iter().next().unwrap();
        assert!(coeff.magnitude() == BigInt::one().magnitude() && coeff.sign() != num_bigint::Sign::Minus);
        for _ in 0..*e {
            out = out.mul(image);
        }
    }
    out
}

pub fn monomial_poly(m: Monomial) -> Polynomial {
    Polynomial::monomial(m, BigInt::one())
}

/// Replays the leading blowups of every block and verifies, on each
/// freshly created chart, that the transformed residual binomials of the
/// block are monomial-multiple combinations of the block's transformed
/// main binomials — the identity justifying their removal.
pub fn check_lead_stage_elimination(d: usize, n: usize, m: &PluckerIndex) {
    let system = defining_system(d, n, m, None, 2).expect("model builds");
    let units: BTreeSet<Variable> = system
        .basepoint
        .iter()
        .map(|(a, b)| Variable::rho(a.clone(), b.clone()))
        .collect();
    let mut charts = vec![root_chart(d, n, &system).expect("root chart builds")];
    let mut checks = 0usize;
    for (k0, f) in system.family.iter().enumerate() {
        let k = k0 + 1;
        let vp = Variable::Pi(f.u.clone());
        let vm = Variable::rho(m.clone(), f.u.clone());
        let pairs = ordered_non_leading(f);
        let mains_root: Vec<Binomial> = main_binomials(f, k)
            .iter()
            .map(|b| b.dehomogenize(&units))
            .collect();
        let res_root: Vec<Binomial> = residual_binomials(f, k)
            .iter()
            .map(|b| b.dehomogenize(&units))
            .collect();
        let lead_pull = Monomial::var(vm.clone());
        let mut next = Vec::new();
        for chart in &charts {
            for kid in blow_up(chart, (&vp, &vm), Divisor::Lead(k), Stage::Lead(k)) {
                let kid_mains: Vec<&Binomial> = kid
                    .mains
                    .iter()
                    .filter(|b| b.block == Some(k))
                    .collect();
                let kid_res: Vec<&Binomial> = kid
                    .residuals
                    .iter()
                    .filter(|b| b.block == Some(k))
                    .collect();
                assert_eq!(kid_res.len(), res_root.len());
                // The monomial each main binomial was divided by.
                let divided: Vec<Monomial> = mains_root
                    .iter()
                    .zip(&kid_mains)
                    .map(|(root_b, kid_b)| {
                        pull(&kid, &root_b.plus)
                            .div(&kid_b.plus)
                            .expect("transformed term divides its pullback")
                    })
                    .collect();
                let pair_pull: Vec<Monomial> = pairs
                    .iter()
                    .map(|(_, (a, b))| {
                        let v = Variable::rho(a.clone(), b.clone());
                        if units.contains(&v) {
                            Monomial::one()
                        } else {
                            pull(&kid, &Monomial::var(v))
                        }
                    })
                    .collect();
                let mut r = 0usize;
                for s in 0..pairs.len() {
                    for t in s + 1..pairs.len() {
                        let m_r = pull(&kid, &res_root[r].plus)
                            .div(&kid_res[r].plus)
                            .expect("transformed term divides its pullback");
                        let lhs = monomial_poly(pair_pull[s].clone().mul(&divided[t]))
                            .mul(&kid_mains[t].polynomial())
                            .sub(
                                &monomial_poly(pair_pull[t].clone().mul(&divided[s]))
                                    .mul(&kid_mains[s].polynomial()),
                            );
                        let quotient = lhs
                            .divide_out(&pull(&kid, &lead_pull).mul(&m_r))
                            .expect("residual combination divides exactly");
                        assert_eq!(
                            quotient,
                            kid_res[r].polynomial().scale(&BigInt::from(-1)),
                            "block {k} pair ({s},{t}) on chart {}",
                            kid.id
                        );
                        checks += 1;
                        r += 1;
                    }
                }
                next.push(kid);
            }
        }
        for c in &mut next {
            c.residuals.retain(|b| b.block != Some(k));
        }
        charts = next;
    }
    assert!(checks > 0);
}

pub fn check_termination(atlas: &Atlas) {
    assert!(!atlas.frontier.is_empty());
    for s in &atlas.stats {
        assert_eq!(s.live_sets_per_round.len(), s.rounds);
    }
    for chart in atlas.frontier_charts() {
        for b in &chart.mains {
            let Some((k, _)) = b.main_index else { continue };
            if k > atlas.processed_blocks {
                continue;
            }
            for &p in &atlas.config.primes {
                assert!(
                    atlas.terminated(chart, b, p).unwrap(),
                    "main binomial {:?} fails to terminate on {} mod {}",
                    b.main_index,
                    chart.id,
                    p
                );
            }
        }
    }
}

