//! Smoothness certification of the transformed subscheme: point
//! enumeration over prime fields, Jacobian rank checks on every final
//! chart, a redundancy audit for the quotient binomials, and sampled
//! birationality probes back to the input subscheme.

use crate::blowup::{Atlas, BlowupError, Chart};
use crate::gamma::{dense_sample, graph_lift, lift_fiber, transport, Gamma, GammaError, GammaState};
use crate::indexing::PluckerIndex;
use crate::polyengine::{FpSystem, PolyError, Polynomial, Variable};
use num_bigint::BigInt;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CertifyError {
    #[error(transparent)]
    Blowup(#[from] BlowupError),
    #[error(transparent)]
    Gamma(#[from] GammaError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("chart {chart} has {free} free coordinates, above the enumeration bound {bound}; use sampling instead")]
    ResourceLimit { chart: String, free: usize, bound: usize },
}

/// Tuning knobs of the certification run.
#[derive(Clone, Debug)]
pub struct CertifyOptions {
    /// Enumeration refuses charts with more free coordinates than this.
    pub free_var_bound: usize,
    /// Cap on enumerated points per (chart, prime).
    pub point_cap: usize,
    /// Sampled subscheme points per prime for the transport.
    pub transport_samples: usize,
    pub seed: u64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            free_var_bound: 12,
            point_cap: 200_000,
            transport_samples: 40,
            seed: 0x6ea9,
        }
    }
}

/// Rank verdict of one final chart.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChartReport {
    pub id: String,
    /// Points enumerated across all primes.
    pub points_checked: usize,
    pub rank_expected: usize,
    /// The smallest rank observed (equals `rank_expected` when no point
    /// was checked).
    pub rank_min: usize,
    pub pass: bool,
    pub uncertain: bool,
}

/// A concrete smoothness failure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FailWitness {
    pub chart: String,
    pub prime: u64,
    pub point: BTreeMap<Variable, u64>,
    pub rank: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Smooth,
    Fail(FailWitness),
    Uncertain { detail: String },
}

/// Fiber sizes observed by the birationality probe.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BirationalEvidence {
    pub trials: usize,
    pub fiber_histogram: BTreeMap<usize, usize>,
}

/// The machine-readable outcome of a certification run. The verdict is
/// finite-field evidence for smoothness in characteristic zero, not a
/// proof of it.
#[derive(Clone, Debug)]
pub struct Certificate {
    pub gamma: Vec<PluckerIndex>,
    pub primes: Vec<u64>,
    pub charts: Vec<ChartReport>,
    /// Whether every quotient binomial vanished on every enumerated
    /// point of the main-and-linear locus.
    pub quotients_redundant: bool,
    pub verdict: Verdict,
    pub birational: Option<BirationalEvidence>,
}

/// The polynomials certified on a chart — main binomials and linear
/// relations with formal coordinates substituted out and the zero-set
/// coordinates pinned to zero — plus the free coordinates.
pub fn certification_system(
    chart: &Chart,
    state: &GammaState,
) -> (Vec<Polynomial>, Vec<Polynomial>, Vec<Variable>) {
    let mut map: BTreeMap<Variable, Polynomial> = chart
        .l_defs
        .iter()
        .map(|(v, p)| (v.clone(), p.clone()))
        .collect();
    for v in &state.zero_set {
        map.insert(v.clone(), Polynomial::one().scale(&BigInt::from(0)));
    }
    let restrict = |p: &Polynomial| p.substitute(&map);
    let mut polys: Vec<Polynomial> = chart.mains.iter().map(|b| restrict(&b.polynomial())).collect();
    polys.extend(chart.linears.iter().map(&restrict));
    let quotients: Vec<Polynomial> =
        chart.quotients.iter().map(|b| restrict(&b.polynomial())).collect();
    let free: Vec<Variable> = chart
        .vars
        .iter()
        .filter(|v| !state.zero_set.contains(v))
        .cloned()
        .collect();
    (polys, quotients, free)
}

/// All `F_p` points of a relation system, with `zero` coordinates pinned
/// to 0 and `nonzero` ones ranging over units.
pub fn enumerate_points(
    polys: &[Polynomial],
    vars: &[Variable],
    zero: &[Variable],
    nonzero: &[Variable],
    prime: u64,
    bound: usize,
    cap: usize,
) -> Result<Vec<BTreeMap<Variable, u64>>, CertifyError> {
    let free = vars.iter().filter(|v| !zero.contains(v)).count();
    if free > bound {
        return Err(CertifyError::ResourceLimit {
            chart: String::new(),
            free,
            bound,
        });
    }
    let sys = FpSystem::new(polys, vars, prime, zero, nonzero)?;
    Ok(sys.enumerate(cap))
}

/// Row-reduction rank of a matrix over `F_p`.
pub fn matrix_rank(mut rows: Vec<Vec<u64>>, prime: u64) -> usize {
    let cols = rows.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for c in 0..cols {
        let Some(pivot) = (rank..rows.len()).find(|&r| rows[r][c] % prime != 0) else {
            continue;
        };
        rows.swap(rank, pivot);
        let inv = crate::polyengine::inv_mod(rows[rank][c] % prime, prime);
        for x in &mut rows[rank] {
            *x = *x * inv % prime;
        }
        for r in 0..rows.len() {
            if r != rank && rows[r][c] % prime != 0 {
                let f = rows[r][c] % prime;
                for c2 in 0..cols {
                    let sub = f * rows[rank][c2] % prime;
                    rows[r][c2] = (rows[r][c2] + prime * prime - sub) % prime;
                }
            }
        }
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    rank
}

/// Rank over `F_p` of the Jacobian of the system in the given
/// coordinates at the given point.
pub fn jacobian_rank_at(
    polys: &[Polynomial],
    free: &[Variable],
    point: &BTreeMap<Variable, u64>,
    prime: u64,
) -> usize {
    let rows: Vec<Vec<u64>> = polys
        .iter()
        .map(|p| {
            free.iter()
                .map(|v| p.partial_derivative(v).evaluate_mod_p(point, prime))
                .collect()
        })
        .collect();
    matrix_rank(rows, prime)
}

/// Certifies the transformed subscheme on every final chart of the
/// atlas: at every enumerated point, the Jacobian of the restricted main
/// binomials and linear relations must have rank exactly
/// `#main binomials + #blocks`.
pub fn certify_atlas(
    atlas: &Atlas,
    gamma: &Gamma,
    opts: &CertifyOptions,
) -> Result<Certificate, CertifyError> {
    let states = transport(atlas, gamma, &atlas.frontier, opts.transport_samples, opts.seed)?;
    let rank_expected = atlas.system.main.len() + atlas.system.family.len();
    let mut charts = Vec::new();
    let mut quotients_redundant = true;
    let mut witness: Option<FailWitness> = None;
    let mut uncertain_detail: Option<String> = None;

    for id in &atlas.frontier {
        let chart = atlas.chart(id);
        let state = &states[id];
        if state.uncertain && uncertain_detail.is_none() {
            uncertain_detail = Some(format!("primes disagree on chart {id}"));
        }
        // Rank-accounting premise: each linear relation contributes one
        // guaranteed Jacobian row, which is only certain once the
        // relation is in unit form (constant plus unit-variable terms).
        // A linear still carrying an ordinary coordinate that vanishes
        // identically on the transform voids that guarantee.
        if state.reached && uncertain_detail.is_none() {
            for l in &chart.linears {
                let degenerate = l.0.keys().any(|mon| {
                    mon.0
                        .keys()
                        .any(|v| !matches!(v, Variable::YInv(..)) && state.zero_set.contains(v))
                });
                if degenerate {
                    uncertain_detail = Some(format!(
                        "linear relation on chart {id} degenerates on the transform"
                    ));
                    break;
                }
            }
        }
        if !state.reached {
            charts.push(ChartReport {
                id: id.clone(),
                points_checked: 0,
                rank_expected,
                rank_min: rank_expected,
                pass: true,
                uncertain: state.uncertain,
            });
            continue;
        }
        let (polys, quotients, free) = certification_system(chart, state);
        if free.len() > opts.free_var_bound {
            return Err(CertifyError::ResourceLimit {
                chart: id.clone(),
                free: free.len(),
                bound: opts.free_var_bound,
            });
        }
        let nonzero: Vec<Variable> = state.one_set.iter().cloned().collect();
        let mut points_checked = 0;
        let mut rank_min = rank_expected;
        for &prime in &atlas.config.primes {
            let points = enumerate_points(
                &polys,
                &free,
                &[],
                &nonzero,
                prime,
                opts.free_var_bound,
                opts.point_cap,
            )?;
            for q in &points {
                points_checked += 1;
                let rank = jacobian_rank_at(&polys, &free, q, prime);
                if rank < rank_min {
                    rank_min = rank;
                }
                if rank != rank_expected && witness.is_none() {
                    witness = Some(FailWitness {
                        chart: id.clone(),
                        prime,
                        point: q.clone(),
                        rank,
                    });
                }
                if quotients.iter().any(|b| b.evaluate_mod_p(q, prime) != 0) {
                    quotients_redundant = false;
                }
            }
        }
        charts.push(ChartReport {
            id: id.clone(),
            points_checked,
            rank_expected,
            rank_min,
            pass: rank_min == rank_expected,
            uncertain: state.uncertain,
        });
    }

    let verdict = if let Some(w) = witness {
        Verdict::Fail(w)
    } else if let Some(detail) = uncertain_detail {
        Verdict::Uncertain { detail }
    } else {
        Verdict::Smooth
    };
    Ok(Certificate {
        gamma: gamma.members.iter().cloned().collect(),
        primes: atlas.config.primes.clone(),
        charts,
        quotients_redundant,
        verdict,
        birational: None,
    })
}

/// Samples dense points of the input subscheme and counts their lifts
/// to the atlas. Lifts in different charts projecting to the same root
/// point are the same atlas point (chart overlap), so the fiber size at
/// a trial is the largest number of distinct lifts within one chart.
pub fn birationality_probe(
    atlas: &Atlas,
    gamma: &Gamma,
    prime: u64,
    trials: usize,
    seed: u64,
) -> Result<BirationalEvidence, CertifyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut histogram: BTreeMap<usize, usize> = BTreeMap::new();
    let mut done = 0;
    let mut attempts = 0;
    while done < trials {
        attempts += 1;
        if attempts > 200 * trials.max(1) {
            return Err(CertifyError::Gamma(GammaError::InsufficientSampling {
                detail: format!("only {done} of {trials} probe points found over F_{prime}"),
            }));
        }
        let pts = dense_sample(atlas.d, atlas.n, &atlas.m, gamma, prime, 1, &mut rng)?;
        let Some(q) = graph_lift(&atlas.system, &pts[0], prime) else { continue };
        let mut fiber = 0usize;
        for id in &atlas.frontier {
            let lifts = lift_fiber(atlas, id, &q, prime);
            fiber = fiber.max(lifts.len());
        }
        *histogram.entry(fiber).or_insert(0) += 1;
        done += 1;
    }
    Ok(BirationalEvidence { trials, fiber_histogram: histogram })
}
