//! Coordinate subschemes of the Grassmannian chart (closures of matroid
//! Schubert cells), their extraction from matroids, and the transport of
//! their zero/one coordinate data through the blowup atlas.
//!
//! A subscheme is specified by a set Γ of Plücker coordinates pinned to
//! zero on the chart. Its strict transform through the pipeline is
//! tracked per chart by two sets: coordinates vanishing identically
//! along the transform, and coordinates provably invertible along it.
//! Both are decided empirically — by pushing sampled generic points of
//! the subscheme down the chart tree and by point searches over two
//! small prime fields — with disagreements between the primes surfaced
//! as an `uncertain` flag rather than guessed.

use crate::blowup::{Atlas, Chart, LiftStep};
use crate::indexing::{
    basic_variables, enumerate_indices, primary_index_set, IndexError, PluckerIndex,
};
use crate::model::{block_pairs, DefiningSystem};
use crate::polyengine::{inv_mod, FpSystem, PolyError, Polynomial, Variable};
use crate::relations::{express_in_basic, primary_family, PrimaryRelation, RelationError};
use num_bigint::BigInt;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GammaError {
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Relation(#[from] RelationError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("invalid coordinate set: {detail}")]
    InvalidGamma { detail: String },
    #[error("the chart index is not a basis of the matroid")]
    ChartNotBasis,
    #[error("not a matroid: {detail}")]
    NotAMatroid { detail: String },
    #[error("insufficient sampling: {detail}")]
    InsufficientSampling { detail: String },
}

/// A set of Plücker coordinates pinned to zero on the chart of `m`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Gamma {
    pub members: BTreeSet<PluckerIndex>,
}

impl Gamma {
    pub fn empty() -> Gamma {
        Gamma { members: BTreeSet::new() }
    }

    /// Validates that the members are indices of the Grassmannian other
    /// than the chart index itself.
    pub fn new(
        d: usize,
        n: usize,
        m: &PluckerIndex,
        members: impl IntoIterator<Item = PluckerIndex>,
    ) -> Result<Gamma, GammaError> {
        let all: BTreeSet<PluckerIndex> = enumerate_indices(d, n)?.into_iter().collect();
        let members: BTreeSet<PluckerIndex> = members.into_iter().collect();
        for u in &members {
            if u == m {
                return Err(GammaError::InvalidGamma {
                    detail: format!("{u} is the chart index"),
                });
            }
            if !all.contains(u) {
                return Err(GammaError::InvalidGamma {
                    detail: format!("{u} is not an index of Gr({d},{n})"),
                });
            }
        }
        Ok(Gamma { members })
    }

    pub fn contains(&self, u: &PluckerIndex) -> bool {
        self.members.contains(u)
    }
}

/// A matroid given by its set of bases.
#[derive(Clone, Debug)]
pub struct Matroid {
    pub n: usize,
    pub d: usize,
    pub bases: BTreeSet<PluckerIndex>,
}

impl Matroid {
    /// Validates the bases (shape and basis-exchange property).
    pub fn new(
        n: usize,
        d: usize,
        bases: impl IntoIterator<Item = PluckerIndex>,
    ) -> Result<Matroid, GammaError> {
        let all: BTreeSet<PluckerIndex> = enumerate_indices(d, n)?.into_iter().collect();
        let bases: BTreeSet<PluckerIndex> = bases.into_iter().collect();
        if bases.is_empty() {
            return Err(GammaError::NotAMatroid { detail: "no bases given".to_string() });
        }
        for b in &bases {
            if !all.contains(b) {
                return Err(GammaError::NotAMatroid {
                    detail: format!("{b} is not a {d}-subset of 1..={n}"),
                });
            }
        }
        for a in &bases {
            for b in &bases {
                for x in a.0.iter().filter(|x| !b.0.contains(x)) {
                    let rest: Vec<u8> = a.0.iter().copied().filter(|y| y != x).collect();
                    let exchanged = b
                        .0
                        .iter()
                        .filter(|y| !a.0.contains(y))
                        .any(|&y| {
                            let mut c = rest.clone();
                            c.push(y);
                            c.sort_unstable();
                            bases.contains(&PluckerIndex(c))
                        });
                    if !exchanged {
                        return Err(GammaError::NotAMatroid {
                            detail: format!("exchange fails for bases {a}, {b} at element {x}"),
                        });
                    }
                }
            }
        }
        Ok(Matroid { n, d, bases })
    }
}

/// Extracts the pinned coordinate set of a matroid on the chart of `m`:
/// the non-bases of the matroid.
pub fn matroid_to_gamma(mat: &Matroid, m: &PluckerIndex) -> Result<Gamma, GammaError> {
    if !mat.bases.contains(m) {
        return Err(GammaError::ChartNotBasis);
    }
    let members: BTreeSet<PluckerIndex> = enumerate_indices(mat.d, mat.n)?
        .into_iter()
        .filter(|u| !mat.bases.contains(u))
        .collect();
    Ok(Gamma { members })
}

/// The defining system of the subscheme on the chart of `m`: the pinned
/// coordinates together with the dehomogenized primary relations.
pub fn gamma_scheme(
    d: usize,
    n: usize,
    m: &PluckerIndex,
    gamma: &Gamma,
) -> Result<Vec<Polynomial>, GammaError> {
    let mut out: Vec<Polynomial> = gamma
        .members
        .iter()
        .map(|u| Polynomial::var(Variable::Pi(u.clone())))
        .collect();
    for f in primary_family(d, n, m)? {
        out.push(f.dehomogenized());
    }
    Ok(out)
}

/// Whether a primary relation survives restriction to the subscheme:
/// false iff every term of its dehomogenized form contains a pinned
/// coordinate.
pub fn is_relevant(f: &PrimaryRelation, gamma: &Gamma) -> bool {
    !f.dehomogenized().0.keys().all(|mon| {
        gamma
            .members
            .iter()
            .any(|g| mon.exponent(&Variable::Pi(g.clone())) > 0)
    })
}

/// The pair coordinates of a block that vanish identically along the
/// subscheme's transform in the model: those whose pair contains a
/// pinned index.
pub fn seeded_pair_zeros(
    f: &PrimaryRelation,
    gamma: &Gamma,
) -> Vec<(PluckerIndex, PluckerIndex)> {
    block_pairs(f)
        .into_iter()
        .filter(|(a, b)| gamma.contains(a) || gamma.contains(b))
        .collect()
}

/// Zero/one coordinate data of the subscheme's transform on one chart,
/// with the sampled points witnessing it.
#[derive(Clone, Debug)]
pub struct GammaState {
    pub chart: String,
    /// Coordinates vanishing identically along the transform.
    pub zero_set: BTreeSet<Variable>,
    /// Coordinates provably invertible along it.
    pub one_set: BTreeSet<Variable>,
    /// Whether any sampled point of the subscheme landed on this chart.
    pub reached: bool,
    /// Set when the two primes disagreed on some decision.
    pub uncertain: bool,
    /// Sampled points of the transform per prime.
    pub samples: BTreeMap<u64, Vec<BTreeMap<Variable, u64>>>,
}

/// Whether the subscheme's transform is contained in a blowup center:
/// by maximality of the zero set, containment is equivalent to both
/// local center equations lying in it.
pub fn containment_test(state: &GammaState, y0: &Variable, y1: &Variable) -> bool {
    state.zero_set.contains(y0) && state.zero_set.contains(y1)
}

/// Samples points of the subscheme on the Plücker chart over `F_p`:
/// random basic coordinates (zero when pinned, otherwise nonzero),
/// primary coordinates computed from them, rejected unless every pinned
/// coordinate vanishes.
pub fn dense_sample(
    d: usize,
    n: usize,
    m: &PluckerIndex,
    gamma: &Gamma,
    prime: u64,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<BTreeMap<Variable, u64>>, GammaError> {
    let basics = basic_variables(d, n, m)?;
    let primaries = primary_index_set(d, n, m)?;
    let exprs: Vec<(PluckerIndex, Polynomial)> = primaries
        .iter()
        .map(|u| Ok((u.clone(), express_in_basic(m, u, n as u8)?)))
        .collect::<Result<_, GammaError>>()?;
    let mut out = Vec::new();
    let max_trials = 4000 * count.max(1);
    for _ in 0..max_trials {
        if out.len() == count {
            break;
        }
        let mut point = BTreeMap::new();
        for b in &basics {
            let v = if gamma.contains(b) { 0 } else { rng.gen_range(1..prime) };
            point.insert(Variable::Pi(b.clone()), v);
        }
        let mut ok = true;
        for (u, e) in &exprs {
            let v = e.evaluate_mod_p(&point, prime);
            if gamma.contains(u) && v != 0 {
                ok = false;
                break;
            }
            point.insert(Variable::Pi(u.clone()), v);
        }
        if ok {
            out.push(point);
        }
    }
    if out.len() < count {
        return Err(GammaError::InsufficientSampling {
            detail: format!(
                "found {} of {count} requested points of the subscheme over F_{prime}",
                out.len()
            ),
        });
    }
    Ok(out)
}

/// Extends a Plücker-chart point to the root chart of the model: every
/// pair coordinate is the ratio of its pair product to the block's
/// basepoint pair product. `None` where some basepoint product vanishes
/// (off the dense locus of the graph).
pub fn graph_lift(
    system: &DefiningSystem,
    point: &BTreeMap<Variable, u64>,
    prime: u64,
) -> Option<BTreeMap<Variable, u64>> {
    let mut out = point.clone();
    for (f, (ub, vb)) in system.family.iter().zip(&system.basepoint) {
        let denom = point[&Variable::Pi(ub.clone())] * point[&Variable::Pi(vb.clone())] % prime;
        if denom == 0 {
            return None;
        }
        let inv = inv_mod(denom, prime);
        let lead = point[&Variable::Pi(f.u.clone())];
        out.insert(Variable::rho(f.m.clone(), f.u.clone()), lead * inv % prime);
        for (a, b) in block_pairs(f) {
            if (&a, &b) == (ub, vb) || (&b, &a) == (ub, vb) {
                continue;
            }
            if a == f.m || b == f.m {
                continue; // the leading pair coordinate, set above
            }
            let prod = point[&Variable::Pi(a.clone())] * point[&Variable::Pi(b.clone())] % prime;
            out.insert(Variable::rho(a, b), prod * inv % prime);
        }
    }
    Some(out)
}

/// Pushes a parent-chart point one step down to a child chart. Standard
/// lifts divide by the exceptional value; when the point lies on the
/// blowup center, the new ratio coordinate is recovered from the child's
/// relations instead (determined values taken as they are, free ones
/// drawn generically).
fn step_point(
    child: &Chart,
    parent_point: &BTreeMap<Variable, u64>,
    prime: u64,
    rng: &mut ChaCha8Rng,
) -> Option<BTreeMap<Variable, u64>> {
    let Some(step) = &child.lift else {
        return Some(parent_point.clone());
    };
    match step {
        LiftStep::Ratio { exceptional_parent, exceptional_child, divided } => {
            let y0 = *parent_point.get(exceptional_parent)?;
            let y1 = *parent_point.get(divided)?;
            if y0 != 0 {
                let mut point = parent_point.clone();
                point.remove(exceptional_parent);
                point.insert(exceptional_child.clone(), y0);
                point.insert(divided.clone(), y1 * inv_mod(y0, prime) % prime);
                return Some(point);
            }
            if y1 != 0 {
                // Off this chart: the point survives only where the other
                // center equation is exceptional.
                return None;
            }
            let mut point = parent_point.clone();
            point.remove(exceptional_parent);
            point.insert(exceptional_child.clone(), 0);
            point.remove(divided);
            solve_free_coordinate(child, point, divided, prime, rng)
        }
        LiftStep::LinearForm { delta, unit, residue } => {
            let r = residue.evaluate_mod_p(parent_point, prime);
            let dv = *parent_point.get(delta)?;
            let mut point = parent_point.clone();
            point.insert(delta.clone(), r);
            if r != 0 {
                point.insert(unit.clone(), dv * inv_mod(r, prime) % prime);
                return Some(point);
            }
            solve_free_coordinate(child, point, unit, prime, rng)
        }
    }
}

/// The values the chart's relations allow for one missing coordinate of
/// an otherwise complete chart point.
pub fn free_coordinate_solutions(
    chart: &Chart,
    point: &BTreeMap<Variable, u64>,
    unknown: &Variable,
    prime: u64,
) -> Vec<u64> {
    let subst: BTreeMap<Variable, Polynomial> = point
        .iter()
        .map(|(v, &x)| (v.clone(), Polynomial::one().scale(&BigInt::from(x))))
        .collect();
    let polys: Vec<Polynomial> = chart
        .defining_polys()
        .iter()
        .map(|p| p.substitute(&subst))
        .collect();
    let nonzero: Vec<Variable> = if matches!(unknown, Variable::YInv(_, _)) {
        vec![unknown.clone()]
    } else {
        vec![]
    };
    let Ok(sys) = FpSystem::new(&polys, &[unknown.clone()], prime, &[], &nonzero) else {
        return vec![];
    };
    sys.enumerate(prime as usize)
        .into_iter()
        .map(|s| s[unknown])
        .collect()
}

/// Completes a chart point missing one coordinate: a unique allowed
/// value is taken as is; a full fiber is sampled generically (nonzero
/// when possible).
fn solve_free_coordinate(
    chart: &Chart,
    mut point: BTreeMap<Variable, u64>,
    unknown: &Variable,
    prime: u64,
    rng: &mut ChaCha8Rng,
) -> Option<BTreeMap<Variable, u64>> {
    let solutions = free_coordinate_solutions(chart, &point, unknown, prime);
    if solutions.is_empty() {
        return None;
    }
    let generic: Vec<u64> = solutions.iter().copied().filter(|&v| v != 0).collect();
    let pool = if generic.is_empty() { &solutions } else { &generic };
    point.insert(unknown.clone(), pool[rng.gen_range(0..pool.len())]);
    Some(point)
}

/// All lifts of a root-chart point to the given chart: standard ratio
/// lifts where defined, full fibers where the point sits on a blowup
/// center.
pub fn lift_fiber(
    atlas: &Atlas,
    id: &str,
    root_point: &BTreeMap<Variable, u64>,
    prime: u64,
) -> Vec<BTreeMap<Variable, u64>> {
    let mut path = Vec::new();
    let mut cur = id;
    loop {
        let Some(c) = atlas.charts.get(cur) else { return vec![] };
        path.push(c);
        match &c.parent {
            Some(p) => cur = p,
            None => break,
        }
    }
    path.reverse();
    let mut points = vec![root_point.clone()];
    for chart in path.iter().skip(1) {
        let mut next = Vec::new();
        for p in &points {
            next.extend(step_fiber(chart, p, prime));
        }
        next.sort();
        next.dedup();
        points = next;
    }
    points
}

fn step_fiber(
    child: &Chart,
    parent_point: &BTreeMap<Variable, u64>,
    prime: u64,
) -> Vec<BTreeMap<Variable, u64>> {
    let Some(step) = &child.lift else {
        return vec![parent_point.clone()];
    };
    match step {
        LiftStep::Ratio { exceptional_parent, exceptional_child, divided } => {
            let Some(&y0) = parent_point.get(exceptional_parent) else { return vec![] };
            let Some(&y1) = parent_point.get(divided) else { return vec![] };
            let mut point = parent_point.clone();
            point.remove(exceptional_parent);
            point.insert(exceptional_child.clone(), y0);
            if y0 != 0 {
                point.insert(divided.clone(), y1 * inv_mod(y0, prime) % prime);
                return vec![point];
            }
            if y1 != 0 {
                return vec![];
            }
            point.remove(divided);
            free_coordinate_solutions(child, &point, divided, prime)
                .into_iter()
                .map(|v| {
                    let mut q = point.clone();
                    q.insert(divided.clone(), v);
                    q
                })
                .collect()
        }
        LiftStep::LinearForm { delta, unit, residue } => {
            let r = residue.evaluate_mod_p(parent_point, prime);
            let Some(&dv) = parent_point.get(delta) else { return vec![] };
            let mut point = parent_point.clone();
            point.insert(delta.clone(), r);
            if r != 0 {
                point.insert(unit.clone(), dv * inv_mod(r, prime) % prime);
                return vec![point];
            }
            free_coordinate_solutions(child, &point, unit, prime)
                .into_iter()
                .map(|v| {
                    let mut q = point.clone();
                    q.insert(unit.clone(), v);
                    q
                })
                .collect()
        }
    }
}

/// Pushes a root-chart point down the chart tree to the given chart.
fn push_to_chart(
    atlas: &Atlas,
    id: &str,
    root_point: &BTreeMap<Variable, u64>,
    prime: u64,
    rng: &mut ChaCha8Rng,
) -> Option<BTreeMap<Variable, u64>> {
    let mut path = Vec::new();
    let mut cur = id;
    loop {
        let c = atlas.charts.get(cur)?;
        path.push(c);
        match &c.parent {
            Some(p) => cur = p,
            None => break,
        }
    }
    path.reverse();
    let mut point = root_point.clone();
    for chart in path.iter().skip(1) {
        point = step_point(chart, &point, prime, rng)?;
    }
    Some(point)
}

/// Computes the subscheme's transform data on the given charts by
/// sampling: `count` generic points per prime are pushed down the chart
/// tree; the zero set collects the coordinates vanishing at every landed
/// point, and the one set the coordinates the chart's relations prove
/// invertible on the zero set's locus.
pub fn transport(
    atlas: &Atlas,
    gamma: &Gamma,
    ids: &[String],
    count: usize,
    seed: u64,
) -> Result<BTreeMap<String, GammaState>, GammaError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut root_points: BTreeMap<u64, Vec<BTreeMap<Variable, u64>>> = BTreeMap::new();
    for &prime in &atlas.config.primes {
        let mut lifted = Vec::new();
        let mut trials = 0;
        while lifted.len() < count && trials < 40 * count {
            trials += 1;
            let pts = dense_sample(atlas.d, atlas.n, &atlas.m, gamma, prime, 1, &mut rng)?;
            if let Some(q) = graph_lift(&atlas.system, &pts[0], prime) {
                lifted.push(q);
            }
        }
        if lifted.is_empty() {
            return Err(GammaError::InsufficientSampling {
                detail: format!("no subscheme point lifts to the model graph over F_{prime}"),
            });
        }
        root_points.insert(prime, lifted);
    }

    let mut out = BTreeMap::new();
    for id in ids {
        let chart = atlas.chart(id);
        let mut samples: BTreeMap<u64, Vec<BTreeMap<Variable, u64>>> = BTreeMap::new();
        for (&prime, pts) in &root_points {
            let landed: Vec<BTreeMap<Variable, u64>> = pts
                .iter()
                .filter_map(|q| push_to_chart(atlas, id, q, prime, &mut rng))
                .collect();
            samples.insert(prime, landed);
        }
        let reached_primes: Vec<u64> = samples
            .iter()
            .filter(|(_, pts)| !pts.is_empty())
            .map(|(&p, _)| p)
            .collect();
        let reached = !reached_primes.is_empty();
        let mut uncertain = chart.uncertain;
        if reached && reached_primes.len() < atlas.config.primes.len() {
            uncertain = true;
        }

        // Zero set: coordinates vanishing at every landed sample, agreed
        // on by every prime that reached the chart.
        let mut zero_set = BTreeSet::new();
        if reached {
            let per_prime: Vec<BTreeSet<Variable>> = reached_primes
                .iter()
                .map(|p| {
                    chart
                        .vars
                        .iter()
                        .filter(|v| samples[p].iter().all(|q| q[*v] == 0))
                        .cloned()
                        .collect()
                })
                .collect();
            zero_set = per_prime[0].clone();
            for s in &per_prime[1..] {
                if *s != zero_set {
                    uncertain = true;
                }
                zero_set = zero_set.intersection(s).cloned().collect();
            }
        }

        // One set: invertible coordinates, plus those provably nonzero
        // on the locus of the zero set at both primes.
        let mut one_set: BTreeSet<Variable> = chart.units().into_iter().collect();
        if reached {
            let zeros: Vec<Variable> = zero_set.iter().cloned().collect();
            for v in &chart.vars {
                if zero_set.contains(v) || one_set.contains(v) {
                    continue;
                }
                let mut pinned = zeros.clone();
                pinned.push(v.clone());
                let mut verdicts = Vec::new();
                for &p in &atlas.config.primes {
                    let sys = FpSystem::new(
                        &chart.defining_polys(),
                        &chart.coordinates(),
                        p,
                        &pinned,
                        &chart.units(),
                    )?;
                    verdicts.push(!sys.has_solution());
                }
                if verdicts.iter().all(|&x| x) {
                    one_set.insert(v.clone());
                } else if verdicts.iter().any(|&x| x) {
                    uncertain = true;
                }
            }
        }

        out.insert(
            id.clone(),
            GammaState { chart: id.clone(), zero_set, one_set, reached, uncertain, samples },
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blowup::{run_pipeline, PipelineConfig};
    use crate::model::defining_system;
    use crate::polyengine::parse_polynomial;

    fn idx(s: &[u8]) -> PluckerIndex {
        PluckerIndex::new(s)
    }

    #[test]
    fn matroid_extraction() {
        let m123 = idx(&[1, 2, 3]);
        // The uniform matroid: every 3-subset is a basis; nothing pinned.
        let uniform = Matroid::new(6, 3, enumerate_indices(3, 6).unwrap()).unwrap();
        let gamma = matroid_to_gamma(&uniform, &m123).unwrap();
        assert!(gamma.members.is_empty());

        // One non-basis: exactly that coordinate is pinned.
        let bases: Vec<PluckerIndex> = enumerate_indices(3, 6)
            .unwrap()
            .into_iter()
            .filter(|u| *u != idx(&[4, 5, 6]))
            .collect();
        let mat = Matroid::new(6, 3, bases).unwrap();
        let gamma = matroid_to_gamma(&mat, &m123).unwrap();
        assert_eq!(gamma.members, BTreeSet::from([idx(&[4, 5, 6])]));

        // The chart index must be a basis.
        assert!(matches!(
            matroid_to_gamma(&mat, &idx(&[4, 5, 6])),
            Err(GammaError::ChartNotBasis)
        ));

        // Exchange failure is caught.
        assert!(matches!(
            Matroid::new(6, 3, [idx(&[1, 2, 3]), idx(&[4, 5, 6])]),
            Err(GammaError::NotAMatroid { .. })
        ));
    }

    #[test]
    fn scheme_and_relevance() {
        let m = idx(&[1, 2]);
        let gamma = Gamma::new(2, 4, &m, [idx(&[3, 4])]).unwrap();
        let polys = gamma_scheme(2, 4, &m, &gamma).unwrap();
        assert_eq!(polys.len(), 2);
        assert_eq!(polys[0], parse_polynomial("x[34]").unwrap());
        assert_eq!(
            polys[1],
            parse_polynomial("x[34] - x[13]*x[24] + x[14]*x[23]").unwrap()
        );

        let family = primary_family(2, 4, &m).unwrap();
        assert!(is_relevant(&family[0], &Gamma::empty()));
        assert!(is_relevant(&family[0], &gamma));
        // Pinning one factor of every term makes the relation irrelevant.
        let all = Gamma::new(2, 4, &m, [idx(&[3, 4]), idx(&[1, 3]), idx(&[1, 4])]).unwrap();
        assert!(!is_relevant(&family[0], &all));

        // The pinned index hits exactly the pair coordinates containing it.
        assert_eq!(seeded_pair_zeros(&family[0], &gamma), vec![(m.clone(), idx(&[3, 4]))]);

        assert!(Gamma::new(2, 4, &m, [m.clone()]).is_err());
        assert!(Gamma::new(2, 4, &m, [idx(&[1, 5])]).is_err());
    }

    #[test]
    fn dense_samples_lie_on_the_subscheme() {
        let m = idx(&[1, 2]);
        let gamma = Gamma::new(2, 4, &m, [idx(&[3, 4])]).unwrap();
        let system = defining_system(2, 4, &m, None, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for prime in [5u64, 7] {
            let pts = dense_sample(2, 4, &m, &gamma, prime, 20, &mut rng).unwrap();
            assert_eq!(pts.len(), 20);
            let scheme = gamma_scheme(2, 4, &m, &gamma).unwrap();
            for q in &pts {
                for poly in &scheme {
                    assert_eq!(poly.evaluate_mod_p(q, prime), 0);
                }
                // The graph lift satisfies the whole model system.
                if let Some(lift) = graph_lift(&system, q, prime) {
                    let root = crate::blowup::root_chart(2, 4, &system).unwrap();
                    for poly in root.defining_polys() {
                        assert_eq!(poly.evaluate_mod_p(&lift, prime), 0, "{poly}");
                    }
                }
            }
        }
    }

    #[test]
    fn transport_through_the_small_pipeline() {
        let m = idx(&[1, 2]);
        let atlas = run_pipeline(2, 4, &m, PipelineConfig::default()).unwrap();
        let gamma = Gamma::new(2, 4, &m, [idx(&[3, 4])]).unwrap();

        // On the root chart, the transform vanishes exactly on the
        // pinned coordinate and the leading pair coordinate — which is
        // the first blowup center, so the contained branch is taken.
        let root_state = &transport(&atlas, &gamma, &["r".to_string()], 40, 11).unwrap()["r"];
        assert!(root_state.reached);
        assert_eq!(
            root_state.zero_set,
            BTreeSet::from([
                Variable::Pi(idx(&[3, 4])),
                Variable::rho(idx(&[1, 2]), idx(&[3, 4])),
            ])
        );
        assert!(containment_test(
            root_state,
            &Variable::Pi(idx(&[3, 4])),
            &Variable::rho(idx(&[1, 2]), idx(&[3, 4])),
        ));

        // The transform reaches the frontier, with disjoint zero/one
        // sets and certainty at both primes.
        let states = transport(&atlas, &gamma, &atlas.frontier, 40, 11).unwrap();
        assert!(states.values().any(|s| s.reached));
        for s in states.values() {
            assert!(s.zero_set.is_disjoint(&s.one_set));
            assert!(!s.uncertain, "uncertain transport on {}", s.chart);
            if !s.reached {
                continue;
            }
            // Landed samples satisfy the chart's relations.
            let chart = atlas.chart(&s.chart);
            for (&p, pts) in &s.samples {
                for q in pts {
                    for poly in chart.defining_polys() {
                        assert_eq!(poly.evaluate_mod_p(q, p), 0);
                    }
                }
            }
        }

        // The empty subscheme reaches the frontier with an empty zero set.
        let states = transport(&atlas, &Gamma::empty(), &atlas.frontier, 40, 11).unwrap();
        assert!(states.values().any(|s| s.reached));
        for s in states.values().filter(|s| s.reached) {
            assert!(s.zero_set.is_empty(), "{:?} on {}", s.zero_set, s.chart);
        }
    }
}
