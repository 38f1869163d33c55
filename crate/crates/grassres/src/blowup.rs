//! The sequential blowup pipeline as an explicit coordinate-chart atlas.
//!
//! Three families of blowups act on the model, block by block: the
//! leading blowup of a block (center: the block's leading Plücker
//! variable together with its leading pair variable), a terminating
//! sequence of pairwise blowups (centers: pairs of divisors selected by
//! association multiplicities against the two terms of a main binomial),
//! and one final linear-form blowup per block (center: the divisor of
//! the block's linear relation together with the block's leading
//! exceptional divisor).
//!
//! Charts are materialized eagerly: each carries its coordinate set, the
//! transformed relations, a composed substitution back to the root
//! chart, the local equation of every divisor meeting it, and a lift
//! recipe for transporting points upward from its parent. Whether a
//! center meets the strict transform of the model is decided by point
//! search over small prime fields (two primes, conservatively), which is
//! also how empty charts are pruned.

use crate::indexing::{order_wp, IndexError, PluckerIndex};
use crate::model::{defining_system, ordered_non_leading, Binomial, DefiningSystem, ModelError};
use crate::polyengine::{FpSystem, Monomial, PolyError, Polynomial, Variable};
use num_bigint::BigInt;
use num_traits::One;
use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BlowupError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("block {block} τ={tau}: cap exceeded ({detail}); this signals an implementation bug, the pipeline is provably finite")]
    NonTermination { block: usize, tau: usize, detail: String },
    #[error("center divisor {divisor} on chart {chart} has a formal local equation; blowing up such centers is not supported")]
    FormalCenter { chart: String, divisor: String },
    #[error("chart {chart} cannot be dropped at the linear stage: its model transform meets the pinned locus")]
    DropObstructed { chart: String },
    #[error("linear relation on chart {chart} is not in the expected shape: {detail}")]
    LinearShape { chart: String, detail: String },
}

/// A divisor of the ambient space, identified globally across charts.
/// Exceptional divisors carry the stamp of the step creating them, so
/// that "order of occurrence" is a total order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Divisor {
    /// Vanishing of an affine Plücker coordinate `x_u`.
    Plucker(PluckerIndex),
    /// Vanishing of a pair coordinate `x_(u,v)`.
    Pair(PluckerIndex, PluckerIndex),
    /// Exceptional divisor of the leading blowup of block `k`.
    Lead(usize),
    /// Exceptional divisor of a pairwise blowup, with its creation stamp
    /// and the stage that scheduled it.
    Pairwise { stamp: usize, block: usize, tau: usize, round: usize, step: usize },
    /// Exceptional divisor of the linear-form blowup of block `k`.
    Linear { block: usize, stamp: usize },
}

impl Divisor {
    pub fn pair(u: PluckerIndex, v: PluckerIndex) -> Divisor {
        if u <= v {
            Divisor::Pair(u, v)
        } else {
            Divisor::Pair(v, u)
        }
    }

    /// The creation stamp of an exceptional divisor (leading blowups are
    /// stamped by their block index; every later stamp is larger).
    pub fn occurrence(&self) -> Option<usize> {
        match self {
            Divisor::Plucker(_) | Divisor::Pair(_, _) => None,
            Divisor::Lead(k) => Some(*k),
            Divisor::Pairwise { stamp, .. } | Divisor::Linear { stamp, .. } => Some(*stamp),
        }
    }
}

impl fmt::Display for Divisor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Divisor::Plucker(u) => write!(f, "X[{u}]"),
            Divisor::Pair(u, v) => write!(f, "X[({u},{v})]"),
            Divisor::Lead(k) => write!(f, "E[t{k}]"),
            Divisor::Pairwise { stamp, .. } => write!(f, "E[w{stamp}]"),
            Divisor::Linear { block, .. } => write!(f, "E[l{block}]"),
        }
    }
}

/// One term of a main binomial, as a key of the association table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct TermRef {
    pub block: usize,
    pub tau: usize,
    /// `false` for the plus term, `true` for the minus term.
    pub minus: bool,
}

/// Association multiplicities: how strongly each divisor vanishes along
/// each term of each main binomial. Drives center selection for the
/// pairwise blowups.
pub type Associations = BTreeMap<(Divisor, TermRef), u32>;

/// Pipeline position of a chart.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Stage {
    Root,
    Lead(usize),
    Pairwise { block: usize, tau: usize, round: usize, step: usize },
    Linear(usize),
}

impl Stage {
    fn id_fragment(&self) -> String {
        match self {
            Stage::Root => "r".to_string(),
            Stage::Lead(k) => format!("t{k}"),
            Stage::Pairwise { block, tau, round, step } => {
                format!("w{block}_{tau}_{round}_{step}")
            }
            Stage::Linear(k) => format!("l{k}"),
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id_fragment())
    }
}

/// How to transport a point of the parent chart to this chart.
#[derive(Clone, Debug)]
pub enum LiftStep {
    /// A coordinate blowup step: the parent's `exceptional_parent` value
    /// becomes the child's `exceptional_child` value, and `divided` is
    /// divided by it (the lift fails where it vanishes).
    Ratio {
        exceptional_parent: Variable,
        exceptional_child: Variable,
        divided: Variable,
    },
    /// A linear-form blowup step: the parent's `delta` value is divided
    /// by the value of `residue` to produce the invertible coordinate
    /// `unit`, and `delta` becomes formal with value `residue`.
    LinearForm {
        delta: Variable,
        unit: Variable,
        residue: Polynomial,
    },
}

/// One coordinate chart of the atlas, with its transformed relations.
#[derive(Clone, Debug)]
pub struct Chart {
    /// Branch-choice path from the root chart, e.g. `r.t1b.w1_1_1_1a`.
    pub id: String,
    pub parent: Option<String>,
    pub stage: Stage,
    /// Free polynomial coordinates of the chart.
    pub vars: BTreeSet<Variable>,
    /// Indices whose Plücker coordinate has become exceptional.
    pub e_set: BTreeSet<PluckerIndex>,
    /// Pairs whose pair coordinate has become exceptional.
    pub d_set: BTreeSet<(PluckerIndex, PluckerIndex)>,
    /// Blocks whose linear-form blowup has been absorbed; the block's
    /// exceptional pair coordinate is then formal, defined in `l_defs`.
    pub l_set: BTreeSet<usize>,
    /// Defining polynomial of each formal exceptional coordinate.
    pub l_defs: BTreeMap<Variable, Polynomial>,
    /// Composed substitution from root coordinates to this chart's; every
    /// image is a monomial, so pullbacks of monomials stay monomials.
    pub subst: BTreeMap<Variable, Polynomial>,
    /// Local equation of every divisor meeting the chart.
    pub divisor_of: BTreeMap<Variable, Divisor>,
    pub lift: Option<LiftStep>,
    pub mains: Vec<Binomial>,
    pub residuals: Vec<Binomial>,
    pub quotients: Vec<Binomial>,
    /// Transformed linear relations, one per block.
    pub linears: Vec<Polynomial>,
    /// Set when the two certification primes disagreed about a liveness
    /// or pruning decision on this chart.
    pub uncertain: bool,
}

impl Chart {
    /// All polynomials cutting out the model transform on this chart,
    /// including the defining equations of formal coordinates.
    pub fn defining_polys(&self) -> Vec<Polynomial> {
        let mut out: Vec<Polynomial> = self
            .mains
            .iter()
            .chain(&self.residuals)
            .chain(&self.quotients)
            .map(|b| b.polynomial())
            .collect();
        out.extend(self.linears.iter().cloned());
        for (v, def) in &self.l_defs {
            out.push(Polynomial::var(v.clone()).sub(def));
        }
        out
    }

    /// The solver's variable roster: chart coordinates plus formal ones.
    pub fn coordinates(&self) -> Vec<Variable> {
        self.vars.iter().chain(self.l_defs.keys()).cloned().collect()
    }

    /// Coordinates that are units on the chart (never zero on points).
    pub fn units(&self) -> Vec<Variable> {
        self.vars
            .iter()
            .filter(|v| matches!(v, Variable::YInv(_, _)))
            .cloned()
            .collect()
    }

    /// Whether the model transform restricted to this chart, further
    /// intersected with the vanishing of `extra_zero`, has an `F_p`
    /// point.
    pub fn solutions_exist(&self, prime: u64, extra_zero: &[Variable]) -> Result<bool, PolyError> {
        let sys = FpSystem::new(
            &self.defining_polys(),
            &self.coordinates(),
            prime,
            extra_zero,
            &self.units(),
        )?;
        Ok(sys.has_solution())
    }

    /// The local equation of a divisor on this chart, if it meets it.
    pub fn local_equation(&self, d: &Divisor) -> Option<Variable> {
        self.divisor_of
            .iter()
            .find(|(_, dv)| *dv == d)
            .map(|(v, _)| v.clone())
    }
}

/// Per-(block, τ) statistics of the pairwise-blowup stage.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StageStats {
    pub block: usize,
    pub tau: usize,
    /// Number of rounds until no live center remained.
    pub rounds: usize,
    /// Number of live centers blown up in each round.
    pub live_sets_per_round: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct PipelineConfig {
    /// Primes used for liveness, pruning, and emptiness decisions.
    pub primes: Vec<u64>,
    /// Degree bound for the quotient-binomial kernel search.
    pub max_rho_degree: usize,
    /// Cap on pairwise rounds per (block, τ).
    pub round_cap: usize,
    /// Cap on live centers per round.
    pub sets_cap: usize,
    /// Prune charts whose model transform has no point at any prime, and
    /// skip blowing up charts the center provably misses.
    pub prune: bool,
    /// Process only the first `blocks` blocks (all when `None`).
    pub blocks: Option<usize>,
    /// Stop after the leading blowups.
    pub stop_after_lead: bool,
    /// Skip the linear-form blowups (for mutation testing only: the
    /// resulting transform is not expected to certify as smooth).
    pub skip_linear_stage: bool,
    /// Basepoint pair per block (defaults chosen by the model builder).
    pub basepoint: Option<Vec<(PluckerIndex, PluckerIndex)>>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            primes: vec![5, 7],
            max_rho_degree: 3,
            round_cap: 64,
            sets_cap: 256,
            prune: true,
            blocks: None,
            stop_after_lead: false,
            skip_linear_stage: false,
            basepoint: None,
        }
    }
}

/// A blowup center: two divisors whose intersection is blown up.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CenterSpec {
    pub plus: Divisor,
    pub minus: Divisor,
}

/// The full atlas produced by the pipeline. `charts` retains every chart
/// ever created (parents are needed for point lifting); `frontier` lists
/// the ids of the current leaves.
#[derive(Debug)]
pub struct Atlas {
    pub d: usize,
    pub n: usize,
    pub m: PluckerIndex,
    pub system: DefiningSystem,
    pub charts: BTreeMap<String, Chart>,
    pub frontier: Vec<String>,
    /// Frontier charts removed because their model transform was empty
    /// at every prime.
    pub pruned: Vec<String>,
    /// Charts dropped at a linear stage after an emptiness check.
    pub dropped: Vec<String>,
    pub assoc: Associations,
    pub stats: Vec<StageStats>,
    /// Number of leading blocks processed.
    pub processed_blocks: usize,
    pub config: PipelineConfig,
    next_stamp: usize,
    /// Memoized emptiness verdicts, keyed by chart id, zero-pinned
    /// coordinates, and prime. Charts never change once created, so the
    /// verdicts stay valid for the lifetime of the atlas.
    liveness: RefCell<BTreeMap<(String, Vec<Variable>, u64), bool>>,
    /// Cumulative wall-clock time spent on emptiness queries (for the
    /// trace output).
    solver_time: std::cell::Cell<std::time::Duration>,
}

impl Atlas {
    pub fn chart(&self, id: &str) -> &Chart {
        &self.charts[id]
    }

    pub fn frontier_charts(&self) -> impl Iterator<Item = &Chart> {
        self.frontier.iter().map(|id| &self.charts[id])
    }

    /// Transports a root-chart point to the given chart through the lift
    /// chain; `None` where some intermediate lift is undefined (the
    /// point sits over a blowup center).
    pub fn lift_point(
        &self,
        id: &str,
        root: &BTreeMap<Variable, u64>,
        prime: u64,
    ) -> Option<BTreeMap<Variable, u64>> {
        let mut path = Vec::new();
        let mut cur = id;
        loop {
            let c = self.charts.get(cur)?;
            path.push(c);
            match &c.parent {
                Some(p) => cur = p,
                None => break,
            }
        }
        path.reverse();
        let mut point = root.clone();
        for chart in path {
            let Some(step) = &chart.lift else { continue };
            match step {
                LiftStep::Ratio { exceptional_parent, exceptional_child, divided } => {
                    let zeta = *point.get(exceptional_parent)?;
                    if zeta == 0 {
                        return None;
                    }
                    let dv = point.get_mut(divided)?;
                    *dv = *dv * crate::polyengine::inv_mod(zeta, prime) % prime;
                    point.remove(exceptional_parent);
                    point.insert(exceptional_child.clone(), zeta);
                }
                LiftStep::LinearForm { delta, unit, residue } => {
                    let r = residue.evaluate_mod_p(&point, prime);
                    if r == 0 {
                        return None;
                    }
                    let dv = point.remove(delta)?;
                    point.insert(unit.clone(), dv * crate::polyengine::inv_mod(r, prime) % prime);
                    point.insert(delta.clone(), r);
                }
            }
        }
        Some(point)
    }

    /// Whether the given binomial terminates on the chart at the prime:
    /// no point of the model transform has both terms vanishing.
    pub fn terminated(
        &self,
        chart: &Chart,
        b: &Binomial,
        prime: u64,
    ) -> Result<bool, PolyError> {
        let mut polys = chart.defining_polys();
        polys.push(Polynomial::monomial(b.plus.clone(), BigInt::one()));
        polys.push(Polynomial::monomial(b.minus.clone(), BigInt::one()));
        let sys = FpSystem::new(&polys, &chart.coordinates(), prime, &[], &chart.units())?;
        Ok(!sys.has_solution())
    }

    /// Cached variant of [`Chart::solutions_exist`]: whether the model
    /// transform on the chart, with `pins` forced to zero, has an `F_p`
    /// point.
    fn chart_live(&self, chart: &Chart, pins: &[Variable], prime: u64) -> Result<bool, PolyError> {
        let key = (chart.id.clone(), pins.to_vec(), prime);
        if let Some(&v) = self.liveness.borrow().get(&key) {
            return Ok(v);
        }
        let start = std::time::Instant::now();
        let v = chart.solutions_exist(prime, pins)?;
        self.solver_time.set(self.solver_time.get() + start.elapsed());
        self.liveness.borrow_mut().insert(key, v);
        Ok(v)
    }

    fn apply_center(
        &mut self,
        stage: Stage,
        divisor: Divisor,
        center: &CenterSpec,
    ) -> Result<(), BlowupError> {
        let mut new_frontier = Vec::new();
        for id in std::mem::take(&mut self.frontier) {
            let chart = &self.charts[&id];
            let (Some(vp), Some(vm)) = (
                chart.local_equation(&center.plus),
                chart.local_equation(&center.minus),
            ) else {
                new_frontier.push(id);
                continue;
            };
            for (v, dv) in [(&vp, &center.plus), (&vm, &center.minus)] {
                if !chart.vars.contains(v) {
                    return Err(BlowupError::FormalCenter {
                        chart: id.clone(),
                        divisor: dv.to_string(),
                    });
                }
            }
            if self.config.prune {
                let mut meets = false;
                for &p in &self.config.primes {
                    if self.chart_live(chart, &[vp.clone(), vm.clone()], p)? {
                        meets = true;
                        break;
                    }
                }
                if !meets {
                    // The center misses the model transform here; the
                    // blowup is the identity near it.
                    new_frontier.push(id);
                    continue;
                }
            }
            for child in blow_up(chart, (&vp, &vm), divisor.clone(), stage.clone()) {
                new_frontier.push(child.id.clone());
                self.charts.insert(child.id.clone(), child);
            }
        }
        new_frontier.sort();
        self.frontier = new_frontier;
        Ok(())
    }

    fn prune_frontier(&mut self) -> Result<(), BlowupError> {
        if !self.config.prune {
            return Ok(());
        }
        let mut keep = Vec::new();
        for id in std::mem::take(&mut self.frontier) {
            let chart = &self.charts[&id];
            let mut verdicts = Vec::new();
            for &p in &self.config.primes {
                verdicts.push(self.chart_live(chart, &[], p)?);
            }
            if verdicts.iter().any(|&v| v) {
                if verdicts.iter().any(|&v| !v) {
                    self.charts.get_mut(&id).expect("frontier chart exists").uncertain = true;
                }
                keep.push(id);
            } else {
                self.pruned.push(id);
            }
        }
        self.frontier = keep;
        Ok(())
    }
}

/// The centers of the leading blowups, in the block order.
pub fn leading_centers(
    d: usize,
    n: usize,
    m: &PluckerIndex,
) -> Result<Vec<CenterSpec>, BlowupError> {
    Ok(crate::indexing::primary_index_set(d, n, m)?
        .into_iter()
        .map(|u| CenterSpec {
            plus: Divisor::Plucker(u.clone()),
            minus: Divisor::pair(m.clone(), u),
        })
        .collect())
}

/// The root chart of the atlas, carrying the defining system verbatim.
pub fn root_chart(d: usize, n: usize, system: &DefiningSystem) -> Result<Chart, BlowupError> {
    let m = &system.m;
    let mut vars: BTreeSet<Variable> = crate::indexing::enumerate_indices(d, n)?
        .into_iter()
        .filter(|u| u != m)
        .map(Variable::Pi)
        .collect();
    let units: BTreeSet<Variable> = system
        .basepoint
        .iter()
        .map(|(a, b)| Variable::rho(a.clone(), b.clone()))
        .collect();
    for f in &system.family {
        for (a, b) in crate::model::block_pairs(f) {
            let v = Variable::rho(a, b);
            if !units.contains(&v) {
                vars.insert(v);
            }
        }
    }
    let divisor_of: BTreeMap<Variable, Divisor> = vars
        .iter()
        .map(|v| {
            let d = match v {
                Variable::Pi(u) => Divisor::Plucker(u.clone()),
                Variable::Rho(u, w) => Divisor::pair(u.clone(), w.clone()),
                _ => unreachable!("root coordinates are Plücker or pair variables"),
            };
            (v.clone(), d)
        })
        .collect();
    let subst = vars
        .iter()
        .map(|v| (v.clone(), Polynomial::var(v.clone())))
        .collect();
    Ok(Chart {
        id: "r".to_string(),
        parent: None,
        stage: Stage::Root,
        vars,
        e_set: BTreeSet::new(),
        d_set: BTreeSet::new(),
        l_set: BTreeSet::new(),
        l_defs: BTreeMap::new(),
        subst,
        divisor_of,
        lift: None,
        mains: system.main.clone(),
        residuals: system.residual.clone(),
        quotients: system.quotient.clone(),
        linears: system.linear.clone(),
        uncertain: false,
    })
}

/// The exceptional rename of a center coordinate: a Plücker or pair
/// coordinate turns into its exceptional counterpart; a coordinate that
/// is already exceptional keeps its name (only its divisor label moves).
fn exceptional_rename(v: &Variable) -> Variable {
    match v {
        Variable::Pi(u) => Variable::Eps(u.clone()),
        Variable::Rho(u, w) => Variable::delta(u.clone(), w.clone()),
        Variable::Eps(_) | Variable::Delta(_, _) => v.clone(),
        Variable::YInv(_, _) => unreachable!("invertible coordinates are never center equations"),
    }
}

/// Applies the blowup substitution `v_exc ↦ ζ`, `v_div ↦ ζ·v_div` to a
/// monomial.
fn blowup_monomial(mon: &Monomial, v_exc: &Variable, zeta: &Variable, v_div: &Variable) -> Monomial {
    let e_exc = mon.exponent(v_exc);
    let e_div = mon.exponent(v_div);
    let mut out = mon.clone();
    out.0.remove(v_exc);
    if e_exc + e_div > 0 {
        *out.0.entry(zeta.clone()).or_insert(0) += e_exc + e_div;
    }
    out
}

/// The proper transform of a binomial: pull both terms back and divide
/// the largest common power of the exceptional coordinate.
fn blowup_binomial(b: &Binomial, v_exc: &Variable, zeta: &Variable, v_div: &Variable) -> Binomial {
    let plus = blowup_monomial(&b.plus, v_exc, zeta, v_div);
    let minus = blowup_monomial(&b.minus, v_exc, zeta, v_div);
    let l = plus.exponent(zeta).min(minus.exponent(zeta));
    let z = if l > 0 {
        Monomial(BTreeMap::from([(zeta.clone(), l)]))
    } else {
        Monomial::one()
    };
    Binomial {
        kind: b.kind,
        block: b.block,
        main_index: b.main_index,
        plus: plus.div(&z).expect("common power divides"),
        minus: minus.div(&z).expect("common power divides"),
    }
}

/// The proper transform of a (not necessarily binomial) relation: pull
/// back, then divide the common power of the exceptional coordinate.
fn blowup_polynomial(
    p: &Polynomial,
    step: &BTreeMap<Variable, Polynomial>,
    zeta: &Variable,
) -> Polynomial {
    let pulled = p.substitute(step);
    let c = pulled.0.keys().map(|m| m.exponent(zeta)).min().unwrap_or(0);
    if c == 0 {
        return pulled;
    }
    pulled
        .divide_out(&Monomial(BTreeMap::from([(zeta.clone(), c)])))
        .expect("common power divides")
}

fn child_chart(
    parent: &Chart,
    v_exc: &Variable,
    v_div: &Variable,
    divisor: &Divisor,
    stage: &Stage,
    side: char,
) -> Chart {
    let zeta = exceptional_rename(v_exc);
    let step: BTreeMap<Variable, Polynomial> = BTreeMap::from([
        (v_exc.clone(), Polynomial::var(zeta.clone())),
        (
            v_div.clone(),
            Polynomial::var(zeta.clone()).mul(&Polynomial::var(v_div.clone())),
        ),
    ]);

    let mut vars = parent.vars.clone();
    vars.remove(v_exc);
    vars.insert(zeta.clone());

    let mut e_set = parent.e_set.clone();
    let mut d_set = parent.d_set.clone();
    match v_exc {
        Variable::Pi(u) => {
            e_set.insert(u.clone());
        }
        Variable::Rho(u, w) => {
            let (a, b) = if u <= w { (u.clone(), w.clone()) } else { (w.clone(), u.clone()) };
            d_set.insert((a, b));
        }
        _ => {}
    }

    let subst = parent
        .subst
        .iter()
        .map(|(v, p)| (v.clone(), p.substitute(&step)))
        .collect();
    let l_defs: BTreeMap<Variable, Polynomial> = parent
        .l_defs
        .iter()
        .map(|(v, p)| (v.clone(), p.substitute(&step)))
        .collect();
    for def in l_defs.values() {
        // A formal coordinate hiding a power of the new exceptional one
        // would silently break proper-transform division.
        assert_eq!(
            def.content_monomial().exponent(&zeta),
            0,
            "formal coordinate definition gained an exceptional factor"
        );
    }

    let mut divisor_of = parent.divisor_of.clone();
    divisor_of.remove(v_exc);
    divisor_of.insert(zeta.clone(), divisor.clone());

    Chart {
        id: format!("{}.{}{}", parent.id, stage.id_fragment(), side),
        parent: Some(parent.id.clone()),
        stage: stage.clone(),
        vars,
        e_set,
        d_set,
        l_set: parent.l_set.clone(),
        l_defs,
        subst,
        divisor_of,
        lift: Some(LiftStep::Ratio {
            exceptional_parent: v_exc.clone(),
            exceptional_child: zeta.clone(),
            divided: v_div.clone(),
        }),
        mains: parent.mains.iter().map(|b| blowup_binomial(b, v_exc, &zeta, v_div)).collect(),
        residuals: parent
            .residuals
            .iter()
            .map(|b| blowup_binomial(b, v_exc, &zeta, v_div))
            .collect(),
        quotients: parent
            .quotients
            .iter()
            .map(|b| blowup_binomial(b, v_exc, &zeta, v_div))
            .collect(),
        linears: parent
            .linears
            .iter()
            .map(|p| blowup_polynomial(p, &step, &zeta))
            .collect(),
        uncertain: parent.uncertain,
    }
}

/// Blows up a chart along the vanishing of two of its coordinates,
/// producing the two standard charts of the blowup. When either center
/// coordinate is absent the chart is returned unchanged (the center does
/// not meet it).
pub fn blow_up(
    parent: &Chart,
    center: (&Variable, &Variable),
    divisor: Divisor,
    stage: Stage,
) -> Vec<Chart> {
    if !parent.vars.contains(center.0) || !parent.vars.contains(center.1) {
        return vec![parent.clone()];
    }
    vec![
        child_chart(parent, center.0, center.1, &divisor, &stage, 'a'),
        child_chart(parent, center.1, center.0, &divisor, &stage, 'b'),
    ]
}

/// Initializes the association table on the atlas after the leading
/// blowups. Conventions: the plus term of main binomial (k, τ) with pair
/// (u_s, v_s) is associated with the Plücker divisor of u_k and the pair
/// divisor of (u_s, v_s); the minus term with the Plücker divisors of
/// u_s, v_s and with the leading exceptional divisor of every other
/// block whose leading index occurs among them. The pair divisor of the
/// block's leading pair is never associated with the minus term, and the
/// block's own leading exceptional divisor carries no multiplicity
/// against the block's own terms. Unit (basepoint) pairs carry none
/// either, since their divisor does not exist on the chart.
pub fn initial_associations(system: &DefiningSystem, lead_blocks: usize) -> Associations {
    let mut assoc = Associations::new();
    let leading: Vec<&PluckerIndex> = system.family.iter().map(|f| &f.u).collect();
    for (k0, f) in system.family.iter().enumerate() {
        let k = k0 + 1;
        let base = Variable::rho(system.basepoint[k0].0.clone(), system.basepoint[k0].1.clone());
        for (t0, (_, (us, vs))) in ordered_non_leading(f).iter().enumerate() {
            let tau = t0 + 1;
            let plus = TermRef { block: k, tau, minus: false };
            let minus = TermRef { block: k, tau, minus: true };
            assoc.insert((Divisor::Plucker(f.u.clone()), plus), 1);
            if Variable::rho(us.clone(), vs.clone()) != base {
                assoc.insert((Divisor::pair(us.clone(), vs.clone()), plus), 1);
            }
            assoc.insert((Divisor::Plucker(us.clone()), minus), 1);
            assoc.insert((Divisor::Plucker(vs.clone()), minus), 1);
            for (j0, uj) in leading.iter().enumerate() {
                let j = j0 + 1;
                if j != k && j <= lead_blocks && (*uj == us || *uj == vs) {
                    assoc.insert((Divisor::Lead(j), minus), 1);
                }
            }
        }
    }
    assoc
}

/// Registers the multiplicities of a new pairwise exceptional divisor:
/// for each main-binomial term, the multiplicities of the two center
/// divisors add, minus the amount absorbed by the proper-transform
/// division of that binomial.
fn update_associations(assoc: &mut Associations, center: &CenterSpec, exceptional: &Divisor) {
    fn mult(assoc: &Associations, d: &Divisor, t: TermRef) -> u32 {
        assoc.get(&(d.clone(), t)).copied().unwrap_or(0)
    }
    let keys: BTreeSet<(usize, usize)> = assoc
        .keys()
        .filter(|(d, _)| *d == center.plus || *d == center.minus)
        .map(|(_, t)| (t.block, t.tau))
        .collect();
    for (block, tau) in keys {
        let plus = TermRef { block, tau, minus: false };
        let minus = TermRef { block, tau, minus: true };
        let sp = mult(assoc, &center.plus, plus) + mult(assoc, &center.minus, plus);
        let sm = mult(assoc, &center.plus, minus) + mult(assoc, &center.minus, minus);
        let l = sp.min(sm);
        if sp > l {
            assoc.insert((exceptional.clone(), plus), sp - l);
        }
        if sm > l {
            assoc.insert((exceptional.clone(), minus), sm - l);
        }
    }
}

/// Compares candidate divisors for the plus side of a pairwise center:
/// exceptionals first (later occurrence first), then the Plücker
/// divisor, then the pair divisor (which is the largest).
fn cmp_plus_side(a: &Divisor, b: &Divisor) -> std::cmp::Ordering {
    let key = |d: &Divisor| match d {
        Divisor::Lead(_) | Divisor::Pairwise { .. } | Divisor::Linear { .. } => {
            (0u8, usize::MAX - d.occurrence().expect("exceptional divisor is stamped"))
        }
        Divisor::Plucker(_) => (1, 0),
        Divisor::Pair(_, _) => (2, 0),
    };
    key(a).cmp(&key(b)).then_with(|| a.cmp(b))
}

/// Compares candidate divisors for the minus side: exceptionals first
/// (later occurrence first), then Plücker divisors in the block order.
fn cmp_minus_side(a: &Divisor, b: &Divisor, m: &PluckerIndex) -> std::cmp::Ordering {
    match (a, b) {
        (Divisor::Plucker(u), Divisor::Plucker(v)) => order_wp(u, v, m),
        (Divisor::Plucker(_), _) => std::cmp::Ordering::Greater,
        (_, Divisor::Plucker(_)) => std::cmp::Ordering::Less,
        _ => {
            let sa = a.occurrence().expect("exceptional divisor is stamped");
            let sb = b.occurrence().expect("exceptional divisor is stamped");
            sb.cmp(&sa).then_with(|| a.cmp(b))
        }
    }
}

/// The live pairwise centers for main binomial (block, τ): all pairs of
/// distinct divisors with positive multiplicities against the plus and
/// minus terms whose intersection meets the model transform on some
/// frontier chart at some prime, in the blowup order.
pub fn pairwise_centers(
    atlas: &Atlas,
    block: usize,
    tau: usize,
) -> Result<Vec<CenterSpec>, BlowupError> {
    let plus_key = TermRef { block, tau, minus: false };
    let minus_key = TermRef { block, tau, minus: true };
    let candidates = |key: TermRef| -> Vec<Divisor> {
        atlas
            .assoc
            .iter()
            .filter(|((_, t), mult)| *t == key && **mult > 0)
            .map(|((d, _), _)| d.clone())
            .collect()
    };
    let mut live = Vec::new();
    for dp in candidates(plus_key) {
        'minus: for dm in candidates(minus_key) {
            if dp == dm {
                continue;
            }
            for chart in atlas.frontier_charts() {
                let (Some(vp), Some(vm)) = (chart.local_equation(&dp), chart.local_equation(&dm))
                else {
                    continue;
                };
                if !chart.vars.contains(&vp) || !chart.vars.contains(&vm) {
                    return Err(BlowupError::FormalCenter {
                        chart: chart.id.clone(),
                        divisor: dp.to_string(),
                    });
                }
                for &p in &atlas.config.primes {
                    if atlas.chart_live(chart, &[vp.clone(), vm.clone()], p)? {
                        live.push(CenterSpec { plus: dp.clone(), minus: dm.clone() });
                        continue 'minus;
                    }
                }
            }
        }
    }
    live.sort_by(|a, b| {
        cmp_plus_side(&a.plus, &b.plus).then_with(|| cmp_minus_side(&a.minus, &b.minus, &atlas.m))
    });
    Ok(live)
}

/// Rewrites one chart through the linear-form blowup of block `k`: the
/// block's exceptional pair coordinate becomes formal (defined by the
/// residue of the linear relation), an invertible coordinate is
/// introduced, and the linear relation takes its unit form `1 ± y`.
fn linear_form_chart(
    chart: &Chart,
    k: usize,
    m: &PluckerIndex,
    u_k: &PluckerIndex,
    divisor: &Divisor,
) -> Result<Chart, BlowupError> {
    let delta = Variable::delta(m.clone(), u_k.clone());
    let linear = &chart.linears[k - 1];
    let mut coeff: Option<BigInt> = None;
    for (mon, c) in &linear.0 {
        if mon.exponent(&delta) == 0 {
            continue;
        }
        if coeff.is_some() || *mon != Monomial::var(delta.clone()) {
            return Err(BlowupError::LinearShape {
                chart: chart.id.clone(),
                detail: format!("exceptional coordinate enters {linear} in a non-linear way"),
            });
        }
        if c.magnitude() != &BigInt::one().magnitude().clone() {
            return Err(BlowupError::LinearShape {
                chart: chart.id.clone(),
                detail: format!("exceptional coordinate has non-unit coefficient in {linear}"),
            });
        }
        coeff = Some(c.clone());
    }
    let Some(coeff) = coeff else {
        return Err(BlowupError::LinearShape {
            chart: chart.id.clone(),
            detail: format!("exceptional coordinate is absent from {linear}"),
        });
    };
    let residue = linear.sub(&Polynomial::monomial(Monomial::var(delta.clone()), coeff.clone()));
    let unit = Variable::y_inv(m.clone(), u_k.clone());

    // The blowup substitution is the monomial map δ ↦ δ·y, with δ now a
    // formal coordinate standing for the residue; binomials remain
    // binomials and the δ-exponent keeps measuring vanishing along the
    // new exceptional divisor.
    let step: BTreeMap<Variable, Polynomial> = BTreeMap::from([(
        delta.clone(),
        Polynomial::var(delta.clone()).mul(&Polynomial::var(unit.clone())),
    )]);
    let rescale = |b: &Binomial| -> Binomial {
        let apply = |mon: &Monomial| {
            let e = mon.exponent(&delta);
            let mut out = mon.clone();
            if e > 0 {
                *out.0.entry(unit.clone()).or_insert(0) += e;
            }
            out
        };
        Binomial {
            kind: b.kind,
            block: b.block,
            main_index: b.main_index,
            plus: apply(&b.plus),
            minus: apply(&b.minus),
        }
    };

    let mut vars = chart.vars.clone();
    vars.remove(&delta);
    vars.insert(unit.clone());
    let mut l_set = chart.l_set.clone();
    l_set.insert(k);
    let mut l_defs: BTreeMap<Variable, Polynomial> = chart
        .l_defs
        .iter()
        .map(|(v, p)| (v.clone(), p.substitute(&step)))
        .collect();
    l_defs.insert(delta.clone(), residue.clone());
    let mut divisor_of = chart.divisor_of.clone();
    divisor_of.insert(delta.clone(), divisor.clone());
    let mut linears: Vec<Polynomial> = chart
        .linears
        .iter()
        .map(|p| p.substitute(&step))
        .collect();
    linears[k - 1] = Polynomial::one().add(&Polynomial::var(unit.clone()).scale(&coeff));
    let mains: Vec<Binomial> = chart.mains.iter().map(&rescale).collect();
    let residuals: Vec<Binomial> = chart.residuals.iter().map(&rescale).collect();
    let quotients: Vec<Binomial> = chart.quotients.iter().map(&rescale).collect();

    Ok(Chart {
        id: format!("{}.l{k}", chart.id),
        parent: Some(chart.id.clone()),
        stage: Stage::Linear(k),
        vars,
        e_set: chart.e_set.clone(),
        d_set: chart.d_set.clone(),
        l_set,
        l_defs,
        subst: chart
            .subst
            .iter()
            .map(|(v, p)| (v.clone(), p.substitute(&step)))
            .collect(),
        divisor_of,
        lift: Some(LiftStep::LinearForm { delta, unit, residue }),
        mains,
        residuals,
        quotients,
        linears,
        uncertain: chart.uncertain,
    })
}

/// The linear-form blowup of block `k` across the frontier. Charts where
/// the block's exceptional divisor is labeled by a Plücker coordinate
/// are covered by their siblings: the model transform is verified to
/// miss their deleted locus, and they are dropped. Charts not meeting
/// the exceptional divisor at all are untouched.
pub fn linear_stage(atlas: &mut Atlas, k: usize) -> Result<(), BlowupError> {
    let stamp = atlas.next_stamp;
    atlas.next_stamp += 1;
    let divisor = Divisor::Linear { block: k, stamp };
    for ((d, t), v) in atlas.assoc.clone() {
        if d == Divisor::Lead(k) {
            atlas.assoc.insert((divisor.clone(), t), v);
        }
    }
    let m = atlas.m.clone();
    let u_k = atlas.system.family[k - 1].u.clone();
    let mut new_frontier = Vec::new();
    for id in std::mem::take(&mut atlas.frontier) {
        let chart = &atlas.charts[&id];
        match chart.local_equation(&Divisor::Lead(k)) {
            None => new_frontier.push(id),
            Some(Variable::Eps(_)) => {
                // The chart's points off the pair coordinate's zero locus
                // are covered by sibling charts; verify the model
                // transform misses that locus, then drop the chart.
                let pinned = Variable::rho(m.clone(), u_k.clone());
                for &p in &atlas.config.primes {
                    if atlas.chart_live(chart, &[pinned.clone()], p)? {
                        return Err(BlowupError::DropObstructed { chart: id });
                    }
                }
                atlas.dropped.push(id);
            }
            Some(Variable::Delta(_, _)) => {
                let child = linear_form_chart(chart, k, &m, &u_k, &divisor)?;
                new_frontier.push(child.id.clone());
                atlas.charts.insert(child.id.clone(), child);
            }
            Some(v) => {
                return Err(BlowupError::LinearShape {
                    chart: id,
                    detail: format!("unexpected local equation {v} for the block's exceptional divisor"),
                })
            }
        }
    }
    new_frontier.sort();
    atlas.frontier = new_frontier;
    Ok(())
}

/// Progress logging to stderr, enabled by setting `GRASSRES_TRACE`.
fn trace(line: impl FnOnce() -> String) {
    if std::env::var_os("GRASSRES_TRACE").is_some() {
        eprintln!("[grassres] {}", line());
    }
}

/// Runs the full pipeline on the chart of `m`: leading blowups for every
/// processed block, then per block the pairwise rounds of each main
/// binomial in the τ-order followed by the block's linear-form blowup.
pub fn run_pipeline(
    d: usize,
    n: usize,
    m: &PluckerIndex,
    config: PipelineConfig,
) -> Result<Atlas, BlowupError> {
    let system = defining_system(d, n, m, config.basepoint.clone(), config.max_rho_degree)?;
    let upsilon = system.family.len();
    let blocks = config.blocks.unwrap_or(upsilon).min(upsilon);
    let root = root_chart(d, n, &system)?;
    let centers = leading_centers(d, n, m)?;
    let mut atlas = Atlas {
        d,
        n,
        m: m.clone(),
        charts: BTreeMap::from([(root.id.clone(), root)]),
        frontier: vec!["r".to_string()],
        pruned: Vec::new(),
        dropped: Vec::new(),
        assoc: initial_associations(&system, blocks),
        stats: Vec::new(),
        processed_blocks: blocks,
        system,
        config,
        next_stamp: 1,
        liveness: RefCell::new(BTreeMap::new()),
        solver_time: std::cell::Cell::new(std::time::Duration::ZERO),
    };

    for (k, center) in centers.iter().take(blocks).enumerate() {
        let k = k + 1;
        debug_assert_eq!(atlas.next_stamp, k);
        atlas.next_stamp += 1;
        atlas.apply_center(Stage::Lead(k), Divisor::Lead(k), center)?;
        trace(|| format!("lead blowup {k}: {} frontier charts", atlas.frontier.len()));
        // The block's residual binomials are now consequences of its
        // main ones (with monomial coefficients) and are dropped.
        for id in atlas.frontier.clone() {
            atlas
                .charts
                .get_mut(&id)
                .expect("frontier chart exists")
                .residuals
                .retain(|b| b.block != Some(k));
        }
        atlas.prune_frontier()?;
    }
    if atlas.config.stop_after_lead {
        return Ok(atlas);
    }

    for k in 1..=blocks {
        let t_f = atlas.system.family[k - 1].t_f;
        for tau in 1..=t_f {
            let mut live_sets_per_round = Vec::new();
            let mut round = 0;
            loop {
                round += 1;
                if round > atlas.config.round_cap {
                    return Err(BlowupError::NonTermination {
                        block: k,
                        tau,
                        detail: format!("round cap {} exceeded", atlas.config.round_cap),
                    });
                }
                let live = pairwise_centers(&atlas, k, tau)?;
                trace(|| {
                    format!(
                        "block {k} binomial {tau} round {round}: {} live centers, {} frontier charts",
                        live.len(),
                        atlas.frontier.len()
                    ) + &format!(
                        " ({} queries, {:?} solving)",
                        atlas.liveness.borrow().len(),
                        atlas.solver_time.get()
                    )
                });
                if live.is_empty() {
                    break;
                }
                if live.len() > atlas.config.sets_cap {
                    return Err(BlowupError::NonTermination {
                        block: k,
                        tau,
                        detail: format!(
                            "{} live centers exceed the cap {}",
                            live.len(),
                            atlas.config.sets_cap
                        ),
                    });
                }
                live_sets_per_round.push(live.len());
                for (h, center) in live.iter().enumerate() {
                    let stamp = atlas.next_stamp;
                    atlas.next_stamp += 1;
                    let divisor =
                        Divisor::Pairwise { stamp, block: k, tau, round, step: h + 1 };
                    update_associations(&mut atlas.assoc, center, &divisor);
                    atlas.apply_center(
                        Stage::Pairwise { block: k, tau, round, step: h + 1 },
                        divisor,
                        center,
                    )?;
                    atlas.prune_frontier()?;
                }
            }
            atlas.stats.push(StageStats {
                block: k,
                tau,
                rounds: round - 1,
                live_sets_per_round,
            });
        }
        if !atlas.config.skip_linear_stage {
            linear_stage(&mut atlas, k)?;
            atlas.prune_frontier()?;
        }
    }
    Ok(atlas)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyengine::parse_polynomial;

    fn idx(s: &[u8]) -> PluckerIndex {
        PluckerIndex::new(s)
    }

    fn parsed(s: &str) -> Polynomial {
        parse_polynomial(s).expect("fixture parses")
    }

    #[test]
    fn leading_centers_golden() {
        let cs = leading_centers(2, 4, &idx(&[1, 2])).unwrap();
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].plus, Divisor::Plucker(idx(&[3, 4])));
        assert_eq!(cs[0].minus, Divisor::pair(idx(&[1, 2]), idx(&[3, 4])));
        let cs = leading_centers(3, 6, &idx(&[1, 2, 3])).unwrap();
        assert_eq!(cs.len(), 10);
        assert_eq!(cs[0].plus, Divisor::Plucker(idx(&[1, 4, 5])));
        assert_eq!(cs[0].minus, Divisor::pair(idx(&[1, 2, 3]), idx(&[1, 4, 5])));
    }

    #[test]
    fn leading_blowup_of_the_small_grassmannian() {
        let system = defining_system(2, 4, &idx(&[1, 2]), None, 3).unwrap();
        let root = root_chart(2, 4, &system).unwrap();
        let center = (
            Variable::Pi(idx(&[3, 4])),
            Variable::rho(idx(&[1, 2]), idx(&[3, 4])),
        );
        let kids = blow_up(&root, (&center.0, &center.1), Divisor::Lead(1), Stage::Lead(1));
        assert_eq!(kids.len(), 2);
        let a = &kids[0]; // Plücker side exceptional
        let b = &kids[1]; // pair side exceptional
        assert_eq!(a.id, "r.t1a");
        assert_eq!(a.e_set, BTreeSet::from([idx(&[3, 4])]));
        assert!(a.d_set.is_empty());
        assert_eq!(b.id, "r.t1b");
        assert_eq!(b.d_set, BTreeSet::from([(idx(&[1, 2]), idx(&[3, 4]))]));
        assert!(b.e_set.is_empty());

        // Transformed relations on the pair-side chart: the main
        // binomials lose the exceptional coordinate entirely.
        // τ=1 carries the basepoint pair (13,24), whose coordinate is a
        // unit and has been removed.
        assert_eq!(b.mains[0].polynomial(), parsed("x[34] - x[13]*x[24]"));
        assert_eq!(
            b.mains[1].polynomial(),
            parsed("x[(14,23)]*x[34] - x[14]*x[23]")
        );
        // On the Plücker-side chart they keep the pair coordinate.
        assert_eq!(
            a.mains[1].polynomial(),
            parsed("x[(14,23)] - x[(12,34)]*x[14]*x[23]")
        );
        // Before the division, the minus terms acquire the exceptional
        // coordinate with multiplicity exactly 1 on the pair-side chart.
        let zeta = Variable::delta(idx(&[1, 2]), idx(&[3, 4]));
        for root_b in &system.main {
            let pulled = blowup_monomial(&root_b.minus, &center.1, &zeta, &center.0);
            assert_eq!(pulled.exponent(&zeta), 1);
        }

        // Missing center coordinate: the chart is returned unchanged.
        let noop = blow_up(
            b,
            (&Variable::Pi(idx(&[3, 4])), &Variable::rho(idx(&[1, 2]), idx(&[3, 4]))),
            Divisor::Lead(1),
            Stage::Lead(1),
        );
        assert_eq!(noop.len(), 1);
        assert_eq!(noop[0].id, b.id);
    }

    #[test]
    fn hand_blowup_divides_the_common_factor() {
        // B = xy − zw, center (x, z), chart where x becomes exceptional:
        // the binomial transforms to y − z̃w.
        let x = Variable::Pi(idx(&[1, 3]));
        let z = Variable::rho(idx(&[1, 3]), idx(&[2, 4]));
        let b = Binomial {
            kind: crate::model::BinomialKind::Quotient,
            block: None,
            main_index: None,
            plus: Monomial::from_vars([x.clone(), Variable::Pi(idx(&[1, 4]))]),
            minus: Monomial::from_vars([z.clone(), Variable::Pi(idx(&[2, 3]))]),
        };
        let zeta = exceptional_rename(&x);
        let t = blowup_binomial(&b, &x, &zeta, &z);
        assert_eq!(
            t.polynomial(),
            parsed("x[14] - x[(13,24)]*x[23]")
        );
    }

    #[test]
    fn initial_association_table() {
        // One block on the smallest Grassmannian: the plus term of each
        // main binomial is associated with the leading Plücker divisor
        // and its own pair divisor; the minus term with the two Plücker
        // divisors of the pair; the leading pair divisor and the block's
        // own exceptional divisor carry nothing.
        let system = defining_system(2, 4, &idx(&[1, 2]), None, 3).unwrap();
        let assoc = initial_associations(&system, 1);
        let t = |tau, minus| TermRef { block: 1, tau, minus };
        let get = |d: Divisor, t: TermRef| assoc.get(&(d, t)).copied().unwrap_or(0);
        assert_eq!(get(Divisor::Plucker(idx(&[3, 4])), t(1, false)), 1);
        assert_eq!(get(Divisor::pair(idx(&[1, 4]), idx(&[2, 3])), t(2, false)), 1);
        assert_eq!(get(Divisor::Plucker(idx(&[1, 4])), t(2, true)), 1);
        assert_eq!(get(Divisor::Plucker(idx(&[2, 3])), t(2, true)), 1);
        assert_eq!(get(Divisor::pair(idx(&[1, 2]), idx(&[3, 4])), t(1, true)), 0);
        assert_eq!(get(Divisor::Lead(1), t(1, true)), 0);
        assert_eq!(get(Divisor::Lead(1), t(1, false)), 0);
        // The basepoint pair (13,24) is a unit: no divisor, no entry.
        assert_eq!(get(Divisor::pair(idx(&[1, 3]), idx(&[2, 4])), t(1, false)), 0);

        // On Gr(3,6), the rank-1 block's minus terms see the leading
        // exceptional divisors of the rank-0 blocks they contain.
        let system = defining_system(3, 6, &idx(&[1, 2, 3]), None, 2).unwrap();
        let assoc = initial_associations(&system, 10);
        // Block 10 is the rank-1 block with leading index (456); its
        // τ=1 pair is (156, 234), and (156) leads block 7.
        let k7 = system.family.iter().position(|f| f.u == idx(&[1, 5, 6])).unwrap() + 1;
        let key = (Divisor::Lead(k7), TermRef { block: 10, tau: 1, minus: true });
        assert_eq!(assoc.get(&key).copied(), Some(1));
    }

    #[test]
    fn lifted_points_satisfy_child_relations() {
        // Model consistency through the leading blowup: enumerate points
        // of the model on the root chart and lift them to both children.
        let system = defining_system(2, 4, &idx(&[1, 2]), None, 3).unwrap();
        let root = root_chart(2, 4, &system).unwrap();
        let center = (
            Variable::Pi(idx(&[3, 4])),
            Variable::rho(idx(&[1, 2]), idx(&[3, 4])),
        );
        let kids = blow_up(&root, (&center.0, &center.1), Divisor::Lead(1), Stage::Lead(1));
        let mut atlas_charts = BTreeMap::from([(root.id.clone(), root.clone())]);
        for c in &kids {
            atlas_charts.insert(c.id.clone(), c.clone());
        }
        let atlas = Atlas {
            d: 2,
            n: 4,
            m: idx(&[1, 2]),
            system: system.clone(),
            charts: atlas_charts,
            frontier: kids.iter().map(|c| c.id.clone()).collect(),
            pruned: vec![],
            dropped: vec![],
            assoc: Associations::new(),
            stats: vec![],
            processed_blocks: 1,
            config: PipelineConfig::default(),
            next_stamp: 2,
            liveness: RefCell::new(BTreeMap::new()),
            solver_time: std::cell::Cell::new(std::time::Duration::ZERO),
        };
        let prime = 7;
        let sys = FpSystem::new(
            &root.defining_polys(),
            &root.coordinates(),
            prime,
            &[],
            &[],
        )
        .unwrap();
        let points = sys.enumerate(100_000);
        assert!(!points.is_empty());
        let mut lifted = 0;
        for pt in &points {
            for chart in kids.iter() {
                let Some(lift) = atlas.lift_point(&chart.id, pt, prime) else { continue };
                lifted += 1;
                for poly in chart.defining_polys() {
                    assert_eq!(poly.evaluate_mod_p(&lift, prime), 0, "{poly} at {:?}", lift);
                }
            }
        }
        assert!(lifted > 0);
    }

    #[test]
    fn full_pipeline_on_the_smallest_grassmannian() {
        let atlas = run_pipeline(2, 4, &idx(&[1, 2]), PipelineConfig::default()).unwrap();
        assert_eq!(atlas.processed_blocks, 1);
        assert!(!atlas.frontier.is_empty());
        // Statistics recorded for both main binomials, finite by
        // construction.
        assert_eq!(atlas.stats.len(), 2);
        for s in &atlas.stats {
            assert_eq!(s.live_sets_per_round.len(), s.rounds);
        }
        for chart in atlas.frontier_charts() {
            // All frontier charts have absorbed the linear-form blowup
            // or never met the block's exceptional divisor.
            assert!(
                chart.l_set.contains(&1) || chart.local_equation(&Divisor::Lead(1)).is_none()
            );
            // Main binomials terminate at both primes.
            for b in &chart.mains {
                for &p in &atlas.config.primes {
                    assert!(
                        atlas.terminated(chart, b, p).unwrap(),
                        "main binomial {:?} fails to terminate on {}",
                        b.main_index,
                        chart.id
                    );
                }
            }
            // Unit form of the linear relation on charts that absorbed
            // the linear-form blowup.
            if chart.l_set.contains(&1) {
                let unit = Variable::y_inv(idx(&[1, 2]), idx(&[3, 4]));
                let l = &chart.linears[0];
                assert_eq!(l.term_count(), 2);
                assert!(l.contains_var(&unit));
                assert_eq!(l.degree_in(&unit), 1);
            }
            // Leading pair coordinates never survive to the frontier.
            assert!(!chart.vars.contains(&Variable::rho(idx(&[1, 2]), idx(&[3, 4]))));
            // Plus terms of main binomials stay square-free.
            for b in &chart.mains {
                assert!(b.plus.is_squarefree(), "{:?} on {}", b, chart.id);
            }
        }
        // Model points lift from the root to some frontier chart.
        let root = atlas.chart("r");
        let prime = 5;
        let sys = FpSystem::new(
            &root.defining_polys(),
            &root.coordinates(),
            prime,
            &[],
            &[],
        )
        .unwrap();
        let mut covered = 0;
        let points = sys.enumerate(500);
        for pt in &points {
            let found = atlas.frontier.iter().any(|id| {
                atlas
                    .lift_point(id, pt, prime)
                    .map(|l| {
                        atlas.charts[id]
                            .defining_polys()
                            .iter()
                            .all(|p| p.evaluate_mod_p(&l, prime) == 0)
                    })
                    .unwrap_or(false)
            });
            if found {
                covered += 1;
            }
        }
        assert!(covered > 0, "no root model point lifts to the frontier");
    }

    #[test]
    fn stop_after_lead_stage() {
        let cfg = PipelineConfig { stop_after_lead: true, ..PipelineConfig::default() };
        let atlas = run_pipeline(2, 4, &idx(&[1, 2]), cfg).unwrap();
        for chart in atlas.frontier_charts() {
            assert!(matches!(chart.stage, Stage::Lead(_)));
            // Residuals of the processed block are dropped right after
            // its leading blowup.
            assert!(chart.residuals.is_empty());
        }
    }
}
