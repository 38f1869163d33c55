//! Exact sparse multivariate polynomial arithmetic over the integers,
//! over a tagged variable universe.
//!
//! Variables carry their geometric role in the tag: `Pi` for affine
//! Plücker coordinates, `Rho` for the auxiliary projective coordinates,
//! `Eps`/`Delta` for coordinates that have become exceptional along the
//! blowup pipeline, and `YInv` for coordinates that are invertible on the
//! chart declaring them. Coefficients are arbitrary-precision integers;
//! the constructions only ever need small ones, but products in the
//! symbolic identity checks are safer exact.

use crate::indexing::PluckerIndex;
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// Expands to a `fmt` method delegating Debug to Display; keeps the two
/// representations identical for log and assert output.
macro_rules! fmt_debug_via_display {
    () => {
        fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            fmt::Display::fmt(self, f)
        }
    };
}

/// A tagged coordinate. The derived order (`Pi < Rho < Eps < Delta <
/// YInv`, then by label) fixes serialization and matrix layouts.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variable {
    /// Affine Plücker coordinate `x_u`.
    Pi(PluckerIndex),
    /// Projective pair coordinate `x_(u,v)`; the pair is stored with the
    /// lexicographically smaller index first, since `x_(u,v) = x_(v,u)`.
    Rho(PluckerIndex, PluckerIndex),
    /// Exceptional coordinate that used to be the `Pi` variable of the
    /// same label.
    Eps(PluckerIndex),
    /// Exceptional coordinate that used to be the `Rho` variable of the
    /// same label.
    Delta(PluckerIndex, PluckerIndex),
    /// Invertible coordinate (unit on its chart), labeled like a pair.
    YInv(PluckerIndex, PluckerIndex),
}

impl Variable {
    /// Canonically oriented pair coordinate.
    pub fn rho(u: PluckerIndex, v: PluckerIndex) -> Variable {
        if u <= v {
            Variable::Rho(u, v)
        } else {
            Variable::Rho(v, u)
        }
    }

    pub fn delta(u: PluckerIndex, v: PluckerIndex) -> Variable {
        if u <= v {
            Variable::Delta(u, v)
        } else {
            Variable::Delta(v, u)
        }
    }

    pub fn y_inv(u: PluckerIndex, v: PluckerIndex) -> Variable {
        if u <= v {
            Variable::YInv(u, v)
        } else {
            Variable::YInv(v, u)
        }
    }

    /// The pair label of a `Rho`/`Delta`/`YInv` variable, if any.
    pub fn pair(&self) -> Option<(&PluckerIndex, &PluckerIndex)> {
        match self {
            Variable::Rho(u, v) | Variable::Delta(u, v) | Variable::YInv(u, v) => Some((u, v)),
            _ => None,
        }
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variable::Pi(u) => write!(f, "x[{u}]"),
            Variable::Rho(u, v) => write!(f, "x[({u},{v})]"),
            Variable::Eps(u) => write!(f, "e[{u}]"),
            Variable::Delta(u, v) => write!(f, "d[({u},{v})]"),
            Variable::YInv(u, v) => write!(f, "y[({u},{v})]"),
        }
    }
}

impl fmt::Debug for Variable {
    fmt_debug_via_display!();
}

/// A power product with no zero exponents stored.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Monomial(pub BTreeMap<Variable, u32>);

impl Monomial {
    pub fn one() -> Monomial {
        Monomial(BTreeMap::new())
    }

    pub fn var(v: Variable) -> Monomial {
        Monomial(BTreeMap::from([(v, 1)]))
    }

    pub fn from_vars<I: IntoIterator<Item = Variable>>(vars: I) -> Monomial {
        let mut m = Monomial::one();
        for v in vars {
            *m.0.entry(v).or_insert(0) += 1;
        }
        m
    }

    pub fn degree(&self) -> u32 {
        self.0.values().sum()
    }

    pub fn exponent(&self, v: &Variable) -> u32 {
        self.0.get(v).copied().unwrap_or(0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut out = self.clone();
        for (v, e) in &other.0 {
            *out.0.entry(v.clone()).or_insert(0) += e;
        }
        out
    }

    /// `self / other`, or `None` when not divisible.
    pub fn div(&self, other: &Monomial) -> Option<Monomial> {
        let mut out = self.clone();
        for (v, e) in &other.0 {
            let cur = out.0.get_mut(v)?;
            if *cur < *e {
                return None;
            }
            *cur -= e;
            if *cur == 0 {
                out.0.remove(v);
            }
        }
        Some(out)
    }

    pub fn gcd(&self, other: &Monomial) -> Monomial {
        let mut out = BTreeMap::new();
        for (v, e) in &self.0 {
            let f = other.exponent(v);
            if f > 0 {
                out.insert(v.clone(), (*e).min(f));
            }
        }
        Monomial(out)
    }

    pub fn is_squarefree(&self) -> bool {
        self.0.values().all(|&e| e == 1)
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        let mut first = true;
        for (v, e) in &self.0 {
            if !first {
                write!(f, "*")?;
            }
            first = false;
            if *e == 1 {
                write!(f, "{v}")?;
            } else {
                write!(f, "{v}^{e}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Monomial {
    fmt_debug_via_display!();
}

/// A sparse polynomial with exact integer coefficients; no zero
/// coefficients are stored, so equality is structural.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct Polynomial(pub BTreeMap<Monomial, BigInt>);

#[derive(Debug, Error)]
pub enum PolyError {
    #[error("monomial {divisor} does not divide term {term}")]
    DivisionError { divisor: String, term: String },
    #[error("{0} is not a valid prime modulus")]
    InvalidPrime(u64),
    #[error("parse error at `{0}`")]
    Parse(String),
}

impl Polynomial {
    pub fn zero() -> Polynomial {
        Polynomial(BTreeMap::new())
    }

    pub fn one() -> Polynomial {
        Polynomial::constant(BigInt::one())
    }

    pub fn constant(c: BigInt) -> Polynomial {
        let mut t = BTreeMap::new();
        if !c.is_zero() {
            t.insert(Monomial::one(), c);
        }
        Polynomial(t)
    }

    pub fn var(v: Variable) -> Polynomial {
        Polynomial(BTreeMap::from([(Monomial::var(v), BigInt::one())]))
    }

    pub fn monomial(m: Monomial, c: BigInt) -> Polynomial {
        if c.is_zero() {
            Polynomial::zero()
        } else {
            Polynomial(BTreeMap::from([(m, c)]))
        }
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn term_count(&self) -> usize {
        self.0.len()
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let mut out = self.0.clone();
        for (m, c) in &other.0 {
            let entry = out.entry(m.clone()).or_insert_with(BigInt::zero);
            *entry += c;
            if entry.is_zero() {
                out.remove(m);
            }
        }
        Polynomial(out)
    }

    pub fn neg(&self) -> Polynomial {
        Polynomial(self.0.iter().map(|(m, c)| (m.clone(), -c)).collect())
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut out: BTreeMap<Monomial, BigInt> = BTreeMap::new();
        for (m1, c1) in &self.0 {
            for (m2, c2) in &other.0 {
                let m = m1.mul(m2);
                let entry = out.entry(m.clone()).or_insert_with(BigInt::zero);
                *entry += c1 * c2;
                if entry.is_zero() {
                    out.remove(&m);
                }
            }
        }
        Polynomial(out)
    }

    pub fn scale(&self, c: &BigInt) -> Polynomial {
        if c.is_zero() {
            return Polynomial::zero();
        }
        Polynomial(self.0.iter().map(|(m, co)| (m.clone(), co * c)).collect())
    }

    pub fn mul_monomial(&self, m: &Monomial) -> Polynomial {
        Polynomial(self.0.iter().map(|(mo, c)| (mo.mul(m), c.clone())).collect())
    }

    /// All variables occurring with a positive exponent.
    pub fn variables(&self) -> Vec<Variable> {
        let mut set = std::collections::BTreeSet::new();
        for m in self.0.keys() {
            for v in m.0.keys() {
                set.insert(v.clone());
            }
        }
        set.into_iter().collect()
    }

    pub fn contains_var(&self, v: &Variable) -> bool {
        self.0.keys().any(|m| m.exponent(v) > 0)
    }

    pub fn total_degree(&self) -> u32 {
        self.0.keys().map(|m| m.degree()).max().unwrap_or(0)
    }

    /// The degree in a single variable.
    pub fn degree_in(&self, v: &Variable) -> u32 {
        self.0.keys().map(|m| m.exponent(v)).max().unwrap_or(0)
    }

    /// Ring-homomorphic substitution; variables absent from the map are
    /// kept fixed.
    pub fn substitute(&self, map: &BTreeMap<Variable, Polynomial>) -> Polynomial {
        let mut out = Polynomial::zero();
        for (m, c) in &self.0 {
            let mut term = Polynomial::constant(c.clone());
            let mut fixed = Monomial::one();
            for (v, e) in &m.0 {
                match map.get(v) {
                    Some(repl) => {
                        for _ in 0..*e {
                            term = term.mul(repl);
                        }
                    }
                    None => {
                        *fixed.0.entry(v.clone()).or_insert(0) += e;
                    }
                }
            }
            out = out.add(&term.mul_monomial(&fixed));
        }
        out
    }

    /// Renames a variable throughout (a degree-preserving special case of
    /// substitution, used when a coordinate becomes exceptional).
    pub fn rename_var(&self, from: &Variable, to: &Variable) -> Polynomial {
        Polynomial(
            self.0
                .iter()
                .map(|(m, c)| {
                    let mut mm = m.clone();
                    if let Some(e) = mm.0.remove(from) {
                        *mm.0.entry(to.clone()).or_insert(0) += e;
                    }
                    (mm, c.clone())
                })
                .collect(),
        )
    }

    /// Evaluates over `F_prime` at a total point.
    ///
    /// # Panics
    /// Panics if a variable of the polynomial is missing from the point.
    pub fn evaluate_mod_p(&self, point: &BTreeMap<Variable, u64>, prime: u64) -> u64 {
        debug_assert!(is_small_prime(prime), "modulus {prime} must be prime");
        let mut acc: u64 = 0;
        for (m, c) in &self.0 {
            let mut t = reduce_bigint(c, prime);
            for (v, e) in &m.0 {
                let val = *point
                    .get(v)
                    .unwrap_or_else(|| panic!("point does not assign {v}"))
                    % prime;
                t = t * pow_mod(val, *e as u64, prime) % prime;
            }
            acc = (acc + t) % prime;
        }
        acc
    }

    /// Formal partial derivative.
    pub fn partial_derivative(&self, v: &Variable) -> Polynomial {
        let mut out = Polynomial::zero();
        for (m, c) in &self.0 {
            let e = m.exponent(v);
            if e == 0 {
                continue;
            }
            let mut mm = m.clone();
            if e == 1 {
                mm.0.remove(v);
            } else {
                mm.0.insert(v.clone(), e - 1);
            }
            out = out.add(&Polynomial::monomial(mm, c * BigInt::from(e)));
        }
        out
    }

    /// Divides every term by `m`; errors when a term is not divisible.
    pub fn divide_out(&self, m: &Monomial) -> Result<Polynomial, PolyError> {
        let mut out = BTreeMap::new();
        for (t, c) in &self.0 {
            match t.div(m) {
                Some(q) => {
                    out.insert(q, c.clone());
                }
                None => {
                    return Err(PolyError::DivisionError {
                        divisor: m.to_string(),
                        term: t.to_string(),
                    })
                }
            }
        }
        Ok(Polynomial(out))
    }

    /// The gcd of all term monomials (the largest monomial dividing every
    /// term); `1` for the zero polynomial.
    pub fn content_monomial(&self) -> Monomial {
        let mut it = self.0.keys();
        let mut g = match it.next() {
            Some(m) => m.clone(),
            None => return Monomial::one(),
        };
        for m in it {
            g = g.gcd(m);
        }
        g
    }

    /// Divides out the content monomial (the exceptional common factor in
    /// proper transforms of non-binomial relations).
    pub fn primitive_part(&self) -> Polynomial {
        self.divide_out(&self.content_monomial())
            .expect("content monomial divides every term")
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in &self.0 {
            let neg = c.is_negative();
            let abs = c.abs();
            if first {
                if neg {
                    write!(f, "-")?;
                }
                first = false;
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            if m.0.is_empty() {
                write!(f, "{abs}")?;
            } else if abs.is_one() {
                write!(f, "{m}")?;
            } else {
                write!(f, "{abs}*{m}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Polynomial {
    fmt_debug_via_display!();
}

fn reduce_bigint(c: &BigInt, p: u64) -> u64 {
    let m = c % BigInt::from(p);
    let m = if m.is_negative() { m + BigInt::from(p) } else { m };
    // Fits by construction.
    u64::try_from(m).expect("reduced residue fits in u64")
}

pub fn pow_mod(mut base: u64, mut exp: u64, p: u64) -> u64 {
    base %= p;
    let mut acc = 1u64;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % p;
        }
        base = base * base % p;
        exp >>= 1;
    }
    acc
}

pub fn inv_mod(a: u64, p: u64) -> u64 {
    pow_mod(a, p - 2, p)
}

pub fn is_small_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut i = 2;
    while i * i <= p {
        if p % i == 0 {
            return false;
        }
        i += 1;
    }
    true
}

// ---------------------------------------------------------------------
// Point solving over small prime fields.
// ---------------------------------------------------------------------

/// One term of a compiled polynomial: coefficient and (variable slot,
/// exponent) pairs.
type CompiledTerm = (u64, Vec<(usize, u32)>);

/// Mutable search position: current values, which slots carry one, and
/// the remaining residue bitmask per slot. Cloned at each branch point
/// so backtracking is a plain stack pop.
#[derive(Clone)]
struct SearchState {
    values: Vec<u64>,
    assigned: Vec<bool>,
    domains: Vec<u64>,
}

/// A polynomial system compiled for constraint search over `F_p`.
///
/// Points are found by depth-first search with fail-first variable
/// selection and single-variable domain filtering: whenever a relation
/// is down to one unassigned variable, the residues that keep it
/// solvable are intersected into that variable's domain, and forced
/// values propagate to a fixpoint before any branching. Emptiness
/// proofs must exhaust the tree, so this pruning (rather than the raw
/// branch order) is what keeps the sparse binomial-and-linear systems
/// produced by the blowup pipeline tractable.
pub struct FpSystem {
    prime: u64,
    /// Variables by slot index.
    order: Vec<Variable>,
    /// Initial per-slot domains as residue bitmasks (bit `r` set means
    /// residue `r` is allowed); this representation limits the modulus
    /// to `p < 64`, far above anything exhaustive search can sustain.
    domains: Vec<u64>,
    polys: Vec<Vec<CompiledTerm>>,
    /// Distinct variable slots per compiled polynomial. Terms whose
    /// coefficients vanish mod `p` are dropped before this is built.
    poly_vars: Vec<Vec<usize>>,
    /// How many relations mention each slot, used to branch on the
    /// variables whose assignment triggers the most propagation.
    var_degree: Vec<usize>,
    /// Relations mentioning each slot, the worklist adjacency for
    /// propagation.
    var_polys: Vec<Vec<usize>>,
}

impl FpSystem {
    /// Compiles `polys` over the listed variables. `zero` and `nonzero`
    /// restrict domains; both must be subsets of `vars`.
    ///
    /// # Panics
    /// Panics if a polynomial mentions a variable outside `vars`, if a
    /// domain restriction names a variable outside `vars`, or if a
    /// variable is pinned both zero and nonzero.
    pub fn new(
        polys: &[Polynomial],
        vars: &[Variable],
        prime: u64,
        zero: &[Variable],
        nonzero: &[Variable],
    ) -> Result<FpSystem, PolyError> {
        if !is_small_prime(prime) || prime >= 64 {
            return Err(PolyError::InvalidPrime(prime));
        }
        let var_set: std::collections::BTreeSet<&Variable> = vars.iter().collect();
        for p in polys {
            for v in p.variables() {
                assert!(var_set.contains(&v), "system variable {v} not declared");
            }
        }
        let slot_of: BTreeMap<&Variable, usize> =
            vars.iter().enumerate().map(|(i, v)| (v, i)).collect();
        let any = (1u64 << prime) - 1;
        let mut domains = vec![any; vars.len()];
        for v in zero {
            assert!(var_set.contains(v), "zero-pinned variable {v} not declared");
            domains[slot_of[v]] = 1;
        }
        for v in nonzero {
            assert!(var_set.contains(v), "nonzero variable {v} not declared");
            assert!(domains[slot_of[v]] != 1, "variable {v} pinned both zero and nonzero");
            domains[slot_of[v]] = any & !1;
        }

        let mut compiled: Vec<Vec<CompiledTerm>> = Vec::with_capacity(polys.len());
        let mut poly_vars: Vec<Vec<usize>> = Vec::with_capacity(polys.len());
        for p in polys {
            let terms: Vec<CompiledTerm> = p
                .0
                .iter()
                .map(|(m, c)| {
                    let factors = m.0.iter().map(|(v, e)| (slot_of[v], *e)).collect();
                    (reduce_bigint(c, prime), factors)
                })
                .filter(|(c, _)| *c != 0)
                .collect();
            let slots: std::collections::BTreeSet<usize> = terms
                .iter()
                .flat_map(|(_, factors)| factors.iter().map(|(s, _)| *s))
                .collect();
            poly_vars.push(slots.into_iter().collect());
            compiled.push(terms);
        }
        let mut var_degree = vec![0usize; vars.len()];
        let mut var_polys: Vec<Vec<usize>> = vec![Vec::new(); vars.len()];
        for (i, pv) in poly_vars.iter().enumerate() {
            for &s in pv {
                var_degree[s] += 1;
                var_polys[s].push(i);
            }
        }

        Ok(FpSystem {
            prime,
            order: vars.to_vec(),
            domains,
            polys: compiled,
            poly_vars,
            var_degree,
            var_polys,
        })
    }

    /// The search state before anything is branched on: residue
    /// bitmask domains as declared, with single-residue domains
    /// (zero-pinned variables, or any domain over `F_2`) already
    /// turned into assignments.
    fn root_state(&self) -> SearchState {
        let mut st = SearchState {
            values: vec![0u64; self.order.len()],
            assigned: vec![false; self.order.len()],
            domains: self.domains.clone(),
        };
        for s in 0..st.domains.len() {
            if st.domains[s].count_ones() == 1 {
                st.assigned[s] = true;
                st.values[s] = st.domains[s].trailing_zeros() as u64;
            }
        }
        st
    }

    pub fn prime(&self) -> u64 {
        self.prime
    }

    fn eval_compiled(&self, poly: &[CompiledTerm], values: &[u64]) -> u64 {
        let p = self.prime;
        let mut acc = 0u64;
        for (c, factors) in poly {
            let mut t = *c;
            for (slot, e) in factors {
                t = t * pow_mod(values[*slot], *e as u64, p) % p;
            }
            acc = (acc + t) % p;
        }
        acc
    }

    /// Backtracking search. Returns the number of solutions found before
    /// `cap` was reached; each solution is passed to `sink`, and the
    /// search stops early when `sink` returns `false`.
    fn search(&self, cap: usize, sink: &mut dyn FnMut(&[u64]) -> bool) -> usize {
        if cap == 0 {
            return 0;
        }
        let all: Vec<usize> = (0..self.polys.len()).collect();
        let mut found = 0usize;
        self.descend(self.root_state(), &all, cap, &mut found, sink);
        found
    }

    /// Runs domain propagation to a fixpoint with a worklist seeded by
    /// the relation indices in `seed`: fully assigned relations must
    /// vanish, relations with one or two open variables cut those
    /// domains via `revise`, and every cut re-queues the relations
    /// touching the narrowed variable. Returns `false` once a relation
    /// or domain becomes unsatisfiable.
    fn propagate(&self, st: &mut SearchState, seed: &[usize]) -> bool {
        let mut dirty = vec![false; self.polys.len()];
        let mut queue: Vec<usize> = Vec::with_capacity(seed.len());
        for &i in seed {
            if !dirty[i] {
                dirty[i] = true;
                queue.push(i);
            }
        }
        while let Some(i) = queue.pop() {
            dirty[i] = false;
            if !self.revise(i, st, &mut dirty, &mut queue) {
                return false;
            }
        }
        true
    }

    /// Re-examines one relation. With no open variable it must vanish;
    /// with one or two, the relation is partially evaluated into a
    /// table of values over the open residues and each open variable's
    /// domain is cut to the residues that still admit a root. Returns
    /// `false` when the relation or a domain becomes unsatisfiable.
    fn revise(
        &self,
        i: usize,
        st: &mut SearchState,
        dirty: &mut [bool],
        queue: &mut Vec<usize>,
    ) -> bool {
        let p = self.prime;
        let mut open = [usize::MAX; 2];
        let mut unassigned = 0usize;
        for &s in &self.poly_vars[i] {
            if !st.assigned[s] {
                if unassigned == 2 {
                    return true;
                }
                open[unassigned] = s;
                unassigned += 1;
            }
        }
        let poly = &self.polys[i];
        match unassigned {
            0 => self.eval_compiled(poly, &st.values) == 0,
            1 => {
                let a = open[0];
                // vals[r]: the relation's value with the open variable
                // set to residue r.
                let mut vals = [0u64; 64];
                for (c, factors) in poly {
                    let mut base = *c;
                    let mut ea = 0u32;
                    for (slot, e) in factors {
                        if *slot == a {
                            ea = *e;
                        } else {
                            base = base * pow_mod(st.values[*slot], *e as u64, p) % p;
                        }
                    }
                    if base == 0 {
                        continue;
                    }
                    for (r, v) in vals.iter_mut().enumerate().take(p as usize) {
                        *v = (*v + base * pow_mod(r as u64, ea as u64, p)) % p;
                    }
                }
                let mut allowed = 0u64;
                let mut mask = st.domains[a];
                while mask != 0 {
                    let r = mask.trailing_zeros();
                    mask &= mask - 1;
                    if vals[r as usize] == 0 {
                        allowed |= 1 << r;
                    }
                }
                self.cut(a, allowed, st, dirty, queue)
            }
            _ => {
                let (a, b) = (open[0], open[1]);
                // table[ra * p + rb]: the relation's value with the
                // open variables set to residues ra and rb.
                let mut table = vec![0u64; (p * p) as usize];
                for (c, factors) in poly {
                    let mut base = *c;
                    let (mut ea, mut eb) = (0u32, 0u32);
                    for (slot, e) in factors {
                        if *slot == a {
                            ea = *e;
                        } else if *slot == b {
                            eb = *e;
                        } else {
                            base = base * pow_mod(st.values[*slot], *e as u64, p) % p;
                        }
                    }
                    if base == 0 {
                        continue;
                    }
                    for ra in 0..p {
                        let row = base * pow_mod(ra, ea as u64, p) % p;
                        if row == 0 {
                            continue;
                        }
                        for rb in 0..p {
                            let idx = (ra * p + rb) as usize;
                            table[idx] = (table[idx] + row * pow_mod(rb, eb as u64, p)) % p;
                        }
                    }
                }
                let mut allowed_a = 0u64;
                let mut allowed_b = 0u64;
                let mut mask_a = st.domains[a];
                while mask_a != 0 {
                    let ra = mask_a.trailing_zeros() as u64;
                    mask_a &= mask_a - 1;
                    let mut mask_b = st.domains[b];
                    while mask_b != 0 {
                        let rb = mask_b.trailing_zeros() as u64;
                        mask_b &= mask_b - 1;
                        if table[(ra * p + rb) as usize] == 0 {
                            allowed_a |= 1 << ra;
                            allowed_b |= 1 << rb;
                        }
                    }
                }
                self.cut(a, allowed_a, st, dirty, queue) && self.cut(b, allowed_b, st, dirty, queue)
            }
        }
    }

    /// Intersects `allowed` into slot `s`'s domain, turning a singleton
    /// into an assignment and re-queueing the relations that mention
    /// `s` whenever the domain shrank. Returns `false` on an emptied
    /// domain.
    fn cut(
        &self,
        s: usize,
        allowed: u64,
        st: &mut SearchState,
        dirty: &mut [bool],
        queue: &mut Vec<usize>,
    ) -> bool {
        let new = st.domains[s] & allowed;
        if new == 0 {
            return false;
        }
        if new == st.domains[s] {
            return true;
        }
        st.domains[s] = new;
        if new.count_ones() == 1 {
            st.assigned[s] = true;
            st.values[s] = new.trailing_zeros() as u64;
        }
        for &j in &self.var_polys[s] {
            if !dirty[j] {
                dirty[j] = true;
                queue.push(j);
            }
        }
        true
    }

    /// Fail-first branch variable: from the relation with the fewest
    /// unassigned variables, the one mentioned by the most relations
    /// (so the assignment feeds the most propagation), falling back to
    /// the lowest unassigned slot when no relation is still open.
    fn pick(&self, st: &SearchState) -> usize {
        let mut best: Option<(usize, usize)> = None;
        for pv in &self.poly_vars {
            let mut count = 0usize;
            let mut slot = usize::MAX;
            let mut degree = 0usize;
            for &s in pv {
                if !st.assigned[s] {
                    count += 1;
                    if self.var_degree[s] > degree || (self.var_degree[s] == degree && s < slot)
                    {
                        degree = self.var_degree[s];
                        slot = s;
                    }
                }
            }
            if count > 0 && best.map_or(true, |(c, _)| count < c) {
                best = Some((count, slot));
            }
        }
        match best {
            Some((_, slot)) => slot,
            None => (0..st.assigned.len())
                .find(|&s| !st.assigned[s])
                .expect("descend only branches with an unassigned slot left"),
        }
    }

    fn descend(
        &self,
        mut st: SearchState,
        seed: &[usize],
        cap: usize,
        found: &mut usize,
        sink: &mut dyn FnMut(&[u64]) -> bool,
    ) -> bool {
        if !self.propagate(&mut st, seed) {
            return true;
        }
        if st.assigned.iter().all(|&a| a) {
            *found += 1;
            return sink(&st.values) && *found < cap;
        }
        let slot = self.pick(&st);
        let mut mask = st.domains[slot];
        while mask != 0 {
            let r = mask.trailing_zeros() as u64;
            mask &= mask - 1;
            let mut next = st.clone();
            next.values[slot] = r;
            next.assigned[slot] = true;
            next.domains[slot] = 1 << r;
            if !self.descend(next, &self.var_polys[slot], cap, found, sink) {
                return false;
            }
        }
        true
    }

    /// Splits the unassigned slots into connected components: two slots
    /// are linked when some relation still has both unassigned. Every
    /// relation's unassigned variables then lie in a single component,
    /// so the components are satisfiable independently.
    fn components(&self, st: &SearchState) -> Vec<Vec<usize>> {
        let n = st.assigned.len();
        let mut rep: Vec<usize> = (0..n).collect();
        fn find(rep: &mut Vec<usize>, mut s: usize) -> usize {
            while rep[s] != s {
                rep[s] = rep[rep[s]];
                s = rep[s];
            }
            s
        }
        for pv in &self.poly_vars {
            let mut first = usize::MAX;
            for &s in pv {
                if !st.assigned[s] {
                    if first == usize::MAX {
                        first = find(&mut rep, s);
                    } else {
                        let r = find(&mut rep, s);
                        rep[r] = first;
                    }
                }
            }
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for s in 0..n {
            if !st.assigned[s] {
                let r = find(&mut rep, s);
                groups.entry(r).or_default().push(s);
            }
        }
        let mut comps: Vec<Vec<usize>> = groups.into_values().collect();
        comps.sort_by_key(|c| c.len());
        comps
    }

    /// A component's satisfiability depends only on its slots' domains
    /// and on the assigned values seen by the relations that touch it
    /// (every open variable of such a relation lies in the component).
    /// This encodes exactly that data, so equal keys mean equal
    /// subproblems and verdicts can be reused across branches.
    fn component_key(&self, st: &SearchState, comp: &[usize]) -> Vec<u64> {
        let mut key: Vec<u64> = Vec::with_capacity(4 * comp.len());
        let mut polys: std::collections::BTreeSet<usize> = std::collections::BTreeSet::new();
        for &s in comp {
            key.push(s as u64);
            key.push(st.domains[s]);
            polys.extend(self.var_polys[s].iter().copied());
        }
        for i in polys {
            key.push(u64::MAX);
            key.push(i as u64);
            for &s in &self.poly_vars[i] {
                if st.assigned[s] {
                    key.push(st.values[s]);
                }
            }
        }
        key
    }

    /// Existence check for one component: branches only on the
    /// component's slots and re-splits after each propagation, so
    /// independent subsystems multiply depth instead of tree width.
    /// Verdicts are memoized per query in `cache`.
    fn exists_in(
        &self,
        st: &SearchState,
        comp: &[usize],
        cache: &mut std::collections::HashMap<Vec<u64>, bool>,
    ) -> bool {
        let key = self.component_key(st, comp);
        if let Some(&v) = cache.get(&key) {
            return v;
        }
        let verdict = self.exists_in_uncached(st, comp, cache);
        cache.insert(key, verdict);
        verdict
    }

    fn exists_in_uncached(
        &self,
        st: &SearchState,
        comp: &[usize],
        cache: &mut std::collections::HashMap<Vec<u64>, bool>,
    ) -> bool {
        let slot = {
            // Fail-first within the component, as in `pick`; every open
            // relation containing a component slot is entirely inside
            // the component.
            let mut best: Option<(usize, usize)> = None;
            for pv in &self.poly_vars {
                let mut count = 0usize;
                let mut slot = usize::MAX;
                let mut degree = 0usize;
                let mut inside = false;
                for &s in pv {
                    if !st.assigned[s] {
                        count += 1;
                        inside |= comp.contains(&s);
                        if self.var_degree[s] > degree
                            || (self.var_degree[s] == degree && s < slot)
                        {
                            degree = self.var_degree[s];
                            slot = s;
                        }
                    }
                }
                if inside && best.map_or(true, |(c, _)| count < c) {
                    best = Some((count, slot));
                }
            }
            match best {
                Some((_, slot)) => slot,
                // No open relation touches the component: the slots are
                // free and their domains are nonempty by construction.
                None => return true,
            }
        };
        let mut mask = st.domains[slot];
        while mask != 0 {
            let r = mask.trailing_zeros() as u64;
            mask &= mask - 1;
            let mut next = st.clone();
            next.values[slot] = r;
            next.assigned[slot] = true;
            next.domains[slot] = 1 << r;
            if !self.propagate(&mut next, &self.var_polys[slot]) {
                continue;
            }
            let remaining: Vec<usize> =
                comp.iter().copied().filter(|&s| !next.assigned[s]).collect();
            if remaining.is_empty() {
                return true;
            }
            let split = self.components(&next);
            if split
                .iter()
                .filter(|c| c.iter().any(|s| remaining.contains(s)))
                .all(|c| self.exists_in(&next, c, cache))
            {
                return true;
            }
        }
        false
    }

    /// Whether the system has at least one solution (early exit).
    pub fn has_solution(&self) -> bool {
        let all: Vec<usize> = (0..self.polys.len()).collect();
        let mut st = self.root_state();
        if !self.propagate(&mut st, &all) {
            return false;
        }
        let mut cache = std::collections::HashMap::new();
        self.components(&st).iter().all(|c| self.exists_in(&st, c, &mut cache))
    }

    /// Enumerates up to `cap` solutions as total points.
    pub fn enumerate(&self, cap: usize) -> Vec<BTreeMap<Variable, u64>> {
        let mut out = Vec::new();
        self.search(cap, &mut |values| {
            out.push(
                self.order
                    .iter()
                    .cloned()
                    .zip(values.iter().copied())
                    .collect::<BTreeMap<Variable, u64>>(),
            );
            true
        });
        out
    }

    /// The number of solutions, counted exhaustively up to `cap`.
    pub fn count(&self, cap: usize) -> usize {
        self.search(cap, &mut |_| true)
    }
}

// ---------------------------------------------------------------------
// Text parsing (inverse of Display), used by golden files and roundtrip
// property tests.
// ---------------------------------------------------------------------

/// Parses the textual polynomial format produced by `Display`, e.g.
/// `x[145] - x[124]*x[135] + 2*d[(12,34)]^2`.
pub fn parse_polynomial(input: &str) -> Result<Polynomial, PolyError> {
    let mut p = Parser { s: input.as_bytes(), i: 0 };
    let poly = p.polynomial()?;
    p.skip_ws();
    if p.i != p.s.len() {
        return Err(PolyError::Parse(input[p.i..].to_string()));
    }
    Ok(poly)
}

struct Parser<'a> {
    s: &'a [u8],
    i: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.i).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.i += 1;
        Some(c)
    }

    fn expect(&mut self, c: u8) -> Result<(), PolyError> {
        match self.bump() {
            Some(got) if got == c => Ok(()),
            _ => Err(PolyError::Parse(format!("expected `{}`", c as char))),
        }
    }

    fn polynomial(&mut self) -> Result<Polynomial, PolyError> {
        let mut out = Polynomial::zero();
        let mut sign = match self.peek() {
            Some(b'-') => {
                self.bump();
                -1
            }
            Some(b'+') => {
                self.bump();
                1
            }
            _ => 1,
        };
        loop {
            let term = self.term()?;
            out = out.add(&term.scale(&BigInt::from(sign)));
            match self.peek() {
                Some(b'+') => {
                    self.bump();
                    sign = 1;
                }
                Some(b'-') => {
                    self.bump();
                    sign = -1;
                }
                _ => return Ok(out),
            }
        }
    }

    fn term(&mut self) -> Result<Polynomial, PolyError> {
        let mut coeff = BigInt::one();
        let mut mono = Monomial::one();
        loop {
            match self.peek() {
                Some(c) if c.is_ascii_digit() => {
                    coeff *= self.integer()?;
                }
                Some(b'x') | Some(b'e') | Some(b'd') | Some(b'y') => {
                    let v = self.variable()?;
                    let mut e = 1u32;
                    if self.peek() == Some(b'^') {
                        self.bump();
                        e = u32::try_from(self.integer()?)
                            .map_err(|_| PolyError::Parse("exponent".into()))?;
                    }
                    *mono.0.entry(v).or_insert(0) += e;
                }
                _ => return Err(PolyError::Parse("term".into())),
            }
            if self.peek() == Some(b'*') {
                self.bump();
            } else {
                break;
            }
        }
        Ok(Polynomial::monomial(mono, coeff))
    }

    fn integer(&mut self) -> Result<BigInt, PolyError> {
        self.skip_ws();
        let start = self.i;
        while self.i < self.s.len() && self.s[self.i].is_ascii_digit() {
            self.i += 1;
        }
        if start == self.i {
            return Err(PolyError::Parse("integer".into()));
        }
        std::str::from_utf8(&self.s[start..self.i])
            .unwrap()
            .parse::<BigInt>()
            .map_err(|e| PolyError::Parse(e.to_string()))
    }

    fn variable(&mut self) -> Result<Variable, PolyError> {
        let kind = self.bump().ok_or_else(|| PolyError::Parse("variable".into()))?;
        self.expect(b'[')?;
        let var = if self.peek() == Some(b'(') {
            self.bump();
            let u = self.plucker()?;
            self.expect(b',')?;
            let v = self.plucker()?;
            self.expect(b')')?;
            match kind {
                b'x' => Variable::rho(u, v),
                b'd' => Variable::delta(u, v),
                b'y' => Variable::y_inv(u, v),
                _ => return Err(PolyError::Parse("pair variable kind".into())),
            }
        } else {
            let u = self.plucker()?;
            match kind {
                b'x' => Variable::Pi(u),
                b'e' => Variable::Eps(u),
                _ => return Err(PolyError::Parse("index variable kind".into())),
            }
        };
        self.expect(b']')?;
        Ok(var)
    }

    fn plucker(&mut self) -> Result<PluckerIndex, PolyError> {
        self.skip_ws();
        let start = self.i;
        while self.i < self.s.len() && self.s[self.i].is_ascii_digit() {
            self.i += 1;
        }
        if start == self.i {
            return Err(PolyError::Parse("index".into()));
        }
        let digits: Vec<u8> = self.s[start..self.i].iter().map(|c| c - b'0').collect();
        if !digits.windows(2).all(|w| w[0] < w[1]) || digits.iter().any(|&d| d == 0) {
            return Err(PolyError::Parse("index not strictly increasing".into()));
        }
        Ok(PluckerIndex(digits))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::indexing::PluckerIndex;

    fn pi(s: &[u8]) -> Variable {
        Variable::Pi(PluckerIndex::new(s))
    }

    fn x(s: &[u8]) -> Polynomial {
        Polynomial::var(pi(s))
    }

    #[test]
    fn ring_basics() {
        let p = x(&[1, 3]).mul(&x(&[2, 4])).sub(&x(&[1, 4]).mul(&x(&[2, 3])));
        assert!(p.add(&p.neg()).is_zero());
        assert_eq!(Polynomial::one().mul(&p), p);
        let a = x(&[1, 2]);
        let b = x(&[3, 4]);
        assert_eq!(
            a.sub(&b).mul(&a.add(&b)),
            a.mul(&a).sub(&b.mul(&b))
        );
    }

    #[test]
    fn substitute_and_rename() {
        let p = x(&[1, 2]).mul(&x(&[3, 4]));
        let map = BTreeMap::from([(pi(&[1, 2]), x(&[1, 3]).mul(&x(&[2, 4])))]);
        assert_eq!(p.substitute(&map), x(&[1, 3]).mul(&x(&[2, 4])).mul(&x(&[3, 4])));
        assert_eq!(p.substitute(&BTreeMap::new()), p);
        let q = x(&[1, 2]).sub(&x(&[3, 4]));
        let collapse = BTreeMap::from([(pi(&[1, 2]), x(&[3, 4]))]);
        assert!(q.substitute(&collapse).is_zero());
        let r = p.rename_var(&pi(&[1, 2]), &Variable::Eps(PluckerIndex::new(&[1, 2])));
        assert!(r.contains_var(&Variable::Eps(PluckerIndex::new(&[1, 2]))));
        assert!(!r.contains_var(&pi(&[1, 2])));
    }

    #[test]
    fn evaluation_mod_p() {
        // x^2 + 1 at x = 2 over F_5.
        let v = pi(&[1, 2]);
        let p = x(&[1, 2]).mul(&x(&[1, 2])).add(&Polynomial::one());
        let point = BTreeMap::from([(v, 2u64)]);
        assert_eq!(p.evaluate_mod_p(&point, 5), 0);
        assert_eq!(Polynomial::constant(BigInt::from(9)).evaluate_mod_p(&BTreeMap::new(), 7), 2);
        assert_eq!(
            Polynomial::constant(BigInt::from(-1)).evaluate_mod_p(&BTreeMap::new(), 7),
            6
        );
    }

    #[test]
    fn derivatives() {
        let vx = pi(&[1, 2]);
        let vy = pi(&[1, 3]);
        // d(x^2 y)/dx = 2xy
        let p = x(&[1, 2]).mul(&x(&[1, 2])).mul(&x(&[1, 3]));
        assert_eq!(
            p.partial_derivative(&vx),
            x(&[1, 2]).mul(&x(&[1, 3])).scale(&BigInt::from(2))
        );
        assert!(x(&[1, 3]).partial_derivative(&vx).is_zero());
        assert_eq!(x(&[1, 2]).mul(&x(&[1, 3])).partial_derivative(&vy), x(&[1, 2]));
        // Leibniz on a sample pair.
        let q = x(&[1, 3]).add(&Polynomial::one());
        let lhs = p.mul(&q).partial_derivative(&vy);
        let rhs = p.partial_derivative(&vy).mul(&q).add(&p.mul(&q.partial_derivative(&vy)));
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn division() {
        let z = Monomial::var(pi(&[1, 2]));
        let p = x(&[1, 2]).mul(&x(&[1, 3])).sub(&x(&[1, 2]).mul(&x(&[1, 4])));
        assert_eq!(p.divide_out(&z).unwrap(), x(&[1, 3]).sub(&x(&[1, 4])));
        assert_eq!(p.divide_out(&Monomial::one()).unwrap(), p);
        let bad = x(&[1, 3]).sub(&x(&[1, 2]));
        assert!(bad.divide_out(&z).is_err());
        assert_eq!(p.content_monomial(), z);
    }

    #[test]
    fn display_and_parse_roundtrip() {
        let p = x(&[1, 4, 5])
            .sub(&x(&[1, 2, 4]).mul(&x(&[1, 3, 5])))
            .add(&x(&[1, 3, 4]).mul(&x(&[1, 2, 5])));
        let s = p.to_string();
        assert_eq!(parse_polynomial(&s).unwrap(), p);
        let rho = Polynomial::var(Variable::rho(
            PluckerIndex::new(&[1, 2]),
            PluckerIndex::new(&[3, 4]),
        ));
        let q = rho.mul(&rho).scale(&BigInt::from(-3)).add(&x(&[1, 3]));
        assert_eq!(parse_polynomial(&q.to_string()).unwrap(), q);
        assert_eq!(parse_polynomial("0").unwrap(), Polynomial::zero());
        assert_eq!(
            parse_polynomial(&Polynomial::zero().to_string()).unwrap(),
            Polynomial::zero()
        );
        assert!(parse_polynomial("x[12] +").is_err());
        assert!(parse_polynomial("z[12]").is_err());
    }

    #[test]
    fn variable_ordering_by_tag() {
        let u = PluckerIndex::new(&[1, 3]);
        let v = PluckerIndex::new(&[2, 4]);
        let order = [
            Variable::Pi(u.clone()),
            Variable::rho(u.clone(), v.clone()),
            Variable::Eps(u.clone()),
            Variable::delta(u.clone(), v.clone()),
            Variable::y_inv(u, v),
        ];
        for w in order.windows(2) {
            assert!(w[0] < w[1]);
        }
    }

    /// Brute-force solution count by iterating over the full grid, as an
    /// independent oracle for the backtracking solver.
    fn naive_count(
        polys: &[Polynomial],
        vars: &[Variable],
        prime: u64,
        zero: &[Variable],
        nonzero: &[Variable],
    ) -> usize {
        let mut count = 0;
        let total = prime.pow(vars.len() as u32);
        'outer: for mut code in 0..total {
            let mut point = BTreeMap::new();
            for v in vars {
                point.insert(v.clone(), code % prime);
                code /= prime;
            }
            for v in zero {
                if point[v] != 0 {
                    continue 'outer;
                }
            }
            for v in nonzero {
                if point[v] == 0 {
                    continue 'outer;
                }
            }
            if polys.iter().all(|p| p.evaluate_mod_p(&point, prime) == 0) {
                count += 1;
            }
        }
        count
    }

    #[test]
    fn solver_matches_naive_enumeration() {
        let vars = [pi(&[1, 3]), pi(&[1, 4]), pi(&[2, 3]), pi(&[2, 4])];
        // x13*x24 - x14*x23 and x13 + x24 - 1 over F_5 and F_7.
        let polys = [
            x(&[1, 3]).mul(&x(&[2, 4])).sub(&x(&[1, 4]).mul(&x(&[2, 3]))),
            x(&[1, 3]).add(&x(&[2, 4])).sub(&Polynomial::one()),
        ];
        for prime in [5u64, 7] {
            for (zero, nonzero) in [
                (vec![], vec![]),
                (vec![pi(&[1, 4])], vec![]),
                (vec![], vec![pi(&[1, 3]), pi(&[2, 3])]),
                (vec![pi(&[2, 4])], vec![pi(&[1, 3])]),
            ] {
                let sys = FpSystem::new(&polys, &vars, prime, &zero, &nonzero).unwrap();
                let want = naive_count(&polys, &vars, prime, &zero, &nonzero);
                assert_eq!(sys.count(usize::MAX), want);
                assert_eq!(sys.has_solution(), want > 0);
                let pts = sys.enumerate(usize::MAX);
                assert_eq!(pts.len(), want);
                for pt in &pts {
                    assert!(polys.iter().all(|p| p.evaluate_mod_p(pt, prime) == 0));
                }
            }
        }
    }

    #[test]
    fn solver_edge_cases() {
        let vars = [pi(&[1, 3]), pi(&[1, 4])];
        // Inconsistent constant relation: no solutions.
        let sys = FpSystem::new(&[Polynomial::one()], &vars, 5, &[], &[]).unwrap();
        assert!(!sys.has_solution());
        assert_eq!(sys.count(usize::MAX), 0);
        // The zero relation constrains nothing.
        let sys = FpSystem::new(&[Polynomial::zero()], &vars, 5, &[], &[]).unwrap();
        assert_eq!(sys.count(usize::MAX), 25);
        // A variable pinned zero while a relation forces it nonzero.
        let p = x(&[1, 3]).sub(&Polynomial::one());
        let sys = FpSystem::new(&[p], &vars, 5, &[pi(&[1, 3])], &[]).unwrap();
        assert!(!sys.has_solution());
        // The enumeration cap is respected.
        let sys = FpSystem::new(&[], &vars, 7, &[], &[]).unwrap();
        assert_eq!(sys.enumerate(10).len(), 10);
        assert_eq!(sys.count(usize::MAX), 49);
        // Composite moduli are rejected.
        assert!(FpSystem::new(&[], &vars, 6, &[], &[]).is_err());
    }
}
