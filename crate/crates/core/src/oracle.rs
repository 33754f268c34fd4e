//! Independent checks: a brute-force solver for small constraint systems, a
//! closed-form sphere table, and a numerical winding number.
//!
//! The enumerator shares nothing with the propagator except the constraint
//! data types; it evaluates every constraint on total assignments, reading
//! conditionals as material implications.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::engine::{propagate_with, EngineConfig, RankState};
use crate::lattice::{matrix_map, ExtNat, RankKind};
use crate::model::{build_model, Flag, Model};
use crate::rules::{instantiate_rules, ConstraintSet, Effect, FlagVar, Form, Guard, RankVar, VarRef};
use crate::topology;

/// Default number of search nodes before giving up.
pub const NODE_BUDGET: u64 = 50_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("search exceeded {budget} nodes")]
    TooLarge { budget: u64 },
    #[error("cap {cap} outside 1..=8")]
    BadCap { cap: u32 },
}

/// A total assignment of ranks and flags.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Assignment {
    pub ranks: Vec<ExtNat>,
    pub flags: Vec<bool>,
}

impl Assignment {
    pub fn rank(&self, v: RankVar) -> ExtNat {
        self.ranks[v.index()]
    }

    pub fn flag(&self, f: FlagVar) -> bool {
        self.flags[f.index()]
    }

    /// The four ranks of one algebra, in bsr, tsr, csr, gsr order.
    pub fn ranks_of(&self, algebra: usize) -> [ExtNat; 4] {
        let r = &self.ranks[algebra * 4..algebra * 4 + 4];
        [r[0], r[1], r[2], r[3]]
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.ranks.iter().map(ExtNat::to_string).collect();
        write!(f, "({})", parts.join(", "))
    }
}

fn holds_guard(a: &Partial, g: &Guard) -> bool {
    match *g {
        Guard::HiAtMost(v, c) => a.rank(v) <= c,
        Guard::LoAtLeast(v, c) => a.rank(v) >= c,
        Guard::HiFinite(v) => a.rank(v).is_finite(),
        Guard::FlagIs(f, b) => a.flag(f) == b,
    }
}

fn holds_effect(a: &Partial, e: &Effect) -> bool {
    match *e {
        Effect::AtMost(v, c) => a.rank(v) <= c,
        Effect::AtLeast(v, c) => a.rank(v) >= c,
        Effect::SetFlag(f, b) => a.flag(f) == b,
    }
}

fn plus(v: ExtNat, s: u32) -> ExtNat {
    match v {
        ExtNat::Fin(x) => ExtNat::Fin(x + s),
        ExtNat::Inf => ExtNat::Inf,
    }
}

/// The truth of `form` under a total assignment.
fn holds(a: &Partial, form: &Form) -> bool {
    match form {
        Form::AtLeast(x, c) => a.rank(*x) >= *c,
        Form::AtMost(x, c) => a.rank(*x) <= *c,
        Form::LeVar(x, y) => a.rank(*x) <= a.rank(*y),
        Form::LeShift(x, y) => a.rank(*x) <= plus(a.rank(*y), 1),
        Form::LeMax(x, terms) => terms.iter().any(|t| a.rank(*x) <= plus(a.rank(t.var), t.shift)),
        Form::EqVar(x, y) => a.rank(*x) == a.rank(*y),
        Form::MatrixEq { x, y, n } => a.rank(*x) == matrix_map(a.rank(*y), *n),
        Form::MatrixLe { x, y, n } => a.rank(*x) <= matrix_map(a.rank(*y), *n),
        Form::Conditional { guards, effects } => {
            !guards.iter().all(|g| holds_guard(a, g)) || effects.iter().all(|e| holds_effect(a, e))
        }
    }
}

struct Partial {
    ranks: Vec<ExtNat>,
    flags: Vec<bool>,
}

impl Partial {
    fn rank(&self, v: RankVar) -> ExtNat {
        self.ranks[v.index()]
    }

    fn flag(&self, f: FlagVar) -> bool {
        self.flags[f.index()]
    }
}

/// A variable of the search: rank slots come first, then flag slots.
fn slot_count(algebras: usize) -> usize {
    algebras * (4 + Flag::COUNT)
}

fn slot_of(v: VarRef, algebras: usize) -> usize {
    match v {
        VarRef::Rank(r) => r.index(),
        VarRef::Flag(f) => algebras * 4 + f.index(),
    }
}

/// A slot fixed to one value before the search starts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pin {
    Rank(RankVar, ExtNat),
    Flag(FlagVar, bool),
}

struct Search<'a, 'v> {
    cs: &'a ConstraintSet,
    algebras: usize,
    order: Vec<usize>,
    due: Vec<Vec<usize>>,
    domain: Vec<ExtNat>,
    pin: Option<(usize, usize)>,
    partial: Partial,
    nodes: u64,
    budget: u64,
    visit: &'v mut dyn FnMut(&Assignment) -> bool,
}

impl Search<'_, '_> {
    fn assign(&mut self, slot: usize, choice: usize) {
        let ranks = self.algebras * 4;
        if slot < ranks {
            self.partial.ranks[slot] = self.domain[choice];
        } else {
            self.partial.flags[slot - ranks] = choice == 1;
        }
    }

    /// Returns `Ok(false)` once the visitor asks to stop.
    fn go(&mut self, depth: usize) -> Result<bool, OracleError> {
        if depth == self.order.len() {
            let a = Assignment { ranks: self.partial.ranks.clone(), flags: self.partial.flags.clone() };
            return Ok((self.visit)(&a));
        }
        let slot = self.order[depth];
        let choices: Vec<usize> = match self.pin {
            Some((s, c)) if s == slot => vec![c],
            _ if slot < self.algebras * 4 => (0..self.domain.len()).collect(),
            _ => vec![0, 1],
        };
        for choice in choices {
            self.nodes += 1;
            if self.nodes > self.budget {
                return Err(OracleError::TooLarge { budget: self.budget });
            }
            self.assign(slot, choice);
            if self.due[depth].iter().all(|&c| holds(&self.partial, &self.cs.constraints[c].form))
                && !self.go(depth + 1)?
            {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Breadth-first order over the graph linking variables that share a
/// constraint, so each constraint is checked soon after its first variable.
fn search_order(cs: &ConstraintSet, start: usize) -> (Vec<usize>, Vec<Vec<usize>>) {
    let n = slot_count(cs.algebras);
    let vars: Vec<Vec<usize>> = cs
        .constraints
        .iter()
        .map(|c| {
            let mut v: Vec<usize> = c.form.reads().into_iter().chain(c.form.writes()).map(|r| slot_of(r, cs.algebras)).collect();
            v.sort_unstable();
            v.dedup();
            v
        })
        .collect();
    let mut touching = vec![Vec::new(); n];
    for (i, vs) in vars.iter().enumerate() {
        for &v in vs {
            touching[v].push(i);
        }
    }
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for root in std::iter::once(start).chain(0..n) {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &c in &touching[v] {
                for &w in &vars[c] {
                    if !seen[w] {
                        seen[w] = true;
                        queue.push_back(w);
                    }
                }
            }
        }
    }
    let mut position = vec![0; n];
    for (p, &v) in order.iter().enumerate() {
        position[v] = p;
    }
    let mut due = vec![Vec::new(); n];
    for (i, vs) in vars.iter().enumerate() {
        let last = vs.iter().map(|&v| position[v]).max().unwrap_or(0);
        due[last].push(i);
    }
    (order, due)
}

/// Visits satisfying assignments over `{1..cap, ∞}` and both flag values,
/// optionally with one slot pinned, until `visit` returns false. Returns the
/// number of search nodes used.
pub fn search(
    cs: &ConstraintSet,
    cap: u32,
    budget: u64,
    pin: Option<Pin>,
    visit: &mut dyn FnMut(&Assignment) -> bool,
) -> Result<u64, OracleError> {
    if !(1..=8).contains(&cap) {
        return Err(OracleError::BadCap { cap });
    }
    let n = cs.algebras;
    let domain: Vec<ExtNat> = (1..=cap).map(ExtNat::Fin).chain(std::iter::once(ExtNat::Inf)).collect();
    let pin = match pin {
        None => None,
        Some(Pin::Rank(v, x)) => match domain.iter().position(|d| *d == x) {
            Some(c) => Some((slot_of(VarRef::Rank(v), n), c)),
            None => return Ok(0),
        },
        Some(Pin::Flag(f, b)) => Some((slot_of(VarRef::Flag(f), n), usize::from(b))),
    };
    if slot_count(n) == 0 {
        (visit)(&Assignment { ranks: Vec::new(), flags: Vec::new() });
        return Ok(0);
    }
    let (order, due) = search_order(cs, pin.map_or(0, |p| p.0));
    let mut s = Search {
        cs,
        algebras: n,
        order,
        due,
        domain,
        pin,
        partial: Partial { ranks: vec![ExtNat::ONE; n * 4], flags: vec![false; n * Flag::COUNT] },
        nodes: 0,
        budget,
        visit,
    };
    s.go(0)?;
    Ok(s.nodes)
}

/// Calls `visit` for every satisfying assignment.
pub fn for_each_solution(
    cs: &ConstraintSet,
    cap: u32,
    budget: u64,
    mut visit: impl FnMut(&Assignment),
) -> Result<u64, OracleError> {
    search(cs, cap, budget, None, &mut |a| {
        visit(a);
        true
    })
}

/// Some satisfying assignment with `pin` in force, if one exists.
pub fn find_solution(cs: &ConstraintSet, cap: u32, pin: Option<Pin>) -> Result<Option<Assignment>, OracleError> {
    let mut found = None;
    search(cs, cap, NODE_BUDGET, pin, &mut |a| {
        found = Some(a.clone());
        false
    })?;
    Ok(found)
}

/// Every satisfying assignment, with the default node budget.
pub fn enumerate_solutions(cs: &ConstraintSet, cap: u32) -> Result<BTreeSet<Assignment>, OracleError> {
    let mut out = BTreeSet::new();
    for_each_solution(cs, cap, NODE_BUDGET, |a| {
        out.insert(a.clone());
    })?;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub assignment: Assignment,
    /// Human-readable name of the variable the engine excluded wrongly.
    pub variable: String,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SoundnessReport {
    /// Values the engine ruled out, each confirmed by an exhaustive search.
    pub excluded_checked: usize,
    pub engine_contradiction: bool,
    pub violations: Vec<Violation>,
}

impl SoundnessReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks an engine outcome against the oracle's reading of `oracle_cs`.
///
/// Every rank value and flag value the engine excludes must have no
/// solution; a contradiction is sound only when nothing satisfies the set.
pub fn check_containment(
    oracle_cs: &ConstraintSet,
    engine: &Result<RankState, Box<crate::engine::Contradiction>>,
    model: &Model,
    cap: u32,
) -> Result<SoundnessReport, OracleError> {
    let mut violations = Vec::new();
    let mut excluded_checked = 0;
    match engine {
        Err(c) => {
            excluded_checked += 1;
            if let Some(a) = find_solution(oracle_cs, cap, None)? {
                violations.push(Violation {
                    assignment: a,
                    variable: c.subject.name(model),
                    detail: "engine reported a contradiction but a solution exists".into(),
                });
            }
        }
        Ok(state) => {
            let domain = (1..=cap).map(ExtNat::Fin).chain(std::iter::once(ExtNat::Inf));
            for alg in 0..oracle_cs.algebras {
                for k in RankKind::ALL {
                    let v = RankVar::new(alg, k);
                    let iv = state.var(v);
                    for x in domain.clone().filter(|x| !iv.contains(*x)) {
                        excluded_checked += 1;
                        if let Some(a) = find_solution(oracle_cs, cap, Some(Pin::Rank(v, x)))? {
                            violations.push(Violation {
                                assignment: a,
                                variable: v.name(model),
                                detail: format!("value {x} outside {iv}"),
                            });
                        }
                    }
                }
                for f in Flag::ALL {
                    let fv = FlagVar::new(alg, f);
                    if let Some(b) = state.flag(alg, f).known() {
                        excluded_checked += 1;
                        if let Some(a) = find_solution(oracle_cs, cap, Some(Pin::Flag(fv, !b)))? {
                            violations.push(Violation {
                                assignment: a,
                                variable: fv.name(model),
                                detail: format!("value {} but engine derived {b}", !b),
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(SoundnessReport { excluded_checked, engine_contradiction: engine.is_err(), violations })
}

/// Propagates `model` and checks the result against the oracle.
pub fn soundness_check(model: &Model, cap: u32) -> Result<SoundnessReport, OracleError> {
    let cs = instantiate_rules(model);
    let engine = propagate_with(&cs, &EngineConfig::default());
    check_containment(&cs, &engine, model, cap)
}

/// Projection of a solution set onto one algebra's four ranks.
pub fn project(solutions: &BTreeSet<Assignment>, algebra: usize) -> BTreeSet<[ExtNat; 4]> {
    solutions.iter().map(|a| a.ranks_of(algebra)).collect()
}

/// A small random model in the description language: two algebras, up to two
/// morphisms or extensions between them, and up to two assumptions.
pub fn random_model_text(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::new();
    let tri = |rng: &mut ChaCha8Rng| ["true", "false", "unknown"][rng.gen_range(0..3)];
    let space = |rng: &mut ChaCha8Rng, name: &str, out: &mut String| {
        let expr = match rng.gen_range(0..4) {
            0 => format!("sphere({})", rng.gen_range(1..=7)),
            1 => format!("torus({})", rng.gen_range(1..=5)),
            2 => format!("cube({})", rng.gen_range(0..=3)),
            _ => "point".to_string(),
        };
        out.push_str(&format!("space {name} = {expr}\n"));
    };
    let abstract_algebra = |rng: &mut ChaCha8Rng, name: &str, out: &mut String| {
        let mut flags = vec![format!("cstar = {}", rng.gen_bool(0.5))];
        // Finiteness profiles that the definitions allow together.
        let profile: &[&str] = match rng.gen_range(0..6) {
            0 => &["finite = true", "stably_finite = true"],
            1 => &["finite = true", "stably_finite = false"],
            2 => &["finite = false"],
            3 => &["stably_finite = unknown"],
            _ => &[],
        };
        flags.extend(profile.iter().map(|f| f.to_string()));
        if !profile.iter().any(|f| f.ends_with("false")) && rng.gen_bool(0.3) {
            flags.push("commutative = true".into());
        }
        for key in ["k1_trivial", "unit_finite_order_k0"] {
            if rng.gen_bool(0.25) {
                flags.push(format!("{key} = {}", tri(rng)));
            }
        }
        out.push_str(&format!("algebra {name} = abstract {{ {} }}\n", flags.join(", ")));
    };

    if rng.gen_bool(0.5) {
        space(&mut rng, "X", &mut out);
        out.push_str("algebra A = C(X)\n");
    } else {
        abstract_algebra(&mut rng, "A", &mut out);
    }
    match rng.gen_range(0..5) {
        0 => {
            space(&mut rng, "Y", &mut out);
            out.push_str("algebra B = C(Y)\n");
        }
        1 => out.push_str(&format!("algebra B = matrix({}, A)\n", rng.gen_range(2..=3))),
        2 => out.push_str("algebra B = stabilize(A)\n"),
        3 => out.push_str("algebra B = sum(A, A)\n"),
        _ => abstract_algebra(&mut rng, "B", &mut out),
    }
    let attrs = ["onto", "split", "dense", "spectral", "homotopy_equiv", "gelfand"];
    for i in 0..rng.gen_range(0..=2) {
        let (from, to) = if rng.gen_bool(0.5) { ("A", "B") } else { ("B", "A") };
        if rng.gen_bool(0.6) {
            let mut chosen: Vec<&str> = attrs.iter().copied().filter(|_| rng.gen_bool(0.3)).collect();
            if chosen.is_empty() {
                chosen.push(attrs[rng.gen_range(0..attrs.len())]);
            }
            out.push_str(&format!("morphism f{i} : {from} -> {to} [{}]\n", chosen.join(", ")));
        } else {
            let ideal = if rng.gen_bool(0.5) { from } else { to };
            let approx = if rng.gen_bool(0.5) { " [approx_identity]" } else { "" };
            out.push_str(&format!("extension e{i} : {ideal} -> {from} -> {to}{approx}\n"));
        }
    }
    for _ in 0..rng.gen_range(0..=2) {
        let rank = ["bsr", "tsr", "csr", "gsr"][rng.gen_range(0..4)];
        let alg = if rng.gen_bool(0.5) { "A" } else { "B" };
        let rel = ["==", "<=", ">="][rng.gen_range(0..3)];
        let value = if rng.gen_bool(0.15) { "inf".to_string() } else { rng.gen_range(1..=6).to_string() };
        out.push_str(&format!("assume {rank}({alg}) {rel} {value}\n"));
    }
    out
}

/// [`random_model_text`] built into a model.
pub fn random_model(seed: u64) -> Model {
    let text = random_model_text(seed);
    let statements = crate::dsl::parse(&text).unwrap_or_else(|e| panic!("generated model does not parse: {e}\n{text}"));
    build_model(&statements).unwrap_or_else(|e| panic!("generated model does not build: {e}\n{text}"))
}

/// gsr C(S^d) from its piecewise closed form.
pub fn gsr_sphere_closed_form(d: u32) -> ExtNat {
    if d <= 4 {
        ExtNat::ONE
    } else if d.is_multiple_of(4) {
        ExtNat::Fin(d.div_ceil(2))
    } else {
        ExtNat::Fin(d.div_ceil(2) + 1)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SphereRow {
    pub d: u32,
    pub csr: ExtNat,
    pub gsr_table: ExtNat,
    pub gsr_closed: ExtNat,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CrosscheckReport {
    pub rows: Vec<SphereRow>,
    /// First degree where the two gsr computations differ or gsr exceeds csr.
    pub first_mismatch: Option<u32>,
}

impl CrosscheckReport {
    pub fn passed(&self) -> bool {
        self.first_mismatch.is_none()
    }
}

/// Compares the homotopy-table search with the closed form for `1..=max_d`.
pub fn sphere_crosscheck(max_d: u32) -> CrosscheckReport {
    let rows: Vec<SphereRow> = (1..=max_d)
        .map(|d| SphereRow {
            d,
            csr: topology::csr_sphere(d),
            gsr_table: topology::try_gsr_sphere_via_table(d).unwrap_or(ExtNat::Inf),
            gsr_closed: gsr_sphere_closed_form(d),
        })
        .collect();
    let first_mismatch = rows.iter().find(|r| r.gsr_table != r.gsr_closed || r.gsr_table > r.csr).map(|r| r.d);
    CrosscheckReport { rows, first_mismatch }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum WindingError {
    #[error("need at least 8 samples, got {0}")]
    TooFewSamples(usize),
    #[error("sample {index} has modulus {modulus:e}, below the zero tolerance")]
    ZeroCrossing { index: usize, modulus: f64 },
    #[error("phase step after sample {index} is {step}, at least pi")]
    SampleTooCoarse { index: usize, step: f64 },
    #[error("total phase / 2pi = {0} is not within tolerance of an integer")]
    NotNearInteger(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindingTolerance {
    pub integer: f64,
    pub zero: f64,
}

impl Default for WindingTolerance {
    fn default() -> Self {
        WindingTolerance { integer: 1e-6, zero: 1e-9 }
    }
}

/// Samples `z_0 .. z_{N-1}` of a closed loop in the punctured plane.
#[derive(Clone, Debug, PartialEq)]
pub struct LoopSamples(Vec<Complex64>);

impl LoopSamples {
    pub fn new(samples: Vec<Complex64>) -> Result<LoopSamples, WindingError> {
        if samples.len() < 8 {
            return Err(WindingError::TooFewSamples(samples.len()));
        }
        Ok(LoopSamples(samples))
    }

    /// Samples `f(i / n)` for `i in 0..n`.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> Complex64) -> Result<LoopSamples, WindingError> {
        LoopSamples::new((0..n).map(|i| f(i as f64 / n as f64)).collect())
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.0
    }

    pub fn rotate(&self, k: usize) -> LoopSamples {
        let mut v = self.0.clone();
        let len = v.len();
        v.rotate_left(k % len);
        LoopSamples(v)
    }

    pub fn scale(&self, c: Complex64) -> LoopSamples {
        LoopSamples(self.0.iter().map(|z| z * c).collect())
    }

    /// Pointwise product; both loops must have the same length.
    pub fn product(&self, other: &LoopSamples) -> LoopSamples {
        assert_eq!(self.0.len(), other.0.len(), "loops sampled at different resolutions");
        LoopSamples(self.0.iter().zip(&other.0).map(|(a, b)| a * b).collect())
    }
}

/// The degree of the loop around the origin.
pub fn winding_number(samples: &LoopSamples) -> Result<i64, WindingError> {
    winding_number_with(samples, WindingTolerance::default())
}

pub fn winding_number_with(samples: &LoopSamples, tol: WindingTolerance) -> Result<i64, WindingError> {
    let z = samples.samples();
    for (index, w) in z.iter().enumerate() {
        if w.norm() < tol.zero {
            return Err(WindingError::ZeroCrossing { index, modulus: w.norm() });
        }
    }
    let mut total = 0.0;
    for i in 0..z.len() {
        let step = (z[(i + 1) % z.len()] / z[i]).arg();
        if step.abs() >= PI {
            return Err(WindingError::SampleTooCoarse { index: i, step });
        }
        total += step;
    }
    let turns = total / (2.0 * PI);
    let k = turns.round();
    if (turns - k).abs() > tol.integer {
        return Err(WindingError::NotNearInteger(turns));
    }
    Ok(k as i64)
}

/// `t ↦ e^{2πikt}`.
pub fn power_loop(k: i64, n: usize) -> LoopSamples {
    LoopSamples::from_fn(n, |t| Complex64::from_polar(1.0, 2.0 * PI * k as f64 * t)).expect("n >= 8")
}
