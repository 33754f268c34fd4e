//! Worklist propagation of rank intervals and flags to a fixpoint.
//!
//! Every change is logged as a [`TraceStep`] that names the constraint that
//! caused it and the earlier steps it read, so any bound can be explained by
//! walking premises backwards.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dsl::Relation;
use crate::lattice::{matrix_map, matrix_preimage_max, matrix_preimage_min, ExtNat, RankInterval, RankKind, MAX_FINITE};
use crate::model::{AlgebraId, Flag, Model, Tri};
use crate::rules::{self, ConstraintSet, Effect, FlagVar, Form, Guard, RankVar};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EngineConfig {
    /// Finite lower bounds above this value are clamped down to it.
    pub max_finite: u32,
    /// Shuffles the initial worklist order; the fixpoint does not depend on it.
    pub shuffle_seed: Option<u64>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig { max_finite: MAX_FINITE, shuffle_seed: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Lo,
    Hi,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Lo => "lo",
            Side::Hi => "hi",
        })
    }
}

/// What a trace step changed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Target {
    Rank(RankVar, Side),
    Flag(FlagVar),
}

impl Target {
    pub fn name(&self, m: &Model) -> String {
        match self {
            Target::Rank(v, _) => v.name(m),
            Target::Flag(f) => f.name(m),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Value {
    Interval(RankInterval),
    Flag(Tri),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Interval(i) => write!(f, "{i}"),
            Value::Flag(Tri::True) => f.write_str("true"),
            Value::Flag(Tri::False) => f.write_str("false"),
            Value::Flag(Tri::Unknown) => f.write_str("unknown"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceStep {
    pub target: Target,
    pub old: Value,
    pub new: Value,
    /// Index of the constraint in the set that was propagated.
    pub constraint: usize,
    pub rule_id: &'static str,
    pub citation: &'static str,
    /// Indices of the earlier steps whose bounds this step read.
    pub premises: Vec<usize>,
}

/// One side of a fact, as it entered a conflict.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fact {
    Interval(RankInterval),
    AtLeast(ExtNat),
    AtMost(ExtNat),
    Flag(bool),
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fact::Interval(i) => write!(f, "in {i}"),
            Fact::AtLeast(v) => write!(f, ">= {v}"),
            Fact::AtMost(v) => write!(f, "<= {v}"),
            Fact::Flag(b) => write!(f, "= {b}"),
        }
    }
}

/// Two facts about one variable that cannot both hold.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Contradiction {
    pub subject: Target,
    pub existing: Fact,
    pub incoming: Fact,
    pub rule_id: &'static str,
    pub citation: &'static str,
    /// A small subset of the original constraints that still conflicts,
    /// as indices into the propagated set.
    pub constraints: Vec<usize>,
    /// Steps of the subset's propagation that the conflict depends on; step
    /// constraint indices refer to the original set.
    pub trace: Vec<TraceStep>,
}

impl Contradiction {
    /// Re-propagates the supporting constraints from the initial state.
    pub fn replay(&self, cs: &ConstraintSet, config: &EngineConfig) -> Option<Box<Contradiction>> {
        let sub = cs.subset(&self.constraints);
        propagate_with(&sub, config).err()
    }

    pub fn describe(&self, m: &Model) -> String {
        format!(
            "{} {} conflicts with {} {} ({}: {})",
            self.subject.name(m),
            self.existing,
            self.subject.name(m),
            self.incoming,
            self.rule_id,
            self.citation
        )
    }
}

impl fmt::Display for Contradiction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "contradiction: {:?} {} vs {} ({})", self.subject, self.existing, self.incoming, self.rule_id)
    }
}

impl std::error::Error for Contradiction {}

/// Intervals and flags for every algebra, plus the log that produced them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankState {
    intervals: Vec<RankInterval>,
    flags: Vec<Tri>,
    pub trace: Vec<TraceStep>,
    /// Last step that set each (rank var, side) and each flag.
    lo_setter: Vec<Option<usize>>,
    hi_setter: Vec<Option<usize>>,
    flag_setter: Vec<Option<usize>>,
}

impl RankState {
    pub fn initial(algebras: usize) -> RankState {
        RankState {
            intervals: vec![RankInterval::TOP; algebras * 4],
            flags: vec![Tri::Unknown; algebras * Flag::COUNT],
            trace: Vec::new(),
            lo_setter: vec![None; algebras * 4],
            hi_setter: vec![None; algebras * 4],
            flag_setter: vec![None; algebras * Flag::COUNT],
        }
    }

    pub fn algebras(&self) -> usize {
        self.intervals.len() / 4
    }

    pub fn interval(&self, algebra: AlgebraId, kind: RankKind) -> RankInterval {
        self.intervals[RankVar::new(algebra, kind).index()]
    }

    pub fn var(&self, v: RankVar) -> RankInterval {
        self.intervals[v.index()]
    }

    pub fn flag(&self, algebra: AlgebraId, flag: Flag) -> Tri {
        self.flags[FlagVar::new(algebra, flag).index()]
    }

    /// The step that produced the current value of `target`.
    pub fn setter(&self, target: Target) -> Option<usize> {
        match target {
            Target::Rank(v, Side::Lo) => self.lo_setter[v.index()],
            Target::Rank(v, Side::Hi) => self.hi_setter[v.index()],
            Target::Flag(f) => self.flag_setter[f.index()],
        }
    }

    fn lo(&self, v: RankVar) -> ExtNat {
        self.intervals[v.index()].lo()
    }

    fn hi(&self, v: RankVar) -> ExtNat {
        self.intervals[v.index()].hi()
    }
}

/// A proposed narrowing, with the (var, side) or flag sources it read.
struct Update {
    target: Target,
    bound: Bound,
    sources: Vec<Target>,
}

#[derive(Clone, Copy)]
enum Bound {
    Rank(ExtNat),
    Flag(bool),
}

fn shift_down(v: ExtNat, s: u32) -> ExtNat {
    (0..s).fold(v, |acc, _| acc.pred())
}

fn shift_up(v: ExtNat, s: u32) -> ExtNat {
    (0..s).fold(v, |acc, _| acc.succ())
}

fn guard_holds(st: &RankState, g: &Guard) -> bool {
    match *g {
        Guard::HiAtMost(v, c) => st.hi(v) <= c,
        Guard::LoAtLeast(v, c) => st.lo(v) >= c,
        Guard::HiFinite(v) => st.hi(v).is_finite(),
        Guard::FlagIs(f, b) => st.flags[f.index()].known() == Some(b),
    }
}

fn guard_source(g: &Guard) -> Target {
    match *g {
        Guard::HiAtMost(v, _) | Guard::HiFinite(v) => Target::Rank(v, Side::Hi),
        Guard::LoAtLeast(v, _) => Target::Rank(v, Side::Lo),
        Guard::FlagIs(f, _) => Target::Flag(f),
    }
}

fn lo_of(v: RankVar) -> Target {
    Target::Rank(v, Side::Lo)
}

fn hi_of(v: RankVar) -> Target {
    Target::Rank(v, Side::Hi)
}

fn at_least(v: RankVar, value: ExtNat, sources: Vec<Target>) -> Update {
    Update { target: lo_of(v), bound: Bound::Rank(value), sources }
}

fn at_most(v: RankVar, value: ExtNat, sources: Vec<Target>) -> Update {
    Update { target: hi_of(v), bound: Bound::Rank(value), sources }
}

/// The narrowings a form licenses in the current state.
fn narrowings(st: &RankState, form: &Form, fired: &mut bool) -> Vec<Update> {
    match form {
        Form::AtLeast(x, c) => vec![at_least(*x, *c, vec![])],
        Form::AtMost(x, c) => vec![at_most(*x, *c, vec![])],
        Form::LeVar(x, y) => le_var(st, *x, *y),
        Form::EqVar(x, y) => {
            let mut out = le_var(st, *x, *y);
            out.extend(le_var(st, *y, *x));
            out
        }
        Form::LeShift(x, y) => vec![
            at_most(*x, st.hi(*y).succ(), vec![hi_of(*y)]),
            at_least(*y, st.lo(*x).pred(), vec![lo_of(*x)]),
        ],
        Form::LeMax(x, terms) => {
            let top = terms.iter().map(|t| shift_up(st.hi(t.var), t.shift)).max().unwrap_or(ExtNat::ONE);
            let mut out = vec![at_most(*x, top, terms.iter().map(|t| hi_of(t.var)).collect())];
            let lx = st.lo(*x);
            for (i, t) in terms.iter().enumerate() {
                let others_below =
                    terms.iter().enumerate().all(|(j, u)| j == i || lx > shift_up(st.hi(u.var), u.shift));
                if others_below {
                    let mut sources = vec![lo_of(*x)];
                    sources.extend(terms.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, u)| hi_of(u.var)));
                    out.push(at_least(t.var, shift_down(lx, t.shift), sources));
                }
            }
            out
        }
        Form::MatrixEq { x, y, n } => vec![
            at_least(*x, matrix_map(st.lo(*y), *n), vec![lo_of(*y)]),
            at_most(*x, matrix_map(st.hi(*y), *n), vec![hi_of(*y)]),
            at_least(*y, matrix_preimage_min(st.lo(*x), *n), vec![lo_of(*x)]),
            at_most(*y, matrix_preimage_max(st.hi(*x), *n), vec![hi_of(*x)]),
        ],
        Form::MatrixLe { x, y, n } => vec![
            at_most(*x, matrix_map(st.hi(*y), *n), vec![hi_of(*y)]),
            at_least(*y, matrix_preimage_min(st.lo(*x), *n), vec![lo_of(*x)]),
        ],
        Form::Conditional { guards, effects } => {
            if *fired || !guards.iter().all(|g| guard_holds(st, g)) {
                return Vec::new();
            }
            *fired = true;
            let sources: Vec<Target> = guards.iter().map(guard_source).collect();
            effects
                .iter()
                .map(|e| match *e {
                    Effect::AtLeast(v, c) => at_least(v, c, sources.clone()),
                    Effect::AtMost(v, c) => at_most(v, c, sources.clone()),
                    Effect::SetFlag(f, b) => Update { target: Target::Flag(f), bound: Bound::Flag(b), sources: sources.clone() },
                })
                .collect()
        }
    }
}

fn le_var(st: &RankState, x: RankVar, y: RankVar) -> Vec<Update> {
    vec![at_most(x, st.hi(y), vec![hi_of(y)]), at_least(y, st.lo(x), vec![lo_of(x)])]
}

struct Conflict {
    subject: Target,
    existing: Fact,
    incoming: Fact,
    constraint: usize,
    premises: Vec<usize>,
}

struct Runner<'a> {
    cs: &'a ConstraintSet,
    cap: u32,
    state: RankState,
    fired: Vec<bool>,
    dependents: Vec<Vec<usize>>,
    queue: VecDeque<usize>,
    queued: Vec<bool>,
}

impl<'a> Runner<'a> {
    fn new(cs: &'a ConstraintSet, state: RankState, config: &EngineConfig) -> Runner<'a> {
        let ranks = state.intervals.len();
        let slot = |r: rules::VarRef| match r {
            rules::VarRef::Rank(v) => v.index(),
            rules::VarRef::Flag(f) => ranks + f.index(),
        };
        let mut dependents = vec![Vec::new(); ranks + state.flags.len()];
        for (i, c) in cs.constraints.iter().enumerate() {
            let reads: BTreeSet<usize> = c.form.reads().into_iter().map(slot).collect();
            for r in reads {
                dependents[r].push(i);
            }
        }
        // Bare facts go first so that derived bounds are computed from them
        // directly; this only affects which rule the trace credits.
        let is_axiom = |i: &usize| match &cs.constraints[*i].form {
            Form::AtLeast(..) | Form::AtMost(..) => true,
            Form::Conditional { guards, .. } => guards.is_empty(),
            _ => false,
        };
        let (mut order, rest): (Vec<usize>, Vec<usize>) = (0..cs.len()).partition(is_axiom);
        order.extend(rest);
        if let Some(seed) = config.shuffle_seed {
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        }
        Runner {
            cs,
            cap: config.max_finite.max(1),
            state,
            fired: vec![false; cs.len()],
            dependents,
            queue: order.into_iter().collect(),
            queued: vec![true; cs.len()],
        }
    }

    fn premises(&self, sources: &[Target]) -> Vec<usize> {
        let mut p: Vec<usize> = sources.iter().filter_map(|t| self.state.setter(*t)).collect();
        p.sort_unstable();
        p.dedup();
        p
    }

    fn wake(&mut self, slot: usize) {
        for &d in &self.dependents[slot] {
            if !self.queued[d] {
                self.queued[d] = true;
                self.queue.push_back(d);
            }
        }
    }

    fn run(&mut self) -> Result<(), Conflict> {
        while let Some(c) = self.queue.pop_front() {
            self.queued[c] = false;
            let updates = narrowings(&self.state, &self.cs.constraints[c].form, &mut self.fired[c]);
            for u in updates {
                self.apply(c, u)?;
            }
        }
        Ok(())
    }

    fn apply(&mut self, c: usize, u: Update) -> Result<(), Conflict> {
        let prov = &self.cs.constraints[c].provenance;
        let premises = self.premises(&u.sources);
        let ranks = self.state.intervals.len();
        match (u.target, u.bound) {
            (Target::Rank(v, side), Bound::Rank(value)) => {
                let old = self.state.intervals[v.index()];
                let (lo, hi) = match side {
                    Side::Lo => {
                        let value = match value {
                            ExtNat::Fin(x) => ExtNat::Fin(x.min(self.cap)),
                            ExtNat::Inf => ExtNat::Inf,
                        };
                        if value <= old.lo() {
                            return Ok(());
                        }
                        (value, old.hi())
                    }
                    Side::Hi => {
                        if value >= old.hi() {
                            return Ok(());
                        }
                        (old.lo(), value)
                    }
                };
                let new = RankInterval::new(lo, hi).map_err(|_| Conflict {
                    subject: u.target,
                    existing: Fact::Interval(old),
                    incoming: match side {
                        Side::Lo => Fact::AtLeast(lo),
                        Side::Hi => Fact::AtMost(hi),
                    },
                    constraint: c,
                    premises: premises.clone(),
                })?;
                let step = self.state.trace.len();
                self.state.trace.push(TraceStep {
                    target: u.target,
                    old: Value::Interval(old),
                    new: Value::Interval(new),
                    constraint: c,
                    rule_id: prov.rule_id,
                    citation: prov.citation,
                    premises,
                });
                self.state.intervals[v.index()] = new;
                match side {
                    Side::Lo => self.state.lo_setter[v.index()] = Some(step),
                    Side::Hi => self.state.hi_setter[v.index()] = Some(step),
                }
                self.wake(v.index());
            }
            (Target::Flag(f), Bound::Flag(b)) => {
                let old = self.state.flags[f.index()];
                match old.known() {
                    Some(x) if x == b => return Ok(()),
                    Some(x) => {
                        return Err(Conflict {
                            subject: u.target,
                            existing: Fact::Flag(x),
                            incoming: Fact::Flag(b),
                            constraint: c,
                            premises,
                        })
                    }
                    None => {}
                }
                let step = self.state.trace.len();
                self.state.trace.push(TraceStep {
                    target: u.target,
                    old: Value::Flag(old),
                    new: Value::Flag(Tri::from(b)),
                    constraint: c,
                    rule_id: prov.rule_id,
                    citation: prov.citation,
                    premises,
                });
                self.state.flags[f.index()] = Tri::from(b);
                self.state.flag_setter[f.index()] = Some(step);
                self.wake(ranks + f.index());
            }
            _ => unreachable!("bound kind matches target kind"),
        }
        Ok(())
    }

    /// Steps the conflict depends on, in trace order.
    fn conflict_slice(&self, conflict: &Conflict) -> Vec<usize> {
        let mut roots = conflict.premises.clone();
        match conflict.subject {
            Target::Rank(v, _) => {
                roots.extend(self.state.lo_setter[v.index()]);
                roots.extend(self.state.hi_setter[v.index()]);
            }
            Target::Flag(f) => roots.extend(self.state.flag_setter[f.index()]),
        }
        backward_closure(&self.state.trace, roots)
    }
}

fn backward_closure(trace: &[TraceStep], roots: Vec<usize>) -> Vec<usize> {
    let mut seen = BTreeSet::new();
    let mut stack = roots;
    while let Some(s) = stack.pop() {
        if seen.insert(s) {
            stack.extend(trace[s].premises.iter().copied());
        }
    }
    seen.into_iter().collect()
}

/// Propagates from the all-unknown state with default settings.
pub fn propagate(cs: &ConstraintSet, _model: &Model) -> Result<RankState, Box<Contradiction>> {
    propagate_with(cs, &EngineConfig::default())
}

pub fn propagate_with(cs: &ConstraintSet, config: &EngineConfig) -> Result<RankState, Box<Contradiction>> {
    propagate_from(RankState::initial(cs.algebras), cs, config)
}

/// Continues propagation from an existing state.
pub fn propagate_from(
    state: RankState,
    cs: &ConstraintSet,
    config: &EngineConfig,
) -> Result<RankState, Box<Contradiction>> {
    let mut runner = Runner::new(cs, state, config);
    match runner.run() {
        Ok(()) => Ok(runner.state),
        Err(conflict) => Err(Box::new(minimize(cs, &runner, &conflict, config))),
    }
}

/// Shrinks the conflict to a small constraint subset and slices its trace.
fn minimize(cs: &ConstraintSet, runner: &Runner<'_>, conflict: &Conflict, config: &EngineConfig) -> Contradiction {
    let plain = EngineConfig { shuffle_seed: None, ..*config };
    let fails = |keep: &[usize]| {
        let sub = cs.subset(keep);
        let mut r = Runner::new(&sub, RankState::initial(cs.algebras), &plain);
        r.run().is_err()
    };

    let mut keep: BTreeSet<usize> =
        runner.conflict_slice(conflict).into_iter().map(|s| runner.state.trace[s].constraint).collect();
    keep.insert(conflict.constraint);
    let mut keep: Vec<usize> = keep.into_iter().collect();
    if !fails(&keep) {
        // Only possible when the run started from a non-initial state.
        keep = (0..cs.len()).collect();
    }
    let mut i = 0;
    while i < keep.len() {
        let mut trial = keep.clone();
        trial.remove(i);
        if fails(&trial) {
            keep = trial;
        } else {
            i += 1;
        }
    }

    let sub = cs.subset(&keep);
    let mut r = Runner::new(&sub, RankState::initial(cs.algebras), &plain);
    match r.run() {
        Err(c) => {
            let slice = r.conflict_slice(&c);
            let renumber = |s: usize| slice.binary_search(&s).expect("premise inside slice");
            let trace = slice
                .iter()
                .map(|&s| {
                    let step = &r.state.trace[s];
                    TraceStep {
                        constraint: keep[step.constraint],
                        premises: step.premises.iter().map(|&p| renumber(p)).collect(),
                        ..step.clone()
                    }
                })
                .collect();
            let prov = &sub.constraints[c.constraint].provenance;
            Contradiction {
                subject: c.subject,
                existing: c.existing,
                incoming: c.incoming,
                rule_id: prov.rule_id,
                citation: prov.citation,
                constraints: keep,
                trace,
            }
        }
        Ok(()) => {
            // The full set conflicts only from the given start state; report it unsliced.
            let prov = &cs.constraints[conflict.constraint].provenance;
            Contradiction {
                subject: conflict.subject,
                existing: conflict.existing,
                incoming: conflict.incoming,
                rule_id: prov.rule_id,
                citation: prov.citation,
                constraints: keep,
                trace: runner.state.trace.clone(),
            }
        }
    }
}

/// Backward-chained justification of one bound.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DerivationTree {
    Step { step: usize, description: String, rule_id: &'static str, citation: &'static str, target: Target, new: Value, children: Vec<DerivationTree> },
    /// A step already expanded elsewhere in the tree.
    SeeStep(usize),
}

impl DerivationTree {
    pub fn rule_id(&self) -> Option<&'static str> {
        match self {
            DerivationTree::Step { rule_id, .. } => Some(rule_id),
            DerivationTree::SeeStep(_) => None,
        }
    }

    pub fn children(&self) -> &[DerivationTree] {
        match self {
            DerivationTree::Step { children, .. } => children,
            DerivationTree::SeeStep(_) => &[],
        }
    }

    /// Rule ids of every expanded node, depth first.
    pub fn rule_ids(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        self.walk(&mut |t| out.extend(t.rule_id()));
        out
    }

    /// Rule ids of the leaves.
    pub fn leaf_rules(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        self.walk(&mut |t| {
            if let DerivationTree::Step { rule_id, children, .. } = t {
                if children.is_empty() {
                    out.push(*rule_id);
                }
            }
        });
        out
    }

    fn walk(&self, f: &mut dyn FnMut(&DerivationTree)) {
        f(self);
        for c in self.children() {
            c.walk(f);
        }
    }

    pub fn render(&self, m: &Model) -> String {
        let mut out = String::new();
        self.render_into(m, 0, &mut out);
        out
    }

    fn render_into(&self, m: &Model, depth: usize, out: &mut String) {
        let pad = "  ".repeat(depth);
        match self {
            DerivationTree::Step { step, description, rule_id, citation, target, new, children } => {
                out.push_str(&format!(
                    "{pad}#{step} {} := {new}  by {rule_id} [{description}]  ({citation})\n",
                    target_label(target, m)
                ));
                for c in children {
                    c.render_into(m, depth + 1, out);
                }
            }
            DerivationTree::SeeStep(s) => out.push_str(&format!("{pad}see step #{s}\n")),
        }
    }
}

fn target_label(t: &Target, m: &Model) -> String {
    match t {
        Target::Rank(v, side) => format!("{side} {}", v.name(m)),
        Target::Flag(f) => f.name(m),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{rank}({algebra}) {side} is the default bound; nothing derived it")]
pub struct NoDerivation {
    pub algebra: String,
    pub rank: RankKind,
    pub side: Side,
}

/// The derivation of the current `side` bound of `rank(algebra)`.
pub fn explain(
    state: &RankState,
    cs: &ConstraintSet,
    m: &Model,
    algebra: AlgebraId,
    rank: RankKind,
    side: Side,
) -> Result<DerivationTree, NoDerivation> {
    let target = Target::Rank(RankVar::new(algebra, rank), side);
    let root = state.setter(target).ok_or_else(|| NoDerivation { algebra: m.algebras[algebra].id.clone(), rank, side })?;
    let mut seen = BTreeSet::new();
    Ok(build_tree(state, cs, m, root, &mut seen))
}

/// The derivation of a known flag value, if one was derived.
pub fn explain_flag(state: &RankState, cs: &ConstraintSet, m: &Model, algebra: AlgebraId, flag: Flag) -> Option<DerivationTree> {
    let root = state.setter(Target::Flag(FlagVar::new(algebra, flag)))?;
    Some(build_tree(state, cs, m, root, &mut BTreeSet::new()))
}

fn build_tree(state: &RankState, cs: &ConstraintSet, m: &Model, step: usize, seen: &mut BTreeSet<usize>) -> DerivationTree {
    if !seen.insert(step) {
        return DerivationTree::SeeStep(step);
    }
    let s = &state.trace[step];
    let children = s.premises.iter().map(|&p| build_tree(state, cs, m, p, seen)).collect();
    DerivationTree::Step {
        step,
        description: cs.constraints.get(s.constraint).map_or_else(String::new, |c| c.form.describe(m)),
        rule_id: s.rule_id,
        citation: s.citation,
        target: s.target,
        new: s.new,
        children,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Verdict {
    Pass,
    Fail,
    Undecided,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Undecided => "UNDECIDED",
        })
    }
}

/// Whether `interval` implies, refutes, or leaves open `relation value`.
pub fn verdict(interval: RankInterval, relation: Relation, value: ExtNat) -> Verdict {
    let (lo, hi) = (interval.lo(), interval.hi());
    let (pass, fail) = match relation {
        Relation::Eq => (lo == value && hi == value, !interval.contains(value)),
        Relation::Le => (hi <= value, lo > value),
        Relation::Ge => (lo >= value, hi < value),
    };
    if pass {
        Verdict::Pass
    } else if fail {
        Verdict::Fail
    } else {
        Verdict::Undecided
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AssertionResult {
    pub index: usize,
    pub interval: RankInterval,
    pub verdict: Verdict,
}

pub fn check_assertions(m: &Model, state: &RankState) -> Vec<AssertionResult> {
    m.assertions
        .iter()
        .enumerate()
        .map(|(index, a)| {
            let interval = state.interval(a.algebra, a.rank);
            AssertionResult { index, interval, verdict: verdict(interval, a.relation, a.value) }
        })
        .collect()
}

/// Adds assertion `index` as a hypothesis and propagates; a failing
/// assertion comes back as the contradiction that refutes it.
pub fn refute(cs: &ConstraintSet, m: &Model, index: usize, config: &EngineConfig) -> Result<RankState, Box<Contradiction>> {
    propagate_with(&rules::with_assertion(cs, m, index), config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;
    use crate::model::build_model;
    use crate::rules::instantiate_rules;

    fn run(text: &str) -> (Model, ConstraintSet, RankState) {
        let m = build_model(&parse(text).unwrap()).unwrap();
        let cs = instantiate_rules(&m);
        let st = propagate(&cs, &m).unwrap();
        (m, cs, st)
    }

    fn ranks(st: &RankState, m: &Model, name: &str) -> Vec<String> {
        let a = m.algebra_id(name).unwrap();
        RankKind::ALL.iter().map(|&k| st.interval(a, k).to_string()).collect()
    }

    #[test]
    fn lone_cstar_algebra_stays_open() {
        let (m, _, st) = run("algebra A = abstract { cstar = true }");
        assert_eq!(ranks(&st, &m, "A"), vec!["[1, inf]"; 4]);
    }

    #[test]
    fn toeplitz_all_two() {
        let (m, _, st) = run("algebra T = toeplitz");
        assert_eq!(ranks(&st, &m, "T"), vec!["[2, 2]"; 4]);
    }

    #[test]
    fn cuntz_two_all_infinite() {
        let (m, _, st) = run("algebra O = cuntz(2)");
        assert_eq!(ranks(&st, &m, "O"), vec!["[inf, inf]"; 4]);
    }

    #[test]
    fn matrix_over_torus() {
        // tsr C(T^5) = 3, so tsr M_2(C(T^5)) = ⌈2/2⌉+1 = 2.
        let (m, _, st) = run("space X = torus(5)\nalgebra A = C(X)\nalgebra B = matrix(2, A)");
        let b = m.algebra_id("B").unwrap();
        assert_eq!(st.interval(b, RankKind::Tsr), RankInterval::exact(ExtNat::Fin(2)));
    }

    #[test]
    fn lemax_back_propagation() {
        let (m, _, st) = run(
            "algebra X = abstract\nalgebra Y = abstract\nalgebra Z = sum(X, Y)\nassume csr(Z) >= 5\nassume csr(Y) <= 3",
        );
        let x = m.algebra_id("X").unwrap();
        assert_eq!(st.interval(x, RankKind::Csr).lo(), ExtNat::Fin(5));
    }

    #[test]
    fn cap_clamps_lower_bounds() {
        let m = build_model(&parse("algebra A = abstract\nassume tsr(A) >= 40").unwrap()).unwrap();
        let cs = instantiate_rules(&m);
        let st = propagate_with(&cs, &EngineConfig { max_finite: 10, shuffle_seed: None }).unwrap();
        assert_eq!(st.interval(0, RankKind::Tsr).lo(), ExtNat::Fin(10));
    }

    #[test]
    fn idempotent() {
        let (_, cs, st) = run("algebra T = toeplitz_n(3)");
        let again = propagate_from(st.clone(), &cs, &EngineConfig::default()).unwrap();
        assert_eq!(again, st);
    }

    #[test]
    fn steps_strictly_narrow() {
        let (_, _, st) = run("algebra T = toeplitz_n(4)\nalgebra O = cuntz_inf");
        for s in &st.trace {
            match (s.old, s.new) {
                (Value::Interval(a), Value::Interval(b)) => assert!(b.is_subset_of(&a) && a != b),
                (Value::Flag(Tri::Unknown), Value::Flag(t)) => assert_ne!(t, Tri::Unknown),
                other => panic!("{other:?}"),
            }
            assert!(s.premises.iter().all(|&p| p < st.trace.len()));
        }
    }

    #[test]
    fn contradiction_is_minimal_and_replays() {
        let m = build_model(&parse("algebra O = cuntz(2)\nassert tsr(O) == 1").unwrap()).unwrap();
        let cs = instantiate_rules(&m);
        let err = refute(&cs, &m, 0, &EngineConfig::default()).unwrap_err();
        assert!(err.constraints.len() <= 4, "{:?}", err.constraints);
        let again = err.replay(&rules::with_assertion(&cs, &m, 0), &EngineConfig::default()).unwrap();
        assert_eq!(again.subject, err.subject);
        // Dropping any one supporting constraint removes the conflict.
        let full = rules::with_assertion(&cs, &m, 0);
        for i in 0..err.constraints.len() {
            let mut keep = err.constraints.clone();
            keep.remove(i);
            assert!(propagate_with(&full.subset(&keep), &EngineConfig::default()).is_ok());
        }
    }

    #[test]
    fn verdicts() {
        let two = RankInterval::exact(ExtNat::Fin(2));
        assert_eq!(verdict(two, Relation::Eq, ExtNat::Fin(2)), Verdict::Pass);
        let inf = RankInterval::exact(ExtNat::Inf);
        assert_eq!(verdict(inf, Relation::Eq, ExtNat::Fin(1)), Verdict::Fail);
        let open = RankInterval::new(ExtNat::Fin(1), ExtNat::Fin(5)).unwrap();
        assert_eq!(verdict(open, Relation::Eq, ExtNat::Fin(4)), Verdict::Undecided);
        assert_eq!(verdict(open, Relation::Le, ExtNat::Fin(5)), Verdict::Pass);
        assert_eq!(verdict(open, Relation::Ge, ExtNat::Fin(6)), Verdict::Fail);
    }

    #[test]
    fn explain_default_bound_has_no_derivation() {
        let (m, cs, st) = run("algebra A = abstract");
        assert!(explain(&st, &cs, &m, 0, RankKind::Bsr, Side::Lo).is_err());
    }
}
