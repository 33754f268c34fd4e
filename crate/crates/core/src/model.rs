//! Validated, resolved form of a `.bra` program.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::catalog::{self, CatalogEntry};
use crate::dsl::{
    AlgebraExpr, CustomEntry, FlagEntry, MorphismAttr, RankClaim, Relation, SourceSpan, SpaceExpr, Statement,
    StatementKind,
};
use crate::lattice::{ExtNat, RankKind};

pub type SpaceId = usize;
pub type AlgebraId = usize;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Tri {
    True,
    False,
    #[default]
    Unknown,
}

impl Tri {
    pub fn known(self) -> Option<bool> {
        match self {
            Tri::True => Some(true),
            Tri::False => Some(false),
            Tri::Unknown => None,
        }
    }
}

impl From<bool> for Tri {
    fn from(b: bool) -> Tri {
        if b {
            Tri::True
        } else {
            Tri::False
        }
    }
}

impl From<Option<bool>> for Tri {
    fn from(b: Option<bool>) -> Tri {
        b.map_or(Tri::Unknown, Tri::from)
    }
}

/// The tri-state structural properties tracked per algebra.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Flag {
    Finite,
    StablyFinite,
    PurelyInfiniteSimple,
    InfiniteSimple,
    K1Trivial,
    /// The class of the unit has finite order in K0.
    UnitFiniteOrderK0,
}

impl Flag {
    pub const ALL: [Flag; 6] = [
        Flag::Finite,
        Flag::StablyFinite,
        Flag::PurelyInfiniteSimple,
        Flag::InfiniteSimple,
        Flag::K1Trivial,
        Flag::UnitFiniteOrderK0,
    ];
    pub const COUNT: usize = 6;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn key(self) -> &'static str {
        match self {
            Flag::Finite => "finite",
            Flag::StablyFinite => "stably_finite",
            Flag::PurelyInfiniteSimple => "purely_infinite_simple",
            Flag::InfiniteSimple => "infinite_simple",
            Flag::K1Trivial => "k1_trivial",
            Flag::UnitFiniteOrderK0 => "unit_finite_order_k0",
        }
    }

    pub fn from_key(key: &str) -> Option<Flag> {
        Flag::ALL.into_iter().find(|f| f.key() == key)
    }
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// Where a known flag value came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlagOrigin {
    User,
    Catalog(&'static str),
    Structural(&'static str),
    /// Forced by another known flag through the definitional implications.
    Derived,
}

pub const COMMUTATIVE_IS_STABLY_FINITE: &str = "commutative unital Banach algebras are stably finite";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlagSet {
    pub cstar: bool,
    pub commutative: bool,
    states: [(Tri, Option<FlagOrigin>); Flag::COUNT],
}

impl Default for FlagSet {
    fn default() -> Self {
        FlagSet { cstar: false, commutative: false, states: [(Tri::Unknown, None); Flag::COUNT] }
    }
}

/// Definitional implications between flags, as (premise, premise value, conclusion, conclusion value).
pub const FLAG_IMPLICATIONS: [(Flag, bool, Flag, bool); 3] = [
    (Flag::StablyFinite, true, Flag::Finite, true),
    (Flag::InfiniteSimple, true, Flag::Finite, false),
    (Flag::PurelyInfiniteSimple, true, Flag::InfiniteSimple, true),
];

impl FlagSet {
    pub fn get(&self, flag: Flag) -> Tri {
        self.states[flag.index()].0
    }

    pub fn origin(&self, flag: Flag) -> Option<FlagOrigin> {
        self.states[flag.index()].1
    }

    /// Sets a flag, failing if it already holds the opposite value.
    pub fn set(&mut self, flag: Flag, value: bool, origin: FlagOrigin) -> Result<bool, FlagOrigin> {
        match self.states[flag.index()] {
            (Tri::Unknown, _) => {
                self.states[flag.index()] = (Tri::from(value), Some(origin));
                Ok(true)
            }
            (t, _) if t.known() == Some(value) => Ok(false),
            (_, o) => Err(o.unwrap_or(FlagOrigin::Derived)),
        }
    }

    /// Applies the implications and their contrapositives until nothing changes.
    pub fn close(&mut self) -> Result<(), (Flag, FlagOrigin)> {
        loop {
            let mut changed = false;
            for (p, pv, c, cv) in FLAG_IMPLICATIONS {
                if self.get(p).known() == Some(pv) {
                    changed |= self.set(c, cv, FlagOrigin::Derived).map_err(|o| (c, o))?;
                }
                if self.get(c).known() == Some(!cv) {
                    changed |= self.set(p, !pv, FlagOrigin::Derived).map_err(|o| (p, o))?;
                }
            }
            if !changed {
                return Ok(());
            }
        }
    }

    pub fn known(&self) -> impl Iterator<Item = (Flag, bool, FlagOrigin)> + '_ {
        Flag::ALL.into_iter().filter_map(|f| {
            let (t, o) = self.states[f.index()];
            t.known().map(|b| (f, b, o.unwrap_or(FlagOrigin::Derived)))
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SpaceKind {
    Sphere(u32),
    Torus(u32),
    Cube(u32),
    Point,
    Product(Vec<SpaceId>),
    Custom,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpaceDescriptor {
    pub id: String,
    pub kind: SpaceKind,
    pub dim: Option<u32>,
    /// True when `dim` is the product default rather than a known value.
    pub dim_assumed: bool,
    /// A lower bound on the dimension that holds regardless of assumptions.
    pub dim_floor: u32,
    pub metric: bool,
    pub contractible: Tri,
    pub top_cohomology_nonzero: Tri,
    pub codim1_cohomology_nonzero: Tri,
    /// Degrees with nonzero integral cohomology, when it is free and known.
    pub cohomology_degrees: Option<BTreeSet<u32>>,
    pub auxiliary: bool,
    pub span: Option<SourceSpan>,
}

impl SpaceDescriptor {
    pub fn builtin(id: &str, kind: SpaceKind) -> SpaceDescriptor {
        let (dim, contractible, degrees): (u32, bool, BTreeSet<u32>) = match kind {
            SpaceKind::Sphere(d) => (d, false, [0, d].into()),
            SpaceKind::Torus(d) => (d, false, (0..=d).collect()),
            SpaceKind::Cube(d) => (d, true, [0].into()),
            SpaceKind::Point => (0, true, [0].into()),
            SpaceKind::Product(_) | SpaceKind::Custom => panic!("not a builtin space kind"),
        };
        let mut s = SpaceDescriptor {
            id: id.to_string(),
            kind,
            dim: Some(dim),
            dim_assumed: false,
            dim_floor: dim,
            metric: true,
            contractible: Tri::from(contractible),
            top_cohomology_nonzero: Tri::Unknown,
            codim1_cohomology_nonzero: Tri::Unknown,
            cohomology_degrees: Some(degrees),
            auxiliary: false,
            span: None,
        };
        s.cohomology_flags_from_degrees();
        s
    }

    fn cohomology_flags_from_degrees(&mut self) {
        if let (Some(deg), Some(d)) = (&self.cohomology_degrees, self.dim) {
            self.top_cohomology_nonzero = Tri::from(deg.contains(&d));
            self.codim1_cohomology_nonzero = Tri::from(d >= 1 && deg.contains(&(d - 1)));
        }
    }

    /// Whether `dim` is known to be the true covering dimension.
    pub fn dim_exact(&self) -> bool {
        self.dim.is_some() && (!self.dim_assumed || self.dim == Some(self.dim_floor))
    }

    /// Whether the dimension is provably different from 1.
    pub fn dim_provably_not_one(&self) -> bool {
        match self.dim {
            Some(d) if self.dim_exact() => d != 1,
            Some(0) => true,
            _ => self.dim_floor >= 2,
        }
    }

    pub fn is_builtin(&self) -> bool {
        !matches!(self.kind, SpaceKind::Custom | SpaceKind::Product(_))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AlgebraKind {
    CofSpace(SpaceId),
    Matrix { n: u32, of: AlgebraId },
    DirectSum(AlgebraId, AlgebraId),
    Stabilize(AlgebraId),
    InductiveLimit { parts: Vec<AlgebraId>, liminf: Vec<(RankKind, ExtNat)> },
    /// `symbol` is the algebra C(X × Z) paired with the tensor product, when the
    /// extensions have the required shape.
    TensorExt { extensions: Vec<usize>, times: Option<SpaceId>, symbol: Option<AlgebraId> },
    Abstract,
    Catalog(CatalogEntry),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlgebraNode {
    pub id: String,
    pub kind: AlgebraKind,
    pub flags: FlagSet,
    /// The catalog entry this node was declared as, if any.
    pub catalog: Option<CatalogEntry>,
    pub auxiliary: bool,
    pub span: Option<SourceSpan>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MorphismFact {
    pub id: String,
    pub from: AlgebraId,
    pub to: AlgebraId,
    pub attrs: BTreeSet<MorphismAttr>,
    /// Set when the morphism is the quotient map of an extension.
    pub from_extension: Option<usize>,
    pub span: Option<SourceSpan>,
}

impl MorphismFact {
    pub fn has(&self, a: MorphismAttr) -> bool {
        self.attrs.contains(&a)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtensionFact {
    pub id: String,
    pub ideal: AlgebraId,
    pub middle: AlgebraId,
    pub quotient: AlgebraId,
    pub approx_identity: bool,
    pub auxiliary: bool,
    pub span: Option<SourceSpan>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AssumptionOrigin {
    User,
    Catalog(&'static str),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assumption {
    pub rank: RankKind,
    pub algebra: AlgebraId,
    pub relation: Relation,
    pub value: ExtNat,
    pub origin: AssumptionOrigin,
    pub span: Option<SourceSpan>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assertion {
    pub rank: RankKind,
    pub algebra: AlgebraId,
    pub relation: Relation,
    pub value: ExtNat,
    pub span: SourceSpan,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Note,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
    pub span: Option<SourceSpan>,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Note => "note",
            Severity::Warning => "warning",
        };
        match self.span {
            Some(s) => write!(f, "{s}: {sev}: {}", self.message),
            None => write!(f, "{sev}: {}", self.message),
        }
    }
}

fn at(span: &Option<SourceSpan>) -> String {
    span.map(|s| format!("{s}: ")).unwrap_or_default()
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("{}unknown identifier `{id}`", at(span))]
    UnknownIdentifier { id: String, span: Option<SourceSpan> },
    #[error("{}`{id}` is already declared", at(span))]
    DuplicateIdentifier { id: String, span: Option<SourceSpan> },
    #[error("{}`{id}` is not a {expected}", at(span))]
    WrongKind { id: String, expected: &'static str, span: Option<SourceSpan> },
    #[error("cyclic algebra graph: {}", cycle.join(" -> "))]
    CyclicAlgebraGraph { cycle: Vec<String> },
    #[error("cyclic space graph: {}", cycle.join(" -> "))]
    CyclicSpaceGraph { cycle: Vec<String> },
    #[error("{}conflicting flag `{flag}` on `{algebra}`: {detail}", at(span))]
    FlagConflict { algebra: String, flag: String, detail: String, span: Option<SourceSpan> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Decl {
    Space(SpaceId),
    Algebra(AlgebraId),
    Morphism(usize),
    Extension(usize),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Model {
    pub spaces: Vec<SpaceDescriptor>,
    pub algebras: Vec<AlgebraNode>,
    pub morphisms: Vec<MorphismFact>,
    pub extensions: Vec<ExtensionFact>,
    pub assumptions: Vec<Assumption>,
    pub assertions: Vec<Assertion>,
    pub queries: Vec<AlgebraId>,
    names: BTreeMap<String, Decl>,
}

impl Model {
    pub fn algebra_id(&self, name: &str) -> Option<AlgebraId> {
        match self.names.get(name) {
            Some(Decl::Algebra(i)) => Some(*i),
            _ => None,
        }
    }

    pub fn space_id(&self, name: &str) -> Option<SpaceId> {
        match self.names.get(name) {
            Some(Decl::Space(i)) => Some(*i),
            _ => None,
        }
    }

    /// Algebras to report: the queried ones, or every user-declared algebra.
    pub fn reported_algebras(&self) -> Vec<AlgebraId> {
        if self.queries.is_empty() {
            (0..self.algebras.len()).filter(|&i| !self.algebras[i].auxiliary).collect()
        } else {
            self.queries.clone()
        }
    }

    /// The space of a `C(X)` node.
    pub fn space_of(&self, a: AlgebraId) -> Option<&SpaceDescriptor> {
        match self.algebras[a].kind {
            AlgebraKind::CofSpace(s) => Some(&self.spaces[s]),
            _ => None,
        }
    }

    /// An extension `0 -> K -> A -> C(X) -> 0` of a C*-algebra with X compact metric.
    pub fn extension_of_compacts_by_cx(&self, e: usize) -> Option<SpaceId> {
        let ext = &self.extensions[e];
        let ideal_is_compacts = matches!(self.algebras[ext.ideal].kind, AlgebraKind::Catalog(CatalogEntry::Compacts));
        match self.algebras[ext.quotient].kind {
            AlgebraKind::CofSpace(s)
                if ideal_is_compacts && self.algebras[ext.middle].flags.cstar && self.spaces[s].metric =>
            {
                Some(s)
            }
            _ => None,
        }
    }
}

struct Pending {
    kind: StatementKind,
    span: Option<SourceSpan>,
    auxiliary: bool,
    expansion: Option<catalog::Expansion>,
}

/// Resolves statements into a [`Model`].
pub fn build_model(statements: &[Statement]) -> Result<Model, ModelError> {
    let mut pending: Vec<Pending> = Vec::new();
    for s in statements {
        push_with_expansion(&mut pending, s.kind.clone(), Some(s.span), false);
    }

    let mut m = Model::default();
    // Pass 1: declare every id.
    let mut space_src = Vec::new();
    let mut alg_src = Vec::new();
    let mut mor_src = Vec::new();
    let mut ext_src = Vec::new();
    for (i, p) in pending.iter().enumerate() {
        let (id, decl) = match &p.kind {
            StatementKind::Space { id, .. } => {
                space_src.push(i);
                (id, Decl::Space(space_src.len() - 1))
            }
            StatementKind::Algebra { id, .. } => {
                alg_src.push(i);
                (id, Decl::Algebra(alg_src.len() - 1))
            }
            StatementKind::Morphism { id, .. } => {
                mor_src.push(i);
                (id, Decl::Morphism(mor_src.len() - 1))
            }
            StatementKind::Extension { id, .. } => {
                ext_src.push(i);
                (id, Decl::Extension(ext_src.len() - 1))
            }
            _ => continue,
        };
        if m.names.insert(id.clone(), decl).is_some() {
            return Err(ModelError::DuplicateIdentifier { id: id.clone(), span: p.span });
        }
    }

    // Pass 2: spaces, in dependency order.
    let mut space_slots: Vec<Option<SpaceDescriptor>> = vec![None; space_src.len()];
    let mut visiting = vec![false; space_src.len()];
    for s in 0..space_src.len() {
        resolve_space(&m, &pending, &space_src, s, &mut space_slots, &mut visiting, &mut Vec::new())?;
    }
    m.spaces = space_slots.into_iter().map(|s| s.expect("resolved")).collect();

    // Pass 3: algebra kinds.
    for &pi in &alg_src {
        let p = &pending[pi];
        let StatementKind::Algebra { id, expr, .. } = &p.kind else { unreachable!() };
        let expr = p.expansion.as_ref().and_then(|x| x.kind.clone()).unwrap_or_else(|| expr.clone());
        let kind = resolve_algebra_kind(&m, &expr, p.span)?;
        let catalog = match expr {
            AlgebraExpr::Catalog(e) => Some(e),
            _ => match &p.kind {
                StatementKind::Algebra { expr: AlgebraExpr::Catalog(e), .. } => Some(*e),
                _ => None,
            },
        };
        m.algebras.push(AlgebraNode {
            id: id.clone(),
            kind,
            flags: FlagSet::default(),
            catalog,
            auxiliary: p.auxiliary,
            span: p.span,
        });
    }
    check_acyclic(&m, &pending, &ext_src)?;

    // Pass 4: extensions and morphisms.
    for &pi in &ext_src {
        let p = &pending[pi];
        let StatementKind::Extension { id, ideal, middle, quotient, approx_identity } = &p.kind else {
            unreachable!()
        };
        m.extensions.push(ExtensionFact {
            id: id.clone(),
            ideal: algebra_ref(&m, ideal, p.span)?,
            middle: algebra_ref(&m, middle, p.span)?,
            quotient: algebra_ref(&m, quotient, p.span)?,
            approx_identity: *approx_identity,
            auxiliary: p.auxiliary,
            span: p.span,
        });
    }
    for &pi in &mor_src {
        let p = &pending[pi];
        let StatementKind::Morphism { id, from, to, attrs } = &p.kind else { unreachable!() };
        let mut attrs: BTreeSet<MorphismAttr> = attrs.iter().copied().collect();
        if attrs.contains(&MorphismAttr::Split) {
            attrs.insert(MorphismAttr::Onto);
        }
        m.morphisms.push(MorphismFact {
            id: id.clone(),
            from: algebra_ref(&m, from, p.span)?,
            to: algebra_ref(&m, to, p.span)?,
            attrs,
            from_extension: None,
            span: p.span,
        });
    }

    // Pass 5: flags, in dependency order so structural C*-ness propagates.
    for a in topological_algebras(&m) {
        let pi = alg_src[a];
        assign_flags(&mut m, a, &pending[pi])?;
    }
    for e in 0..m.extensions.len() {
        if m.algebras[m.extensions[e].ideal].flags.cstar {
            m.extensions[e].approx_identity = true;
        }
        let ext = &m.extensions[e];
        m.morphisms.push(MorphismFact {
            id: format!("{}.quotient", ext.id),
            from: ext.middle,
            to: ext.quotient,
            attrs: [MorphismAttr::Onto].into(),
            from_extension: Some(e),
            span: ext.span,
        });
    }

    // Pass 6: symbol algebras for tensor products of extensions.
    for a in 0..m.algebras.len() {
        if let AlgebraKind::TensorExt { extensions, times, .. } = m.algebras[a].kind.clone() {
            let symbol = symbol_algebra(&mut m, a, &extensions, times);
            if let AlgebraKind::TensorExt { symbol: slot, .. } = &mut m.algebras[a].kind {
                *slot = symbol;
            }
        }
    }

    // Pass 7: assumptions, assertions, queries.
    for (i, p) in pending.iter().enumerate() {
        match &p.kind {
            StatementKind::Assume(c) => {
                let a = algebra_ref(&m, &c.algebra, p.span)?;
                m.assumptions.push(assumption(c, a, AssumptionOrigin::User, p.span));
            }
            StatementKind::Assert(c) => {
                let a = algebra_ref(&m, &c.algebra, p.span)?;
                m.assertions.push(Assertion {
                    rank: c.rank,
                    algebra: a,
                    relation: c.relation,
                    value: c.value,
                    span: p.span.unwrap_or_default(),
                });
            }
            StatementKind::Query(id) => {
                let a = algebra_ref(&m, id, p.span)?;
                if !m.queries.contains(&a) {
                    m.queries.push(a);
                }
            }
            StatementKind::Algebra { id, .. } => {
                let a = m.algebra_id(id).expect("declared");
                if let Some(x) = &p.expansion {
                    for f in &x.facts {
                        m.assumptions.push(Assumption {
                            rank: f.rank,
                            algebra: a,
                            relation: f.relation,
                            value: f.value,
                            origin: AssumptionOrigin::Catalog(f.citation),
                            span: pending[i].span,
                        });
                    }
                }
            }
            _ => {}
        }
    }
    for a in 0..m.algebras.len() {
        if let Some(s) = m.space_of(a) {
            if s.kind == SpaceKind::Torus(5) {
                let f = catalog::torus5_fact();
                m.assumptions.push(Assumption {
                    rank: f.rank,
                    algebra: a,
                    relation: f.relation,
                    value: f.value,
                    origin: AssumptionOrigin::Catalog(f.citation),
                    span: m.algebras[a].span,
                });
            }
        }
    }
    Ok(m)
}

fn assumption(c: &RankClaim, a: AlgebraId, origin: AssumptionOrigin, span: Option<SourceSpan>) -> Assumption {
    Assumption { rank: c.rank, algebra: a, relation: c.relation, value: c.value, origin, span }
}

fn push_with_expansion(out: &mut Vec<Pending>, kind: StatementKind, span: Option<SourceSpan>, auxiliary: bool) {
    let expansion = match &kind {
        StatementKind::Algebra { id, expr: AlgebraExpr::Catalog(e), .. } => Some(e.expand(id)),
        _ => None,
    };
    let aux = expansion.as_ref().map(|x| x.aux.clone()).unwrap_or_default();
    out.push(Pending { kind, span, auxiliary, expansion });
    for k in aux {
        push_with_expansion(out, k, span, true);
    }
}

fn algebra_ref(m: &Model, name: &str, span: Option<SourceSpan>) -> Result<AlgebraId, ModelError> {
    match m.names.get(name) {
        Some(Decl::Algebra(i)) => Ok(*i),
        Some(_) => Err(ModelError::WrongKind { id: name.to_string(), expected: "algebra", span }),
        None => Err(ModelError::UnknownIdentifier { id: name.to_string(), span }),
    }
}

fn space_ref(m: &Model, name: &str, span: Option<SourceSpan>) -> Result<SpaceId, ModelError> {
    match m.names.get(name) {
        Some(Decl::Space(i)) => Ok(*i),
        Some(_) => Err(ModelError::WrongKind { id: name.to_string(), expected: "space", span }),
        None => Err(ModelError::UnknownIdentifier { id: name.to_string(), span }),
    }
}

fn extension_ref(m: &Model, name: &str, span: Option<SourceSpan>) -> Result<usize, ModelError> {
    match m.names.get(name) {
        Some(Decl::Extension(i)) => Ok(*i),
        Some(_) => Err(ModelError::WrongKind { id: name.to_string(), expected: "extension", span }),
        None => Err(ModelError::UnknownIdentifier { id: name.to_string(), span }),
    }
}

fn resolve_space(
    m: &Model,
    pending: &[Pending],
    src: &[usize],
    s: SpaceId,
    slots: &mut Vec<Option<SpaceDescriptor>>,
    visiting: &mut Vec<bool>,
    stack: &mut Vec<String>,
) -> Result<(), ModelError> {
    if slots[s].is_some() {
        return Ok(());
    }
    let p = &pending[src[s]];
    let StatementKind::Space { id, expr } = &p.kind else { unreachable!() };
    if visiting[s] {
        let start = stack.iter().position(|x| x == id).unwrap_or(0);
        let mut cycle = stack[start..].to_vec();
        cycle.push(id.clone());
        return Err(ModelError::CyclicSpaceGraph { cycle });
    }
    visiting[s] = true;
    stack.push(id.clone());
    let mut desc = match expr {
        SpaceExpr::Sphere(d) => SpaceDescriptor::builtin(id, SpaceKind::Sphere(*d)),
        SpaceExpr::Torus(d) => SpaceDescriptor::builtin(id, SpaceKind::Torus(*d)),
        SpaceExpr::Cube(d) => SpaceDescriptor::builtin(id, SpaceKind::Cube(*d)),
        SpaceExpr::Point => SpaceDescriptor::builtin(id, SpaceKind::Point),
        SpaceExpr::Product { factors, dim } => {
            let mut ids = Vec::new();
            for f in factors {
                let fi = space_ref(m, f, p.span)?;
                resolve_space(m, pending, src, fi, slots, visiting, stack)?;
                ids.push(fi);
            }
            let parts: Vec<&SpaceDescriptor> = ids.iter().map(|&i| slots[i].as_ref().expect("resolved")).collect();
            product_descriptor(id, ids.clone(), &parts, *dim)
        }
        SpaceExpr::Custom(entries) => {
            let mut d = SpaceDescriptor {
                id: id.clone(),
                kind: SpaceKind::Custom,
                dim: None,
                dim_assumed: false,
                dim_floor: 0,
                metric: false,
                contractible: Tri::Unknown,
                top_cohomology_nonzero: Tri::Unknown,
                codim1_cohomology_nonzero: Tri::Unknown,
                cohomology_degrees: None,
                auxiliary: false,
                span: None,
            };
            for e in entries {
                match *e {
                    CustomEntry::Dim(n) => {
                        d.dim = Some(n);
                        d.dim_floor = n;
                    }
                    CustomEntry::Metric(b) => d.metric = b,
                    CustomEntry::Contractible(t) => d.contractible = t,
                    CustomEntry::TopCohomologyNonzero(t) => d.top_cohomology_nonzero = t,
                    CustomEntry::Codim1CohomologyNonzero(t) => d.codim1_cohomology_nonzero = t,
                }
            }
            d
        }
    };
    desc.auxiliary = p.auxiliary;
    desc.span = p.span;
    stack.pop();
    visiting[s] = false;
    slots[s] = Some(desc);
    Ok(())
}

/// Attributes of a product: dimension defaults to the sum of the factors,
/// cohomology follows Kunneth when every factor has free known cohomology.
pub fn product_descriptor(
    id: &str,
    ids: Vec<SpaceId>,
    parts: &[&SpaceDescriptor],
    dim_override: Option<u32>,
) -> SpaceDescriptor {
    let sum: Option<u32> = parts.iter().map(|p| p.dim).sum();
    // Builtin factors are manifolds, for which the sum is the true dimension.
    let exact_sum = parts.iter().all(|p| p.dim_exact() && p.cohomology_degrees.is_some());
    let contractible = if parts.iter().all(|p| p.contractible == Tri::True) {
        Tri::True
    } else if parts.iter().any(|p| p.contractible == Tri::False) {
        Tri::False
    } else {
        Tri::Unknown
    };
    let degrees = parts.iter().try_fold(BTreeSet::from([0u32]), |acc, p| {
        let deg = p.cohomology_degrees.as_ref()?;
        Some(acc.iter().flat_map(|a| deg.iter().map(move |b| a + b)).collect::<BTreeSet<u32>>())
    });
    let dim = dim_override.or(sum);
    let dim_floor = match dim_override {
        Some(o) => o,
        None if exact_sum => sum.unwrap_or(0),
        None => parts.iter().map(|p| p.dim_floor).max().unwrap_or(0),
    };
    let mut d = SpaceDescriptor {
        id: id.to_string(),
        kind: SpaceKind::Product(ids),
        dim,
        dim_assumed: dim_override.is_none(),
        dim_floor,
        metric: parts.iter().all(|p| p.metric),
        contractible,
        top_cohomology_nonzero: Tri::Unknown,
        codim1_cohomology_nonzero: Tri::Unknown,
        cohomology_degrees: if exact_sum && dim == sum { degrees } else { None },
        auxiliary: false,
        span: None,
    };
    d.cohomology_flags_from_degrees();
    d
}

fn resolve_algebra_kind(m: &Model, expr: &AlgebraExpr, span: Option<SourceSpan>) -> Result<AlgebraKind, ModelError> {
    Ok(match expr {
        AlgebraExpr::CofSpace(s) => AlgebraKind::CofSpace(space_ref(m, s, span)?),
        AlgebraExpr::Matrix { n, of } => AlgebraKind::Matrix { n: *n, of: algebra_ref(m, of, span)? },
        AlgebraExpr::Sum(a, b) => AlgebraKind::DirectSum(algebra_ref(m, a, span)?, algebra_ref(m, b, span)?),
        AlgebraExpr::Stabilize(a) => AlgebraKind::Stabilize(algebra_ref(m, a, span)?),
        AlgebraExpr::Limit { parts, liminf } => AlgebraKind::InductiveLimit {
            parts: parts.iter().map(|p| algebra_ref(m, p, span)).collect::<Result<_, _>>()?,
            liminf: liminf.clone(),
        },
        AlgebraExpr::TensorExt { extensions, times } => AlgebraKind::TensorExt {
            extensions: extensions.iter().map(|e| extension_ref(m, e, span)).collect::<Result<_, _>>()?,
            times: times.as_ref().map(|z| space_ref(m, z, span)).transpose()?,
            symbol: None,
        },
        AlgebraExpr::Abstract => AlgebraKind::Abstract,
        AlgebraExpr::Catalog(e) => AlgebraKind::Catalog(*e),
    })
}

/// Algebra references of a node, including those reached through its extensions.
fn algebra_children(m: &Model, a: AlgebraId, pending: &[Pending], ext_src: &[usize]) -> Vec<AlgebraId> {
    match &m.algebras[a].kind {
        AlgebraKind::Matrix { of, .. } | AlgebraKind::Stabilize(of) => vec![*of],
        AlgebraKind::DirectSum(x, y) => vec![*x, *y],
        AlgebraKind::InductiveLimit { parts, .. } => parts.clone(),
        AlgebraKind::TensorExt { extensions, .. } => extensions
            .iter()
            .flat_map(|&e| {
                let StatementKind::Extension { ideal, middle, quotient, .. } = &pending[ext_src[e]].kind else {
                    unreachable!()
                };
                [ideal, middle, quotient].into_iter().filter_map(|n| m.algebra_id(n)).collect::<Vec<_>>()
            })
            .collect(),
        AlgebraKind::CofSpace(_) | AlgebraKind::Abstract | AlgebraKind::Catalog(_) => Vec::new(),
    }
}

fn check_acyclic(m: &Model, pending: &[Pending], ext_src: &[usize]) -> Result<(), ModelError> {
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state = vec![0u8; m.algebras.len()];
    fn dfs(
        m: &Model,
        a: AlgebraId,
        pending: &[Pending],
        ext_src: &[usize],
        state: &mut [u8],
        stack: &mut Vec<AlgebraId>,
    ) -> Result<(), ModelError> {
        state[a] = 1;
        stack.push(a);
        for c in algebra_children(m, a, pending, ext_src) {
            match state[c] {
                1 => {
                    let start = stack.iter().position(|&x| x == c).unwrap_or(0);
                    let mut cycle: Vec<String> = stack[start..].iter().map(|&x| m.algebras[x].id.clone()).collect();
                    cycle.push(m.algebras[c].id.clone());
                    return Err(ModelError::CyclicAlgebraGraph { cycle });
                }
                0 => dfs(m, c, pending, ext_src, state, stack)?,
                _ => {}
            }
        }
        stack.pop();
        state[a] = 2;
        Ok(())
    }
    for a in 0..m.algebras.len() {
        if state[a] == 0 {
            dfs(m, a, pending, ext_src, &mut state, &mut Vec::new())?;
        }
    }
    Ok(())
}

/// Children before parents. Extensions are resolved by now, so tensor nodes
/// depend on their middle algebras.
fn topological_algebras(m: &Model) -> Vec<AlgebraId> {
    let children = |a: AlgebraId| -> Vec<AlgebraId> {
        match &m.algebras[a].kind {
            AlgebraKind::Matrix { of, .. } | AlgebraKind::Stabilize(of) => vec![*of],
            AlgebraKind::DirectSum(x, y) => vec![*x, *y],
            AlgebraKind::InductiveLimit { parts, .. } => parts.clone(),
            AlgebraKind::TensorExt { extensions, .. } => {
                extensions.iter().flat_map(|&e| [m.extensions[e].ideal, m.extensions[e].middle, m.extensions[e].quotient]).collect()
            }
            _ => Vec::new(),
        }
    };
    let mut order = Vec::new();
    let mut done = vec![false; m.algebras.len()];
    fn visit(a: AlgebraId, children: &dyn Fn(AlgebraId) -> Vec<AlgebraId>, done: &mut [bool], order: &mut Vec<AlgebraId>) {
        if done[a] {
            return;
        }
        done[a] = true;
        for c in children(a) {
            visit(c, children, done, order);
        }
        order.push(a);
    }
    for a in 0..m.algebras.len() {
        visit(a, &children, &mut done, &mut order);
    }
    order
}

fn conflict(m: &Model, a: AlgebraId, flag: &str, detail: String) -> ModelError {
    ModelError::FlagConflict { algebra: m.algebras[a].id.clone(), flag: flag.to_string(), detail, span: m.algebras[a].span }
}

fn origin_text(o: FlagOrigin) -> String {
    match o {
        FlagOrigin::User => "declared by the user".into(),
        FlagOrigin::Catalog(c) => format!("catalog: {c}"),
        FlagOrigin::Structural(c) => format!("structural: {c}"),
        FlagOrigin::Derived => "implied by other flags".into(),
    }
}

fn assign_flags(m: &mut Model, a: AlgebraId, p: &Pending) -> Result<(), ModelError> {
    // Structural C*-ness and commutativity: Some(b) means forced.
    let (cstar, commutative): (Option<bool>, Option<bool>) = match &m.algebras[a].kind {
        AlgebraKind::CofSpace(_) => (Some(true), Some(true)),
        AlgebraKind::Matrix { n, of } => {
            let f = &m.algebras[*of].flags;
            (Some(f.cstar), if *n == 1 { Some(f.commutative) } else { Some(false) })
        }
        AlgebraKind::DirectSum(x, y) => {
            let (fx, fy) = (&m.algebras[*x].flags, &m.algebras[*y].flags);
            (Some(fx.cstar && fy.cstar), Some(fx.commutative && fy.commutative))
        }
        AlgebraKind::Stabilize(x) => (Some(m.algebras[*x].flags.cstar), Some(false)),
        AlgebraKind::InductiveLimit { parts, .. } => (
            parts.iter().all(|&q| m.algebras[q].flags.cstar).then_some(true),
            parts.iter().all(|&q| m.algebras[q].flags.commutative).then_some(true),
        ),
        AlgebraKind::TensorExt { .. } => (Some(true), Some(false)),
        AlgebraKind::Abstract => (None, None),
        AlgebraKind::Catalog(_) => {
            let x = p.expansion.as_ref().expect("catalog nodes carry an expansion");
            (Some(x.cstar), Some(x.commutative))
        }
    };
    let mut flags = FlagSet { cstar: cstar.unwrap_or(false), commutative: commutative.unwrap_or(false), ..FlagSet::default() };

    if let Some(x) = &p.expansion {
        for f in &x.flags {
            flags
                .set(f.flag, f.value, FlagOrigin::Catalog(f.citation))
                .map_err(|o| conflict(m, a, f.flag.key(), origin_text(o)))?;
        }
    }

    if let StatementKind::Algebra { flags: entries, .. } = &p.kind {
        for e in entries {
            match *e {
                FlagEntry::Cstar(b) => match cstar {
                    Some(forced) if forced != b => {
                        return Err(conflict(m, a, "cstar", format!("structure forces cstar = {forced}")))
                    }
                    _ => flags.cstar = b,
                },
                FlagEntry::Commutative(b) => match commutative {
                    Some(forced) if forced != b => {
                        return Err(conflict(m, a, "commutative", format!("structure forces commutative = {forced}")))
                    }
                    _ => flags.commutative = b,
                },
                FlagEntry::State(f, t) => {
                    if let Some(b) = t.known() {
                        flags.set(f, b, FlagOrigin::User).map_err(|o| {
                            conflict(m, a, f.key(), format!("declared {b}, but {}", origin_text(o)))
                        })?;
                    }
                }
            }
        }
    }

    if flags.commutative {
        flags
            .set(Flag::StablyFinite, true, FlagOrigin::Structural(COMMUTATIVE_IS_STABLY_FINITE))
            .map_err(|o| conflict(m, a, Flag::StablyFinite.key(), format!("commutative, but {}", origin_text(o))))?;
    }
    flags.close().map_err(|(f, o)| conflict(m, a, f.key(), format!("inconsistent with flags {}", origin_text(o))))?;
    m.algebras[a].flags = flags;
    Ok(())
}

/// Finds or creates C(X1 × ... × Xn × Z) for a tensor node.
fn symbol_algebra(m: &mut Model, a: AlgebraId, extensions: &[usize], times: Option<SpaceId>) -> Option<AlgebraId> {
    let mut factors = Vec::new();
    for &e in extensions {
        factors.push(m.extension_of_compacts_by_cx(e)?);
    }
    if let Some(z) = times {
        factors.push(z);
    }
    if factors.len() == 1 {
        let s = factors[0];
        if let Some(q) = (0..m.algebras.len()).find(|&q| m.algebras[q].kind == AlgebraKind::CofSpace(s)) {
            return Some(q);
        }
    }
    let flat = |m: &Model, ids: &[SpaceId]| -> Vec<SpaceId> {
        let mut out = Vec::new();
        let mut stack: Vec<SpaceId> = ids.iter().rev().copied().collect();
        while let Some(s) = stack.pop() {
            match &m.spaces[s].kind {
                SpaceKind::Product(fs) => stack.extend(fs.iter().rev()),
                _ => out.push(s),
            }
        }
        out.sort_unstable();
        out
    };
    let wanted = flat(m, &factors);
    for q in 0..m.algebras.len() {
        if let AlgebraKind::CofSpace(s) = m.algebras[q].kind {
            if flat(m, &[s]) == wanted {
                return Some(q);
            }
        }
    }
    let space_name = factors.iter().map(|&s| m.spaces[s].id.clone()).collect::<Vec<_>>().join("×");
    let parts: Vec<SpaceDescriptor> = factors.iter().map(|&s| m.spaces[s].clone()).collect();
    let refs: Vec<&SpaceDescriptor> = parts.iter().collect();
    let mut desc = product_descriptor(&space_name, factors.clone(), &refs, None);
    desc.auxiliary = true;
    desc.span = m.algebras[a].span;
    let s = m.spaces.len();
    m.names.insert(space_name.clone(), Decl::Space(s));
    m.spaces.push(desc);
    let alg_name = format!("C({space_name})");
    if let Some(existing) = m.algebra_id(&alg_name) {
        return Some(existing);
    }
    let q = m.algebras.len();
    let mut flags = FlagSet { cstar: true, commutative: true, ..FlagSet::default() };
    let _ = flags.set(Flag::StablyFinite, true, FlagOrigin::Structural(COMMUTATIVE_IS_STABLY_FINITE));
    let _ = flags.close();
    m.names.insert(alg_name.clone(), Decl::Algebra(q));
    m.algebras.push(AlgebraNode {
        id: alg_name,
        kind: AlgebraKind::CofSpace(s),
        flags,
        catalog: None,
        auxiliary: true,
        span: m.algebras[a].span,
    });
    Some(q)
}

/// Hypothesis gaps that make some rules inapplicable.
pub fn validate(m: &Model) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let warn = |out: &mut Vec<Diagnostic>, message: String, span| {
        out.push(Diagnostic { severity: Severity::Warning, message, span })
    };
    for s in &m.spaces {
        if s.auxiliary {
            continue;
        }
        if s.kind == SpaceKind::Custom && !s.metric {
            warn(&mut out, format!("space {}: not declared metric, cohomological csr criterion disabled", s.id), s.span);
        }
        if s.dim.is_none() {
            warn(&mut out, format!("space {}: no dimension, dimension rules disabled", s.id), s.span);
        } else if s.dim_assumed && !s.dim_exact() {
            out.push(Diagnostic {
                severity: Severity::Note,
                message: format!(
                    "space {}: dimension {} assumed to be the sum of the factor dimensions",
                    s.id,
                    s.dim.unwrap_or(0)
                ),
                span: s.span,
            });
        }
    }
    for node in &m.algebras {
        match &node.kind {
            AlgebraKind::TensorExt { extensions, symbol, .. } => match symbol {
                None => {
                    let bad: Vec<&str> = extensions
                        .iter()
                        .filter(|&&e| m.extension_of_compacts_by_cx(e).is_none())
                        .map(|&e| m.extensions[e].id.as_str())
                        .collect();
                    warn(
                        &mut out,
                        format!(
                            "algebra {}: extensions {} are not C*-extensions of compacts by C(X) with X compact metric; tensor rules disabled",
                            node.id,
                            bad.join(", ")
                        ),
                        node.span,
                    );
                }
                Some(sym) => {
                    let x = m.space_of(*sym).expect("symbol is C(X)");
                    if !x.dim_provably_not_one() {
                        warn(
                            &mut out,
                            format!(
                                "algebra {}: dim({}) may equal 1, Nistor rule inapplicable (tsr equality not asserted)",
                                node.id, x.id
                            ),
                            node.span,
                        );
                    }
                }
            },
            AlgebraKind::Stabilize(x) if !m.algebras[*x].flags.cstar => warn(
                &mut out,
                format!("algebra {}: stabilization of a non-C*-algebra, stabilization rules disabled", node.id),
                node.span,
            ),
            _ => {}
        }
    }
    for f in &m.morphisms {
        if f.has(MorphismAttr::Gelfand) && (m.space_of(f.to).is_none() || !m.algebras[f.from].flags.commutative) {
            warn(
                &mut out,
                format!("morphism {}: Gelfand transform must go from a commutative algebra to some C(X); Gelfand rules disabled", f.id),
                f.span,
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;

    fn build(text: &str) -> Result<Model, ModelError> {
        build_model(&parse(text).unwrap())
    }

    #[test]
    fn cofspace_is_commutative() {
        let m = build("space S = sphere(2)\nalgebra A = C(S)").unwrap();
        let a = &m.algebras[m.algebra_id("A").unwrap()];
        assert!(a.flags.commutative && a.flags.cstar);
        assert_eq!(a.flags.get(Flag::StablyFinite), Tri::True);
        assert_eq!(a.flags.get(Flag::Finite), Tri::True);
        assert_eq!(m.spaces[0].dim, Some(2));
    }

    #[test]
    fn self_reference_is_cyclic() {
        assert!(matches!(build("algebra A = matrix(2, A)"), Err(ModelError::CyclicAlgebraGraph { .. })));
        assert!(matches!(
            build("algebra A = sum(B, B)\nalgebra B = stabilize(A)"),
            Err(ModelError::CyclicAlgebraGraph { .. })
        ));
    }

    #[test]
    fn ideal_of_cstar_algebra_has_approximate_identity() {
        let m = build("space S1 = sphere(1)\nalgebra K = compacts\nalgebra Q = C(S1)\nalgebra T = abstract { cstar = true }\nextension E : K -> T -> Q").unwrap();
        assert!(m.extensions[0].approx_identity);
        assert!(m.morphisms.iter().any(|f| f.from_extension == Some(0) && f.has(MorphismAttr::Onto)));
    }

    #[test]
    fn banach_ideal_keeps_declared_approximate_identity() {
        let m = build("algebra J = abstract\nalgebra A = abstract\nalgebra B = abstract\nextension E : J -> A -> B").unwrap();
        assert!(!m.extensions[0].approx_identity);
    }

    #[test]
    fn errors() {
        assert!(matches!(build("algebra A = C(S)"), Err(ModelError::UnknownIdentifier { .. })));
        assert!(matches!(build("space A = point\nalgebra A = abstract"), Err(ModelError::DuplicateIdentifier { .. })));
        assert!(matches!(build("algebra A = abstract\nalgebra B = C(A)"), Err(ModelError::WrongKind { .. })));
        assert!(matches!(
            build("algebra A = abstract { stably_finite = true, finite = false }"),
            Err(ModelError::FlagConflict { .. })
        ));
        assert!(matches!(
            build("algebra O = cuntz(2) { finite = true }"),
            Err(ModelError::FlagConflict { .. })
        ));
        assert!(matches!(build("space X = product(Y)\nspace Y = product(X)"), Err(ModelError::CyclicSpaceGraph { .. })));
        assert!(matches!(build("space S = point\nalgebra A = C(S) { cstar = false }"), Err(ModelError::FlagConflict { .. })));
    }

    #[test]
    fn builtin_space_attributes() {
        let m = build(
            "space S = sphere(3)\nspace T = torus(4)\nspace T1 = torus(1)\nspace I = cube(3)\nspace P = point\nspace X = product(S, T)",
        )
        .unwrap();
        let s = |n: &str| &m.spaces[m.space_id(n).unwrap()];
        assert_eq!(s("S").contractible, Tri::False);
        assert_eq!(s("S").top_cohomology_nonzero, Tri::True);
        assert_eq!(s("S").codim1_cohomology_nonzero, Tri::False);
        assert_eq!(s("T").top_cohomology_nonzero, Tri::True);
        assert_eq!(s("T").codim1_cohomology_nonzero, Tri::True);
        assert_eq!(s("T1").top_cohomology_nonzero, s("S").top_cohomology_nonzero);
        assert_eq!((s("I").dim, s("I").contractible), (Some(3), Tri::True));
        assert_eq!((s("P").dim, s("P").contractible), (Some(0), Tri::True));
        let x = s("X");
        assert_eq!(x.dim, Some(7));
        assert!(x.dim_exact());
        assert_eq!(x.top_cohomology_nonzero, Tri::True);
        assert_eq!(x.codim1_cohomology_nonzero, Tri::True);
    }

    #[test]
    fn product_of_custom_factors_is_assumed() {
        let m = build("space Y = custom { dim = 2, metric = true }\nspace S = sphere(1)\nspace X = product(Y, S)").unwrap();
        let x = &m.spaces[m.space_id("X").unwrap()];
        assert_eq!(x.dim, Some(3));
        assert!(x.dim_assumed && !x.dim_exact());
        assert_eq!(x.dim_floor, 2);
        assert!(x.dim_provably_not_one());
        let diags = validate(&m);
        assert!(diags.iter().any(|d| d.message.contains("assumed")));
    }

    #[test]
    fn product_dimension_override() {
        let m = build("space Y = custom { dim = 2 }\nspace X = product(Y, Y) { dim = 3 }").unwrap();
        let x = &m.spaces[m.space_id("X").unwrap()];
        assert_eq!(x.dim, Some(3));
        assert!(x.dim_exact());
    }

    #[test]
    fn catalog_expansion_creates_auxiliary_nodes() {
        let m = build("algebra T = toeplitz").unwrap();
        assert_eq!(m.reported_algebras(), vec![m.algebra_id("T").unwrap()]);
        assert!(m.algebra_id("T.K").is_some());
        assert_eq!(m.extensions.len(), 1);
        assert_eq!(m.extension_of_compacts_by_cx(0), m.space_id("T.S"));
        let t = &m.algebras[m.algebra_id("T").unwrap()];
        assert_eq!(t.flags.get(Flag::Finite), Tri::False);
        assert_eq!(t.flags.get(Flag::StablyFinite), Tri::False);
    }

    #[test]
    fn tensor_symbol_reuses_declared_product() {
        let text = "space S5 = sphere(5)\nspace S7 = sphere(7)\nspace X = product(S5, S7)\nalgebra CX = C(X)\n\
            algebra K = compacts\nalgebra Q5 = C(S5)\nalgebra Q7 = C(S7)\n\
            algebra A1 = abstract { cstar = true }\nalgebra A2 = abstract { cstar = true }\n\
            extension E1 : K -> A1 -> Q5\nextension E2 : K -> A2 -> Q7\nalgebra A = tensor_ext(E1, E2)";
        let m = build(text).unwrap();
        let a = m.algebra_id("A").unwrap();
        assert!(matches!(m.algebras[a].kind, AlgebraKind::TensorExt { symbol: Some(s), .. } if s == m.algebra_id("CX").unwrap()));
        assert!(validate(&m).is_empty());
    }

    #[test]
    fn tensor_symbol_is_materialized() {
        let text = "space S1 = sphere(1)\nalgebra K = compacts\nalgebra Q = C(S1)\n\
            algebra T = abstract { cstar = true }\nextension E : K -> T -> Q\n\
            space Z = sphere(2)\nalgebra A = tensor_ext(E) times C(Z)";
        let m = build(text).unwrap();
        let sym = m.algebra_id("C(S1×Z)").unwrap();
        assert_eq!(m.space_of(sym).unwrap().dim, Some(3));
        assert!(m.algebras[sym].auxiliary);
    }

    #[test]
    fn dimension_one_tensor_warns() {
        assert!(parse("algebra T = toeplitz\nalgebra A = tensor_ext(T.E)").is_err(), "auxiliary ids are not user syntax");
        let text = "space S1 = sphere(1)\nalgebra K = compacts\nalgebra Q = C(S1)\n\
            algebra T = abstract { cstar = true }\nextension E : K -> T -> Q\nalgebra A = tensor_ext(E)";
        let m = build(text).unwrap();
        let d = validate(&m);
        assert!(d.iter().any(|d| d.message.contains("Nistor rule inapplicable")), "{d:?}");
    }

    #[test]
    fn non_metric_custom_space_warns() {
        let m = build("space X = custom { dim = 3, metric = false }").unwrap();
        assert!(validate(&m).iter().any(|d| d.message.contains("cohomological csr criterion disabled")));
        assert!(validate(&build("").unwrap()).is_empty());
    }

    #[test]
    fn torus_five_gets_the_cited_bound() {
        let m = build("space T = torus(5)\nalgebra A = C(T)\nalgebra P = torus5_pr_fact").unwrap();
        let cited: Vec<_> = m.assumptions.iter().filter(|a| matches!(a.origin, AssumptionOrigin::Catalog(_))).collect();
        assert_eq!(cited.len(), 2);
        assert!(cited.iter().all(|a| a.rank == RankKind::Gsr && a.value == ExtNat::Fin(2)));
    }

    #[test]
    fn deterministic() {
        let text = "algebra T = toeplitz_n(3)\nalgebra D = disk_algebra\nspace S = sphere(4)\nalgebra A = C(S)";
        assert_eq!(build(text).unwrap(), build(text).unwrap());
    }

    #[test]
    fn flag_closure_is_idempotent() {
        let mut f = FlagSet::default();
        f.set(Flag::PurelyInfiniteSimple, true, FlagOrigin::User).unwrap();
        f.close().unwrap();
        let once = f.clone();
        f.close().unwrap();
        assert_eq!(f, once);
        assert_eq!(f.get(Flag::Finite), Tri::False);
        assert_eq!(f.get(Flag::StablyFinite), Tri::False);
    }
}
