use std::fmt;

use crate::catalog::CatalogEntry;
use crate::lattice::{ExtNat, RankKind};
use crate::model::{Flag, Tri};

/// Byte range plus the 1-based line/column of `begin`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct SourceSpan {
    pub begin: usize,
    pub end: usize,
    pub line: u32,
    pub column: u32,
}

impl SourceSpan {
    pub fn to(self, other: SourceSpan) -> SourceSpan {
        SourceSpan { begin: self.begin, end: other.end.max(self.begin), line: self.line, column: self.column }
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Statement {
    pub kind: StatementKind,
    pub span: SourceSpan,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StatementKind {
    Space { id: String, expr: SpaceExpr },
    Algebra { id: String, expr: AlgebraExpr, flags: Vec<FlagEntry> },
    Morphism { id: String, from: String, to: String, attrs: Vec<MorphismAttr> },
    Extension { id: String, ideal: String, middle: String, quotient: String, approx_identity: bool },
    Assume(RankClaim),
    Assert(RankClaim),
    Query(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SpaceExpr {
    Sphere(u32),
    Torus(u32),
    Cube(u32),
    Point,
    Product { factors: Vec<String>, dim: Option<u32> },
    Custom(Vec<CustomEntry>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CustomEntry {
    Dim(u32),
    Metric(bool),
    Contractible(Tri),
    TopCohomologyNonzero(Tri),
    Codim1CohomologyNonzero(Tri),
}

impl CustomEntry {
    pub fn key(&self) -> &'static str {
        match self {
            CustomEntry::Dim(_) => "dim",
            CustomEntry::Metric(_) => "metric",
            CustomEntry::Contractible(_) => "contractible",
            CustomEntry::TopCohomologyNonzero(_) => "top_cohomology_nonzero",
            CustomEntry::Codim1CohomologyNonzero(_) => "codim1_cohomology_nonzero",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AlgebraExpr {
    CofSpace(String),
    Matrix { n: u32, of: String },
    Sum(String, String),
    Stabilize(String),
    Limit { parts: Vec<String>, liminf: Vec<(RankKind, ExtNat)> },
    TensorExt { extensions: Vec<String>, times: Option<String> },
    Abstract,
    Catalog(CatalogEntry),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlagEntry {
    Cstar(bool),
    Commutative(bool),
    State(Flag, Tri),
}

impl FlagEntry {
    pub fn key(&self) -> &'static str {
        match self {
            FlagEntry::Cstar(_) => "cstar",
            FlagEntry::Commutative(_) => "commutative",
            FlagEntry::State(flag, _) => flag.key(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MorphismAttr {
    Onto,
    Split,
    Dense,
    Spectral,
    HomotopyEquiv,
    Gelfand,
}

impl MorphismAttr {
    pub const ALL: [MorphismAttr; 6] = [
        MorphismAttr::Onto,
        MorphismAttr::Split,
        MorphismAttr::Dense,
        MorphismAttr::Spectral,
        MorphismAttr::HomotopyEquiv,
        MorphismAttr::Gelfand,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            MorphismAttr::Onto => "onto",
            MorphismAttr::Split => "split",
            MorphismAttr::Dense => "dense",
            MorphismAttr::Spectral => "spectral",
            MorphismAttr::HomotopyEquiv => "homotopy_equiv",
            MorphismAttr::Gelfand => "gelfand",
        }
    }

    pub fn from_keyword(s: &str) -> Option<MorphismAttr> {
        MorphismAttr::ALL.into_iter().find(|a| a.keyword() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Relation {
    Eq,
    Le,
    Ge,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Eq => "==",
            Relation::Le => "<=",
            Relation::Ge => ">=",
        }
    }
}

/// `rank(algebra) relation value`, as used by `assume` and `assert`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankClaim {
    pub rank: RankKind,
    pub algebra: String,
    pub relation: Relation,
    pub value: ExtNat,
}

impl fmt::Display for RankClaim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}) {} {}", self.rank, self.algebra, self.relation.symbol(), self.value)
    }
}
