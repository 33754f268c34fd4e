//! Named algebras whose ranks or structural flags come from the literature.
//!
//! Each entry contributes cited facts and flags; entries built from an
//! extension or a Gelfand transform also contribute auxiliary declarations so
//! that the remaining ranks are derived by the rules rather than stored.

use std::fmt;

use crate::dsl::{AlgebraExpr, MorphismAttr, Relation, SpaceExpr, StatementKind};
use crate::lattice::{ExtNat, RankKind};
use crate::model::Flag;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CatalogEntry {
    Compacts,
    Af,
    IrrationalRotation,
    CstarRedHyperbolic,
    Cuntz(u32),
    CuntzInf,
    Toeplitz,
    ToeplitzN(u32),
    DiskAlgebra,
    HardyInf,
    L1Lattice(u32),
    Torus5PrFact,
}

const NAMES: &[&str] = &[
    "compacts",
    "af",
    "irrational_rotation",
    "cstar_red_hyperbolic",
    "cuntz",
    "cuntz_inf",
    "toeplitz",
    "toeplitz_n",
    "disk_algebra",
    "hardy_inf",
    "l1_lattice",
    "torus5_pr_fact",
];

pub const AF_VALUES: &str = "AF algebras (and the compacts) have all four stable ranks equal to 1";
pub const PUTNAM: &str = "bsr = tsr = 1 for irrational rotation algebras (Putnam); K1 = Z^2";
pub const HYPERBOLIC: &str = "reduced C*-algebras of torsion-free hyperbolic groups have bsr = tsr = 1 (Dykema, de la Harpe)";
pub const CUNTZ: &str = "O_n is purely infinite simple and [1] has order n-1 in K0 = Z/(n-1) (Cuntz)";
pub const CUNTZ_INF: &str = "O_inf is purely infinite simple and [1] generates K0 = Z (Cuntz)";
pub const TOEPLITZ: &str = "Toeplitz algebra: extension of K by C(S^1), generated by a non-unitary isometry, hence infinite";
pub const TOEPLITZ_N: &str = "Toeplitz algebra of S^(2n-1): extension of K by C(S^(2n-1)) (Coburn)";
pub const TOEPLITZ_2_FLAGS: &str = "the Toeplitz algebra of S^3 is finite but not stably finite (Blackadar)";
pub const DISK_BSR: &str = "bsr A(D) = 1 (Jones, Marshall, Wolff)";
pub const DISK_TSR: &str = "tsr A(D) = 2 (Rieffel)";
pub const DISK_GELFAND: &str = "maximal ideal space of A(D) is the closed disk";
pub const HARDY_BSR: &str = "bsr H^inf(D) = 1 (Treil)";
pub const HARDY_TSR: &str = "tsr H^inf(D) = 2 (Suarez)";
pub const HARDY_K1: &str = "H^inf(D) has nontrivial K1, so csr H^inf(D) = 2";
pub const L1_TSR: &str = "tsr l1(Z^d) = floor(d/2) + 1";
pub const L1_GELFAND: &str = "l1(Z^d) sits densely and spectrally (Wiener) in C(T^d) via its Gelfand transform";
pub const TORUS5: &str = "gsr C(T^5) > 1: a nonfree stably free module over C(T^5) (Packer, Rieffel)";

/// A cited rank fact about the entry itself.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CatalogFact {
    pub rank: RankKind,
    pub relation: Relation,
    pub value: ExtNat,
    pub citation: &'static str,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CatalogFlag {
    pub flag: Flag,
    pub value: bool,
    pub citation: &'static str,
}

/// Everything an entry adds to a model when bound to the id `id`.
///
/// Auxiliary statements use ids containing `.`, which user identifiers cannot.
#[derive(Clone, Debug, Default)]
pub struct Expansion {
    pub cstar: bool,
    pub commutative: bool,
    pub flags: Vec<CatalogFlag>,
    pub facts: Vec<CatalogFact>,
    pub aux: Vec<StatementKind>,
    /// Replaces the node's kind, e.g. an entry that is literally some C(X).
    pub kind: Option<AlgebraExpr>,
}

fn eq(rank: RankKind, v: u32, citation: &'static str) -> CatalogFact {
    CatalogFact { rank, relation: Relation::Eq, value: ExtNat::Fin(v), citation }
}

fn flag(flag: Flag, value: bool, citation: &'static str) -> CatalogFlag {
    CatalogFlag { flag, value, citation }
}

/// The fact attached to every C(torus(5)).
pub fn torus5_fact() -> CatalogFact {
    CatalogFact { rank: RankKind::Gsr, relation: Relation::Ge, value: ExtNat::Fin(2), citation: TORUS5 }
}

pub fn aux_id(owner: &str, part: &str) -> String {
    format!("{owner}.{part}")
}

fn space(id: String, expr: SpaceExpr) -> StatementKind {
    StatementKind::Space { id, expr }
}

fn algebra(id: String, expr: AlgebraExpr) -> StatementKind {
    StatementKind::Algebra { id, expr, flags: Vec::new() }
}

/// Prebuilt `0 -> K -> owner -> C(S^d) -> 0`.
fn extension_over_sphere(owner: &str, d: u32) -> Vec<StatementKind> {
    let (s, k, q) = (aux_id(owner, "S"), aux_id(owner, "K"), format!("C({})", aux_id(owner, "S")));
    vec![
        space(s.clone(), SpaceExpr::Sphere(d)),
        algebra(k.clone(), AlgebraExpr::Catalog(CatalogEntry::Compacts)),
        algebra(q.clone(), AlgebraExpr::CofSpace(s)),
        StatementKind::Extension {
            id: aux_id(owner, "E"),
            ideal: k,
            middle: owner.to_string(),
            quotient: q,
            approx_identity: true,
        },
    ]
}

fn gelfand_target(owner: &str, expr: SpaceExpr, attrs: Vec<MorphismAttr>) -> Vec<StatementKind> {
    let x = aux_id(owner, "X");
    let cx = format!("C({x})");
    vec![
        space(x.clone(), expr),
        algebra(cx.clone(), AlgebraExpr::CofSpace(x)),
        StatementKind::Morphism { id: aux_id(owner, "gelfand"), from: owner.to_string(), to: cx, attrs },
    ]
}

impl CatalogEntry {
    pub fn name(self) -> &'static str {
        match self {
            CatalogEntry::Compacts => "compacts",
            CatalogEntry::Af => "af",
            CatalogEntry::IrrationalRotation => "irrational_rotation",
            CatalogEntry::CstarRedHyperbolic => "cstar_red_hyperbolic",
            CatalogEntry::Cuntz(_) => "cuntz",
            CatalogEntry::CuntzInf => "cuntz_inf",
            CatalogEntry::Toeplitz => "toeplitz",
            CatalogEntry::ToeplitzN(_) => "toeplitz_n",
            CatalogEntry::DiskAlgebra => "disk_algebra",
            CatalogEntry::HardyInf => "hardy_inf",
            CatalogEntry::L1Lattice(_) => "l1_lattice",
            CatalogEntry::Torus5PrFact => "torus5_pr_fact",
        }
    }

    pub fn is_catalog_name(word: &str) -> bool {
        NAMES.contains(&word)
    }

    pub fn takes_argument(name: &str) -> bool {
        matches!(name, "cuntz" | "toeplitz_n" | "l1_lattice")
    }

    pub fn argument_requirement(name: &str) -> &'static str {
        match name {
            "cuntz" | "toeplitz_n" => "integer >= 2",
            "l1_lattice" => "integer >= 1",
            _ => "no argument",
        }
    }

    pub fn from_parts(name: &str, arg: Option<u32>) -> Option<CatalogEntry> {
        Some(match (name, arg) {
            ("compacts", None) => CatalogEntry::Compacts,
            ("af", None) => CatalogEntry::Af,
            ("irrational_rotation", None) => CatalogEntry::IrrationalRotation,
            ("cstar_red_hyperbolic", None) => CatalogEntry::CstarRedHyperbolic,
            ("cuntz", Some(n)) if n >= 2 => CatalogEntry::Cuntz(n),
            ("cuntz_inf", None) => CatalogEntry::CuntzInf,
            ("toeplitz", None) => CatalogEntry::Toeplitz,
            ("toeplitz_n", Some(n)) if n >= 2 => CatalogEntry::ToeplitzN(n),
            ("disk_algebra", None) => CatalogEntry::DiskAlgebra,
            ("hardy_inf", None) => CatalogEntry::HardyInf,
            ("l1_lattice", Some(d)) if d >= 1 => CatalogEntry::L1Lattice(d),
            ("torus5_pr_fact", None) => CatalogEntry::Torus5PrFact,
            _ => return None,
        })
    }

    /// One representative per entry, used by listings.
    pub fn samples() -> Vec<CatalogEntry> {
        vec![
            CatalogEntry::Compacts,
            CatalogEntry::Af,
            CatalogEntry::IrrationalRotation,
            CatalogEntry::CstarRedHyperbolic,
            CatalogEntry::Cuntz(2),
            CatalogEntry::CuntzInf,
            CatalogEntry::Toeplitz,
            CatalogEntry::ToeplitzN(2),
            CatalogEntry::ToeplitzN(3),
            CatalogEntry::DiskAlgebra,
            CatalogEntry::HardyInf,
            CatalogEntry::L1Lattice(3),
            CatalogEntry::Torus5PrFact,
        ]
    }

    pub fn expand(self, owner: &str) -> Expansion {
        use RankKind::*;
        let cstar = Expansion { cstar: true, ..Expansion::default() };
        match self {
            CatalogEntry::Compacts | CatalogEntry::Af => Expansion {
                facts: RankKind::ALL.iter().map(|&k| eq(k, 1, AF_VALUES)).collect(),
                ..cstar
            },
            CatalogEntry::IrrationalRotation => Expansion {
                facts: vec![eq(Bsr, 1, PUTNAM), eq(Tsr, 1, PUTNAM)],
                flags: vec![flag(Flag::K1Trivial, false, PUTNAM)],
                ..cstar
            },
            CatalogEntry::CstarRedHyperbolic => {
                Expansion { facts: vec![eq(Bsr, 1, HYPERBOLIC), eq(Tsr, 1, HYPERBOLIC)], ..cstar }
            }
            CatalogEntry::Cuntz(_) => Expansion {
                flags: vec![
                    flag(Flag::PurelyInfiniteSimple, true, CUNTZ),
                    flag(Flag::UnitFiniteOrderK0, true, CUNTZ),
                ],
                ..cstar
            },
            CatalogEntry::CuntzInf => Expansion {
                flags: vec![
                    flag(Flag::PurelyInfiniteSimple, true, CUNTZ_INF),
                    flag(Flag::UnitFiniteOrderK0, false, CUNTZ_INF),
                ],
                ..cstar
            },
            CatalogEntry::Toeplitz => Expansion {
                flags: vec![flag(Flag::Finite, false, TOEPLITZ)],
                aux: extension_over_sphere(owner, 1),
                ..cstar
            },
            CatalogEntry::ToeplitzN(n) => Expansion {
                flags: if n == 2 {
                    vec![flag(Flag::Finite, true, TOEPLITZ_2_FLAGS), flag(Flag::StablyFinite, false, TOEPLITZ_2_FLAGS)]
                } else {
                    Vec::new()
                },
                aux: extension_over_sphere(owner, 2 * n - 1),
                ..cstar
            },
            CatalogEntry::DiskAlgebra => Expansion {
                commutative: true,
                facts: vec![eq(Bsr, 1, DISK_BSR), eq(Tsr, 2, DISK_TSR)],
                aux: gelfand_target(owner, SpaceExpr::Cube(2), vec![MorphismAttr::Gelfand]),
                ..Expansion::default()
            },
            CatalogEntry::HardyInf => Expansion {
                commutative: true,
                facts: vec![eq(Bsr, 1, HARDY_BSR), eq(Tsr, 2, HARDY_TSR)],
                flags: vec![flag(Flag::K1Trivial, false, HARDY_K1)],
                ..Expansion::default()
            },
            CatalogEntry::L1Lattice(d) => Expansion {
                commutative: true,
                facts: vec![eq(Tsr, d / 2 + 1, L1_TSR)],
                aux: gelfand_target(
                    owner,
                    SpaceExpr::Torus(d),
                    vec![MorphismAttr::Gelfand, MorphismAttr::Dense, MorphismAttr::Spectral],
                ),
                ..Expansion::default()
            },
            CatalogEntry::Torus5PrFact => {
                let x = aux_id(owner, "X");
                Expansion {
                    cstar: true,
                    commutative: true,
                    aux: vec![space(x.clone(), SpaceExpr::Torus(5))],
                    kind: Some(AlgebraExpr::CofSpace(x)),
                    ..Expansion::default()
                }
            }
        }
    }

    /// Every citation an entry can attach.
    pub fn citations() -> &'static [&'static str] {
        &[
            AF_VALUES,
            PUTNAM,
            HYPERBOLIC,
            CUNTZ,
            CUNTZ_INF,
            TOEPLITZ,
            TOEPLITZ_N,
            TOEPLITZ_2_FLAGS,
            DISK_BSR,
            DISK_TSR,
            DISK_GELFAND,
            HARDY_BSR,
            HARDY_TSR,
            HARDY_K1,
            L1_TSR,
            L1_GELFAND,
            TORUS5,
        ]
    }

    /// Citation describing the prebuilt structure (extension or Gelfand map), if any.
    pub fn structure_citation(self) -> Option<&'static str> {
        match self {
            CatalogEntry::Toeplitz => Some(TOEPLITZ),
            CatalogEntry::ToeplitzN(_) => Some(TOEPLITZ_N),
            CatalogEntry::DiskAlgebra => Some(DISK_GELFAND),
            CatalogEntry::L1Lattice(_) => Some(L1_GELFAND),
            CatalogEntry::Torus5PrFact => Some(TORUS5),
            _ => None,
        }
    }
}

impl fmt::Display for CatalogEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CatalogEntry::Cuntz(n) | CatalogEntry::ToeplitzN(n) | CatalogEntry::L1Lattice(n) => {
                write!(f, "{}({n})", self.name())
            }
            _ => f.write_str(self.name()),
        }
    }
}
