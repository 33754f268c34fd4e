//! Stable-rank data for commutative C*-algebras `C(X)`: the dimension
//! formulas, the cohomological criterion for csr, and the unstable homotopy
//! groups of unitary groups that decide gsr of spheres.

use std::fmt;

use num_bigint::BigUint;
use thiserror::Error;

use crate::lattice::{ExtNat, RankInterval};
use crate::model::{SpaceDescriptor, SpaceKind, Tri};

/// Value of `π_k U(∞)` by Bott periodicity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BottValue {
    Trivial,
    Integers,
}

/// What is known about `π_k U(n)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GroupFact {
    Trivial,
    FreeCyclic,
    /// `Z/order`; `label` is the symbolic form, e.g. `4!`.
    CyclicFinite { order: BigUint, label: String },
    /// Some direct summand is `Z/order`.
    HasFiniteCyclicSummand(u32),
    /// `n > k/2`: the group equals its stable value.
    StableRange(BottValue),
}

impl GroupFact {
    pub fn is_trivial(&self) -> bool {
        matches!(self, GroupFact::Trivial | GroupFact::StableRange(BottValue::Trivial))
    }

    pub fn is_torsion_free(&self) -> bool {
        matches!(self, GroupFact::FreeCyclic | GroupFact::StableRange(BottValue::Integers)) || self.is_trivial()
    }

    /// Contains a nonzero element of finite order.
    pub fn has_torsion(&self) -> bool {
        matches!(self, GroupFact::CyclicFinite { .. } | GroupFact::HasFiniteCyclicSummand(_))
    }
}

impl fmt::Display for GroupFact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupFact::Trivial => f.write_str("0"),
            GroupFact::FreeCyclic => f.write_str("Z"),
            GroupFact::CyclicFinite { order, label } if *label == order.to_string() => write!(f, "Z/{order}"),
            GroupFact::CyclicFinite { order, label } => write!(f, "Z/{label} (= Z/{order})"),
            GroupFact::HasFiniteCyclicSummand(o) => write!(f, "has a Z/{o} summand"),
            GroupFact::StableRange(BottValue::Trivial) => f.write_str("0 (stable)"),
            GroupFact::StableRange(BottValue::Integers) => f.write_str("Z (stable)"),
        }
    }
}

fn factorial(k: u32) -> BigUint {
    (1..=k).map(BigUint::from).product()
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `π_k U(n)` as far as the stored facts go; `None` means unknown.
pub fn unstable_pi_u(k: u32, n: u32) -> Option<GroupFact> {
    if n == 0 {
        return Some(GroupFact::Trivial);
    }
    if 2 * n > k {
        let bott = if k.is_multiple_of(2) { BottValue::Trivial } else { BottValue::Integers };
        return Some(GroupFact::StableRange(bott));
    }
    // Below the stable range with n >= 1, so k >= 2.
    if k <= 3 {
        // π_2 U(1) = π_3 U(1) = 0, since U(1) is a circle.
        return Some(GroupFact::Trivial);
    }
    let half = k / 2;
    if k.is_multiple_of(2) && n == half {
        return Some(GroupFact::CyclicFinite { order: factorial(half), label: format!("{half}!") });
    }
    if k % 2 == 1 && n == half {
        return Some(if half.is_multiple_of(2) {
            GroupFact::CyclicFinite { order: BigUint::from(2u32), label: "2".into() }
        } else {
            GroupFact::Trivial
        });
    }
    if k % 2 == 1 && half % 2 == 1 && n + 1 == half {
        return Some(GroupFact::HasFiniteCyclicSummand(gcd(half - 1, 8)));
    }
    None
}

/// Injectivity of the stabilization `π_k U(n) -> π_k U(n+1)`.
pub fn stabilization_injective(k: u32, n: u32) -> Tri {
    if 2 * n > k {
        return Tri::True;
    }
    let Some(source) = unstable_pi_u(k, n) else { return Tri::Unknown };
    if source.is_trivial() {
        return Tri::True;
    }
    match unstable_pi_u(k, n + 1) {
        Some(target) if source.has_torsion() && target.is_torsion_free() => Tri::False,
        _ => Tri::Unknown,
    }
}

/// gsr C(S^d) from the homotopy table: the least `n >= 1` such that
/// `π_{d-1} U(m-1) -> π_{d-1} U(m)` is injective for every `m >= n`.
/// `None` if the table cannot decide.
pub fn try_gsr_sphere_via_table(d: u32) -> Option<ExtNat> {
    if d == 0 {
        return Some(ExtNat::ONE);
    }
    let k = d - 1;
    // Every source index above k/2 is injective, so scan downward from there.
    for j in (0..=k / 2).rev() {
        match stabilization_injective(k, j) {
            Tri::True => continue,
            Tri::False => return Some(ExtNat::Fin(j + 2)),
            Tri::Unknown => return None,
        }
    }
    Some(ExtNat::ONE)
}

pub fn gsr_sphere_via_table(d: u32) -> ExtNat {
    // The deepest non-injective map is always one of the stored cases: for
    // even k it is (k, k/2); for odd k it is (k, k'/2) or (k, k'-1).
    try_gsr_sphere_via_table(d).expect("homotopy table decides every sphere")
}

/// csr C(S^d): `⌈d/2⌉ + 1`, except 1 for `d = 2` (and for the two-point `S^0`).
pub fn csr_sphere(d: u32) -> ExtNat {
    match d {
        0 | 2 => ExtNat::ONE,
        _ => ExtNat::Fin(d.div_ceil(2) + 1),
    }
}

/// `(d, csr C(S^d), gsr C(S^d))` for each `d` in the range.
pub fn sphere_table(range: std::ops::RangeInclusive<u32>) -> Vec<(u32, ExtNat, ExtNat)> {
    range.map(|d| (d, csr_sphere(d), gsr_sphere_via_table(d))).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("space `{space}` has no known dimension")]
pub struct UnknownDimension {
    pub space: String,
}

fn dim_of(space: &SpaceDescriptor) -> Result<u32, UnknownDimension> {
    space.dim.ok_or_else(|| UnknownDimension { space: space.id.clone() })
}

/// bsr C(X) = tsr C(X) = `⌊d/2⌋ + 1`.
pub fn dim_rank(space: &SpaceDescriptor) -> Result<ExtNat, UnknownDimension> {
    Ok(ExtNat::Fin(dim_of(space)? / 2 + 1))
}

/// Bounds on csr C(X).
///
/// An assumed product dimension still gives a valid upper bound, since
/// dimension is subadditive on products; the cohomological lower bounds
/// need the exact dimension and a metric space.
pub fn csr_bound(space: &SpaceDescriptor) -> Result<RankInterval, UnknownDimension> {
    let d = dim_of(space)?;
    if space.contractible == Tri::True {
        return Ok(RankInterval::exact(ExtNat::ONE));
    }
    if let SpaceKind::Sphere(d) = space.kind {
        return Ok(RankInterval::exact(csr_sphere(d)));
    }
    let top = ExtNat::Fin(d.div_ceil(2) + 1);
    if space.metric && space.dim_exact() {
        if d % 2 == 1 {
            match space.top_cohomology_nonzero {
                Tri::True => return Ok(RankInterval::exact(top)),
                Tri::False => return Ok(RankInterval::at_most(ExtNat::Fin(d.div_ceil(2)))),
                Tri::Unknown => {}
            }
        } else if d > 0 && space.codim1_cohomology_nonzero == Tri::True {
            return Ok(RankInterval::exact(top));
        }
    }
    Ok(RankInterval::at_most(top))
}

/// Bounds on gsr C(X).
pub fn gsr_commutative(space: &SpaceDescriptor) -> Result<RankInterval, UnknownDimension> {
    let d = dim_of(space)?;
    if space.contractible == Tri::True || d <= 4 {
        return Ok(RankInterval::exact(ExtNat::ONE));
    }
    if let SpaceKind::Sphere(d) = space.kind {
        return Ok(RankInterval::exact(gsr_sphere_via_table(d)));
    }
    Ok(RankInterval::at_most(csr_bound(space)?.hi()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fin(v: u32) -> ExtNat {
        ExtNat::Fin(v)
    }

    fn builtin(kind: SpaceKind) -> SpaceDescriptor {
        SpaceDescriptor::builtin("X", kind)
    }

    fn custom(dim: u32) -> SpaceDescriptor {
        SpaceDescriptor {
            id: "X".into(),
            kind: SpaceKind::Custom,
            dim: Some(dim),
            dim_assumed: false,
            dim_floor: dim,
            metric: true,
            contractible: Tri::Unknown,
            top_cohomology_nonzero: Tri::Unknown,
            codim1_cohomology_nonzero: Tri::Unknown,
            cohomology_degrees: None,
            auxiliary: false,
            span: None,
        }
    }

    #[test]
    fn group_table_examples() {
        assert_eq!(
            unstable_pi_u(8, 4),
            Some(GroupFact::CyclicFinite { order: BigUint::from(24u32), label: "4!".into() })
        );
        assert!(matches!(unstable_pi_u(9, 4), Some(GroupFact::CyclicFinite { order, .. }) if order == BigUint::from(2u32)));
        assert_eq!(unstable_pi_u(6, 4), Some(GroupFact::StableRange(BottValue::Trivial)));
        assert_eq!(unstable_pi_u(7, 4), Some(GroupFact::StableRange(BottValue::Integers)));
        assert_eq!(unstable_pi_u(11, 4), Some(GroupFact::HasFiniteCyclicSummand(4)));
        assert_eq!(unstable_pi_u(7, 3), Some(GroupFact::Trivial));
        assert_eq!(unstable_pi_u(12, 3), None);
    }

    #[test]
    fn factorial_orders_do_not_overflow() {
        let Some(GroupFact::CyclicFinite { order, label }) = unstable_pi_u(60, 30) else { panic!() };
        assert_eq!(label, "30!");
        assert_eq!(order.to_string(), "265252859812191058636308480000000");
    }

    #[test]
    fn injectivity_examples() {
        assert_eq!(stabilization_injective(8, 4), Tri::False);
        assert_eq!(stabilization_injective(8, 5), Tri::True);
        assert_eq!(stabilization_injective(11, 4), Tri::False);
        assert_eq!(stabilization_injective(9, 4), Tri::False);
        assert_eq!(stabilization_injective(11, 5), Tri::True);
        assert_eq!(stabilization_injective(12, 3), Tri::Unknown);
    }

    #[test]
    fn low_degrees_always_inject() {
        for k in 0..=3 {
            for n in 0..10 {
                assert_eq!(stabilization_injective(k, n), Tri::True, "k={k} n={n}");
            }
        }
    }

    #[test]
    fn injective_from_the_stable_range_on() {
        for k in 0..60 {
            for n in (k / 2 + 1)..(k + 5) {
                assert_eq!(stabilization_injective(k, n), Tri::True);
            }
        }
    }

    #[test]
    fn sphere_values() {
        assert_eq!(gsr_sphere_via_table(5), fin(4));
        assert_eq!(gsr_sphere_via_table(8), fin(4));
        assert_eq!(gsr_sphere_via_table(4), fin(1));
        assert_eq!(csr_sphere(1), fin(2));
        assert_eq!(csr_sphere(2), fin(1));
        assert_eq!(csr_sphere(7), fin(5));
    }

    #[test]
    fn table_decides_every_sphere() {
        for d in 0..=400 {
            assert!(try_gsr_sphere_via_table(d).is_some(), "d={d}");
        }
    }

    #[test]
    fn dimension_rank() {
        assert_eq!(dim_rank(&builtin(SpaceKind::Cube(3))), Ok(fin(2)));
        assert_eq!(dim_rank(&builtin(SpaceKind::Point)), Ok(fin(1)));
        assert_eq!(dim_rank(&builtin(SpaceKind::Torus(5))), Ok(fin(3)));
        let mut x = custom(3);
        x.dim = None;
        assert!(dim_rank(&x).is_err());
        assert!(csr_bound(&x).is_err());
        assert!(gsr_commutative(&x).is_err());
    }

    #[test]
    fn csr_examples() {
        assert_eq!(csr_bound(&builtin(SpaceKind::Sphere(2))), Ok(RankInterval::exact(fin(1))));
        assert_eq!(csr_bound(&builtin(SpaceKind::Torus(4))), Ok(RankInterval::exact(fin(3))));
        assert_eq!(csr_bound(&custom(6)), Ok(RankInterval::at_most(fin(4))));
        let mut odd = custom(5);
        odd.top_cohomology_nonzero = Tri::False;
        assert_eq!(csr_bound(&odd), Ok(RankInterval::at_most(fin(3))));
        odd.top_cohomology_nonzero = Tri::True;
        assert_eq!(csr_bound(&odd), Ok(RankInterval::exact(fin(4))));
        odd.metric = false;
        assert_eq!(csr_bound(&odd), Ok(RankInterval::at_most(fin(4))));
    }

    #[test]
    fn gsr_examples() {
        assert_eq!(gsr_commutative(&builtin(SpaceKind::Sphere(8))), Ok(RankInterval::exact(fin(4))));
        assert_eq!(gsr_commutative(&builtin(SpaceKind::Cube(9))), Ok(RankInterval::exact(fin(1))));
        assert_eq!(gsr_commutative(&builtin(SpaceKind::Torus(5))), Ok(RankInterval::at_most(fin(4))));
        assert_eq!(gsr_commutative(&builtin(SpaceKind::Torus(4))), Ok(RankInterval::exact(fin(1))));
    }

    #[test]
    fn ord_chain_for_builtin_spaces() {
        for d in 0..40 {
            let mut kinds = vec![SpaceKind::Cube(d), SpaceKind::Torus(d), SpaceKind::Sphere(d)];
            if d == 0 {
                kinds.push(SpaceKind::Point);
            }
            for kind in kinds {
                let x = builtin(kind.clone());
                let csr = csr_bound(&x).unwrap();
                let gsr = gsr_commutative(&x).unwrap();
                assert!(gsr.hi() <= csr.hi(), "{kind:?}");
                assert!(csr.hi() <= dim_rank(&x).unwrap().succ(), "{kind:?}");
            }
        }
    }
}
