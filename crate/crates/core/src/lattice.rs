//! Value domain for stable ranks: the extended naturals `{1, 2, ..., ∞}`,
//! closed intervals over them, and the matrix-size transform
//! `f_n(r) = ⌈(r - 1) / n⌉ + 1` that relates the ranks of `A` and `M_n(A)`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Default number of distinct finite values the engine distinguishes.
pub const MAX_FINITE: u32 = 64;

/// A stable-rank value: a positive integer or `∞`.
///
/// The derived order puts every finite value below `Inf`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExtNat {
    Fin(u32),
    Inf,
}

impl ExtNat {
    pub const ONE: ExtNat = ExtNat::Fin(1);

    /// Builds a finite value, clamping zero up to one.
    pub fn fin(v: u32) -> ExtNat {
        ExtNat::Fin(v.max(1))
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtNat::Fin(_))
    }

    pub fn finite(self) -> Option<u32> {
        match self {
            ExtNat::Fin(v) => Some(v),
            ExtNat::Inf => None,
        }
    }

    /// `x + 1`, with `∞ + 1 = ∞`.
    pub fn succ(self) -> ExtNat {
        match self {
            ExtNat::Fin(v) => ExtNat::Fin(v.saturating_add(1)),
            ExtNat::Inf => ExtNat::Inf,
        }
    }

    /// `max(x - 1, 1)`, with `∞ - 1 = ∞`.
    pub fn pred(self) -> ExtNat {
        match self {
            ExtNat::Fin(v) => ExtNat::fin(v.saturating_sub(1)),
            ExtNat::Inf => ExtNat::Inf,
        }
    }
}

impl fmt::Display for ExtNat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtNat::Fin(v) => write!(f, "{v}"),
            ExtNat::Inf => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid rank value `{0}`: expected a positive integer or `inf`")]
pub struct ParseExtNatError(pub String);

impl FromStr for ExtNat {
    type Err = ParseExtNatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "inf" {
            return Ok(ExtNat::Inf);
        }
        match s.parse::<u32>() {
            Ok(v) if v >= 1 => Ok(ExtNat::Fin(v)),
            _ => Err(ParseExtNatError(s.to_string())),
        }
    }
}

// JSON: finite values are numbers, ∞ is the string "inf".
impl Serialize for ExtNat {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            ExtNat::Fin(v) => serializer.serialize_u32(*v),
            ExtNat::Inf => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtNat {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct Visitor;
        impl serde::de::Visitor<'_> for Visitor {
            type Value = ExtNat;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a positive integer or \"inf\"")
            }
            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<ExtNat, E> {
                match u32::try_from(v) {
                    Ok(v) if v >= 1 => Ok(ExtNat::Fin(v)),
                    _ => Err(E::custom(format!("rank value {v} out of range"))),
                }
            }
            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<ExtNat, E> {
                match u64::try_from(v) {
                    Ok(v) => self.visit_u64(v),
                    Err(_) => Err(E::custom(format!("rank value {v} out of range"))),
                }
            }
            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<ExtNat, E> {
                v.parse().map_err(E::custom)
            }
        }
        deserializer.deserialize_any(Visitor)
    }
}

/// The four stable ranks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankKind {
    Bsr,
    Tsr,
    Csr,
    Gsr,
}

impl RankKind {
    pub const ALL: [RankKind; 4] = [RankKind::Bsr, RankKind::Tsr, RankKind::Csr, RankKind::Gsr];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            RankKind::Bsr => "bsr",
            RankKind::Tsr => "tsr",
            RankKind::Csr => "csr",
            RankKind::Gsr => "gsr",
        }
    }
}

impl fmt::Display for RankKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RankKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bsr" => Ok(RankKind::Bsr),
            "tsr" => Ok(RankKind::Tsr),
            "csr" => Ok(RankKind::Csr),
            "gsr" => Ok(RankKind::Gsr),
            other => Err(format!("unknown rank `{other}` (expected bsr, tsr, csr or gsr)")),
        }
    }
}

/// Closed interval `[lo, hi]` with `1 <= lo <= hi <= ∞`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RankInterval {
    lo: ExtNat,
    hi: ExtNat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("empty interval [{lo}, {hi}]")]
pub struct EmptyInterval {
    pub lo: ExtNat,
    pub hi: ExtNat,
}

impl RankInterval {
    /// `[1, ∞]`, the no-information element.
    pub const TOP: RankInterval = RankInterval { lo: ExtNat::ONE, hi: ExtNat::Inf };

    pub fn new(lo: ExtNat, hi: ExtNat) -> Result<Self, EmptyInterval> {
        let lo = lo.max(ExtNat::ONE);
        if lo > hi {
            Err(EmptyInterval { lo, hi })
        } else {
            Ok(RankInterval { lo, hi })
        }
    }

    pub fn exact(v: ExtNat) -> Self {
        let v = v.max(ExtNat::ONE);
        RankInterval { lo: v, hi: v }
    }

    pub fn at_most(hi: ExtNat) -> Self {
        RankInterval { lo: ExtNat::ONE, hi: hi.max(ExtNat::ONE) }
    }

    pub fn at_least(lo: ExtNat) -> Self {
        RankInterval { lo: lo.max(ExtNat::ONE), hi: ExtNat::Inf }
    }

    pub fn lo(&self) -> ExtNat {
        self.lo
    }

    pub fn hi(&self) -> ExtNat {
        self.hi
    }

    pub fn is_exact(&self) -> bool {
        self.lo == self.hi
    }

    pub fn is_top(&self) -> bool {
        *self == Self::TOP
    }

    pub fn contains(&self, v: ExtNat) -> bool {
        self.lo <= v && v <= self.hi
    }

    /// `self ⊆ other`.
    pub fn is_subset_of(&self, other: &RankInterval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    /// Intersection; `Err` when the two intervals are disjoint.
    pub fn meet(&self, other: &RankInterval) -> Result<RankInterval, EmptyInterval> {
        RankInterval::new(self.lo.max(other.lo), self.hi.min(other.hi))
    }

    /// Image under `f_n` applied to both endpoints.
    pub fn apply_matrix_map(&self, n: u32) -> RankInterval {
        RankInterval {
            lo: matrix_map(self.lo, n),
            hi: matrix_map(self.hi, n),
        }
    }

    /// Smallest interval containing `{ r : f_n(r) ∈ self }`.
    pub fn invert_matrix_map(&self, n: u32) -> RankInterval {
        RankInterval {
            lo: matrix_preimage_min(self.lo, n),
            hi: matrix_preimage_max(self.hi, n),
        }
    }
}

impl fmt::Display for RankInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// `f_n(r) = ⌈(r - 1) / n⌉ + 1`; `f_n(∞) = ∞`.
///
/// Panics if `n == 0`.
pub fn matrix_map(r: ExtNat, n: u32) -> ExtNat {
    assert!(n >= 1, "matrix size must be at least 1");
    match r {
        ExtNat::Inf => ExtNat::Inf,
        ExtNat::Fin(r) => ExtNat::Fin((r.max(1) - 1).div_ceil(n) + 1),
    }
}

/// Least `r` with `f_n(r) >= v`.
pub fn matrix_preimage_min(v: ExtNat, n: u32) -> ExtNat {
    assert!(n >= 1, "matrix size must be at least 1");
    match v {
        ExtNat::Inf => ExtNat::Inf,
        ExtNat::Fin(v) if v <= 1 => ExtNat::ONE,
        ExtNat::Fin(v) => saturating_fin(u64::from(n) * u64::from(v - 2) + 2),
    }
}

/// Greatest `r` with `f_n(r) <= v`.
pub fn matrix_preimage_max(v: ExtNat, n: u32) -> ExtNat {
    assert!(n >= 1, "matrix size must be at least 1");
    match v {
        ExtNat::Inf => ExtNat::Inf,
        ExtNat::Fin(v) => saturating_fin(u64::from(n) * u64::from(v.max(1) - 1) + 1),
    }
}

fn saturating_fin(v: u64) -> ExtNat {
    ExtNat::Fin(u32::try_from(v).unwrap_or(u32::MAX))
}

impl PartialOrd for RankInterval {
    /// Information order: `a <= b` when `a` is at least as narrow as `b`.
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self.is_subset_of(other), other.is_subset_of(self)) {
            (true, true) => Some(Ordering::Equal),
            (true, false) => Some(Ordering::Less),
            (false, true) => Some(Ordering::Greater),
            (false, false) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn iv(lo: u32, hi: Option<u32>) -> RankInterval {
        RankInterval::new(ExtNat::Fin(lo), hi.map_or(ExtNat::Inf, ExtNat::Fin)).unwrap()
    }

    fn brute_preimage(target: RankInterval, n: u32, limit: u32) -> Option<(ExtNat, ExtNat)> {
        let mut hits: Vec<ExtNat> = (1..=limit)
            .map(ExtNat::Fin)
            .filter(|r| target.contains(matrix_map(*r, n)))
            .collect();
        if target.contains(ExtNat::Inf) {
            hits.push(ExtNat::Inf);
        }
        Some((*hits.first()?, *hits.last()?))
    }

    #[test]
    fn ordering_puts_infinity_on_top() {
        assert!(ExtNat::Fin(1) < ExtNat::Fin(2));
        assert!(ExtNat::Fin(u32::MAX) < ExtNat::Inf);
        assert_eq!(ExtNat::Inf.succ(), ExtNat::Inf);
        assert_eq!(ExtNat::Fin(3).succ(), ExtNat::Fin(4));
        assert_eq!(ExtNat::Fin(1).pred(), ExtNat::Fin(1));
    }

    #[test]
    fn parse_and_display() {
        assert_eq!("inf".parse::<ExtNat>().unwrap(), ExtNat::Inf);
        assert_eq!("7".parse::<ExtNat>().unwrap(), ExtNat::Fin(7));
        assert!("0".parse::<ExtNat>().is_err());
        assert!("-2".parse::<ExtNat>().is_err());
        assert_eq!(ExtNat::Inf.to_string(), "inf");
        assert_eq!(iv(2, None).to_string(), "[2, inf]");
    }

    #[test]
    fn json_encoding_of_infinity() {
        let v: Vec<ExtNat> = serde_json_like(&[ExtNat::Fin(3), ExtNat::Inf]);
        assert_eq!(v, vec![ExtNat::Fin(3), ExtNat::Inf]);
    }

    // serde round trip without pulling serde_json into the core crate
    fn serde_json_like(v: &[ExtNat]) -> Vec<ExtNat> {
        use serde::de::value::{Error, StrDeserializer, U64Deserializer};
        v.iter()
            .map(|x| match x {
                ExtNat::Fin(n) => ExtNat::deserialize(U64Deserializer::<Error>::new(u64::from(*n))).unwrap(),
                ExtNat::Inf => ExtNat::deserialize(StrDeserializer::<Error>::new("inf")).unwrap(),
            })
            .collect()
    }

    #[test]
    fn meet_examples() {
        assert_eq!(iv(1, Some(3)).meet(&iv(2, None)).unwrap(), iv(2, Some(3)));
        assert!(iv(1, Some(2)).meet(&iv(3, Some(5))).is_err());
        assert_eq!(iv(2, Some(2)).meet(&RankInterval::TOP).unwrap(), iv(2, Some(2)));
    }

    #[test]
    fn apply_matrix_map_examples() {
        assert_eq!(iv(7, Some(7)).apply_matrix_map(3), iv(3, Some(3)));
        for n in 1..10 {
            assert_eq!(iv(1, Some(1)).apply_matrix_map(n), iv(1, Some(1)));
        }
        assert_eq!(iv(3, None).apply_matrix_map(2), iv(2, None));
    }

    #[test]
    fn invert_matrix_map_examples() {
        // frozen from brute force over r = 1..30
        assert_eq!(brute_preimage(iv(3, Some(3)), 3, 30), Some((ExtNat::Fin(5), ExtNat::Fin(7))));
        assert_eq!(iv(3, Some(3)).invert_matrix_map(3), iv(5, Some(7)));
        assert_eq!(iv(1, Some(1)).invert_matrix_map(4), iv(1, Some(1)));
        assert_eq!(brute_preimage(iv(2, None), 4, 30).unwrap().0, ExtNat::Fin(2));
        assert_eq!(iv(2, None).invert_matrix_map(4), iv(2, None));
    }

    #[test]
    fn invert_agrees_with_brute_force() {
        for n in 1..=6 {
            for lo in 1..=8 {
                for hi in lo..=8 {
                    let target = iv(lo, Some(hi));
                    let Some((a, b)) = brute_preimage(target, n, 200) else { continue };
                    assert_eq!(target.invert_matrix_map(n), RankInterval::new(a, b).unwrap(), "n={n} {target}");
                }
            }
        }
    }

    fn arb_ext() -> impl Strategy<Value = ExtNat> {
        prop_oneof![(1u32..=8).prop_map(ExtNat::Fin), Just(ExtNat::Inf)]
    }

    fn arb_interval() -> impl Strategy<Value = RankInterval> {
        (arb_ext(), arb_ext()).prop_map(|(a, b)| RankInterval::new(a.min(b), a.max(b)).unwrap())
    }

    proptest! {
        #[test]
        fn meet_is_commutative(a in arb_interval(), b in arb_interval()) {
            prop_assert_eq!(a.meet(&b).ok(), b.meet(&a).ok());
        }

        #[test]
        fn meet_is_associative(a in arb_interval(), b in arb_interval(), c in arb_interval()) {
            let left = a.meet(&b).ok().and_then(|ab| ab.meet(&c).ok());
            let right = b.meet(&c).ok().and_then(|bc| a.meet(&bc).ok());
            prop_assert_eq!(left, right);
        }

        #[test]
        fn meet_is_idempotent(a in arb_interval()) {
            prop_assert_eq!(a.meet(&a).unwrap(), a);
        }

        #[test]
        fn matrix_map_is_monotone(a in arb_interval(), b in arb_interval(), n in 1u32..=6) {
            if a.is_subset_of(&b) {
                prop_assert!(a.apply_matrix_map(n).is_subset_of(&b.apply_matrix_map(n)));
            }
        }
    }

    #[test]
    fn matrix_map_refines_with_n() {
        let values = (1..=40).map(ExtNat::Fin).chain([ExtNat::Inf]);
        for r in values {
            assert_eq!(matrix_map(r, 1), r);
            for m in 1..=6 {
                for n in m..=6 {
                    assert!(matrix_map(r, n) <= matrix_map(r, m));
                }
            }
        }
    }

    #[test]
    fn round_trip_soundness() {
        let values = (1..=40).map(ExtNat::Fin).chain([ExtNat::Inf]);
        for r in values {
            for n in 1..=6 {
                let image = RankInterval::exact(matrix_map(r, n));
                assert!(image.invert_matrix_map(n).contains(r), "r={r} n={n}");
            }
        }
    }
}
