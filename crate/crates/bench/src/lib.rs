//! Fixture models shared by the propagation benchmarks.

use stablerank_core::{build_model, dsl, instantiate_rules, ConstraintSet, Model};

/// `toeplitz_n(n)` for each `n` in the range, one algebra per line.
pub fn higher_toeplitz_chain(max_n: u32) -> String {
    (2..=max_n).map(|n| format!("algebra T{n} = toeplitz_n({n})\n")).collect()
}

/// Tori `T^1 .. T^d` with their algebras and a matrix algebra over each.
pub fn torus_tower(d: u32) -> String {
    let mut out = String::new();
    for k in 1..=d {
        out.push_str(&format!("space X{k} = torus({k})\nalgebra A{k} = C(X{k})\nalgebra M{k} = matrix(2, A{k})\n"));
    }
    out
}

pub fn load(text: &str) -> (Model, ConstraintSet) {
    let m = build_model(&dsl::parse(text).expect("fixture parses")).expect("fixture builds");
    let cs = instantiate_rules(&m);
    (m, cs)
}
