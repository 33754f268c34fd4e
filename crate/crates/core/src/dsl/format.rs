use std::fmt::Write;

use super::ast::*;
use crate::model::Tri;

fn tri(t: Tri) -> &'static str {
    match t {
        Tri::True => "true",
        Tri::False => "false",
        Tri::Unknown => "unknown",
    }
}

/// Canonical text for a statement list, one statement per line.
pub fn format(statements: &[Statement]) -> String {
    let mut out = String::new();
    for s in statements {
        out.push_str(&format_statement(&s.kind));
        out.push('\n');
    }
    out
}

pub fn format_statement(kind: &StatementKind) -> String {
    let mut out = String::new();
    match kind {
        StatementKind::Space { id, expr } => {
            let _ = write!(out, "space {id} = ");
            match expr {
                SpaceExpr::Sphere(d) => {
                    let _ = write!(out, "sphere({d})");
                }
                SpaceExpr::Torus(d) => {
                    let _ = write!(out, "torus({d})");
                }
                SpaceExpr::Cube(d) => {
                    let _ = write!(out, "cube({d})");
                }
                SpaceExpr::Point => out.push_str("point"),
                SpaceExpr::Product { factors, dim } => {
                    let _ = write!(out, "product({})", factors.join(", "));
                    if let Some(d) = dim {
                        let _ = write!(out, " {{ dim = {d} }}");
                    }
                }
                SpaceExpr::Custom(entries) => {
                    let fields: Vec<String> = entries
                        .iter()
                        .map(|e| match *e {
                            CustomEntry::Dim(d) => format!("dim = {d}"),
                            CustomEntry::Metric(b) => format!("metric = {b}"),
                            CustomEntry::Contractible(t)
                            | CustomEntry::TopCohomologyNonzero(t)
                            | CustomEntry::Codim1CohomologyNonzero(t) => format!("{} = {}", e.key(), tri(t)),
                        })
                        .collect();
                    out.push_str(&block("custom", &fields));
                }
            }
        }
        StatementKind::Algebra { id, expr, flags } => {
            let _ = write!(out, "algebra {id} = ");
            match expr {
                AlgebraExpr::CofSpace(s) => {
                    let _ = write!(out, "C({s})");
                }
                AlgebraExpr::Matrix { n, of } => {
                    let _ = write!(out, "matrix({n}, {of})");
                }
                AlgebraExpr::Sum(a, b) => {
                    let _ = write!(out, "sum({a}, {b})");
                }
                AlgebraExpr::Stabilize(a) => {
                    let _ = write!(out, "stabilize({a})");
                }
                AlgebraExpr::Limit { parts, liminf } => {
                    let _ = write!(out, "limit({})", parts.join(", "));
                    if !liminf.is_empty() {
                        let hints: Vec<String> = liminf.iter().map(|(k, v)| format!("{k} = {v}")).collect();
                        let _ = write!(out, " liminf {}", hints.join(", "));
                    }
                }
                AlgebraExpr::TensorExt { extensions, times } => {
                    let _ = write!(out, "tensor_ext({})", extensions.join(", "));
                    if let Some(z) = times {
                        let _ = write!(out, " times C({z})");
                    }
                }
                AlgebraExpr::Abstract => out.push_str("abstract"),
                AlgebraExpr::Catalog(entry) => out.push_str(&entry.to_string()),
            }
            if !flags.is_empty() {
                let fields: Vec<String> = flags
                    .iter()
                    .map(|f| match *f {
                        FlagEntry::Cstar(b) | FlagEntry::Commutative(b) => format!("{} = {b}", f.key()),
                        FlagEntry::State(_, t) => format!("{} = {}", f.key(), tri(t)),
                    })
                    .collect();
                out.push(' ');
                out.push_str(&block("", &fields));
            }
        }
        StatementKind::Morphism { id, from, to, attrs } => {
            let attrs: Vec<&str> = attrs.iter().map(|a| a.keyword()).collect();
            let _ = write!(out, "morphism {id} : {from} -> {to} [{}]", attrs.join(", "));
        }
        StatementKind::Extension { id, ideal, middle, quotient, approx_identity } => {
            let _ = write!(out, "extension {id} : {ideal} -> {middle} -> {quotient}");
            if *approx_identity {
                out.push_str(" [approx_identity]");
            }
        }
        StatementKind::Assume(c) => {
            let _ = write!(out, "assume {c}");
        }
        StatementKind::Assert(c) => {
            let _ = write!(out, "assert {c}");
        }
        StatementKind::Query(id) => {
            let _ = write!(out, "query {id}");
        }
    }
    out
}

fn block(head: &str, fields: &[String]) -> String {
    let sep = if head.is_empty() { "" } else { " " };
    if fields.is_empty() {
        format!("{head}{sep}{{}}")
    } else {
        format!("{head}{sep}{{ {} }}", fields.join(", "))
    }
}

/// Statement lists compared without their spans.
pub fn same_structure(a: &[Statement], b: &[Statement]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.kind == y.kind)
}
