use std::fmt;

use thiserror::Error;

use super::ast::*;
use crate::catalog::CatalogEntry;
use crate::lattice::{ExtNat, RankKind};
use crate::model::{Flag, Tri};

/// A parse failure: where it happened, what the parser would have accepted, and what it saw.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub struct ParseError {
    pub span: SourceSpan,
    pub expected: Vec<String>,
    pub found: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: expected ", self.span)?;
        match self.expected.as_slice() {
            [] => write!(f, "nothing")?,
            [one] => write!(f, "{one}")?,
            many => write!(f, "one of {}", many.join(", "))?,
        }
        write!(f, ", found {}", self.found)
    }
}

const KEYWORDS: &[&str] = &[
    "space", "algebra", "morphism", "extension", "assume", "assert", "query", "sphere", "torus", "cube",
    "point", "product", "custom", "matrix", "sum", "stabilize", "limit", "liminf", "tensor_ext", "times",
    "abstract", "approx_identity", "bsr", "tsr", "csr", "gsr", "inf", "true", "false", "unknown",
];

pub fn is_reserved(word: &str) -> bool {
    KEYWORDS.contains(&word) || CatalogEntry::is_catalog_name(word) || MorphismAttr::from_keyword(word).is_some()
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Word(String),
    Int(u64),
    Punct(&'static str),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Word(w) if is_reserved(w) => format!("keyword `{w}`"),
            Tok::Word(w) => format!("identifier `{w}`"),
            Tok::Int(n) => format!("integer `{n}`"),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    span: SourceSpan,
}

const PUNCTS: &[&str] = &["->", "==", "<=", ">=", "(", ")", "{", "}", "[", "]", ",", ":", "="];

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let (mut i, mut line, mut line_start) = (0usize, 1u32, 0usize);
    let span_at = |b: usize, e: usize, line: u32, ls: usize| SourceSpan {
        begin: b,
        end: e,
        line,
        column: (text[ls..b].chars().count() + 1) as u32,
    };
    while i < bytes.len() {
        let c = bytes[i];
        if c == b'\n' {
            i += 1;
            line += 1;
            line_start = i;
        } else if c.is_ascii_whitespace() {
            i += 1;
        } else if c == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let b = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token { tok: Tok::Word(text[b..i].to_string()), span: span_at(b, i, line, line_start) });
        } else if c.is_ascii_digit() {
            let b = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let span = span_at(b, i, line, line_start);
            let n = text[b..i].parse::<u64>().map_err(|_| ParseError {
                span,
                expected: vec!["integer below 2^64".into()],
                found: format!("`{}`", &text[b..i]),
            })?;
            out.push(Token { tok: Tok::Int(n), span });
        } else if let Some(p) = PUNCTS.iter().find(|p| text[i..].starts_with(**p)) {
            out.push(Token { tok: Tok::Punct(p), span: span_at(i, i + p.len(), line, line_start) });
            i += p.len();
        } else {
            let ch = text[i..].chars().next().unwrap_or('?');
            return Err(ParseError {
                span: span_at(i, i + ch.len_utf8(), line, line_start),
                expected: vec!["token".into()],
                found: format!("character {ch:?}"),
            });
        }
    }
    out.push(Token { tok: Tok::Eof, span: span_at(text.len(), text.len(), line, line_start) });
    Ok(out)
}

/// Parses a whole `.bra` source into statements.
pub fn parse(text: &str) -> Result<Vec<Statement>, ParseError> {
    let mut p = Parser { toks: lex(text)?, pos: 0 };
    let mut stmts = Vec::new();
    while p.peek().tok != Tok::Eof {
        stmts.push(p.statement()?);
    }
    Ok(stmts)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if t.tok != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn prev_span(&self) -> SourceSpan {
        self.toks[self.pos.saturating_sub(1)].span
    }

    fn error<T>(&self, expected: &[&str]) -> PResult<T> {
        let t = self.peek();
        Err(ParseError { span: t.span, expected: expected.iter().map(|s| s.to_string()).collect(), found: t.tok.describe() })
    }

    fn at_word(&self, w: &str) -> bool {
        matches!(&self.peek().tok, Tok::Word(x) if x == w)
    }

    fn at_punct(&self, p: &str) -> bool {
        matches!(&self.peek().tok, Tok::Punct(x) if *x == p)
    }

    fn expect_word(&mut self, w: &str) -> PResult<SourceSpan> {
        if self.at_word(w) {
            Ok(self.bump().span)
        } else {
            self.error(&[&format!("`{w}`")])
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<SourceSpan> {
        if self.at_punct(p) {
            Ok(self.bump().span)
        } else {
            self.error(&[&format!("`{p}`")])
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match &self.peek().tok {
            Tok::Word(w) if !is_reserved(w) => {
                let w = w.clone();
                self.bump();
                Ok(w)
            }
            _ => self.error(&["identifier"]),
        }
    }

    fn ident_list(&mut self) -> PResult<Vec<String>> {
        let mut ids = vec![self.ident()?];
        while self.at_punct(",") {
            self.bump();
            ids.push(self.ident()?);
        }
        Ok(ids)
    }

    fn int(&mut self, min: u64, what: &str) -> PResult<u32> {
        match self.peek().tok {
            Tok::Int(n) if n >= min && n <= u32::MAX as u64 => {
                self.bump();
                Ok(n as u32)
            }
            _ => self.error(&[what]),
        }
    }

    fn paren_int(&mut self, min: u64, what: &str) -> PResult<u32> {
        self.expect_punct("(")?;
        let n = self.int(min, what)?;
        self.expect_punct(")")?;
        Ok(n)
    }

    fn value(&mut self) -> PResult<ExtNat> {
        if self.at_word("inf") {
            self.bump();
            return Ok(ExtNat::Inf);
        }
        match self.peek().tok {
            Tok::Int(n) if n >= 1 && n <= u32::MAX as u64 => {
                self.bump();
                Ok(ExtNat::Fin(n as u32))
            }
            _ => self.error(&["integer >= 1", "`inf`"]),
        }
    }

    fn rank(&mut self, allowed: &[RankKind]) -> PResult<RankKind> {
        if let Tok::Word(w) = &self.peek().tok {
            if let Ok(k) = w.parse::<RankKind>() {
                if allowed.contains(&k) {
                    self.bump();
                    return Ok(k);
                }
            }
        }
        let names: Vec<String> = allowed.iter().map(|k| format!("`{k}`")).collect();
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        self.error(&names)
    }

    fn boolean(&mut self) -> PResult<bool> {
        if self.at_word("true") {
            self.bump();
            Ok(true)
        } else if self.at_word("false") {
            self.bump();
            Ok(false)
        } else {
            self.error(&["`true`", "`false`"])
        }
    }

    fn tri(&mut self) -> PResult<Tri> {
        if self.at_word("unknown") {
            self.bump();
            Ok(Tri::Unknown)
        } else if self.at_word("true") || self.at_word("false") {
            Ok(Tri::from(self.boolean()?))
        } else {
            self.error(&["`true`", "`false`", "`unknown`"])
        }
    }

    /// `{ key = value, ... }`, with `entry` parsing one key/value pair.
    fn block<T>(&mut self, mut entry: impl FnMut(&mut Self) -> PResult<T>) -> PResult<Vec<T>> {
        self.expect_punct("{")?;
        let mut out = Vec::new();
        if self.at_punct("}") {
            self.bump();
            return Ok(out);
        }
        loop {
            out.push(entry(self)?);
            if self.at_punct(",") {
                self.bump();
            } else {
                self.expect_punct("}")?;
                return Ok(out);
            }
        }
    }

    fn statement(&mut self) -> PResult<Statement> {
        let start = self.peek().span;
        let kind = match &self.peek().tok {
            Tok::Word(w) => match w.as_str() {
                "space" => self.space()?,
                "algebra" => self.algebra()?,
                "morphism" => self.morphism()?,
                "extension" => self.extension()?,
                "assume" => {
                    self.bump();
                    StatementKind::Assume(self.claim()?)
                }
                "assert" => {
                    self.bump();
                    StatementKind::Assert(self.claim()?)
                }
                "query" => {
                    self.bump();
                    StatementKind::Query(self.ident()?)
                }
                _ => return self.statement_error(),
            },
            _ => return self.statement_error(),
        };
        Ok(Statement { kind, span: start.to(self.prev_span()) })
    }

    fn statement_error<T>(&self) -> PResult<T> {
        self.error(&["`space`", "`algebra`", "`morphism`", "`extension`", "`assume`", "`assert`", "`query`"])
    }

    fn space(&mut self) -> PResult<StatementKind> {
        self.expect_word("space")?;
        let id = self.ident()?;
        self.expect_punct("=")?;
        let expr = match &self.peek().tok {
            Tok::Word(w) if w == "sphere" => {
                self.bump();
                SpaceExpr::Sphere(self.paren_int(1, "integer >= 1")?)
            }
            Tok::Word(w) if w == "torus" => {
                self.bump();
                SpaceExpr::Torus(self.paren_int(1, "integer >= 1")?)
            }
            Tok::Word(w) if w == "cube" => {
                self.bump();
                SpaceExpr::Cube(self.paren_int(0, "integer >= 0")?)
            }
            Tok::Word(w) if w == "point" => {
                self.bump();
                SpaceExpr::Point
            }
            Tok::Word(w) if w == "product" => {
                self.bump();
                self.expect_punct("(")?;
                let factors = self.ident_list()?;
                self.expect_punct(")")?;
                let mut dim = None;
                if self.at_punct("{") {
                    let dims = self.block(|p| {
                        p.expect_word("dim")?;
                        p.expect_punct("=")?;
                        p.int(0, "integer >= 0")
                    })?;
                    dim = dims.last().copied();
                }
                SpaceExpr::Product { factors, dim }
            }
            Tok::Word(w) if w == "custom" => {
                self.bump();
                SpaceExpr::Custom(self.block(Self::custom_entry)?)
            }
            _ => return self.error(&["`sphere`", "`torus`", "`cube`", "`point`", "`product`", "`custom`"]),
        };
        Ok(StatementKind::Space { id, expr })
    }

    fn custom_entry(&mut self) -> PResult<CustomEntry> {
        let key = match &self.peek().tok {
            Tok::Word(w) => w.clone(),
            _ => String::new(),
        };
        let entry = match key.as_str() {
            "dim" => {
                self.bump();
                self.expect_punct("=")?;
                CustomEntry::Dim(self.int(0, "integer >= 0")?)
            }
            "metric" => {
                self.bump();
                self.expect_punct("=")?;
                CustomEntry::Metric(self.boolean()?)
            }
            "contractible" | "top_cohomology_nonzero" | "codim1_cohomology_nonzero" => {
                self.bump();
                self.expect_punct("=")?;
                let t = self.tri()?;
                match key.as_str() {
                    "contractible" => CustomEntry::Contractible(t),
                    "top_cohomology_nonzero" => CustomEntry::TopCohomologyNonzero(t),
                    _ => CustomEntry::Codim1CohomologyNonzero(t),
                }
            }
            _ => {
                return self.error(&[
                    "`dim`",
                    "`metric`",
                    "`contractible`",
                    "`top_cohomology_nonzero`",
                    "`codim1_cohomology_nonzero`",
                ])
            }
        };
        Ok(entry)
    }

    fn algebra(&mut self) -> PResult<StatementKind> {
        self.expect_word("algebra")?;
        let id = self.ident()?;
        self.expect_punct("=")?;
        let head = match &self.peek().tok {
            Tok::Word(w) => w.clone(),
            _ => String::new(),
        };
        let expr = match head.as_str() {
            "C" => {
                self.bump();
                self.expect_punct("(")?;
                let s = self.ident()?;
                self.expect_punct(")")?;
                AlgebraExpr::CofSpace(s)
            }
            "matrix" => {
                self.bump();
                self.expect_punct("(")?;
                let n = self.int(1, "matrix size >= 1")?;
                self.expect_punct(",")?;
                let of = self.ident()?;
                self.expect_punct(")")?;
                AlgebraExpr::Matrix { n, of }
            }
            "sum" => {
                self.bump();
                self.expect_punct("(")?;
                let a = self.ident()?;
                self.expect_punct(",")?;
                let b = self.ident()?;
                self.expect_punct(")")?;
                AlgebraExpr::Sum(a, b)
            }
            "stabilize" => {
                self.bump();
                self.expect_punct("(")?;
                let a = self.ident()?;
                self.expect_punct(")")?;
                AlgebraExpr::Stabilize(a)
            }
            "limit" => {
                self.bump();
                self.expect_punct("(")?;
                let parts = self.ident_list()?;
                self.expect_punct(")")?;
                let mut liminf = Vec::new();
                if self.at_word("liminf") {
                    self.bump();
                    loop {
                        let k = self.rank(&[RankKind::Tsr, RankKind::Csr, RankKind::Gsr])?;
                        self.expect_punct("=")?;
                        liminf.push((k, self.value()?));
                        if self.at_punct(",") {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                }
                AlgebraExpr::Limit { parts, liminf }
            }
            "tensor_ext" => {
                self.bump();
                self.expect_punct("(")?;
                let extensions = self.ident_list()?;
                self.expect_punct(")")?;
                let mut times = None;
                if self.at_word("times") {
                    self.bump();
                    self.expect_word("C")?;
                    self.expect_punct("(")?;
                    times = Some(self.ident()?);
                    self.expect_punct(")")?;
                }
                AlgebraExpr::TensorExt { extensions, times }
            }
            "abstract" => {
                self.bump();
                AlgebraExpr::Abstract
            }
            name if CatalogEntry::is_catalog_name(name) => {
                self.bump();
                let arg = if CatalogEntry::takes_argument(name) {
                    Some(self.paren_int(0, "integer")?)
                } else {
                    None
                };
                let arg_span = self.prev_span();
                match CatalogEntry::from_parts(name, arg) {
                    Some(entry) => AlgebraExpr::Catalog(entry),
                    None => {
                        return Err(ParseError {
                            span: arg_span,
                            expected: vec![CatalogEntry::argument_requirement(name).to_string()],
                            found: format!("`{}`", arg.unwrap_or_default()),
                        })
                    }
                }
            }
            _ => {
                return self.error(&[
                    "`C`",
                    "`matrix`",
                    "`sum`",
                    "`stabilize`",
                    "`limit`",
                    "`tensor_ext`",
                    "`abstract`",
                    "catalog name",
                ])
            }
        };
        let flags = if self.at_punct("{") { self.block(Self::flag_entry)? } else { Vec::new() };
        Ok(StatementKind::Algebra { id, expr, flags })
    }

    fn flag_entry(&mut self) -> PResult<FlagEntry> {
        let key = match &self.peek().tok {
            Tok::Word(w) => w.clone(),
            _ => String::new(),
        };
        if key == "cstar" || key == "commutative" {
            self.bump();
            self.expect_punct("=")?;
            let b = self.boolean()?;
            return Ok(if key == "cstar" { FlagEntry::Cstar(b) } else { FlagEntry::Commutative(b) });
        }
        if let Some(flag) = Flag::from_key(&key) {
            self.bump();
            self.expect_punct("=")?;
            return Ok(FlagEntry::State(flag, self.tri()?));
        }
        let mut keys = vec!["`cstar`".to_string(), "`commutative`".to_string()];
        keys.extend(Flag::ALL.iter().map(|f| format!("`{}`", f.key())));
        let keys: Vec<&str> = keys.iter().map(String::as_str).collect();
        self.error(&keys)
    }

    fn morphism(&mut self) -> PResult<StatementKind> {
        self.expect_word("morphism")?;
        let id = self.ident()?;
        self.expect_punct(":")?;
        let from = self.ident()?;
        self.expect_punct("->")?;
        let to = self.ident()?;
        self.expect_punct("[")?;
        let mut attrs = Vec::new();
        loop {
            let attr = match &self.peek().tok {
                Tok::Word(w) => MorphismAttr::from_keyword(w),
                _ => None,
            };
            match attr {
                Some(a) => {
                    self.bump();
                    attrs.push(a);
                }
                None => {
                    let names: Vec<String> = MorphismAttr::ALL.iter().map(|a| format!("`{}`", a.keyword())).collect();
                    let names: Vec<&str> = names.iter().map(String::as_str).collect();
                    return self.error(&names);
                }
            }
            if self.at_punct(",") {
                self.bump();
            } else {
                break;
            }
        }
        self.expect_punct("]")?;
        Ok(StatementKind::Morphism { id, from, to, attrs })
    }

    fn extension(&mut self) -> PResult<StatementKind> {
        self.expect_word("extension")?;
        let id = self.ident()?;
        self.expect_punct(":")?;
        let ideal = self.ident()?;
        self.expect_punct("->")?;
        let middle = self.ident()?;
        self.expect_punct("->")?;
        let quotient = self.ident()?;
        let mut approx_identity = false;
        if self.at_punct("[") {
            self.bump();
            self.expect_word("approx_identity")?;
            self.expect_punct("]")?;
            approx_identity = true;
        }
        Ok(StatementKind::Extension { id, ideal, middle, quotient, approx_identity })
    }

    fn claim(&mut self) -> PResult<RankClaim> {
        let rank = self.rank(&RankKind::ALL)?;
        self.expect_punct("(")?;
        let algebra = self.ident()?;
        self.expect_punct(")")?;
        let relation = match &self.peek().tok {
            Tok::Punct("==") => Relation::Eq,
            Tok::Punct("<=") => Relation::Le,
            Tok::Punct(">=") => Relation::Ge,
            _ => return self.error(&["`==`", "`<=`", "`>=`"]),
        };
        self.bump();
        let value = self.value()?;
        Ok(RankClaim { rank, algebra, relation, value })
    }
}
