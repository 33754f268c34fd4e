//! The `stablerank` command line: argument parsing and every subcommand.
//!
//! [`run`] returns the exit code and both output streams instead of printing,
//! so tests can drive the tool in-process.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;

use stablerank_core::catalog::CatalogEntry;
use stablerank_core::dsl;
use stablerank_core::engine::{explain, AssertionResult, NoDerivation, Target};
use stablerank_core::model::Diagnostic;
use stablerank_core::oracle::{self, LoopSamples};
use stablerank_core::rules::{OPEN_PROBLEMS, RuleDescriptor};
use stablerank_core::topology;
use stablerank_core::{
    build_model, check_assertions, instantiate_rules, propagate_with, refute, rule_catalog, validate, ConstraintSet,
    Contradiction, EngineConfig, ExtNat, Model, RankInterval, RankKind, RankState, Side, TraceStep, Verdict,
    MAX_FINITE,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "stablerank", version, about = "Infer stable ranks of Banach and C*-algebras")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Copy)]
pub struct EngineFlags {
    /// Clamp finite lower bounds to at most this value.
    #[arg(long, value_name = "N", default_value_t = MAX_FINITE, value_parser = clap::value_parser!(u32).range(1..))]
    pub max_finite: u32,
    /// Shuffle the initial worklist (inference) or pick the random models (selftest).
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
}

impl EngineFlags {
    fn config(&self) -> EngineConfig {
        EngineConfig { max_finite: self.max_finite, shuffle_seed: self.seed }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Propagate a model and print the rank table.
    Infer {
        path: PathBuf,
        #[arg(long)]
        json: bool,
        /// Print every propagation step.
        #[arg(long)]
        trace: bool,
        #[command(flatten)]
        engine: EngineFlags,
    },
    /// Evaluate the model's `assert` statements.
    Check {
        path: PathBuf,
        #[command(flatten)]
        engine: EngineFlags,
    },
    /// Show the derivation of both bounds of one rank.
    Explain {
        path: PathBuf,
        algebra: String,
        rank: String,
        #[command(flatten)]
        engine: EngineFlags,
    },
    /// Print reference tables.
    Catalog {
        /// Inclusive degree range, e.g. `1..20`.
        #[arg(long, value_name = "A..B", group = "table")]
        spheres: Option<String>,
        #[arg(long, group = "table")]
        rules: bool,
        #[arg(long, group = "table")]
        named: bool,
    },
    /// Run the oracle soundness check, sphere cross-check and winding witness.
    Selftest {
        /// Number of random models for the soundness check.
        #[arg(long, default_value_t = 100)]
        models: u64,
        #[arg(long, default_value_t = 6)]
        cap: u32,
        #[arg(long, value_name = "N")]
        seed: Option<u64>,
    },
    /// Reprint a model in canonical layout.
    Fmt { path: PathBuf },
}

/// Exit code and captured output of one invocation.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn ok(stdout: String) -> Outcome {
        Outcome { code: EXIT_OK, stdout, stderr: String::new() }
    }

    fn usage(message: impl std::fmt::Display) -> Outcome {
        Outcome { code: EXIT_USAGE, stdout: String::new(), stderr: format!("error: {message}\n") }
    }
}

pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(cli.command),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                Outcome { code, stdout: String::new(), stderr: text }
            } else {
                Outcome { code, stdout: text, stderr: String::new() }
            }
        }
    }
}

pub fn execute(command: Command) -> Outcome {
    match command {
        Command::Infer { path, json, trace, engine } => cmd_infer(&path, json, trace, engine.config()),
        Command::Check { path, engine } => cmd_check(&path, engine.config()),
        Command::Explain { path, algebra, rank, engine } => cmd_explain(&path, &algebra, &rank, engine.config()),
        Command::Catalog { spheres, rules, named } => cmd_catalog(spheres.as_deref(), rules, named),
        Command::Selftest { models, cap, seed } => cmd_selftest(models, cap, seed.unwrap_or(0)),
        Command::Fmt { path } => cmd_fmt(&path),
    }
}

struct Loaded {
    model: Model,
    constraints: ConstraintSet,
    diagnostics: Vec<Diagnostic>,
}

fn load(path: &Path) -> Result<Loaded, Outcome> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Outcome::usage(format_args!("cannot read {}: {e}", path.display())))?;
    let statements = dsl::parse(&text).map_err(|e| Outcome::usage(format_args!("{}:{e}", path.display())))?;
    let model = build_model(&statements).map_err(|e| Outcome::usage(format_args!("{}: {e}", path.display())))?;
    let constraints = instantiate_rules(&model);
    let diagnostics = validate(&model);
    Ok(Loaded { model, constraints, diagnostics })
}

fn diagnostics_text(diags: &[Diagnostic]) -> String {
    diags.iter().map(|d| format!("{d}\n")).collect()
}

pub fn status(interval: RankInterval) -> &'static str {
    if interval.is_exact() {
        "exact"
    } else if interval.is_top() {
        "unknown"
    } else {
        "bounded"
    }
}

/// `T: bsr 2 2 exact | tsr 2 2 exact | ...`
pub fn table_row(m: &Model, st: &RankState, algebra: usize) -> String {
    let cells: Vec<String> = RankKind::ALL
        .iter()
        .map(|&k| {
            let i = st.interval(algebra, k);
            format!("{k} {} {} {}", i.lo(), i.hi(), status(i))
        })
        .collect();
    format!("{}: {}", m.algebras[algebra].id, cells.join(" | "))
}

fn target_side(t: &Target) -> Option<Side> {
    match t {
        Target::Rank(_, side) => Some(*side),
        Target::Flag(_) => None,
    }
}

fn trace_line(m: &Model, i: usize, s: &TraceStep) -> String {
    let side = target_side(&s.target).map(|x| format!(" {x}")).unwrap_or_default();
    let premises = if s.premises.is_empty() {
        String::new()
    } else {
        let p: Vec<String> = s.premises.iter().map(|p| format!("#{p}")).collect();
        format!(" from {}", p.join(", "))
    };
    format!("#{i} {}{side}: {} -> {} by {}{premises} ({})", s.target.name(m), s.old, s.new, s.rule_id, s.citation)
}

fn contradiction_text(m: &Model, c: &Contradiction) -> String {
    let mut out = format!("contradiction: {}\n", c.describe(m));
    for (i, s) in c.trace.iter().enumerate() {
        let _ = writeln!(out, "  {}", trace_line(m, i, s));
    }
    out
}

#[derive(Serialize)]
pub struct RankRecord {
    pub lo: ExtNat,
    pub hi: ExtNat,
    pub status: &'static str,
    #[serde(rename = "loStep")]
    pub lo_step: Option<usize>,
    #[serde(rename = "hiStep")]
    pub hi_step: Option<usize>,
}

#[derive(Serialize)]
pub struct OutputRecord {
    pub id: String,
    pub ranks: std::collections::BTreeMap<&'static str, RankRecord>,
    pub flags: std::collections::BTreeMap<&'static str, &'static str>,
}

#[derive(Serialize)]
struct TraceRecord {
    step: usize,
    #[serde(rename = "ruleId")]
    rule_id: &'static str,
    citation: &'static str,
    variable: String,
    side: Option<&'static str>,
    old: String,
    new: String,
    premises: Vec<usize>,
    constraint: usize,
}

#[derive(Serialize)]
struct DiagnosticRecord {
    severity: &'static str,
    message: String,
    line: Option<u32>,
    column: Option<u32>,
}

#[derive(Serialize)]
struct ContradictionRecord {
    variable: String,
    existing: String,
    incoming: String,
    #[serde(rename = "ruleId")]
    rule_id: &'static str,
    citation: &'static str,
    constraints: Vec<usize>,
}

#[derive(Serialize)]
struct Report {
    algebras: Vec<OutputRecord>,
    trace: Vec<TraceRecord>,
    diagnostics: Vec<DiagnosticRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    contradiction: Option<ContradictionRecord>,
}

fn tri_name(t: stablerank_core::Tri) -> &'static str {
    match t {
        stablerank_core::Tri::True => "true",
        stablerank_core::Tri::False => "false",
        stablerank_core::Tri::Unknown => "unknown",
    }
}

pub fn output_record(m: &Model, st: &RankState, algebra: usize) -> OutputRecord {
    let ranks = RankKind::ALL
        .iter()
        .map(|&k| {
            let i = st.interval(algebra, k);
            let v = stablerank_core::rules::RankVar::new(algebra, k);
            let rec = RankRecord {
                lo: i.lo(),
                hi: i.hi(),
                status: status(i),
                lo_step: st.setter(Target::Rank(v, Side::Lo)),
                hi_step: st.setter(Target::Rank(v, Side::Hi)),
            };
            (k.name(), rec)
        })
        .collect();
    let flags = stablerank_core::Flag::ALL.iter().map(|&f| (f.key(), tri_name(st.flag(algebra, f)))).collect();
    OutputRecord { id: m.algebras[algebra].id.clone(), ranks, flags }
}

fn trace_records(m: &Model, trace: &[TraceStep]) -> Vec<TraceRecord> {
    trace
        .iter()
        .enumerate()
        .map(|(i, s)| TraceRecord {
            step: i,
            rule_id: s.rule_id,
            citation: s.citation,
            variable: s.target.name(m),
            side: target_side(&s.target).map(|x| if x == Side::Lo { "lo" } else { "hi" }),
            old: s.old.to_string(),
            new: s.new.to_string(),
            premises: s.premises.clone(),
            constraint: s.constraint,
        })
        .collect()
}

fn diagnostic_records(diags: &[Diagnostic]) -> Vec<DiagnosticRecord> {
    diags
        .iter()
        .map(|d| DiagnosticRecord {
            severity: match d.severity {
                stablerank_core::model::Severity::Note => "note",
                stablerank_core::model::Severity::Warning => "warning",
            },
            message: d.message.clone(),
            line: d.span.map(|s| s.line),
            column: d.span.map(|s| s.column),
        })
        .collect()
}

pub fn cmd_infer(path: &Path, json: bool, trace: bool, config: EngineConfig) -> Outcome {
    let loaded = match load(path) {
        Ok(l) => l,
        Err(o) => return o,
    };
    let m = &loaded.model;
    let result = propagate_with(&loaded.constraints, &config);
    if json {
        let report = match &result {
            Ok(st) => Report {
                algebras: m.reported_algebras().into_iter().map(|a| output_record(m, st, a)).collect(),
                trace: trace_records(m, &st.trace),
                diagnostics: diagnostic_records(&loaded.diagnostics),
                contradiction: None,
            },
            Err(c) => Report {
                algebras: Vec::new(),
                trace: trace_records(m, &c.trace),
                diagnostics: diagnostic_records(&loaded.diagnostics),
                contradiction: Some(ContradictionRecord {
                    variable: c.subject.name(m),
                    existing: c.existing.to_string(),
                    incoming: c.incoming.to_string(),
                    rule_id: c.rule_id,
                    citation: c.citation,
                    constraints: c.constraints.clone(),
                }),
            },
        };
        let mut stdout = serde_json::to_string_pretty(&report).expect("report serializes");
        stdout.push('\n');
        let code = if result.is_ok() { EXIT_OK } else { EXIT_FAILURE };
        return Outcome { code, stdout, stderr: String::new() };
    }
    let mut stderr = diagnostics_text(&loaded.diagnostics);
    match result {
        Ok(st) => {
            let mut stdout = String::new();
            for a in m.reported_algebras() {
                let _ = writeln!(stdout, "{}", table_row(m, &st, a));
            }
            if trace {
                stdout.push_str("trace:\n");
                for (i, s) in st.trace.iter().enumerate() {
                    let _ = writeln!(stdout, "  {}", trace_line(m, i, s));
                }
            }
            Outcome { code: EXIT_OK, stdout, stderr }
        }
        Err(c) => {
            stderr.push_str(&contradiction_text(m, &c));
            Outcome { code: EXIT_FAILURE, stdout: String::new(), stderr }
        }
    }
}

fn claim_text(m: &Model, index: usize) -> String {
    let a = &m.assertions[index];
    format!("{}({}) {} {}", a.rank, m.algebras[a.algebra].id, a.relation.symbol(), a.value)
}

pub fn cmd_check(path: &Path, config: EngineConfig) -> Outcome {
    let loaded = match load(path) {
        Ok(l) => l,
        Err(o) => return o,
    };
    let m = &loaded.model;
    let stderr = diagnostics_text(&loaded.diagnostics);
    let st = match propagate_with(&loaded.constraints, &config) {
        Ok(st) => st,
        Err(c) => {
            return Outcome { code: EXIT_FAILURE, stdout: contradiction_text(m, &c), stderr };
        }
    };
    let mut stdout = String::new();
    let mut failed = false;
    for AssertionResult { index, interval, verdict } in check_assertions(m, &st) {
        let _ = writeln!(stdout, "{verdict} {}  (derived {interval})", claim_text(m, index));
        if verdict == Verdict::Fail {
            failed = true;
            if let Err(c) = refute(&loaded.constraints, m, index, &config) {
                for line in contradiction_text(m, &c).lines() {
                    let _ = writeln!(stdout, "  {line}");
                }
            }
        }
    }
    Outcome { code: if failed { EXIT_FAILURE } else { EXIT_OK }, stdout, stderr }
}

pub fn cmd_explain(path: &Path, algebra: &str, rank: &str, config: EngineConfig) -> Outcome {
    let loaded = match load(path) {
        Ok(l) => l,
        Err(o) => return o,
    };
    let m = &loaded.model;
    let Some(a) = m.algebra_id(algebra) else {
        return Outcome::usage(format_args!("unknown algebra `{algebra}`"));
    };
    let kind: RankKind = match rank.parse() {
        Ok(k) => k,
        Err(_) => return Outcome::usage(format_args!("unknown rank `{rank}`; expected bsr, tsr, csr or gsr")),
    };
    let st = match propagate_with(&loaded.constraints, &config) {
        Ok(st) => st,
        Err(c) => {
            return Outcome { code: EXIT_FAILURE, stdout: String::new(), stderr: contradiction_text(m, &c) };
        }
    };
    let mut stdout = format!("{kind}({algebra}) = {}\n", st.interval(a, kind));
    for side in [Side::Lo, Side::Hi] {
        match explain(&st, &loaded.constraints, m, a, kind, side) {
            Ok(tree) => {
                let _ = writeln!(stdout, "{side}:");
                for line in tree.render(m).lines() {
                    let _ = writeln!(stdout, "  {line}");
                }
            }
            Err(NoDerivation { .. }) => {
                let default = if side == Side::Lo { "1" } else { "inf" };
                let _ = writeln!(stdout, "{side}: default bound {default}, nothing derived it");
            }
        }
    }
    Outcome { code: EXIT_OK, stdout, stderr: diagnostics_text(&loaded.diagnostics) }
}

/// Parses an inclusive `A..B` range with `1 <= A <= B`.
pub fn parse_range(text: &str) -> Result<(u32, u32), String> {
    let (a, b) = text.split_once("..").ok_or_else(|| format!("malformed range `{text}`; expected A..B"))?;
    let parse = |s: &str| s.trim().parse::<u32>().map_err(|_| format!("malformed range `{text}`; expected A..B"));
    let (a, b) = (parse(a)?, parse(b)?);
    if a == 0 || a > b {
        return Err(format!("empty or invalid range `{text}`; need 1 <= A <= B"));
    }
    Ok((a, b))
}

fn show(v: Option<ExtNat>) -> String {
    v.map(|v| v.to_string()).unwrap_or_else(|| "unknown".to_string())
}

fn interval_short(i: RankInterval) -> String {
    if i.is_exact() {
        i.lo().to_string()
    } else {
        format!("[{},{}]", i.lo(), i.hi())
    }
}

fn named_entry(entry: CatalogEntry) -> String {
    let text = format!("algebra X = {entry}");
    let statements = dsl::parse(&text).expect("catalog sample parses");
    let m = build_model(&statements).expect("catalog sample builds");
    let cs = instantiate_rules(&m);
    let a = m.algebra_id("X").expect("declared");
    let mut out = match propagate_with(&cs, &EngineConfig::default()) {
        Ok(st) => {
            let cells: Vec<String> =
                RankKind::ALL.iter().map(|&k| format!("{k}={}", interval_short(st.interval(a, k)))).collect();
            format!("{entry}: {}\n", cells.join(" "))
        }
        Err(c) => format!("{entry}: {}\n", contradiction_text(&m, &c).trim_end()),
    };
    let exp = entry.expand("X");
    for f in &exp.facts {
        let _ = writeln!(out, "  {} {} {}  ({})", f.rank, f.relation.symbol(), f.value, f.citation);
    }
    for f in &exp.flags {
        let _ = writeln!(out, "  {} = {}  ({})", f.flag, f.value, f.citation);
    }
    if let Some(c) = entry.structure_citation() {
        let _ = writeln!(out, "  structure  ({c})");
    }
    out
}

pub fn cmd_catalog(spheres: Option<&str>, rules: bool, named: bool) -> Outcome {
    if let Some(range) = spheres {
        let (a, b) = match parse_range(range) {
            Ok(r) => r,
            Err(e) => return Outcome::usage(e),
        };
        let mut out = String::from("d csr gsr\n");
        for d in a..=b {
            let _ = writeln!(out, "{d} {} {}", topology::csr_sphere(d), show(topology::try_gsr_sphere_via_table(d)));
        }
        return Outcome::ok(out);
    }
    if rules {
        let mut out = String::new();
        for RuleDescriptor { id, statement, citation, applicability } in rule_catalog() {
            let _ = writeln!(out, "{id}: {statement}  [{applicability}]  ({citation})");
        }
        for (name, note) in OPEN_PROBLEMS {
            let _ = writeln!(out, "open: {name}: {note}");
        }
        return Outcome::ok(out);
    }
    if named {
        return Outcome::ok(CatalogEntry::samples().into_iter().map(named_entry).collect());
    }
    Outcome::usage("catalog needs one of --spheres A..B, --rules, --named")
}

pub fn cmd_selftest(models: u64, cap: u32, seed: u64) -> Outcome {
    let mut out = String::new();
    let mut ok = true;

    let mut violations = 0usize;
    let mut checked = 0usize;
    let mut errors = Vec::new();
    for s in seed..seed + models {
        let m = oracle::random_model(s);
        match oracle::soundness_check(&m, cap) {
            Ok(r) => {
                violations += r.violations.len();
                checked += r.excluded_checked;
            }
            Err(e) => errors.push(format!("seed {s}: {e}")),
        }
    }
    let sound = violations == 0 && errors.is_empty();
    ok &= sound;
    let _ = writeln!(
        out,
        "{} soundness: {models} models from seed {seed}, cap {cap}, {checked} excluded values confirmed, {violations} violations",
        if sound { "PASS" } else { "FAIL" }
    );
    for e in errors {
        let _ = writeln!(out, "  {e}");
    }

    let report = oracle::sphere_crosscheck(200);
    ok &= report.passed();
    let _ = writeln!(
        out,
        "{} sphere cross-check: d = 1..200{}",
        if report.passed() { "PASS" } else { "FAIL" },
        report.first_mismatch.map(|d| format!(", first mismatch at d = {d}")).unwrap_or_default()
    );

    let winding = winding_witness();
    ok &= winding.is_ok();
    match winding {
        Ok(()) => {
            let _ = writeln!(out, "PASS winding: z^k has winding k for k = -3..3 at 1024 samples, products add");
        }
        Err(e) => {
            let _ = writeln!(out, "FAIL winding: {e}");
        }
    }

    Outcome { code: if ok { EXIT_OK } else { EXIT_FAILURE }, stdout: out, stderr: String::new() }
}

fn winding_witness() -> Result<(), String> {
    const N: usize = 1024;
    let wind = |l: &LoopSamples| oracle::winding_number(l).map_err(|e| e.to_string());
    for k in -3i64..=3 {
        let w = wind(&oracle::power_loop(k, N))?;
        if w != k {
            return Err(format!("z^{k} gave {w}"));
        }
    }
    for j in -2i64..=2 {
        for k in -2i64..=2 {
            let p = oracle::power_loop(j, N).product(&oracle::power_loop(k, N));
            let w = wind(&p)?;
            if w != j + k {
                return Err(format!("z^{j} * z^{k} gave {w}"));
            }
        }
    }
    let scaled = oracle::power_loop(2, N).scale(Complex64::new(-3.0, 0.5));
    if wind(&scaled)? != 2 {
        return Err("scaling changed the winding number".into());
    }
    Ok(())
}

pub fn cmd_fmt(path: &Path) -> Outcome {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return Outcome::usage(format_args!("cannot read {}: {e}", path.display())),
    };
    match dsl::parse(&text) {
        Ok(statements) => Outcome::ok(dsl::format(&statements)),
        Err(e) => Outcome::usage(format_args!("{}:{e}", path.display())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("1..8"), Ok((1, 8)));
        assert_eq!(parse_range(" 3 .. 3"), Ok((3, 3)));
        for bad in ["", "1", "1..", "..4", "0..3", "5..2", "a..b", "1...3"] {
            assert!(parse_range(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn status_names() {
        let two = ExtNat::Fin(2);
        assert_eq!(status(RankInterval::exact(two)), "exact");
        assert_eq!(status(RankInterval::at_least(two)), "bounded");
        assert_eq!(status(RankInterval::at_least(ExtNat::Fin(1))), "unknown");
        assert_eq!(status(RankInterval::exact(ExtNat::Inf)), "exact");
    }
}
