//! Plain-text run configuration.
//!
//! ```text
//! # comments run to end of line
//! [problem]
//! dim = 1
//! t0 = 0
//! t1 = 3
//! h = 1
//! lagrangian = "(1 - x1)*dx1^2 - (1 + y1)*dy1^2 + dx1*dy1"
//! history = -1, 0, "0"        # start, end, one expression per component
//! terminal = 0
//!
//! [candidate]
//! segment = 0, 3, "0"         # repeat for each piece
//!
//! [analysis]
//! radii = 0.25, 0.5, 1, 2
//! seed = 7
//! ```
//!
//! Every `[analysis]` key is optional. [`RunConfig::emit`] writes all keys
//! with defaults filled, and parsing its output gives back an equal config.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::AnalysisConfig;
use crate::error::{Error, Result};
use crate::expr::parse_lagrangian;
use crate::problem::{CandidateExtremal, DelayProblem, HistorySpec};
use crate::quadrature::{BREAK_TOL, DEFAULT_ORDER};
use crate::trajectory::Trajectory;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpec {
    pub start: f64,
    pub end: f64,
    pub exprs: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSection {
    pub dim: usize,
    pub t0: f64,
    pub t1: f64,
    pub h: f64,
    pub lagrangian: String,
    pub history: Vec<SegmentSpec>,
    pub terminal: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub problem: ProblemSection,
    /// Candidate pieces on `[t0, t1]`, or on `[t0 - h, t1]` including the history.
    pub candidate: Vec<SegmentSpec>,
    pub quad_order: usize,
    pub analysis: AnalysisConfig,
}

#[derive(Clone, Debug)]
enum Item {
    Str(String),
    Bare(String),
}

#[derive(Clone, Debug)]
struct Value {
    line: usize,
    items: Vec<(usize, Item)>,
}

fn err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        column,
        message: message.into(),
    }
}

/// Splits `raw` (starting at 1-based column `col0`) into comma-separated items.
fn split_items(line: usize, raw: &str, col0: usize) -> Result<Vec<(usize, Item)>> {
    let chars: Vec<char> = raw.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    loop {
        while i < chars.len() && chars[i].is_whitespace() {
            i += 1;
        }
        let col = col0 + i;
        if i >= chars.len() {
            return Err(err(line, col, "expected a value"));
        }
        if chars[i] == '"' {
            let mut s = String::new();
            i += 1;
            loop {
                match chars.get(i) {
                    None => return Err(err(line, col, "unterminated string")),
                    Some('"') => break,
                    Some('\\') => match chars.get(i + 1) {
                        Some(c @ ('"' | '\\')) => {
                            s.push(*c);
                            i += 2;
                        }
                        _ => return Err(err(line, col0 + i, "invalid escape (use \\\" or \\\\)")),
                    },
                    Some(c) => {
                        s.push(*c);
                        i += 1;
                    }
                }
            }
            i += 1;
            out.push((col, Item::Str(s)));
        } else {
            let start = i;
            while i < chars.len() && chars[i] != ',' {
                i += 1;
            }
            let tok: String = chars[start..i].iter().collect::<String>().trim_end().to_string();
            if tok.is_empty() {
                return Err(err(line, col, "expected a value"));
            }
            if tok.contains('"') {
                return Err(err(line, col, "stray quote"));
            }
            out.push((col, Item::Bare(tok)));
        }
        while i < chars.len() && chars[i].is_whitespace() {
            i += 1;
        }
        match chars.get(i) {
            None => return Ok(out),
            Some(',') => i += 1,
            Some(_) => return Err(err(line, col0 + i, "expected `,` between values")),
        }
    }
}

/// Drops a `#` comment, ignoring `#` inside quotes.
fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    let mut escaped = false;
    for (i, c) in line.char_indices() {
        match c {
            _ if escaped => escaped = false,
            '\\' if quoted => escaped = true,
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

const PROBLEM_KEYS: &[&str] = &["dim", "t0", "t1", "h", "lagrangian", "history", "terminal"];
const CANDIDATE_KEYS: &[&str] = &["segment"];
const ANALYSIS_KEYS: &[&str] = &[
    "quad_order",
    "euler_grid",
    "weierstrass_grid",
    "degeneracy_grid",
    "theorem_grid",
    "radii",
    "lambdas",
    "scales",
    "tol_euler",
    "tol_w",
    "tol_deg",
    "tol_eq",
    "sweep_levels",
    "sweep_ratio",
    "fit_extra_terms",
    "spot_checks",
    "seed",
];
const REPEATED: &[&str] = &["history", "segment"];

#[derive(Default)]
struct Raw {
    entries: Vec<(&'static str, &'static str, Value)>,
}

impl Raw {
    fn one(&self, section: &'static str, key: &'static str) -> Option<&Value> {
        self.entries.iter().find(|e| e.0 == section && e.1 == key).map(|e| &e.2)
    }

    fn all(&self, section: &'static str, key: &'static str) -> Vec<&Value> {
        self.entries
            .iter()
            .filter(|e| e.0 == section && e.1 == key)
            .map(|e| &e.2)
            .collect()
    }

    fn need(&self, section: &'static str, key: &'static str) -> Result<&Value> {
        self.one(section, key).ok_or(Error::MissingKey { section, key })
    }
}

fn parse_raw(text: &str) -> Result<Raw> {
    let mut raw = Raw::default();
    let mut section: Option<&'static str> = None;
    for (n, full) in text.lines().enumerate() {
        let line = n + 1;
        let body = strip_comment(full);
        let indent = body.len() - body.trim_start().len();
        let trimmed = body.trim();
        if trimmed.is_empty() {
            continue;
        }
        let col = full[..indent].chars().count() + 1;
        if let Some(rest) = trimmed.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| err(line, col, "section header must end with `]`"))?
                .trim();
            section = Some(match name {
                "problem" => "problem",
                "candidate" => "candidate",
                "analysis" => "analysis",
                other => return Err(err(line, col + 1, format!("unknown section `{other}`"))),
            });
            if raw.entries.iter().any(|e| Some(e.0) == section) {
                return Err(err(line, col, format!("section [{name}] appears twice")));
            }
            continue;
        }
        let Some(sec) = section else {
            return Err(err(line, col, "key outside of any section"));
        };
        let eq = trimmed
            .find('=')
            .ok_or_else(|| err(line, col, "expected `key = value`"))?;
        let key_text = trimmed[..eq].trim();
        let allowed = match sec {
            "problem" => PROBLEM_KEYS,
            "candidate" => CANDIDATE_KEYS,
            _ => ANALYSIS_KEYS,
        };
        let key = *allowed
            .iter()
            .find(|k| **k == key_text)
            .ok_or_else(|| err(line, col, format!("unknown key `{key_text}` in [{sec}]")))?;
        if !REPEATED.contains(&key) && raw.one(sec, key).is_some() {
            return Err(err(line, col, format!("duplicate key `{key}`")));
        }
        let value_text = &trimmed[eq + 1..];
        let value_col = col + trimmed[..eq + 1].chars().count();
        let items = split_items(line, value_text, value_col)?;
        raw.entries.push((sec, key, Value { line, items }));
    }
    Ok(raw)
}

impl Value {
    fn single(&self) -> Result<(usize, &Item)> {
        match self.items.as_slice() {
            [(c, it)] => Ok((*c, it)),
            [_, (c, _), ..] => Err(err(self.line, *c, "expected a single value")),
            [] => unreachable!("split_items never yields an empty list"),
        }
    }

    fn f64_at(&self, idx: usize) -> Result<f64> {
        let (col, item) = &self.items[idx];
        match item {
            Item::Bare(s) => s
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(self.line, *col, format!("`{s}` is not a finite number"))),
            Item::Str(_) => Err(err(self.line, *col, "expected a number, found a string")),
        }
    }

    fn str_at(&self, idx: usize) -> Result<String> {
        let (col, item) = &self.items[idx];
        match item {
            Item::Str(s) => Ok(s.clone()),
            Item::Bare(_) => Err(err(self.line, *col, "expressions must be quoted")),
        }
    }

    fn f64(&self) -> Result<f64> {
        self.single()?;
        self.f64_at(0)
    }

    fn int<T: std::str::FromStr>(&self) -> Result<T> {
        let (col, item) = self.single()?;
        match item {
            Item::Bare(s) => s
                .parse::<T>()
                .map_err(|_| err(self.line, col, format!("`{s}` is not a nonnegative integer"))),
            Item::Str(_) => Err(err(self.line, col, "expected an integer, found a string")),
        }
    }

    fn string(&self) -> Result<String> {
        self.single()?;
        self.str_at(0)
    }

    fn f64_list(&self) -> Result<Vec<f64>> {
        (0..self.items.len()).map(|i| self.f64_at(i)).collect()
    }

    fn segment(&self, dim: usize) -> Result<SegmentSpec> {
        if self.items.len() != dim + 2 {
            let col = self.items.last().map_or(1, |i| i.0);
            return Err(err(
                self.line,
                col,
                format!("segment needs start, end and {dim} quoted expression(s)"),
            ));
        }
        Ok(SegmentSpec {
            start: self.f64_at(0)?,
            end: self.f64_at(1)?,
            exprs: (2..self.items.len()).map(|i| self.str_at(i)).collect::<Result<_>>()?,
        })
    }
}

impl RunConfig {
    /// Parses and validates a config, filling `[analysis]` defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let raw = parse_raw(text)?;
        let dim_v = raw.need("problem", "dim")?;
        let dim: usize = dim_v.int()?;
        if dim == 0 {
            return Err(err(dim_v.line, dim_v.items[0].0, "dim must be at least 1"));
        }
        for key in ["t0", "t1", "h", "lagrangian", "history", "terminal"] {
            raw.need("problem", key)?;
        }
        let terminal_v = raw.need("problem", "terminal")?;
        let terminal = terminal_v.f64_list()?;
        if terminal.len() != dim {
            return Err(err(
                terminal_v.line,
                terminal_v.items[0].0,
                format!("terminal needs {dim} value(s), found {}", terminal.len()),
            ));
        }
        let problem = ProblemSection {
            dim,
            t0: raw.need("problem", "t0")?.f64()?,
            t1: raw.need("problem", "t1")?.f64()?,
            h: raw.need("problem", "h")?.f64()?,
            lagrangian: raw.need("problem", "lagrangian")?.string()?,
            history: raw
                .all("problem", "history")
                .into_iter()
                .map(|v| v.segment(dim))
                .collect::<Result<_>>()?,
            terminal,
        };
        let candidate: Vec<SegmentSpec> = raw
            .all("candidate", "segment")
            .into_iter()
            .map(|v| v.segment(dim))
            .collect::<Result<_>>()?;
        if candidate.is_empty() {
            return Err(Error::MissingKey {
                section: "candidate",
                key: "segment",
            });
        }

        let mut a = AnalysisConfig::default();
        let get = |k: &'static str| raw.one("analysis", k);
        if let Some(v) = get("euler_grid") {
            a.euler_grid = v.int()?;
        }
        if let Some(v) = get("weierstrass_grid") {
            a.weierstrass_grid = v.int()?;
        }
        if let Some(v) = get("degeneracy_grid") {
            a.degeneracy_grid = v.int()?;
        }
        if let Some(v) = get("theorem_grid") {
            a.theorem_grid = v.int()?;
        }
        if let Some(v) = get("radii") {
            a.radii = v.f64_list()?;
        }
        if let Some(v) = get("lambdas") {
            a.lambdas = v.f64_list()?;
        }
        if let Some(v) = get("scales") {
            a.scales = v.f64_list()?;
        }
        for (k, slot) in [
            ("tol_euler", &mut a.tol_euler),
            ("tol_w", &mut a.tol_w),
            ("tol_deg", &mut a.tol_deg),
            ("tol_eq", &mut a.tol_eq),
            ("sweep_ratio", &mut a.sweep_ratio),
        ] {
            if let Some(v) = get(k) {
                *slot = v.f64()?;
            }
        }
        if let Some(v) = get("sweep_levels") {
            a.sweep_levels = v.int()?;
        }
        if let Some(v) = get("fit_extra_terms") {
            a.fit_extra_terms = v.int()?;
        }
        if let Some(v) = get("spot_checks") {
            a.spot_checks = v.int()?;
        }
        if let Some(v) = get("seed") {
            a.seed = v.int()?;
        }
        let quad_order = match get("quad_order") {
            Some(v) => v.int()?,
            None => DEFAULT_ORDER,
        };
        let cfg = RunConfig {
            problem,
            candidate,
            quad_order,
            analysis: a,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(e.to_string()))?;
        Self::parse(&text)
    }

    /// Semantic checks; building the problem catches the rest.
    pub fn validate(&self) -> Result<()> {
        self.analysis.validate()?;
        if !(1..=64).contains(&self.quad_order) {
            return Err(Error::Precondition("quad_order must lie in 1..=64".into()));
        }
        self.build().map(|_| ())
    }

    pub fn build(&self) -> Result<(DelayProblem, CandidateExtremal)> {
        let pr = &self.problem;
        let pieces = |segs: &[SegmentSpec]| -> Vec<(f64, f64, Vec<String>)> {
            segs.iter().map(|s| (s.start, s.end, s.exprs.clone())).collect()
        };
        let lag = parse_lagrangian(&pr.lagrangian, pr.dim)?;
        let phi = Trajectory::parse(pr.dim, &pieces(&pr.history))?;
        let hist = HistorySpec::new(phi, pr.terminal.clone())?;
        let p = DelayProblem::new(pr.t0, pr.t1, pr.h, lag, hist)?.with_quad_order(self.quad_order);
        let traj = Trajectory::parse(pr.dim, &pieces(&self.candidate))?;
        let start = traj.domain().0;
        let cand = if (start - pr.t0).abs() <= BREAK_TOL {
            CandidateExtremal::splice(&p, &traj)?
        } else if (start - (pr.t0 - pr.h)).abs() <= BREAK_TOL {
            CandidateExtremal::from_full(&p, traj)?
        } else {
            return Err(Error::InvalidTrajectory(format!(
                "candidate must start at t0 = {} or t0 - h = {}, found {start}",
                pr.t0,
                pr.t0 - pr.h
            )));
        };
        Ok((p, cand))
    }

    /// Canonical text with every key written out.
    pub fn emit(&self) -> String {
        fn quote(s: &str) -> String {
            format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
        }
        fn nums(v: &[f64]) -> String {
            v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
        }
        fn seg(s: &SegmentSpec) -> String {
            let exprs: Vec<String> = s.exprs.iter().map(|e| quote(e)).collect();
            format!("{}, {}, {}", s.start, s.end, exprs.join(", "))
        }
        let pr = &self.problem;
        let a = &self.analysis;
        let mut out = String::new();
        let _ = writeln!(out, "[problem]");
        let _ = writeln!(out, "dim = {}", pr.dim);
        let _ = writeln!(out, "t0 = {}", pr.t0);
        let _ = writeln!(out, "t1 = {}", pr.t1);
        let _ = writeln!(out, "h = {}", pr.h);
        let _ = writeln!(out, "lagrangian = {}", quote(&pr.lagrangian));
        for s in &pr.history {
            let _ = writeln!(out, "history = {}", seg(s));
        }
        let _ = writeln!(out, "terminal = {}", nums(&pr.terminal));
        let _ = writeln!(out, "\n[candidate]");
        for s in &self.candidate {
            let _ = writeln!(out, "segment = {}", seg(s));
        }
        let _ = writeln!(out, "\n[analysis]");
        let _ = writeln!(out, "quad_order = {}", self.quad_order);
        let _ = writeln!(out, "euler_grid = {}", a.euler_grid);
        let _ = writeln!(out, "weierstrass_grid = {}", a.weierstrass_grid);
        let _ = writeln!(out, "degeneracy_grid = {}", a.degeneracy_grid);
        let _ = writeln!(out, "theorem_grid = {}", a.theorem_grid);
        let _ = writeln!(out, "radii = {}", nums(&a.radii));
        let _ = writeln!(out, "lambdas = {}", nums(&a.lambdas));
        let _ = writeln!(out, "scales = {}", nums(&a.scales));
        let _ = writeln!(out, "tol_euler = {}", a.tol_euler);
        let _ = writeln!(out, "tol_w = {}", a.tol_w);
        let _ = writeln!(out, "tol_deg = {}", a.tol_deg);
        let _ = writeln!(out, "tol_eq = {}", a.tol_eq);
        let _ = writeln!(out, "sweep_levels = {}", a.sweep_levels);
        let _ = writeln!(out, "sweep_ratio = {}", a.sweep_ratio);
        let _ = writeln!(out, "fit_extra_terms = {}", a.fit_extra_terms);
        let _ = writeln!(out, "spot_checks = {}", a.spot_checks);
        let _ = writeln!(out, "seed = {}", a.seed);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
# delayed coupling example
[problem]
dim = 1
t0 = 0
t1 = 3
h = 1
lagrangian = "(1 - x1)*dx1^2 - (1 + y1)*dy1^2 + dx1*dy1"
history = -1, 0, "0"
terminal = 0

[candidate]
segment = 0, 3, "0"   # trailing comment
"#;

    #[test]
    fn parses_and_builds() {
        let c = RunConfig::parse(BASE).unwrap();
        assert_eq!(c.problem.h, 1.0);
        assert_eq!(c.candidate[0].exprs, vec!["0"]);
        assert_eq!(c.analysis, AnalysisConfig::default());
        let (p, cand) = c.build().unwrap();
        assert_eq!((p.t0(), p.t1(), p.h()), (0.0, 3.0, 1.0));
        assert_eq!(cand.traj().domain(), (-1.0, 3.0));
    }

    #[test]
    fn emit_round_trips() {
        let mut c = RunConfig::parse(BASE).unwrap();
        c.analysis.radii = vec![0.1, 1.0 / 3.0];
        c.analysis.seed = u64::MAX;
        c.problem.lagrangian = "dx1^2 + 0.1*sin(t)".into();
        let text = c.emit();
        let back = RunConfig::parse(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.emit(), text);
    }

    #[test]
    fn missing_h_names_the_field() {
        let e = RunConfig::parse(&BASE.replace("h = 1\n", "")).unwrap_err();
        assert_eq!(
            e,
            Error::MissingKey {
                section: "problem",
                key: "h"
            }
        );
        assert!(e.to_string().contains("`h`"));
    }

    #[test]
    fn rejects_delay_equal_to_horizon() {
        let e = RunConfig::parse(&BASE.replace("h = 1", "h = 3").replace("-1, 0", "-3, 0")).unwrap_err();
        assert!(matches!(e, Error::InvalidProblem(_)), "{e}");
    }

    #[test]
    fn parse_errors_carry_positions() {
        let cases = [
            ("t0 = 0", "t0 = zero", 5, 6),
            ("h = 1", "h = 1, 2", 7, 8),
            ("[candidate]", "[candidat]", 12, 2),
            ("segment = 0, 3, \"0\"", "segment = 0, 3, 0", 13, 17),
            ("dim = 1", "  dimm = 1", 4, 3),
            ("terminal = 0", "terminal = \"0", 10, 12),
        ];
        for (from, to, line, col) in cases {
            match RunConfig::parse(&BASE.replace(from, to)) {
                Err(Error::Config { line: l, column: c, .. }) => assert_eq!((l, c), (line, col), "{to}"),
                other => panic!("{to}: {other:?}"),
            }
        }
    }

    #[test]
    fn analysis_overrides_and_validation() {
        let c = RunConfig::parse(&format!("{BASE}\n[analysis]\nseed = 9\nscales = 1, 0.5\n")).unwrap();
        assert_eq!((c.analysis.seed, c.analysis.scales.clone()), (9, vec![1.0, 0.5]));
        assert!(RunConfig::parse(&format!("{BASE}\n[analysis]\ntol_w = -1\n")).is_err());
        assert!(RunConfig::parse(&format!("{BASE}\n[analysis]\nlambdas = 0.5, 1\n")).is_err());
        assert!(RunConfig::parse(&format!("{BASE}\n[analysis]\nseed = 1\nseed = 2\n")).is_err());
    }

    #[test]
    fn quoted_hash_is_not_a_comment() {
        let text = BASE.replace("\"0\"   # trailing", "\"0\" # a \"#\" trailing");
        assert!(RunConfig::parse(&text).is_ok());
        assert_eq!(strip_comment(r#"a = "x#y" # c"#), r#"a = "x#y" "#);
    }

    #[test]
    fn full_trajectory_candidate() {
        let c = RunConfig::parse(&BASE.replace("segment = 0, 3, \"0\"", "segment = -1, 3, \"0\"")).unwrap();
        assert!(c.build().is_ok());
        let bad = RunConfig::parse(&BASE.replace("segment = 0, 3, \"0\"", "segment = 0.5, 3, \"0\""));
        assert!(bad.is_err());
    }
}
