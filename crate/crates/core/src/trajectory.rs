//! Piecewise-smooth vector trajectories with explicit breakpoints.
//!
//! Each segment carries one expression in `t` per component together with
//! its symbolic time derivative, so values and one-sided slopes are exact.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Expr, Point, Symbols, Var};
use crate::quadrature::BREAK_TOL;

/// Side from which a one-sided quantity is taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Left => -1.0,
            Side::Right => 1.0,
        }
    }
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
        })
    }
}

impl std::str::FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "left" | "-" => Ok(Side::Left),
            "right" | "+" => Ok(Side::Right),
            other => Err(format!("unknown side `{other}` (expected left or right)")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Segment {
    start: f64,
    end: f64,
    value: Vec<Expr>,
    deriv: Vec<Expr>,
}

impl Segment {
    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn value_exprs(&self) -> &[Expr] {
        &self.value
    }

    fn eval(exprs: &[Expr], t: f64) -> Result<Vec<f64>> {
        let p = Point::time(t);
        exprs.iter().map(|e| Ok(e.eval(&p)?)).collect()
    }
}

/// Adds `slope * (t - anchor)` on `[start, end]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearPiece {
    pub start: f64,
    pub end: f64,
    pub slope: Vec<f64>,
    pub anchor: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    dim: usize,
    segments: Vec<Segment>,
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

impl Trajectory {
    /// Builds a trajectory from contiguous `(start, end, components)` pieces.
    ///
    /// Values must be continuous across breakpoints to `1e-12 (1 + |x|)`.
    pub fn from_exprs(dim: usize, pieces: Vec<(f64, f64, Vec<Expr>)>) -> Result<Self> {
        Self::with_continuity_tol(dim, pieces, 1e-12)
    }

    pub(crate) fn with_continuity_tol(dim: usize, pieces: Vec<(f64, f64, Vec<Expr>)>, tol: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidTrajectory("dimension must be at least 1".into()));
        }
        if pieces.is_empty() {
            return Err(Error::InvalidTrajectory("no segments".into()));
        }
        let mut segments = Vec::with_capacity(pieces.len());
        for (k, (start, end, value)) in pieces.into_iter().enumerate() {
            if !(start.is_finite() && end.is_finite() && start < end) {
                return Err(Error::InvalidTrajectory(format!(
                    "segment {k} has invalid bounds [{start}, {end}]"
                )));
            }
            if value.len() != dim {
                return Err(Error::InvalidTrajectory(format!(
                    "segment {k} has {} components, expected {dim}",
                    value.len()
                )));
            }
            if let Some(bad) = value.iter().find(|e| contains_non_time(e)) {
                return Err(Error::InvalidTrajectory(format!(
                    "segment {k} expression `{bad}` depends on something other than t"
                )));
            }
            let deriv = value
                .iter()
                .map(|e| e.differentiate(Var::T))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            segments.push(Segment {
                start,
                end,
                value,
                deriv,
            });
        }
        for w in 0..segments.len().saturating_sub(1) {
            let (l, r) = (&segments[w], &segments[w + 1]);
            if (l.end - r.start).abs() > BREAK_TOL {
                return Err(Error::InvalidTrajectory(format!(
                    "segments are not contiguous at {} / {}",
                    l.end, r.start
                )));
            }
        }
        for w in 1..segments.len() {
            let t = segments[w].start;
            segments[w - 1].end = t;
            let left = Segment::eval(&segments[w - 1].value, t)?;
            let right = Segment::eval(&segments[w].value, t)?;
            let gap = left.iter().zip(&right).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if gap > tol * (1.0 + norm_inf(&left)) {
                return Err(Error::InvalidTrajectory(format!(
                    "value jumps by {gap:e} at breakpoint t = {t}"
                )));
            }
        }
        for s in &segments {
            for t in [s.start, 0.5 * (s.start + s.end), s.end] {
                let v = Segment::eval(&s.value, t)?;
                let d = Segment::eval(&s.deriv, t)?;
                if v.iter().chain(&d).any(|x| !x.is_finite()) {
                    return Err(Error::InvalidTrajectory(format!(
                        "segment [{}, {}] is not finite at t = {t}",
                        s.start, s.end
                    )));
                }
            }
        }
        Ok(Trajectory { dim, segments })
    }

    /// Parses `(start, end, [component sources])` pieces.
    pub fn parse(dim: usize, pieces: &[(f64, f64, Vec<String>)]) -> Result<Self> {
        let parsed = pieces
            .iter()
            .map(|(a, b, srcs)| {
                let exprs = srcs
                    .iter()
                    .map(|s| Expr::parse(s, Symbols::Time))
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                Ok((*a, *b, exprs))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_exprs(dim, parsed)
    }

    pub fn constant(dim: usize, a: f64, b: f64, value: &[f64]) -> Result<Self> {
        assert_eq!(value.len(), dim);
        let exprs = value.iter().map(|&v| Expr::constant(v)).collect();
        Self::from_exprs(dim, vec![(a, b, exprs)])
    }

    pub fn zero(dim: usize, a: f64, b: f64) -> Result<Self> {
        Self::constant(dim, a, b, &vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.segments[0].start, self.segments[self.segments.len() - 1].end)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Interior breakpoints, strictly increasing.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.segments[1..].iter().map(|s| s.start).collect()
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        let (a, b) = self.domain();
        if !(t >= a - BREAK_TOL && t <= b + BREAK_TOL) {
            return Err(Error::OutOfDomain { t, a, b });
        }
        Ok(())
    }

    /// The segment supplying one-sided data at `t`.
    fn locate(&self, t: f64, side: Side) -> Result<&Segment> {
        self.check_domain(t)?;
        let (a, b) = self.domain();
        match side {
            Side::Right => {
                if t >= b - BREAK_TOL {
                    return Err(Error::OutOfDomain { t, a, b });
                }
                let i = self
                    .segments
                    .partition_point(|s| s.start <= t + BREAK_TOL)
                    .saturating_sub(1);
                Ok(&self.segments[i])
            }
            Side::Left => {
                if t <= a + BREAK_TOL {
                    return Err(Error::OutOfDomain { t, a, b });
                }
                let i = self
                    .segments
                    .partition_point(|s| s.end < t - BREAK_TOL)
                    .min(self.segments.len() - 1);
                Ok(&self.segments[i])
            }
        }
    }

    pub fn eval_value(&self, t: f64) -> Result<Vec<f64>> {
        self.check_domain(t)?;
        let (_, b) = self.domain();
        let side = if t >= b - BREAK_TOL { Side::Left } else { Side::Right };
        Segment::eval(&self.locate(t, side)?.value, t)
    }

    pub fn eval_deriv(&self, t: f64, side: Side) -> Result<Vec<f64>> {
        Segment::eval(&self.locate(t, side)?.deriv, t)
    }

    /// One-sided second derivative by a three-point stencil on the symbolic
    /// first derivative, never leaving the segment that owns `t` on `side`.
    pub fn eval_second_deriv(&self, t: f64, side: Side) -> Result<Vec<f64>> {
        let seg = self.locate(t, side)?;
        let len = seg.end - seg.start;
        let s = (len / 8.0).min(1e-4);
        if s < 1e-7 {
            return Err(Error::SegmentTooShort {
                start: seg.start,
                end: seg.end,
            });
        }
        let forward = match side {
            Side::Right => t + 2.0 * s <= seg.end + BREAK_TOL,
            Side::Left => t - 2.0 * s < seg.start - BREAK_TOL,
        };
        let dir = if forward { 1.0 } else { -1.0 };
        let f0 = Segment::eval(&seg.deriv, t)?;
        let f1 = Segment::eval(&seg.deriv, t + dir * s)?;
        let f2 = Segment::eval(&seg.deriv, t + dir * 2.0 * s)?;
        Ok((0..self.dim)
            .map(|i| dir * (-3.0 * f0[i] + 4.0 * f1[i] - f2[i]) / (2.0 * s))
            .collect())
    }

    /// Joins `self` (ending at `t`) and `next` (starting at `t`), keeping `t`
    /// as a breakpoint. The join must be continuous to `tol (1 + |x|)`.
    pub(crate) fn concat(&self, next: &Trajectory, tol: f64) -> Result<Trajectory> {
        if self.dim != next.dim {
            return Err(Error::InvalidTrajectory("dimension mismatch".into()));
        }
        let pieces = self
            .segments
            .iter()
            .chain(&next.segments)
            .map(|s| (s.start, s.end, s.value.clone()))
            .collect();
        Self::with_continuity_tol(self.dim, pieces, tol)
    }

    /// Returns `self + sum(pieces)`, splitting segments at every piece end.
    pub fn add_linear_pieces(&self, pieces: &[LinearPiece]) -> Result<Trajectory> {
        let (a, b) = self.domain();
        for p in pieces {
            if p.slope.len() != self.dim {
                return Err(Error::InvalidTrajectory("piece dimension mismatch".into()));
            }
            if !(p.start < p.end) || p.start < a - BREAK_TOL || p.end > b + BREAK_TOL {
                return Err(Error::InvalidTrajectory(format!(
                    "piece [{}, {}] is not inside [{a}, {b}]",
                    p.start, p.end
                )));
            }
        }
        let mut cuts: Vec<f64> = self.breakpoints();
        cuts.extend(pieces.iter().flat_map(|p| [p.start, p.end]));
        let plan = crate::quadrature::PanelPlan::new(a, b, &cuts);
        let mut out = Vec::new();
        for w in plan.bounds().windows(2) {
            let (u, v) = (w[0], w[1]);
            let mid = 0.5 * (u + v);
            let base = self.locate(mid, Side::Right)?;
            let value = (0..self.dim)
                .map(|i| {
                    pieces
                        .iter()
                        .filter(|p| p.start <= mid && mid <= p.end)
                        .fold(base.value[i].clone(), |acc, p| {
                            Expr::add(
                                acc,
                                Expr::mul(
                                    Expr::constant(p.slope[i]),
                                    Expr::sub(Expr::var(Var::T), Expr::constant(p.anchor)),
                                ),
                            )
                        })
                })
                .collect();
            out.push((u, v, value));
        }
        Self::from_exprs(self.dim, out)
    }
}

fn contains_non_time(e: &Expr) -> bool {
    match e {
        Expr::Const(_) => false,
        Expr::Var(v) => *v != Var::T,
        Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => contains_non_time(a),
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
            contains_non_time(a) || contains_non_time(b)
        }
    }
}
