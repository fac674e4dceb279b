//! The delay problem `S(x) = ∫_{t0}^{t1} L(t, x(t), x(t-h), x'(t), x'(t-h)) dt`
//! with a prescribed history on `[t0-h, t0]` and a fixed terminal value.
//!
//! `L` and all of its partials are taken to be identically zero for `t > t1`.
//! The convention is applied by gating on `t`, never by editing expressions.

use crate::error::{Error, Result};
use crate::expr::{Block, LagrangianExpr, Point};
use crate::quadrature::{GaussLegendre, BREAK_TOL};
use crate::trajectory::{Side, Trajectory};

/// History `phi` on `[t0-h, t0]` and terminal value `x(t1)`.
#[derive(Clone, Debug)]
pub struct HistorySpec {
    phi: Trajectory,
    terminal: Vec<f64>,
}

impl HistorySpec {
    pub fn new(phi: Trajectory, terminal: Vec<f64>) -> Result<Self> {
        if terminal.len() != phi.dim() {
            return Err(Error::InvalidProblem(format!(
                "terminal value has {} components, history has {}",
                terminal.len(),
                phi.dim()
            )));
        }
        if terminal.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidProblem("terminal value is not finite".into()));
        }
        Ok(HistorySpec { phi, terminal })
    }

    pub fn phi(&self) -> &Trajectory {
        &self.phi
    }

    pub fn terminal(&self) -> &[f64] {
        &self.terminal
    }
}

#[derive(Clone, Debug)]
pub struct DelayProblem {
    t0: f64,
    t1: f64,
    h: f64,
    lagrangian: LagrangianExpr,
    history: HistorySpec,
    quad: GaussLegendre,
}

/// The full argument tuple of `L` at one time and side.
///
/// When `active` is false the time lies beyond the horizon (or at `t1` from
/// the right) and every quantity built from this context is zero.
#[derive(Clone, Debug, PartialEq)]
pub struct ArgPoint {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
    pub active: bool,
}

impl ArgPoint {
    pub fn point(&self) -> Point<'_> {
        Point {
            t: self.t,
            x: &self.x,
            y: &self.y,
            dx: &self.dx,
            dy: &self.dy,
        }
    }

    /// Copy with `scale * xi` added to the velocity in `block` (`Dx` or `Dy`).
    pub fn shifted(&self, block: Block, xi: &[f64], scale: f64) -> ArgPoint {
        let mut out = self.clone();
        let target = match block {
            Block::Dx => &mut out.dx,
            Block::Dy => &mut out.dy,
            Block::X => &mut out.x,
            Block::Y => &mut out.y,
        };
        for (v, s) in target.iter_mut().zip(xi) {
            *v += scale * s;
        }
        out
    }
}

impl DelayProblem {
    pub fn new(t0: f64, t1: f64, h: f64, lagrangian: LagrangianExpr, history: HistorySpec) -> Result<Self> {
        if !(t0.is_finite() && t1.is_finite() && h.is_finite()) {
            return Err(Error::InvalidProblem("t0, t1 and h must be finite".into()));
        }
        if !(h > 0.0) {
            return Err(Error::InvalidProblem(format!("delay h = {h} must be positive")));
        }
        if !(t1 - t0 > h) {
            return Err(Error::InvalidProblem(format!(
                "horizon t1 - t0 = {} must exceed the delay h = {h}",
                t1 - t0
            )));
        }
        if lagrangian.dim() != history.phi.dim() {
            return Err(Error::InvalidProblem(format!(
                "Lagrangian dimension {} differs from history dimension {}",
                lagrangian.dim(),
                history.phi.dim()
            )));
        }
        let (a, b) = history.phi.domain();
        if (a - (t0 - h)).abs() > BREAK_TOL * (1.0 + a.abs()) || (b - t0).abs() > BREAK_TOL * (1.0 + b.abs()) {
            return Err(Error::InvalidProblem(format!(
                "history is defined on [{a}, {b}], expected [{}, {t0}]",
                t0 - h
            )));
        }
        Ok(DelayProblem {
            t0,
            t1,
            h,
            lagrangian,
            history,
            quad: GaussLegendre::default(),
        })
    }

    pub fn with_quad_order(mut self, order: usize) -> Self {
        self.quad = GaussLegendre::new(order);
        self
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dim(&self) -> usize {
        self.lagrangian.dim()
    }

    pub fn lagrangian(&self) -> &LagrangianExpr {
        &self.lagrangian
    }

    pub fn history(&self) -> &HistorySpec {
        &self.history
    }

    pub fn quad(&self) -> &GaussLegendre {
        &self.quad
    }

    /// Whether `L` is live at time `t` approached from `side`.
    pub fn is_active(&self, t: f64, side: Side) -> bool {
        t < self.t1 - BREAK_TOL || (t <= self.t1 + BREAK_TOL && side == Side::Left)
    }

    /// `L(t, x, y, dx, dy)` for `t <= t1`, exactly zero beyond.
    pub fn eval_l_extended(&self, t: f64, x: &[f64], y: &[f64], dx: &[f64], dy: &[f64]) -> Result<f64> {
        if t > self.t1 {
            return Ok(0.0);
        }
        Ok(self.lagrangian.eval(&Point { t, x, y, dx, dy })?)
    }

    /// Evaluation context of a trajectory on `[t0-h, t1]` at `t ∈ [t0, t1+h]`.
    pub fn context(&self, traj: &Trajectory, t: f64, side: Side) -> Result<ArgPoint> {
        let (lo, hi) = (self.t0, self.t1 + self.h);
        if !(t >= lo - BREAK_TOL && t <= hi + BREAK_TOL) {
            return Err(Error::OutOfDomain { t, a: lo, b: hi });
        }
        let n = self.dim();
        if !self.is_active(t, side) {
            return Ok(ArgPoint {
                t,
                x: vec![0.0; n],
                y: vec![0.0; n],
                dx: vec![0.0; n],
                dy: vec![0.0; n],
                active: false,
            });
        }
        let s = t - self.h;
        Ok(ArgPoint {
            t,
            x: traj.eval_value(t)?,
            y: traj.eval_value(s)?,
            dx: traj.eval_deriv(t, side)?,
            dy: traj.eval_deriv(s, side)?,
            active: true,
        })
    }

    /// Context along a candidate extremal.
    pub fn along(&self, cand: &CandidateExtremal, t: f64, side: Side) -> Result<ArgPoint> {
        self.context(&cand.traj, t, side)
    }

    pub fn l_at(&self, ctx: &ArgPoint) -> Result<f64> {
        if !ctx.active {
            return Ok(0.0);
        }
        Ok(self.lagrangian.eval(&ctx.point())?)
    }

    pub fn gradient_at(&self, ctx: &ArgPoint, block: Block) -> Result<Vec<f64>> {
        if !ctx.active {
            return Ok(vec![0.0; self.dim()]);
        }
        Ok(self.lagrangian.gradient(block, &ctx.point())?)
    }

    /// Times where quantities built from `traj` may lose smoothness inside
    /// `[t0, t1]`: breakpoints, their shifts by `±h`, and `t1 - h`.
    pub fn kinks(&self, traj: &Trajectory) -> Vec<f64> {
        let mut k: Vec<f64> = traj
            .breakpoints()
            .into_iter()
            .flat_map(|b| [b - self.h, b, b + self.h])
            .chain([self.t0, self.t1 - self.h, self.t1])
            .filter(|&v| v >= self.t0 - BREAK_TOL && v <= self.t1 + BREAK_TOL)
            .collect();
        k.sort_by(f64::total_cmp);
        k.dedup_by(|a, b| (*a - *b).abs() <= BREAK_TOL);
        k
    }

    /// `∫_a^b L` along `traj`, split at `traj`'s breakpoints, their `+h`
    /// shifts and any `extra` breaks.
    pub fn integrate_lagrangian(&self, traj: &Trajectory, a: f64, b: f64, extra: &[f64]) -> Result<f64> {
        let mut breaks: Vec<f64> = traj.breakpoints().into_iter().flat_map(|t| [t, t + self.h]).collect();
        breaks.extend_from_slice(extra);
        self.quad.integrate(a, b, &breaks, |t| {
            let ctx = self.context(traj, t, Side::Right)?;
            self.l_at(&ctx)
        })
    }

    /// The cost `S` of an admissible trajectory.
    pub fn eval_s(&self, traj: &Trajectory) -> Result<f64> {
        self.check_admissible(traj)?;
        self.integrate_lagrangian(traj, self.t0, self.t1, &[])
    }

    /// Checks domain, history and terminal value of `traj` to `1e-9 (1 + |x|)`.
    pub fn check_admissible(&self, traj: &Trajectory) -> Result<()> {
        if traj.dim() != self.dim() {
            return Err(Error::InvalidTrajectory(format!(
                "trajectory dimension {} differs from problem dimension {}",
                traj.dim(),
                self.dim()
            )));
        }
        let (a, b) = traj.domain();
        let (ea, eb) = (self.t0 - self.h, self.t1);
        if (a - ea).abs() > BREAK_TOL * (1.0 + ea.abs()) || (b - eb).abs() > BREAK_TOL * (1.0 + eb.abs()) {
            return Err(Error::InvalidTrajectory(format!(
                "trajectory is defined on [{a}, {b}], expected [{ea}, {eb}]"
            )));
        }
        let phi = &self.history.phi;
        let mut probes = vec![ea, self.t0];
        probes.extend(phi.breakpoints());
        let (pa, pb) = phi.domain();
        probes.extend((1..8).map(|k| pa + (pb - pa) * k as f64 / 8.0));
        for t in probes {
            check_match(t, &phi.eval_value(t)?, &traj.eval_value(t)?)?;
        }
        check_match(eb, &self.history.terminal, &traj.eval_value(eb)?)
    }
}

const MATCH_TOL: f64 = 1e-9;

fn check_match(t: f64, expected: &[f64], actual: &[f64]) -> Result<()> {
    let gap = expected
        .iter()
        .zip(actual)
        .map(|(e, a)| (e - a).abs())
        .fold(0.0, f64::max);
    let scale = 1.0 + expected.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if gap > MATCH_TOL * scale {
        return Err(Error::BoundaryMismatch {
            t,
            expected: expected.to_vec(),
            actual: actual.to_vec(),
            gap,
        });
    }
    Ok(())
}

/// An admissible trajectory on `[t0-h, t1]` offered as an extremal.
#[derive(Clone, Debug)]
pub struct CandidateExtremal {
    traj: Trajectory,
}

impl CandidateExtremal {
    /// Splices the problem history onto `interior` (defined on `[t0, t1]`).
    ///
    /// `interior(t0)` must match `phi(t0)` and `interior(t1)` the terminal
    /// value, both to `1e-9 (1 + |x|)`. `t0` always becomes a breakpoint.
    pub fn splice(p: &DelayProblem, interior: &Trajectory) -> Result<Self> {
        let (a, b) = interior.domain();
        if (a - p.t0).abs() > BREAK_TOL * (1.0 + a.abs()) || (b - p.t1).abs() > BREAK_TOL * (1.0 + b.abs()) {
            return Err(Error::InvalidTrajectory(format!(
                "interior is defined on [{a}, {b}], expected [{}, {}]",
                p.t0, p.t1
            )));
        }
        let phi = p.history.phi();
        check_match(p.t0, &phi.eval_value(p.t0)?, &interior.eval_value(p.t0)?)?;
        check_match(p.t1, &p.history.terminal, &interior.eval_value(p.t1)?)?;
        let traj = phi.concat(interior, MATCH_TOL)?;
        Ok(CandidateExtremal { traj })
    }

    /// Wraps a trajectory already defined on `[t0-h, t1]`.
    pub fn from_full(p: &DelayProblem, traj: Trajectory) -> Result<Self> {
        p.check_admissible(&traj)?;
        Ok(CandidateExtremal { traj })
    }

    pub fn traj(&self) -> &Trajectory {
        &self.traj
    }
}
