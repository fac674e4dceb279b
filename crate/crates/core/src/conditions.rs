//! Condition functionals along a candidate: the Weierstrass excess `E`, the
//! mixed excesses `Q_k`, the `M` terms, first variations, the Euler residual
//! and the Weierstrass scan.
//!
//! Every quantity has an `x` slot evaluated at `t` and a `y` slot evaluated at
//! `t + h`; the `y` slot vanishes once `t + h` passes `t1`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Block;
use crate::needle::{NeedleSpec, Regime};
use crate::problem::{ArgPoint, CandidateExtremal, DelayProblem};
use crate::quadrature::BREAK_TOL;
use crate::trajectory::{Side, Trajectory};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Slot {
    X,
    Y,
}

impl Slot {
    fn velocity(self) -> Block {
        match self {
            Slot::X => Block::Dx,
            Slot::Y => Block::Dy,
        }
    }

    fn state(self) -> Block {
        match self {
            Slot::X => Block::X,
            Slot::Y => Block::Y,
        }
    }
}

impl std::str::FromStr for Slot {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "x" | "xdot" => Ok(Slot::X),
            "y" | "ydot" => Ok(Slot::Y),
            other => Err(format!("unknown slot `{other}` (expected xdot or ydot)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcessValue {
    pub t: f64,
    pub side: Side,
    pub xi: Vec<f64>,
    pub e_x: f64,
    pub e_y: f64,
    pub e_sum: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn slot_context(p: &DelayProblem, traj: &Trajectory, t: f64, side: Side, slot: Slot) -> Result<ArgPoint> {
    match slot {
        Slot::X => p.context(traj, t, side),
        Slot::Y => p.context(traj, t + p.h(), side),
    }
}

fn check_xi(p: &DelayProblem, xi: &[f64]) -> Result<()> {
    if xi.len() != p.dim() {
        return Err(Error::Precondition(format!(
            "xi has {} components, problem dimension is {}",
            xi.len(),
            p.dim()
        )));
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::Precondition(format!("lambda = {lambda} must lie in (0, 1)")));
    }
    Ok(())
}

fn excess_at(p: &DelayProblem, ctx: &ArgPoint, slot: Slot, xi: &[f64], scale: f64) -> Result<f64> {
    if !ctx.active {
        return Ok(0.0);
    }
    let block = slot.velocity();
    let base = p.l_at(ctx)?;
    let moved = p.l_at(&ctx.shifted(block, xi, scale))?;
    let grad = p.gradient_at(ctx, block)?;
    Ok(moved - base - scale * dot(&grad, xi))
}

fn m_at(p: &DelayProblem, ctx: &ArgPoint, slot: Slot, lambda: f64, xi: &[f64]) -> Result<f64> {
    if !ctx.active {
        return Ok(0.0);
    }
    let kappa = lambda / (lambda - 1.0);
    let (state, vel) = (slot.state(), slot.velocity());
    let base = p.gradient_at(ctx, state)?;
    let bracket = |scale: f64| -> Result<f64> {
        let g = p.gradient_at(&ctx.shifted(vel, xi, scale), state)?;
        let diff: Vec<f64> = g.iter().zip(&base).map(|(a, b)| a - b).collect();
        Ok(dot(&diff, xi))
    };
    Ok(lambda * bracket(1.0)? + (1.0 - lambda) * bracket(kappa)?)
}

/// Weierstrass excess in one slot; the `y` slot is evaluated at `t + h`.
pub fn excess_e(p: &DelayProblem, cand: &CandidateExtremal, t: f64, side: Side, xi: &[f64], slot: Slot) -> Result<f64> {
    check_xi(p, xi)?;
    let ctx = slot_context(p, cand.traj(), t, side, slot)?;
    excess_at(p, &ctx, slot, xi, 1.0)
}

pub fn excess(p: &DelayProblem, cand: &CandidateExtremal, t: f64, side: Side, xi: &[f64]) -> Result<ExcessValue> {
    let e_x = excess_e(p, cand, t, side, xi, Slot::X)?;
    let e_y = excess_e(p, cand, t, side, xi, Slot::Y)?;
    Ok(ExcessValue {
        t,
        side,
        xi: xi.to_vec(),
        e_x,
        e_y,
        e_sum: e_x + e_y,
    })
}

/// `E_x(t, xi) + E_y(t + h, xi)`.
pub fn e_sum(p: &DelayProblem, cand: &CandidateExtremal, t: f64, side: Side, xi: &[f64]) -> Result<f64> {
    Ok(excess(p, cand, t, side, xi)?.e_sum)
}

/// `(Q_k` in the `x` slot, `Q_k` in the `y` slot`)`.
pub fn q_k(
    p: &DelayProblem,
    cand: &CandidateExtremal,
    t: f64,
    side: Side,
    lambda: f64,
    xi: &[f64],
    k: i32,
) -> Result<(f64, f64)> {
    check_lambda(lambda)?;
    check_xi(p, xi)?;
    let kappa = lambda / (lambda - 1.0);
    let w = lambda.powi(k);
    let mut out = [0.0; 2];
    for (o, slot) in out.iter_mut().zip([Slot::X, Slot::Y]) {
        let ctx = slot_context(p, cand.traj(), t, side, slot)?;
        *o = w * excess_at(p, &ctx, slot, xi, 1.0)? + (1.0 - w) * excess_at(p, &ctx, slot, xi, kappa)?;
    }
    Ok((out[0], out[1]))
}

pub fn q_sum(
    p: &DelayProblem,
    cand: &CandidateExtremal,
    t: f64,
    side: Side,
    lambda: f64,
    xi: &[f64],
    k: i32,
) -> Result<f64> {
    let (a, b) = q_k(p, cand, t, side, lambda, xi, k)?;
    Ok(a + b)
}

/// The `M` term of one slot, with the trailing `xi` factor kept, so it is
/// cubic in `xi` for quadratic-in-velocity Lagrangians.
pub fn m_term(
    p: &DelayProblem,
    cand: &CandidateExtremal,
    t: f64,
    side: Side,
    lambda: f64,
    xi: &[f64],
    slot: Slot,
) -> Result<f64> {
    check_lambda(lambda)?;
    check_xi(p, xi)?;
    let ctx = slot_context(p, cand.traj(), t, side, slot)?;
    m_at(p, &ctx, slot, lambda, xi)
}

/// `D = M_x(t) + M_y(t + h)`.
pub fn m_sum(p: &DelayProblem, cand: &CandidateExtremal, t: f64, side: Side, lambda: f64, xi: &[f64]) -> Result<f64> {
    Ok(m_term(p, cand, t, side, lambda, xi, Slot::X)? + m_term(p, cand, t, side, lambda, xi, Slot::Y)?)
}

/// One-sided three-point derivative of `f` at `t`, shrinking the step so the
/// stencil never crosses a kink or leaves `[lo, hi]`.
pub fn one_sided_derivative_vec<F>(f: F, t: f64, side: Side, kinks: &[f64], lo: f64, hi: f64) -> Result<Vec<f64>>
where
    F: Fn(f64, Side) -> Result<Vec<f64>>,
{
    let dir = side.sign();
    let barrier = match side {
        Side::Right => kinks.iter().copied().filter(|&k| k > t + BREAK_TOL).fold(hi, f64::min),
        Side::Left => kinks.iter().copied().filter(|&k| k < t - BREAK_TOL).fold(lo, f64::max),
    };
    let room = (barrier - t).abs();
    let mut s = 1e-5 * (1.0 + t.abs());
    if 2.0 * s > room {
        s = room / 2.5;
    }
    if !(s > 1e-9 * (1.0 + t.abs())) {
        let (start, end) = if dir > 0.0 { (t, barrier) } else { (barrier, t) };
        return Err(Error::SegmentTooShort { start, end });
    }
    let f0 = f(t, side)?;
    let f1 = f(t + dir * s, side)?;
    let f2 = f(t + 2.0 * dir * s, side)?;
    Ok(f0
        .iter()
        .zip(&f1)
        .zip(&f2)
        .map(|((a, b), c)| dir * (-3.0 * a + 4.0 * b - c) / (2.0 * s))
        .collect())
}

pub fn one_sided_derivative<F>(f: F, t: f64, side: Side, kinks: &[f64], lo: f64, hi: f64) -> Result<f64>
where
    F: Fn(f64, Side) -> Result<f64>,
{
    Ok(one_sided_derivative_vec(|u, s| Ok(vec![f(u, s)?]), t, side, kinks, lo, hi)?[0])
}

/// One-sided `d/dt` of the `Q_2` sum along the candidate.
pub fn q2_sum_rate(
    p: &DelayProblem,
    cand: &CandidateExtremal,
    t: f64,
    side: Side,
    lambda: f64,
    xi: &[f64],
) -> Result<f64> {
    let kinks = p.kinks(cand.traj());
    one_sided_derivative(
        |u, s| q_sum(p, cand, u, s, lambda, xi, 2),
        t,
        side,
        &kinks,
        p.t0(),
        p.t1(),
    )
}

/// `(L_x(t) + L_y(t+h), L_dx(t) + L_dy(t+h))` along `traj`.
fn coupled_gradients(p: &DelayProblem, traj: &Trajectory, t: f64, side: Side) -> Result<(Vec<f64>, Vec<f64>)> {
    let now = p.context(traj, t, side)?;
    let later = p.context(traj, t + p.h(), side)?;
    let add = |a: Vec<f64>, b: Vec<f64>| a.iter().zip(&b).map(|(u, v)| u + v).collect::<Vec<_>>();
    let force = add(p.gradient_at(&now, Block::X)?, p.gradient_at(&later, Block::Y)?);
    let momentum = add(p.gradient_at(&now, Block::Dx)?, p.gradient_at(&later, Block::Dy)?);
    Ok((force, momentum))
}

/// First variation of `S` at the candidate in direction `dx`, which must be
/// defined on `[t0-h, t1]` and vanish on the history and at `t1`.
pub fn first_variation(p: &DelayProblem, cand: &CandidateExtremal, dx: &Trajectory) -> Result<f64> {
    if dx.dim() != p.dim() {
        return Err(Error::Precondition("variation dimension differs from problem".into()));
    }
    let (a, b) = dx.domain();
    if (a - (p.t0() - p.h())).abs() > BREAK_TOL || (b - p.t1()).abs() > BREAK_TOL {
        return Err(Error::Precondition(format!(
            "variation is defined on [{a}, {b}], expected [{}, {}]",
            p.t0() - p.h(),
            p.t1()
        )));
    }
    let mut probes: Vec<f64> = (0..=8).map(|k| a + (p.t0() - a) * k as f64 / 8.0).collect();
    probes.push(p.t1());
    for t in probes {
        let v = dx.eval_value(t)?;
        if v.iter().any(|x| x.abs() > 1e-12) {
            return Err(Error::Precondition(format!("variation does not vanish at t = {t}")));
        }
    }
    let traj = cand.traj();
    let mut breaks = p.kinks(traj);
    breaks.extend(dx.breakpoints());
    p.quad().integrate(p.t0(), p.t1(), &breaks, |t| {
        let (force, momentum) = coupled_gradients(p, traj, t, Side::Right)?;
        Ok(dot(&force, &dx.eval_value(t)?) + dot(&momentum, &dx.eval_deriv(t, Side::Right)?))
    })
}

/// The first variation on a needle, written as the two branch integrals.
pub fn needle_first_variation(p: &DelayProblem, cand: &CandidateExtremal, spec: &NeedleSpec, eps: f64) -> Result<f64> {
    check_xi(p, spec.xi())?;
    spec.check_eps(p, eps)?;
    let traj = cand.traj();
    let kinks = p.kinks(traj);
    let xi = spec.xi();
    let theta = spec.theta();
    let corner = spec.corner(eps);
    let far = theta + spec.side().sign() * eps;
    let branch = |from: f64, to: f64, anchor: f64| -> Result<f64> {
        let (lo, hi) = (from.min(to), from.max(to));
        p.quad().integrate(lo, hi, &kinks, |t| {
            let (force, momentum) = coupled_gradients(p, traj, t, Side::Right)?;
            Ok(dot(&force, xi) * (t - anchor) + dot(&momentum, xi))
        })
    };
    Ok(branch(theta, corner, theta)? + spec.kappa() * branch(corner, far, far)?)
}

/// Euler residual `d/dt[L_dx(t) + L_dy(t+h)] - [L_x(t) + L_y(t+h)]`.
pub fn euler_residual(p: &DelayProblem, cand: &CandidateExtremal, t: f64, side: Side) -> Result<Vec<f64>> {
    let traj = cand.traj();
    let kinks = p.kinks(traj);
    let rate = one_sided_derivative_vec(
        |u, s| Ok(coupled_gradients(p, traj, u, s)?.1),
        t,
        side,
        &kinks,
        p.t0(),
        p.t1(),
    )?;
    let (force, _) = coupled_gradients(p, traj, t, side)?;
    Ok(rate.iter().zip(&force).map(|(a, b)| a - b).collect())
}

/// `n + 1` equally spaced points covering `[a, b]`.
pub fn uniform_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    let n = n.max(1);
    (0..=n)
        .map(|k| if k == n { b } else { a + (b - a) * k as f64 / n as f64 })
        .collect()
}

/// Sides on which one-sided data is taken at `t`: both at interior kinks,
/// only the inward side at the ends, otherwise the right.
pub fn sides_at(p: &DelayProblem, cand: &CandidateExtremal, t: f64) -> Vec<Side> {
    if (t - p.t0()).abs() <= BREAK_TOL {
        return vec![Side::Right];
    }
    if (t - p.t1()).abs() <= BREAK_TOL {
        return vec![Side::Left];
    }
    if p.kinks(cand.traj()).iter().any(|k| (k - t).abs() <= BREAK_TOL) {
        vec![Side::Left, Side::Right]
    } else {
        vec![Side::Right]
    }
}

fn halton(index: usize, base: usize) -> f64 {
    let (mut f, mut r, mut i) = (1.0, 0.0, index);
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

fn first_primes(n: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(n);
    let mut c = 2;
    while out.len() < n {
        if out.iter().all(|p| c % p != 0) {
            out.push(c);
        }
        c += 1;
    }
    out
}

/// Deterministic unit directions: `±1` in one dimension, 64 in two or three
/// dimensions, `32 n` beyond that.
pub fn unit_directions(dim: usize) -> Vec<Vec<f64>> {
    use std::f64::consts::PI;
    match dim {
        0 => vec![],
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..64)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / 64.0;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        3 => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..64)
                .map(|k| {
                    let z = 1.0 - (2.0 * k as f64 + 1.0) / 64.0;
                    let r = (1.0 - z * z).sqrt();
                    let a = golden * k as f64;
                    vec![r * a.cos(), r * a.sin(), z]
                })
                .collect()
        }
        n => {
            let primes = first_primes(n);
            let mut out = Vec::with_capacity(32 * n);
            let mut i = 1;
            while out.len() < 32 * n {
                let v: Vec<f64> = primes.iter().map(|&b| 2.0 * halton(i, b) - 1.0).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 1e-3 {
                    out.push(v.iter().map(|x| x / norm).collect());
                }
                i += 1;
            }
            out
        }
    }
}

pub const DEFAULT_RADII: [f64; 4] = [0.25, 0.5, 1.0, 2.0];

/// Unit directions crossed with `radii`.
pub fn xi_samples(dim: usize, radii: &[f64]) -> Vec<Vec<f64>> {
    let dirs = unit_directions(dim);
    radii
        .iter()
        .flat_map(|&r| dirs.iter().map(move |d| d.iter().map(|v| r * v).collect()))
        .collect()
}

/// `max |L̄(t)|` over a grid, used to scale absolute tolerances.
pub fn l_scale(p: &DelayProblem, cand: &CandidateExtremal, grid: &[f64]) -> Result<f64> {
    grid.iter().try_fold(0.0f64, |m, &t| {
        let side = sides_at(p, cand, t)[0];
        Ok(m.max(p.l_at(&p.along(cand, t, side)?)?.abs()))
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanTolerances {
    /// Relative violation tolerance, scaled by `1 + max |L̄|`.
    pub tol_w: f64,
    /// Relative degeneracy tolerance, scaled by `1 + max |L̄|`.
    pub tol_deg: f64,
}

impl Default for ScanTolerances {
    fn default() -> Self {
        ScanTolerances {
            tol_w: 1e-9,
            tol_deg: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub t: f64,
    pub side: Side,
    pub regime: Regime,
    pub min_e_sum: f64,
    pub argmin_xi: Vec<f64>,
    /// Minimum over the samples with `|xi| = 1`, when there are any.
    pub min_e_sum_unit: Option<f64>,
    pub violation: bool,
    pub degenerate: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeierstrassScanReport {
    pub l_scale: f64,
    pub tol_w: f64,
    pub tol_deg: f64,
    pub samples: usize,
    pub points: Vec<ScanPoint>,
    pub min_e_sum: f64,
    pub violations: usize,
    pub holds: bool,
}

/// Samples `E_x(t) + E_y(t+h)` over `xi_samples` at every grid time.
pub fn weierstrass_scan(
    p: &DelayProblem,
    cand: &CandidateExtremal,
    t_grid: &[f64],
    xi_samples: &[Vec<f64>],
    tol: ScanTolerances,
) -> Result<WeierstrassScanReport> {
    if t_grid.is_empty() || xi_samples.is_empty() {
        return Err(Error::Precondition("scan grids must be nonempty".into()));
    }
    if xi_samples.iter().any(|x| x.iter().all(|v| *v == 0.0)) {
        return Err(Error::Precondition("xi samples must exclude zero".into()));
    }
    let scale = 1.0 + l_scale(p, cand, t_grid)?;
    let (tol_w, tol_deg) = (tol.tol_w * scale, tol.tol_deg * scale);
    let tail_start = p.t1() - p.h();
    let per_time: Vec<Vec<ScanPoint>> = t_grid
        .par_iter()
        .map(|&t| {
            sides_at(p, cand, t)
                .into_iter()
                .map(|side| {
                    let mut min = f64::INFINITY;
                    let mut argmin = xi_samples[0].clone();
                    let mut degenerate = Vec::new();
                    let mut unit: Option<f64> = None;
                    for xi in xi_samples {
                        let e = e_sum(p, cand, t, side, xi)?;
                        if (xi.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() <= 1e-12 {
                            unit = Some(unit.map_or(e, |u| u.min(e)));
                        }
                        if e < min {
                            min = e;
                            argmin = xi.clone();
                        }
                        if e.abs() <= tol_deg {
                            degenerate.push(xi.clone());
                        }
                    }
                    Ok(ScanPoint {
                        t,
                        side,
                        regime: if t <= tail_start + BREAK_TOL {
                            Regime::Main
                        } else {
                            Regime::Tail
                        },
                        min_e_sum: min,
                        argmin_xi: argmin,
                        min_e_sum_unit: unit,
                        violation: min < -tol_w,
                        degenerate,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let points: Vec<ScanPoint> = per_time.into_iter().flatten().collect();
    let min_e_sum = points.iter().map(|s| s.min_e_sum).fold(f64::INFINITY, f64::min);
    let violations = points.iter().filter(|s| s.violation).count();
    Ok(WeierstrassScanReport {
        l_scale: scale - 1.0,
        tol_w,
        tol_deg,
        samples: xi_samples.len(),
        points,
        min_e_sum,
        violations,
        holds: violations == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_lagrangian;
    use crate::problem::HistorySpec;

    const EX: &str = "(1 - x1)*dx1^2 - (1 + y1)*dy1^2 + dx1*dy1";

    fn setup(l: &str, interior: &str) -> (DelayProblem, CandidateExtremal) {
        let lag = parse_lagrangian(l, 1).unwrap();
        let phi = Trajectory::zero(1, -1.0, 0.0).unwrap();
        let p = DelayProblem::new(0.0, 3.0, 1.0, lag, HistorySpec::new(phi, vec![0.0]).unwrap()).unwrap();
        let inner = Trajectory::parse(1, &[(0.0, 3.0, vec![interior.to_string()])]).unwrap();
        let c = CandidateExtremal::splice(&p, &inner).unwrap();
        (p, c)
    }

    #[test]
    fn excess_values_on_zero_extremal() {
        let (p, c) = setup(EX, "0");
        for t in [0.0, 0.7, 1.5, 2.0, 2.5] {
            assert_eq!(excess_e(&p, &c, t, Side::Right, &[2.0], Slot::X).unwrap(), 4.0);
            assert_eq!(excess_e(&p, &c, t, Side::Right, &[0.0], Slot::X).unwrap(), 0.0);
        }
        for t in [0.0, 0.7, 1.5, 1.99] {
            assert_eq!(excess_e(&p, &c, t, Side::Right, &[2.0], Slot::Y).unwrap(), -4.0);
        }
        assert_eq!(excess_e(&p, &c, 2.0, Side::Left, &[2.0], Slot::Y).unwrap(), -4.0);
        assert_eq!(excess_e(&p, &c, 2.0, Side::Right, &[2.0], Slot::Y).unwrap(), 0.0);
        assert_eq!(excess_e(&p, &c, 2.5, Side::Right, &[2.0], Slot::Y).unwrap(), 0.0);
    }

    #[test]
    fn mixed_excess_values() {
        let (p, c) = setup(EX, "0");
        assert_eq!(q_k(&p, &c, 1.0, Side::Right, 0.5, &[1.0], 1).unwrap(), (1.0, -1.0));
        assert_eq!(q_k(&p, &c, 1.0, Side::Right, 0.5, &[1.0], 2).unwrap().0, 1.0);
        assert_eq!(q_k(&p, &c, 1.0, Side::Right, 0.5, &[0.0], 1).unwrap(), (0.0, 0.0));
        assert!(q_k(&p, &c, 1.0, Side::Right, 1.0, &[1.0], 1).is_err());
    }

    #[test]
    fn m_terms_are_cubic_in_xi() {
        let (p, c) = setup(EX, "0");
        assert_eq!(m_term(&p, &c, 1.0, Side::Right, 0.5, &[1.0], Slot::X).unwrap(), -1.0);
        assert_eq!(m_term(&p, &c, 1.0, Side::Right, 0.5, &[1.0], Slot::Y).unwrap(), -1.0);
        assert_eq!(m_term(&p, &c, 1.0, Side::Right, 0.5, &[0.0], Slot::X).unwrap(), 0.0);
        for (lam, xi) in [(0.25, 2.0), (0.8, -0.5), (0.5, 3.0)] {
            let expected = -xi * xi * xi * lam / (1.0 - lam);
            let m = m_term(&p, &c, 1.3, Side::Right, lam, &[xi], Slot::X).unwrap();
            assert!(
                (m - expected).abs() <= 1e-12 * (1.0 + expected.abs()),
                "{m} vs {expected}"
            );
        }
        assert_eq!(m_sum(&p, &c, 1.0, Side::Right, 0.5, &[1.0]).unwrap(), -2.0);
    }

    #[test]
    fn euler_residual_vanishes_on_extremals() {
        let (p, c) = setup(EX, "0");
        for t in uniform_grid(0.0, 3.0, 30) {
            for side in sides_at(&p, &c, t) {
                let r = euler_residual(&p, &c, t, side).unwrap();
                assert!(r[0].abs() <= 1e-8);
            }
        }
        let lag = parse_lagrangian("dx1^2", 1).unwrap();
        let phi = Trajectory::parse(1, &[(-1.0, 0.0, vec!["2*t + 1".into()])]).unwrap();
        let p = DelayProblem::new(0.0, 3.0, 1.0, lag, HistorySpec::new(phi, vec![7.0]).unwrap()).unwrap();
        let inner = Trajectory::parse(1, &[(0.0, 3.0, vec!["2*t + 1".into()])]).unwrap();
        let c = CandidateExtremal::splice(&p, &inner).unwrap();
        for t in [0.0, 0.5, 1.7, 2.9] {
            assert!(euler_residual(&p, &c, t, Side::Right).unwrap()[0].abs() <= 1e-8);
        }
    }

    #[test]
    fn euler_residual_matches_hand_expansion() {
        // residual = -2 x'^2 - 4 x x'' + x''(t-1) + x''(t+1) = 0.18 - 0.4 at t = 1.5
        let (p, c) = setup(EX, "0.1*t*(3 - t)");
        let r = euler_residual(&p, &c, 1.5, Side::Right).unwrap()[0];
        assert!((r + 0.22).abs() <= 1e-6, "{r}");
    }

    #[test]
    fn directions_are_unit_and_deterministic() {
        for n in 1..=5 {
            let d = unit_directions(n);
            let expected = match n {
                1 => 2,
                2 | 3 => 64,
                _ => 32 * n,
            };
            assert_eq!(d.len(), expected);
            for v in &d {
                let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                assert!((norm - 1.0).abs() < 1e-12);
            }
            assert_eq!(d, unit_directions(n));
        }
        assert_eq!(xi_samples(2, &DEFAULT_RADII).len(), 256);
    }

    #[test]
    fn scan_on_example() {
        let (p, c) = setup(EX, "0");
        let grid = uniform_grid(0.0, 3.0, 30);
        let r = weierstrass_scan(&p, &c, &grid, &xi_samples(1, &DEFAULT_RADII), ScanTolerances::default()).unwrap();
        assert!(r.holds);
        for pt in &r.points {
            if pt.t < 2.0 - 1e-9 || (pt.t <= 2.0 + 1e-9 && pt.side == Side::Left) {
                assert_eq!(pt.degenerate.len(), 8, "t = {}", pt.t);
                assert_eq!(pt.regime, Regime::Main);
            } else {
                assert!(pt.degenerate.is_empty(), "t = {}", pt.t);
                assert!(pt.min_e_sum >= 0.0625 - 1e-15);
            }
        }
        let quartic = setup("dx1^4", "0");
        let r = weierstrass_scan(
            &quartic.0,
            &quartic.1,
            &grid,
            &xi_samples(1, &[1.0]),
            ScanTolerances::default(),
        )
        .unwrap();
        assert!(r.holds && r.points.iter().all(|pt| pt.degenerate.is_empty()));
    }

    #[test]
    fn scan_rejects_zero_sample() {
        let (p, c) = setup(EX, "0");
        assert!(weierstrass_scan(&p, &c, &[1.0], &[vec![0.0]], ScanTolerances::default()).is_err());
        assert!(weierstrass_scan(&p, &c, &[], &[vec![1.0]], ScanTolerances::default()).is_err());
    }
}
