//! Degeneracy detection and the minimality conditions built on it.
//!
//! A pair `(eta, lambda)` certifies degeneracy at `t` when both
//! `E_sum(t, eta)` and `E_sum(t, κ eta)` vanish, with `κ = λ/(λ-1)`.
//!
//! * Along an interval certified by a fixed pair, `D = M_x + M_y` must vanish
//!   ([`Condition::IntervalEquality`]), and for a weak minimum this must hold
//!   for arbitrarily small `eta` ([`Condition::IntervalEqualityWeak`]).
//! * At a point degenerate on one side, `λ D + d/dt Q2` must be `>= 0`
//!   (right) or `<= 0` (left) ([`Condition::PointInequality`]); at a point
//!   degenerate on both sides `D` itself must vanish
//!   ([`Condition::PointEquality`]). The weak forms repeat the test on a
//!   shrinking ball of directions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditions::{
    e_sum, euler_residual, l_scale, m_term, one_sided_derivative, q2_sum_rate, q_k, sides_at, uniform_grid,
    weierstrass_scan, xi_samples, ScanTolerances, Slot, WeierstrassScanReport, DEFAULT_RADII,
};
use crate::error::{Error, Result};
use crate::increments::{verify_expansion, IncrementRecord, SweepOptions};
use crate::needle::NeedleSpec;
use crate::problem::{CandidateExtremal, DelayProblem};
use crate::quadrature::BREAK_TOL;
use crate::trajectory::Side;

/// Outcome of a necessary-condition test. Ordered from best to worst.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Conclusion {
    Consistent,
    FailsStrong,
    FailsWeak,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// `E_sum >= 0` for all directions.
    Weierstrass,
    /// Euler equation along the candidate.
    Euler,
    IntervalEquality,
    IntervalEqualityWeak,
    PointInequality,
    PointEquality,
    PointInequalityWeak,
    PointEqualityWeak,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    pub value: f64,
    pub tol: f64,
}

impl Evidence {
    fn new(label: &str, value: f64, tol: f64) -> Self {
        Evidence {
            label: label.to_string(),
            t: None,
            scale: None,
            value,
            tol,
        }
    }

    fn at(mut self, t: f64) -> Self {
        self.t = Some(t);
        self
    }

    fn scaled(mut self, s: f64) -> Self {
        self.scale = Some(s);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub condition: Condition,
    pub conclusion: Conclusion,
    /// The tested quantity (signed where the condition is one-sided).
    pub quantity: f64,
    pub tol: f64,
    /// Set when the test point lies in `[t1 - h, t1]`, where all delayed
    /// terms are dropped.
    pub tail: bool,
    pub notes: Vec<String>,
    pub evidence: Vec<Evidence>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    Interval,
    Point,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifiedPair {
    pub eta: Vec<f64>,
    pub lambda: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyFinding {
    pub kind: FindingKind,
    pub start: f64,
    pub end: f64,
    /// Side of the degeneracy for point findings.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub side: Option<Side>,
    pub eta: Vec<f64>,
    pub lambda: f64,
    /// Largest `|E_sum(eta)|` over the run.
    pub e_sum_eta: f64,
    /// Largest `|E_sum(κ eta)|` over the run.
    pub e_sum_partner: f64,
    pub tol_deg: f64,
    pub tail: bool,
    /// Every sampled pair certifying exactly this run.
    pub pairs: Vec<CertifiedPair>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOptions {
    /// Relative tolerance for equality-type conditions, scaled by `1 + |M|`.
    pub tol_eq: f64,
    /// Relative degeneracy tolerance, scaled by `1 + max |L̄|`.
    pub tol_deg: f64,
    /// Relative Weierstrass tolerance, scaled by `1 + max |L̄|`.
    pub tol_w: f64,
    /// Subintervals used along interval findings.
    pub grid: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            tol_eq: 1e-7,
            tol_deg: 1e-9,
            tol_w: 1e-9,
            grid: 50,
        }
    }
}

pub const DEFAULT_SCALES: [f64; 4] = [1.0, 0.5, 0.25, 0.125];

fn kappa(lambda: f64) -> f64 {
    lambda / (lambda - 1.0)
}

fn scaled(v: &[f64], s: f64) -> Vec<f64> {
    v.iter().map(|x| s * x).collect()
}

/// `max |L̄|` over 200 subintervals of the horizon.
pub fn candidate_l_scale(p: &DelayProblem, cand: &CandidateExtremal) -> Result<f64> {
    l_scale(p, cand, &uniform_grid(p.t0(), p.t1(), 200))
}

/// `n` subintervals of the horizon merged with the candidate's kinks.
pub fn scan_grid(p: &DelayProblem, cand: &CandidateExtremal, n: usize) -> Vec<f64> {
    let mut g = uniform_grid(p.t0(), p.t1(), n);
    g.extend(p.kinks(cand.traj()));
    g.sort_by(f64::total_cmp);
    g.dedup_by(|a, b| (*a - *b).abs() <= BREAK_TOL);
    g
}

/// Degeneracy grid: `n` subintervals of `[t0, t1-h]` and the same spacing on the tail.
pub fn degeneracy_grid(p: &DelayProblem, n: usize) -> Vec<f64> {
    let split = p.t1() - p.h();
    let mut g = uniform_grid(p.t0(), split, n);
    let tail_n = ((n as f64) * p.h() / (split - p.t0())).ceil().max(1.0) as usize;
    g.extend(uniform_grid(split, p.t1(), tail_n).into_iter().skip(1));
    g
}

fn pair_degenerate(
    p: &DelayProblem,
    cand: &CandidateExtremal,
    t: f64,
    side: Side,
    eta: &[f64],
    lambda: f64,
    tol: f64,
) -> Result<Option<(f64, f64)>> {
    let a = e_sum(p, cand, t, side, eta)?;
    if a.abs() > tol {
        return Ok(None);
    }
    let b = e_sum(p, cand, t, side, &scaled(eta, kappa(lambda)))?;
    Ok((b.abs() <= tol).then_some((a, b)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyReport {
    pub tol_deg: f64,
    pub grid_points: usize,
    pub pairs_tested: usize,
    pub findings: Vec<DegeneracyFinding>,
}

impl DegeneracyReport {
    pub fn intervals(&self) -> impl Iterator<Item = &DegeneracyFinding> {
        self.findings.iter().filter(|f| f.kind == FindingKind::Interval)
    }
}

/// Finds runs of grid points certified by a common `(eta, lambda)` pair.
///
/// Runs touching two or more grid times become interval findings; single
/// entries become point findings tagged with their side. Runs shared by
/// several pairs are merged, keeping every pair, and are represented by the
/// pair whose `|eta|` is closest to 1 and whose `lambda` is closest to 1/2.
pub fn detect_degeneracy(
    p: &DelayProblem,
    cand: &CandidateExtremal,
    t_grid: &[f64],
    etas: &[Vec<f64>],
    lambdas: &[f64],
    tol_deg_rel: f64,
) -> Result<DegeneracyReport> {
    if t_grid.is_empty() || etas.is_empty() || lambdas.is_empty() {
        return Err(Error::Precondition("degeneracy grids must be nonempty".into()));
    }
    if let Some(l) = lambdas.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
        return Err(Error::Precondition(format!("lambda = {l} must lie in (0, 1)")));
    }
    if etas.iter().any(|e| e.iter().all(|v| *v == 0.0)) {
        return Err(Error::Precondition("directions must be nonzero".into()));
    }
    let tol = tol_deg_rel * (1.0 + candidate_l_scale(p, cand)?);
    let entries: Vec<(f64, Side)> = t_grid
        .iter()
        .flat_map(|&t| sides_at(p, cand, t).into_iter().map(move |s| (t, s)))
        .collect();
    let npairs = etas.len() * lambdas.len();
    // cert[e][k] = Some((E(eta), E(κ eta))) when pair k certifies entry e
    let cert: Vec<Vec<Option<(f64, f64)>>> = entries
        .par_iter()
        .map(|&(t, side)| {
            let mut row = vec![None; npairs];
            for (i, eta) in etas.iter().enumerate() {
                let a = e_sum(p, cand, t, side, eta)?;
                if a.abs() > tol {
                    continue;
                }
                for (j, &lam) in lambdas.iter().enumerate() {
                    let b = e_sum(p, cand, t, side, &scaled(eta, kappa(lam)))?;
                    if b.abs() <= tol {
                        row[i * lambdas.len() + j] = Some((a, b));
                    }
                }
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;

    struct Run {
        first: usize,
        last: usize,
        pairs: Vec<usize>,
        worst: Vec<(f64, f64)>,
    }
    let mut runs: Vec<Run> = Vec::new();
    #[allow(clippy::needless_range_loop)]
    for k in 0..npairs {
        let mut e = 0;
        while e < entries.len() {
            if cert[e][k].is_none() {
                e += 1;
                continue;
            }
            let first = e;
            let (mut wa, mut wb) = (0.0f64, 0.0f64);
            while e < entries.len() {
                match cert[e][k] {
                    Some((a, b)) => {
                        wa = wa.max(a.abs());
                        wb = wb.max(b.abs());
                        e += 1;
                    }
                    None => break,
                }
            }
            let last = e - 1;
            match runs.iter_mut().find(|r| r.first == first && r.last == last) {
                Some(r) => {
                    r.pairs.push(k);
                    r.worst.push((wa, wb));
                }
                None => runs.push(Run {
                    first,
                    last,
                    pairs: vec![k],
                    worst: vec![(wa, wb)],
                }),
            }
        }
    }
    runs.sort_by_key(|r| (r.first, r.last));

    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tail_start = p.t1() - p.h();
    let findings = runs
        .into_iter()
        .map(|r| {
            let (t_a, side_a) = entries[r.first];
            let (t_b, _) = entries[r.last];
            let interval = (t_b - t_a).abs() > BREAK_TOL;
            let rep = (0..r.pairs.len())
                .min_by(|&x, &y| {
                    let key = |i: usize| {
                        let k = r.pairs[i];
                        let (eta, lam) = (&etas[k / lambdas.len()], lambdas[k % lambdas.len()]);
                        ((norm(eta) - 1.0).abs(), (lam - 0.5).abs())
                    };
                    let (a, b) = (key(x), key(y));
                    a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1))
                })
                .unwrap_or(0);
            let k = r.pairs[rep];
            let pairs = r
                .pairs
                .iter()
                .map(|&k| CertifiedPair {
                    eta: etas[k / lambdas.len()].clone(),
                    lambda: lambdas[k % lambdas.len()],
                })
                .collect();
            DegeneracyFinding {
                kind: if interval {
                    FindingKind::Interval
                } else {
                    FindingKind::Point
                },
                start: t_a,
                end: t_b,
                side: (!interval).then_some(side_a),
                eta: etas[k / lambdas.len()].clone(),
                lambda: lambdas[k % lambdas.len()],
                e_sum_eta: r.worst[rep].0,
                e_sum_partner: r.worst[rep].1,
                tol_deg: tol,
                tail: t_a >= tail_start - BREAK_TOL
                    && (interval || side_a == Side::Right || t_a > tail_start + BREAK_TOL),
                pairs,
            }
        })
        .collect();
    Ok(DegeneracyReport {
        tol_deg: tol,
        grid_points: entries.len(),
        pairs_tested: npairs,
        findings,
    })
}

fn tail_note() -> String {
    "tail regime: delayed terms vanish beyond the horizon".to_string()
}

struct IntervalSample {
    worst_t: f64,
    worst_d: f64,
    tol: f64,
}

/// Max `|D|` over the interior of the finding at direction `s * eta`, after
/// re-certifying degeneracy there. `None` when degeneracy is not certified.
fn interval_sample(
    p: &DelayProblem,
    cand: &CandidateExtremal,
    f: &DegeneracyFinding,
    s: f64,
    opts: &CheckOptions,
    tol_deg: f64,
) -> Result<std::result::Result<IntervalSample, f64>> {
    let eta = scaled(&f.eta, s);
    let grid = uniform_grid(f.start, f.end, opts.grid.max(2));
    let inner = &grid[1..grid.len() - 1];
    let mut worst = (inner[0], 0.0f64);
    let mut m_scale = 0.0f64;
    for &t in inner {
        if pair_degenerate(p, cand, t, Side::Right, &eta, f.lambda, tol_deg)?.is_none() {
            return Ok(Err(t));
        }
        let mx = m_term(p, cand, t, Side::Right, f.lambda, &eta, Slot::X)?;
        let my = m_term(p, cand, t, Side::Right, f.lambda, &eta, Slot::Y)?;
        m_scale = m_scale.max(mx.abs() + my.abs());
        if (mx + my).abs() > worst.1.abs() || worst.1 == 0.0 && t == inner[0] {
            worst = (t, mx + my);
        }
    }
    Ok(Ok(IntervalSample {
        worst_t: worst.0,
        worst_d: worst.1,
        tol: opts.tol_eq * (1.0 + m_scale),
    }))
}

/// Interval test: `D` must vanish along an interval degeneracy, for the given
/// direction and for every tested shrinkage of it.
///
/// Returns the strong verdict followed by the weak one.
pub fn interval_check(
    p: &DelayProblem,
    cand: &CandidateExtremal,
    finding: &DegeneracyFinding,
    scales: &[f64],
    opts: &CheckOptions,
) -> Result<[Verdict; 2]> {
    if finding.kind != FindingKind::Interval {
        return Err(Error::Precondition("interval test needs an interval finding".into()));
    }
    if scales.is_empty() {
        return Err(Error::Precondition("scales must be nonempty".into()));
    }
    if !(finding.lambda > 0.0 && finding.lambda < 1.0) || finding.eta.iter().all(|v| *v == 0.0) {
        return Err(Error::Precondition("finding has an invalid direction pair".into()));
    }
    let tol_deg = opts.tol_deg * (1.0 + candidate_l_scale(p, cand)?);
    let base = interval_sample(p, cand, finding, 1.0, opts, tol_deg)?.map_err(|t| {
        Error::Precondition(format!(
            "finding is not degenerate at t = {t} for the given direction pair"
        ))
    })?;
    let tail_notes = if finding.tail { vec![tail_note()] } else { vec![] };
    let strong = Verdict {
        condition: Condition::IntervalEquality,
        conclusion: if base.worst_d.abs() > base.tol {
            Conclusion::FailsStrong
        } else {
            Conclusion::Consistent
        },
        quantity: base.worst_d,
        tol: base.tol,
        tail: finding.tail,
        notes: tail_notes.clone(),
        evidence: vec![Evidence::new("D", base.worst_d, base.tol).at(base.worst_t).scaled(1.0)],
    };

    let mut notes = tail_notes;
    let mut evidence = Vec::new();
    let mut all_fail = true;
    for &s in scales {
        match interval_sample(p, cand, finding, s, opts, tol_deg)? {
            Err(t) => {
                notes.push(format!("degeneracy not certified in small ball (scale {s}, t = {t})"));
                all_fail = false;
                break;
            }
            Ok(r) => {
                evidence.push(Evidence::new("D", r.worst_d, r.tol).at(r.worst_t).scaled(s));
                if r.worst_d.abs() <= r.tol {
                    notes.push(format!("equality holds at scale {s}"));
                    all_fail = false;
                }
            }
        }
    }
    let last = evidence.last().cloned();
    let weak = Verdict {
        condition: Condition::IntervalEqualityWeak,
        conclusion: if all_fail {
            Conclusion::FailsWeak
        } else {
            Conclusion::Consistent
        },
        quantity: last.as_ref().map_or(0.0, |e| e.value),
        tol: last.as_ref().map_or(0.0, |e| e.tol),
        tail: finding.tail,
        notes,
        evidence,
    };
    Ok([strong, weak])
}

/// How a point degeneracy is approached.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Approach {
    Right,
    Left,
    TwoSided,
}

impl From<Side> for Approach {
    fn from(s: Side) -> Self {
        match s {
            Side::Right => Approach::Right,
            Side::Left => Approach::Left,
        }
    }
}

impl std::str::FromStr for Approach {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "right" => Ok(Approach::Right),
            "left" => Ok(Approach::Left),
            "both" | "two-sided" | "two_sided" => Ok(Approach::TwoSided),
            other => Err(format!("unknown side `{other}` (expected right, left or both)")),
        }
    }
}

impl Approach {
    fn sides(self) -> &'static [Side] {
        match self {
            Approach::Right => &[Side::Right],
            Approach::Left => &[Side::Left],
            Approach::TwoSided => &[Side::Left, Side::Right],
        }
    }
}

enum PointOutcome {
    NotDegenerate {
        side: Side,
        value: f64,
    },
    Tested {
        value: f64,
        tol: f64,
        violated: bool,
        evidence: Vec<Evidence>,
    },
}

#[allow(clippy::too_many_arguments)]
fn point_test(
    p: &DelayProblem,
    cand: &CandidateExtremal,
    theta: f64,
    approach: Approach,
    lambda: f64,
    eta: &[f64],
    opts: &CheckOptions,
    tol_deg: f64,
) -> Result<PointOutcome> {
    for &side in approach.sides() {
        let a = e_sum(p, cand, theta, side, eta)?;
        let b = e_sum(p, cand, theta, side, &scaled(eta, kappa(lambda)))?;
        if a.abs() > tol_deg || b.abs() > tol_deg {
            let value = if a.abs() > tol_deg { a } else { b };
            return Ok(PointOutcome::NotDegenerate { side, value });
        }
    }
    let m_parts = |side: Side| -> Result<(f64, f64)> {
        Ok((
            m_term(p, cand, theta, side, lambda, eta, Slot::X)?,
            m_term(p, cand, theta, side, lambda, eta, Slot::Y)?,
        ))
    };
    match approach {
        Approach::Right | Approach::Left => {
            let side = approach.sides()[0];
            let (mx, my) = m_parts(side)?;
            let rate = q2_sum_rate(p, cand, theta, side, lambda, eta)?;
            let value = lambda * (mx + my) + rate;
            let tol = opts.tol_eq * (1.0 + mx.abs() + my.abs() + rate.abs());
            let violated = match side {
                Side::Right => value < -tol,
                Side::Left => value > tol,
            };
            let evidence = vec![
                Evidence::new("M_x", mx, tol).at(theta),
                Evidence::new("M_y", my, tol).at(theta),
                Evidence::new("dQ2/dt", rate, tol).at(theta),
                Evidence::new("lambda*D + dQ2/dt", value, tol).at(theta),
            ];
            Ok(PointOutcome::Tested {
                value,
                tol,
                violated,
                evidence,
            })
        }
        Approach::TwoSided => {
            let (mx, my) = m_parts(Side::Right)?;
            let (lx, ly) = m_parts(Side::Left)?;
            let d = mx + my;
            let tol = opts.tol_eq * (1.0 + mx.abs() + my.abs());
            let kinks = p.kinks(cand.traj());
            let mut evidence = vec![
                Evidence::new("D (right)", d, tol).at(theta),
                Evidence::new("D (left)", lx + ly, tol).at(theta),
            ];
            let partner = scaled(eta, kappa(lambda));
            for (label, dir) in [("eta", eta.to_vec()), ("kappa*eta", partner)] {
                for side in [Side::Left, Side::Right] {
                    let rate =
                        one_sided_derivative(|u, s| e_sum(p, cand, u, s, &dir), theta, side, &kinks, p.t0(), p.t1())?;
                    evidence.push(
                        Evidence::new(&format!("dE_sum({label})/dt ({side})"), rate, 1e-6 * (1.0 + tol_deg)).at(theta),
                    );
                }
            }
            Ok(PointOutcome::Tested {
                value: d,
                tol,
                violated: d.abs() > tol,
                evidence,
            })
        }
    }
}

fn point_preconditions(p: &DelayProblem, theta: f64, approach: Approach, lambda: f64, eta: &[f64]) -> Result<()> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::Precondition(format!("lambda = {lambda} must lie in (0, 1)")));
    }
    if eta.len() != p.dim() || eta.iter().all(|v| *v == 0.0) {
        return Err(Error::Precondition(
            "eta must be a nonzero vector of the problem dimension".into(),
        ));
    }
    let (t0, t1) = (p.t0(), p.t1());
    let ok = match approach {
        Approach::Right => theta >= t0 - BREAK_TOL && theta < t1 - BREAK_TOL,
        Approach::Left => theta > t0 + BREAK_TOL && theta <= t1 + BREAK_TOL,
        Approach::TwoSided => theta > t0 + BREAK_TOL && theta < t1 - BREAK_TOL,
    };
    if !ok {
        return Err(Error::Precondition(format!(
            "theta = {theta} is not admissible for {approach:?} approach on [{t0}, {t1}]"
        )));
    }
    Ok(())
}

fn is_tail(p: &DelayProblem, theta: f64, approach: Approach) -> bool {
    let s = p.t1() - p.h();
    theta > s + BREAK_TOL || (theta >= s - BREAK_TOL && approach == Approach::Right)
}

/// Point test at `theta` for the direction pair `(eta, lambda)`.
///
/// One-sided approaches check the sign of `λ D + d/dt Q2`; the two-sided
/// approach checks `D = 0` and records the one-sided rates of both excess
/// sums, which vanish at an interior minimum.
pub fn point_check(
    p: &DelayProblem,
    cand: &CandidateExtremal,
    theta: f64,
    approach: Approach,
    lambda: f64,
    eta: &[f64],
    opts: &CheckOptions,
) -> Result<Verdict> {
    point_preconditions(p, theta, approach, lambda, eta)?;
    let tol_deg = opts.tol_deg * (1.0 + candidate_l_scale(p, cand)?);
    let tail = is_tail(p, theta, approach);
    match point_test(p, cand, theta, approach, lambda, eta, opts, tol_deg)? {
        PointOutcome::NotDegenerate { side, value } => Err(Error::Precondition(format!(
            "not degenerate at theta = {theta} ({side}): E_sum = {value:e} exceeds {tol_deg:e}"
        ))),
        PointOutcome::Tested {
            value,
            tol,
            violated,
            evidence,
        } => Ok(Verdict {
            condition: if approach == Approach::TwoSided {
                Condition::PointEquality
            } else {
                Condition::PointInequality
            },
            conclusion: if violated {
                Conclusion::FailsStrong
            } else {
                Conclusion::Consistent
            },
            quantity: value,
            tol,
            tail,
            notes: if tail { vec![tail_note()] } else { vec![] },
            evidence,
        }),
    }
}

/// Weak form of [`point_check`]: repeats it for `s * eta` over `scales`,
/// re-certifying degeneracy at each scale.
#[allow(clippy::too_many_arguments)]
pub fn point_check_weak(
    p: &DelayProblem,
    cand: &CandidateExtremal,
    theta: f64,
    approach: Approach,
    lambda: f64,
    eta: &[f64],
    scales: &[f64],
    opts: &CheckOptions,
) -> Result<Verdict> {
    if scales.is_empty() {
        return Err(Error::Precondition("scales must be nonempty".into()));
    }
    point_preconditions(p, theta, approach, lambda, eta)?;
    let tol_deg = opts.tol_deg * (1.0 + candidate_l_scale(p, cand)?);
    let tail = is_tail(p, theta, approach);
    let mut notes = if tail { vec![tail_note()] } else { vec![] };
    let mut evidence = Vec::new();
    let mut all_fail = true;
    let (mut quantity, mut tol) = (0.0, 0.0);
    for &s in scales {
        match point_test(p, cand, theta, approach, lambda, &scaled(eta, s), opts, tol_deg)? {
            PointOutcome::NotDegenerate { side, value } => {
                notes.push(format!(
                    "degeneracy not certified in small ball (scale {s}, {side}: E_sum = {value:e})"
                ));
                all_fail = false;
                break;
            }
            PointOutcome::Tested {
                value,
                tol: t,
                violated,
                evidence: ev,
            } => {
                evidence.extend(ev.into_iter().map(|e| e.scaled(s)));
                quantity = value;
                tol = t;
                if !violated {
                    notes.push(format!("condition holds at scale {s}"));
                    all_fail = false;
                }
            }
        }
    }
    Ok(Verdict {
        condition: if approach == Approach::TwoSided {
            Condition::PointEqualityWeak
        } else {
            Condition::PointInequalityWeak
        },
        conclusion: if all_fail {
            Conclusion::FailsWeak
        } else {
            Conclusion::Consistent
        },
        quantity,
        tol,
        tail,
        notes,
        evidence,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceCheck {
    pub theta: f64,
    pub side: Side,
    pub q1_x: f64,
    pub q1_y: f64,
    pub q1_sum: f64,
    pub e_sum_eta: f64,
    pub e_sum_partner: f64,
    pub tol_deg: f64,
    pub q1_vanishes: bool,
    pub excess_vanishes: bool,
    pub pass: bool,
}

/// Under the Weierstrass condition the `Q_1` sum vanishes exactly when both
/// excess sums at `eta` and `κ eta` vanish. Checks that both sides agree.
pub fn q1_equivalence(
    p: &DelayProblem,
    cand: &CandidateExtremal,
    theta: f64,
    side: Side,
    lambda: f64,
    eta: &[f64],
    opts: &CheckOptions,
) -> Result<EquivalenceCheck> {
    if eta.iter().all(|v| *v == 0.0) {
        return Err(Error::Precondition("eta must be nonzero".into()));
    }
    let scale = 1.0 + candidate_l_scale(p, cand)?;
    let (tol_deg, tol_w) = (opts.tol_deg * scale, opts.tol_w * scale);
    let a = e_sum(p, cand, theta, side, eta)?;
    let b = e_sum(p, cand, theta, side, &scaled(eta, kappa(lambda)))?;
    if a < -tol_w || b < -tol_w {
        return Err(Error::Precondition(format!(
            "Weierstrass condition fails at theta = {theta}: E_sum = {:e}",
            a.min(b)
        )));
    }
    let (q1_x, q1_y) = q_k(p, cand, theta, side, lambda, eta, 1)?;
    let q1_sum = q1_x + q1_y;
    let q1_vanishes = q1_sum.abs() <= tol_deg;
    let excess_vanishes = a.abs() <= tol_deg && b.abs() <= tol_deg;
    Ok(EquivalenceCheck {
        theta,
        side,
        q1_x,
        q1_y,
        q1_sum,
        e_sum_eta: a,
        e_sum_partner: b,
        tol_deg,
        q1_vanishes,
        excess_vanishes,
        pass: q1_vanishes == excess_vanishes,
    })
}

/// Settings for [`full_report`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub euler_grid: usize,
    pub weierstrass_grid: usize,
    pub degeneracy_grid: usize,
    pub theorem_grid: usize,
    pub radii: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub scales: Vec<f64>,
    pub tol_euler: f64,
    pub tol_w: f64,
    pub tol_deg: f64,
    pub tol_eq: f64,
    pub sweep_levels: usize,
    pub sweep_ratio: f64,
    pub fit_extra_terms: usize,
    pub spot_checks: usize,
    pub seed: u64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            euler_grid: 100,
            weierstrass_grid: 200,
            degeneracy_grid: 200,
            theorem_grid: 50,
            radii: DEFAULT_RADII.to_vec(),
            lambdas: (1..10).map(|k| k as f64 / 10.0).collect(),
            scales: DEFAULT_SCALES.to_vec(),
            tol_euler: 1e-6,
            tol_w: 1e-9,
            tol_deg: 1e-9,
            tol_eq: 1e-7,
            sweep_levels: 8,
            sweep_ratio: 0.5,
            fit_extra_terms: 1,
            spot_checks: 3,
            seed: 0,
        }
    }
}

impl AnalysisConfig {
    pub fn check_options(&self) -> CheckOptions {
        CheckOptions {
            tol_eq: self.tol_eq,
            tol_deg: self.tol_deg,
            tol_w: self.tol_w,
            grid: self.theorem_grid,
        }
    }

    pub fn scan_tolerances(&self) -> ScanTolerances {
        ScanTolerances {
            tol_w: self.tol_w,
            tol_deg: self.tol_deg,
        }
    }

    pub fn sweep_options(&self) -> SweepOptions {
        SweepOptions {
            eps_max: None,
            ratio: self.sweep_ratio,
            levels: self.sweep_levels,
            extra_terms: self.fit_extra_terms,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Precondition(what.to_string()));
        if self.euler_grid == 0 || self.weierstrass_grid == 0 || self.degeneracy_grid == 0 || self.theorem_grid < 2 {
            return bad("grids must be nonempty (theorem_grid >= 2)");
        }
        if self.radii.is_empty() || self.radii.iter().any(|r| !(*r > 0.0)) {
            return bad("radii must be positive and nonempty");
        }
        if self.lambdas.is_empty() || self.lambdas.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
            return bad("lambdas must lie in (0, 1) and be nonempty");
        }
        if self.scales.is_empty() || self.scales.iter().any(|s| !(*s > 0.0)) {
            return bad("scales must be positive and nonempty");
        }
        for (name, v) in [
            ("tol_euler", self.tol_euler),
            ("tol_w", self.tol_w),
            ("tol_deg", self.tol_deg),
            ("tol_eq", self.tol_eq),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Precondition(format!("{name} must be positive")));
            }
        }
        if self.sweep_levels < 4 + self.fit_extra_terms {
            return bad("sweep_levels must be at least 4 + fit_extra_terms");
        }
        if !(self.sweep_ratio > 0.0 && self.sweep_ratio < 1.0) {
            return bad("sweep_ratio must lie in (0, 1)");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerPoint {
    pub t: f64,
    pub side: Side,
    pub residual: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerStage {
    pub tol: f64,
    pub max_residual: f64,
    pub worst_t: f64,
    pub holds: bool,
    pub points: Vec<EulerPoint>,
}

/// Euler residuals on `n` subintervals of the horizon, both sides at kinks.
///
/// The tolerance is `tol_rel (1 + max |L_dx| + max |L_x|)` over the grid.
pub fn euler_stage(p: &DelayProblem, cand: &CandidateExtremal, n: usize, tol_rel: f64) -> Result<EulerStage> {
    let entries: Vec<(f64, Side)> = uniform_grid(p.t0(), p.t1(), n)
        .into_iter()
        .flat_map(|t| sides_at(p, cand, t).into_iter().map(move |s| (t, s)))
        .collect();
    let rows = entries
        .par_iter()
        .map(|&(t, side)| {
            let residual = euler_residual(p, cand, t, side)?;
            let ctx = p.along(cand, t, side)?;
            let scale = [crate::expr::Block::X, crate::expr::Block::Dx]
                .iter()
                .map(|&b| {
                    p.gradient_at(&ctx, b)
                        .map(|g| g.iter().fold(0.0f64, |m, v| m.max(v.abs())))
                })
                .sum::<Result<f64>>()?;
            Ok((EulerPoint { t, side, residual }, scale))
        })
        .collect::<Result<Vec<_>>>()?;
    let scale = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let tol = tol_rel * (1.0 + scale);
    let points: Vec<EulerPoint> = rows.into_iter().map(|r| r.0).collect();
    let (mut worst_t, mut max_residual) = (p.t0(), 0.0f64);
    for pt in &points {
        let m = pt.residual.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if m > max_residual {
            max_residual = m;
            worst_t = pt.t;
        }
    }
    Ok(EulerStage {
        tol,
        max_residual,
        worst_t,
        holds: max_residual <= tol,
        points,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "detail")]
pub enum Stage<T> {
    Done(T),
    Error(String),
    Skipped(String),
}

impl<T> Stage<T> {
    fn from_result(r: Result<T>) -> Self {
        match r {
            Ok(v) => Stage::Done(v),
            Err(e) => Stage::Error(e.to_string()),
        }
    }

    pub fn done(&self) -> Option<&T> {
        match self {
            Stage::Done(v) => Some(v),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FindingChecks {
    pub finding: usize,
    pub verdicts: Vec<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equivalence: Option<EquivalenceCheck>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub config: AnalysisConfig,
    pub euler: Stage<EulerStage>,
    pub weierstrass: Stage<WeierstrassScanReport>,
    pub degeneracy: Stage<DegeneracyReport>,
    pub checks: Stage<Vec<FindingChecks>>,
    pub increments: Stage<Vec<IncrementRecord>>,
    /// Every verdict issued, in pipeline order.
    pub verdicts: Vec<Verdict>,
    pub conclusion: Conclusion,
}

/// Random admissible needles whose support at the default sweep width avoids
/// every kink of the candidate.
pub fn spot_check_specs(p: &DelayProblem, cand: &CandidateExtremal, count: usize, seed: u64) -> Vec<NeedleSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kinks = p.kinks(cand.traj());
    let dirs = crate::conditions::unit_directions(p.dim());
    let mut out = Vec::with_capacity(count);
    let mut tries = 0;
    while out.len() < count && tries < 200 * (count + 1) {
        tries += 1;
        let theta = rng.gen_range(p.t0()..p.t1());
        let side = if rng.gen_bool(0.5) { Side::Right } else { Side::Left };
        let lambda = rng.gen_range(0.1..0.9);
        let dir = &dirs[rng.gen_range(0..dirs.len())];
        let radius = rng.gen_range(0.5..2.0);
        let Ok(spec) = NeedleSpec::new(theta, lambda, scaled(dir, radius), side) else {
            continue;
        };
        let Ok(eps) = spec.default_eps_max(p) else {
            continue;
        };
        if eps < 1e-3 * (p.t1() - p.t0()) {
            continue;
        }
        let (a, b) = spec.support(eps);
        let clear = |lo: f64, hi: f64| kinks.iter().all(|&k| k <= lo || k >= hi);
        if clear(a, b) && clear(a + p.h(), b + p.h()) && clear(a - p.h(), b - p.h()) {
            out.push(spec);
        }
    }
    out
}

/// Runs every stage: Euler residuals, the Weierstrass scan, degeneracy
/// detection, the interval and point tests, and expansion spot checks.
///
/// A failed Euler stage ends the pipeline with `FAILS_WEAK`.
pub fn full_report(p: &DelayProblem, cand: &CandidateExtremal, cfg: &AnalysisConfig) -> Result<AnalysisReport> {
    cfg.validate()?;
    let opts = cfg.check_options();
    let mut verdicts = Vec::new();

    let euler = Stage::from_result(euler_stage(p, cand, cfg.euler_grid, cfg.tol_euler));
    let euler_ok = matches!(&euler, Stage::Done(e) if e.holds);
    if let Stage::Done(e) = &euler {
        verdicts.push(Verdict {
            condition: Condition::Euler,
            conclusion: if e.holds {
                Conclusion::Consistent
            } else {
                Conclusion::FailsWeak
            },
            quantity: e.max_residual,
            tol: e.tol,
            tail: false,
            notes: vec![],
            evidence: vec![Evidence::new("max |residual|", e.max_residual, e.tol).at(e.worst_t)],
        });
    }
    if !euler_ok {
        let why = "candidate does not satisfy the Euler equation";
        let conclusion = verdicts
            .iter()
            .map(|v| v.conclusion)
            .max()
            .unwrap_or(Conclusion::FailsWeak);
        return Ok(AnalysisReport {
            config: cfg.clone(),
            euler,
            weierstrass: Stage::Skipped(why.to_string()),
            degeneracy: Stage::Skipped(why.to_string()),
            checks: Stage::Skipped(why.to_string()),
            increments: Stage::Skipped(why.to_string()),
            conclusion: conclusion.max(Conclusion::FailsWeak),
            verdicts,
        });
    }

    let w_grid = scan_grid(p, cand, cfg.weierstrass_grid);
    let samples = xi_samples(p.dim(), &cfg.radii);
    let weierstrass = Stage::from_result(weierstrass_scan(p, cand, &w_grid, &samples, cfg.scan_tolerances()));
    if let Stage::Done(w) = &weierstrass {
        let worst = w
            .points
            .iter()
            .min_by(|a, b| a.min_e_sum.total_cmp(&b.min_e_sum))
            .map(|pt| pt.t)
            .unwrap_or(p.t0());
        verdicts.push(Verdict {
            condition: Condition::Weierstrass,
            conclusion: if w.holds {
                Conclusion::Consistent
            } else {
                Conclusion::FailsStrong
            },
            quantity: w.min_e_sum,
            tol: w.tol_w,
            tail: false,
            notes: vec![],
            evidence: vec![Evidence::new("min E_sum", w.min_e_sum, w.tol_w).at(worst)],
        });
    }

    let d_grid = degeneracy_grid(p, cfg.degeneracy_grid);
    let degeneracy = Stage::from_result(detect_degeneracy(p, cand, &d_grid, &samples, &cfg.lambdas, cfg.tol_deg));

    let checks = match &degeneracy {
        Stage::Done(d) => {
            let mut all = Vec::new();
            for (i, f) in d.findings.iter().enumerate() {
                let mut fc = FindingChecks {
                    finding: i,
                    verdicts: vec![],
                    equivalence: None,
                    errors: vec![],
                };
                let (theta, side) = match f.kind {
                    FindingKind::Interval => (0.5 * (f.start + f.end), Side::Right),
                    FindingKind::Point => (f.start, f.side.unwrap_or(Side::Right)),
                };
                let res = match f.kind {
                    FindingKind::Interval => interval_check(p, cand, f, &cfg.scales, &opts).map(|v| v.to_vec()),
                    FindingKind::Point => {
                        let approach = Approach::from(side);
                        point_check(p, cand, theta, approach, f.lambda, &f.eta, &opts).and_then(|a| {
                            let b = point_check_weak(p, cand, theta, approach, f.lambda, &f.eta, &cfg.scales, &opts)?;
                            Ok(vec![a, b])
                        })
                    }
                };
                match res {
                    Ok(v) => fc.verdicts = v,
                    Err(e) => fc.errors.push(e.to_string()),
                }
                match q1_equivalence(p, cand, theta, side, f.lambda, &f.eta, &opts) {
                    Ok(eq) => fc.equivalence = Some(eq),
                    Err(e) => fc.errors.push(e.to_string()),
                }
                verdicts.extend(fc.verdicts.iter().cloned());
                all.push(fc);
            }
            Stage::Done(all)
        }
        _ => Stage::Skipped("degeneracy stage did not complete".to_string()),
    };

    let mut specs = Vec::new();
    if let Stage::Done(d) = &degeneracy {
        if let Some(f) = d.intervals().next() {
            if let Ok(s) = NeedleSpec::new(0.5 * (f.start + f.end), f.lambda, f.eta.clone(), Side::Right) {
                specs.push(s);
            }
        }
    }
    specs.extend(spot_check_specs(p, cand, cfg.spot_checks, cfg.seed));
    let increments = Stage::from_result(
        specs
            .iter()
            .map(|s| verify_expansion(p, cand, s, cfg.sweep_options()))
            .collect::<Result<Vec<_>>>(),
    );

    let conclusion = verdicts
        .iter()
        .map(|v| v.conclusion)
        .max()
        .unwrap_or(Conclusion::Consistent);
    Ok(AnalysisReport {
        config: cfg.clone(),
        euler,
        weierstrass,
        degeneracy,
        checks,
        increments,
        verdicts,
        conclusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_lagrangian;
    use crate::problem::HistorySpec;
    use crate::trajectory::Trajectory;

    const EX: &str = "(1 - x1)*dx1^2 - (1 + y1)*dy1^2 + dx1*dy1";

    fn setup(l: &str, interior: &str) -> (DelayProblem, CandidateExtremal) {
        let lag = parse_lagrangian(l, 1).unwrap();
        let phi = Trajectory::zero(1, -1.0, 0.0).unwrap();
        let p = DelayProblem::new(0.0, 3.0, 1.0, lag, HistorySpec::new(phi, vec![0.0]).unwrap()).unwrap();
        let inner = Trajectory::parse(1, &[(0.0, 3.0, vec![interior.to_string()])]).unwrap();
        let c = CandidateExtremal::splice(&p, &inner).unwrap();
        (p, c)
    }

    fn example_findings() -> (DelayProblem, CandidateExtremal, DegeneracyReport) {
        let (p, c) = setup(EX, "0");
        let grid = degeneracy_grid(&p, 200);
        let lambdas: Vec<f64> = (1..10).map(|k| k as f64 / 10.0).collect();
        let d = detect_degeneracy(&p, &c, &grid, &xi_samples(1, &DEFAULT_RADII), &lambdas, 1e-9).unwrap();
        (p, c, d)
    }

    #[test]
    fn example_has_one_interval_finding() {
        let (_, _, d) = example_findings();
        assert_eq!(d.findings.len(), 1, "{:#?}", d.findings);
        let f = &d.findings[0];
        assert_eq!(f.kind, FindingKind::Interval);
        assert_eq!((f.start, f.end), (0.0, 2.0));
        assert_eq!(f.pairs.len(), 8 * 9);
        assert_eq!((f.eta.clone(), f.lambda), (vec![1.0], 0.5));
        assert!(!f.tail);
    }

    #[test]
    fn no_findings_on_tail_or_convex_problem() {
        let (p, c) = setup(EX, "0");
        let tail = uniform_grid(2.05, 3.0, 50);
        let d = detect_degeneracy(&p, &c, &tail, &xi_samples(1, &DEFAULT_RADII), &[0.5], 1e-9).unwrap();
        assert!(d.findings.is_empty());
        let (p, c) = setup("dx1^2", "0");
        let d = detect_degeneracy(
            &p,
            &c,
            &degeneracy_grid(&p, 50),
            &xi_samples(1, &DEFAULT_RADII),
            &[0.3, 0.5],
            1e-9,
        )
        .unwrap();
        assert!(d.findings.is_empty());
    }

    #[test]
    fn findings_close_under_pairing() {
        let (_, _, d) = example_findings();
        let f = &d.findings[0];
        for pair in &f.pairs {
            let partner_eta: Vec<f64> = scaled(&pair.eta, kappa(pair.lambda));
            let partner_lambda = 1.0 - pair.lambda;
            // kappa(1 - lambda) * kappa(lambda) = 1, so the partner maps back to eta
            let back = scaled(&partner_eta, kappa(partner_lambda));
            assert!((back[0] - pair.eta[0]).abs() < 1e-12);
            let present = f
                .pairs
                .iter()
                .any(|q| (q.lambda - partner_lambda).abs() < 1e-12 && (q.eta[0] - partner_eta[0]).abs() < 1e-12);
            if (partner_eta[0].abs() - 1.0).abs() < 1e-12 || partner_eta[0].abs() == 0.5 {
                assert!(present, "{pair:?}");
            }
        }
    }

    #[test]
    fn interval_check_on_example() {
        let (p, c, d) = example_findings();
        let [strong, weak] = interval_check(&p, &c, &d.findings[0], &DEFAULT_SCALES, &CheckOptions::default()).unwrap();
        assert_eq!(strong.conclusion, Conclusion::FailsStrong);
        assert_eq!(strong.quantity, -2.0);
        assert_eq!(weak.conclusion, Conclusion::FailsWeak);
        let values: Vec<f64> = weak.evidence.iter().map(|e| e.value).collect();
        assert_eq!(values, vec![-2.0, -0.25, -2.0 / 64.0, -2.0 / 512.0]);
    }

    #[test]
    fn interval_check_guards() {
        let (p, c, d) = example_findings();
        let mut bad = d.findings[0].clone();
        bad.start = 2.2;
        bad.end = 2.8;
        assert!(matches!(
            interval_check(&p, &c, &bad, &DEFAULT_SCALES, &CheckOptions::default()),
            Err(Error::Precondition(_))
        ));
        let mut point = d.findings[0].clone();
        point.kind = FindingKind::Point;
        assert!(interval_check(&p, &c, &point, &DEFAULT_SCALES, &CheckOptions::default()).is_err());
    }

    #[test]
    fn linear_state_dependence_is_consistent() {
        // E_sum = xi^2 - xi^2 as in the example, but L_x and L_y do not depend on the velocities
        let (p, c) = setup("dx1^2 - dy1^2 + x1 + 2*y1 + t", "0");
        let lambdas = [0.5];
        let d = detect_degeneracy(&p, &c, &degeneracy_grid(&p, 40), &xi_samples(1, &[1.0]), &lambdas, 1e-9).unwrap();
        let f = d.intervals().next().expect("interval finding");
        let [strong, weak] = interval_check(&p, &c, f, &DEFAULT_SCALES, &CheckOptions::default()).unwrap();
        assert_eq!(
            (strong.conclusion, weak.conclusion),
            (Conclusion::Consistent, Conclusion::Consistent)
        );
    }

    #[test]
    fn point_checks_on_example() {
        let (p, c) = setup(EX, "0");
        let o = CheckOptions::default();
        let v = point_check(&p, &c, 1.0, Approach::TwoSided, 0.5, &[1.0], &o).unwrap();
        assert_eq!(
            (v.condition, v.conclusion, v.quantity),
            (Condition::PointEquality, Conclusion::FailsStrong, -2.0)
        );
        let fermat: Vec<&Evidence> = v.evidence.iter().filter(|e| e.label.starts_with("dE_sum")).collect();
        assert_eq!(fermat.len(), 4);
        assert!(fermat.iter().all(|e| e.value.abs() <= e.tol));
        let r = point_check(&p, &c, 1.0, Approach::Right, 0.5, &[1.0], &o).unwrap();
        assert_eq!((r.conclusion, r.quantity), (Conclusion::FailsStrong, -1.0));
        let l = point_check(&p, &c, 1.0, Approach::Left, 0.5, &[1.0], &o).unwrap();
        assert_eq!(l.conclusion, Conclusion::Consistent);
        let w = point_check_weak(&p, &c, 1.0, Approach::TwoSided, 0.5, &[1.0], &DEFAULT_SCALES, &o).unwrap();
        assert_eq!(w.conclusion, Conclusion::FailsWeak);
        assert!(point_check(&p, &c, 2.5, Approach::Right, 0.5, &[1.0], &o).is_err());
        assert!(point_check_weak(&p, &c, 1.0, Approach::Right, 0.5, &[1.0], &[], &o).is_err());
    }

    #[test]
    fn stationary_problem_reduces_to_sign_of_d() {
        let (p, c) = setup("(1 - x1)*dx1^2 - (1 + y1)*dy1^2", "0");
        let v = point_check(&p, &c, 0.5, Approach::Right, 0.5, &[-1.0], &CheckOptions::default()).unwrap();
        let dq = v.evidence.iter().find(|e| e.label == "dQ2/dt").unwrap();
        assert_eq!(dq.value, 0.0);
        assert_eq!(v.quantity, 1.0);
        assert_eq!(v.conclusion, Conclusion::Consistent);
    }

    #[test]
    fn degeneracy_only_at_unit_radius() {
        let (p, c) = setup("dx1^2*(dx1 - 1)^2*(dx1 + 1)^2", "0");
        let v = point_check_weak(
            &p,
            &c,
            1.0,
            Approach::Right,
            0.5,
            &[1.0],
            &DEFAULT_SCALES,
            &CheckOptions::default(),
        )
        .unwrap();
        assert_eq!(v.conclusion, Conclusion::Consistent);
        assert!(v
            .notes
            .iter()
            .any(|n| n.contains("degeneracy not certified in small ball")));
    }

    #[test]
    fn q1_equivalence_both_branches() {
        let (p, c) = setup(EX, "0");
        let o = CheckOptions::default();
        let inside = q1_equivalence(&p, &c, 1.0, Side::Right, 0.5, &[1.0], &o).unwrap();
        assert!(inside.pass && inside.q1_vanishes && inside.excess_vanishes);
        let tail = q1_equivalence(&p, &c, 2.5, Side::Right, 0.5, &[1.0], &o).unwrap();
        assert!(tail.pass && !tail.q1_vanishes);
        assert_eq!((tail.e_sum_eta, tail.q1_sum), (1.0, 1.0));
        assert!(q1_equivalence(&p, &c, 1.0, Side::Right, 0.5, &[0.0], &o).is_err());
    }

    #[test]
    fn full_report_on_example() {
        let (p, c) = setup(EX, "0");
        let r = full_report(&p, &c, &AnalysisConfig::default()).unwrap();
        assert!(r.euler.done().unwrap().holds);
        assert!(r.weierstrass.done().unwrap().holds);
        let d = r.degeneracy.done().unwrap();
        assert_eq!(d.findings.len(), 1);
        let conds: Vec<(Condition, Conclusion)> = r.verdicts.iter().map(|v| (v.condition, v.conclusion)).collect();
        assert!(conds.contains(&(Condition::IntervalEquality, Conclusion::FailsStrong)));
        assert!(conds.contains(&(Condition::IntervalEqualityWeak, Conclusion::FailsWeak)));
        assert_eq!(r.conclusion, Conclusion::FailsWeak);
        let inc = r.increments.done().unwrap();
        assert!(inc.len() >= 2 && inc.iter().all(|rec| rec.pass), "{inc:#?}");
    }

    #[test]
    fn full_report_on_convex_problem() {
        let (p, c) = setup("dx1^2 + dy1^2", "0");
        let r = full_report(&p, &c, &AnalysisConfig::default()).unwrap();
        assert!(r.degeneracy.done().unwrap().findings.is_empty());
        assert_eq!(r.conclusion, Conclusion::Consistent);
    }

    #[test]
    fn full_report_stops_after_euler() {
        let (p, c) = setup(EX, "0.1*t*(3 - t)");
        let r = full_report(&p, &c, &AnalysisConfig::default()).unwrap();
        assert!(!r.euler.done().unwrap().holds);
        assert!(matches!(r.weierstrass, Stage::Skipped(_)));
        assert!(matches!(r.increments, Stage::Skipped(_)));
        assert_eq!(r.conclusion, Conclusion::FailsWeak);
    }
}
