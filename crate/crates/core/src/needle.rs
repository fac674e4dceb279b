//! Two-branch needle variations.
//!
//! A right needle at `theta` rises with slope `xi` on `[theta, theta + λε]`
//! and returns to zero with slope `κ xi` on `[theta + λε, theta + ε]`, where
//! `κ = λ / (λ - 1)`. The left needle is its mirror image on
//! `[theta - ε, theta]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{CandidateExtremal, DelayProblem};
use crate::quadrature::BREAK_TOL;
use crate::trajectory::{LinearPiece, Side, Trajectory};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeedleSpec {
    theta: f64,
    lambda: f64,
    xi: Vec<f64>,
    side: Side,
}

/// Whether the delayed copy of the needle still lands inside the horizon.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Main,
    Tail,
}

/// Admissible needle widths at a given `theta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidityWindow {
    /// Right-needle limit, if a right needle is admissible at `theta`.
    pub eps_bar: Option<f64>,
    /// Left-needle limit, if a left needle is admissible at `theta`.
    pub eps_tilde: Option<f64>,
}

impl ValidityWindow {
    pub fn at(p: &DelayProblem, theta: f64) -> Self {
        let (t0, t1, h) = (p.t0(), p.t1(), p.h());
        let eps_bar = if theta >= t0 - BREAK_TOL && theta < t1 - h {
            Some(h.min(t1 - theta - h))
        } else if theta >= t1 - h && theta < t1 {
            Some(h.min(t1 - theta))
        } else {
            None
        };
        let eps_tilde = if theta > t0 && theta <= t1 + BREAK_TOL {
            Some(h.min(theta - t0))
        } else {
            None
        };
        ValidityWindow {
            eps_bar: eps_bar.filter(|v| *v > 0.0),
            eps_tilde: eps_tilde.filter(|v| *v > 0.0),
        }
    }

    pub fn for_side(&self, side: Side) -> Option<f64> {
        match side {
            Side::Right => self.eps_bar,
            Side::Left => self.eps_tilde,
        }
    }

    /// `min(eps_bar, eps_tilde)` over whichever limits exist.
    pub fn eps_hat(&self) -> Option<f64> {
        match (self.eps_bar, self.eps_tilde) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }
}

impl NeedleSpec {
    pub fn new(theta: f64, lambda: f64, xi: Vec<f64>, side: Side) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::InvalidNeedle("theta must be finite".into()));
        }
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::InvalidNeedle(format!("lambda = {lambda} must lie in (0, 1)")));
        }
        if xi.is_empty() || xi.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidNeedle("xi must be a finite vector".into()));
        }
        if xi.iter().all(|v| *v == 0.0) {
            return Err(Error::InvalidNeedle("xi must be nonzero".into()));
        }
        Ok(NeedleSpec {
            theta,
            lambda,
            xi,
            side,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn side(&self) -> Side {
        self.side
    }

    /// Slope ratio of the outer branch, `λ / (λ - 1)`.
    pub fn kappa(&self) -> f64 {
        self.lambda / (self.lambda - 1.0)
    }

    pub fn regime(&self, p: &DelayProblem) -> Result<Regime> {
        let (t0, t1, h) = (p.t0(), p.t1(), p.h());
        let th = self.theta;
        let r = match self.side {
            Side::Right if th >= t0 - BREAK_TOL && th < t1 - h => Regime::Main,
            Side::Right if th >= t1 - h && th < t1 => Regime::Tail,
            Side::Left if th > t0 && th <= t1 - h + BREAK_TOL => Regime::Main,
            Side::Left if th > t1 - h && th <= t1 + BREAK_TOL => Regime::Tail,
            _ => {
                return Err(Error::InvalidNeedle(format!(
                    "{} needle at theta = {th} is outside the admissible range of [{t0}, {t1}]",
                    self.side
                )))
            }
        };
        Ok(r)
    }

    /// Upper bound on `ε` for this needle.
    pub fn window(&self, p: &DelayProblem) -> Result<f64> {
        self.regime(p)?;
        ValidityWindow::at(p, self.theta)
            .for_side(self.side)
            .ok_or_else(|| Error::InvalidNeedle(format!("empty window at theta = {}", self.theta)))
    }

    /// Largest width used by default sweeps: a quarter of the window, capped at 1/4.
    ///
    /// A left needle in the tail keeps its delayed copy beyond `t1` only while
    /// `ε < theta - (t1 - h)`, so that distance also caps the sweep.
    pub fn default_eps_max(&self, p: &DelayProblem) -> Result<f64> {
        let mut w = self.window(p)?.min(1.0);
        if self.side == Side::Left && self.regime(p)? == Regime::Tail {
            w = w.min(self.theta - (p.t1() - p.h()));
        }
        Ok(w / 4.0)
    }

    pub fn check_eps(&self, p: &DelayProblem, eps: f64) -> Result<()> {
        let limit = self.window(p)?;
        if !(eps > 0.0 && eps < limit) {
            return Err(Error::OutsideWindow { eps, limit });
        }
        Ok(())
    }

    /// Support `[start, end]` of the needle.
    pub fn support(&self, eps: f64) -> (f64, f64) {
        match self.side {
            Side::Right => (self.theta, self.theta + eps),
            Side::Left => (self.theta - eps, self.theta),
        }
    }

    /// The support ends and the interior corner, ascending.
    pub fn corners(&self, eps: f64) -> [f64; 3] {
        let (a, b) = self.support(eps);
        [a, self.corner(eps), b]
    }

    /// Interior corner `theta ± λε`.
    pub fn corner(&self, eps: f64) -> f64 {
        self.theta + self.side.sign() * self.lambda * eps
    }

    /// The needle as two linear pieces (inner branch first).
    pub fn pieces(&self, eps: f64) -> [LinearPiece; 2] {
        let c = self.corner(eps);
        let far = self.theta + self.side.sign() * eps;
        let inner = LinearPiece {
            start: self.theta.min(c),
            end: self.theta.max(c),
            slope: self.xi.clone(),
            anchor: self.theta,
        };
        let outer = LinearPiece {
            start: c.min(far),
            end: c.max(far),
            slope: self.xi.iter().map(|v| self.kappa() * v).collect(),
            anchor: far,
        };
        [inner, outer]
    }

    fn value_unchecked(&self, eps: f64, t: f64) -> Vec<f64> {
        let [inner, outer] = self.pieces(eps);
        for piece in [&inner, &outer] {
            if t >= piece.start && t <= piece.end {
                return piece.slope.iter().map(|s| s * (t - piece.anchor)).collect();
            }
        }
        vec![0.0; self.xi.len()]
    }

    fn slope_unchecked(&self, eps: f64, t: f64, side: Side) -> Vec<f64> {
        let [inner, outer] = self.pieces(eps);
        let inside = |pc: &LinearPiece| match side {
            Side::Right => t >= pc.start && t < pc.end,
            Side::Left => t > pc.start && t <= pc.end,
        };
        for piece in [&inner, &outer] {
            if inside(piece) {
                return piece.slope.clone();
            }
        }
        vec![0.0; self.xi.len()]
    }

    /// `q(t)` for this needle; `ε` must lie in the window.
    pub fn q(&self, p: &DelayProblem, eps: f64, t: f64) -> Result<Vec<f64>> {
        self.check_eps(p, eps)?;
        Ok(self.value_unchecked(eps, t))
    }

    /// One-sided `q'(t)`; corner values follow `side`.
    pub fn qdot(&self, p: &DelayProblem, eps: f64, t: f64, side: Side) -> Result<Vec<f64>> {
        self.check_eps(p, eps)?;
        Ok(self.slope_unchecked(eps, t, side))
    }

    /// `(sup |q|, sup |q'|)` in the Euclidean norm, from corner evaluations.
    pub fn norms(&self, p: &DelayProblem, eps: f64) -> Result<(f64, f64)> {
        self.check_eps(p, eps)?;
        // closed forms: the peak sits at the interior corner, and the outer
        // slope is |κ| = λ/(1-λ) times the inner one
        let xi = self.xi.iter().map(|x| x * x).sum::<f64>().sqrt();
        let sup_q = self.lambda * eps * xi;
        let sup_qdot = xi.max(self.lambda / (1.0 - self.lambda) * xi);
        Ok((sup_q, sup_qdot))
    }

    /// The needle itself as a trajectory on `[t0-h, t1]`.
    pub fn as_trajectory(&self, p: &DelayProblem, eps: f64) -> Result<Trajectory> {
        self.check_support(p, eps)?;
        Trajectory::zero(self.xi.len(), p.t0() - p.h(), p.t1())?.add_linear_pieces(&self.pieces(eps))
    }

    fn check_support(&self, p: &DelayProblem, eps: f64) -> Result<()> {
        if self.xi.len() != p.dim() {
            return Err(Error::InvalidNeedle(format!(
                "xi has {} components, problem dimension is {}",
                self.xi.len(),
                p.dim()
            )));
        }
        self.check_eps(p, eps)?;
        let (a, b) = self.support(eps);
        if a < p.t0() - BREAK_TOL || b > p.t1() + BREAK_TOL {
            return Err(Error::InvalidNeedle(format!(
                "needle support [{a}, {b}] escapes [{}, {}]",
                p.t0(),
                p.t1()
            )));
        }
        Ok(())
    }
}

/// `x̄ + q`: the candidate with the needle added.
pub fn vary(p: &DelayProblem, cand: &CandidateExtremal, spec: &NeedleSpec, eps: f64) -> Result<Trajectory> {
    spec.check_support(p, eps)?;
    cand.traj().add_linear_pieces(&spec.pieces(eps))
}
