//! Needle increments of the cost.
//!
//! `ΔS(ε)` is measured directly by quadrature of `L(varied) - L(candidate)`,
//! and separately predicted as `c1 ε + c2 ε²` from the condition functionals.
//! The two paths share no code beyond the problem definition: the direct path
//! never touches `E`, `Q` or `M`, and the prediction never integrates `L`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditions::{m_term, needle_first_variation, q2_sum_rate, q_k, Slot};
use crate::error::Result;
use crate::needle::{vary, NeedleSpec};
use crate::problem::{CandidateExtremal, DelayProblem};
use crate::quadrature::{fit_expansion_with, EpsSweep, ExpansionFit};
use crate::trajectory::Side;

/// `ΔS` integrated over the needle support and its `+h` shift only.
pub fn delta_s_direct(p: &DelayProblem, cand: &CandidateExtremal, spec: &NeedleSpec, eps: f64) -> Result<f64> {
    let varied = vary(p, cand, spec, eps)?;
    let base = cand.traj();
    let corners = spec.corners(eps);
    let mut breaks: Vec<f64> = corners.iter().flat_map(|&c| [c, c + p.h()]).collect();
    breaks.extend(p.kinks(base));
    let (a, b) = spec.support(eps);
    let mut total = 0.0;
    for (lo, hi) in [(a, b), (a + p.h(), b + p.h())] {
        let hi = hi.min(p.t1());
        if lo >= hi {
            continue;
        }
        total += p.quad().integrate(lo, hi, &breaks, |t| {
            let moved = p.l_at(&p.context(&varied, t, Side::Right)?)?;
            let fixed = p.l_at(&p.context(base, t, Side::Right)?)?;
            Ok(moved - fixed)
        })?;
    }
    Ok(total)
}

/// `S(varied) - S(candidate)` over the whole horizon.
pub fn delta_s_full(p: &DelayProblem, cand: &CandidateExtremal, spec: &NeedleSpec, eps: f64) -> Result<f64> {
    let varied = vary(p, cand, spec, eps)?;
    Ok(p.eval_s(&varied)? - p.eval_s(cand.traj())?)
}

/// Predicted `ΔS ≈ c1 ε + c2 ε²` with its ingredients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub c1: f64,
    pub c2: f64,
    pub q1_x: f64,
    pub q1_y: f64,
    pub m_x: f64,
    pub m_y: f64,
    /// One-sided `d/dt` of the `Q_2` sum at `theta`, taken on the needle's side.
    pub q2_rate: f64,
}

/// Right needles: `c2 = ½(λ D + d/dt Q2)` with the forward derivative.
/// Left needles: `c2 = -½(λ D + d/dt Q2)` with the backward derivative.
pub fn expansion_prediction(p: &DelayProblem, cand: &CandidateExtremal, spec: &NeedleSpec) -> Result<Prediction> {
    spec.regime(p)?;
    let (theta, side, lambda, xi) = (spec.theta(), spec.side(), spec.lambda(), spec.xi());
    let (q1_x, q1_y) = q_k(p, cand, theta, side, lambda, xi, 1)?;
    let m_x = m_term(p, cand, theta, side, lambda, xi, Slot::X)?;
    let m_y = m_term(p, cand, theta, side, lambda, xi, Slot::Y)?;
    let q2_rate = q2_sum_rate(p, cand, theta, side, lambda, xi)?;
    let c2 = side.sign() * 0.5 * (lambda * (m_x + m_y) + q2_rate);
    Ok(Prediction {
        c1: q1_x + q1_y,
        c2,
        q1_x,
        q1_y,
        m_x,
        m_y,
        q2_rate,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    /// Largest width; defaults to a quarter of the needle's window.
    pub eps_max: Option<f64>,
    pub ratio: f64,
    pub levels: usize,
    /// Higher-order terms fitted alongside `(c1, c2)` and discarded.
    pub extra_terms: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            eps_max: None,
            ratio: 0.5,
            levels: 8,
            extra_terms: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncrementRecord {
    pub spec: NeedleSpec,
    pub eps: Vec<f64>,
    pub delta_s: Vec<f64>,
    pub predicted: Prediction,
    pub fitted_c1: f64,
    pub fitted_c2: f64,
    pub fit_residual: f64,
    pub fit_dropped: usize,
    pub tol: f64,
    pub pass: bool,
}

/// `max(1e-6, 1e-3 max(|c1|, |c2|, 1))`.
pub fn expansion_tolerance(c1: f64, c2: f64) -> f64 {
    1e-6f64.max(1e-3 * c1.abs().max(c2.abs()).max(1.0))
}

impl IncrementRecord {
    fn assemble(spec: &NeedleSpec, sweep: EpsSweep, predicted: Prediction, fit: ExpansionFit) -> Self {
        let tol = expansion_tolerance(predicted.c1, predicted.c2);
        let pass = (fit.c1 - predicted.c1).abs() <= tol && (fit.c2 - predicted.c2).abs() <= tol;
        IncrementRecord {
            spec: spec.clone(),
            eps: sweep.eps,
            delta_s: sweep.values,
            predicted,
            fitted_c1: fit.c1,
            fitted_c2: fit.c2,
            fit_residual: fit.residual,
            fit_dropped: fit.dropped,
            tol,
            pass,
        }
    }

    /// Re-judges the record against a different prediction.
    pub fn with_prediction(&self, predicted: Prediction) -> Self {
        let sweep = EpsSweep {
            eps: self.eps.clone(),
            values: self.delta_s.clone(),
        };
        let fit = ExpansionFit {
            c1: self.fitted_c1,
            c2: self.fitted_c2,
            residual: self.fit_residual,
            dropped: self.fit_dropped,
        };
        Self::assemble(&self.spec, sweep, predicted, fit)
    }
}

/// Sweeps `ΔS` over a geometric `ε` grid, fits `(c1, c2)` and compares the
/// fit with the prediction.
pub fn verify_expansion(
    p: &DelayProblem,
    cand: &CandidateExtremal,
    spec: &NeedleSpec,
    opts: SweepOptions,
) -> Result<IncrementRecord> {
    let eps_max = match opts.eps_max {
        Some(e) => e,
        None => spec.default_eps_max(p)?,
    };
    let eps = EpsSweep::grid(eps_max, opts.ratio, opts.levels);
    let values = eps
        .par_iter()
        .map(|&e| delta_s_direct(p, cand, spec, e))
        .collect::<Result<Vec<_>>>()?;
    let sweep = EpsSweep { eps, values };
    let fit = fit_expansion_with(&sweep, opts.extra_terms)?;
    let predicted = expansion_prediction(p, cand, spec)?;
    Ok(IncrementRecord::assemble(spec, sweep, predicted, fit))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FirstVariationCheck {
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Checks that the needle first variation vanishes to `1e-9 (1 + |S|)`.
pub fn verify_needle_first_variation_zero(
    p: &DelayProblem,
    cand: &CandidateExtremal,
    spec: &NeedleSpec,
    eps: f64,
) -> Result<FirstVariationCheck> {
    let value = needle_first_variation(p, cand, spec, eps)?;
    let threshold = 1e-9 * (1.0 + p.eval_s(cand.traj())?.abs());
    Ok(FirstVariationCheck {
        value,
        threshold,
        pass: value.abs() <= threshold,
    })
}
