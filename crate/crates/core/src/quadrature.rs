//! Composite Gauss–Legendre integration over breakpoint-aligned panels and
//! least-squares extraction of small-parameter expansion coefficients.

use serde::Serialize;

use crate::error::{Error, Result};

/// Two breakpoints closer than this are the same point.
pub const BREAK_TOL: f64 = 1e-12;

pub const DEFAULT_ORDER: usize = 10;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Default for GaussLegendre {
    fn default() -> Self {
        Self::new(DEFAULT_ORDER)
    }
}

impl GaussLegendre {
    /// Builds the `order`-point rule by Newton iteration on `P_order`.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "quadrature order must be positive");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess for the i-th largest root.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integrates `f` over `[a, b]`, one panel per gap between breakpoints.
    ///
    /// Panels are summed in increasing order, so the result is deterministic.
    pub fn integrate<F>(&self, a: f64, b: f64, breaks: &[f64], f: F) -> Result<f64>
    where
        F: Fn(f64) -> Result<f64>,
    {
        if a > b {
            return Err(Error::Precondition(format!("integration bounds reversed: [{a}, {b}]")));
        }
        if a == b {
            return Ok(0.0);
        }
        let plan = PanelPlan::new(a, b, breaks);
        let mut total = 0.0;
        for w in plan.bounds.windows(2) {
            total += self.panel(w[0], w[1], &f)?;
        }
        Ok(total)
    }

    fn panel<F>(&self, a: f64, b: f64, f: &F) -> Result<f64>
    where
        F: Fn(f64) -> Result<f64>,
    {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            let t = mid + half * x;
            let v = f(t)?;
            if !v.is_finite() {
                return Err(Error::NonFinite { t });
            }
            acc += w * v;
        }
        Ok(acc * half)
    }
}

/// Value and derivative of the Legendre polynomial `P_n` at `x`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Ordered panel boundaries covering `[a, b]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PanelPlan {
    bounds: Vec<f64>,
}

impl PanelPlan {
    /// Keeps the breakpoints strictly inside `(a, b)`, merging any within
    /// [`BREAK_TOL`] of each other or of the ends.
    pub fn new(a: f64, b: f64, breaks: &[f64]) -> Self {
        let mut inner: Vec<f64> = breaks
            .iter()
            .copied()
            .filter(|&x| x.is_finite() && x > a + BREAK_TOL && x < b - BREAK_TOL)
            .collect();
        inner.sort_by(f64::total_cmp);
        let mut bounds = vec![a];
        for x in inner {
            if x - bounds[bounds.len() - 1] > BREAK_TOL {
                bounds.push(x);
            }
        }
        bounds.push(b);
        PanelPlan { bounds }
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }
}

/// Samples `f(eps_k)` on the geometric grid `eps_k = eps_max * ratio^k`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpsSweep {
    pub eps: Vec<f64>,
    pub values: Vec<f64>,
}

impl EpsSweep {
    pub fn grid(eps_max: f64, ratio: f64, levels: usize) -> Vec<f64> {
        (0..levels).map(|k| eps_max * ratio.powi(k as i32)).collect()
    }

    pub fn sample<F>(eps_max: f64, ratio: f64, levels: usize, f: F) -> Result<Self>
    where
        F: Fn(f64) -> Result<f64>,
    {
        let eps = Self::grid(eps_max, ratio, levels);
        let values = eps.iter().map(|&e| f(e)).collect::<Result<Vec<_>>>()?;
        Ok(EpsSweep { eps, values })
    }
}

/// Coefficients of `f(eps) = c1*eps + c2*eps^2 + o(eps^2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExpansionFit {
    pub c1: f64,
    pub c2: f64,
    /// Max relative deviation of the model on the two smallest levels.
    pub residual: f64,
    /// Number of leading (largest-eps) levels discarded by the refit rule.
    pub dropped: usize,
}

/// Least-squares fit of `(c1, c2)` over the model `c1*eps + c2*eps^2`.
///
/// The regression is done on `f(eps)/eps = c1 + c2*eps`, which weights every
/// level by its own scale. If dropping the largest level improves the residual
/// tenfold the refit is kept, repeatedly, while at least four levels remain.
pub fn fit_expansion(sweep: &EpsSweep) -> Result<ExpansionFit> {
    fit_expansion_with(sweep, 0)
}

/// As [`fit_expansion`], with `extra` higher-order terms `eps^3, eps^4, ...`
/// fitted alongside and discarded.
pub fn fit_expansion_with(sweep: &EpsSweep, extra: usize) -> Result<ExpansionFit> {
    if sweep.eps.len() != sweep.values.len() {
        return Err(Error::IllConditioned("eps and values differ in length".into()));
    }
    let min_levels = 4.max(extra + 4);
    if sweep.eps.len() < min_levels {
        return Err(Error::IllConditioned(format!(
            "need at least {min_levels} sweep levels, got {}",
            sweep.eps.len()
        )));
    }
    let mut order: Vec<usize> = (0..sweep.eps.len()).collect();
    order.sort_by(|&i, &j| sweep.eps[j].total_cmp(&sweep.eps[i]));
    let mut start = 0;
    let mut best = fit_levels(sweep, &order[start..], extra)?;
    while order.len() - start > min_levels {
        let next = fit_levels(sweep, &order[start + 1..], extra)?;
        if next.residual * 10.0 <= best.residual {
            start += 1;
            best = next;
        } else {
            break;
        }
    }
    best.dropped = start;
    Ok(best)
}

fn fit_levels(sweep: &EpsSweep, idx: &[usize], extra: usize) -> Result<ExpansionFit> {
    if idx
        .iter()
        .any(|&i| !(sweep.eps[i] > 0.0 && sweep.eps[i].is_finite()) || !sweep.values[i].is_finite())
    {
        return Err(Error::IllConditioned("eps levels must be positive and finite".into()));
    }
    let xs: Vec<f64> = idx.iter().map(|&i| sweep.eps[i]).collect();
    let gs: Vec<f64> = idx.iter().map(|&i| sweep.values[i] / sweep.eps[i]).collect();
    let hi = xs.iter().cloned().fold(f64::MIN, f64::max);
    let lo = xs.iter().cloned().fold(f64::MAX, f64::min);
    if hi - lo <= 1e-12 * hi {
        return Err(Error::IllConditioned("eps grid is degenerate".into()));
    }
    // g = a0 + a1 u + a2 u^2 + ... with u = eps / hi
    let m = 2 + extra;
    let mut ata = vec![vec![0.0; m]; m];
    let mut atg = vec![0.0; m];
    for (x, g) in xs.iter().zip(&gs) {
        let u = x / hi;
        let row: Vec<f64> = (0..m).map(|k| u.powi(k as i32)).collect();
        for r in 0..m {
            atg[r] += row[r] * g;
            for c in 0..m {
                ata[r][c] += row[r] * row[c];
            }
        }
    }
    let a = solve(ata, atg).ok_or_else(|| Error::IllConditioned("singular normal equations".into()))?;
    let c1 = a[0];
    let c2 = a[1] / hi;
    let model = |e: f64| (0..m).map(|k| a[k] * (e / hi).powi(k as i32)).sum::<f64>() * e;
    let mut smallest: Vec<usize> = idx.to_vec();
    smallest.sort_by(|&i, &j| sweep.eps[i].total_cmp(&sweep.eps[j]));
    let residual = smallest
        .iter()
        .take(2)
        .map(|&i| {
            let fit = model(sweep.eps[i]);
            let scale = sweep.values[i].abs().max(fit.abs()).max(f64::MIN_POSITIVE);
            (sweep.values[i] - fit).abs() / scale
        })
        .fold(0.0, f64::max);
    Ok(ExpansionFit {
        c1,
        c2,
        residual,
        dropped: 0,
    })
}

/// Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            #[allow(clippy::needless_range_loop)]
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn nodes_are_symmetric_and_weights_sum_to_two() {
        for n in 1..=20 {
            let g = GaussLegendre::new(n);
            let sum: f64 = g.weights().iter().sum();
            assert!((sum - 2.0).abs() < 1e-14, "order {n}: {sum}");
            for i in 0..n {
                assert!((g.nodes()[i] + g.nodes()[n - 1 - i]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn constant_integral() {
        let g = GaussLegendre::default();
        let v = g.integrate(0.0, 3.0, &[], |_| Ok(1.0)).unwrap();
        assert!((v - 3.0).abs() < 1e-15);
    }

    #[test]
    fn degree_nine_is_exact() {
        let g = GaussLegendre::default();
        let v = g.integrate(0.0, 1.0, &[], |t| Ok(t.powi(9))).unwrap();
        assert!((v - 0.1).abs() <= 1e-15, "{v}");
        // degree 19 is the limit for ten nodes
        let v = g.integrate(0.0, 1.0, &[], |t| Ok(t.powi(19))).unwrap();
        assert!((v - 0.05).abs() <= 1e-15, "{v}");
    }

    #[test]
    fn linear_with_break() {
        let g = GaussLegendre::default();
        let v = g.integrate(1.0, 1.1, &[1.05], |t| Ok(1.0 - (t - 1.0))).unwrap();
        // antiderivative t - (t-1)^2/2
        let exact = (1.1 - 0.1f64.powi(2) / 2.0) - 1.0;
        assert!((v - exact).abs() < 1e-14);
        assert!((v - 0.095).abs() < 1e-14);
    }

    #[test]
    fn kink_is_exact_once_split() {
        let g = GaussLegendre::default();
        let f = |t: f64| Ok((t - 0.3).abs());
        let split = g.integrate(0.0, 1.0, &[0.3], f).unwrap();
        let exact = 0.3 * 0.3 / 2.0 + 0.7 * 0.7 / 2.0;
        assert!((split - exact).abs() < 1e-15);
        let unsplit = g.integrate(0.0, 1.0, &[], f).unwrap();
        assert!((unsplit - exact).abs() > 1e-6);
    }

    #[test]
    fn empty_interval_and_errors() {
        let g = GaussLegendre::default();
        assert_eq!(g.integrate(2.0, 2.0, &[], |_| Ok(f64::NAN)).unwrap(), 0.0);
        assert!(g.integrate(2.0, 1.0, &[], |_| Ok(1.0)).is_err());
        assert!(matches!(
            g.integrate(0.0, 1.0, &[], |t| Ok(1.0 / (t - t))),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn panel_plan_merges_close_breaks() {
        let plan = PanelPlan::new(0.0, 1.0, &[0.5, 0.5 + 1e-14, 0.0, 1.0, 2.0, 0.25]);
        assert_eq!(plan.bounds(), &[0.0, 0.25, 0.5, 1.0]);
    }

    #[test]
    fn fit_pure_quadratic() {
        let sweep = EpsSweep::sample(0.1, 0.5, 8, |e| Ok(-e * e / 2.0)).unwrap();
        let fit = fit_expansion(&sweep).unwrap();
        assert!(fit.c1.abs() <= 1e-9, "{fit:?}");
        assert!((fit.c2 + 0.5).abs() <= 1e-8, "{fit:?}");
    }

    #[test]
    fn fit_pure_linear() {
        let sweep = EpsSweep::sample(0.1, 0.5, 8, |e| Ok(3.0 * e)).unwrap();
        let fit = fit_expansion(&sweep).unwrap();
        assert!((fit.c1 - 3.0).abs() < 1e-12);
        assert!(fit.c2.abs() < 1e-10);
    }

    #[test]
    fn fit_with_cubic_remainder() {
        // The cubic term biases c1 by O(eps_max^2) and c2 by O(eps_max).
        let sweep = EpsSweep::sample(1e-3, 0.5, 8, |e| Ok(e + e * e + e * e * e)).unwrap();
        let fit = fit_expansion(&sweep).unwrap();
        assert!((fit.c1 - 1.0).abs() <= 1e-6, "{fit:?}");
        assert!((fit.c2 - 1.0).abs() <= 1e-3, "{fit:?}");
    }

    #[test]
    fn extra_terms_absorb_cubic_remainder() {
        let sweep = EpsSweep::sample(0.25, 0.5, 8, |e| Ok(0.5 * e - 0.25 * e * e + 2.0 * e * e * e)).unwrap();
        let plain = fit_expansion(&sweep).unwrap();
        assert!((plain.c2 + 0.25).abs() > 1e-2);
        let fit = fit_expansion_with(&sweep, 1).unwrap();
        assert!((fit.c1 - 0.5).abs() < 1e-12 && (fit.c2 + 0.25).abs() < 1e-10, "{fit:?}");
        assert!(fit_expansion_with(&EpsSweep::sample(0.1, 0.5, 4, Ok).unwrap(), 1).is_err());
    }

    #[test]
    fn fit_rejects_degenerate_grids() {
        let few = EpsSweep {
            eps: vec![0.1, 0.05, 0.025],
            values: vec![0.0; 3],
        };
        assert!(fit_expansion(&few).is_err());
        let flat = EpsSweep {
            eps: vec![0.1; 5],
            values: vec![0.0; 5],
        };
        assert!(fit_expansion(&flat).is_err());
    }

    #[test]
    fn refit_drops_polluted_level() {
        let mut sweep = EpsSweep::sample(0.1, 0.5, 8, |e| Ok(2.0 * e - e * e)).unwrap();
        sweep.values[0] += 0.05;
        let fit = fit_expansion(&sweep).unwrap();
        assert!(fit.dropped >= 1);
        assert!((fit.c1 - 2.0).abs() < 1e-10 && (fit.c2 + 1.0).abs() < 1e-8, "{fit:?}");
    }

    proptest! {
        #[test]
        fn integrate_is_additive(c in 0.05f64..0.95, a0 in -2.0f64..2.0, a1 in -2.0f64..2.0, w in 0.5f64..3.0) {
            let g = GaussLegendre::default();
            let f = |t: f64| Ok(a0 + a1 * (w * t).sin() + (t * t).exp());
            let whole = g.integrate(0.0, 1.0, &[], f).unwrap();
            let parts = g.integrate(0.0, c, &[], f).unwrap() + g.integrate(c, 1.0, &[], f).unwrap();
            prop_assert!((whole - parts).abs() <= 1e-13 * (1.0 + whole.abs()));
        }

        #[test]
        fn quadratic_recovered(c1 in -5.0f64..5.0, c2 in -5.0f64..5.0) {
            let sweep = EpsSweep::sample(0.25, 0.5, 8, |e| Ok(c1 * e + c2 * e * e)).unwrap();
            let fit = fit_expansion(&sweep).unwrap();
            prop_assert!((fit.c1 - c1).abs() <= 1e-11 * (1.0 + c1.abs() + c2.abs()));
            prop_assert!((fit.c2 - c2).abs() <= 1e-9 * (1.0 + c1.abs() + c2.abs()));
        }
    }
}
