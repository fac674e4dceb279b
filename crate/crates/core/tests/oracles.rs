//! Hand-derived values frozen against the public API.

use needlecheck_core::analysis::{
    degeneracy_grid, detect_degeneracy, interval_check, point_check, point_check_weak, q1_equivalence, CheckOptions,
    DEFAULT_SCALES,
};
use needlecheck_core::conditions::{
    e_sum, euler_residual, excess_e, first_variation, m_term, needle_first_variation, q_k, uniform_grid, xi_samples,
    DEFAULT_RADII,
};
use needlecheck_core::expr::Symbols;
use needlecheck_core::increments::{delta_s_direct, expansion_prediction, verify_expansion};
use needlecheck_core::{
    fit_expansion, parse_lagrangian, vary, Approach, Block, CandidateExtremal, Conclusion, DelayProblem, EpsSweep,
    Error, Expr, GaussLegendre, HistorySpec, NeedleSpec, Point, Side, Slot, SweepOptions, Trajectory, Var,
};

const EXAMPLE: &str = "(1 - x1)*dx1^2 - (1 + y1)*dy1^2 + dx1*dy1";

fn problem(l: &str) -> DelayProblem {
    let lag = parse_lagrangian(l, 1).unwrap();
    let phi = Trajectory::zero(1, -1.0, 0.0).unwrap();
    DelayProblem::new(0.0, 3.0, 1.0, lag, HistorySpec::new(phi, vec![0.0]).unwrap()).unwrap()
}

fn candidate(p: &DelayProblem, interior: &str) -> CandidateExtremal {
    let inner = Trajectory::parse(1, &[(0.0, 3.0, vec![interior.to_string()])]).unwrap();
    CandidateExtremal::splice(p, &inner).unwrap()
}

fn example() -> (DelayProblem, CandidateExtremal) {
    let p = problem(EXAMPLE);
    let c = candidate(&p, "0");
    (p, c)
}

fn at<'a>(x: &'a [f64], y: &'a [f64], dx: &'a [f64], dy: &'a [f64]) -> Point<'a> {
    Point { t: 0.5, x, y, dx, dy }
}

#[test]
fn lagrangian_evaluation() {
    let lag = parse_lagrangian(EXAMPLE, 1).unwrap();
    assert_eq!(lag.eval(&at(&[0.0], &[0.0], &[2.0], &[0.0])).unwrap(), 4.0);
    let l = parse_lagrangian("dx1*dy1", 1).unwrap();
    assert_eq!(l.eval(&at(&[0.0], &[0.0], &[3.0], &[-2.0])).unwrap(), -6.0);
    // momentum 2(1 - x1) dx1 + dy1
    let g = lag.gradient(Block::Dx, &at(&[0.5], &[0.0], &[3.0], &[-1.0])).unwrap();
    assert_eq!(g, vec![2.0]);
    // L_x = -dx1^2
    let g = lag.gradient(Block::X, &at(&[0.0], &[0.0], &[1.5], &[0.0])).unwrap();
    assert_eq!(g, vec![-2.25]);
}

#[test]
fn monomial_and_zero_partials() {
    let lag = parse_lagrangian("x1*dy2", 2).unwrap();
    let pt = at(&[3.0, 5.0], &[7.0, 11.0], &[13.0, 17.0], &[19.0, 23.0]);
    assert_eq!(lag.gradient(Block::X, &pt).unwrap(), vec![23.0, 0.0]);
    assert_eq!(lag.gradient(Block::Dy, &pt).unwrap(), vec![0.0, 3.0]);
    assert_eq!(lag.gradient(Block::Y, &pt).unwrap(), vec![0.0, 0.0]);
    let zero = parse_lagrangian("0", 3).unwrap();
    assert_eq!(zero.partials().len(), 12);
    assert!(zero.partials().iter().all(|e| e.is_zero()));
    let e = Expr::parse("x1^2 + sin(x1)", Symbols::Lagrangian { dim: 1 }).unwrap();
    assert!(e.differentiate(Var::T).unwrap().is_zero());
}

#[test]
fn trajectory_values_and_derivatives() {
    let sq = Trajectory::parse(1, &[(0.0, 3.0, vec!["t^2".into()])]).unwrap();
    assert_eq!(sq.eval_value(2.0).unwrap(), vec![4.0]);
    assert!((sq.eval_second_deriv(1.0, Side::Right).unwrap()[0] - 2.0).abs() <= 1e-6);
    let s = Trajectory::parse(1, &[(0.0, 3.0, vec!["sin(t)".into()])]).unwrap();
    assert!(s.eval_second_deriv(0.0, Side::Right).unwrap()[0].abs() <= 1e-5);

    let (p, c) = example();
    let spec = NeedleSpec::new(1.0, 0.5, vec![1.0], Side::Right).unwrap();
    let v = vary(&p, &c, &spec, 0.1).unwrap();
    assert!((v.eval_value(1.05).unwrap()[0] - 0.05).abs() <= 1e-15);
    assert_eq!(v.eval_deriv(1.0, Side::Right).unwrap(), vec![1.0]);
    assert_eq!(v.eval_deriv(1.0, Side::Left).unwrap(), vec![0.0]);
    assert_eq!(v.eval_deriv(1.05, Side::Left).unwrap(), vec![1.0]);
    assert_eq!(v.eval_deriv(1.05, Side::Right).unwrap(), vec![-1.0]);
    // zero candidate: the varied trajectory is the needle itself
    for k in 0..=40 {
        let t = -1.0 + 0.1 * k as f64;
        assert_eq!(v.eval_value(t).unwrap(), spec.q(&p, 0.1, t).unwrap());
    }
}

#[test]
fn splicing_history() {
    let lag = parse_lagrangian(EXAMPLE, 1).unwrap();
    let phi = Trajectory::parse(1, &[(-1.0, 0.0, vec!["t + 1".into()])]).unwrap();
    let p = DelayProblem::new(0.0, 3.0, 1.0, lag, HistorySpec::new(phi, vec![0.0]).unwrap()).unwrap();
    let inner = Trajectory::parse(1, &[(0.0, 3.0, vec!["1 - t/3".into()])]).unwrap();
    let c = CandidateExtremal::splice(&p, &inner).unwrap();
    assert_eq!(c.traj().eval_value(0.0).unwrap(), vec![1.0]);
    assert_eq!(c.traj().domain(), (-1.0, 3.0));
    let off = Trajectory::parse(1, &[(0.0, 3.0, vec!["1 - t/3 + 0.1*t/3".into()])]).unwrap();
    assert!(matches!(
        CandidateExtremal::splice(&p, &off),
        Err(Error::BoundaryMismatch { .. })
    ));
}

#[test]
fn action_values() {
    let (p, c) = example();
    assert_eq!(p.eval_l_extended(3.5, &[1.0], &[1.0], &[1.0], &[1.0]).unwrap(), 0.0);
    assert_eq!(p.eval_l_extended(1.0, &[0.0], &[0.0], &[1.0], &[0.0]).unwrap(), 1.0);
    assert_eq!(p.eval_s(c.traj()).unwrap(), 0.0);
    let one = problem("1");
    assert!((one.eval_s(candidate(&one, "0").traj()).unwrap() - 3.0).abs() <= 1e-14);
    let spec = NeedleSpec::new(1.0, 0.5, vec![1.0], Side::Right).unwrap();
    let varied = vary(&p, &c, &spec, 0.1).unwrap();
    assert!((p.eval_s(&varied).unwrap() + 0.005).abs() <= 1e-12);
}

#[test]
fn quadrature_and_fit() {
    let gl = GaussLegendre::default();
    assert!((gl.integrate(0.0, 3.0, &[], |_| Ok(1.0)).unwrap() - 3.0).abs() <= 1e-15);
    assert!((gl.integrate(0.0, 1.0, &[], |t| Ok(t.powi(9))).unwrap() - 0.1).abs() <= 1e-15);
    // antiderivative t - (t-1)^2/2 between 1 and 1.1 is 0.1 - 0.005
    let v = gl.integrate(1.0, 1.1, &[1.05], |t| Ok(1.0 - (t - 1.0))).unwrap();
    assert!((v - 0.095).abs() <= 1e-15);

    let sweep = |f: fn(f64) -> f64, eps_max: f64| {
        let eps = EpsSweep::grid(eps_max, 0.5, 8);
        let values = eps.iter().map(|&e| f(e)).collect();
        fit_expansion(&EpsSweep { eps, values }).unwrap()
    };
    let fit = sweep(|e| -0.5 * e * e, 0.1);
    assert!(fit.c1.abs() <= 1e-9 && (fit.c2 + 0.5).abs() <= 1e-8);
    let fit = sweep(|e| 3.0 * e, 0.1);
    assert!((fit.c1 - 3.0).abs() <= 1e-12 && fit.c2.abs() <= 1e-9);
    let fit = sweep(|e| e + e * e + e * e * e, 1e-3);
    assert!((fit.c1 - 1.0).abs() <= 1e-6 && (fit.c2 - 1.0).abs() <= 1e-3);
}

#[test]
fn needle_norms() {
    let (p, _) = example();
    let s = NeedleSpec::new(1.0, 0.5, vec![1.0], Side::Right).unwrap();
    assert_eq!(s.norms(&p, 0.1).unwrap(), (0.05, 1.0));
    let s = NeedleSpec::new(1.0, 0.75, vec![1.0], Side::Right).unwrap();
    let (q, qd) = s.norms(&p, 0.1).unwrap();
    assert!((q - 0.075).abs() <= 1e-16 && qd == 3.0);
    assert!(NeedleSpec::new(1.0, 0.5, vec![0.0], Side::Right).is_err());
    assert!(matches!(s.check_eps(&p, 0.0), Err(Error::OutsideWindow { .. })));
}

#[test]
fn excess_and_mixed_functionals() {
    let (p, c) = example();
    for t in [0.0, 0.7, 1.9] {
        assert_eq!(excess_e(&p, &c, t, Side::Right, &[2.0], Slot::X).unwrap(), 4.0);
        assert_eq!(excess_e(&p, &c, t, Side::Right, &[2.0], Slot::Y).unwrap(), -4.0);
        assert_eq!(q_k(&p, &c, t, Side::Right, 0.5, &[1.0], 1).unwrap(), (1.0, -1.0));
        assert_eq!(m_term(&p, &c, t, Side::Right, 0.5, &[1.0], Slot::X).unwrap(), -1.0);
        assert_eq!(m_term(&p, &c, t, Side::Right, 0.5, &[1.0], Slot::Y).unwrap(), -1.0);
    }
    assert_eq!(excess_e(&p, &c, 2.5, Side::Right, &[2.0], Slot::X).unwrap(), 4.0);
    assert_eq!(q_k(&p, &c, 1.0, Side::Right, 0.5, &[0.0], 1).unwrap(), (0.0, 0.0));
}

#[test]
fn euler_residuals() {
    let (p, c) = example();
    for t in uniform_grid(0.0, 3.0, 100) {
        let side = if t == 3.0 { Side::Left } else { Side::Right };
        assert!(euler_residual(&p, &c, t, side).unwrap()[0].abs() <= 1e-8);
    }
    let lin = problem("dx1^2");
    let straight = Trajectory::parse(1, &[(-1.0, 0.0, vec!["0".into()]), (0.0, 3.0, vec!["0".into()])]).unwrap();
    let lc = CandidateExtremal::from_full(&lin, straight).unwrap();
    assert!(euler_residual(&lin, &lc, 1.3, Side::Right).unwrap()[0].abs() <= 1e-8);
    let bad = candidate(&p, "0.1*t*(3 - t)");
    assert!((euler_residual(&p, &bad, 1.5, Side::Right).unwrap()[0] + 0.22).abs() <= 1e-6);
}

#[test]
fn first_variations() {
    let (p, c) = example();
    let spec = NeedleSpec::new(1.0, 0.5, vec![1.0], Side::Right).unwrap();
    let q = spec.as_trajectory(&p, 0.5).unwrap();
    assert_eq!(first_variation(&p, &c, &q).unwrap(), 0.0);
    let bad = candidate(&p, "0.1*t*(3 - t)");
    let lit = first_variation(&p, &bad, &q).unwrap();
    let s = 1e-4;
    let shifted = |sign: f64| {
        let scaled = NeedleSpec::new(1.0, 0.5, vec![sign * s], Side::Right).unwrap();
        p.eval_s(&vary(&p, &bad, &scaled, 0.5).unwrap()).unwrap()
    };
    let fd = (shifted(1.0) - shifted(-1.0)) / (2.0 * s);
    assert!(lit.abs() > 1e-3);
    assert!((lit - fd).abs() <= 1e-6, "{lit} vs {fd}");
    let needle = needle_first_variation(&p, &bad, &spec, 0.5).unwrap();
    assert!((needle - lit).abs() <= 1e-9);
    assert!(needle_first_variation(&p, &c, &spec, 0.5).unwrap().abs() <= 1e-10);
}

#[test]
fn increment_fixtures() {
    let (p, c) = example();
    let right = NeedleSpec::new(1.0, 0.5, vec![1.0], Side::Right).unwrap();
    assert!((delta_s_direct(&p, &c, &right, 0.1).unwrap() + 0.005).abs() <= 1e-12);
    let left = NeedleSpec::new(1.5, 0.5, vec![-1.0], Side::Left).unwrap();
    assert!((delta_s_direct(&p, &c, &left, 0.1).unwrap() + 0.005).abs() <= 1e-12);
    let pred = expansion_prediction(&p, &c, &right).unwrap();
    assert_eq!((pred.c1, pred.c2), (0.0, -0.5));
    let rec = verify_expansion(&p, &c, &right, SweepOptions::default()).unwrap();
    assert!(rec.pass);
    let mut corrupted = pred.clone();
    corrupted.c2 += 0.1;
    assert!(!rec.with_prediction(corrupted).pass);
    let zero = problem("0");
    let zc = candidate(&zero, "0");
    let r = verify_expansion(&zero, &zc, &right, SweepOptions::default()).unwrap();
    assert!(r.pass && r.fitted_c1 == 0.0 && r.fitted_c2 == 0.0);
}

#[test]
fn degeneracy_and_conditions() {
    let (p, c) = example();
    let etas = xi_samples(1, &DEFAULT_RADII);
    let lambdas: Vec<f64> = (1..10).map(|k| k as f64 / 10.0).collect();
    let d = detect_degeneracy(&p, &c, &degeneracy_grid(&p, 200), &etas, &lambdas, 1e-9).unwrap();
    assert_eq!(d.findings.len(), 1);
    assert_eq!((d.findings[0].start, d.findings[0].end), (0.0, 2.0));
    assert_eq!(d.findings[0].pairs.len(), etas.len() * lambdas.len());
    let tail = detect_degeneracy(&p, &c, &uniform_grid(2.01, 3.0, 30), &etas, &lambdas, 1e-9).unwrap();
    assert!(tail.findings.is_empty());

    let o = CheckOptions::default();
    let [strong, weak] = interval_check(&p, &c, &d.findings[0], &DEFAULT_SCALES, &o).unwrap();
    assert_eq!((strong.conclusion, strong.quantity), (Conclusion::FailsStrong, -2.0));
    assert_eq!(weak.conclusion, Conclusion::FailsWeak);

    let v = point_check(&p, &c, 1.0, Approach::TwoSided, 0.5, &[1.0], &o).unwrap();
    assert_eq!((v.conclusion, v.quantity), (Conclusion::FailsStrong, -2.0));
    let w = point_check_weak(&p, &c, 1.0, Approach::TwoSided, 0.5, &[1.0], &DEFAULT_SCALES, &o).unwrap();
    assert_eq!(w.conclusion, Conclusion::FailsWeak);
    assert!(point_check(&p, &c, 2.5, Approach::Right, 0.5, &[1.0], &o).is_err());

    let e = q1_equivalence(&p, &c, 2.5, Side::Right, 0.5, &[1.0], &o).unwrap();
    assert!(e.pass && e.q1_sum == 1.0 && e_sum(&p, &c, 2.5, Side::Right, &[1.0]).unwrap() == 1.0);
}
