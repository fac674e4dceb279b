//! Numerical verification of necessary conditions for delay variational
//! problems: Euler residuals, the Weierstrass excess, degeneracy detection,
//! the equality and inequality conditions built from the `M` and `Q`
//! functionals, and needle-variation increment expansions.

// `!(x <= tol)` is used on purpose so NaN counts as a failure
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod conditions;
pub mod config;
pub mod error;
pub mod expr;
pub mod increments;
pub mod needle;
pub mod problem;
pub mod quadrature;
pub mod trajectory;

pub use analysis::{
    full_report, AnalysisConfig, AnalysisReport, Approach, Conclusion, Condition, DegeneracyFinding, FindingKind,
    Verdict,
};
pub use conditions::{ExcessValue, ScanPoint, ScanTolerances, Slot, WeierstrassScanReport};
pub use config::{ProblemSection, RunConfig, SegmentSpec};
pub use error::{Error, Result};
pub use expr::{parse_lagrangian, Block, Expr, LagrangianExpr, Point, Var};
pub use increments::{IncrementRecord, Prediction, SweepOptions};
pub use needle::{vary, NeedleSpec, Regime, ValidityWindow};
pub use problem::{ArgPoint, CandidateExtremal, DelayProblem, HistorySpec};
pub use quadrature::{fit_expansion, fit_expansion_with, EpsSweep, ExpansionFit, GaussLegendre};
pub use trajectory::{LinearPiece, Side, Trajectory};
