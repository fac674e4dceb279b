//! Fixtures shared by the benchmarks in `benches/`.

use needlecheck_core::{CandidateExtremal, DelayProblem, RunConfig};

pub const EXAMPLE_CFG: &str = include_str!("../../../configs/delayed_coupling.cfg");

pub fn example() -> (DelayProblem, CandidateExtremal) {
    RunConfig::parse(EXAMPLE_CFG)
        .and_then(|c| c.build())
        .expect("bundled config is valid")
}

/// A `dim`-component problem coupling every component to its delayed copy,
/// with a smooth non-trivial candidate.
pub fn coupled(dim: usize) -> (DelayProblem, CandidateExtremal) {
    let terms: Vec<String> = (1..=dim)
        .map(|i| format!("dx{i}^2 + 0.5*dx{i}*dy{i} + dy{i}^2 + x{i}*y{i}"))
        .collect();
    let zeros = vec!["\"0\""; dim].join(", ");
    let comps: Vec<String> = (1..=dim)
        .map(|i| format!("\"0.{i}*sin(t*3.14159265358979/3)\""))
        .collect();
    let text = format!(
        "[problem]\ndim = {dim}\nt0 = 0\nt1 = 3\nh = 1\nlagrangian = \"{}\"\nhistory = -1, 0, {zeros}\nterminal = {}\n\
         [candidate]\nsegment = 0, 3, {}\n",
        terms.join(" + "),
        vec!["0"; dim].join(", "),
        comps.join(", ")
    );
    let cfg = RunConfig::parse(&text).expect("generated config is valid");
    cfg.build().expect("generated problem is valid")
}
