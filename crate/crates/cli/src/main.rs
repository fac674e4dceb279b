use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use needlecheck_core::analysis::{
    degeneracy_grid, detect_degeneracy, euler_stage, interval_check, point_check, point_check_weak, q1_equivalence,
    scan_grid, FindingKind,
};
use needlecheck_core::conditions::{excess, sides_at, uniform_grid, weierstrass_scan, xi_samples};
use needlecheck_core::increments::{delta_s_direct, expansion_prediction, verify_expansion};
use needlecheck_core::{
    full_report, Approach, CandidateExtremal, Conclusion, DelayProblem, NeedleSpec, RunConfig, Side,
};

/// Bumped whenever a field is renamed or removed; see docs/report-schema.md.
const SCHEMA_VERSION: u32 = 1;
const THREADS_ENV: &str = "NEEDLECHECK_THREADS";

#[derive(Parser)]
#[command(name = "needlecheck", version)]
#[command(about = "Checks necessary conditions for a candidate of a delay variational problem")]
struct Cli {
    /// Worker threads (overrides NEEDLECHECK_THREADS)
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Run configuration file
    config: PathBuf,
}

#[derive(Args)]
struct NeedleArgs {
    #[arg(long, allow_negative_numbers = true)]
    theta: f64,
    #[arg(long)]
    lambda: f64,
    /// Slope of the inner branch, comma-separated for dim > 1
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    xi: Vec<f64>,
    /// right or left
    #[arg(long, default_value = "right")]
    side: Side,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a config, echoing it with defaults filled
    Validate(ConfigArg),
    /// Euler residuals on a uniform grid
    Euler {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Weierstrass excess scan over the sampled directions
    Weierstrass {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Excess values at one time, or on a grid when --t is omitted
    Excess {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long, allow_negative_numbers = true)]
        t: Option<f64>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        xi: Vec<f64>,
        /// Restrict to one side (default: every side defined at each time)
        #[arg(long)]
        side: Option<Side>,
    },
    /// Degeneracy findings on the default grid
    Degeneracy(ConfigArg),
    /// Interval equality test on every interval finding
    Theorem5 {
        #[command(flatten)]
        cfg: ConfigArg,
        /// Only test this finding index
        #[arg(long)]
        finding: Option<usize>,
    },
    /// Point test at a given time
    Theorem6 {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long, allow_negative_numbers = true)]
        point: f64,
        /// right, left or both
        #[arg(long, default_value = "right")]
        side: Approach,
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
        /// Direction eta (default: first unit vector)
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        eta: Vec<f64>,
    },
    /// Needle increment at one width, or a fitted sweep
    Increment {
        #[command(flatten)]
        cfg: ConfigArg,
        #[command(flatten)]
        needle: NeedleArgs,
        #[arg(long, conflicts_with = "sweep", required_unless_present = "sweep")]
        eps: Option<f64>,
        #[arg(long)]
        sweep: bool,
        /// Largest sweep width (default: a quarter of the window)
        #[arg(long)]
        eps_max: Option<f64>,
    },
    /// Full report with the overall conclusion
    Verdict {
        #[command(flatten)]
        cfg: ConfigArg,
        /// Override the config seed for the increment spot checks
        #[arg(long)]
        seed: Option<u64>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::Euler { .. } => "euler",
            Command::Weierstrass { .. } => "weierstrass",
            Command::Excess { .. } => "excess",
            Command::Degeneracy(_) => "degeneracy",
            Command::Theorem5 { .. } => "theorem5",
            Command::Theorem6 { .. } => "theorem6",
            Command::Increment { .. } => "increment",
            Command::Verdict { .. } => "verdict",
        }
    }

    fn config_path(&self) -> &PathBuf {
        match self {
            Command::Validate(c) | Command::Degeneracy(c) => &c.config,
            Command::Euler { cfg, .. }
            | Command::Weierstrass { cfg, .. }
            | Command::Excess { cfg, .. }
            | Command::Theorem5 { cfg, .. }
            | Command::Theorem6 { cfg, .. }
            | Command::Increment { cfg, .. }
            | Command::Verdict { cfg, .. } => &cfg.config,
        }
    }
}

struct Outcome {
    passed: bool,
    result: Value,
}

impl Outcome {
    fn new(passed: bool, result: impl Serialize) -> anyhow::Result<Self> {
        Ok(Outcome {
            passed,
            result: serde_json::to_value(result)?,
        })
    }
}

fn setup(cfg: &RunConfig) -> anyhow::Result<(DelayProblem, CandidateExtremal)> {
    Ok(cfg.build()?)
}

fn default_eta(dim: usize, eta: Vec<f64>) -> Vec<f64> {
    if !eta.is_empty() {
        return eta;
    }
    let mut e = vec![0.0; dim];
    e[0] = 1.0;
    e
}

fn run(cmd: Command, cfg: &mut RunConfig) -> anyhow::Result<Outcome> {
    let a = cfg.analysis.clone();
    match cmd {
        Command::Validate(_) => Outcome::new(true, json!({ "valid": true, "canonical": cfg.emit() })),
        Command::Euler { grid, .. } => {
            let (p, c) = setup(cfg)?;
            let stage = euler_stage(&p, &c, grid.unwrap_or(a.euler_grid), a.tol_euler)?;
            Outcome::new(stage.holds, stage)
        }
        Command::Weierstrass { grid, .. } => {
            let (p, c) = setup(cfg)?;
            let g = scan_grid(&p, &c, grid.unwrap_or(a.weierstrass_grid));
            let report = weierstrass_scan(&p, &c, &g, &xi_samples(p.dim(), &a.radii), a.scan_tolerances())?;
            Outcome::new(report.holds, report)
        }
        Command::Excess { t, xi, side, .. } => {
            let (p, c) = setup(cfg)?;
            if xi.len() != p.dim() {
                bail!("--xi needs {} component(s)", p.dim());
            }
            let times = match t {
                Some(t) => vec![t],
                None => uniform_grid(p.t0(), p.t1(), a.weierstrass_grid),
            };
            let mut points = Vec::new();
            for t in times {
                let sides = match side {
                    Some(s) => vec![s],
                    None => sides_at(&p, &c, t),
                };
                for s in sides {
                    points.push(excess(&p, &c, t, s, &xi)?);
                }
            }
            Outcome::new(true, json!({ "points": points }))
        }
        Command::Degeneracy(_) => {
            let (p, c) = setup(cfg)?;
            let g = degeneracy_grid(&p, a.degeneracy_grid);
            let report = detect_degeneracy(&p, &c, &g, &xi_samples(p.dim(), &a.radii), &a.lambdas, a.tol_deg)?;
            Outcome::new(true, report)
        }
        Command::Theorem5 { finding, .. } => {
            let (p, c) = setup(cfg)?;
            let g = degeneracy_grid(&p, a.degeneracy_grid);
            let report = detect_degeneracy(&p, &c, &g, &xi_samples(p.dim(), &a.radii), &a.lambdas, a.tol_deg)?;
            let selected: Vec<usize> = match finding {
                Some(i) => {
                    if i >= report.findings.len() {
                        bail!("finding {i} does not exist ({} found)", report.findings.len());
                    }
                    vec![i]
                }
                None => (0..report.findings.len())
                    .filter(|&i| report.findings[i].kind == FindingKind::Interval)
                    .collect(),
            };
            let mut checks = Vec::new();
            let mut passed = true;
            for i in selected {
                let verdicts = interval_check(&p, &c, &report.findings[i], &a.scales, &a.check_options())?;
                passed &= verdicts.iter().all(|v| v.conclusion == Conclusion::Consistent);
                checks.push(json!({ "finding": i, "verdicts": verdicts }));
            }
            Outcome::new(passed, json!({ "degeneracy": report, "checks": checks }))
        }
        Command::Theorem6 {
            point,
            side,
            lambda,
            eta,
            ..
        } => {
            let (p, c) = setup(cfg)?;
            let eta = default_eta(p.dim(), eta);
            let opts = a.check_options();
            let strong = point_check(&p, &c, point, side, lambda, &eta, &opts)?;
            let weak = point_check_weak(&p, &c, point, side, lambda, &eta, &a.scales, &opts)?;
            let eq_side = if side == Approach::Left {
                Side::Left
            } else {
                Side::Right
            };
            let equivalence = q1_equivalence(&p, &c, point, eq_side, lambda, &eta, &opts)?;
            let passed = strong.conclusion == Conclusion::Consistent && weak.conclusion == Conclusion::Consistent;
            Outcome::new(
                passed,
                json!({ "verdicts": [strong, weak], "equivalence": equivalence }),
            )
        }
        Command::Increment {
            needle,
            eps,
            sweep,
            eps_max,
            ..
        } => {
            let (p, c) = setup(cfg)?;
            let spec = NeedleSpec::new(needle.theta, needle.lambda, needle.xi, needle.side)?;
            if sweep {
                let mut opts = a.sweep_options();
                opts.eps_max = eps_max;
                let record = verify_expansion(&p, &c, &spec, opts)?;
                Outcome::new(record.pass, record)
            } else {
                let eps = eps.context("--eps or --sweep is required")?;
                let delta_s = delta_s_direct(&p, &c, &spec, eps)?;
                let predicted = expansion_prediction(&p, &c, &spec)?;
                let expansion = predicted.c1 * eps + predicted.c2 * eps * eps;
                Outcome::new(
                    true,
                    json!({
                        "spec": spec,
                        "eps": eps,
                        "delta_s": delta_s,
                        "predicted": predicted,
                        "expansion": expansion,
                    }),
                )
            }
        }
        Command::Verdict { seed, .. } => {
            if let Some(s) = seed {
                cfg.analysis.seed = s;
            }
            let (p, c) = setup(cfg)?;
            let report = full_report(&p, &c, &cfg.analysis)?;
            Outcome::new(report.conclusion == Conclusion::Consistent, report)
        }
    }
}

fn init_threads(flag: Option<usize>) -> anyhow::Result<()> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse()
                    .with_context(|| format!("{THREADS_ENV}={v} is not a count"))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            bail!("thread count must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn emit(doc: &Value) {
    match serde_json::to_string_pretty(doc) {
        Ok(s) => println!("{s}"),
        Err(e) => eprintln!("error: cannot serialize report: {e}"),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let command = cli.command.name();
    let fail = |config: Value, e: anyhow::Error| {
        eprintln!("error: {e:#}");
        emit(&json!({
            "schema_version": SCHEMA_VERSION,
            "command": command,
            "status": "error",
            "error": format!("{e:#}"),
            "config": config,
        }));
        ExitCode::from(1)
    };
    if let Err(e) = init_threads(cli.threads) {
        return fail(Value::Null, e);
    }
    let path = cli.command.config_path().clone();
    let mut cfg = match RunConfig::load(&path) {
        Ok(c) => c,
        Err(e) => {
            return fail(
                Value::Null,
                anyhow::Error::new(e).context(format!("{}", path.display())),
            )
        }
    };
    match run(cli.command, &mut cfg) {
        Ok(out) => {
            emit(&json!({
                "schema_version": SCHEMA_VERSION,
                "command": command,
                "status": if out.passed { "pass" } else { "fail" },
                "config": cfg,
                "result": out.result,
            }));
            ExitCode::from(if out.passed { 0 } else { 2 })
        }
        Err(e) => fail(serde_json::to_value(&cfg).unwrap_or(Value::Null), e),
    }
}
