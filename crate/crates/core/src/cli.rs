//! The `mixrough` command line. Every subcommand validates its parameters,
//! runs one pipeline inside a worker pool sized by `--jobs`, and writes its
//! CSV/JSON outputs plus `manifest.json` into the run directory.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 invalid input, 64 usage error.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{default_kappa, default_p_prime, ParamSet};
use crate::drivers::{rng_stream, CmBasis, CovarianceFactor, GridPath};
use crate::error::{Error, Result};
use crate::integrator::{audit_derivatives, solve_rde, solve_skeleton, taylor_check, SystemSpec, VectorField};
use crate::io::{fmt_f64, grid_path_csv, mc_log_csv, spectrum_csv, RunManifest};
use crate::laplace::oracle::{DiscreteGaussianOracle, QuadraticProgramOracle};
use crate::laplace::{
    alpha0, assemble_hessian, audit_functional, discrete_gram, estimate_lambda, minimize_rate, minimize_rate_discrete,
    Alpha0Report, FunctionalSpec, HessianAssembly, MinimizeOptions, MinimizerResult,
};
use crate::linalg::regression_slope;
use crate::montecarlo::{estimate_j, fernique_csv, fernique_probe, ldp_csv, ldp_scale_experiment};
use crate::rough::{
    convergence_csv, djp_distance, dyadic_lift, homogeneous_norm_surrogate, lift_convergence_experiment,
    p_variation_exact, DyadicMetricConfig,
};

/// Recipe offset used for the default `p` and `q`.
const RECIPE_E: f64 = 0.01;
/// Exit code for argument errors (BSD `EX_USAGE`).
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "mixrough", version, about = "Mixed fBm/Bm rough differential equations and Laplace asymptotics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact driver samples and the level-2 lift of the first one.
    Sample(Common),
    /// Dyadic-distance moments of coarse lifts against the reference level.
    LiftConvergence(Common),
    /// Dyadic distances, homogeneous norm and p-variation per sample.
    Metrics(Common),
    /// Skeleton, RDE solutions over the eps grid, and the Taylor remainder.
    Solve(Common),
    /// Rate minimizer on the truncated basis.
    Minimize(Common),
    /// Hessian assembly, spectrum and the Lambda / trace corrections.
    Hessian(Common),
    /// Leading Laplace coefficient, with oracles where available.
    Alpha0(Common),
    /// Large-deviation scale experiment over the eps grid.
    Ldp(Common),
    /// Monte Carlo Laplace ratios against alpha0.
    Laplace(Common),
    /// Exponential integrability probe of the lifted driver.
    Fernique(Common),
    /// Finite-difference audit of the system and functional derivatives.
    AuditDerivatives(Common),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Sample(_) => "sample",
            Command::LiftConvergence(_) => "lift-convergence",
            Command::Metrics(_) => "metrics",
            Command::Solve(_) => "solve",
            Command::Minimize(_) => "minimize",
            Command::Hessian(_) => "hessian",
            Command::Alpha0(_) => "alpha0",
            Command::Ldp(_) => "ldp",
            Command::Laplace(_) => "laplace",
            Command::Fernique(_) => "fernique",
            Command::AuditDerivatives(_) => "audit-derivatives",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Sample(c)
            | Command::LiftConvergence(c)
            | Command::Metrics(c)
            | Command::Solve(c)
            | Command::Minimize(c)
            | Command::Hessian(c)
            | Command::Alpha0(c)
            | Command::Ldp(c)
            | Command::Laplace(c)
            | Command::Fernique(c)
            | Command::AuditDerivatives(c) => c,
        }
    }

    fn default_samples(&self) -> usize {
        match self {
            Command::Sample(_) => 4,
            Command::LiftConvergence(_) => 500,
            Command::Metrics(_) => 16,
            Command::Solve(_) => 20,
            _ => 2000,
        }
    }
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// Hurst exponent of the fractional block.
    #[arg(long = "H", default_value_t = 0.4)]
    hurst: f64,
    /// Rough-path exponent [default: 1/(H - 0.02)].
    #[arg(long)]
    p: Option<f64>,
    /// Cameron–Martin exponent [default: 1/(H + 0.49)].
    #[arg(long)]
    q: Option<f64>,
    /// Functional regularity exponent [default: 1/H + 0.5].
    #[arg(long = "p-prime")]
    p_prime: Option<f64>,
    /// Dyadic metric weight [default: p - 0.75].
    #[arg(long)]
    kappa: Option<f64>,
    /// Dyadic level of the grid (2^level intervals).
    #[arg(long, default_value_t = 8)]
    level: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Built-in system name (`linear`, `scalar-poly`) or a JSON file.
    #[arg(long, default_value = "linear")]
    system: String,
    /// Built-in functional (`quadratic`, `terminal-smooth`) or a JSON file
    /// [default: quadratic for linear systems, terminal-smooth otherwise].
    #[arg(long)]
    functional: Option<String>,
    /// Comma-separated, strictly decreasing noise levels.
    #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 0.5, 0.25])]
    eps: Vec<f64>,
    /// Monte Carlo sample count (default depends on the subcommand).
    #[arg(long)]
    samples: Option<usize>,
    /// Cameron–Martin truncation N.
    #[arg(long, default_value_t = 64)]
    truncation: usize,
    /// Output directory [default: ./runs/<timestamp>].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, env = "MRL_JOBS")]
    jobs: Option<usize>,
    /// Exponents c for the `fernique` probe.
    #[arg(long = "c-grid", value_delimiter = ',', default_values_t = vec![0.0, 0.01, 0.02, 0.05, 0.1, 0.2])]
    c_grid: Vec<f64>,
}

/// Everything a subcommand needs after validation.
struct Context {
    params: ParamSet,
    system: SystemSpec,
    vf: Box<dyn VectorField>,
    functional: FunctionalSpec,
    args: Common,
    samples: usize,
    out: PathBuf,
}

impl Context {
    fn basis(&self) -> Result<CmBasis> {
        CmBasis::new(&self.params, self.args.truncation, self.params.level)
    }

    fn options(&self) -> MinimizeOptions {
        MinimizeOptions { seed: self.params.seed, ..MinimizeOptions::default() }
    }

    fn write(&self, m: &mut RunManifest, name: &str, content: &str) -> Result<()> {
        m.write_output(&self.out, name, content).map(|_| ())
    }

    /// The exact Gaussian oracle, when the system is linear with an
    /// eps-independent drift and the functional is quadratic.
    fn gaussian_oracle(&self) -> Result<Option<DiscreteGaussianOracle>> {
        match (&self.system, &self.functional) {
            (SystemSpec::Linear(sys), FunctionalSpec::Quadratic(_)) if sys.c.iter().all(|v| *v == 0.0) => {
                let factor = CovarianceFactor::new(&self.params)?;
                DiscreteGaussianOracle::new(sys, self.functional.as_functional(), &factor).map(Some)
            }
            _ => Ok(None),
        }
    }

    fn has_qp_oracle(&self) -> bool {
        matches!((&self.system, &self.functional), (SystemSpec::Linear(_), FunctionalSpec::Quadratic(_)))
    }
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
        }
    };
    match execute(&cli.command) {
        Ok((dir, true)) => {
            println!("{}", dir.display());
            0
        }
        Ok((dir, false)) => {
            eprintln!("error: checks failed, see {}", dir.display());
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load_text(arg: &str) -> Result<Option<String>> {
    let path = std::path::Path::new(arg);
    if path.extension().is_some_and(|e| e == "json") || path.is_file() {
        Ok(Some(fs::read_to_string(path)?))
    } else {
        Ok(None)
    }
}

fn prepare(cmd: &Command) -> Result<Context> {
    let args = cmd.common().clone();
    // Parameters first, so window violations are reported before anything
    // else is read.
    let hurst = args.hurst;
    let p = args.p.unwrap_or(1.0 / (hurst - 2.0 * RECIPE_E));
    let q = args.q.unwrap_or(1.0 / (hurst + 0.5 - RECIPE_E));
    let p_prime = args.p_prime.unwrap_or_else(|| default_p_prime(hurst));
    let kappa = args.kappa.unwrap_or_else(|| default_kappa(p));
    ParamSet::new(hurst, p, q, p_prime, kappa, 1, 1, 1, args.level, args.seed)?;

    let system = match load_text(&args.system)? {
        Some(text) => SystemSpec::from_json(&text)?,
        None => SystemSpec::builtin(&args.system)?,
    };
    let vf = system.clone().into_field();
    let n = vf.state_dim();
    let params = ParamSet::new(hurst, p, q, p_prime, kappa, vf.fbm_dim(), vf.bm_dim(), n, args.level, args.seed)?;
    let fname = args.functional.clone().unwrap_or_else(|| match system {
        SystemSpec::Linear(_) => "quadratic".into(),
        SystemSpec::ScalarPoly(_) => "terminal-smooth".into(),
    });
    let functional = match load_text(&fname)? {
        Some(text) => FunctionalSpec::from_json(&text)?,
        None => FunctionalSpec::builtin(&fname, n)?,
    };
    functional.validate(n)?;
    if args.eps.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(Error::InvalidSpec("eps values must be positive".into()));
    }
    if args.truncation == 0 {
        return Err(Error::InvalidSpec("truncation must be at least 1".into()));
    }
    let out = args.out.clone().unwrap_or_else(|| {
        PathBuf::from("runs").join(chrono::Local::now().format("%Y%m%d-%H%M%S%.3f").to_string())
    });
    let samples = args.samples.unwrap_or_else(|| cmd.default_samples());
    Ok(Context { params, system, vf, functional, args, samples, out })
}

fn execute(cmd: &Command) -> Result<(PathBuf, bool)> {
    let ctx = prepare(cmd)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.args.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::CheckFailed(format!("worker pool: {e}")))?;
    fs::create_dir_all(&ctx.out)?;
    let mut manifest = RunManifest::new(ctx.params, cmd.name());
    manifest.record("system", &ctx.system)?;
    manifest.record("functional", &ctx.functional)?;
    manifest.record("samples", ctx.samples)?;
    let passed = pool.install(|| match cmd {
        Command::Sample(_) => sample(&ctx, &mut manifest),
        Command::LiftConvergence(_) => lift_convergence(&ctx, &mut manifest),
        Command::Metrics(_) => metrics(&ctx, &mut manifest),
        Command::Solve(_) => solve(&ctx, &mut manifest),
        Command::Minimize(_) => minimize(&ctx, &mut manifest),
        Command::Hessian(_) => hessian(&ctx, &mut manifest),
        Command::Alpha0(_) => alpha0_cmd(&ctx, &mut manifest),
        Command::Ldp(_) => ldp(&ctx, &mut manifest),
        Command::Laplace(_) => laplace(&ctx, &mut manifest),
        Command::Fernique(_) => fernique(&ctx, &mut manifest),
        Command::AuditDerivatives(_) => audit(&ctx, &mut manifest),
    })?;
    manifest.finish(&ctx.out)?;
    Ok((ctx.out, passed))
}

fn sample(ctx: &Context, m: &mut RunManifest) -> Result<bool> {
    let factor = CovarianceFactor::new(&ctx.params)?;
    let paths: Vec<GridPath> =
        (0..ctx.samples).map(|i| factor.sample(&mut rng_stream(ctx.params.seed, i as u64))).collect();
    for (i, path) in paths.iter().enumerate() {
        ctx.write(m, &format!("sample_{i:04}.csv"), &grid_path_csv(path))?;
    }
    if let Some(first) = paths.first() {
        ctx.write(m, "sample_0000_level2.csv", &dyadic_lift(first).level2_csv())?;
    }
    m.record("reconstruction_error", factor.reconstruction_error())?;
    Ok(true)
}

fn lift_convergence(ctx: &Context, m: &mut RunManifest) -> Result<bool> {
    let ms: Vec<u32> = (3..=7).filter(|&k| k < ctx.params.level).collect();
    if ms.len() < 2 {
        return Err(Error::InvalidSpec("lift-convergence needs --level of at least 5".into()));
    }
    let rows = lift_convergence_experiment(&ctx.params, ctx.samples, &ms)?;
    ctx.write(m, "lift_convergence.csv", &convergence_csv(&rows))?;
    let slope = |j: u8| {
        let (x, y): (Vec<f64>, Vec<f64>) =
            rows.iter().filter(|r| r.j == j).map(|r| (r.m as f64, r.mean_distance.log2())).unzip();
        regression_slope(&x, &y)
    };
    m.record("slope_j1", slope(1))?;
    m.record("slope_j2", slope(2))?;
    m.record("reference_slope", -(ctx.params.hurst * ctx.params.p - 1.0) / 2.0)?;
    Ok(true)
}

fn metrics(ctx: &Context, m: &mut RunManifest) -> Result<bool> {
    let factor = CovarianceFactor::new(&ctx.params)?;
    let cfg = DyadicMetricConfig::from_params(&ctx.params);
    let pvar_level = ctx.params.level.min(8);
    let mut csv = String::from("sample,d1,d2,homogeneous_norm,p_variation\n");
    for i in 0..ctx.samples {
        let x = factor.sample(&mut rng_stream(ctx.params.seed, i as u64));
        let lift = dyadic_lift(&x);
        let coarse = x.subsample(pvar_level)?;
        let cells = [
            djp_distance(&lift, None, 1, &cfg)?,
            djp_distance(&lift, None, 2, &cfg)?,
            homogeneous_norm_surrogate(&lift, &cfg)?,
            p_variation_exact(coarse.values(), coarse.dim(), ctx.params.p)?,
        ];
        csv.push_str(&format!("{i},{}\n", cells.map(fmt_f64).join(",")));
    }
    ctx.write(m, "metrics.csv", &csv)?;
    m.record("p_variation_level", pvar_level)?;
    Ok(true)
}

fn solve(ctx: &Context, m: &mut RunManifest) -> Result<bool> {
    let vf = ctx.vf.as_ref();
    let shift = GridPath::zeros(ctx.params.dim(), ctx.params.level);
    ctx.write(m, "skeleton.csv", &grid_path_csv(&solve_skeleton(&shift, vf)?))?;
    let factor = CovarianceFactor::new(&ctx.params)?;
    let lift = dyadic_lift(&factor.sample(&mut rng_stream(ctx.params.seed, 0)));
    for (k, &eps) in ctx.args.eps.iter().enumerate() {
        let y = solve_rde(&lift, eps, vf, None, None)?;
        ctx.write(m, &format!("solution_eps{k}.csv"), &grid_path_csv(&y))?;
    }
    let report = taylor_check(&ctx.params, vf, &shift, &ctx.args.eps, ctx.samples, 2)?;
    let mut csv = String::from("eps,mean_remainder,stderr\n");
    for r in &report.rows {
        csv.push_str(&format!("{},{},{}\n", fmt_f64(r.eps), fmt_f64(r.mean_remainder), fmt_f64(r.stderr)));
    }
    ctx.write(m, "taylor.csv", &csv)?;
    m.record("eps", &ctx.args.eps)?;
    m.record("taylor_slope", report.slope)?;
    Ok(true)
}

fn minimizer_csv(basis: &CmBasis, coeffs: &[f64]) -> String {
    let mut out = String::from("index,kind,coordinate,mode,coefficient\n");
    for (j, (e, c)) in basis.entries().iter().zip(coeffs).enumerate() {
        out.push_str(&format!("{j},{:?},{},{},{}\n", e.kind, e.coordinate, e.mode, fmt_f64(*c)));
    }
    out
}

fn record_minimizer(m: &mut RunManifest, key: &str, r: &MinimizerResult) -> Result<()> {
    #[derive(Serialize)]
    struct Summary<'a> {
        value_a: f64,
        gradient_norm: f64,
        iterations: usize,
        starts_agree: bool,
        start_values: &'a [f64],
    }
    m.record(
        key,
        Summary {
            value_a: r.value_a,
            gradient_norm: r.gradient_norm,
            iterations: r.iterations,
            starts_agree: r.starts_agree,
            start_values: &r.start_values,
        },
    )
}

fn minimize(ctx: &Context, m: &mut RunManifest) -> Result<bool> {
    let basis = ctx.basis()?;
    let r = minimize_rate(ctx.vf.as_ref(), ctx.functional.as_functional(), &basis, &ctx.options())?;
    ctx.write(m, "minimizer.csv", &minimizer_csv(&basis, &r.coeffs))?;
    let path = solve_skeleton(&basis.realize(&r.coeffs), ctx.vf.as_ref())?;
    ctx.write(m, "minimizer_path.csv", &grid_path_csv(&path))?;
    let mut log = String::from("iteration,value,gradient_norm\n");
    for rec in &r.log {
        log.push_str(&format!("{},{},{}\n", rec.iteration, fmt_f64(rec.value), fmt_f64(rec.gradient_norm)));
    }
    ctx.write(m, "minimizer_log.csv", &log)?;
    m.record("minimizer_coeffs", &r.coeffs)?;
    m.record("value_a", r.value_a)?;
    record_minimizer(m, "minimizer", &r)?;
    Ok(true)
}

/// Minimizer, Hessian with `Lambda`, and `alpha0` in one geometry.
struct Constants {
    minimizer: MinimizerResult,
    assembly: HessianAssembly,
    alpha: Alpha0Report,
}

fn basis_constants(ctx: &Context, basis: &CmBasis) -> Result<Constants> {
    let (vf, f) = (ctx.vf.as_ref(), ctx.functional.as_functional());
    let minimizer = minimize_rate(vf, f, basis, &ctx.options())?;
    let lambda = estimate_lambda(&ctx.params, vf, f, basis, &minimizer.coeffs, ctx.samples)?;
    let assembly = assemble_hessian(&ctx.params, vf, f, basis, &minimizer.coeffs)?.with_lambda(lambda);
    let alpha = alpha0(&assembly)?;
    Ok(Constants { minimizer, assembly, alpha })
}

fn discrete_constants(ctx: &Context, basis: &CmBasis) -> Result<Constants> {
    let (vf, f) = (ctx.vf.as_ref(), ctx.functional.as_functional());
    let gram = discrete_gram(basis, &CovarianceFactor::new(&ctx.params)?)?;
    let minimizer = minimize_rate_discrete(&ctx.params, vf, f, basis, &ctx.options())?;
    let lambda = estimate_lambda(&ctx.params, vf, f, basis, &minimizer.coeffs, ctx.samples)?;
    let assembly =
        assemble_hessian(&ctx.params, vf, f, basis, &minimizer.coeffs)?.in_metric(&gram)?.with_lambda(lambda);
    let alpha = alpha0(&assembly)?;
    Ok(Constants { minimizer, assembly, alpha })
}

fn record_hessian(ctx: &Context, m: &mut RunManifest, c: &Constants) -> Result<()> {
    ctx.write(m, "spectrum.csv", &spectrum_csv(&c.assembly.spectrum))?;
    ctx.write(m, "hessian.json", &serde_json::to_string_pretty(&c.assembly)?)?;
    m.record("minimizer_coeffs", &c.minimizer.coeffs)?;
    m.record("value_a", c.minimizer.value_a)?;
    record_minimizer(m, "minimizer", &c.minimizer)?;
    m.record("spectrum", &c.assembly.spectrum)?;
    m.record("trace_a_minus_a1", c.assembly.trace_a_minus_a1)?;
    m.record("lambda_functional", c.assembly.lambda_functional)?;
    m.record("asymmetry", c.assembly.asymmetry)?;
    m.record("hs_norm_sq", c.assembly.hs_norm_sq)?;
    m.record("hs_tail", c.assembly.hs_tail)?;
    Ok(())
}

fn hessian(ctx: &Context, m: &mut RunManifest) -> Result<bool> {
    let basis = ctx.basis()?;
    let c = basis_constants(ctx, &basis)?;
    record_hessian(ctx, m, &c)?;
    Ok(true)
}

/// Records both geometries and any applicable oracle; returns the discrete
/// constants and the Gaussian oracle for the Monte Carlo subcommands.
fn record_alpha0(ctx: &Context, m: &mut RunManifest) -> Result<(Constants, Option<DiscreteGaussianOracle>)> {
    let basis = ctx.basis()?;
    let c = basis_constants(ctx, &basis)?;
    record_hessian(ctx, m, &c)?;
    m.record("alpha0", c.alpha.alpha0)?;
    m.record("alpha0_cf", c.alpha.alpha0_cf)?;
    m.record("alpha0_printed_det", c.alpha.alpha0_printed_det)?;
    m.record("readings_agree", c.alpha.readings_agree)?;
    m.record("alpha0_report", c.alpha)?;

    let d = discrete_constants(ctx, &basis)?;
    ctx.write(m, "spectrum_discrete.csv", &spectrum_csv(&d.assembly.spectrum))?;
    m.record("alpha0_discrete", d.alpha.alpha0)?;
    m.record("value_a_discrete", d.minimizer.value_a)?;
    m.record("alpha0_discrete_report", d.alpha)?;

    if ctx.has_qp_oracle() {
        let qp = QuadraticProgramOracle::new(ctx.vf.as_ref(), ctx.functional.as_functional(), &basis, None)?;
        m.record("oracle_alpha0", qp.alpha0)?;
        m.record("oracle", &qp)?;
    }
    let gaussian = ctx.gaussian_oracle()?;
    if let Some(g) = &gaussian {
        m.record("gaussian_oracle", g)?;
    }
    Ok((d, gaussian))
}

fn alpha0_cmd(ctx: &Context, m: &mut RunManifest) -> Result<bool> {
    record_alpha0(ctx, m)?;
    Ok(true)
}

/// Rate and importance shift for the Monte Carlo subcommands: the discrete
/// minimizer shifts, and the Gaussian oracle supplies `a` when it applies.
fn mc_setup(ctx: &Context, m: &mut RunManifest) -> Result<(f64, GridPath)> {
    let basis = ctx.basis()?;
    let r = minimize_rate_discrete(
        &ctx.params,
        ctx.vf.as_ref(),
        ctx.functional.as_functional(),
        &basis,
        &ctx.options(),
    )?;
    let (a, source) = match ctx.gaussian_oracle()? {
        Some(g) => (g.value_a, "gaussian-oracle"),
        None => (r.value_a, "discrete-minimizer"),
    };
    m.record("value_a", a)?;
    m.record("value_a_source", source)?;
    m.record("shift_coeffs", &r.coeffs)?;
    Ok((a, basis.realize(&r.coeffs)))
}

fn ldp(ctx: &Context, m: &mut RunManifest) -> Result<bool> {
    let (a, shift) = mc_setup(ctx, m)?;
    let report = ldp_scale_experiment(
        &ctx.params,
        ctx.vf.as_ref(),
        ctx.functional.as_functional(),
        &ctx.args.eps,
        ctx.samples,
        a,
        Some(&shift),
    )?;
    ctx.write(m, "ldp.csv", &ldp_csv(&report.rows))?;
    let log: Vec<_> = report.estimates.iter().map(|e| e.log_row("ldp", ctx.params.seed)).collect();
    ctx.write(m, "mc_log.csv", &mc_log_csv(&log))?;
    m.record("gap_decreasing", report.gap_decreasing)?;
    m.record("rows", &report.rows)?;
    Ok(true)
}

fn laplace(ctx: &Context, m: &mut RunManifest) -> Result<bool> {
    let basis_alpha0 = record_alpha0(ctx, m)?;
    let (discrete, gaussian) = basis_alpha0;
    let (a, shift) = mc_setup(ctx, m)?;
    let reference = gaussian.as_ref().map_or(f64::NAN, |g| g.laplace_ratio);
    let mut csv = String::from("eps,laplace_ratio,laplace_ratio_stderr,alpha0_discrete,oracle_ratio\n");
    let mut log = Vec::new();
    for &eps in &ctx.args.eps {
        let r = estimate_j(&ctx.params, ctx.vf.as_ref(), ctx.functional.as_functional(), eps, ctx.samples, Some(&shift))?;
        let (ratio, se) = r.laplace_ratio(a);
        let cells = [eps, ratio, se, discrete.alpha.alpha0, reference];
        csv.push_str(&cells.map(fmt_f64).join(","));
        csv.push('\n');
        log.push(r.log_row("laplace", ctx.params.seed));
    }
    ctx.write(m, "laplace.csv", &csv)?;
    ctx.write(m, "mc_log.csv", &mc_log_csv(&log))?;
    Ok(true)
}

fn fernique(ctx: &Context, m: &mut RunManifest) -> Result<bool> {
    let report = fernique_probe(&ctx.params, &ctx.args.c_grid, ctx.samples)?;
    ctx.write(m, "fernique.csv", &fernique_csv(&report.rows))?;
    m.record("largest_stable_c", report.largest_stable_c)?;
    Ok(true)
}

fn audit(ctx: &Context, m: &mut RunManifest) -> Result<bool> {
    const FUNCTIONAL_TOL: f64 = 1e-5;
    let report = audit_derivatives(ctx.vf.as_ref(), 20, 1.0, ctx.params.seed);
    let n = ctx.vf.state_dim();
    let (grad_err, hess_err) =
        audit_functional(ctx.functional.as_functional(), n, ctx.params.level.min(6), 5, ctx.params.seed);
    let mut csv = String::from("check,worst_rel_error\n");
    for (name, err) in &report.checks {
        csv.push_str(&format!("{name},{}\n", fmt_f64(*err)));
    }
    csv.push_str(&format!("functional_gradient,{}\n", fmt_f64(grad_err)));
    csv.push_str(&format!("functional_hessian,{}\n", fmt_f64(hess_err)));
    ctx.write(m, "audit.csv", &csv)?;
    let functional_ok = grad_err <= FUNCTIONAL_TOL && hess_err <= FUNCTIONAL_TOL;
    m.record("system_audit", &report)?;
    m.record("functional_audit", [grad_err, hess_err])?;
    let passed = report.passed && functional_ok;
    m.record("passed", passed)?;
    Ok(passed)
}
