//! Acceptance gate A1–A11. Each test prints one `PASS`/`FAIL` line with the
//! measured quantities before asserting.

use std::fs;
use std::path::Path;
use std::time::Instant;

use mixrough::drivers::{rng_stream, sample_mixed_path, CmBasis, GridPath};
use mixrough::integrator::{FlowBundle, LinearSystem, SystemSpec, VectorField};
use mixrough::laplace::oracle::{DiscreteGaussianOracle, QuadraticProgramOracle};
use mixrough::laplace::{
    alpha0, assemble_hessian, assemble_hessian_pathwise, estimate_lambda, minimize_rate, minimize_rate_discrete,
    FunctionalSpec, MinimizeOptions, RateObjective,
};
use mixrough::linalg::{max_abs_asymmetry, mean_stderr, regression_slope};
use mixrough::montecarlo::ldp_scale_experiment;
use mixrough::rough::{chen_compose, cross_integrals, dyadic_lift, lift_convergence_experiment};
use mixrough::{CovarianceFactor, ParamSet};
use rand::Rng;

fn verdict(name: &str, pass: bool, detail: String) {
    println!("{name}: {} {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{name} failed: {detail}");
}

fn recipe(vf: &dyn VectorField, level: u32, seed: u64) -> ParamSet {
    ParamSet::from_recipe(0.4, 0.01, vf.fbm_dim(), vf.bm_dim(), vf.state_dim(), level, seed).unwrap()
}

fn builtin(system: &str, functional: &str) -> (SystemSpec, Box<dyn VectorField>, FunctionalSpec) {
    let spec = SystemSpec::builtin(system).unwrap();
    let vf = spec.clone().into_field();
    let f = FunctionalSpec::builtin(functional, vf.state_dim()).unwrap();
    (spec, vf, f)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn a01_covariance_fidelity() {
    let start = Instant::now();
    let params = ParamSet::from_recipe(0.4, 0.01, 1, 1, 1, 8, 101).unwrap();
    let factor = CovarianceFactor::new(&params).unwrap();
    let samples: Vec<GridPath> = (0..10_000).map(|i| sample_mixed_path(&params, &factor, i).unwrap()).collect();
    let mut rng = rng_stream(2024, 0);
    let mut worst_z = 0.0f64;
    for _ in 0..5 {
        let a = rng.gen_range(0..=params.steps());
        let mut b = rng.gen_range(0..=params.steps());
        while b == a {
            b = rng.gen_range(0..=params.steps());
        }
        let (s, t) = (a.min(b), a.max(b));
        let sq: Vec<f64> = samples.iter().map(|x| (x.point(t)[0] - x.point(s)[0]).powi(2)).collect();
        let est = mean_stderr(&sq);
        let exact = ((t - s) as f64 / params.steps() as f64).powf(2.0 * params.hurst);
        let z = (est.mean - exact).abs() / est.stderr;
        println!("  [{s}, {t}]: {:.6} +- {:.6} vs {exact:.6} (z = {z:.2})", est.mean, est.stderr);
        worst_z = worst_z.max(z);
    }
    let elapsed = start.elapsed().as_secs_f64();
    verdict("A1", worst_z <= 3.0 && elapsed < 30.0, format!("worst z = {worst_z:.3}, {elapsed:.1} s"));
}

#[test]
fn a02_chen_and_geometric_symmetry() {
    let params = ParamSet::from_recipe(0.4, 0.01, 2, 1, 1, 7, 202).unwrap();
    let factor = CovarianceFactor::new(&params).unwrap();
    let (mut chen, mut sym) = (0.0f64, 0.0f64);
    for i in 0..100 {
        let lift = dyadic_lift(&sample_mixed_path(&params, &factor, i).unwrap());
        let d = lift.dim();
        for level in lift.pyramid() {
            let width = lift.steps() >> level.level;
            for l in 0..level.intervals() {
                let (s, t) = (l * width, (l + 1) * width);
                let x2 = level.second(l);
                if width > 1 {
                    let u = s + width / 2;
                    let composed = chen_compose(
                        &lift.level2_between(s, u).unwrap(),
                        &lift.level2_between(u, t).unwrap(),
                        &lift.level1_between(s, u),
                        &lift.level1_between(u, t),
                    );
                    chen = composed.iter().zip(x2).fold(chen, |m, (a, b)| m.max((a - b).abs()));
                }
                let x1 = level.first(l);
                for a in 0..d {
                    for b in 0..d {
                        let s_ab = 0.5 * (x2[a * d + b] + x2[b * d + a]);
                        sym = sym.max((s_ab - 0.5 * x1[a] * x1[b]).abs());
                    }
                }
            }
        }
    }
    verdict("A2", chen <= 1e-12 && sym <= 1e-12, format!("Chen defect {chen:.2e}, symmetry defect {sym:.2e}"));
}

#[test]
fn a03_lift_convergence_rate() {
    let start = Instant::now();
    let q = 1.0 / (0.4 + 0.5 - 0.01);
    let params = ParamSet::new(0.4, 2.63, q, 3.0, 2.63 - 0.75, 1, 1, 1, 10, 303).unwrap();
    let ms: Vec<u32> = (3..=7).collect();
    let rows = lift_convergence_experiment(&params, 500, &ms).unwrap();
    let (x, y): (Vec<f64>, Vec<f64>) =
        rows.iter().filter(|r| r.j == 1).map(|r| (r.m as f64, r.mean_distance.log2())).unzip();
    let slope = regression_slope(&x, &y);
    let reference = -(params.hurst * params.p - 1.0) / 2.0;
    let elapsed = start.elapsed().as_secs_f64();
    for (m, v) in x.iter().zip(&y) {
        println!("  m = {m}: log2 moment {v:.4}");
    }
    let pass = slope < 0.0 && (slope - reference).abs() <= 0.35 * reference.abs() && elapsed < 180.0;
    verdict("A3", pass, format!("slope {slope:.4}, reference {reference:.4}, {elapsed:.1} s"));
}

#[test]
fn a04_cross_integral_identity() {
    let params = ParamSet::from_recipe(0.4, 0.01, 2, 2, 1, 8, 404).unwrap();
    let factor = CovarianceFactor::new(&params).unwrap();
    let mut rng = rng_stream(404, 1);
    let mut worst = 0.0f64;
    for i in 0..20 {
        let x = sample_mixed_path(&params, &factor, i).unwrap();
        let block = |r: std::ops::Range<usize>| {
            let v: Vec<f64> = (0..=x.steps()).flat_map(|k| x.point(k)[r.clone()].to_vec()).collect();
            GridPath::from_values(r.len(), x.level(), v).unwrap()
        };
        let (b, w) = (block(0..2), block(2..4));
        for _ in 0..10 {
            let s = rng.gen_range(0..x.steps());
            let t = rng.gen_range(s + 1..=x.steps());
            let ci = cross_integrals(&b, &w, s, t).unwrap();
            for a in 0..2 {
                for c in 0..2 {
                    let lhs = ci.bw[a * 2 + c] + ci.wb[c * 2 + a];
                    let rhs = (b.point(t)[a] - b.point(s)[a]) * (w.point(t)[c] - w.point(s)[c]);
                    worst = worst.max((lhs - rhs).abs() / (1.0 + rhs.abs()));
                }
            }
        }
    }
    verdict("A4", worst <= 1e-13, format!("worst defect {worst:.2e}"));
}

#[test]
fn a05_two_route_flows() {
    let SystemSpec::Linear(toy) = SystemSpec::linear_toy() else { unreachable!() };
    // eps-dependent drift so that the theta terms are not trivially zero
    let sys = LinearSystem { c: vec![0.3, -0.2], ..toy };
    let vf: Box<dyn VectorField> = Box::new(sys);
    let params = recipe(vf.as_ref(), 12, 0);
    let basis = CmBasis::new(&params, 4, params.level).unwrap();
    let mut rng = rng_stream(505, 0);
    let coeffs: Vec<f64> = (0..basis.len()).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let flows = FlowBundle::new(vf.as_ref(), &basis.realize(&coeffs)).unwrap();
    let rel_sup = |a: &GridPath, b: &GridPath| a.sup_distance(b).unwrap() / b.sup_norm().max(1e-300);

    let mut chi = 0.0f64;
    for j in [1, 3, 6, 9] {
        let f = basis.realize_entry(j);
        chi = chi.max(rel_sup(&flows.chi(&f).unwrap(), &flows.chi_direct(&f).unwrap()));
    }
    let theta1 = rel_sup(&flows.theta1(), &flows.theta1_direct().unwrap());
    let k = basis.realize(&coeffs.iter().map(|c| 0.5 - c).collect::<Vec<_>>());
    let theta2 = rel_sup(&flows.theta2(&k).unwrap(), &flows.theta2_direct(&k).unwrap());
    let residual = flows.phi1_residual(&k).unwrap();
    let worst = chi.max(theta1).max(theta2).max(residual);
    verdict(
        "A5",
        worst <= 1e-6,
        format!("chi {chi:.2e}, theta1 {theta1:.2e}, theta2 {theta2:.2e}, phi1 residual {residual:.2e}"),
    );
}

#[test]
fn a06_gradient_check() {
    let mut worst = 0.0f64;
    for (system, functional) in [("linear", "quadratic"), ("scalar-poly", "terminal-smooth")] {
        let (_, vf, spec) = builtin(system, functional);
        let params = recipe(vf.as_ref(), 8, 0);
        let basis = CmBasis::new(&params, 6, params.level).unwrap();
        let obj = RateObjective::new(vf.as_ref(), spec.as_functional(), &basis).unwrap();
        let mut rng = rng_stream(606, 0);
        for _ in 0..5 {
            let c: Vec<f64> = (0..basis.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (_, grad) = obj.value_and_gradient(&c).unwrap();
            let h = 1e-6;
            let fd: Vec<f64> = (0..c.len())
                .map(|j| {
                    let mut up = c.clone();
                    let mut down = c.clone();
                    up[j] += h;
                    down[j] -= h;
                    (obj.value(&up).unwrap() - obj.value(&down).unwrap()) / (2.0 * h)
                })
                .collect();
            let scale = fd.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-8);
            let err = grad.iter().zip(&fd).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale;
            worst = worst.max(err);
        }
    }
    verdict("A6", worst <= 1e-4, format!("worst relative error {worst:.2e} over 10 points"));
}

#[test]
fn a07_hessian_symmetry_and_v1_reconstruction() {
    let (_, vf, spec) = builtin("linear", "quadratic");
    let params = recipe(vf.as_ref(), 8, 0);
    let basis = CmBasis::new(&params, 6, params.level).unwrap();
    let m = minimize_rate(vf.as_ref(), spec.as_functional(), &basis, &MinimizeOptions::default()).unwrap();
    let pathwise = assemble_hessian_pathwise(vf.as_ref(), spec.as_functional(), &basis, &m.coeffs).unwrap();
    let asym = max_abs_asymmetry(&pathwise);

    let mut v1_gap = 0.0f64;
    for system in ["linear", "scalar-poly"] {
        let vf = SystemSpec::builtin(system).unwrap().into_field();
        let params = recipe(vf.as_ref(), 8, 0);
        let basis = CmBasis::new(&params, 4, params.level).unwrap();
        let coeffs: Vec<f64> = (0..basis.len()).map(|j| 0.2 * (-1f64).powi(j as i32) / (1.0 + j as f64)).collect();
        let flows = FlowBundle::new(vf.as_ref(), &basis.realize(&coeffs)).unwrap();
        for (a, b) in [(1, 2), (3, 3), (5, 8)] {
            let (f, k) = (basis.realize_entry(a), basis.realize_entry(b));
            let direct = flows.second_variation(&f, &k).unwrap().v1;
            let rebuilt = flows.v1_from_r_terms(&f, &k).unwrap();
            v1_gap = v1_gap.max(rebuilt.sup_distance(&direct).unwrap());
        }
    }
    verdict("A7", asym <= 1e-8 && v1_gap <= 1e-7, format!("asymmetry {asym:.2e}, V1 gap {v1_gap:.2e}"));
}

#[test]
fn a08_quadratic_oracle() {
    let start = Instant::now();
    let (spec, vf, functional) = builtin("linear", "quadratic");
    let f = functional.as_functional();
    let params = recipe(vf.as_ref(), 10, 808);
    let basis = CmBasis::new(&params, 64, params.level).unwrap();
    let m = minimize_rate(vf.as_ref(), f, &basis, &MinimizeOptions::default()).unwrap();
    let lambda = estimate_lambda(&params, vf.as_ref(), f, &basis, &m.coeffs, 2000).unwrap();
    let asm = assemble_hessian(&params, vf.as_ref(), f, &basis, &m.coeffs).unwrap().with_lambda(lambda);
    let report = alpha0(&asm).unwrap();
    let oracle = QuadraticProgramOracle::new(vf.as_ref(), f, &basis, None).unwrap();

    let c_scale = oracle.minimizer.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let c_err = m.coeffs.iter().zip(&oracle.minimizer).fold(0.0f64, |s, (a, b)| s.max((a - b).abs())) / c_scale;
    let a_err = rel(m.value_a, oracle.value_a);
    let top = oracle.spectrum.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let spec_err = asm
        .spectrum
        .iter()
        .zip(&oracle.spectrum)
        .fold(0.0f64, |s, (a, b)| s.max((a - b).abs() / b.abs().max(1e-6 * top)));
    let alpha_err = rel(report.alpha0, oracle.alpha0);
    let elapsed = start.elapsed().as_secs_f64();

    // informational: the exact Gaussian integral of the discrete model
    let SystemSpec::Linear(sys) = &spec else { unreachable!() };
    let gaussian = DiscreteGaussianOracle::new(sys, f, &CovarianceFactor::new(&params).unwrap()).unwrap();
    println!(
        "  basis alpha0 {:.6} (oracle {:.6}); exact discrete ratio {:.6}",
        report.alpha0, oracle.alpha0, gaussian.laplace_ratio
    );
    let worst = c_err.max(a_err).max(spec_err).max(alpha_err);
    verdict(
        "A8",
        worst <= 0.01 && elapsed < 300.0,
        format!(
            "minimizer {c_err:.1e}, a {a_err:.1e}, spectrum {spec_err:.1e}, alpha0 {alpha_err:.1e}, {elapsed:.1} s"
        ),
    );
}

#[test]
fn a09_monte_carlo_laplace() {
    let start = Instant::now();
    let (spec, vf, functional) = builtin("linear", "quadratic");
    let f = functional.as_functional();
    let params = recipe(vf.as_ref(), 10, 909);
    let SystemSpec::Linear(sys) = &spec else { unreachable!() };
    let oracle = DiscreteGaussianOracle::new(sys, f, &CovarianceFactor::new(&params).unwrap()).unwrap();
    let basis = CmBasis::new(&params, 64, params.level).unwrap();
    let shift = minimize_rate_discrete(&params, vf.as_ref(), f, &basis, &MinimizeOptions::default()).unwrap();
    let h = basis.realize(&shift.coeffs);
    let report = ldp_scale_experiment(&params, vf.as_ref(), f, &[0.5, 0.25], 10_000, oracle.value_a, Some(&h)).unwrap();
    let mut worst_z = 0.0f64;
    for r in &report.rows {
        let z = (r.laplace_ratio - oracle.laplace_ratio).abs() / r.laplace_ratio_stderr;
        println!(
            "  eps {}: ratio {:.6} +- {:.6} vs {:.6} (z = {z:.2}), gap {:.5}",
            r.eps, r.laplace_ratio, r.laplace_ratio_stderr, oracle.laplace_ratio, r.gap
        );
        worst_z = worst_z.max(z);
    }
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        "A9",
        worst_z <= 3.0 && report.gap_decreasing && elapsed < 300.0,
        format!("worst z {worst_z:.2}, gap decreasing {}, {elapsed:.1} s", report.gap_decreasing),
    );
}

#[test]
fn a10_truncation_stability() {
    let mut worst = 0.0f64;
    let mut detail = Vec::new();
    for (system, functional) in [("linear", "quadratic"), ("scalar-poly", "terminal-smooth")] {
        let (_, vf, spec) = builtin(system, functional);
        let f = spec.as_functional();
        let params = recipe(vf.as_ref(), 10, 1010);
        let values: Vec<f64> = [32, 64]
            .iter()
            .map(|&n| {
                let basis = CmBasis::new(&params, n, params.level).unwrap();
                let m = minimize_rate(vf.as_ref(), f, &basis, &MinimizeOptions::default()).unwrap();
                let lambda = estimate_lambda(&params, vf.as_ref(), f, &basis, &m.coeffs, 2000).unwrap();
                let asm = assemble_hessian(&params, vf.as_ref(), f, &basis, &m.coeffs).unwrap().with_lambda(lambda);
                alpha0(&asm).unwrap().alpha0
            })
            .collect();
        let gap = rel(values[0], values[1]);
        detail.push(format!("{system}: {:.6} vs {:.6} ({:.2}%)", values[0], values[1], 100.0 * gap));
        worst = worst.max(gap);
    }
    verdict("A10", worst <= 0.02, detail.join(", "));
}

fn numeric_csvs(dir: &Path) -> Vec<(String, String)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            let text = fs::read_to_string(&p).unwrap();
            // the MC log ends with a wall-clock column
            let text = if name == "mc_log.csv" {
                text.lines().map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head)).collect::<Vec<_>>().join("\n")
            } else {
                text
            };
            (name, text)
        })
        .collect()
}

#[test]
fn a11_reproducibility() {
    let root = tempfile::tempdir().unwrap();
    let runs = [
        vec!["ldp", "--level", "6", "--samples", "300", "--truncation", "8", "--seed", "11"],
        vec!["lift-convergence", "--level", "7", "--samples", "40", "--seed", "12"],
        vec!["hessian", "--system", "scalar-poly", "--level", "6", "--truncation", "6", "--samples", "200"],
    ];
    let mut compared = 0;
    let mut identical = true;
    for (i, args) in runs.iter().enumerate() {
        let outputs: Vec<_> = ["first", "second"]
            .iter()
            .map(|tag| {
                let dir = root.path().join(format!("{i}-{tag}"));
                let mut argv = vec!["mixrough".to_string()];
                argv.extend(args.iter().map(|s| s.to_string()));
                argv.extend(["--out".to_string(), dir.to_string_lossy().into_owned()]);
                let jobs = if *tag == "first" { "1" } else { "3" };
                argv.extend(["--jobs".to_string(), jobs.to_string()]);
                assert_eq!(mixrough::cli::run(argv), 0, "{args:?}");
                numeric_csvs(&dir)
            })
            .collect();
        compared += outputs[0].len();
        identical &= !outputs[0].is_empty() && outputs[0] == outputs[1];
    }
    verdict("A11", identical, format!("{compared} CSV files compared across 3 subcommands"));
}
