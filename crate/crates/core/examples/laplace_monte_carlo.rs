//! Importance-shifted Monte Carlo of `J(eps)` on the linear toy against the
//! exact Gaussian integral of the discretized model. Prints the Laplace
//! ratio `J e^{a/eps^2}` and the large-deviation gap per noise level.

use mixrough::drivers::CmBasis;
use mixrough::integrator::SystemSpec;
use mixrough::laplace::oracle::DiscreteGaussianOracle;
use mixrough::laplace::{minimize_rate_discrete, FunctionalSpec, MinimizeOptions};
use mixrough::montecarlo::ldp_scale_experiment;
use mixrough::{CovarianceFactor, ParamSet};

fn main() -> mixrough::Result<()> {
    let spec = SystemSpec::builtin("linear")?;
    let SystemSpec::Linear(sys) = &spec else { unreachable!() };
    let vf = spec.clone().into_field();
    let params = ParamSet::from_recipe(0.4, 0.01, vf.fbm_dim(), vf.bm_dim(), vf.state_dim(), 8, 2)?;
    let functional = FunctionalSpec::builtin("quadratic", vf.state_dim())?;
    let f = functional.as_functional();

    let oracle = DiscreteGaussianOracle::new(sys, f, &CovarianceFactor::new(&params)?)?;
    println!("oracle: a = {:.8}, J e^(a/eps^2) = {:.6}", oracle.value_a, oracle.laplace_ratio);

    let basis = CmBasis::new(&params, 32, params.level)?;
    let shift = minimize_rate_discrete(&params, vf.as_ref(), f, &basis, &MinimizeOptions::default())?;
    let report = ldp_scale_experiment(
        &params,
        vf.as_ref(),
        f,
        &[1.0, 0.5, 0.25, 0.125],
        2000,
        oracle.value_a,
        Some(&basis.realize(&shift.coeffs)),
    )?;
    println!("{:>6} {:>12} {:>12} {:>10} {:>10}", "eps", "ratio", "stderr", "gap", "z");
    for r in &report.rows {
        let z = (r.laplace_ratio - oracle.laplace_ratio) / r.laplace_ratio_stderr;
        println!(
            "{:>6} {:>12.6} {:>12.2e} {:>10.4} {:>10.2}",
            r.eps, r.laplace_ratio, r.laplace_ratio_stderr, r.gap, z
        );
    }
    println!("gap decreasing: {}", report.gap_decreasing);
    Ok(())
}
