//! Rate minimization on the truncated Cameron–Martin basis, in the basis
//! geometry and in the exact discrete geometry, with the quadratic-program
//! oracle as a cross-check on the linear toy.

use mixrough::drivers::CmBasis;
use mixrough::integrator::SystemSpec;
use mixrough::laplace::oracle::QuadraticProgramOracle;
use mixrough::laplace::{minimize_rate, minimize_rate_discrete, FunctionalSpec, MinimizeOptions};
use mixrough::ParamSet;

fn main() -> mixrough::Result<()> {
    let vf = SystemSpec::builtin("linear")?.into_field();
    let params = ParamSet::from_recipe(0.4, 0.01, vf.fbm_dim(), vf.bm_dim(), vf.state_dim(), 8, 0)?;
    let functional = FunctionalSpec::builtin("quadratic", vf.state_dim())?;
    let f = functional.as_functional();
    let basis = CmBasis::new(&params, 32, params.level)?;
    let opts = MinimizeOptions::default();

    let r = minimize_rate(vf.as_ref(), f, &basis, &opts)?;
    println!(
        "basis geometry:    a = {:.8}, |grad| = {:.1e}, {} iterations, starts agree: {}",
        r.value_a, r.gradient_norm, r.iterations, r.starts_agree
    );
    let qp = QuadraticProgramOracle::new(vf.as_ref(), f, &basis, None)?;
    let gap = r.coeffs.iter().zip(&qp.minimizer).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    println!("oracle:            a = {:.8}, max coefficient gap {gap:.1e}", qp.value_a);

    let d = minimize_rate_discrete(&params, vf.as_ref(), f, &basis, &opts)?;
    println!("discrete geometry: a = {:.8}", d.value_a);
    for rec in r.log.iter().take(5) {
        println!("  iter {:>3}: F = {:.10}, |grad| = {:.2e}", rec.iteration, rec.value, rec.gradient_norm);
    }
    Ok(())
}
