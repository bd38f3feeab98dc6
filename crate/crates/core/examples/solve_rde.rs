//! Solves the scalar polynomial toy for a sampled driver at several noise
//! levels, and shows the eps = 0 solution coincides with the skeleton.

use mixrough::drivers::{sample_mixed_path, GridPath};
use mixrough::integrator::{solve_rde, solve_skeleton, SystemSpec};
use mixrough::rough::dyadic_lift;
use mixrough::{CovarianceFactor, ParamSet};

fn main() -> mixrough::Result<()> {
    let vf = SystemSpec::builtin("scalar-poly")?.into_field();
    let params = ParamSet::from_recipe(0.4, 0.01, vf.fbm_dim(), vf.bm_dim(), vf.state_dim(), 10, 5)?;
    let factor = CovarianceFactor::new(&params)?;
    let lift = dyadic_lift(&sample_mixed_path(&params, &factor, 0)?);

    let skeleton = solve_skeleton(&GridPath::zeros(params.dim(), params.level), vf.as_ref())?;
    let at_zero = solve_rde(&lift, 0.0, vf.as_ref(), None, None)?;
    println!("|Y^0 - skeleton|_sup = {:.1e}", at_zero.sup_distance(&skeleton)?);

    for eps in [1.0, 0.5, 0.1] {
        let fine = solve_rde(&lift, eps, vf.as_ref(), None, None)?;
        let coarse = solve_rde(&lift, eps, vf.as_ref(), None, Some(6))?;
        println!(
            "eps {eps:>4}: Y_1 = {:+.6}, coarse-step (2^6) Y_1 = {:+.6}",
            fine.terminal()[0],
            coarse.terminal()[0]
        );
    }
    Ok(())
}
