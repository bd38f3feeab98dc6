//! Remainder of the second-order expansion `phi0 + eps phi1 + eps^2 phi2`
//! of the shifted solution; the log-log slope should be close to 3.

use mixrough::drivers::CmBasis;
use mixrough::integrator::{taylor_check, SystemSpec};
use mixrough::ParamSet;

fn main() -> mixrough::Result<()> {
    let vf = SystemSpec::builtin("scalar-poly")?.into_field();
    let params = ParamSet::from_recipe(0.4, 0.01, vf.fbm_dim(), vf.bm_dim(), vf.state_dim(), 8, 1)?;
    let basis = CmBasis::new(&params, 4, params.level)?;
    let shift = basis.realize(&vec![0.2; basis.len()]);
    let grid = [0.2, 0.1, 0.05, 0.025];
    for order in [1u8, 2] {
        let report = taylor_check(&params, vf.as_ref(), &shift, &grid, 200, order)?;
        println!("order {order}: slope {:.3}", report.slope);
        for r in &report.rows {
            println!("  eps {:>6}: {:.4e} +- {:.1e}", r.eps, r.mean_remainder, r.stderr);
        }
    }
    Ok(())
}
