//! Jacobian flows along a skeleton and the two routes to the first and
//! second variations: closed forms through `M` and direct ODE tangents.

use mixrough::drivers::CmBasis;
use mixrough::integrator::{FlowBundle, SystemSpec};
use mixrough::ParamSet;

fn main() -> mixrough::Result<()> {
    let vf = SystemSpec::builtin("scalar-poly")?.into_field();
    let params = ParamSet::from_recipe(0.4, 0.01, vf.fbm_dim(), vf.bm_dim(), vf.state_dim(), 10, 0)?;
    let basis = CmBasis::new(&params, 4, params.level)?;
    let coeffs: Vec<f64> = (0..basis.len()).map(|j| 0.3 / (1.0 + j as f64)).collect();
    let flows = FlowBundle::new(vf.as_ref(), &basis.realize(&coeffs))?;
    println!("max |M M^-1 - I| = {:.1e}", flows.inverse_defect());

    let (f, k) = (basis.realize_entry(2), basis.realize_entry(5));
    let chi = flows.chi(&f)?;
    let chi_direct = flows.chi_direct(&f)?;
    println!("chi: closed form vs direct, sup gap {:.2e}", chi.sup_distance(&chi_direct)?);

    let psi = flows.second_variation(&f, &k)?;
    let psi_direct = flows.second_variation_direct(&f, &k)?;
    println!("psi2: closed form vs direct, sup gap {:.2e}", psi.total().sup_distance(&psi_direct)?);
    let v1 = flows.v1_from_r_terms(&f, &k)?;
    println!("V1 from R1/R2 vs V1, sup gap {:.2e}", v1.sup_distance(&psi.v1)?);

    println!("theta1: sup gap {:.2e}", flows.theta1().sup_distance(&flows.theta1_direct()?)?);
    println!("phi1 residual: {:.2e}", flows.phi1_residual(&k)?);
    Ok(())
}
